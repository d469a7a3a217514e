use proptest::prelude::*;

use quatfield::analysis::{probe_basis, uniqueness_probe, SurfacePatch};
use quatfield::cli::Cell;
use quatfield::control::Dictionary;
use quatfield::density::FrameCover;
use quatfield::elliptic::{BoundaryControl, DirichletOperator};
use quatfield::geometry::ops::{cross_at, inner_at, volume_form_at};
use quatfield::geometry::{div, grad, laplacian, MetricPreset, SmoothRandom, Sym3};
use quatfield::jets::{extract_jet, Jet2};
use quatfield::quaternion::{qmul, qnorm, Quaternion};
use quatfield::{GridDomain, MaskSpec, MetricField, NodeKind, ScalarField};

fn unit() -> impl Strategy<Value = f64> {
    -1.0f64..=1.0
}

fn vec3() -> impl Strategy<Value = [f64; 3]> {
    [unit(), unit(), unit()]
}

/// SPD matrix `AᵀA + 0.2 I` from a random `A`.
fn spd() -> impl Strategy<Value = Sym3> {
    [vec3(), vec3(), vec3()].prop_map(|a| {
        let m: [[f64; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| a[k][i] * a[k][j]).sum::<f64>() + if i == j { 0.2 } else { 0.0 })
        });
        Sym3::from_matrix(m)
    })
}

fn quat() -> impl Strategy<Value = (f64, [f64; 3])> {
    (unit(), vec3())
}

fn tiny() -> (GridDomain, usize) {
    (GridDomain::unit_box(5).unwrap(), 62)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn product_is_associative_and_norm_multiplicative(m in spd(), p in quat(), q in quat(), r in quat()) {
        let (dom, n) = tiny();
        let g = MetricField::constant(&dom, m).unwrap();
        let (p, q, r) = (Quaternion::new(p.0, p.1, n), Quaternion::new(q.0, q.1, n), Quaternion::new(r.0, r.1, n));
        let a = qmul(&qmul(&p, &q, &g).unwrap(), &r, &g).unwrap();
        let b = qmul(&p, &qmul(&q, &r, &g).unwrap(), &g).unwrap();
        let scale = 1.0 + qnorm(&p, &g) * qnorm(&q, &g) * qnorm(&r, &g);
        prop_assert!((a.scalar - b.scalar).abs() < 1e-12 * scale);
        for k in 0..3 {
            prop_assert!((a.vector[k] - b.vector[k]).abs() < 1e-12 * scale * m.inverse().unwrap().frobenius().sqrt());
        }
        let pq = qmul(&p, &q, &g).unwrap();
        prop_assert!((qnorm(&pq, &g) - qnorm(&p, &g) * qnorm(&q, &g)).abs() < 1e-12 * scale);
    }

    #[test]
    fn unit_is_neutral_and_pure_vectors_square_to_minus_norm(m in spd(), p in quat()) {
        let (dom, n) = tiny();
        let g = MetricField::constant(&dom, m).unwrap();
        let p = Quaternion::new(p.0, p.1, n);
        let one = Quaternion::unit(n);
        prop_assert_eq!(qmul(&one, &p, &g).unwrap(), p);
        prop_assert_eq!(qmul(&p, &one, &g).unwrap(), p);
        let v = Quaternion::new(0.0, p.vector, n);
        let v2 = qmul(&v, &v, &g).unwrap();
        let len2 = m.quad(p.vector, p.vector);
        prop_assert!((v2.scalar + len2).abs() < 1e-12 * (1.0 + len2));
        prop_assert!(v2.vector.iter().all(|c| c.abs() < 1e-12 * (1.0 + len2)));
    }

    #[test]
    fn wedge_matches_volume_form(m in spd(), u in vec3(), v in vec3(), w in vec3()) {
        let sd = m.det().sqrt();
        let inv = m.inverse().unwrap();
        let lhs = inner_at(&m, cross_at(&inv, sd, u, v), w);
        let rhs = volume_form_at(sd, u, v, w);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn report_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = Cell::Float(x).to_string();
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
    }
}

fn cavity_domain(n: usize, lo: f64, w: f64) -> GridDomain {
    GridDomain::build([0.0; 3], [1.0; 3], [n; 3], MaskSpec::BoxMinusBox { lo: [lo; 3], hi: [lo + w; 3] }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interior_nodes_never_touch_exterior(n in 9usize..16, lo in 0.25f64..0.45, w in 0.1f64..0.3) {
        let dom = cavity_domain(n, lo, w);
        let (i, b, e) = dom.counts();
        prop_assert_eq!(i + b + e, n * n * n);
        for &node in dom.interior_nodes() {
            for m in dom.axis_neighbors(node) {
                prop_assert!(dom.kind(m) != NodeKind::Exterior);
            }
        }
    }

    #[test]
    fn boundary_normals_have_unit_length(n in 5usize..10, m in spd()) {
        let dom = GridDomain::unit_box(n).unwrap();
        let g = MetricField::constant(&dom, m).unwrap();
        for (b, nu) in dom.boundary_nodes().iter().zip(dom.boundary_normals(&g)) {
            let len = g.at(*b).quad(nu, nu).sqrt();
            prop_assert!((len - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_is_div_grad_two_layers_in(seed in any::<u64>(), amp in 0.0f64..0.4) {
        let dom = GridDomain::unit_box(9).unwrap();
        let g = MetricField::from_preset(&dom, &MetricPreset::GenericSmooth { amplitude: amp }).unwrap();
        let a = SmoothRandom::new(seed, 3).sample(&dom);
        let lap = laplacian(&dom, &g, &a).unwrap();
        let dg = div(&dom, &g, &grad(&dom, &g, &a).unwrap()).unwrap();
        for n in dom.nodes_with_depth(2) {
            prop_assert!((lap.get(n) - dg.get(n)).abs() < 1e-12 * (1.0 + lap.get(n).abs()));
        }
    }

    #[test]
    fn assembled_operator_is_symmetric(amp in 0.0f64..0.4, n in 5usize..12) {
        let dom = GridDomain::unit_box(n).unwrap();
        let g = MetricField::from_preset(&dom, &MetricPreset::GenericSmooth { amplitude: amp }).unwrap();
        let op = DirichletOperator::assemble(&g, &dom).unwrap();
        prop_assert!(op.symmetry_defect() < 1e-12);
    }

    #[test]
    fn harmonic_extension_obeys_maximum_principle(seed in any::<u64>(), n in 5usize..12) {
        use rand::{Rng, SeedableRng};
        let dom = GridDomain::unit_box(n).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&dom), &dom).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..dom.boundary_nodes().len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let f = BoundaryControl::new(&dom, vals).unwrap();
        let (lo, hi) = f.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let w = op.harmonic_extension(&f).unwrap();
        for &i in dom.interior_nodes() {
            prop_assert!(w.get(i) >= lo - 1e-10 && w.get(i) <= hi + 1e-10);
        }
    }

    #[test]
    fn green_columns_are_reciprocal(i in 0usize..1000, j in 0usize..1000, amp in 0.0f64..0.4) {
        let dom = GridDomain::unit_box(9).unwrap();
        let g = MetricField::from_preset(&dom, &MetricPreset::ConformalSine { amplitude: amp }).unwrap();
        let op = DirichletOperator::assemble(&g, &dom).unwrap();
        let inner = dom.interior_nodes();
        let (x, y) = (inner[i % inner.len()], inner[j % inner.len()]);
        let (gx, gy) = (op.green_column(x).unwrap(), op.green_column(y).unwrap());
        let scale = gx.field.get(x).abs();
        prop_assert!((gx.field.get(y) - gy.field.get(x)).abs() < 1e-9 * scale);
        prop_assert!(dom.boundary_nodes().iter().all(|&b| gx.field.get(b) == 0.0));
    }

    #[test]
    fn jets_are_exact_on_quadratics(c in proptest::collection::vec(unit(), 10), node in 0usize..10_000) {
        let dom = GridDomain::unit_box(11).unwrap();
        let deep = dom.nodes_with_depth(2);
        let a = deep[node % deep.len()];
        let x0 = dom.position(a);
        let phi = ScalarField::from_fn(&dom, |x| {
            let d = [x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]];
            c[0] + c[1] * d[0] + c[2] * d[1] + c[3] * d[2]
                + c[4] * d[0] * d[0] + c[5] * d[0] * d[1] + c[6] * d[0] * d[2]
                + c[7] * d[1] * d[1] + c[8] * d[1] * d[2] + c[9] * d[2] * d[2]
        });
        let j = extract_jet(&dom, &phi, a).unwrap();
        let hess = [
            [2.0 * c[4], c[5], c[6]],
            [c[5], 2.0 * c[7], c[8]],
            [c[6], c[8], 2.0 * c[9]],
        ];
        let want = Jet2::from_derivatives(c[0], [c[1], c[2], c[3]], hess);
        prop_assert!(j.sub(&want).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn partition_of_unity_sums_to_one(seed in any::<u64>()) {
        let dom = GridDomain::unit_box(9).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&dom), &dom).unwrap();
        let dict = Dictionary::standard(&dom, 24, seed);
        let cover = FrameCover::build(&op, &dict.controls).unwrap();
        prop_assert!(cover.partition_defect(&dom) < 1e-12);
        for (ball, eta) in cover.balls.iter().zip(&cover.partition) {
            for n in dom.domain_nodes() {
                if !ball.nodes.contains(&n) {
                    prop_assert_eq!(eta.get(n), 0.0);
                }
            }
        }
    }

    #[test]
    fn probe_ratio_ignores_field_scaling(scales in proptest::collection::vec(0.01f64..100.0, 9)) {
        let dom = GridDomain::unit_box(13).unwrap();
        let g = MetricField::flat(&dom);
        let op = DirichletOperator::assemble(&g, &dom).unwrap();
        let dict = Dictionary::standard(&dom, 6, 3);
        let ws = op.harmonic_extensions(&dict.controls[1..]).unwrap();
        let basis = probe_basis(&dom, &g, &ws).unwrap();
        prop_assert_eq!(basis.len(), scales.len());
        let patch = SurfacePatch::central(&dom, 2).unwrap();
        let base = uniqueness_probe(&dom, &g, &basis, &patch).unwrap().ratio;
        let scaled: Vec<_> = basis.iter().zip(&scales).map(|(p, &s)| p.scale(s)).collect();
        let r = uniqueness_probe(&dom, &g, &scaled, &patch).unwrap().ratio;
        prop_assert!((r - base).abs() < 1e-12 * base.max(1e-300) + 1e-14);
    }
}
