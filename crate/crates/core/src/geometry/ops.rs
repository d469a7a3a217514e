//! Intrinsic vector calculus on `(Ω, g)` in a single coordinate chart.
//!
//! All differential operators use second-order central differences and are
//! evaluated at interior nodes only. Orientation is right handed:
//! `dμ(e₁, e₂, e₃) = √g > 0`. With the opposite orientation `rot` and `∧`
//! flip sign globally.
//!
//! Coordinate expressions:
//!
//! ```text
//! (∇α)^i      = g^{ik} ∂_k α
//! div u       = g^{-1/2} ∂_i(√g u^i)
//! (rot u)^k   = g^{-1/2} ε^{kij} ∂_i (g_{jm} u^m)
//! (u ∧ v)^k   = √g ε_{ijm} u^i v^j g^{mk}
//! ```

use crate::geometry::field::check_dims;
use crate::geometry::{GridDomain, MetricField, ScalarField, Sym3, VectorField};
use crate::{Error, Result};

#[inline]
fn central(dom: &GridDomain, node: usize, axis: usize, f: impl Fn(usize) -> f64) -> f64 {
    let p = dom.step(node, axis, 1).expect("interior node has neighbors");
    let m = dom.step(node, axis, -1).expect("interior node has neighbors");
    (f(p) - f(m)) / (2.0 * dom.spacing()[axis])
}

fn require_depth(dom: &GridDomain, node: usize, depth: u32) -> Result<()> {
    if node >= dom.len() {
        return Err(Error::BadNode {
            node,
            reason: "out of range".into(),
        });
    }
    let d = dom.depth(node);
    if d == u32::MAX || d < depth {
        let reason = if depth <= 1 {
            "operators are evaluated at interior nodes only".to_string()
        } else {
            format!("needs depth ≥ {depth}, node has depth {}", if d == u32::MAX { 0 } else { d })
        };
        return Err(Error::BadNode { node, reason });
    }
    Ok(())
}

#[inline]
pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Pointwise `g(u, v)`.
#[inline]
pub fn inner_at(g: &Sym3, u: [f64; 3], v: [f64; 3]) -> f64 {
    g.quad(u, v)
}

/// Pointwise vector product: the unique `w` with `g(u ∧ v, ·) = dμ(u, v, ·)`.
#[inline]
pub fn cross_at(ginv: &Sym3, sqrt_det: f64, u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    // Lowered components of u ∧ v are √g (u × v) with the flat cross product.
    let c = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    ginv.mul_vec(c.map(|x| x * sqrt_det))
}

/// `dμ(u, v, w) = √g det[u v w]`.
pub fn volume_form_at(sqrt_det: f64, u: [f64; 3], v: [f64; 3], w: [f64; 3]) -> f64 {
    let c = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    sqrt_det * dot3(c, w)
}

pub fn inner(u: &VectorField, v: &VectorField, g: &MetricField) -> Result<ScalarField> {
    check_dims(g.dims(), u.dims())?;
    check_dims(g.dims(), v.dims())?;
    let data = (0..u.values().len())
        .map(|i| inner_at(g.at(i), u.get(i), v.get(i)))
        .collect();
    ScalarField::from_vec(g.dims(), data)
}

pub fn vector_product(u: &VectorField, v: &VectorField, g: &MetricField) -> Result<VectorField> {
    check_dims(g.dims(), u.dims())?;
    check_dims(g.dims(), v.dims())?;
    let data = (0..u.values().len())
        .map(|i| cross_at(g.inv(i), g.sqrt_det(i), u.get(i), v.get(i)))
        .collect();
    VectorField::from_vec(g.dims(), data)
}

fn check3(dom: &GridDomain, g: &MetricField, dims: [usize; 3]) -> Result<()> {
    check_dims(dom.dims(), g.dims())?;
    check_dims(dom.dims(), dims)
}

#[inline]
fn grad_raw(dom: &GridDomain, g: &MetricField, a: &ScalarField, node: usize) -> [f64; 3] {
    let d = [0, 1, 2].map(|k| central(dom, node, k, |p| a.get(p)));
    g.inv(node).mul_vec(d)
}

#[inline]
fn div_raw(dom: &GridDomain, g: &MetricField, u: impl Fn(usize) -> [f64; 3], node: usize) -> f64 {
    let s: f64 = (0..3)
        .map(|i| central(dom, node, i, |p| g.sqrt_det(p) * u(p)[i]))
        .sum();
    s / g.sqrt_det(node)
}

#[inline]
fn rot_raw(dom: &GridDomain, g: &MetricField, u: impl Fn(usize) -> [f64; 3], node: usize) -> [f64; 3] {
    let low = |p: usize, j: usize| g.at(p).mul_vec(u(p))[j];
    let d = |i: usize, j: usize| central(dom, node, i, |p| low(p, j));
    let r = 1.0 / g.sqrt_det(node);
    [
        (d(1, 2) - d(2, 1)) * r,
        (d(2, 0) - d(0, 2)) * r,
        (d(0, 1) - d(1, 0)) * r,
    ]
}

/// `∇α` at one interior node.
pub fn grad_at(dom: &GridDomain, g: &MetricField, a: &ScalarField, node: usize) -> Result<[f64; 3]> {
    check3(dom, g, a.dims())?;
    require_depth(dom, node, 1)?;
    Ok(grad_raw(dom, g, a, node))
}

pub fn div_at(dom: &GridDomain, g: &MetricField, u: &VectorField, node: usize) -> Result<f64> {
    check3(dom, g, u.dims())?;
    require_depth(dom, node, 1)?;
    Ok(div_raw(dom, g, |p| u.get(p), node))
}

pub fn rot_at(dom: &GridDomain, g: &MetricField, u: &VectorField, node: usize) -> Result<[f64; 3]> {
    check3(dom, g, u.dims())?;
    require_depth(dom, node, 1)?;
    Ok(rot_raw(dom, g, |p| u.get(p), node))
}

/// `Δα` at one interior node.
///
/// At depth ≥ 2 this is exactly `div(grad α)` assembled from central
/// differences; at depth 1 (where `grad` would be needed on the boundary) the
/// compact flux stencil of [`flux_stencil`] is used instead.
pub fn laplacian_at(dom: &GridDomain, g: &MetricField, a: &ScalarField, node: usize) -> Result<f64> {
    check3(dom, g, a.dims())?;
    require_depth(dom, node, 1)?;
    Ok(laplacian_raw(dom, g, a, node))
}

fn laplacian_raw(dom: &GridDomain, g: &MetricField, a: &ScalarField, node: usize) -> f64 {
    if dom.depth(node) >= 2 {
        div_raw(dom, g, |p| grad_raw(dom, g, a, p), node)
    } else {
        let s: f64 = flux_stencil(dom, g, node)
            .iter()
            .map(|&(m, c)| c * a.get(m))
            .sum();
        s / g.sqrt_det(node)
    }
}

/// `Δ⃗u = ∇ div u − rot rot u` at one node of depth ≥ 2.
pub fn vector_laplacian_at(dom: &GridDomain, g: &MetricField, u: &VectorField, node: usize) -> Result<[f64; 3]> {
    check3(dom, g, u.dims())?;
    require_depth(dom, node, 2)?;
    Ok(vector_laplacian_raw(dom, g, u, node))
}

fn vector_laplacian_raw(dom: &GridDomain, g: &MetricField, u: &VectorField, node: usize) -> [f64; 3] {
    let div_u = |p: usize| div_raw(dom, g, |q| u.get(q), p);
    let dd = [0, 1, 2].map(|k| central(dom, node, k, div_u));
    let gd = g.inv(node).mul_vec(dd);
    let rr = rot_raw(dom, g, |p| rot_raw(dom, g, |q| u.get(q), p), node);
    [gd[0] - rr[0], gd[1] - rr[1], gd[2] - rr[2]]
}

fn over_interior_scalar(dom: &GridDomain, min_depth: u32, f: impl Fn(usize) -> f64) -> ScalarField {
    let mut out = ScalarField::zeros(dom);
    for &n in dom.interior_nodes() {
        if dom.depth(n) >= min_depth {
            out.set(n, f(n));
        }
    }
    out
}

fn over_interior_vector(dom: &GridDomain, min_depth: u32, f: impl Fn(usize) -> [f64; 3]) -> VectorField {
    let mut out = VectorField::zeros(dom);
    for &n in dom.interior_nodes() {
        if dom.depth(n) >= min_depth {
            out.set(n, f(n));
        }
    }
    out
}

/// `∇α` at every interior node (zero elsewhere).
pub fn grad(dom: &GridDomain, g: &MetricField, a: &ScalarField) -> Result<VectorField> {
    check3(dom, g, a.dims())?;
    Ok(over_interior_vector(dom, 1, |n| grad_raw(dom, g, a, n)))
}

pub fn div(dom: &GridDomain, g: &MetricField, u: &VectorField) -> Result<ScalarField> {
    check3(dom, g, u.dims())?;
    Ok(over_interior_scalar(dom, 1, |n| div_raw(dom, g, |p| u.get(p), n)))
}

pub fn rot(dom: &GridDomain, g: &MetricField, u: &VectorField) -> Result<VectorField> {
    check3(dom, g, u.dims())?;
    Ok(over_interior_vector(dom, 1, |n| rot_raw(dom, g, |p| u.get(p), n)))
}

pub fn laplacian(dom: &GridDomain, g: &MetricField, a: &ScalarField) -> Result<ScalarField> {
    check3(dom, g, a.dims())?;
    let gr = grad(dom, g, a)?;
    Ok(over_interior_scalar(dom, 1, |n| {
        if dom.depth(n) >= 2 {
            div_raw(dom, g, |p| gr.get(p), n)
        } else {
            laplacian_raw(dom, g, a, n)
        }
    }))
}

/// Vector Laplacian at nodes of depth ≥ 2 (zero elsewhere).
pub fn vector_laplacian(dom: &GridDomain, g: &MetricField, u: &VectorField) -> Result<VectorField> {
    check3(dom, g, u.dims())?;
    Ok(over_interior_vector(dom, 2, |n| vector_laplacian_raw(dom, g, u, n)))
}

/// Coefficients of the compact flux form `Σ_ik D_i(√g g^{ik} D_k ·)` at an
/// interior node (so that `Δα = g^{-1/2} Σ c_m α_m`).
///
/// Diagonal terms use arithmetic means of `√g g^{ii}` at cell midpoints; mixed
/// terms use the symmetric 19-point rule. The resulting matrix is symmetric.
pub fn flux_stencil(dom: &GridDomain, g: &MetricField, node: usize) -> Vec<(usize, f64)> {
    let h = dom.spacing();
    let coef = |p: usize, i: usize, k: usize| g.sqrt_det(p) * g.inv(p).get(i, k);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(19);
    let mut center = 0.0;
    for i in 0..3 {
        let p = dom.step(node, i, 1).expect("interior");
        let m = dom.step(node, i, -1).expect("interior");
        let ap = 0.5 * (coef(node, i, i) + coef(p, i, i)) / (h[i] * h[i]);
        let am = 0.5 * (coef(node, i, i) + coef(m, i, i)) / (h[i] * h[i]);
        out.push((p, ap));
        out.push((m, am));
        center -= ap + am;
    }
    for i in 0..3 {
        for k in (i + 1)..3 {
            for si in [-1i64, 1] {
                for sk in [-1i64, 1] {
                    let pi = dom.step(node, i, si).expect("interior");
                    let pk = dom.step(node, k, sk).expect("interior");
                    let (ci, ck) = (coef(pi, i, k), coef(pk, i, k));
                    if ci == 0.0 && ck == 0.0 {
                        continue;
                    }
                    let mut d = [0i64; 3];
                    d[i] = si;
                    d[k] = sk;
                    let target = dom.shift(node, d).expect("diagonal neighbor inside lattice");
                    let s = (si * sk) as f64;
                    out.push((target, s * (ci + ck) / (4.0 * h[i] * h[k])));
                }
            }
        }
    }
    out.push((node, center));
    out
}

/// Coordinate derivative along `axis` at any domain node: central when both
/// neighbors are in the domain, otherwise second-order one-sided.
pub fn partial_full(dom: &GridDomain, f: &[f64], node: usize, axis: usize) -> f64 {
    let h = dom.spacing()[axis];
    let ok = |s: i64| dom.step(node, axis, s).filter(|&m| dom.in_domain(m));
    match (ok(1), ok(-1)) {
        (Some(p), Some(m)) => (f[p] - f[m]) / (2.0 * h),
        (Some(p), None) => match ok(2) {
            Some(pp) => (-3.0 * f[node] + 4.0 * f[p] - f[pp]) / (2.0 * h),
            None => (f[p] - f[node]) / h,
        },
        (None, Some(m)) => match ok(-2) {
            Some(mm) => (3.0 * f[node] - 4.0 * f[m] + f[mm]) / (2.0 * h),
            None => (f[node] - f[m]) / h,
        },
        (None, None) => 0.0,
    }
}

/// Gradient on interior and boundary nodes; one-sided second-order
/// differences where a central stencil would leave the domain.
pub fn grad_with_boundary(dom: &GridDomain, g: &MetricField, a: &ScalarField) -> Result<VectorField> {
    check3(dom, g, a.dims())?;
    let mut out = VectorField::zeros(dom);
    let f = a.values();
    for n in 0..dom.len() {
        if !dom.in_domain(n) {
            continue;
        }
        let d = [0, 1, 2].map(|k| partial_full(dom, f, n, k));
        out.set(n, g.inv(n).mul_vec(d));
    }
    Ok(out)
}

/// Largest residuals of `rot ∇α` and `div rot u` two layers inside, relative
/// to the sup of `∇α` and `rot u`, for seeded smooth `α` and `u`.
pub fn calculus_residuals(dom: &GridDomain, g: &MetricField, seed: u64) -> Result<(f64, f64)> {
    let a = crate::geometry::SmoothRandom::new(seed, 6).sample(dom);
    let u = crate::geometry::SmoothRandom::vector(seed.wrapping_add(1), 6, dom);
    let ga = grad(dom, g, &a)?;
    let ru = rot(dom, g, &u)?;
    let norm = |n: usize, v: [f64; 3]| g.at(n).quad(v, v).sqrt();
    let deep = dom.nodes_with_depth(2);
    let sup = |f: &VectorField| deep.iter().map(|&n| norm(n, f.get(n))).fold(0.0, f64::max);
    let (sg, sr) = (sup(&ga), sup(&ru));
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for &n in &deep {
        e1 = e1.max(norm(n, rot_at(dom, g, &ga, n)?));
        e2 = e2.max(div_at(dom, g, &ru, n)?.abs());
    }
    Ok((e1 / sg.max(f64::MIN_POSITIVE), e2 / sr.max(f64::MIN_POSITIVE)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricPreset;

    fn setup(n: usize) -> (GridDomain, MetricField) {
        let d = GridDomain::unit_box(n).unwrap();
        let g = MetricField::flat(&d);
        (d, g)
    }

    #[test]
    fn inner_examples() {
        let (d, g) = setup(5);
        let e1 = VectorField::constant(&d, [1.0, 0.0, 0.0]);
        let e2 = VectorField::constant(&d, [0.0, 1.0, 0.0]);
        assert!(inner(&e1, &e1, &g).unwrap().values().iter().all(|&v| v == 1.0));
        assert!(inner(&e1, &e2, &g).unwrap().values().iter().all(|&v| v == 0.0));
        let g4 = MetricField::constant(&d, Sym3::diag([4.0, 1.0, 1.0])).unwrap();
        assert!(inner(&e1, &e1, &g4).unwrap().values().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn vector_product_examples() {
        let (d, g) = setup(5);
        let e1 = VectorField::constant(&d, [1.0, 0.0, 0.0]);
        let e2 = VectorField::constant(&d, [0.0, 1.0, 0.0]);
        assert_eq!(vector_product(&e1, &e2, &g).unwrap().get(7), [0.0, 0.0, 1.0]);
        let g4 = MetricField::constant(&d, Sym3::diag([1.0, 1.0, 4.0])).unwrap();
        let w = vector_product(&e1, &e2, &g4).unwrap().get(3);
        assert!((w[2] - 0.5).abs() < 1e-15 && w[0] == 0.0 && w[1] == 0.0);
        assert_eq!(vector_product(&e2, &e2, &g4).unwrap().get(3), [0.0; 3]);
    }

    #[test]
    fn defining_identity_of_wedge_curved() {
        let d = GridDomain::unit_box(7).unwrap();
        let g = MetricField::from_preset(&d, &MetricPreset::GenericSmooth { amplitude: 0.3 }).unwrap();
        let u = VectorField::from_fn(&d, |x| [x[0].sin(), x[1] - 0.3, x[2] * x[0]]);
        let v = VectorField::from_fn(&d, |x| [0.2 + x[2], x[0].cos(), -x[1]]);
        let w = vector_product(&u, &v, &g).unwrap();
        let mut worst = 0.0f64;
        for n in 0..d.len() {
            for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                let lhs = g.at(n).quad(w.get(n), e);
                let rhs = volume_form_at(g.sqrt_det(n), u.get(n), v.get(n), e);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn flat_reductions_on_polynomials() {
        let (d, g) = setup(9);
        let lin = ScalarField::from_fn(&d, |x| x[0]);
        let gl = grad(&d, &g, &lin).unwrap();
        for &n in d.interior_nodes() {
            let v = gl.get(n);
            assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13 && v[2].abs() < 1e-13);
        }
        let u = VectorField::from_fn(&d, |x| [0.0, x[2], -x[1]]);
        let r = rot(&d, &g, &u).unwrap();
        let dv = div(&d, &g, &u).unwrap();
        for &n in d.interior_nodes() {
            let v = r.get(n);
            assert!((v[0] + 2.0).abs() < 1e-12 && v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
            assert!(dv.get(n).abs() < 1e-12);
        }
        let q = ScalarField::from_fn(&d, |x| x[0] * x[0] - x[1] * x[1]);
        let lq = laplacian(&d, &g, &q).unwrap();
        assert!(lq.sup_over(d.interior_nodes()) < 1e-11);
        let q2 = ScalarField::from_fn(&d, |x| x[0] * x[0] + 2.0 * x[1] * x[2]);
        let lq2 = laplacian(&d, &g, &q2).unwrap();
        for &n in d.interior_nodes() {
            assert!((lq2.get(n) - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_matches_div_grad_two_layers_in() {
        let d = GridDomain::unit_box(11).unwrap();
        let g = MetricField::from_preset(&d, &MetricPreset::GenericSmooth { amplitude: 0.3 }).unwrap();
        let a = ScalarField::from_fn(&d, |x| (2.0 * x[0]).sin() * x[1].exp() + x[2] * x[2]);
        let lap = laplacian(&d, &g, &a).unwrap();
        let dg = div(&d, &g, &grad(&d, &g, &a).unwrap()).unwrap();
        for n in d.nodes_with_depth(2) {
            assert!((lap.get(n) - dg.get(n)).abs() < 1e-12);
            assert_eq!(lap.get(n), laplacian_at(&d, &g, &a, n).unwrap());
        }
    }

    #[test]
    fn evaluation_off_interior_is_an_error() {
        let (d, g) = setup(5);
        let a = ScalarField::zeros(&d);
        assert!(grad_at(&d, &g, &a, 0).is_err());
        let u = VectorField::zeros(&d);
        let center = d.nearest_node([0.5; 3]);
        assert!(vector_laplacian_at(&d, &g, &u, center).is_ok());
        let shallow = d.index([1, 2, 2]);
        assert!(vector_laplacian_at(&d, &g, &u, shallow).is_err());
    }

    #[test]
    fn flux_stencil_is_symmetric() {
        let d = GridDomain::unit_box(7).unwrap();
        let g = MetricField::from_preset(&d, &MetricPreset::GenericSmooth { amplitude: 0.3 }).unwrap();
        let mut entries = std::collections::HashMap::new();
        for &n in d.interior_nodes() {
            for (m, c) in flux_stencil(&d, &g, n) {
                *entries.entry((n, m)).or_insert(0.0) += c;
            }
        }
        for (&(n, m), &c) in &entries {
            if d.is_interior(m) {
                let t = entries.get(&(m, n)).copied().unwrap_or(0.0);
                assert!((c - t).abs() < 1e-12, "({n},{m}) {c} vs {t}");
            }
        }
    }
}
