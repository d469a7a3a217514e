//! Boundary controllability of values and gradients at interior points, and
//! the two-point separation constructor for harmonic quaternion fields.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{BoundaryControl, DirichletOperator};
use crate::geometry::ops::grad_at;
use crate::geometry::{grad_with_boundary, GridDomain, MetricField, ScalarField, VectorField};
use crate::linalg::{min_norm_lstsq, numerical_rank, singular_values};
use crate::quaternion::{q_residual, QuaternionField};
use crate::{Error, Result};

/// Relative cut for the truncated SVD in control synthesis.
pub const SVD_CUT: f64 = 1e-8;
/// Relative defect below which a synthesis counts as a success.
pub const SUCCESS_DEFECT: f64 = 1e-2;
/// `σ_k/σ₁` threshold used for rank certificates.
pub const RANK_THRESHOLD: f64 = 1e-3;

/// Number of harmonic polynomials of degree ≤ 3 in three variables.
pub const N_HARMONIC: usize = 16;

/// Harmonic polynomial `k` (0..16) of degree ≤ 3 in the variables `s`.
pub fn harmonic_polynomial(k: usize, s: [f64; 3]) -> f64 {
    let [x, y, z] = s;
    match k {
        0 => 1.0,
        1 => x,
        2 => y,
        3 => z,
        4 => x * y,
        5 => y * z,
        6 => x * z,
        7 => x * x - y * y,
        8 => y * y - z * z,
        9 => z * (2.0 * z * z - 3.0 * x * x - 3.0 * y * y),
        10 => x * (4.0 * z * z - x * x - y * y),
        11 => y * (4.0 * z * z - x * x - y * y),
        12 => z * (x * x - y * y),
        13 => x * y * z,
        14 => x * (x * x - 3.0 * y * y),
        15 => y * (3.0 * x * x - y * y),
        _ => panic!("harmonic polynomial index {k} out of range"),
    }
}

/// Provenance of one dictionary control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ControlSpec {
    /// Trace of [`harmonic_polynomial`] in box-centered coordinates scaled by
    /// the largest half extent.
    HarmonicPolynomial { index: usize },
    /// Trace of a seeded random harmonic polynomial: a sum of four terms
    /// `c Re(e^{iφ} (a·s)^ℓ)` with `a` complex isotropic (`a·a = 0`) and
    /// `2 ≤ ℓ ≤ 5`, normalized to unit sup on the boundary. Traces of
    /// harmonic functions keep `w^f` smooth up to the box edges.
    Random { seed: u64, index: u64 },
}

/// `c Re(e^{iφ} (a·s)^ℓ)` with `a = u + iv`, `u ⊥ v`, `|u| = |v| = 1`.
struct SolidHarmonic {
    u: [f64; 3],
    v: [f64; 3],
    degree: u32,
    coef: f64,
    phase: f64,
}

impl SolidHarmonic {
    fn eval(&self, s: [f64; 3]) -> f64 {
        let p = self.u[0] * s[0] + self.u[1] * s[1] + self.u[2] * s[2];
        let q = self.v[0] * s[0] + self.v[1] * s[1] + self.v[2] * s[2];
        let (mut re, mut im) = (self.phase.cos(), self.phase.sin());
        for _ in 0..self.degree {
            (re, im) = (re * p - im * q, re * q + im * p);
        }
        self.coef * re
    }
}

fn random_solid_harmonic(rng: &mut ChaCha8Rng) -> SolidHarmonic {
    let unit = |rng: &mut ChaCha8Rng| loop {
        let w = [(); 3].map(|_| rng.gen_range(-1.0..=1.0f64));
        let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            break w.map(|c| c / n);
        }
    };
    let u = unit(rng);
    let v = loop {
        let w = unit(rng);
        let d = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
        let r = [0, 1, 2].map(|k| w[k] - d * u[k]);
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if n > 0.1 {
            break r.map(|c| c / n);
        }
    };
    SolidHarmonic {
        u,
        v,
        degree: rng.gen_range(2..=5),
        coef: rng.gen_range(-1.0..=1.0),
        phase: rng.gen_range(0.0..std::f64::consts::TAU),
    }
}

/// A reproducible list of boundary controls.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub specs: Vec<ControlSpec>,
    pub controls: Vec<BoundaryControl>,
}

fn centered(dom: &GridDomain, x: [f64; 3]) -> [f64; 3] {
    let (lo, hi) = (dom.lo(), dom.hi());
    let half = (0..3).map(|a| 0.5 * (hi[a] - lo[a])).fold(0.0, f64::max);
    [0, 1, 2].map(|a| (x[a] - 0.5 * (lo[a] + hi[a])) / half)
}

impl ControlSpec {
    pub fn realize(&self, dom: &GridDomain) -> BoundaryControl {
        match *self {
            ControlSpec::HarmonicPolynomial { index } => {
                BoundaryControl::from_fn(dom, |x| harmonic_polynomial(index, centered(dom, x)))
            }
            ControlSpec::Random { seed, index } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(index);
                let modes: Vec<_> = (0..4).map(|_| random_solid_harmonic(&mut rng)).collect();
                let raw = BoundaryControl::from_fn(dom, |x| {
                    let s = centered(dom, x);
                    modes.iter().map(|m| m.eval(s)).sum()
                });
                let sup = raw.sup();
                let scale = if sup > 0.0 { 1.0 / sup } else { 1.0 };
                BoundaryControl::new(dom, raw.values().iter().map(|v| v * scale).collect())
                    .expect("same boundary")
            }
        }
    }
}

impl Dictionary {
    /// The first `size` controls of the default family: the 16 harmonic
    /// polynomial traces, then seeded random band-limited data. Dictionaries
    /// with the same seed are nested.
    pub fn standard(dom: &GridDomain, size: usize, seed: u64) -> Self {
        let specs: Vec<ControlSpec> = (0..size)
            .map(|m| {
                if m < N_HARMONIC {
                    ControlSpec::HarmonicPolynomial { index: m }
                } else {
                    ControlSpec::Random {
                        seed,
                        index: (m - N_HARMONIC) as u64,
                    }
                }
            })
            .collect();
        Self::from_specs(dom, specs)
    }

    /// Random band-limited controls only.
    pub fn random(dom: &GridDomain, size: usize, seed: u64) -> Self {
        let specs = (0..size as u64).map(|index| ControlSpec::Random { seed, index }).collect();
        Self::from_specs(dom, specs)
    }

    pub fn from_specs(dom: &GridDomain, specs: Vec<ControlSpec>) -> Self {
        let controls = specs.par_iter().map(|s| s.realize(dom)).collect();
        Dictionary { specs, controls }
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }
    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }
}

/// Sampled `{w^f(aᵢ), ∇w^f(aᵢ)}` for a list of points and basis controls.
///
/// Row `4i` holds `w(aᵢ)`, rows `4i+1..4i+4` hold the contravariant
/// components of `∇w(aᵢ)`.
#[derive(Debug, Clone)]
pub struct ControlMatrix {
    pub points: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub basis: Vec<BoundaryControl>,
}

impl ControlMatrix {
    pub fn rank(&self, rel: f64) -> usize {
        numerical_rank(&self.singular_values, rel)
    }

    /// `σ_k/σ₁` for the `k`-th singular value (1-based); 0 if absent.
    pub fn ratio(&self, k: usize) -> f64 {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        match self.singular_values.get(k.wrapping_sub(1)) {
            Some(&s) if top > 0.0 => s / top,
            _ => 0.0,
        }
    }
}

fn check_points(dom: &GridDomain, points: &[usize]) -> Result<()> {
    for (i, &p) in points.iter().enumerate() {
        if p >= dom.len() || dom.depth(p) == u32::MAX || dom.depth(p) < 2 {
            return Err(Error::BadNode {
                node: p,
                reason: "control points must be at least two layers inside".into(),
            });
        }
        if points[..i].contains(&p) {
            return Err(Error::BadNode {
                node: p,
                reason: "duplicate control point".into(),
            });
        }
    }
    Ok(())
}

/// `{w(a), ∇w(a)}` stacked over points.
pub fn sample_point_values(dom: &GridDomain, g: &MetricField, points: &[usize], w: &ScalarField) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(4 * points.len());
    for &p in points {
        out.push(w.get(p));
        out.extend_from_slice(&grad_at(dom, g, w, p)?);
    }
    Ok(out)
}

/// Assembles the control matrix with one harmonic extension per basis control.
pub fn ma_matrix(op: &DirichletOperator, points: &[usize], basis: &[BoundaryControl]) -> Result<ControlMatrix> {
    let fields = op.harmonic_extensions(basis)?;
    ma_matrix_from_fields(op, points, basis, &fields)
}

/// As [`ma_matrix`] with precomputed extensions `fields[m] = w^{basis[m]}`.
pub fn ma_matrix_from_fields(
    op: &DirichletOperator,
    points: &[usize],
    basis: &[BoundaryControl],
    fields: &[ScalarField],
) -> Result<ControlMatrix> {
    let (dom, g) = (op.domain(), op.metric());
    check_points(dom, points)?;
    let cols: Vec<Vec<f64>> = fields
        .iter()
        .map(|w| sample_point_values(dom, g, points, w))
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_fn(4 * points.len(), basis.len(), |r, c| cols[c][r]);
    let singular_values = singular_values(&matrix);
    Ok(ControlMatrix {
        points: points.to_vec(),
        matrix,
        singular_values,
        basis: basis.to_vec(),
    })
}

/// Target quaternion `{c, k}` at an interior node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointTarget {
    pub node: usize,
    pub value: f64,
    pub vector: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlStatus {
    Success,
    Unreachable,
}

#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub control: BoundaryControl,
    pub coefficients: Vec<f64>,
    /// `M c` over all `4N` rows.
    pub achieved: Vec<f64>,
    /// `‖M_R c − t‖ / ‖t‖` over the targeted rows `R` (absolute when `t = 0`).
    pub defect: f64,
    pub rank: usize,
    pub control_norm: f64,
    pub status: ControlStatus,
}

/// Minimum-norm synthesis for full quaternion targets at the matrix points
/// (in the same order).
pub fn solve_control(m: &ControlMatrix, targets: &[PointTarget]) -> Result<ControlSolution> {
    if targets.len() != m.points.len() || targets.iter().zip(&m.points).any(|(t, &p)| t.node != p) {
        return Err(Error::InvalidArgument("targets must match the control points".into()));
    }
    let rhs: Vec<f64> = targets
        .iter()
        .flat_map(|t| [t.value, t.vector[0], t.vector[1], t.vector[2]])
        .collect();
    let rows: Vec<usize> = (0..rhs.len()).collect();
    solve_rows(m, &rows, &rhs)
}

/// Synthesis restricted to a subset of rows of `M`.
pub fn solve_rows(m: &ControlMatrix, rows: &[usize], rhs: &[f64]) -> Result<ControlSolution> {
    if rows.len() != rhs.len() || rows.iter().any(|&r| r >= m.matrix.nrows()) {
        return Err(Error::InvalidArgument("row selection does not match targets".into()));
    }
    let sub = DMatrix::from_fn(rows.len(), m.matrix.ncols(), |r, c| m.matrix[(rows[r], c)]);
    let t = DVector::from_column_slice(rhs);
    let (x, rank) = min_norm_lstsq(&sub, &t, SVD_CUT);
    let achieved_all = &m.matrix * &x;
    let achieved_sub = &sub * &x;
    let tn = t.norm();
    let defect = if tn > 0.0 {
        (&achieved_sub - &t).norm() / tn
    } else {
        (&achieved_sub - &t).norm()
    };
    let coefficients: Vec<f64> = x.iter().copied().collect();
    let control = BoundaryControl::combine(&m.basis, &coefficients);
    let control_norm = control.sup();
    Ok(ControlSolution {
        control,
        coefficients,
        achieved: achieved_all.iter().copied().collect(),
        defect,
        rank,
        control_norm,
        status: if defect < SUCCESS_DEFECT {
            ControlStatus::Success
        } else {
            ControlStatus::Unreachable
        },
    })
}

/// Direct-solve samples of a synthesized control (closed-loop check).
pub fn verify_control(op: &DirichletOperator, points: &[usize], control: &BoundaryControl) -> Result<Vec<f64>> {
    let w = op.harmonic_extension(control)?;
    sample_point_values(op.domain(), op.metric(), points, &w)
}

/// Output of [`separate`].
#[derive(Debug, Clone)]
pub struct Separation {
    pub field: QuaternionField,
    pub scalar_control: ControlSolution,
    pub gradient_control: ControlSolution,
    /// Relative `rot` residual of the div-curl step.
    pub divcurl_residual: f64,
    /// `(‖∇α − rot u‖_∞, ‖div u‖_∞)` at depth ≥ 2.
    pub membership: (f64, f64),
    /// `|q(a) − h_a|` and `|q(b) − h_b|`.
    pub endpoint_errors: [f64; 2],
    /// Allowed endpoint error `1e-2 (1 + |h_a| + |h_b|)`.
    pub tolerance: f64,
    /// Explains why the Dirichlet-field compatibility constraint was skipped.
    pub compatibility_note: String,
}

impl Separation {
    pub fn success(&self) -> bool {
        self.endpoint_errors.iter().all(|&e| e < self.tolerance)
    }
}

/// Builds a harmonic quaternion field `q = {w^f, u₀ + ∇w^h}` taking the
/// prescribed values at `a` and `b`.
///
/// `f` matches the scalar targets, `u₀` solves `rot u₀ = ∇w^f`, and `h`
/// matches the remaining gradient targets `k − u₀`. Only plain boxes are
/// accepted, where the space of Dirichlet fields is trivial.
pub fn separate(
    op: &DirichletOperator,
    basis: &[BoundaryControl],
    ta: PointTarget,
    tb: PointTarget,
) -> Result<Separation> {
    let (dom, g) = (op.domain(), op.metric());
    if !dom.is_plain_box() {
        return Err(Error::NontrivialTopology(
            "separation needs a plain box (trivial Dirichlet space)".into(),
        ));
    }
    if ta.node == tb.node {
        return Err(Error::InvalidArgument("separation points must differ".into()));
    }
    let fields = op.harmonic_extensions(basis)?;
    let m = ma_matrix_from_fields(op, &[ta.node, tb.node], basis, &fields)?;

    let scalar = solve_rows(&m, &[0, 4], &[ta.value, tb.value])?;
    let wf = combine_fields(dom, &fields, &scalar.coefficients);
    let v = grad_with_boundary(dom, g, &wf)?;
    let dc = op.divcurl_solve(&v)?;
    let u0 = dc.u;

    let (ua, ub) = (u0.get(ta.node), u0.get(tb.node));
    let rhs: Vec<f64> = (0..3)
        .map(|k| ta.vector[k] - ua[k])
        .chain((0..3).map(|k| tb.vector[k] - ub[k]))
        .collect();
    let gradient = solve_rows(&m, &[1, 2, 3, 5, 6, 7], &rhs)?;
    let wh = combine_fields(dom, &fields, &gradient.coefficients);
    let vector = u0.add(&grad_with_boundary(dom, g, &wh)?);
    let field = QuaternionField::new(wf, vector)?;

    let err_at = |t: &PointTarget| {
        let q = field.at(t.node);
        let d = [0, 1, 2].map(|k| q.vector[k] - t.vector[k]);
        ((q.scalar - t.value).powi(2) + g.at(t.node).quad(d, d)).sqrt()
    };
    let qn = |t: &PointTarget| (t.value * t.value + g.at(t.node).quad(t.vector, t.vector)).sqrt();
    let membership = q_residual(dom, &field, g)?;
    Ok(Separation {
        endpoint_errors: [err_at(&ta), err_at(&tb)],
        tolerance: 1e-2 * (1.0 + qn(&ta) + qn(&tb)),
        membership,
        divcurl_residual: dc.rot_residual,
        scalar_control: scalar,
        gradient_control: gradient,
        field,
        compatibility_note: "plain box: the Dirichlet space is trivial, so the flux compatibility constraint is vacuous"
            .into(),
    })
}

/// `Σ c_m w_m` over full fields.
pub fn combine_fields(dom: &GridDomain, fields: &[ScalarField], coefs: &[f64]) -> ScalarField {
    let mut out = ScalarField::zeros(dom);
    for (w, &c) in fields.iter().zip(coefs) {
        if c == 0.0 {
            continue;
        }
        for (o, v) in out.values_mut().iter_mut().zip(w.values()) {
            *o += c * v;
        }
    }
    out
}

/// Discrete `∫∂Ω f (d·ν) dσ` for each field `d`.
pub fn compatibility_check(dom: &GridDomain, g: &MetricField, f: &BoundaryControl, d_basis: &[VectorField]) -> Vec<f64> {
    let weights = dom.facet_weights(g);
    d_basis
        .iter()
        .map(|d| {
            dom.facets()
                .iter()
                .zip(&weights)
                .map(|(fc, w)| {
                    let nu = dom.facet_normal(fc, g);
                    let b = dom.boundary_index(fc.node).expect("facet node on boundary");
                    f.values()[b] * g.at(fc.node).quad(d.get(fc.node), nu) * w
                })
                .sum()
        })
        .collect()
}

/// `count` distinct seeded nodes, two or more layers inside, drawn from the
/// middle half of the box and pairwise at least 15% of the shortest extent apart.
pub fn random_points(dom: &GridDomain, count: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let (lo, hi) = (dom.lo(), dom.hi());
    let ext = [0, 1, 2].map(|a| hi[a] - lo[a]);
    let min_sep = 0.15 * ext.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for _ in 0..10_000 {
        if out.len() == count {
            break;
        }
        let x = [0, 1, 2].map(|a| lo[a] + ext[a] * rng.gen_range(0.25..=0.75));
        let n = dom.nearest_node(x);
        let d = dom.depth(n);
        if d == u32::MAX || d < 2 || out.iter().any(|&m| dom.distance(m, n) < min_sep) {
            continue;
        }
        out.push(n);
    }
    if out.len() < count {
        return Err(Error::Insufficient(format!(
            "found {} of {count} admissible control points",
            out.len()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_polynomials_are_harmonic() {
        // Second differences with step 0.1 are exact for cubics.
        let h = 0.1;
        let s = [0.3, -0.2, 0.5];
        for k in 0..N_HARMONIC {
            let mut lap = -6.0 * harmonic_polynomial(k, s);
            for a in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut t = s;
                    t[a] += sign * h;
                    lap += harmonic_polynomial(k, t);
                }
            }
            assert!((lap / (h * h)).abs() < 1e-10, "polynomial {k}");
        }
    }

    #[test]
    fn random_controls_are_harmonic_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-3;
        for _ in 0..10 {
            let m = random_solid_harmonic(&mut rng);
            let s = [0.2, -0.4, 0.1];
            let mut lap = -6.0 * m.eval(s);
            for a in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut t = s;
                    t[a] += sign * h;
                    lap += m.eval(t);
                }
            }
            assert!((lap / (h * h)).abs() < 1e-4);
        }
    }

    #[test]
    fn dictionaries_are_nested_and_seeded() {
        let d = GridDomain::unit_box(7).unwrap();
        let a = Dictionary::standard(&d, 20, 5);
        let b = Dictionary::standard(&d, 24, 5);
        assert_eq!(a.controls[..], b.controls[..20]);
        let c = Dictionary::standard(&d, 20, 6);
        assert_ne!(a.controls[17], c.controls[17]);
        assert!((a.controls[18].sup() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_control_has_rank_one() {
        let d = GridDomain::unit_box(9).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&d), &d).unwrap();
        let m = ma_matrix(&op, &[d.index([4, 4, 4])], &[BoundaryControl::constant(&d, 1.0)]).unwrap();
        assert_eq!(m.rank(RANK_THRESHOLD), 1);
        assert!(ma_matrix(&op, &[d.index([1, 4, 4])], &[]).is_err());
        let p = d.index([4, 4, 4]);
        assert!(ma_matrix(&op, &[p, p], &[]).is_err());
    }

    #[test]
    fn compatibility_of_constant_flux_field() {
        let d = GridDomain::unit_box(9).unwrap();
        let g = MetricField::flat(&d);
        let e1 = VectorField::constant(&d, [1.0, 0.0, 0.0]);
        let vals = compatibility_check(&d, &g, &BoundaryControl::constant(&d, 1.0), &[e1]);
        assert!(vals[0].abs() < 1e-12);
        assert!(compatibility_check(&d, &g, &BoundaryControl::constant(&d, 1.0), &[]).is_empty());
    }
}
