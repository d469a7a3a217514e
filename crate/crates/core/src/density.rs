//! Point separation by `|∇w^f|²`, frame covers with a partition of unity, and
//! approximation of quaternion fields by sums of products of generators.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{BoundaryControl, DirichletOperator};
use crate::geometry::ops::inner_at;
use crate::geometry::{grad_with_boundary, GridDomain, MetricField, ScalarField, VectorField};
use crate::linalg::{cond3, min_norm_lstsq, solve3};
use crate::quaternion::{field_mul, scalar_embed, sup_norm, QuaternionField};
use crate::{Error, Result};

/// Frame conditioning bound inside every ball.
pub const MAX_FRAME_COND: f64 = 1e4;
/// Margin required for a pair (or for non-vanishing) to count as separated.
pub const SEPARATION_MARGIN: f64 = 1e-4;

/// `|∇w|²` (in `g`) at every domain node, one-sided at the boundary.
pub fn gradient_energy(dom: &GridDomain, g: &MetricField, w: &ScalarField) -> Result<ScalarField> {
    let gw = grad_with_boundary(dom, g, w)?;
    let mut e = ScalarField::zeros(dom);
    for n in dom.domain_nodes() {
        let v = gw.get(n);
        e.set(n, inner_at(g.at(n), v, v));
    }
    Ok(e)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairMargin {
    pub a: usize,
    pub b: usize,
    /// `max_f ||∇w^f(a)|² − |∇w^f(b)|²|`.
    pub margin: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub pairs: Vec<PairMargin>,
    /// `min_x max_f |∇w^f(x)|²` over domain nodes.
    pub min_coverage: f64,
    pub pass: bool,
}

/// Checks that the energies `|∇w^f|²` separate the given pairs and do not
/// vanish simultaneously anywhere.
pub fn scalar_separation_check(
    op: &DirichletOperator,
    pairs: &[(usize, usize)],
    dictionary: &[BoundaryControl],
) -> Result<SeparationReport> {
    if dictionary.len() < 10 && dictionary.len() != 1 {
        return Err(Error::Insufficient(format!(
            "dictionary of {} controls, at least 10 needed",
            dictionary.len()
        )));
    }
    let fields = op.harmonic_extensions(dictionary)?;
    let (dom, g) = (op.domain(), op.metric());
    let energies: Vec<ScalarField> = fields
        .iter()
        .map(|w| gradient_energy(dom, g, w))
        .collect::<Result<_>>()?;
    let pairs: Vec<PairMargin> = pairs
        .iter()
        .map(|&(a, b)| PairMargin {
            a,
            b,
            margin: energies.iter().map(|e| (e.get(a) - e.get(b)).abs()).fold(0.0, f64::max),
            degenerate: a == b,
        })
        .collect();
    let min_coverage = dom
        .domain_nodes()
        .into_iter()
        .map(|n| energies.iter().map(|e| e.get(n)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);
    let pass = min_coverage > SEPARATION_MARGIN
        && pairs.iter().all(|p| !p.degenerate && p.margin > SEPARATION_MARGIN);
    Ok(SeparationReport {
        pairs,
        min_coverage,
        pass,
    })
}

/// One ball of a [`FrameCover`].
#[derive(Debug, Clone)]
pub struct FrameBall {
    pub center: usize,
    pub radius: f64,
    /// Frame controls as coefficient vectors over the cover's basis.
    pub coefficients: [Vec<f64>; 3],
    /// Nodes strictly inside the ball.
    pub nodes: Vec<usize>,
    /// `frames[i][k] = ∇w^{f_k}` at `nodes[i]`.
    pub frames: Vec<[[f64; 3]; 3]>,
    /// Largest frame condition number over the ball.
    pub max_cond: f64,
}

impl FrameBall {
    pub fn control(&self, basis: &[BoundaryControl], k: usize) -> BoundaryControl {
        BoundaryControl::combine(basis, &self.coefficients[k])
    }
}

/// Balls with frame controls and a subordinate partition of unity.
#[derive(Debug, Clone)]
pub struct FrameCover {
    pub balls: Vec<FrameBall>,
    /// `η_n` as fields, zero outside ball `n`.
    pub partition: Vec<ScalarField>,
    pub basis: Vec<BoundaryControl>,
    /// `∇w^{f_m}` for every basis control.
    pub basis_gradients: Vec<VectorField>,
}

fn bump(r: f64, radius: f64) -> f64 {
    if r < radius {
        (1.0 - (r / radius).powi(2)).powi(3)
    } else {
        0.0
    }
}

fn ball_nodes(dom: &GridDomain, center: usize, radius: f64) -> Vec<usize> {
    dom.domain_nodes()
        .into_iter()
        .filter(|&n| dom.distance(center, n) < radius)
        .collect()
}

fn frame_at(grads: &[VectorField], coefs: &[Vec<f64>; 3], n: usize) -> [[f64; 3]; 3] {
    let mut f = [[0.0; 3]; 3];
    for (k, c) in coefs.iter().enumerate() {
        for (m, &cm) in c.iter().enumerate() {
            let v = grads[m].get(n);
            for i in 0..3 {
                f[k][i] += cm * v[i];
            }
        }
    }
    f
}

fn transpose(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[j][i]))
}

impl FrameCover {
    /// Greedy cover of every domain node.
    ///
    /// Centers start on a `3³` sublattice; a ball is shrunk (factor 0.85)
    /// until every frame inside has condition number below
    /// [`MAX_FRAME_COND`]. Nodes left uncovered seed further balls.
    pub fn build(op: &DirichletOperator, basis: &[BoundaryControl]) -> Result<Self> {
        let fields = op.harmonic_extensions(basis)?;
        Self::from_fields(op, basis, &fields)
    }

    /// As [`FrameCover::build`] with precomputed extensions of `basis`.
    ///
    /// Frame controls at a center solve `∇w^{f_k}(x_n) = e_k` in the
    /// minimum-norm sense; boundary centers use one-sided gradients.
    pub fn from_fields(op: &DirichletOperator, basis: &[BoundaryControl], fields: &[ScalarField]) -> Result<Self> {
        let (dom, g) = (op.domain(), op.metric());
        let grads: Vec<VectorField> = fields
            .par_iter()
            .map(|w| grad_with_boundary(dom, g, w))
            .collect::<Result<_>>()?;
        let (lo, hi) = (dom.lo(), dom.hi());
        let ext = [0, 1, 2].map(|k| hi[k] - lo[k]);
        let start = 1.2 * (ext[0] * ext[0] + ext[1] * ext[1] + ext[2] * ext[2]).sqrt() / 6.0;
        let min_radius = 1.5 * dom.h();

        let mut candidates = Vec::new();
        for c in 0..3 {
            for b in 0..3 {
                for a in 0..3 {
                    let x = [a, b, c].map(|m| m as f64);
                    let p = [0, 1, 2].map(|k| lo[k] + ext[k] * (2.0 * x[k] + 1.0) / 6.0);
                    let n = dom.nearest_node(p);
                    if dom.in_domain(n) && dom.depth(n) >= 2 {
                        candidates.push(n);
                    }
                }
            }
        }

        let mut covered = vec![false; dom.len()];
        let mut balls = Vec::new();
        let mut queue = candidates.into_iter();
        loop {
            let center = match queue.next() {
                Some(c) => c,
                None => match dom.domain_nodes().into_iter().find(|&n| !covered[n]) {
                    None => break,
                    Some(n) => n,
                },
            };
            let ball = make_ball(dom, &grads, center, start, min_radius)?;
            for &n in &ball.nodes {
                covered[n] = true;
            }
            balls.push(ball);
        }

        let mut total = vec![0.0; dom.len()];
        let raw: Vec<Vec<f64>> = balls
            .iter()
            .map(|b| {
                let mut v = vec![0.0; dom.len()];
                for &n in &b.nodes {
                    v[n] = bump(dom.distance(b.center, n), b.radius);
                    total[n] += v[n];
                }
                v
            })
            .collect();
        let partition = raw
            .into_iter()
            .map(|mut v| {
                for (x, &t) in v.iter_mut().zip(&total) {
                    if t > 0.0 {
                        *x /= t;
                    }
                }
                ScalarField::from_vec(dom.dims(), v)
            })
            .collect::<Result<_>>()?;
        Ok(FrameCover {
            balls,
            partition,
            basis: basis.to_vec(),
            basis_gradients: grads,
        })
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// `∇w^{f_k}` of ball `n`'s frame control as a full field.
    pub fn frame_gradient(&self, n: usize, k: usize) -> VectorField {
        let c = &self.balls[n].coefficients[k];
        let mut out = VectorField::from_vec(self.basis_gradients[0].dims(), vec![[0.0; 3]; self.basis_gradients[0].values().len()])
            .expect("same dims");
        for (m, &cm) in c.iter().enumerate() {
            for (o, v) in out.values_mut().iter_mut().zip(self.basis_gradients[m].values()) {
                for i in 0..3 {
                    o[i] += cm * v[i];
                }
            }
        }
        out
    }

    /// Largest `|Σ η_n − 1|` over domain nodes.
    pub fn partition_defect(&self, dom: &GridDomain) -> f64 {
        dom.domain_nodes()
            .into_iter()
            .map(|x| (self.partition.iter().map(|e| e.get(x)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Frame controls at `center` with `∇w^{f_k}(center) = e_k`, by minimum-norm
/// least squares over the basis gradients there.
fn frame_controls(grads: &[VectorField], center: usize) -> Result<[Vec<f64>; 3]> {
    let m = DMatrix::from_fn(3, grads.len(), |i, j| grads[j].get(center)[i]);
    let coefficients = [0, 1, 2].map(|k| {
        let mut e = DVector::zeros(3);
        e[k] = 1.0;
        min_norm_lstsq(&m, &e, 1e-8)
    });
    if coefficients.iter().any(|(_, rank)| *rank < 3) {
        return Err(Error::ControlFailed(format!("gradient rank below 3 at node {center}")));
    }
    Ok(coefficients.map(|(c, _)| c.iter().copied().collect()))
}

fn make_ball(
    dom: &GridDomain,
    grads: &[VectorField],
    center: usize,
    start: f64,
    min_radius: f64,
) -> Result<FrameBall> {
    let coefficients = frame_controls(grads, center)?;
    let mut radius = start;
    while radius >= min_radius {
        let nodes = ball_nodes(dom, center, radius);
        let frames: Vec<[[f64; 3]; 3]> = nodes.iter().map(|&n| frame_at(grads, &coefficients, n)).collect();
        let max_cond = frames.iter().map(|&f| cond3(f)).fold(0.0, f64::max);
        if max_cond < MAX_FRAME_COND {
            return Ok(FrameBall {
                center,
                radius,
                coefficients,
                nodes,
                frames,
                max_cond,
            });
        }
        radius *= 0.85;
    }
    Err(Error::NoAdmissibleRadius(center))
}

/// Output of [`represent`].
#[derive(Debug, Clone)]
pub struct Representation {
    /// `η_n α` per ball.
    pub scalars: Vec<ScalarField>,
    /// `κ_k^n` per ball and frame direction, with `η_n u = Σ_k κ_k^n ∇w^{f_k^n}`.
    pub kappa: Vec<[ScalarField; 3]>,
    pub reconstruction: QuaternionField,
    /// `sup|p − reconstruction| / sup|p|`.
    pub error: f64,
}

/// Writes `p = Σ_n {η_n α, 0} + Σ_n Σ_k {κ_k^n, 0}{0, ∇w^{f_k^n}}`.
pub fn represent(p: &QuaternionField, cover: &FrameCover, g: &MetricField, dom: &GridDomain) -> Result<Representation> {
    p.scalar.check(dom)?;
    let mut scalars = Vec::with_capacity(cover.len());
    let mut kappa = Vec::with_capacity(cover.len());
    let mut rec = QuaternionField::zeros(dom);
    for (ball, eta) in cover.balls.iter().zip(&cover.partition) {
        let mut s = ScalarField::zeros(dom);
        let mut k = [(); 3].map(|_| ScalarField::zeros(dom));
        for (&n, &frame) in ball.nodes.iter().zip(&ball.frames) {
            let e = eta.get(n);
            s.set(n, e * p.scalar.get(n));
            let u = p.vector.get(n).map(|v| v * e);
            let c = solve3(transpose(frame), u).ok_or(Error::BadNode {
                node: n,
                reason: "singular frame".into(),
            })?;
            let mut q = rec.at(n);
            q.scalar += s.get(n);
            for (j, kj) in k.iter_mut().enumerate() {
                kj.set(n, c[j]);
                for i in 0..3 {
                    q.vector[i] += c[j] * frame[j][i];
                }
            }
            rec.set(&q);
        }
        scalars.push(s);
        kappa.push(k);
    }
    let diff = p.add(&rec.scale(-1.0));
    let scale = sup_norm(dom, p, g);
    let err = sup_norm(dom, &diff, g);
    Ok(Representation {
        scalars,
        kappa,
        reconstruction: rec,
        error: if scale > 0.0 { err / scale } else { err },
    })
}

/// Expression tree over generators `{1, 0}` and `{0, ∇w^f}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expr {
    Sum { terms: Vec<Expr> },
    Prod { coefficient: f64, factors: Vec<Expr> },
    Unit,
    /// `{0, ∇w^f}` for generator `id` of the element.
    Gradient { id: usize },
}

impl Expr {
    fn depth(&self) -> usize {
        match self {
            Expr::Sum { terms } => terms.iter().map(Expr::depth).max().unwrap_or(0),
            Expr::Prod { factors, .. } => factors.len(),
            _ => 1,
        }
    }
}

/// A gradient generator: `f = Σ c_m basis[m]`, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub label: String,
    pub control: Vec<(usize, f64)>,
}

/// An element of the algebra generated by harmonic quaternion fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraElement {
    pub generators: Vec<Generator>,
    pub expr: Expr,
    /// Longest product of generators.
    pub depth: usize,
}

impl AlgebraElement {
    /// Evaluates by pointwise quaternion products, given `∇w` of every basis control.
    pub fn evaluate(&self, dom: &GridDomain, g: &MetricField, basis_gradients: &[VectorField]) -> Result<QuaternionField> {
        let gens: Vec<QuaternionField> = self
            .generators
            .iter()
            .map(|gen| {
                let mut v = VectorField::zeros(dom);
                for &(m, c) in &gen.control {
                    v = v.add(&basis_gradients[m].scale(c));
                }
                QuaternionField::from_vector(v)
            })
            .collect();
        eval_expr(&self.expr, dom, g, &gens)
    }
}

fn eval_expr(e: &Expr, dom: &GridDomain, g: &MetricField, gens: &[QuaternionField]) -> Result<QuaternionField> {
    match e {
        Expr::Unit => Ok(QuaternionField::unit(dom)),
        Expr::Gradient { id } => gens
            .get(*id)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown generator {id}"))),
        Expr::Sum { terms } => {
            let mut acc = QuaternionField::zeros(dom);
            for t in terms {
                acc = acc.add(&eval_expr(t, dom, g, gens)?);
            }
            Ok(acc)
        }
        Expr::Prod { coefficient, factors } => {
            let mut acc = QuaternionField::unit(dom);
            for f in factors {
                acc = field_mul(&acc, &eval_expr(f, dom, g, gens)?, g)?;
            }
            Ok(acc.scale(*coefficient))
        }
    }
}

/// Nested polynomial model in the features `F_j = |∇w^{f_j}|²`: `1`, all
/// linear terms, then monomials of degree `2..=d` in the first
/// `min(J, 6)` features.
fn monomials(n_features: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    if degree >= 1 {
        out.extend((0..n_features).map(|j| vec![j]));
    }
    let lead = n_features.min(6);
    let mut layer: Vec<Vec<usize>> = (0..lead).map(|j| vec![j]).collect();
    for _ in 2..=degree {
        let mut next = Vec::new();
        for m in &layer {
            for j in *m.last().expect("nonempty")..lead {
                let mut t = m.clone();
                t.push(j);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Incremental orthonormal basis of model columns; columns numerically in the
/// span of earlier ones are dropped, so nested models stay nested.
struct NestedBasis {
    q: Vec<Vec<f64>>,
    /// Kept column index for each orthonormal vector.
    kept: Vec<usize>,
    /// `R` with `column[kept[j]] = Σ_{i≤j} r[j][i] q_i`.
    r: Vec<Vec<f64>>,
}

impl NestedBasis {
    fn new() -> Self {
        NestedBasis {
            q: Vec::new(),
            kept: Vec::new(),
            r: Vec::new(),
        }
    }

    fn push(&mut self, idx: usize, col: &[f64]) {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col.to_vec();
        let mut coef = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (i, q) in self.q.iter().enumerate() {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                coef[i] += d;
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= d * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm < 1e-9 * norm0 {
            return;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        coef.push(norm);
        self.q.push(v);
        self.kept.push(idx);
        self.r.push(coef);
    }
}

/// Result of [`approximate_in_algebra`] for one degree.
#[derive(Debug, Clone)]
pub struct Approximation {
    pub degree: usize,
    pub element: AlgebraElement,
    pub values: QuaternionField,
    /// `sup|p − values| / sup|p|`.
    pub sup_error: f64,
    /// Sum of squared least-squares residuals over all coefficient fits.
    pub objective: f64,
}

/// Replaces each coefficient field of the frame representation by a
/// least-squares polynomial in the features `|∇w^{f_j}|²` of
/// `scalar_fields`, for every degree in `degrees`.
///
/// One orthogonalization of the largest model serves all degrees, and the
/// models are nested, so `objective` is nonincreasing in the degree.
pub fn approximate_in_algebra(
    p: &QuaternionField,
    cover: &FrameCover,
    rep: &Representation,
    scalar_fields: &[ScalarField],
    g: &MetricField,
    dom: &GridDomain,
    degrees: &[usize],
) -> Result<Vec<Approximation>> {
    let nodes = dom.domain_nodes();
    let energies: Vec<ScalarField> = scalar_fields
        .iter()
        .map(|w| gradient_energy(dom, g, w))
        .collect::<Result<_>>()?;
    // Features scaled to unit sup; constant energies (linear controls) carry no
    // information beyond the unit and are skipped.
    let mut features: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    for (j, e) in energies.iter().enumerate() {
        let v: Vec<f64> = nodes.iter().map(|&n| e.get(n)).collect();
        let mx = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mn = v.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        if mx > 0.0 && (mx - mn) > 1e-9 * mx {
            features.push((j, mx, v.iter().map(|x| x / mx).collect()));
        }
    }
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let model = monomials(features.len(), max_degree);
    let mut basis = NestedBasis::new();
    let mut model_end = Vec::with_capacity(max_degree + 1);
    for d in 0..=max_degree {
        for (i, m) in model.iter().enumerate().filter(|(_, m)| m.len() == d) {
            let col: Vec<f64> = (0..nodes.len())
                .map(|r| m.iter().map(|&j| features[j].2[r]).product())
                .collect();
            basis.push(i, &col);
        }
        model_end.push(basis.q.len());
    }

    // Right-hand sides: η_n α per ball, then κ_k^n per ball and direction.
    let mut targets: Vec<(Option<(usize, usize)>, Vec<f64>)> = Vec::new();
    for (b, s) in rep.scalars.iter().enumerate() {
        targets.push((None, nodes.iter().map(|&n| s.get(n)).collect()));
        for k in 0..3 {
            targets.push((Some((b, k)), nodes.iter().map(|&n| rep.kappa[b][k].get(n)).collect()));
        }
    }
    let proj: Vec<Vec<f64>> = targets
        .par_iter()
        .map(|(_, t)| basis.q.iter().map(|q| q.iter().zip(t).map(|(a, b)| a * b).sum()).collect())
        .collect();

    let frame_grads: Vec<[VectorField; 3]> = (0..cover.len())
        .map(|b| [0, 1, 2].map(|k| cover.frame_gradient(b, k)))
        .collect();
    let scale = sup_norm(dom, p, g);

    let mut out = Vec::new();
    for &d in degrees {
        let k = model_end[d.min(max_degree)];
        let r = DMatrix::from_fn(k, k, |i, j| if i <= j { basis.r[j][i] } else { 0.0 });
        let mut values = QuaternionField::zeros(dom);
        let mut objective = 0.0;
        let mut terms = Vec::new();
        for ((tag, t), pr) in targets.iter().zip(&proj) {
            let y = DVector::from_iterator(k, pr[..k].iter().copied());
            let c = r.solve_upper_triangular(&y).ok_or_else(|| Error::IllConditioned("feature model".into()))?;
            // Fitted coefficient field at every domain node.
            let mut fit = vec![0.0; nodes.len()];
            for (i, q) in basis.q[..k].iter().enumerate() {
                for (f, qv) in fit.iter_mut().zip(q) {
                    *f += pr[i] * qv;
                }
            }
            objective += t.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            for (r_i, &n) in nodes.iter().enumerate() {
                let mut q = values.at(n);
                match tag {
                    None => q.scalar += fit[r_i],
                    Some((b, kk)) => {
                        let v = frame_grads[*b][*kk].get(n);
                        for i in 0..3 {
                            q.vector[i] += fit[r_i] * v[i];
                        }
                    }
                }
                values.set(&q);
            }
            for (j, &coef) in c.iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                let mono = &model[basis.kept[j]];
                // F_j = −G_j G_j with the feature scale folded into the coefficient.
                let mut factors = Vec::new();
                let mut cf = coef;
                for &f in mono {
                    cf *= -1.0 / features[f].1;
                    let id = features[f].0;
                    factors.extend([Expr::Gradient { id }, Expr::Gradient { id }]);
                }
                match tag {
                    None => {
                        if factors.is_empty() {
                            factors.push(Expr::Unit);
                        }
                    }
                    Some((b, kk)) => factors.push(Expr::Gradient {
                        id: scalar_fields.len() + 3 * b + kk,
                    }),
                }
                terms.push(Expr::Prod {
                    coefficient: cf,
                    factors,
                });
            }
        }
        let mut generators: Vec<Generator> = (0..scalar_fields.len())
            .map(|j| Generator {
                label: format!("dictionary:{j}"),
                control: vec![(j, 1.0)],
            })
            .collect();
        for (b, ball) in cover.balls.iter().enumerate() {
            for k in 0..3 {
                generators.push(Generator {
                    label: format!("frame:{b}:{k}"),
                    control: ball.coefficients[k]
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| **c != 0.0)
                        .map(|(m, c)| (m, *c))
                        .collect(),
                });
            }
        }
        let expr = Expr::Sum { terms };
        let diff = p.add(&values.scale(-1.0));
        let err = sup_norm(dom, &diff, g);
        out.push(Approximation {
            degree: d,
            element: AlgebraElement {
                depth: expr.depth(),
                generators,
                expr,
            },
            values,
            sup_error: if scale > 0.0 { err / scale } else { err },
            objective,
        });
    }
    Ok(out)
}

/// Embeds `α` as a scalar quaternion field; convenience for tests and examples.
pub fn scalar_target(a: &ScalarField) -> QuaternionField {
    scalar_embed(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Dictionary;

    fn setup(n: usize) -> (GridDomain, DirichletOperator, Dictionary) {
        let d = GridDomain::unit_box(n).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&d), &d).unwrap();
        let dict = Dictionary::standard(&d, 20, 3);
        (d, op, dict)
    }

    #[test]
    fn monomial_model_is_nested() {
        let m2 = monomials(8, 2);
        let m3 = monomials(8, 3);
        assert_eq!(&m3[..m2.len()], &m2[..]);
        assert_eq!(m2.len(), 1 + 8 + 21);
    }

    #[test]
    fn separation_trivial_cases() {
        let (d, op, dict) = setup(9);
        let a = d.nearest_node([0.5; 3]);
        let r = scalar_separation_check(&op, &[(a, a)], &dict.controls).unwrap();
        assert!(r.pairs[0].degenerate && r.pairs[0].margin == 0.0 && !r.pass);
        let one = [BoundaryControl::constant(&d, 1.0)];
        let b = d.nearest_node([0.3, 0.5, 0.6]);
        let r = scalar_separation_check(&op, &[(a, b)], &one).unwrap();
        assert!(r.pairs[0].margin < 1e-12 && !r.pass);
    }

    #[test]
    fn cover_partition_and_representation() {
        let (d, op, dict) = setup(11);
        let g = MetricField::flat(&d);
        let cover = FrameCover::build(&op, &dict.controls).unwrap();
        assert!(cover.partition_defect(&d) < 1e-12);
        for (b, eta) in cover.balls.iter().zip(&cover.partition) {
            assert!(b.max_cond < MAX_FRAME_COND);
            for n in d.domain_nodes() {
                if d.distance(b.center, n) >= b.radius {
                    assert_eq!(eta.get(n), 0.0);
                }
            }
        }
        let p = QuaternionField::random(&d, 5);
        let rep = represent(&p, &cover, &g, &d).unwrap();
        assert!(rep.error < 1e-10, "{}", rep.error);

        let alpha = ScalarField::from_fn(&d, |x| x[0] - x[1] * x[2]);
        let rep = represent(&scalar_target(&alpha), &cover, &g, &d).unwrap();
        assert!(rep.kappa.iter().flatten().all(|k| k.values().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn algebra_element_evaluates_like_fast_path() {
        let (d, op, dict) = setup(9);
        let g = MetricField::flat(&d);
        let fields = op.harmonic_extensions(&dict.controls).unwrap();
        let cover = FrameCover::from_fields(&op, &dict.controls, &fields).unwrap();
        let e = gradient_energy(&d, &g, &fields[5]).unwrap();
        let p = scalar_target(&e);
        let rep = represent(&p, &cover, &g, &d).unwrap();
        let approx = approximate_in_algebra(&p, &cover, &rep, &fields[..8], &g, &d, &[1, 2]).unwrap();
        assert!(approx[1].objective <= approx[0].objective);
        let slow = approx[0].element.evaluate(&d, &g, &cover.basis_gradients).unwrap();
        let diff = sup_norm(&d, &slow.add(&approx[0].values.scale(-1.0)), &g);
        assert!(diff < 1e-8 * sup_norm(&d, &p, &g), "{diff}");
        let json = serde_json::to_string(&approx[0].element).unwrap();
        let back: AlgebraElement = serde_json::from_str(&json).unwrap();
        assert_eq!(back, approx[0].element);
    }
}
