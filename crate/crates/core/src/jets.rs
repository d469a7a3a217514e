//! 2-jets, the Laplace jet, and jet controllability.
//!
//! Slot order: `{φ; φ₁, φ₂, φ₃; φ₁₁, φ₁₂, φ₁₃, φ₂₂, φ₂₃, φ₃₃}` where `φᵢ = ∂φ/∂xⁱ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::elliptic::{BoundaryControl, DirichletOperator};
use crate::geometry::{GridDomain, MetricField, ScalarField};
use crate::linalg::{min_norm_lstsq, qr_lstsq, svd, QrSolver};
use crate::{Error, Result};

/// Index pairs of the six second-order slots.
pub const SECOND_SLOTS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// A 10-component jet vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet2(pub [f64; 10]);

/// Jet-shaped vector representing `Δ` at a point: `(Δφ)(a) = ⟨λ_a, j_a[φ]⟩`.
pub type LaplaceJet = Jet2;

impl Jet2 {
    pub fn dot(&self, o: &Jet2) -> f64 {
        self.0.iter().zip(&o.0).map(|(a, b)| a * b).sum()
    }
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
    pub fn cosine(&self, o: &Jet2) -> f64 {
        self.dot(o) / (self.norm() * o.norm())
    }
    pub fn scale(&self, s: f64) -> Jet2 {
        Jet2(self.0.map(|v| v * s))
    }
    pub fn sub(&self, o: &Jet2) -> Jet2 {
        let mut r = self.0;
        for (a, b) in r.iter_mut().zip(o.0) {
            *a -= b;
        }
        Jet2(r)
    }
    /// Jet of a polynomial given by value, gradient and Hessian at the point.
    pub fn from_derivatives(value: f64, grad: [f64; 3], hess: [[f64; 3]; 3]) -> Jet2 {
        let mut j = [0.0; 10];
        j[0] = value;
        j[1..4].copy_from_slice(&grad);
        for (s, &(i, k)) in SECOND_SLOTS.iter().enumerate() {
            j[4 + s] = hess[i][k];
        }
        Jet2(j)
    }
}

/// Weighted least-squares polynomial fit over the ball of radius `3h`,
/// weights `(1 − (r/3h)²)³`; the jet is read off the degree-≤2 coefficients.
///
/// The default fit has degree 4, so quartic terms of the sampled function do
/// not leak into the second-derivative slots. Nodes whose full ball lies in
/// the domain share one precomputed fit operator; other nodes get their own.
#[derive(Debug, Clone)]
pub struct JetFitter {
    radius: f64,
    degree: u32,
    offsets: Vec<[i64; 3]>,
    operator: DMatrix<f64>,
}

fn design_row(d: [f64; 3], degree: u32, radius: f64) -> Vec<f64> {
    let mut r = vec![0.0; 10];
    r[0] = 1.0;
    r[1..4].copy_from_slice(&d);
    for (s, &(i, k)) in SECOND_SLOTS.iter().enumerate() {
        r[4 + s] = if i == k { 0.5 * d[i] * d[i] } else { d[i] * d[k] };
    }
    // Higher monomials in scaled coordinates keep the design well conditioned.
    let t = d.map(|v| v / radius);
    for deg in 3..=degree as i32 {
        for a in (0..=deg).rev() {
            for b in (0..=deg - a).rev() {
                let c = deg - a - b;
                r.push(t[0].powi(a) * t[1].powi(b) * t[2].powi(c));
            }
        }
    }
    r
}

fn n_terms(degree: u32) -> usize {
    ((degree + 1) * (degree + 2) * (degree + 3) / 6) as usize
}

fn fit_operator(h: [f64; 3], radius: f64, degree: u32, offsets: &[[i64; 3]]) -> Option<DMatrix<f64>> {
    let m = offsets.len();
    let cols = n_terms(degree);
    if m < cols {
        return None;
    }
    let mut a = DMatrix::zeros(m, cols);
    let mut w = DMatrix::zeros(m, m);
    for (r, o) in offsets.iter().enumerate() {
        let d = [0, 1, 2].map(|k| o[k] as f64 * h[k]);
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let sw = (1.0 - (dist / radius).powi(2)).max(0.0).powi(3).sqrt();
        for (c, v) in design_row(d, degree, radius).iter().enumerate() {
            a[(r, c)] = sw * v;
        }
        w[(r, r)] = sw;
    }
    let qr = QrSolver::new(&a);
    if qr.diag_ratio() < 1e-10 {
        return None;
    }
    let full = qr_lstsq(&a, &w)?;
    Some(full.rows(0, 10).into_owned())
}

impl JetFitter {
    pub fn new(dom: &GridDomain) -> Self {
        Self::with_degree(dom, 4)
    }

    /// Fit of the given polynomial degree (at least 2).
    pub fn with_degree(dom: &GridDomain, degree: u32) -> Self {
        let degree = degree.max(2);
        let h = dom.spacing();
        let radius = 3.0 * dom.h();
        let reach = [0, 1, 2].map(|k| (radius / h[k] + 1e-9).floor() as i64);
        let mut offsets = Vec::new();
        for k in -reach[2]..=reach[2] {
            for j in -reach[1]..=reach[1] {
                for i in -reach[0]..=reach[0] {
                    let d = [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]];
                    if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() <= radius + 1e-12 {
                        offsets.push([i, j, k]);
                    }
                }
            }
        }
        let operator = fit_operator(h, radius, degree, &offsets).expect("full ball gives a regular fit");
        JetFitter {
            radius,
            degree,
            offsets,
            operator,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn full_ball(&self, dom: &GridDomain, a: usize) -> Option<Vec<usize>> {
        self.offsets
            .iter()
            .map(|&o| dom.shift(a, o).filter(|&m| dom.in_domain(m)))
            .collect()
    }

    /// `j_a[φ]` at a node at least two layers inside.
    pub fn extract(&self, dom: &GridDomain, phi: &ScalarField, a: usize) -> Result<Jet2> {
        phi.check(dom)?;
        if a >= dom.len() || dom.depth(a) == u32::MAX || dom.depth(a) < 2 {
            return Err(Error::BadNode {
                node: a,
                reason: "jet extraction needs a node two layers inside".into(),
            });
        }
        if let Some(nodes) = self.full_ball(dom, a) {
            let v = DVector::from_iterator(nodes.len(), nodes.iter().map(|&m| phi.get(m)));
            let j = &self.operator * v;
            return Ok(Jet2(std::array::from_fn(|k| j[k])));
        }
        let (offsets, nodes): (Vec<[i64; 3]>, Vec<usize>) = self
            .offsets
            .iter()
            .filter_map(|&o| dom.shift(a, o).filter(|&m| dom.in_domain(m)).map(|m| (o, m)))
            .unzip();
        let op = fit_operator(dom.spacing(), self.radius, self.degree, &offsets)
            .ok_or_else(|| Error::Insufficient(format!("degenerate jet fit at {a}")))?;
        let v = DVector::from_iterator(nodes.len(), nodes.iter().map(|&m| phi.get(m)));
        let j = op * v;
        Ok(Jet2(std::array::from_fn(|k| j[k])))
    }
}

/// Convenience wrapper building a fresh [`JetFitter`].
pub fn extract_jet(dom: &GridDomain, phi: &ScalarField, a: usize) -> Result<Jet2> {
    JetFitter::new(dom).extract(dom, phi, a)
}

/// `λ_a = {0; g^{-1/2} ∂ᵢ(√g g^{ik}); g¹¹, 2g¹², 2g¹³, g²², 2g²³, g³³}` with
/// central differences for the drift slots.
pub fn laplace_jet(dom: &GridDomain, g: &MetricField, a: usize) -> Result<LaplaceJet> {
    if a >= dom.len() || !dom.is_interior(a) {
        return Err(Error::BadNode {
            node: a,
            reason: "laplace jet needs an interior node".into(),
        });
    }
    let h = dom.spacing();
    let mut j = [0.0; 10];
    for k in 0..3 {
        let mut s = 0.0;
        for i in 0..3 {
            let p = dom.step(a, i, 1).expect("interior");
            let m = dom.step(a, i, -1).expect("interior");
            let f = |n: usize| g.sqrt_det(n) * g.inv(n).get(i, k);
            s += (f(p) - f(m)) / (2.0 * h[i]);
        }
        j[1 + k] = s / g.sqrt_det(a);
    }
    let inv = g.inv(a);
    for (s, &(i, k)) in SECOND_SLOTS.iter().enumerate() {
        j[4 + s] = if i == k { inv.get(i, i) } else { 2.0 * inv.get(i, k) };
    }
    Ok(Jet2(j))
}

/// Jets of many fields at one node, stacked as rows.
pub fn stacked_jets(fitter: &JetFitter, dom: &GridDomain, fields: &[ScalarField], a: usize) -> Result<DMatrix<f64>> {
    let jets: Vec<Jet2> = fields.iter().map(|f| fitter.extract(dom, f, a)).collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(jets.len(), 10, |r, c| jets[r].0[c]))
}

/// Spectrum and near-null direction of a stacked jet matrix.
#[derive(Debug, Clone)]
pub struct JetRank {
    /// Singular values of the stack, descending.
    pub singular_values: Vec<f64>,
    /// Right singular vector of the smallest singular value, unit length, with
    /// the `g¹¹` slot made nonnegative.
    pub null_vector: Jet2,
    pub rank: usize,
}

/// Rank study of stacked jets: `threshold` is relative to `σ₁`.
pub fn jet_rank(stack: &DMatrix<f64>, threshold: f64) -> JetRank {
    let s = svd(stack);
    let last = s.vt.nrows() - 1;
    let mut v: [f64; 10] = std::array::from_fn(|k| s.vt[(last, k)]);
    if v[4] < 0.0 {
        v = v.map(|x| -x);
    }
    let top = s.sigma[0];
    let rank = s.sigma.iter().filter(|&&x| x > threshold * top).count();
    JetRank {
        singular_values: s.sigma,
        null_vector: Jet2(v),
        rank,
    }
}

/// Result of [`jet_control`].
#[derive(Debug, Clone)]
pub struct JetControl {
    pub control: BoundaryControl,
    pub coefficients: Vec<f64>,
    pub achieved: Jet2,
    /// `|j_a[w^f] − s| / |s|`.
    pub defect: f64,
}

/// Finds `f` in the span of `basis` whose harmonic extension has jet `s` at
/// `a` (least squares). Targets not orthogonal to `λ_a` are refused.
pub fn jet_control(
    op: &DirichletOperator,
    fitter: &JetFitter,
    a: usize,
    target: &Jet2,
    basis: &[BoundaryControl],
) -> Result<JetControl> {
    let fields = op.harmonic_extensions(basis)?;
    jet_control_from_fields(op, fitter, a, target, basis, &fields)
}

/// As [`jet_control`] with precomputed extensions of the basis.
pub fn jet_control_from_fields(
    op: &DirichletOperator,
    fitter: &JetFitter,
    a: usize,
    target: &Jet2,
    basis: &[BoundaryControl],
    fields: &[ScalarField],
) -> Result<JetControl> {
    let dom = op.domain();
    let lambda = laplace_jet(dom, op.metric(), a)?;
    let pairing = target.dot(&lambda).abs();
    if pairing > 1e-8 * target.norm() * lambda.norm() {
        return Err(Error::NotOrthogonal(pairing / (target.norm() * lambda.norm())));
    }
    let stack = stacked_jets(fitter, dom, fields, a)?;
    let t = DVector::from_column_slice(&target.0);
    let (c, _) = min_norm_lstsq(&stack.transpose(), &t, 1e-12);
    let got = stack.transpose() * &c;
    let achieved = Jet2(std::array::from_fn(|k| got[k]));
    let coefficients: Vec<f64> = c.iter().copied().collect();
    let tn = target.norm();
    let defect = achieved.sub(target).norm() / if tn > 0.0 { tn } else { 1.0 };
    Ok(JetControl {
        control: BoundaryControl::combine(basis, &coefficients),
        coefficients,
        achieved,
        defect,
    })
}
