//! Recovering the metric from samples of harmonic functions.
//!
//! At each node the jets of the samples span the orthogonal complement of the
//! Laplace jet, so the near-null direction of the stacked jets gives `λ_a` up
//! to a factor. Its second-order slots give `g^{ij}` up to that factor; the
//! drift slots pin the factor's gradient, which is integrated over the grid.
//! One anchor value then fixes the remaining global constant.

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::sparse::{pcg, Csr};
use crate::geometry::ops::inner_at;
use crate::geometry::{grad, laplacian, GridDomain, MetricField, ScalarField, Sym3};
use crate::jets::{Jet2, JetFitter, LaplaceJet};
use crate::linalg::svd;
use crate::{Error, Result};

/// Largest accepted `σ_min/σ_max` of the stacked jet matrix.
pub const MAX_RESIDUAL: f64 = 0.1;
/// Smallest accepted `σ₈/σ₁`: below it the null space is more than one-dimensional.
pub const MIN_GAP: f64 = 1e-8;
/// Flag level for the spread (std/mean) of the per-node implied scale.
pub const SCALE_SPREAD_FLAG: f64 = 1e-2;

/// Estimates `λ_a / |λ_a|` from harmonic samples, with `σ_min/σ_max`.
///
/// The value slot is fixed to zero; the null vector is sought in the nine
/// derivative slots, with the `g¹¹` slot made positive.
pub fn recover_laplace_jet(
    fitter: &JetFitter,
    dom: &GridDomain,
    harmonics: &[ScalarField],
    a: usize,
) -> Result<(LaplaceJet, f64)> {
    if harmonics.len() < 15 {
        return Err(Error::Insufficient(format!(
            "{} harmonic samples, at least 15 needed",
            harmonics.len()
        )));
    }
    if a >= dom.len() || dom.depth(a) == u32::MAX || dom.depth(a) < 3 {
        return Err(Error::BadNode {
            node: a,
            reason: "recovery needs a node three layers inside".into(),
        });
    }
    let jets: Vec<Jet2> = harmonics
        .iter()
        .map(|w| fitter.extract(dom, w, a))
        .collect::<Result<_>>()?;
    let m = nalgebra::DMatrix::from_fn(jets.len(), 9, |r, c| jets[r].0[c + 1]);
    let s = svd(&m);
    let top = s.sigma[0];
    if top == 0.0 || s.sigma[7] < MIN_GAP * top {
        return Err(Error::IllConditioned(format!(
            "jet stack at node {a} has a degenerate null space"
        )));
    }
    let residual = s.sigma[8] / top;
    if residual > MAX_RESIDUAL {
        return Err(Error::IllConditioned(format!(
            "jet null-space residual {residual:.3e} at node {a}"
        )));
    }
    let mut v = [0.0; 10];
    for c in 0..9 {
        v[c + 1] = s.vt[(8, c)];
    }
    if v[4] < 0.0 {
        v = v.map(|x| -x);
    }
    Ok((Jet2(v), residual))
}

/// The inverse-metric readout `{g¹¹, g¹², …}` of a Laplace jet (off-diagonal
/// slots halved).
pub fn jet_readout(lambda: &LaplaceJet) -> Sym3 {
    let l = &lambda.0;
    Sym3([l[4], 0.5 * l[5], 0.5 * l[6], l[7], 0.5 * l[8], l[9]])
}

/// `ĝ_ij` up to a positive factor, normalized to `det ĝ = 1`.
pub fn jets_to_metric(lambda: &LaplaceJet) -> Result<Sym3> {
    let b = jet_readout(lambda);
    if !b.is_spd() {
        return Err(Error::NonSpdReadout);
    }
    let g = b.inverse().ok_or(Error::NonSpdReadout)?;
    Ok(g.scale(g.det().powf(-1.0 / 3.0)))
}

/// How the pointwise factor is handled before calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Integrate the factor's gradient from the drift slots.
    #[default]
    Drift,
    /// Use the determinant-normalized readout as is.
    DetNormalized,
}

/// Recovery before calibration.
#[derive(Debug, Clone)]
pub struct RawRecovery {
    /// Nodes carrying an estimate, ascending.
    pub nodes: Vec<usize>,
    /// Estimated `g_ij` up to one global constant.
    pub metric: Vec<Sym3>,
    /// `σ_min/σ_max` per node.
    pub residual: Vec<f64>,
    /// Relative least-squares misfit of the integrated log-scale (drift mode).
    pub integrability: f64,
    pub mode: ScaleMode,
}

impl RawRecovery {
    pub fn position(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }
}

/// Runs the per-node recovery over nodes three layers inside (four in drift
/// mode, where neighbors are differenced).
pub fn recover_metric(dom: &GridDomain, harmonics: &[ScalarField], mode: ScaleMode) -> Result<RawRecovery> {
    let fitter = JetFitter::new(dom);
    let base = dom.nodes_with_depth(3);
    let per_node: Vec<(LaplaceJet, f64)> = base
        .par_iter()
        .map(|&a| recover_laplace_jet(&fitter, dom, harmonics, a))
        .collect::<Result<_>>()?;
    let mut slot = vec![usize::MAX; dom.len()];
    for (i, &n) in base.iter().enumerate() {
        slot[n] = i;
    }
    // Unit-determinant inverse metric and its scale τ = det(B)^{1/3}.
    let mut inv_hat = Vec::with_capacity(base.len());
    let mut tau = Vec::with_capacity(base.len());
    for (lambda, _) in &per_node {
        let b = jet_readout(lambda);
        if !b.is_spd() {
            return Err(Error::NonSpdReadout);
        }
        let t = b.det().cbrt();
        tau.push(t);
        inv_hat.push(b.scale(1.0 / t));
    }

    let (nodes, log_scale, integrability) = match mode {
        ScaleMode::DetNormalized => (base.clone(), vec![0.0; base.len()], 0.0),
        ScaleMode::Drift => {
            let inner: Vec<usize> = dom.nodes_with_depth(4);
            let h = dom.spacing();
            // ∂_l log ρ = 2 ĝ_lk (∂_i ĝ^{ik} − D^k/τ), where g^{ij} = ρ ĝ^{ij}.
            let gradients: Vec<[f64; 3]> = inner
                .iter()
                .map(|&a| {
                    let i = slot[a];
                    let mut rhs = [0.0; 3];
                    for (k, r) in rhs.iter_mut().enumerate() {
                        let mut div = 0.0;
                        for ax in 0..3 {
                            let p = slot[dom.step(a, ax, 1).expect("depth ≥ 4")];
                            let m = slot[dom.step(a, ax, -1).expect("depth ≥ 4")];
                            div += (inv_hat[p].get(ax, k) - inv_hat[m].get(ax, k)) / (2.0 * h[ax]);
                        }
                        *r = 2.0 * (div - per_node[i].0 .0[1 + k] / tau[i]);
                    }
                    inv_hat[i].inverse().expect("spd").mul_vec(rhs)
                })
                .collect();
            let (psi, mis) = integrate_gradient(dom, &inner, &gradients)?;
            (inner, psi, mis)
        }
    };

    let mut metric = Vec::with_capacity(nodes.len());
    let mut residual = Vec::with_capacity(nodes.len());
    for (n, &a) in nodes.iter().enumerate() {
        let i = slot[a];
        let lower = inv_hat[i].inverse().ok_or(Error::NonSpdReadout)?;
        metric.push(lower.scale((-log_scale[n]).exp()));
        residual.push(per_node[i].1);
    }
    Ok(RawRecovery {
        nodes,
        metric,
        residual,
        integrability,
        mode,
    })
}

/// Least-squares potential of a gradient sampled on `nodes`: minimizes the
/// squared misfit of `ψ_q − ψ_p` against the trapezoid increment on every
/// axis edge, with `ψ` pinned near zero at the first node. Returns `ψ` and the
/// relative misfit.
fn integrate_gradient(dom: &GridDomain, nodes: &[usize], grad: &[[f64; 3]]) -> Result<(Vec<f64>, f64)> {
    let mut slot = vec![usize::MAX; dom.len()];
    for (i, &n) in nodes.iter().enumerate() {
        slot[n] = i;
    }
    let h = dom.spacing();
    let mut edges = Vec::new();
    for (i, &n) in nodes.iter().enumerate() {
        for (ax, &hx) in h.iter().enumerate() {
            if let Some(q) = dom.step(n, ax, 1) {
                let j = slot[q];
                if j != usize::MAX {
                    edges.push((i, j, 0.5 * hx * (grad[i][ax] + grad[j][ax])));
                }
            }
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
    let mut b = vec![0.0; nodes.len()];
    for &(i, j, d) in &edges {
        rows[i].extend([(i, 1.0), (j, -1.0)]);
        rows[j].extend([(j, 1.0), (i, -1.0)]);
        b[i] -= d;
        b[j] += d;
    }
    rows[0].push((0, 1.0));
    let k = Csr::from_rows(nodes.len(), rows);
    let dinv: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut psi = vec![0.0; nodes.len()];
    let out = pcg(&k, &b, &mut psi, &dinv, 100 * nodes.len(), |r| {
        r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-12 * scale
    });
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            residual: f64::NAN,
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(i, j, d) in &edges {
        num += (psi[j] - psi[i] - d).powi(2);
        den += d * d;
    }
    let mis = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    Ok((psi, mis))
}

/// Calibrated recovery.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryResult {
    pub nodes: Vec<usize>,
    #[serde(skip)]
    pub metric: Vec<Sym3>,
    pub residual: Vec<f64>,
    pub anchor: usize,
    /// Constant multiplying the raw estimate.
    pub calibration: f64,
    pub integrability: f64,
    pub mode: ScaleMode,
}

impl RecoveryResult {
    /// Metric field with the estimate on recovered nodes and `fill` elsewhere.
    pub fn to_field(&self, dom: &GridDomain, fill: Sym3) -> Result<MetricField> {
        let mut vals = vec![fill; dom.len()];
        for (&n, m) in self.nodes.iter().zip(&self.metric) {
            vals[n] = *m;
        }
        MetricField::from_values(dom.dims(), vals)
    }
}

/// Fixes the global constant so that the estimate matches `g_anchor` at
/// `anchor` in Frobenius least squares.
pub fn calibrate(raw: &RawRecovery, anchor: usize, g_anchor: &Sym3) -> Result<RecoveryResult> {
    let i = raw.position(anchor).ok_or(Error::BadNode {
        node: anchor,
        reason: "anchor is not a recovered node".into(),
    })?;
    if raw.residual[i] > MAX_RESIDUAL {
        return Err(Error::IllConditioned(format!(
            "anchor residual {:.3e}",
            raw.residual[i]
        )));
    }
    let est = &raw.metric[i];
    let c = est.dot(g_anchor) / est.dot(est);
    if !(c > 0.0) {
        return Err(Error::NonSpdReadout);
    }
    Ok(RecoveryResult {
        nodes: raw.nodes.clone(),
        metric: raw.metric.iter().map(|m| m.scale(c)).collect(),
        residual: raw.residual.clone(),
        anchor,
        calibration: c,
        integrability: raw.integrability,
        mode: raw.mode,
    })
}

/// Comparison of a calibrated recovery with a known metric.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryComparison {
    /// `‖ĝ − g‖_F / ‖g‖_F` per recovered node.
    pub errors: Vec<f64>,
    pub max_error: f64,
    /// Per-node constant `c(a)` best matching `ĝ(a)` to `g(a)`.
    pub scales: Vec<f64>,
    /// Standard deviation over mean of `scales`.
    pub scale_spread: f64,
    pub flagged: bool,
}

pub fn compare(result: &RecoveryResult, truth: &MetricField) -> RecoveryComparison {
    let mut errors = Vec::with_capacity(result.nodes.len());
    let mut scales = Vec::with_capacity(result.nodes.len());
    for (&n, est) in result.nodes.iter().zip(&result.metric) {
        let g = truth.at(n);
        errors.push(est.sub(g).frobenius() / g.frobenius());
        scales.push(est.dot(g) / est.dot(est));
    }
    let k = scales.len().max(1) as f64;
    let mean = scales.iter().sum::<f64>() / k;
    let var = scales.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k;
    let scale_spread = var.sqrt() / mean.abs();
    RecoveryComparison {
        max_error: errors.iter().copied().fold(0.0, f64::max),
        errors,
        scales,
        scale_spread,
        flagged: scale_spread > SCALE_SPREAD_FLAG,
    }
}

/// Pointwise residual of `Δ_{cg} y = c⁻¹ Δ_g y − ½ ⟨∇c⁻¹, ∇y⟩_g` at nodes
/// two layers inside (zero elsewhere).
pub fn conformal_identity_check(
    dom: &GridDomain,
    c: &ScalarField,
    g: &MetricField,
    y: &ScalarField,
) -> Result<ScalarField> {
    c.check(dom)?;
    y.check(dom)?;
    let cv = c.values();
    if let Some(n) = dom.domain_nodes().into_iter().find(|&n| !(cv[n] > 0.0)) {
        return Err(Error::BadNode {
            node: n,
            reason: "conformal factor must be positive".into(),
        });
    }
    let cg = g.conformal(cv)?;
    let lhs = laplacian(dom, &cg, y)?;
    let base = laplacian(dom, g, y)?;
    let grad_inv = grad(dom, g, &c.map(|v| 1.0 / v))?;
    let grad_y = grad(dom, g, y)?;
    let mut out = ScalarField::zeros(dom);
    for n in dom.nodes_with_depth(2) {
        let rhs = base.get(n) / cv[n] - 0.5 * inner_at(g.at(n), grad_inv.get(n), grad_y.get(n));
        out.set(n, lhs.get(n) - rhs);
    }
    Ok(out)
}

/// Sup of the conformal identity residual for `c = e^{x¹}` and
/// `y = (x²)² + sin(x¹x³)` over nodes in the middle 3/4 of the box.
pub fn conformal_study_residual(dom: &GridDomain, g: &MetricField) -> Result<f64> {
    let c = ScalarField::from_fn(dom, |x| x[0].exp());
    let y = ScalarField::from_fn(dom, |x| x[1] * x[1] + (x[0] * x[2]).sin());
    let r = conformal_identity_check(dom, &c, g, &y)?;
    let (lo, hi) = (dom.lo(), dom.hi());
    let inside = |x: [f64; 3]| {
        (0..3).all(|k| {
            let t = (x[k] - lo[k]) / (hi[k] - lo[k]);
            (0.125 - 1e-9..=0.875 + 1e-9).contains(&t)
        })
    };
    let nodes: Vec<usize> = dom
        .nodes_with_depth(2)
        .into_iter()
        .filter(|&n| inside(dom.position(n)))
        .collect();
    Ok(r.sup_over(&nodes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readout_examples() {
        let flat = Jet2([0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let g = jets_to_metric(&flat).unwrap();
        assert!(g.sub(&Sym3::IDENTITY).frobenius() < 1e-14);
        let l = Jet2([0.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let g = jets_to_metric(&l).unwrap();
        let want = Sym3::diag([0.25, 1.0, 1.0]).scale(0.25f64.powf(-1.0 / 3.0));
        assert!(g.sub(&want).frobenius() < 1e-14);
        assert!((g.det() - 1.0).abs() < 1e-14);
        assert!(matches!(jets_to_metric(&flat.scale(-1.0)), Err(Error::NonSpdReadout)));
    }

    #[test]
    fn equal_harmonics_are_degenerate() {
        let d = GridDomain::unit_box(13).unwrap();
        let w = ScalarField::from_fn(&d, |x| x[0] * x[1]);
        let f = JetFitter::new(&d);
        let a = d.nearest_node([0.5; 3]);
        let r = recover_laplace_jet(&f, &d, &vec![w; 20], a);
        assert!(matches!(r, Err(Error::IllConditioned(_))));
        assert!(matches!(
            recover_laplace_jet(&f, &d, &[], a),
            Err(Error::Insufficient(_))
        ));
    }

    #[test]
    fn conformal_identity_trivial_cases() {
        let d = GridDomain::unit_box(11).unwrap();
        let g = MetricField::flat(&d);
        let y = ScalarField::from_fn(&d, |x| (x[0] * 2.0).sin() * x[1] + x[2] * x[2]);
        for c in [1.0, 2.5] {
            let r = conformal_identity_check(&d, &ScalarField::constant(&d, c), &g, &y).unwrap();
            assert!(r.values().iter().all(|v| v.abs() < 1e-12), "c = {c}");
        }
        let bad = ScalarField::constant(&d, -1.0);
        assert!(conformal_identity_check(&d, &bad, &g, &y).is_err());
    }
}
