use rayon::prelude::*;

use crate::elliptic::sparse::{pcg, Csr};
use crate::geometry::field::check_dims;
use crate::geometry::ops::flux_stencil;
use crate::geometry::{GridDomain, MetricField, ScalarField};
use crate::{Error, Result};

/// Dirichlet datum: one value per boundary node, ordered like
/// [`GridDomain::boundary_nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryControl {
    values: Vec<f64>,
}

impl BoundaryControl {
    pub fn new(dom: &GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != dom.boundary_nodes().len() {
            return Err(Error::InvalidArgument(format!(
                "control has {} values, domain has {} boundary nodes",
                values.len(),
                dom.boundary_nodes().len()
            )));
        }
        Ok(BoundaryControl { values })
    }

    pub fn from_fn(dom: &GridDomain, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = dom.boundary_nodes().iter().map(|&b| f(dom.position(b))).collect();
        BoundaryControl { values }
    }

    pub fn constant(dom: &GridDomain, c: f64) -> Self {
        BoundaryControl {
            values: vec![c; dom.boundary_nodes().len()],
        }
    }

    /// Boundary trace of a field.
    pub fn trace(dom: &GridDomain, f: &ScalarField) -> Self {
        let values = dom.boundary_nodes().iter().map(|&b| f.get(b)).collect();
        BoundaryControl { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ c_m f_m`.
    pub fn combine(controls: &[BoundaryControl], coefs: &[f64]) -> Self {
        let n = controls.first().map_or(0, |c| c.len());
        let mut values = vec![0.0; n];
        for (c, &a) in controls.iter().zip(coefs) {
            for (v, x) in values.iter_mut().zip(&c.values) {
                *v += a * x;
            }
        }
        BoundaryControl { values }
    }

    /// Full-grid field equal to the control on the boundary and zero elsewhere.
    pub fn to_field(&self, dom: &GridDomain) -> ScalarField {
        let mut f = ScalarField::zeros(dom);
        for (&b, &v) in dom.boundary_nodes().iter().zip(&self.values) {
            f.set(b, v);
        }
        f
    }
}

/// Solver statistics of one Dirichlet solve.
#[derive(Debug, Clone)]
pub struct Solve {
    pub field: ScalarField,
    pub iterations: usize,
    /// `h² ‖Δv − h‖_∞ / max(‖h‖_∞ h², ‖f‖_∞, 1e-300)` over interior nodes.
    pub residual: f64,
}

/// Assembled `−Δ_g` on interior nodes in the `√g`-weighted (flux) form.
///
/// With `S` the flux stencil, `Δv = g^{-1/2} S v`. Unknowns are interior
/// values; `K = −S_II` is symmetric positive definite and `S_IB` couples the
/// interior equations to boundary values.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    dom: GridDomain,
    g: MetricField,
    unknown: Vec<usize>,
    k: Csr,
    coupling: Csr,
    diag_inv: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl DirichletOperator {
    pub fn assemble(g: &MetricField, dom: &GridDomain) -> Result<Self> {
        check_dims(dom.dims(), g.dims())?;
        for n in 0..dom.len() {
            if !g.at(n).is_spd() {
                return Err(Error::NonSpdMetric { node: n });
            }
        }
        let interior = dom.interior_nodes();
        let mut unknown = vec![usize::MAX; dom.len()];
        for (i, &n) in interior.iter().enumerate() {
            unknown[n] = i;
        }
        let mut krows = Vec::with_capacity(interior.len());
        let mut brows = Vec::with_capacity(interior.len());
        for &n in interior {
            let mut kr = Vec::with_capacity(19);
            let mut br = Vec::new();
            for (m, c) in flux_stencil(dom, g, n) {
                if unknown[m] != usize::MAX {
                    kr.push((unknown[m], -c));
                } else if let Some(b) = dom.boundary_index(m) {
                    br.push((b, c));
                }
            }
            krows.push(kr);
            brows.push(br);
        }
        let k = Csr::from_rows(interior.len(), krows);
        let coupling = Csr::from_rows(dom.boundary_nodes().len(), brows);
        let diag_inv = k.diagonal().iter().map(|d| 1.0 / d).collect();
        let n_third = (interior.len() as f64).cbrt();
        Ok(DirichletOperator {
            dom: dom.clone(),
            g: g.clone(),
            unknown,
            k,
            coupling,
            diag_inv,
            tol: 1e-11,
            max_iter: (20.0 * n_third * 1e3).ceil() as usize,
        })
    }

    /// Overrides the stopping tolerance on the scaled residual.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }
    pub fn max_iterations(&self) -> usize {
        self.max_iter
    }
    pub fn domain(&self) -> &GridDomain {
        &self.dom
    }
    pub fn metric(&self) -> &MetricField {
        &self.g
    }
    /// The interior system matrix `K = −S_II`.
    pub fn matrix(&self) -> &Csr {
        &self.k
    }
    /// The coupling `S_IB` of interior equations to boundary values.
    pub fn coupling(&self) -> &Csr {
        &self.coupling
    }

    /// Relative entrywise symmetry defect of `K`.
    pub fn symmetry_defect(&self) -> f64 {
        self.k.symmetry_defect()
    }

    /// Solves `Δv = h` in the interior with `v = f` on the boundary.
    pub fn solve_dirichlet(&self, h: &ScalarField, f: &BoundaryControl) -> Result<ScalarField> {
        Ok(self.solve_report(h, f)?.field)
    }

    /// `w^f`: the discrete harmonic extension of `f`.
    pub fn harmonic_extension(&self, f: &BoundaryControl) -> Result<ScalarField> {
        Ok(self.solve_report(&ScalarField::zeros(&self.dom), f)?.field)
    }

    /// Harmonic extensions of many controls, in parallel, in input order.
    pub fn harmonic_extensions(&self, fs: &[BoundaryControl]) -> Result<Vec<ScalarField>> {
        fs.par_iter().map(|f| self.harmonic_extension(f)).collect()
    }

    pub fn solve_report(&self, h: &ScalarField, f: &BoundaryControl) -> Result<Solve> {
        self.solve_with_tol(h, f, self.tol)
    }

    pub fn solve_with_tol(&self, h: &ScalarField, f: &BoundaryControl, tol: f64) -> Result<Solve> {
        h.check(&self.dom)?;
        if f.len() != self.dom.boundary_nodes().len() {
            return Err(Error::InvalidArgument("control does not match domain".into()));
        }
        let interior = self.dom.interior_nodes();
        let sg: Vec<f64> = interior.iter().map(|&n| self.g.sqrt_det(n)).collect();
        let bf = self.coupling_apply(f.values());
        let rhs: Vec<f64> = (0..interior.len())
            .map(|i| bf[i] - sg[i] * h.get(interior[i]))
            .collect();

        let hmin = self.dom.spacing().iter().copied().fold(f64::INFINITY, f64::min);
        let h_inf = h.sup_over(interior);
        let denom = (h_inf * hmin * hmin).max(f.sup()).max(1e-300);
        let scaled = |r: &[f64]| {
            let m = r.iter().zip(&sg).fold(0.0f64, |m, (r, s)| m.max((r / s).abs()));
            hmin * hmin * m / denom
        };

        let start = self.initial_guess(f);
        let mut x = vec![start; interior.len()];
        let out = pcg(&self.k, &rhs, &mut x, &self.diag_inv, self.max_iter, |r| scaled(r) <= tol);
        let kx = self.k.mul(&x);
        let r: Vec<f64> = rhs.iter().zip(&kx).map(|(b, a)| b - a).collect();
        let residual = scaled(&r);
        if !out.converged {
            return Err(Error::NotConverged {
                iterations: out.iterations,
                residual,
            });
        }
        let mut field = f.to_field(&self.dom);
        for (i, &n) in interior.iter().enumerate() {
            field.set(n, x[i]);
        }
        Ok(Solve {
            field,
            iterations: out.iterations,
            residual,
        })
    }

    fn coupling_apply(&self, f: &[f64]) -> Vec<f64> {
        self.coupling.mul(f)
    }

    /// Surface-weighted mean of the boundary data (exact for constant data).
    fn initial_guess(&self, f: &BoundaryControl) -> f64 {
        let w = self.dom.surface_weights(&self.g);
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        w.iter().zip(f.values()).map(|(w, v)| w * v).sum::<f64>() / total
    }

    /// `Δv` at interior nodes via the assembled operator (zero elsewhere).
    pub fn apply_laplacian(&self, v: &ScalarField) -> Result<ScalarField> {
        v.check(&self.dom)?;
        let interior = self.dom.interior_nodes();
        let xi: Vec<f64> = interior.iter().map(|&n| v.get(n)).collect();
        let xb: Vec<f64> = self.dom.boundary_nodes().iter().map(|&n| v.get(n)).collect();
        let kx = self.k.mul(&xi);
        let bx = self.coupling_apply(&xb);
        let mut out = ScalarField::zeros(&self.dom);
        for (i, &n) in interior.iter().enumerate() {
            out.set(n, (bx[i] - kx[i]) / self.g.sqrt_det(n));
        }
        Ok(out)
    }

    /// Position of an interior node among the unknowns.
    pub fn unknown_index(&self, node: usize) -> Option<usize> {
        self.unknown.get(node).copied().filter(|&i| i != usize::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MetricPreset, Sym3};

    #[test]
    fn flat_stencil_is_seven_point() {
        let d = GridDomain::unit_box(7).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&d), &d).unwrap();
        let center = op.unknown_index(d.index([3, 3, 3])).unwrap();
        let row: Vec<(usize, f64)> = op.matrix().row(center).collect();
        let h2 = 1.0 / 36.0;
        assert_eq!(row.len(), 7);
        for (c, v) in row {
            let want = if c == center { 6.0 / h2 } else { -1.0 / h2 };
            assert!((v - want).abs() < 1e-9 * want.abs());
        }
    }

    #[test]
    fn anisotropic_constant_metric_scales_axis_one() {
        let d = GridDomain::unit_box(7).unwrap();
        let g = MetricField::constant(&d, Sym3::diag([4.0, 1.0, 1.0])).unwrap();
        let op = DirichletOperator::assemble(&g, &d).unwrap();
        let flat = DirichletOperator::assemble(&MetricField::flat(&d), &d).unwrap();
        let n = d.index([3, 3, 3]);
        let (c, e1, e2) = (
            op.unknown_index(n).unwrap(),
            op.unknown_index(d.index([4, 3, 3])).unwrap(),
            op.unknown_index(d.index([3, 4, 3])).unwrap(),
        );
        // √g = 2 multiplies every coupling; g^{11} = 1/4 scales axis one.
        let r1 = op.matrix().get(c, e1) / (2.0 * flat.matrix().get(c, e1));
        let r2 = op.matrix().get(c, e2) / (2.0 * flat.matrix().get(c, e2));
        assert!((r1 - 0.25).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn assembled_matrix_is_symmetric() {
        let d = GridDomain::unit_box(9).unwrap();
        let g = MetricField::from_preset(&d, &MetricPreset::GenericSmooth { amplitude: 0.3 }).unwrap();
        let op = DirichletOperator::assemble(&g, &d).unwrap();
        assert!(op.symmetry_defect() < 1e-12);
    }

    #[test]
    fn constant_and_linear_data_are_reproduced() {
        let d = GridDomain::unit_box(9).unwrap();
        let g = MetricField::flat(&d);
        let op = DirichletOperator::assemble(&g, &d).unwrap();
        let one = op.harmonic_extension(&BoundaryControl::constant(&d, 1.0)).unwrap();
        assert!(one.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let x = op.harmonic_extension(&BoundaryControl::from_fn(&d, |p| p[0])).unwrap();
        for n in d.domain_nodes() {
            assert!((x.get(n) - d.position(n)[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn solution_matches_boundary_exactly() {
        let d = GridDomain::unit_box(7).unwrap();
        let g = MetricField::from_preset(&d, &MetricPreset::ConformalSine { amplitude: 0.3 }).unwrap();
        let op = DirichletOperator::assemble(&g, &d).unwrap();
        let f = BoundaryControl::from_fn(&d, |p| (3.0 * p[0]).sin() + p[1] * p[2]);
        let h = ScalarField::from_fn(&d, |p| p[0] - p[2]);
        let s = op.solve_report(&h, &f).unwrap();
        for (&b, &v) in d.boundary_nodes().iter().zip(f.values()) {
            assert_eq!(s.field.get(b), v);
        }
        assert!(s.residual < 1e-10);
        let lap = op.apply_laplacian(&s.field).unwrap();
        for &n in d.interior_nodes() {
            assert!((lap.get(n) - h.get(n)).abs() < 1e-8);
        }
    }
}
