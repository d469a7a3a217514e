use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elliptic::{BoundaryControl, DirichletOperator};
use crate::geometry::io::write_scalar;
use crate::geometry::ScalarField;
use crate::{Error, Result};

/// `G(·, y)` for a fixed interior source `y`.
///
/// `G` vanishes on the boundary, is symmetric, and reproduces Dirichlet
/// solves: `v(x) = Σ_y G(x, y) h(y) √g(y) h¹h²h³` solves `Δv = h`, `v|∂Ω = 0`.
/// With this sign `G ≤ 0`.
#[derive(Debug, Clone)]
pub struct GreenColumn {
    pub source: usize,
    pub field: ScalarField,
}

/// Which quantity a Poisson kernel reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `w^f(x)`.
    Value,
    /// `e · ∇w^f(x) = e^i ∂_i w^f(x)`.
    Gradient { direction: [f64; 3] },
}

/// How the normal derivative of a Green column is taken on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalStencil {
    /// `(−3G₀ + 4G₁ − G₂)/(2h)` along the inward axis, trapezoid face weights.
    #[default]
    SecondOrder,
    /// `(−11G₀ + 18G₁ − 9G₂ + 2G₃)/(6h)`, trapezoid face weights.
    ThirdOrder,
    /// The discrete Green identity `P = −h¹h²h³ S_IBᵀ G`: reproduces the
    /// discrete harmonic extension exactly (up to solver tolerance).
    Discrete,
}

/// Boundary weights `P(y) dσ(y)` for a fixed evaluation node.
#[derive(Debug, Clone)]
pub struct PoissonKernel {
    pub source: usize,
    pub kind: KernelKind,
    /// One weight per boundary node (surface measure included).
    pub weights: Vec<f64>,
}

impl PoissonKernel {
    pub fn apply(&self, f: &BoundaryControl) -> f64 {
        self.weights.iter().zip(f.values()).map(|(w, v)| w * v).sum()
    }

    /// `Σ P dσ`, the discrete kernel mass.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl DirichletOperator {
    /// Green column with a discrete delta `1/(h¹h²h³ √g(y))` at `y`.
    pub fn green_column(&self, y: usize) -> Result<GreenColumn> {
        let dom = self.domain();
        if y >= dom.len() || !dom.is_interior(y) {
            return Err(Error::BadNode {
                node: y,
                reason: "green source must be interior".into(),
            });
        }
        let mut delta = ScalarField::zeros(dom);
        delta.set(y, 1.0 / (dom.cell_volume() * self.metric().sqrt_det(y)));
        let field = self.solve_dirichlet(&delta, &BoundaryControl::constant(dom, 0.0))?;
        Ok(GreenColumn { source: y, field })
    }

    /// Value kernel from the normal derivative of `G(x, ·)` on each boundary
    /// facet (second-order one-sided inward difference).
    pub fn poisson_kernel(&self, x: usize, kind: KernelKind) -> Result<PoissonKernel> {
        self.poisson_kernel_with(x, kind, NormalStencil::default())
    }

    pub fn poisson_kernel_with(&self, x: usize, kind: KernelKind, stencil: NormalStencil) -> Result<PoissonKernel> {
        let dom = self.domain();
        match kind {
            KernelKind::Value => {
                let col = self.green_column(x)?;
                Ok(PoissonKernel {
                    source: x,
                    kind,
                    weights: self.kernel_weights(&col.field, stencil),
                })
            }
            KernelKind::Gradient { direction } => {
                if x >= dom.len() || dom.depth(x) < 2 || dom.depth(x) == u32::MAX {
                    return Err(Error::BadNode {
                        node: x,
                        reason: "gradient kernel needs a node two layers inside".into(),
                    });
                }
                let h = dom.spacing();
                let mut weights = vec![0.0; dom.boundary_nodes().len()];
                for (axis, &e) in direction.iter().enumerate() {
                    if e == 0.0 {
                        continue;
                    }
                    let p = dom.step(x, axis, 1).expect("interior");
                    let m = dom.step(x, axis, -1).expect("interior");
                    let wp = self.kernel_weights(&self.green_column(p)?.field, stencil);
                    let wm = self.kernel_weights(&self.green_column(m)?.field, stencil);
                    for (w, (a, b)) in weights.iter_mut().zip(wp.iter().zip(&wm)) {
                        *w += e * (a - b) / (2.0 * h[axis]);
                    }
                }
                Ok(PoissonKernel { source: x, kind, weights })
            }
        }
    }

    fn kernel_weights(&self, gcol: &ScalarField, stencil: NormalStencil) -> Vec<f64> {
        let dom = self.domain();
        let g = self.metric();
        let mut w = vec![0.0; dom.boundary_nodes().len()];
        if stencil == NormalStencil::Discrete {
            let vol = dom.cell_volume();
            for (i, &n) in dom.interior_nodes().iter().enumerate() {
                for (b, c) in self.coupling().row(i) {
                    w[b] -= vol * gcol.get(n) * c;
                }
            }
            return w;
        }
        for f in dom.facets() {
            let inward = -(f.sign as i64);
            let h = dom.spacing()[f.axis];
            let at = |s: i64| dom.step(f.node, f.axis, s * inward).filter(|&m| dom.in_domain(m));
            let g0 = gcol.get(f.node);
            let d_in = match (at(1), at(2), at(3)) {
                (Some(a), Some(b), Some(c)) if stencil == NormalStencil::ThirdOrder => {
                    (-11.0 * g0 + 18.0 * gcol.get(a) - 9.0 * gcol.get(b) + 2.0 * gcol.get(c)) / (6.0 * h)
                }
                (Some(a), Some(b), _) => (-3.0 * g0 + 4.0 * gcol.get(a) - gcol.get(b)) / (2.0 * h),
                (Some(a), None, _) => (gcol.get(a) - g0) / h,
                _ => 0.0,
            };
            let weight = -d_in * g.inv(f.node).get(f.axis, f.axis) * g.sqrt_det(f.node) * f.area;
            w[dom.boundary_index(f.node).expect("facet on boundary")] += weight;
        }
        w
    }
}

#[derive(Serialize)]
struct Descriptor<'a> {
    source_node: usize,
    kind: &'a str,
    direction: Option<[f64; 3]>,
}

/// Writes a Green column as a field file plus `<path>.desc.json`.
pub fn export_green(path: &Path, op: &DirichletOperator, col: &GreenColumn) -> Result<()> {
    write_scalar(path, op.domain(), &col.field)?;
    write_descriptor(path, col.source, "green", None)
}

/// Writes kernel weights scattered onto boundary nodes (zero elsewhere).
pub fn export_kernel(path: &Path, op: &DirichletOperator, k: &PoissonKernel) -> Result<()> {
    let dom = op.domain();
    let f = BoundaryControl::new(dom, k.weights.clone())?.to_field(dom);
    write_scalar(path, dom, &f)?;
    match k.kind {
        KernelKind::Value => write_descriptor(path, k.source, "value", None),
        KernelKind::Gradient { direction } => write_descriptor(path, k.source, "gradient", Some(direction)),
    }
}

fn write_descriptor(path: &Path, source: usize, kind: &str, direction: Option<[f64; 3]>) -> Result<()> {
    let mut p = path.as_os_str().to_owned();
    p.push(".desc.json");
    let d = Descriptor {
        source_node: source,
        kind,
        direction,
    };
    fs::write(p, serde_json::to_string_pretty(&d)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridDomain, MetricField};

    #[test]
    fn green_column_basic_properties() {
        let d = GridDomain::unit_box(9).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&d), &d)
            .unwrap()
            .with_tolerance(1e-14);
        let (y, x) = (d.index([3, 4, 4]), d.index([5, 3, 2]));
        let gy = op.green_column(y).unwrap();
        let gx = op.green_column(x).unwrap();
        assert!((gy.field.get(x) - gx.field.get(y)).abs() < 1e-12);
        assert!(d.boundary_nodes().iter().all(|&b| gy.field.get(b) == 0.0));
        let peak = d.interior_nodes().iter().max_by(|&&a, &&b| {
            gy.field.get(a).abs().total_cmp(&gy.field.get(b).abs())
        });
        assert_eq!(*peak.unwrap(), y);
        assert!(op.green_column(0).is_err());
    }

    #[test]
    fn gradient_kernel_of_linear_data() {
        let d = GridDomain::unit_box(11).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&d), &d).unwrap();
        let x = d.index([5, 5, 5]);
        let k = op
            .poisson_kernel(x, KernelKind::Gradient { direction: [1.0, 0.0, 0.0] })
            .unwrap();
        let f = BoundaryControl::from_fn(&d, |p| p[0]);
        assert!((k.apply(&f) - 1.0).abs() < 0.1, "{}", k.apply(&f));
        let exact = op
            .poisson_kernel_with(x, k.kind, NormalStencil::Discrete)
            .unwrap();
        assert!((exact.apply(&f) - 1.0).abs() < 1e-9, "{}", exact.apply(&f));
        assert!(op.poisson_kernel(d.index([1, 5, 5]), k.kind).is_err());
    }
}
