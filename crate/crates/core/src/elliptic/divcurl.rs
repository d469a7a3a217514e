use crate::elliptic::sparse::{pcg, Csr};
use crate::elliptic::{BoundaryControl, DirichletOperator};
use crate::geometry::ops::{div_at, rot_at};
use crate::geometry::{grad_with_boundary, ScalarField, VectorField};
use crate::{Error, Result};

/// Output of [`DirichletOperator::divcurl_solve`].
#[derive(Debug, Clone)]
pub struct DivCurl {
    pub u: VectorField,
    /// `‖rot u − v‖_∞ / ‖v‖_∞` over nodes two layers inside (norms in `g`).
    pub rot_residual: f64,
    /// `‖div u‖_∞ / ‖v‖_∞` over the same nodes.
    pub div_residual: f64,
    /// `‖div v‖_∞ / ‖v‖_∞` of the input, for reference.
    pub input_div: f64,
    /// Set when `rot_residual` exceeds the acceptance threshold.
    pub flagged: bool,
}

/// Threshold on the relative `rot` residual above which a result is flagged.
pub const DIVCURL_FLAG: f64 = 5e-2;

impl DirichletOperator {
    /// Finds `u` with `rot u ≈ v` and `div u ≈ 0` for a divergence-free `v`
    /// on a plain box.
    ///
    /// A covector potential `A` with `∂ × A = √g v` is built by integrating
    /// along `x³` (with `A₃ = 0` and a bottom-face correction along `x¹`);
    /// `u = g⁻¹A` then has the right curl. The gauge is fixed by adding `∇ψ`
    /// with `div ∇ψ = −div u`: for diagonal metrics on the wide stencil (so
    /// the result is divergence free to solver tolerance two layers in),
    /// otherwise through the compact Dirichlet operator with `ψ|∂Ω = 0`.
    /// Residuals are reported rather than guaranteed.
    pub fn divcurl_solve(&self, v: &VectorField) -> Result<DivCurl> {
        let dom = self.domain();
        let g = self.metric();
        v.check(dom)?;
        if !dom.is_plain_box() {
            return Err(Error::NontrivialTopology(
                "div-curl solve is only supported on a plain box".into(),
            ));
        }
        let [nx, ny, nz] = dom.dims();
        let h = dom.spacing();
        let big_v = |n: usize, c: usize| g.sqrt_det(n) * v.get(n)[c];

        let mut a = vec![[0.0f64; 3]; dom.len()];
        for j in 0..ny {
            // φ(x, y) = ∫ V³(·, y, z₀) dx along the bottom face.
            let mut phi = 0.0;
            for i in 0..nx {
                if i > 0 {
                    let (p, q) = (dom.index([i - 1, j, 0]), dom.index([i, j, 0]));
                    phi += 0.5 * h[0] * (big_v(p, 2) + big_v(q, 2));
                }
                let mut a1 = 0.0;
                let mut a2 = phi;
                a[dom.index([i, j, 0])] = [a1, a2, 0.0];
                for k in 1..nz {
                    let (p, q) = (dom.index([i, j, k - 1]), dom.index([i, j, k]));
                    a1 += 0.5 * h[2] * (big_v(p, 1) + big_v(q, 1));
                    a2 -= 0.5 * h[2] * (big_v(p, 0) + big_v(q, 0));
                    a[q] = [a1, a2, 0.0];
                }
            }
        }
        let raised: Vec<[f64; 3]> = (0..dom.len()).map(|n| g.inv(n).mul_vec(a[n])).collect();
        let mut u = VectorField::from_vec(dom.dims(), raised)?;

        let psi = if g.is_diagonal() {
            self.wide_gauge(&u)?
        } else {
            let mut rhs = ScalarField::zeros(dom);
            for &n in dom.interior_nodes() {
                rhs.set(n, -div_at(dom, g, &u, n)?);
            }
            self.solve_dirichlet(&rhs, &BoundaryControl::constant(dom, 0.0))?
        };
        u = u.add(&grad_with_boundary(dom, g, &psi)?);

        let nodes = dom.nodes_with_depth(2);
        let gnorm = |n: usize, w: [f64; 3]| g.at(n).quad(w, w).sqrt();
        let vmax = nodes.iter().fold(0.0f64, |m, &n| m.max(gnorm(n, v.get(n))));
        let mut rot_err = 0.0f64;
        let mut div_err = 0.0f64;
        let mut in_div = 0.0f64;
        for &n in &nodes {
            let r = rot_at(dom, g, &u, n)?;
            let w = v.get(n);
            rot_err = rot_err.max(gnorm(n, [r[0] - w[0], r[1] - w[1], r[2] - w[2]]));
            div_err = div_err.max(div_at(dom, g, &u, n)?.abs());
            in_div = in_div.max(div_at(dom, g, v, n)?.abs());
        }
        let rel = |x: f64| if vmax > 0.0 { x / vmax } else { x };
        let rot_residual = rel(rot_err);
        Ok(DivCurl {
            u,
            rot_residual,
            div_residual: rel(div_err),
            input_div: rel(in_div),
            flagged: rot_residual > DIVCURL_FLAG,
        })
    }
}

impl DirichletOperator {
    /// Gauge potential for a diagonal metric: solves `div ∇ψ = −div u` with the
    /// wide (central of central) stencil at nodes of depth ≥ 2, `ψ = 0` on
    /// shallower nodes. Then `div(u + ∇ψ)` vanishes there to solver tolerance
    /// while `rot ∇ψ` stays identically zero.
    fn wide_gauge(&self, u: &VectorField) -> Result<ScalarField> {
        let dom = self.domain();
        let g = self.metric();
        let h = dom.spacing();
        let nodes = dom.nodes_with_depth(2);
        let mut index = vec![usize::MAX; dom.len()];
        for (i, &n) in nodes.iter().enumerate() {
            index[n] = i;
        }
        let coef = |m: usize, a: usize| g.sqrt_det(m) * g.inv(m).get(a, a) / (4.0 * h[a] * h[a]);
        let mut rows = Vec::with_capacity(nodes.len());
        let mut rhs = Vec::with_capacity(nodes.len());
        for &n in &nodes {
            let mut row = Vec::with_capacity(7);
            let mut center = 0.0;
            for a in 0..3 {
                for s in [-1i64, 1] {
                    let mid = dom.step(n, a, s).expect("depth ≥ 2");
                    let far = dom.step(n, a, 2 * s).expect("depth ≥ 2");
                    let c = coef(mid, a);
                    center += c;
                    if index[far] != usize::MAX {
                        row.push((index[far], -c));
                    }
                }
            }
            row.push((index[n], center));
            rows.push(row);
            rhs.push(g.sqrt_det(n) * div_at(dom, g, u, n)?);
        }
        let k = Csr::from_rows(nodes.len(), rows);
        let dinv: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let tol = self.tolerance();
        let mut x = vec![0.0; nodes.len()];
        let out = pcg(&k, &rhs, &mut x, &dinv, self.max_iterations(), |r| {
            r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol * scale
        });
        if !out.converged {
            return Err(Error::NotConverged {
                iterations: out.iterations,
                residual: f64::NAN,
            });
        }
        let mut psi = ScalarField::zeros(dom);
        for (i, &n) in nodes.iter().enumerate() {
            psi.set(n, x[i]);
        }
        Ok(psi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridDomain, MaskSpec, MetricField};

    #[test]
    fn constant_field_and_zero() {
        let d = GridDomain::unit_box(9).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&d), &d).unwrap();
        let out = op.divcurl_solve(&VectorField::constant(&d, [1.0, 0.0, 0.0])).unwrap();
        assert!(out.rot_residual < 1e-10 && out.div_residual < 1e-8, "{out:?}");
        let zero = op.divcurl_solve(&VectorField::zeros(&d)).unwrap();
        assert!(zero.u.values().iter().all(|w| *w == [0.0; 3]));
    }

    #[test]
    fn cavity_is_refused() {
        let d = GridDomain::build(
            [0.0; 3],
            [1.0; 3],
            [9; 3],
            MaskSpec::BoxMinusBox { lo: [0.4; 3], hi: [0.6; 3] },
        )
        .unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&d), &d).unwrap();
        assert!(matches!(
            op.divcurl_solve(&VectorField::zeros(&d)),
            Err(Error::NontrivialTopology(_))
        ));
    }
}
