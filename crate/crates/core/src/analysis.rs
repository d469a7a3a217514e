//! Dirichlet fields on cavity domains, the surface curl identity, the
//! uniqueness probe on planar patches, and discrete circulation.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::elliptic::{BoundaryControl, DirichletOperator};
use crate::geometry::ops::{div_at, rot_at};
use crate::geometry::{grad_with_boundary, GridDomain, MetricField, ScalarField, VectorField};
use crate::linalg::singular_values;
use crate::quaternion::{q_residual, sup_norm, QuaternionField};
use crate::{Error, Result};

/// Basis of the discrete space of Dirichlet fields.
#[derive(Debug, Clone)]
pub struct DirichletFieldBasis {
    pub fields: Vec<VectorField>,
    /// Per field: `‖rot d‖_∞` and `‖div d‖_∞` at depth ≥ 2, relative to `‖d‖_∞`.
    pub rot_residual: Vec<f64>,
    pub div_residual: Vec<f64>,
    /// Largest tangential part on the boundary relative to `‖d‖_∞`.
    pub tangential: Vec<f64>,
    /// `∫_{∂Ω} d·ν dσ` over the whole boundary, from the operator's own
    /// boundary fluxes.
    pub total_flux: Vec<f64>,
    /// `−∫ d·ν dσ` over the outer boundary component (the capacity).
    pub capacity: Vec<f64>,
    /// Total flux by facet quadrature of one-sided gradients (diagnostic; it
    /// sees the singular behavior at the cavity's edges).
    pub quadrature_flux: Vec<f64>,
}

/// Outward flux of `∇φ` through each boundary component, read off the
/// discrete operator: the flux leaving through boundary node `b` is
/// `Σ_i vol c_ib (φ_b − φ_i)` over interior neighbors `i`.
///
/// Summed over all components this equals `Σ_i vol √g Δφ(i)`, so it vanishes
/// for a discrete harmonic `φ` up to solver tolerance.
pub fn component_fluxes(op: &DirichletOperator, phi: &ScalarField) -> Vec<f64> {
    let dom = op.domain();
    let comps = dom.boundary_components();
    let bnodes = dom.boundary_nodes();
    let vol = dom.cell_volume();
    let mut out = vec![0.0; dom.n_components()];
    for (i, &n) in dom.interior_nodes().iter().enumerate() {
        for (b, c) in op.coupling().row(i) {
            out[comps[b]] += vol * c * (phi.get(bnodes[b]) - phi.get(n));
        }
    }
    out
}

/// Per-facet contributions of `∫ v·ν dσ`, with each facet's component label.
fn facet_fluxes(dom: &GridDomain, g: &MetricField, v: &VectorField) -> Vec<(usize, f64)> {
    let comps = dom.boundary_components();
    dom.facets()
        .iter()
        .map(|f| {
            let b = dom.boundary_index(f.node).expect("facet on the boundary");
            // dσ g(v, ν) reduces to area √g sign v^axis.
            (comps[b], f.area * g.sqrt_det(f.node) * f.sign * v.get(f.node)[f.axis])
        })
        .collect()
}

/// One field `∇φ` per inner boundary component, `φ = 1` on it and `0` on the
/// rest of the boundary. Empty when the boundary is connected.
pub fn dirichlet_basis(op: &DirichletOperator) -> Result<DirichletFieldBasis> {
    let (dom, g) = (op.domain(), op.metric());
    let comps = dom.boundary_components();
    let outer = comps.first().copied().unwrap_or(0);
    let mut out = DirichletFieldBasis {
        fields: vec![],
        rot_residual: vec![],
        div_residual: vec![],
        tangential: vec![],
        total_flux: vec![],
        capacity: vec![],
        quadrature_flux: vec![],
    };
    let normals = dom.boundary_normals(g);
    for c in (0..dom.n_components()).filter(|&c| c != outer) {
        let f = BoundaryControl::new(dom, comps.iter().map(|&k| if k == c { 1.0 } else { 0.0 }).collect())?;
        let phi = op.harmonic_extension(&f)?;
        let d = grad_with_boundary(dom, g, &phi)?;
        let norm = |n: usize, w: [f64; 3]| g.at(n).quad(w, w).sqrt();
        let dmax = dom.domain_nodes().into_iter().map(|n| norm(n, d.get(n))).fold(0.0, f64::max);
        let (mut rr, mut dr) = (0.0f64, 0.0f64);
        for n in dom.nodes_with_depth(2) {
            rr = rr.max(norm(n, rot_at(dom, g, &d, n)?));
            dr = dr.max(div_at(dom, g, &d, n)?.abs());
        }
        let mut tang = 0.0f64;
        for (b, &n) in dom.boundary_nodes().iter().enumerate() {
            let v = d.get(n);
            let nu = normals[b];
            let vn = g.at(n).quad(v, nu);
            let t = [0, 1, 2].map(|k| v[k] - vn * nu[k]);
            tang = tang.max(norm(n, t));
        }
        let fl = facet_fluxes(dom, g, &d);
        out.quadrature_flux.push(fl.iter().map(|x| x.1).sum());
        let by_comp = component_fluxes(op, &phi);
        out.total_flux.push(by_comp.iter().sum());
        out.capacity.push(-by_comp[outer]);
        out.rot_residual.push(rr / dmax);
        out.div_residual.push(dr / dmax);
        out.tangential.push(tang / dmax);
        out.fields.push(d);
    }
    Ok(out)
}

/// Nodes of a coordinate-plane slab at least three layers inside.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatch {
    /// Normal axis.
    pub axis: usize,
    /// Lattice index of the middle plane along `axis`.
    pub index: usize,
    /// Number of planes (1 for a plane, 3 for a thick slab).
    pub layers: usize,
    pub nodes: Vec<usize>,
}

impl SurfacePatch {
    pub fn plane(dom: &GridDomain, axis: usize, index: usize) -> Result<Self> {
        Self::slab(dom, axis, index, 1)
    }

    /// `layers` adjacent planes centered on `index` (odd counts are symmetric).
    pub fn slab(dom: &GridDomain, axis: usize, index: usize, layers: usize) -> Result<Self> {
        if axis > 2 || layers == 0 || index >= dom.dims()[axis] {
            return Err(Error::InvalidArgument("bad surface patch".into()));
        }
        let half = (layers - 1) / 2;
        let lo = index.saturating_sub(half);
        let planes = lo..lo + layers;
        let nodes: Vec<usize> = dom
            .nodes_with_depth(3)
            .into_iter()
            .filter(|&n| planes.contains(&dom.coords_of(n)[axis]))
            .collect();
        Ok(SurfacePatch {
            axis,
            index,
            layers,
            nodes,
        })
    }

    /// Central plane normal to `axis`.
    pub fn central(dom: &GridDomain, axis: usize) -> Result<Self> {
        Self::plane(dom, axis, dom.dims()[axis] / 2)
    }
}

/// Residual of `ν·rot v = −div_Σ(ν × v_θ)` on a flat-metric plane patch:
/// both sides by central differences, sup over the patch nodes.
///
/// (`ν × v_θ` is the tangential field rotated by a quarter turn; with this
/// orientation the surface divergence carries a minus sign.)
pub fn surface_identity_check(dom: &GridDomain, g: &MetricField, v: &VectorField, patch: &SurfacePatch) -> Result<f64> {
    if !g.is_flat() {
        return Err(Error::InvalidArgument("surface identity is checked for the flat metric".into()));
    }
    if patch.nodes.is_empty() {
        return Err(Error::Insufficient("patch too small for the stencils".into()));
    }
    let a = patch.axis;
    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
    let h = dom.spacing();
    let mut worst = 0.0f64;
    for &n in &patch.nodes {
        let lhs = rot_at(dom, g, v, n)?[a];
        // ν × v_θ = (ν × v) has components (−v_c along b, v_b along c).
        let w = |m: usize| {
            let x = v.get(m);
            (-x[c], x[b])
        };
        let d = |axis: usize, sel: fn((f64, f64)) -> f64| {
            let p = dom.step(n, axis, 1).expect("inside");
            let q = dom.step(n, axis, -1).expect("inside");
            (sel(w(p)) - sel(w(q))) / (2.0 * h[axis])
        };
        let div_s = d(b, |t| t.0) + d(c, |t| t.1);
        worst = worst.max((lhs + div_s).abs());
    }
    Ok(worst)
}

/// One row of the probe's certificate table.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateRow {
    pub field: usize,
    pub sup_on_patch: f64,
    pub sup_on_domain: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    /// `σ_min/σ_max` of the sup-normalized restriction to the patch.
    pub ratio: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Set when the basis itself is numerically dependent (ratio forced to 0).
    pub dependent_basis: bool,
    pub table: Vec<CertificateRow>,
    pub note: &'static str,
}

/// Default tolerance on `q_residual` relative to the field's sup norm.
pub const PROBE_MEMBERSHIP_TOL: f64 = 5e-2;
/// Patch rows required per basis field.
pub const PROBE_OVERSAMPLING: usize = 4;

fn normalized_columns(fields: &[&QuaternionField], nodes: &[usize], scales: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(4 * nodes.len(), fields.len(), |r, c| {
        let (n, k) = (nodes[r / 4], r % 4);
        let p = fields[c];
        let v = if k == 0 { p.scalar.get(n) } else { p.vector.get(n)[k - 1] };
        v / scales[c]
    })
}

/// Restricts sup-normalized basis fields to the patch and reports the
/// spread of singular values.
///
/// A ratio bounded away from zero means no normalized combination is small
/// on the patch; this is a statement about this finite basis at this
/// resolution only.
pub fn uniqueness_probe(
    dom: &GridDomain,
    g: &MetricField,
    basis: &[QuaternionField],
    patch: &SurfacePatch,
) -> Result<ProbeReport> {
    if patch.nodes.len() < PROBE_OVERSAMPLING * basis.len() {
        return Err(Error::Insufficient(format!(
            "{} patch nodes for {} fields",
            patch.nodes.len(),
            basis.len()
        )));
    }
    let mut scales = Vec::with_capacity(basis.len());
    for (i, p) in basis.iter().enumerate() {
        let s = sup_norm(dom, p, g);
        let (r1, r2) = q_residual(dom, p, g)?;
        if s == 0.0 || r1.max(r2) > PROBE_MEMBERSHIP_TOL * s {
            return Err(Error::InvalidArgument(format!(
                "basis field {i} is not harmonic to tolerance ({:.3e})",
                r1.max(r2) / s.max(f64::MIN_POSITIVE)
            )));
        }
        scales.push(s);
    }
    let refs: Vec<&QuaternionField> = basis.iter().collect();
    let full = singular_values(&normalized_columns(&refs, &dom.domain_nodes(), &scales));
    let dependent_basis = basis.is_empty() || full.last().copied().unwrap_or(0.0) <= 1e-10 * full[0];
    let restricted = normalized_columns(&refs, &patch.nodes, &scales);
    let sv = singular_values(&restricted);
    let (sigma_max, sigma_min) = (sv[0], sv[sv.len().min(basis.len()) - 1]);
    let table = basis
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let on_patch = patch.nodes.iter().map(|&n| crate::quaternion::qnorm(&p.at(n), g)).fold(0.0, f64::max);
            CertificateRow {
                field: i,
                sup_on_patch: on_patch,
                sup_on_domain: scales[i],
                ratio: on_patch / scales[i],
            }
        })
        .collect();
    Ok(ProbeReport {
        ratio: if dependent_basis { 0.0 } else { sigma_min / sigma_max },
        sigma_min,
        sigma_max,
        dependent_basis,
        table,
        note: "finite-dimensional certificate for this basis and resolution",
    })
}

/// Axis-aligned rectangle of lattice edges in the plane normal to `axis`,
/// traversed counterclockwise with respect to `+axis`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
pub struct LoopSpec {
    pub axis: usize,
    /// Lattice index of the plane.
    pub level: usize,
    /// Corner lattice indices in the in-plane axes `(axis+1, axis+2)`.
    pub lo: [usize; 2],
    pub hi: [usize; 2],
}

/// `Σ g(u, t) Δs` around the loop, trapezoid rule on each edge.
pub fn circulation(dom: &GridDomain, g: &MetricField, u: &VectorField, lp: &LoopSpec) -> Result<f64> {
    let a = lp.axis;
    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
    if a > 2 || lp.lo[0] >= lp.hi[0] || lp.lo[1] >= lp.hi[1] {
        return Err(Error::InvalidArgument("degenerate loop".into()));
    }
    let node = |i: usize, j: usize| -> Result<usize> {
        let mut ijk = [0; 3];
        ijk[a] = lp.level;
        ijk[b] = i;
        ijk[c] = j;
        if ijk.iter().zip(dom.dims()).any(|(&x, n)| x >= n) {
            return Err(Error::InvalidArgument("loop leaves the lattice".into()));
        }
        let n = dom.index(ijk);
        if !dom.in_domain(n) {
            return Err(Error::BadNode {
                node: n,
                reason: "loop exits the domain".into(),
            });
        }
        Ok(n)
    };
    let mut path = Vec::new();
    for i in lp.lo[0]..lp.hi[0] {
        path.push(node(i, lp.lo[1])?);
    }
    for j in lp.lo[1]..lp.hi[1] {
        path.push(node(lp.hi[0], j)?);
    }
    for i in (lp.lo[0] + 1..=lp.hi[0]).rev() {
        path.push(node(i, lp.hi[1])?);
    }
    for j in (lp.lo[1] + 1..=lp.hi[1]).rev() {
        path.push(node(lp.lo[0], j)?);
    }
    let mut total = 0.0;
    for (k, &p) in path.iter().enumerate() {
        let q = path[(k + 1) % path.len()];
        let (xp, xq) = (dom.position(p), dom.position(q));
        let dx = [0, 1, 2].map(|i| xq[i] - xp[i]);
        total += 0.5 * (g.at(p).quad(u.get(p), dx) + g.at(q).quad(u.get(q), dx));
    }
    Ok(total)
}

/// Probe basis: `{0, ∇w}` for each harmonic `w`, the unit, and on a flat
/// metric the three linear fields `{−2xᵏ, x × eₖ}`.
pub fn probe_basis(dom: &GridDomain, g: &MetricField, harmonics: &[ScalarField]) -> Result<Vec<QuaternionField>> {
    let mut out = harmonics
        .iter()
        .map(|w| Ok(QuaternionField::from_vector(grad_with_boundary(dom, g, w)?)))
        .collect::<Result<Vec<_>>>()?;
    out.push(QuaternionField::unit(dom));
    if g.is_flat() {
        for k in 0..3 {
            let a = ScalarField::from_fn(dom, |x| -2.0 * x[k]);
            let u = VectorField::from_fn(dom, |x| {
                let mut e = [0.0; 3];
                e[k] = 1.0;
                [x[1] * e[2] - x[2] * e[1], x[2] * e[0] - x[0] * e[2], x[0] * e[1] - x[1] * e[0]]
            });
            out.push(QuaternionField::new(a, u)?);
        }
    }
    Ok(out)
}

/// `∇θ` for the polar angle about the line through `center` along `axis`,
/// raised with `g`. Zero on the axis itself.
pub fn angle_field(dom: &GridDomain, g: &MetricField, axis: usize, center: [f64; 2]) -> VectorField {
    let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut u = VectorField::zeros(dom);
    for n in dom.domain_nodes() {
        let x = dom.position(n);
        let (p, q) = (x[b] - center[0], x[c] - center[1]);
        let r2 = p * p + q * q;
        if r2 > 1e-24 {
            let mut dtheta = [0.0; 3];
            dtheta[b] = -q / r2;
            dtheta[c] = p / r2;
            u.set(n, g.inv(n).mul_vec(dtheta));
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MaskSpec, ScalarField};

    #[test]
    fn plain_box_has_no_dirichlet_fields() {
        let d = GridDomain::unit_box(9).unwrap();
        let op = DirichletOperator::assemble(&MetricField::flat(&d), &d).unwrap();
        assert!(dirichlet_basis(&op).unwrap().fields.is_empty());
    }

    #[test]
    fn surface_identity_examples() {
        let d = GridDomain::unit_box(11).unwrap();
        let g = MetricField::flat(&d);
        let patch = SurfacePatch::central(&d, 2).unwrap();
        let v = VectorField::from_fn(&d, |x| [0.0, x[2], -x[1]]);
        assert!(surface_identity_check(&d, &g, &v, &patch).unwrap() < 1e-10);
        let v = VectorField::from_fn(&d, |x| [x[1].sin(), x[0] * x[0] * x[2], x[0]]);
        assert!(surface_identity_check(&d, &g, &v, &patch).unwrap() < 1e-10);
    }

    #[test]
    fn gradient_circulation_vanishes() {
        let d = GridDomain::unit_box(17).unwrap();
        let g = MetricField::flat(&d);
        let a = ScalarField::from_fn(&d, |x| (x[0] * 3.0).sin() + x[1] * x[2]);
        let u = grad_with_boundary(&d, &g, &a).unwrap();
        let lp = LoopSpec {
            axis: 2,
            level: 8,
            lo: [3, 4],
            hi: [12, 13],
        };
        let c = circulation(&d, &g, &u, &lp).unwrap();
        assert!(c.abs() < 1e-2, "{c}");
    }

    #[test]
    fn loop_outside_is_an_error() {
        let d = GridDomain::build(
            [0.0; 3],
            [1.0; 3],
            [17; 3],
            MaskSpec::BoxMinusColumn { lo: [0.4, 0.4], hi: [0.6, 0.6] },
        )
        .unwrap();
        let g = MetricField::flat(&d);
        let u = VectorField::zeros(&d);
        let lp = LoopSpec {
            axis: 2,
            level: 8,
            lo: [4, 4],
            hi: [8, 12],
        };
        assert!(circulation(&d, &g, &u, &lp).is_err());
    }
}
