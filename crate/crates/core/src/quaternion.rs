//! Geometric quaternions `{α, u}` over a tangent space and their fields.
//!
//! The product is
//!
//! ```text
//! {α, u}{β, v} = {αβ − g(u, v), αv + βu + u ∧ v}
//! ```
//!
//! and `|p| = √(α² + g(u, u))`. In a `g`-orthonormal right-handed frame this
//! is the Hamilton product with `e₁e₂ = e₃`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::field::check_dims;
use crate::geometry::io::{read_raw, write_raw};
use crate::geometry::ops::{cross_at, grad_at, rot_at, div_at};
use crate::geometry::{GridDomain, MetricField, ScalarField, VectorField};
use crate::{Error, Result};

/// A geometric quaternion attached to a lattice node (for metric lookup).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub scalar: f64,
    pub vector: [f64; 3],
    pub node: usize,
}

impl Quaternion {
    pub fn new(scalar: f64, vector: [f64; 3], node: usize) -> Self {
        Quaternion { scalar, vector, node }
    }
    pub fn unit(node: usize) -> Self {
        Self::new(1.0, [0.0; 3], node)
    }
}

pub fn qmul(p: &Quaternion, q: &Quaternion, g: &MetricField) -> Result<Quaternion> {
    if p.node != q.node {
        return Err(Error::NodeMismatch(p.node, q.node));
    }
    Ok(qmul_at(g, p.node, p.scalar, p.vector, q.scalar, q.vector))
}

#[inline]
fn qmul_at(g: &MetricField, node: usize, a: f64, u: [f64; 3], b: f64, v: [f64; 3]) -> Quaternion {
    let w = cross_at(g.inv(node), g.sqrt_det(node), u, v);
    Quaternion {
        scalar: a * b - g.at(node).quad(u, v),
        vector: [0, 1, 2].map(|k| a * v[k] + b * u[k] + w[k]),
        node,
    }
}

pub fn qnorm(p: &Quaternion, g: &MetricField) -> f64 {
    (p.scalar * p.scalar + g.at(p.node).quad(p.vector, p.vector)).sqrt()
}

/// Coefficients `(α, a, b, c)` of `p` in the standard quaternion basis
/// `1, i, j, k` induced by a `g`-orthonormal frame.
pub fn to_standard(p: &Quaternion, frame: &[[f64; 3]; 3], g: &MetricField) -> Result<[f64; 4]> {
    let m = g.at(p.node);
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m.quad(frame[i], frame[j]) - target).abs());
        }
    }
    if worst > 1e-10 {
        return Err(Error::NonOrthonormalFrame(worst));
    }
    let c = [0, 1, 2].map(|k| m.quad(p.vector, frame[k]));
    Ok([p.scalar, c[0], c[1], c[2]])
}

/// Hamilton product of standard quaternions `(w, x, y, z)`.
pub fn hamilton(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    let [a1, b1, c1, d1] = p;
    let [a2, b2, c2, d2] = q;
    [
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ]
}

/// A scalar field and a vector field on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuaternionField {
    pub scalar: ScalarField,
    pub vector: VectorField,
}

impl QuaternionField {
    pub fn new(scalar: ScalarField, vector: VectorField) -> Result<Self> {
        check_dims(scalar.dims(), vector.dims())?;
        Ok(QuaternionField { scalar, vector })
    }

    pub fn zeros(dom: &GridDomain) -> Self {
        QuaternionField {
            scalar: ScalarField::zeros(dom),
            vector: VectorField::zeros(dom),
        }
    }

    pub fn unit(dom: &GridDomain) -> Self {
        scalar_embed(&ScalarField::constant(dom, 1.0))
    }

    /// `{0, u}`.
    pub fn from_vector(u: VectorField) -> Self {
        let scalar = ScalarField::from_vec(u.dims(), vec![0.0; u.values().len()]).expect("same length");
        QuaternionField { scalar, vector: u }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.scalar.dims()
    }

    pub fn at(&self, node: usize) -> Quaternion {
        Quaternion::new(self.scalar.get(node), self.vector.get(node), node)
    }

    pub fn set(&mut self, q: &Quaternion) {
        self.scalar.set(q.node, q.scalar);
        self.vector.set(q.node, q.vector);
    }

    /// Componentwise uniform `[−1, 1]` values on domain nodes.
    pub fn random(dom: &GridDomain, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(dom);
        for n in dom.domain_nodes() {
            let a = rng.gen_range(-1.0..=1.0);
            let v = [(); 3].map(|_| rng.gen_range(-1.0..=1.0));
            p.set(&Quaternion::new(a, v, n));
        }
        p
    }

    pub fn scale(&self, s: f64) -> Self {
        QuaternionField {
            scalar: self.scalar.map(|v| v * s),
            vector: self.vector.scale(s),
        }
    }

    pub fn add(&self, o: &QuaternionField) -> Self {
        let s: Vec<f64> = self.scalar.values().iter().zip(o.scalar.values()).map(|(a, b)| a + b).collect();
        QuaternionField {
            scalar: ScalarField::from_vec(self.dims(), s).expect("same length"),
            vector: self.vector.add(&o.vector),
        }
    }

    /// Writes a 4-component field file (scalar part first).
    pub fn write(&self, path: &Path, dom: &GridDomain) -> Result<()> {
        self.scalar.check(dom)?;
        let mut data = Vec::with_capacity(4 * dom.len());
        for n in 0..dom.len() {
            data.push(self.scalar.get(n));
            data.extend_from_slice(&self.vector.get(n));
        }
        write_raw(path, dom, 4, &data)
    }

    pub fn read(path: &Path, dom: &GridDomain) -> Result<Self> {
        let (h, data) = read_raw(path)?;
        check_dims(dom.dims(), h.dims)?;
        if h.components != 4 {
            return Err(Error::InvalidArgument(format!(
                "quaternion file has {} components",
                h.components
            )));
        }
        let s = data.chunks_exact(4).map(|c| c[0]).collect();
        let v = data.chunks_exact(4).map(|c| [c[1], c[2], c[3]]).collect();
        QuaternionField::new(ScalarField::from_vec(h.dims, s)?, VectorField::from_vec(h.dims, v)?)
    }
}

/// `{α, 0}`.
pub fn scalar_embed(a: &ScalarField) -> QuaternionField {
    let v = VectorField::from_vec(a.dims(), vec![[0.0; 3]; a.values().len()]).expect("same length");
    QuaternionField {
        scalar: a.clone(),
        vector: v,
    }
}

/// Pointwise product on every lattice node.
pub fn field_mul(p: &QuaternionField, q: &QuaternionField, g: &MetricField) -> Result<QuaternionField> {
    check_dims(g.dims(), p.dims())?;
    check_dims(g.dims(), q.dims())?;
    let mut out = p.clone();
    for n in 0..p.scalar.values().len() {
        let r = qmul_at(g, n, p.scalar.get(n), p.vector.get(n), q.scalar.get(n), q.vector.get(n));
        out.set(&r);
    }
    Ok(out)
}

/// `sup |p(x)|` over interior and boundary nodes.
pub fn sup_norm(dom: &GridDomain, p: &QuaternionField, g: &MetricField) -> f64 {
    dom.domain_nodes()
        .into_iter()
        .map(|n| qnorm(&p.at(n), g))
        .fold(0.0, f64::max)
}

/// `(‖∇α − rot u‖_∞, ‖div u‖_∞)` over nodes two layers from the boundary,
/// with vector norms measured in `g`.
pub fn q_residual(dom: &GridDomain, p: &QuaternionField, g: &MetricField) -> Result<(f64, f64)> {
    check_dims(dom.dims(), p.dims())?;
    check_dims(dom.dims(), g.dims())?;
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    for n in dom.nodes_with_depth(2) {
        let ga = grad_at(dom, g, &p.scalar, n)?;
        let ru = rot_at(dom, g, &p.vector, n)?;
        let d = [ga[0] - ru[0], ga[1] - ru[1], ga[2] - ru[2]];
        r1 = r1.max(g.at(n).quad(d, d).sqrt());
        r2 = r2.max(div_at(dom, g, &p.vector, n)?.abs());
    }
    Ok((r1, r2))
}
