use serde::{Deserialize, Serialize};

use crate::geometry::GridDomain;
use crate::{Error, Result};

/// Symmetric 3×3 matrix stored as `[m11, m12, m13, m22, m23, m33]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym3(pub [f64; 6]);

impl Sym3 {
    pub const IDENTITY: Sym3 = Sym3([1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);

    pub fn diag(d: [f64; 3]) -> Self {
        Sym3([d[0], 0.0, 0.0, d[1], 0.0, d[2]])
    }

    pub fn from_matrix(m: [[f64; 3]; 3]) -> Self {
        Sym3([
            m[0][0],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            m[1][1],
            0.5 * (m[1][2] + m[2][1]),
            m[2][2],
        ])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        const MAP: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
        self.0[MAP[i][j]]
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[1] * v[0] + m[3] * v[1] + m[4] * v[2],
            m[2] * v[0] + m[4] * v[1] + m[5] * v[2],
        ]
    }

    /// `uᵀ M v`.
    #[inline]
    pub fn quad(&self, u: [f64; 3], v: [f64; 3]) -> f64 {
        let mv = self.mul_vec(v);
        u[0] * mv[0] + u[1] * mv[1] + u[2] * mv[2]
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
    }

    /// Leading principal minors.
    pub fn minors(&self) -> [f64; 3] {
        let [a, b, _, d, _, _] = self.0;
        [a, a * d - b * b, self.det()]
    }

    pub fn is_spd(&self) -> bool {
        self.0.iter().all(|v| v.is_finite()) && self.minors().iter().all(|&m| m > 0.0)
    }

    pub fn inverse(&self) -> Option<Sym3> {
        let [a, b, c, d, e, f] = self.0;
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let r = 1.0 / det;
        Some(Sym3([
            (d * f - e * e) * r,
            (c * e - b * f) * r,
            (b * e - c * d) * r,
            (a * f - c * c) * r,
            (b * c - a * e) * r,
            (a * d - b * b) * r,
        ]))
    }

    pub fn scale(&self, s: f64) -> Sym3 {
        Sym3(self.0.map(|v| v * s))
    }

    pub fn frobenius(&self) -> f64 {
        let m = &self.0;
        (m[0] * m[0] + m[3] * m[3] + m[5] * m[5] + 2.0 * (m[1] * m[1] + m[2] * m[2] + m[4] * m[4]))
            .sqrt()
    }

    /// Frobenius inner product.
    pub fn dot(&self, o: &Sym3) -> f64 {
        let (m, n) = (&self.0, &o.0);
        m[0] * n[0] + m[3] * n[3] + m[5] * n[5] + 2.0 * (m[1] * n[1] + m[2] * n[2] + m[4] * n[4])
    }

    pub fn sub(&self, o: &Sym3) -> Sym3 {
        let mut r = self.0;
        for (a, b) in r.iter_mut().zip(o.0) {
            *a -= b;
        }
        Sym3(r)
    }
}

/// Named metric families used by experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum MetricPreset {
    Flat,
    Diag { diag: [f64; 3] },
    /// `(1 + a sin(πx¹) sin(πx²)) I`.
    ConformalSine {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// `(1 + a·s(x)) diag(1, 1.2, 0.9)` plus small smooth off-diagonal terms.
    GenericSmooth {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn default_amplitude() -> f64 {
    0.3
}

impl MetricPreset {
    pub fn eval(&self, x: [f64; 3]) -> Sym3 {
        use std::f64::consts::PI;
        match self {
            MetricPreset::Flat => Sym3::IDENTITY,
            MetricPreset::Diag { diag } => Sym3::diag(*diag),
            MetricPreset::ConformalSine { amplitude } => {
                let c = 1.0 + amplitude * (PI * x[0]).sin() * (PI * x[1]).sin();
                Sym3::IDENTITY.scale(c)
            }
            MetricPreset::GenericSmooth { amplitude } => {
                let s = (PI * x[0]).sin() * (PI * x[1]).cos() * (0.5 * PI * x[2]).cos();
                let c = 1.0 + amplitude * s;
                let off = 0.05 * (PI * (x[0] + x[2])).sin();
                let off2 = 0.04 * (PI * x[1]).cos();
                Sym3([c, off, 0.5 * off2, 1.2 * c, off2, 0.9 * c])
            }
        }
    }
}

/// Metric tensor sampled at every lattice node, with derived inverse and `√det g`.
#[derive(Debug, Clone)]
pub struct MetricField {
    dims: [usize; 3],
    g: Vec<Sym3>,
    ginv: Vec<Sym3>,
    sqrt_det: Vec<f64>,
}

impl MetricField {
    pub fn flat(dom: &GridDomain) -> Self {
        Self::constant(dom, Sym3::IDENTITY).expect("identity is SPD")
    }

    pub fn constant(dom: &GridDomain, g: Sym3) -> Result<Self> {
        Self::from_fn(dom, |_| g)
    }

    pub fn from_preset(dom: &GridDomain, preset: &MetricPreset) -> Result<Self> {
        Self::from_fn(dom, |x| preset.eval(x))
    }

    /// Samples `g` at every node position.
    pub fn from_fn(dom: &GridDomain, f: impl Fn([f64; 3]) -> Sym3) -> Result<Self> {
        let g = (0..dom.len()).map(|i| f(dom.position(i))).collect();
        Self::from_values(dom.dims(), g)
    }

    pub fn from_values(dims: [usize; 3], g: Vec<Sym3>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if g.len() != n {
            return Err(Error::InvalidArgument(format!(
                "metric has {} nodes, expected {n}",
                g.len()
            )));
        }
        let mut ginv = Vec::with_capacity(n);
        let mut sqrt_det = Vec::with_capacity(n);
        for (node, m) in g.iter().enumerate() {
            if !m.is_spd() {
                return Err(Error::NonSpdMetric { node });
            }
            let inv = m.inverse().ok_or(Error::NonSpdMetric { node })?;
            let defect = inverse_defect(m, &inv);
            if defect > 1e-12 {
                return Err(Error::MetricInverse { node, defect });
            }
            ginv.push(inv);
            sqrt_det.push(m.det().sqrt());
        }
        Ok(MetricField {
            dims,
            g,
            ginv,
            sqrt_det,
        })
    }

    /// Pointwise conformal rescaling `c(x) g`.
    pub fn conformal(&self, c: &[f64]) -> Result<Self> {
        let g = self.g.iter().zip(c).map(|(m, &s)| m.scale(s)).collect();
        Self::from_values(self.dims, g)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    #[inline]
    pub fn at(&self, node: usize) -> &Sym3 {
        &self.g[node]
    }
    #[inline]
    pub fn inv(&self, node: usize) -> &Sym3 {
        &self.ginv[node]
    }
    #[inline]
    pub fn sqrt_det(&self, node: usize) -> f64 {
        self.sqrt_det[node]
    }
    pub fn values(&self) -> &[Sym3] {
        &self.g
    }

    pub fn is_flat(&self) -> bool {
        self.g.iter().all(|m| *m == Sym3::IDENTITY)
    }

    /// Whether every node carries a diagonal metric.
    pub fn is_diagonal(&self) -> bool {
        self.g.iter().all(|m| m.0[1] == 0.0 && m.0[2] == 0.0 && m.0[4] == 0.0)
    }
}

/// Relative max-entry defect of `g · g⁻¹ − I`.
pub fn inverse_defect(g: &Sym3, inv: &Sym3) -> f64 {
    let (a, b) = (g.to_matrix(), inv.to_matrix());
    let scale = g.0.iter().fold(0.0f64, |m, v| m.max(v.abs())) * inv.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let s: f64 = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            let e = if i == j { s - 1.0 } else { s };
            worst = worst.max(e.abs());
        }
    }
    worst / scale.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_spd_with_tight_inverse() {
        let d = GridDomain::unit_box(9).unwrap();
        for p in [
            MetricPreset::Flat,
            MetricPreset::Diag { diag: [4.0, 1.0, 1.0] },
            MetricPreset::ConformalSine { amplitude: 0.3 },
            MetricPreset::GenericSmooth { amplitude: 0.3 },
        ] {
            let g = MetricField::from_preset(&d, &p).unwrap();
            for i in 0..d.len() {
                assert!(inverse_defect(g.at(i), g.inv(i)) < 1e-12);
                assert!(g.at(i).minors().iter().all(|&m| m > 0.0));
            }
        }
    }

    #[test]
    fn non_spd_reports_node() {
        let d = GridDomain::unit_box(5).unwrap();
        let err = MetricField::from_fn(&d, |x| {
            if x[0] > 0.9 && x[1] > 0.9 && x[2] > 0.9 {
                Sym3::diag([1.0, -1.0, 1.0])
            } else {
                Sym3::IDENTITY
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonSpdMetric { node } if node == d.len() - 1));
    }
}
