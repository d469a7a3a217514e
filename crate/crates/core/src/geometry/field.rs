use crate::geometry::GridDomain;
use crate::{Error, Result};

/// Real value per lattice node. Exterior nodes carry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dims: [usize; 3],
    data: Vec<f64>,
}

/// Three coordinate components `(u¹, u², u³)` per lattice node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dims: [usize; 3],
    data: Vec<[f64; 3]>,
}

impl ScalarField {
    pub fn zeros(dom: &GridDomain) -> Self {
        ScalarField {
            dims: dom.dims(),
            data: vec![0.0; dom.len()],
        }
    }

    pub fn constant(dom: &GridDomain, c: f64) -> Self {
        Self::from_fn(dom, |_| c)
    }

    /// Samples `f` on interior and boundary nodes.
    pub fn from_fn(dom: &GridDomain, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..dom.len())
            .map(|i| if dom.in_domain(i) { f(dom.position(i)) } else { 0.0 })
            .collect();
        ScalarField {
            dims: dom.dims(),
            data,
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidArgument("scalar data length mismatch".into()));
        }
        Ok(ScalarField { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn values(&self) -> &[f64] {
        &self.data
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    #[inline]
    pub fn get(&self, node: usize) -> f64 {
        self.data[node]
    }
    #[inline]
    pub fn set(&mut self, node: usize, v: f64) {
        self.data[node] = v;
    }

    pub fn check(&self, dom: &GridDomain) -> Result<()> {
        check_dims(dom.dims(), self.dims)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().fold(0.0, |m, &i| m.max(self.data[i].abs()))
    }
}

impl VectorField {
    pub fn zeros(dom: &GridDomain) -> Self {
        VectorField {
            dims: dom.dims(),
            data: vec![[0.0; 3]; dom.len()],
        }
    }

    pub fn constant(dom: &GridDomain, v: [f64; 3]) -> Self {
        Self::from_fn(dom, |_| v)
    }

    pub fn from_fn(dom: &GridDomain, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let data = (0..dom.len())
            .map(|i| if dom.in_domain(i) { f(dom.position(i)) } else { [0.0; 3] })
            .collect();
        VectorField {
            dims: dom.dims(),
            data,
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidArgument("vector data length mismatch".into()));
        }
        Ok(VectorField { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn values(&self) -> &[[f64; 3]] {
        &self.data
    }
    pub fn values_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.data
    }
    #[inline]
    pub fn get(&self, node: usize) -> [f64; 3] {
        self.data[node]
    }
    #[inline]
    pub fn set(&mut self, node: usize, v: [f64; 3]) {
        self.data[node] = v;
    }

    pub fn check(&self, dom: &GridDomain) -> Result<()> {
        check_dims(dom.dims(), self.dims)
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            dims: self.dims,
            data: self.data.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn add(&self, o: &VectorField) -> VectorField {
        let data = self
            .data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
            .collect();
        VectorField {
            dims: self.dims,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> VectorField {
        VectorField {
            dims: self.dims,
            data: self.data.iter().map(|v| v.map(|c| c * s)).collect(),
        }
    }
}

pub(crate) fn check_dims(expected: [usize; 3], found: [usize; 3]) -> Result<()> {
    if expected != found {
        return Err(Error::DomainMismatch { expected, found });
    }
    Ok(())
}

/// Seeded sum of plane waves `Σ a sin(k·x + φ)`; a smooth test function.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothRandom {
    terms: Vec<(f64, [f64; 3], f64)>,
}

impl SmoothRandom {
    /// `n_terms` waves with `|kᵢ| ≤ 3`, amplitudes in `[−1, 1]`.
    pub fn new(seed: u64, n_terms: usize) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..n_terms)
            .map(|_| {
                let a = rng.gen_range(-1.0..=1.0);
                let k = [(); 3].map(|_| rng.gen_range(-3.0..=3.0));
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                (a, k, phi)
            })
            .collect();
        SmoothRandom { terms }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(a, k, p)| a * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + p).sin())
            .sum()
    }

    pub fn sample(&self, dom: &GridDomain) -> ScalarField {
        ScalarField::from_fn(dom, |x| self.eval(x))
    }

    /// Vector field whose components come from three derived seeds.
    pub fn vector(seed: u64, n_terms: usize, dom: &GridDomain) -> VectorField {
        let f = [0u64, 1, 2].map(|c| SmoothRandom::new(seed.wrapping_mul(3).wrapping_add(c + 1), n_terms));
        VectorField::from_fn(dom, |x| [f[0].eval(x), f[1].eval(x), f[2].eval(x)])
    }
}
