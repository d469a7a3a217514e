//! Small dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Singular value decomposition with singular values sorted descending and a
/// full set of right singular vectors (rows of `vt`), even for wide input.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub vt: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    // Pad wide matrices with zero rows so that V is square.
    let padded;
    let src = if m < n {
        padded = a.clone().resize_vertically(n, 0.0);
        &padded
    } else {
        a
    };
    let s = src.clone().svd(true, true);
    let (u, vt) = (s.u.expect("u requested"), s.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..s.singular_values.len()).collect();
    order.sort_by(|&i, &j| s.singular_values[j].total_cmp(&s.singular_values[i]));
    let sigma = order.iter().map(|&i| s.singular_values[i]).collect();
    let u = DMatrix::from_fn(m, order.len(), |r, c| u[(r, order[c])]);
    let vt = DMatrix::from_fn(order.len(), n, |r, c| vt[(order[r], c)]);
    Svd { u, sigma, vt }
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: count of singular values above `rel · σ₁`.
pub fn numerical_rank(sigma: &[f64], rel: f64) -> usize {
    let top = sigma.first().copied().unwrap_or(0.0);
    sigma.iter().filter(|&&s| s > rel * top).count()
}

/// Minimum-norm least squares via truncated SVD; singular values below
/// `cut · σ₁` are discarded. Returns the solution and the retained rank.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, cut: f64) -> (DVector<f64>, usize) {
    let n = a.ncols();
    let Svd { u, sigma, vt } = svd(a);
    let top = sigma.first().copied().unwrap_or(0.0);
    let mut x = DVector::zeros(n);
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        if s <= cut * top || s == 0.0 {
            continue;
        }
        if k >= u.ncols() {
            break;
        }
        rank += 1;
        let coef = u.column(k).dot(b) / s;
        x += vt.row(k).transpose() * coef;
    }
    (x, rank)
}

/// Least squares for a tall, full column rank matrix via Householder QR;
/// solves all columns of `b` at once.
pub fn qr_lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    qr.r().solve_upper_triangular(&qtb)
}

/// Reusable QR least-squares solver for a fixed design matrix.
pub struct QrSolver {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl QrSolver {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let qr = a.clone().qr();
        QrSolver { q: qr.q(), r: qr.r() }
    }

    /// Smallest over largest absolute diagonal entry of `R` (a cheap rank proxy).
    pub fn diag_ratio(&self) -> f64 {
        let d: Vec<f64> = self.r.diagonal().iter().map(|v| v.abs()).collect();
        let mx = d.iter().copied().fold(0.0, f64::max);
        let mn = d.iter().copied().fold(f64::INFINITY, f64::min);
        if mx == 0.0 {
            0.0
        } else {
            mn / mx
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        let qtb = self.q.transpose() * b;
        self.r.solve_upper_triangular(&qtb)
    }
}

/// 2-norm condition number of a 3×3 matrix (∞ if singular).
pub fn cond3(m: [[f64; 3]; 3]) -> f64 {
    let s = nalgebra::Matrix3::from_fn(|i, j| m[i][j]).singular_values();
    let (hi, lo) = (s.max(), s.min());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves a 3×3 system by LU with partial pivoting.
pub fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let a = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let x = a.lu().solve(&nalgebra::Vector3::from(b))?;
    Some([x[0], x[1], x[2]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_svd_has_full_right_basis() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.0, 1.0, 1.0]);
        let s = svd(&a);
        assert_eq!(s.vt.shape(), (3, 3));
        assert!(s.sigma[2].abs() < 1e-12);
        let null = s.vt.row(2).transpose();
        assert!((&a * null).norm() < 1e-12);
    }

    #[test]
    fn min_norm_solution_of_rank_deficient_system() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let (x, rank) = min_norm_lstsq(&a, &b, 1e-8);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qr_matches_normal_equations() {
        let a = DMatrix::from_fn(6, 3, |i, j| ((i * i + 2 * j * j + i * j) as f64 * 0.37).cos());
        let b = DMatrix::from_fn(6, 1, |i, _| i as f64);
        let x = qr_lstsq(&a, &b).unwrap();
        let ne = (a.transpose() * &a).lu().solve(&(a.transpose() * &b)).unwrap();
        assert!((x - ne).norm() < 1e-10);
    }
}
