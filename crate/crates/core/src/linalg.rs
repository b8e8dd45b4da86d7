//! Small dense complex linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// `max|m - m^*|`.
pub fn hermitian_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMat,
}

/// Diagonalizes the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    let dim = m.nrows();
    if dim == 0 {
        return HermitianEigen { values: Vec::new(), vectors: CMat::zeros(0, 0) };
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(dim, dim, |r, k| eig.eigenvectors[(r, order[k])]);
    HermitianEigen { values, vectors }
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |a: f64, &s| a.max(s))
}

/// Complex Schur form `m = Q T Q^*` with `T` upper triangular.
pub fn schur(m: &CMat) -> Option<(CMat, CMat)> {
    let dim = m.nrows();
    if dim == 0 {
        return Some((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return None;
    }
    nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000 * dim).map(|s| s.unpack())
}

/// All eigenvalues of a square matrix (counted with algebraic multiplicity).
pub fn eigenvalues(m: &CMat) -> Option<Vec<C64>> {
    schur(m).map(|(_, t)| t.diagonal().iter().copied().collect())
}

/// Eigen-decomposition of a general square matrix with bi-orthogonal
/// left and right eigenvectors: `left[:, i]^* right[:, j] = δ_ij`.
#[derive(Debug, Clone)]
pub struct GeneralEigen {
    pub values: Vec<C64>,
    pub right: CMat,
    pub left: CMat,
}

impl GeneralEigen {
    /// Spectral projector `r_i l_i^*` onto the i-th eigenvector.
    pub fn projector(&self, i: usize) -> CMat {
        self.right.column(i) * self.left.column(i).adjoint()
    }

    /// `l_i^* m r_j`.
    pub fn matrix_element(&self, i: usize, m: &CMat, j: usize) -> C64 {
        (self.left.column(i).adjoint() * m * self.right.column(j))[(0, 0)]
    }
}

/// Diagonalizes `m`; `None` if the Schur iteration fails or the eigenvector
/// matrix is numerically singular (defective matrix).
pub fn general_eigen(m: &CMat) -> Option<GeneralEigen> {
    let dim = m.nrows();
    let (q, t) = schur(m)?;
    let scale = max_abs(&t).max(f64::MIN_POSITIVE);
    let mut v = CMat::zeros(dim, dim);
    for k in 0..dim {
        let lam = t[(k, k)];
        v[(k, k)] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for l in j + 1..=k {
                acc += t[(j, l)] * v[(l, k)];
            }
            let mut denom = t[(j, j)] - lam;
            if denom.norm() < 1e-14 * scale {
                denom = C64::new(1e-14 * scale, 0.0);
            }
            v[(j, k)] = -acc / denom;
        }
    }
    let mut right = q * v;
    for k in 0..dim {
        let norm = right.column(k).norm();
        if norm > 0.0 {
            right.column_mut(k).unscale_mut(norm);
        }
    }
    let inv = right.clone().try_inverse()?;
    if !inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return None;
    }
    let left = inv.adjoint();
    let values = t.diagonal().iter().copied().collect();
    Some(GeneralEigen { values, right, left })
}

/// Orthonormal basis of the real space of Hermitian `dim x dim` matrices
/// with respect to `tr(A B)`.
pub fn hermitian_basis(dim: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(dim * dim);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..dim {
        let mut e = CMat::zeros(dim, dim);
        e[(k, k)] = ONE;
        basis.push(e);
    }
    for k in 0..dim {
        for l in k + 1..dim {
            let mut e = CMat::zeros(dim, dim);
            e[(k, l)] = c(s, 0.0);
            e[(l, k)] = c(s, 0.0);
            basis.push(e);
            let mut e = CMat::zeros(dim, dim);
            e[(k, l)] = c(0.0, -s);
            e[(l, k)] = c(0.0, s);
            basis.push(e);
        }
    }
    basis
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_complex_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVec {
    random_complex_matrix(rng, dim, 1).column(0).into_owned()
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    hermitian_part(&random_complex_matrix(rng, dim, dim))
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    let qr = random_complex_matrix(rng, dim, dim).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = u.column_mut(k);
        col *= phase;
    }
    u
}

/// `Σ_k f(μ_k) v_k v_k^*` for a Hermitian decomposition.
pub fn spectral_function(eig: &HermitianEigen, f: impl Fn(f64) -> f64) -> CMat {
    let dim = eig.values.len();
    let mut out = CMat::zeros(dim, dim);
    for (k, &mu) in eig.values.iter().enumerate() {
        let w = f(mu);
        if w != 0.0 {
            let v = eig.vectors.column(k);
            out += (v * v.adjoint()).scale(w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn general_eigen_is_biorthogonal_and_diagonalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 1..7 {
            let m = random_complex_matrix(&mut rng, dim, dim);
            let eig = general_eigen(&m).unwrap();
            let ident = eig.left.adjoint() * &eig.right;
            assert!(max_abs(&(ident - CMat::identity(dim, dim))) < 1e-10);
            for k in 0..dim {
                let r = eig.right.column(k);
                let resid = &m * r - r * eig.values[k];
                assert!(resid.norm() < 1e-10 * (1.0 + eig.values[k].norm()));
            }
        }
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        let basis = hermitian_basis(3);
        assert_eq!(basis.len(), 9);
        for (a, x) in basis.iter().enumerate() {
            assert!(hermitian_residual(x) == 0.0);
            for (b, y) in basis.iter().enumerate() {
                let ip = trace(&(x * y));
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - c(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(&mut rng, 5);
        assert!(max_abs(&(u.adjoint() * &u - CMat::identity(5, 5))) < 1e-12);
    }

    #[test]
    fn hermitian_eigen_sorts_ascending() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]));
        let eig = hermitian_eigen(&m);
        assert_eq!(eig.values, vec![-1.0, 2.0, 3.0]);
    }
}
