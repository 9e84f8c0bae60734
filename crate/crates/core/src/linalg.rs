//! Thin helpers over `nalgebra` for complex vectors and matrices.

use nalgebra::{DMatrix, DVector, Dim, Matrix, RawStorage};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Unconjugated bilinear product `a^T b`.
pub fn dot_t(a: &CVec, b: &CVec) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn frobenius<R: Dim, C: Dim, S: RawStorage<Complex64, R, C>>(m: &Matrix<Complex64, R, C, S>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

/// Hermitian square-root factor `F` with `F F^H = m`, eigenvalues clipped at zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vectors.adjoint()
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn hpd_inverse(m: &CMat) -> Result<CMat> {
    let (values, vectors) = hermitian_eigen(m);
    if !values.first().is_some_and(|&v| v > 0.0) {
        return Err(Error::Singular("Hermitian matrix is not positive definite".into()));
    }
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(lambda);
    }
    Ok(&scaled * vectors.adjoint())
}

/// Solve `a x = b` with partial-pivot LU.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())))
}

/// Draw `CN(0, I_n)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    })
}

/// `|cos|` of the angle between two complex vectors, in `[0, 1]`.
pub fn collinearity(a: &CVec, b: &CVec) -> f64 {
    let inner: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    inner.norm() / (norm_sqr(a).sqrt() * norm_sqr(b).sqrt())
}

/// Real-valued dense solve used by the power-control solvers.
pub fn solve_real(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    a.lu().solve(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for _ in 0..rank {
            let v = complex_normal(rng, n);
            m += &v * v.adjoint();
        }
        m
    }

    #[test]
    fn sqrt_factor_reproduces_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rank in 1..=4 {
            let m = random_hermitian_psd(&mut rng, 4, rank);
            let f = psd_sqrt(&m);
            let back = &f * f.adjoint();
            assert!(frobenius(&(back - &m)) < 1e-10 * frobenius(&m));
        }
    }

    #[test]
    fn eigenvalues_sorted_and_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_hermitian_psd(&mut rng, 5, 5);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMat::from_diagonal(&CVec::from_iterator(5, vals.iter().map(|&x| c(x, 0.0))));
        let back = &vecs * d * vecs.adjoint();
        assert!(frobenius(&(back - &m)) < 1e-10 * frobenius(&m));
    }

    #[test]
    fn hpd_inverse_rejects_indefinite() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(hpd_inverse(&m).is_err());
    }
}
