use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type CMatrix = DMatrix<Complex64>;
pub(crate) type CVector = DVector<Complex64>;

/// Cholesky factor of a Hermitian positive-definite matrix.
pub(crate) struct HermitianFactor {
    chol: Cholesky<Complex64, Dyn>,
}

impl HermitianFactor {
    pub(crate) fn new(r: &CMatrix) -> Result<Self> {
        if r.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical("covariance has non-finite entries"));
        }
        r.clone()
            .cholesky()
            .map(|chol| Self { chol })
            .ok_or_else(|| Error::numerical("covariance is not positive definite"))
    }

    /// Inverse, made exactly Hermitian.
    pub(crate) fn inverse(&self) -> CMatrix {
        hermitian_part(&self.chol.inverse())
    }

    pub(crate) fn solve(&self, b: &CVector) -> CVector {
        self.chol.solve(b)
    }

    /// `L^{-1} B` for the lower factor `R = L L^H`.
    pub(crate) fn solve_lower(&self, b: &CMatrix) -> CMatrix {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `L^{-1}`, by forward substitution that skips the known zeros above
    /// the diagonal.
    pub(crate) fn lower_inverse(&self) -> CMatrix {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let mut inv = CMatrix::zeros(n, n);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            rhs[j..].fill(Complex64::new(0.0, 0.0));
            rhs[j] = Complex64::new(1.0, 0.0);
            for k in j..n {
                let x = rhs[k] / l[(k, k)];
                inv[(k, j)] = x;
                let col = &l.as_slice()[k * n + k + 1..(k + 1) * n];
                for (r, &lv) in rhs[k + 1..].iter_mut().zip(col) {
                    *r -= x * lv;
                }
            }
        }
        inv
    }

    pub(crate) fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.re.ln())
            .sum::<f64>()
    }
}

fn split(m: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|v| v.re), m.map(|v| v.im))
}

fn join(re: DMatrix<f64>, im: &DMatrix<f64>) -> CMatrix {
    re.zip_map(im, Complex64::new)
}

// nalgebra's complex product is scalar code; four real products go through
// the blocked f64 kernel and are several times faster for large blocks.

/// `A B`.
pub(crate) fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let ((ar, ai), (br, bi)) = (split(a), split(b));
    join(&ar * &br - &ai * &bi, &(&ar * &bi + &ai * &br))
}

/// `A^H B`.
pub(crate) fn adjoint_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    // `tr_mul` bypasses the blocked kernel; transpose explicitly instead.
    let ((ar, ai), (br, bi)) = (split(a), split(b));
    let (art, ait) = (ar.transpose(), ai.transpose());
    join(&art * &br + &ait * &bi, &(&art * &bi - &ait * &br))
}

/// `A B^H`.
pub(crate) fn mul_adjoint(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let ((ar, ai), (br, bi)) = (split(a), split(b));
    let (brt, bit) = (br.transpose(), bi.transpose());
    join(&ar * &brt + &ai * &bit, &(&ai * &brt - &ar * &bit))
}

pub(crate) fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::from(0.5)
}

pub(crate) fn real_trace(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|v| v.re).sum()
}

pub(crate) fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| complex_normal(&mut rng, 1.0))
    }

    #[test]
    fn products_match_complex_kernel() {
        let (a, b, c) = (random(7, 5, 1), random(5, 6, 2), random(7, 6, 3));
        let err = |x: CMatrix, y: CMatrix| (&x - &y).norm() / y.norm();
        assert!(err(mul(&a, &b), &a * &b) < 1e-14);
        assert!(err(adjoint_mul(&a, &c), a.adjoint() * &c) < 1e-14);
        assert!(err(mul_adjoint(&a, &b.adjoint()), &a * &b) < 1e-14);
    }

    #[test]
    fn lower_inverse_inverts_factor() {
        let a = random(9, 9, 4);
        let r = &a * a.adjoint() + CMatrix::identity(9, 9);
        let f = HermitianFactor::new(&r).unwrap();
        let l = f.chol.l();
        let prod = &l * f.lower_inverse();
        assert!((prod - CMatrix::identity(9, 9)).norm() < 1e-12);
        assert!((f.lower_inverse().adjoint() * f.lower_inverse() - f.inverse()).norm() < 1e-12);
    }
}
