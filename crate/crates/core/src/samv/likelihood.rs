use super::covariance::{assemble_covariance, check_snapshots};
use super::EffectiveDictionary;
use crate::error::Result;
use crate::linalg::{CVector, HermitianFactor};

/// Gaussian negative log-likelihood `T log det R + Σ_t y_t^H R^{-1} y_t`
/// of the covariance model `R(γ, σ)`.
pub fn negative_log_likelihood(
    gamma: &[f64],
    sigma: f64,
    dict: &EffectiveDictionary,
    snapshots: &[CVector],
) -> Result<f64> {
    check_snapshots(snapshots, dict.dim())?;
    let r = assemble_covariance(dict, gamma, sigma)?;
    let factor = HermitianFactor::new(&r)?;
    let quad: f64 = snapshots.iter().map(|y| y.dotc(&factor.solve(y)).re).sum();
    Ok(snapshots.len() as f64 * factor.log_det() + quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    #[test]
    fn scalar_value() {
        let d = EffectiveDictionary::from_atoms(DMatrix::from_element(1, 1, Complex64::from(1.0)))
            .unwrap();
        let y = [CVector::from_element(1, Complex64::from(2.0))];
        let nll = negative_log_likelihood(&[1.0], 1.0, &d, &y).unwrap();
        assert!((nll - (2f64.ln() + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn diagonal_closed_form_and_doubling() {
        let dim = 5;
        let d = EffectiveDictionary::from_atoms(DMatrix::from_fn(dim, 3, |i, j| {
            Complex64::from_polar(1.0, (i + 2 * j) as f64)
        }))
        .unwrap();
        let ys: Vec<CVector> = (0..3)
            .map(|t| CVector::from_fn(dim, |i, _| Complex64::new(t as f64, i as f64 * 0.5)))
            .collect();
        let sigma = 1e3;
        let energy: f64 = ys.iter().map(|y| y.norm_squared()).sum();
        let nll = negative_log_likelihood(&[0.0; 3], sigma, &d, &ys).unwrap();
        let closed = 3.0 * dim as f64 * sigma.ln() + energy / sigma;
        assert!((nll - closed).abs() < 1e-9 * closed.abs());

        let zeros = vec![CVector::zeros(dim); 3];
        let a = negative_log_likelihood(&[0.0; 3], 0.7, &d, &zeros).unwrap();
        let b = negative_log_likelihood(&[0.0; 3], 1.4, &d, &zeros).unwrap();
        assert!((b - a - 3.0 * dim as f64 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn singular_model_is_numerical_error() {
        let d = EffectiveDictionary::from_atoms(DMatrix::from_element(2, 1, Complex64::from(1.0)))
            .unwrap();
        let ys = [CVector::zeros(2)];
        assert!(negative_log_likelihood(&[1.0], 0.0, &d, &ys)
            .unwrap_err()
            .is_numerical());
    }
}
