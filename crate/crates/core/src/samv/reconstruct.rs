use num_complex::Complex64;

use super::covariance::{assemble_covariance, check_snapshots};
use super::{EffectiveDictionary, SpectrumEstimate};
use crate::array::SteeringDictionary;
use crate::error::{Error, Result};
use crate::linalg::{CVector, HermitianFactor};
use crate::pilot::mean_snapshot;

/// Conditional-mean channel `ĥ = A Γ B^H R^{-1} ȳ` under the fitted model
/// `R = B Γ B^H + σ I`, with `A` the full port-domain dictionary.
pub fn reconstruct_channel(
    estimate: &SpectrumEstimate,
    dict: &EffectiveDictionary,
    full_dictionary: &SteeringDictionary,
    snapshots: &[CVector],
) -> Result<CVector> {
    check_snapshots(snapshots, dict.dim())?;
    let a = full_dictionary.atoms();
    if a.ncols() != dict.grid_size() || estimate.gamma.len() != dict.grid_size() {
        return Err(Error::Contract(format!(
            "grid sizes differ: full {}, effective {}, estimate {}",
            a.ncols(),
            dict.grid_size(),
            estimate.gamma.len()
        )));
    }
    if estimate.gamma.iter().all(|&g| g == 0.0) {
        return Ok(CVector::zeros(a.nrows()));
    }
    let sigma = estimate.sigma.max(estimate.sigma_floor);
    let r = assemble_covariance(dict, &estimate.gamma, sigma)?;
    let whitened = HermitianFactor::new(&r)?.solve(&mean_snapshot(snapshots));
    let mut coefficients = dict.atoms().adjoint() * whitened;
    for (c, &g) in coefficients.iter_mut().zip(&estimate.gamma) {
        *c *= Complex64::from(g);
    }
    Ok(a * coefficients)
}
