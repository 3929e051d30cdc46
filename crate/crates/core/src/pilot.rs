//! Noisy pilot observations through a switch schedule.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::schedule::StackedSelector;

/// `T` stacked sweeps `y_t = S h + ε_t` with unit pilots.
#[derive(Debug, Clone)]
pub struct PilotObservation {
    pub snapshots: Vec<DVector<Complex64>>,
    pub selector: StackedSelector,
    pub noise_variance: f64,
}

impl PilotObservation {
    pub fn sweep_count(&self) -> usize {
        self.snapshots.len()
    }

    /// Snapshot average `ȳ`.
    pub fn mean_snapshot(&self) -> DVector<Complex64> {
        mean_snapshot(&self.snapshots)
    }
}

pub(crate) fn mean_snapshot(snapshots: &[DVector<Complex64>]) -> DVector<Complex64> {
    let mut sum = DVector::zeros(snapshots.first().map_or(0, DVector::len));
    for y in snapshots {
        sum += y;
    }
    sum / Complex64::from(snapshots.len().max(1) as f64)
}

/// Draws `sweep_count` snapshots with `CN(0, σ I)` noise. `sigma = 0` gives
/// exact coordinate selections of `h`.
pub fn synthesize_observation<R: Rng + ?Sized>(
    h: &DVector<Complex64>,
    selector: &StackedSelector,
    sigma: f64,
    sweep_count: usize,
    rng: &mut R,
) -> Result<PilotObservation> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be non-negative, got {sigma}"
        )));
    }
    if sweep_count == 0 {
        return Err(Error::Config("sweep count must be at least 1".into()));
    }
    if h.len() != selector.n_ports() {
        return Err(Error::Contract(format!(
            "channel has {} ports, selector expects {}",
            h.len(),
            selector.n_ports()
        )));
    }
    let clean = selector.apply(h);
    let snapshots = (0..sweep_count)
        .map(|_| {
            let mut y = clean.clone();
            if sigma > 0.0 {
                for v in y.iter_mut() {
                    *v += complex_normal(rng, sigma);
                }
            }
            y
        })
        .collect();
    Ok(PilotObservation {
        snapshots,
        selector: selector.clone(),
        noise_variance: sigma,
    })
}

/// Mean per-port power `E[||h||^2 / N]` over an ensemble.
pub fn mean_port_power<'a>(
    channels: impl IntoIterator<Item = &'a DVector<Complex64>>,
) -> Result<f64> {
    let (mut total, mut count) = (0.0, 0usize);
    for h in channels {
        total += h.norm_squared() / h.len() as f64;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Domain("empty channel ensemble".into()));
    }
    Ok(total / count as f64)
}

/// Noise variance giving `snr_db` against a reference per-port power.
/// `snr_db = +inf` gives a noiseless channel.
pub fn sigma_for_snr(port_power: f64, snr_db: f64) -> Result<f64> {
    if !(port_power.is_finite() && port_power > 0.0) {
        return Err(Error::Domain(format!(
            "reference power must be positive, got {port_power}"
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::Domain("SNR is NaN".into()));
    }
    Ok(port_power * 10f64.powf(-snr_db / 10.0))
}
