//! Channel-estimate quality metrics.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::pilot::sigma_for_snr;
use crate::rng::complex_normal;

/// Metric bundle of one (SNR, estimator, trial) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub estimator: String,
    pub trial: usize,
    pub nmse: f64,
    pub ber: f64,
    pub capacity_bits: f64,
    pub iterations: usize,
    pub elapsed_ms: f64,
    pub seed: u64,
}

/// `||ĥ - h||^2 / ||h||^2`.
pub fn nmse(h_hat: &DVector<Complex64>, h: &DVector<Complex64>) -> Result<f64> {
    if h_hat.len() != h.len() {
        return Err(Error::Contract(format!(
            "estimate has {} ports, channel has {}",
            h_hat.len(),
            h.len()
        )));
    }
    let energy = h.norm_squared();
    if energy == 0.0 {
        return Err(Error::Domain("NMSE of an all-zero channel".into()));
    }
    Ok((h_hat - h).norm_squared() / energy)
}

/// Port with the largest estimated gain, ties to the lowest index.
pub fn select_port(h_hat: &DVector<Complex64>) -> usize {
    h_hat
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (n, v)| {
            let p = v.norm_sqr();
            if p > best.1 {
                (n, p)
            } else {
                best
            }
        })
        .0
}

const QPSK_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn gray_qpsk(b0: bool, b1: bool) -> Complex64 {
    let level = |b: bool| if b { -QPSK_SCALE } else { QPSK_SCALE };
    Complex64::new(level(b0), level(b1))
}

/// Monte-Carlo bit error rate of unit-energy Gray QPSK sent from the port
/// `ĥ` selects, through its true gain, with `CN(0, σ)` noise at `snr_db`
/// and one-tap equalization by the estimated gain.
pub fn ber_qpsk<R: Rng + ?Sized>(
    h_hat: &DVector<Complex64>,
    h: &DVector<Complex64>,
    snr_db: f64,
    n_symbols: usize,
    rng: &mut R,
) -> Result<f64> {
    if h_hat.len() != h.len() || h.is_empty() {
        return Err(Error::Contract(
            "estimate and channel lengths differ".into(),
        ));
    }
    if n_symbols == 0 {
        return Err(Error::Config("need at least one symbol".into()));
    }
    let port = select_port(h_hat);
    let (gain, estimate) = (h[port], h_hat[port]);
    let sigma = sigma_for_snr(1.0, snr_db)?;
    let mut errors = 0usize;
    for _ in 0..n_symbols {
        let (b0, b1): (bool, bool) = (rng.random(), rng.random());
        let mut r = gain * gray_qpsk(b0, b1);
        if sigma > 0.0 {
            r += complex_normal(rng, sigma);
        }
        // A zero estimate gives NaN, which decodes as bit 0 on both rails.
        let z = r / estimate;
        errors += usize::from((z.re < 0.0) != b0) + usize::from((z.im < 0.0) != b1);
    }
    Ok(errors as f64 / (2 * n_symbols) as f64)
}

/// `log2(1 + SNR |h_{n*}|^2)` at the port `n*` chosen from `ĥ`.
pub fn capacity(h_hat: &DVector<Complex64>, h: &DVector<Complex64>, snr_db: f64) -> Result<f64> {
    if h_hat.len() != h.len() || h.is_empty() {
        return Err(Error::Contract(
            "estimate and channel lengths differ".into(),
        ));
    }
    let snr = 10f64.powf(snr_db / 10.0);
    Ok((1.0 + snr * h[select_port(h_hat)].norm_sqr()).log2())
}

/// Percentile bootstrap interval for the mean of `values` at confidence
/// `level` (e.g. 0.95).
pub fn bootstrap_mean_ci<R: Rng + ?Sized>(
    values: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if values.is_empty() || resamples == 0 {
        return Err(Error::Config("bootstrap needs data and resamples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    Ok((at(tail), at(1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channel(seed: u64, n: usize) -> DVector<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(n, |_, _| complex_normal(&mut rng, 1.0))
    }

    #[test]
    fn nmse_cases() {
        let h = random_channel(1, 8);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert_eq!(nmse(&DVector::zeros(8), &h).unwrap(), 1.0);
        assert!((nmse(&(&h * Complex64::from(2.0)), &h).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            nmse(&h, &DVector::zeros(8)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn nmse_unitary_invariance() {
        let h = random_channel(2, 6);
        let h_hat = random_channel(3, 6);
        let rot = Complex64::from_polar(1.0, 0.77);
        let a = nmse(&h_hat, &h).unwrap();
        let b = nmse(&(&h_hat * rot), &(&h * rot)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn port_ties_break_low() {
        let h = DVector::from_vec(vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
        ]);
        assert_eq!(select_port(&h), 0);
    }

    #[test]
    fn ber_perfect_csi_high_snr() {
        let h = random_channel(4, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(ber_qpsk(&h, &h, 60.0, 10_000, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn ber_sign_flip_inverts_every_bit() {
        let h = random_channel(6, 16);
        let flipped = -&h;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(ber_qpsk(&flipped, &h, 60.0, 10_000, &mut rng).unwrap(), 1.0);
    }

    #[test]
    fn capacity_cases() {
        let h = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)]);
        assert!((capacity(&h, &h, 10.0 * 3f64.log10()).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(capacity(&h, &h, f64::NEG_INFINITY).unwrap(), 0.0);
        for seed in 0..50 {
            let h = random_channel(seed, 12);
            let h_hat = random_channel(seed + 1000, 12);
            assert!(capacity(&h, &h, 10.0).unwrap() >= capacity(&h_hat, &h, 10.0).unwrap());
        }
    }

    #[test]
    fn bootstrap_brackets_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..200).map(|i| (i % 10) as f64).collect();
        let (lo, hi) = bootstrap_mean_ci(&values, 2000, 0.95, &mut rng).unwrap();
        assert!(lo < 4.5 && 4.5 < hi && hi - lo < 1.5);
        let (lo, hi) = bootstrap_mean_ci(&[2.0; 5], 100, 0.95, &mut rng).unwrap();
        assert_eq!((lo, hi), (2.0, 2.0));
    }

    #[test]
    fn positive_scaling_keeps_port() {
        let h = random_channel(8, 20);
        let h_hat = random_channel(9, 20);
        let scaled = &h_hat * Complex64::from(3.7);
        assert_eq!(select_port(&h_hat), select_port(&scaled));
        assert_eq!(
            capacity(&h_hat, &h, 5.0).unwrap(),
            capacity(&scaled, &h, 5.0).unwrap()
        );
        let a = ber_qpsk(&h_hat, &h, 5.0, 5000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = ber_qpsk(&scaled, &h, 5.0, 5000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }
}
