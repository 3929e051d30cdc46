//! Iterative maximum-likelihood fitting of grid powers and noise variance.
//!
//! The observation covariance is modelled as `R = Σ_g γ_g b_g b_g^H + σ I`
//! over the effective atoms `b_g = S a(θ_g)`. Each iteration rebuilds `R`
//! from the current `(γ, σ)`, optionally re-weights the sample covariance
//! `R_K`, then applies the clamped closed-form coordinate updates. The
//! fitted spectrum feeds a conditional-mean reconstruction of the full
//! port-domain channel.

mod covariance;
mod likelihood;
mod reconstruct;
mod update;

pub use covariance::{assemble_covariance, robust_sample_covariance, EffectiveDictionary};
pub use likelihood::negative_log_likelihood;
pub use reconstruct::reconstruct_channel;
pub use update::{initialize, samv_update};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, CMatrix, CVector, HermitianFactor};
use covariance::check_snapshots;
use update::{apply_update, parts_factored};

/// Maronna weight `φ(t)` applied to each snapshot's Mahalanobis norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightFunction {
    /// `φ ≡ 1`: circular complex Gaussian data.
    #[default]
    Gaussian,
    /// `φ(t) = dim / t`.
    Tyler,
    /// `φ(t) = min(1, c / t)`.
    Huber { c: f64 },
}

impl WeightFunction {
    pub fn weight(&self, t: f64, dim: usize) -> f64 {
        match *self {
            WeightFunction::Gaussian => 1.0,
            WeightFunction::Tyler => dim as f64 / t,
            WeightFunction::Huber { c } => (c / t).min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Clamped additive step (the plain estimator).
    #[default]
    Additive,
    /// `ρ`-parameterized multiplicative step (the enhanced estimator).
    PowerFamily,
}

/// Lower bound on the noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaFloor {
    Absolute(f64),
    /// Multiple of the per-sample power `tr(R_K) / dim` of the data.
    Relative(f64),
}

impl Default for SigmaFloor {
    fn default() -> Self {
        SigmaFloor::Relative(1e-12)
    }
}

impl SigmaFloor {
    pub fn resolve(&self, sample_power: f64) -> f64 {
        match *self {
            SigmaFloor::Absolute(v) => v,
            SigmaFloor::Relative(f) => f * sample_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Exponent of the power-family rule, in `(0, 1.5]`.
    pub rho: f64,
    pub max_iterations: usize,
    /// Stop once the largest relative power change drops below this.
    pub tolerance: f64,
    /// Relative changes are measured against `max(γ_g, change_floor · max γ)`
    /// so vanishing atoms do not stall convergence.
    pub change_floor: f64,
    pub weight: WeightFunction,
    pub update_rule: UpdateRule,
    pub sigma_floor: SigmaFloor,
    /// With Gaussian weights, shorten any step that would raise the
    /// negative log-likelihood (halving toward the current point). The
    /// simultaneous update can otherwise cycle when atoms are coherent.
    pub monotone: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            max_iterations: 100,
            tolerance: 1e-6,
            change_floor: 1e-3,
            weight: WeightFunction::Gaussian,
            update_rule: UpdateRule::Additive,
            sigma_floor: SigmaFloor::default(),
            monotone: true,
        }
    }
}

impl EstimatorConfig {
    pub fn enhanced(rho: f64) -> Self {
        Self {
            rho,
            update_rule: UpdateRule::PowerFamily,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.5) {
            return Err(Error::Config(format!(
                "rho must lie in (0, 1.5], got {}",
                self.rho
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.change_floor.is_finite() && self.change_floor >= 0.0) {
            return Err(Error::Config("change_floor must be non-negative".into()));
        }
        let floor = match self.sigma_floor {
            SigmaFloor::Absolute(v) | SigmaFloor::Relative(v) => v,
        };
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::Config("sigma floor must be positive".into()));
        }
        if let WeightFunction::Huber { c } = self.weight {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config("Huber threshold must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    pub max_relative_change: f64,
    pub sigma: f64,
    /// Gaussian negative log-likelihood after the update.
    pub nll: f64,
    pub min_gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub gamma: Vec<f64>,
    pub sigma: f64,
    /// Noise floor in force at the last update.
    pub sigma_floor: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

impl SpectrumEstimate {
    /// Grid index of the strongest atom, ties to the lowest index.
    pub fn peak(&self) -> usize {
        self.gamma
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (g, &v)| {
                if v > best.1 {
                    (g, v)
                } else {
                    best
                }
            })
            .0
    }

    /// Trace as tab-separated lines: iteration, σ, max relative change, NLL.
    pub fn trace_tsv(&self) -> String {
        self.trace
            .iter()
            .map(|r| {
                format!(
                    "{}\t{}\t{}\t{}\n",
                    r.iteration, r.sigma, r.max_relative_change, r.nll
                )
            })
            .collect()
    }
}

/// Sample covariance as a square-root factor `R_K = W W^H`.
enum SampleCovariance {
    /// Re-weighted from the snapshots every iteration (non-Gaussian weights).
    Reweighted(WeightFunction),
    Fixed(CMatrix),
}

/// A model point `(γ, σ)` with its factored covariance.
struct ModelPoint {
    factor: HermitianFactor,
    nll: f64,
    /// `y_t^H R^{-1} y_t` per snapshot.
    mahalanobis: Vec<f64>,
}

impl ModelPoint {
    fn new(dict: &EffectiveDictionary, y: &CMatrix, gamma: &[f64], sigma: f64) -> Result<Self> {
        let factor = HermitianFactor::new(&assemble_covariance(dict, gamma, sigma)?)?;
        let v = factor.solve_lower(y);
        let mahalanobis: Vec<f64> = v.column_iter().map(|c| c.norm_squared()).collect();
        let nll = y.ncols() as f64 * factor.log_det() + mahalanobis.iter().sum::<f64>();
        Ok(Self {
            factor,
            nll,
            mahalanobis,
        })
    }
}

fn snapshot_matrix(snapshots: &[CVector]) -> CMatrix {
    CMatrix::from_columns(snapshots)
}

/// `W` with columns `sqrt(κ_t / T) y_t`, `κ_t = φ(t_t)`; zero snapshots get
/// weight zero.
fn weighted_factor(y: &CMatrix, mahalanobis: &[f64], weight: WeightFunction) -> CMatrix {
    let (dim, t) = (y.nrows(), y.ncols());
    let mut w = y.clone();
    for (mut col, &m) in w.column_iter_mut().zip(mahalanobis) {
        let kappa = if m > 0.0 { weight.weight(m, dim) } else { 0.0 };
        col *= Complex64::from((kappa / t as f64).sqrt());
    }
    w
}

/// Square root `W W^H = R_K` of a Hermitian positive semi-definite matrix.
fn psd_square_root(r_k: &CMatrix) -> CMatrix {
    let eig = hermitian_part(r_k).symmetric_eigen();
    let mut w = eig.eigenvectors;
    for (mut col, &l) in w.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= Complex64::from(l.max(0.0).sqrt());
    }
    w
}

fn max_relative_change(old: &[f64], new: &[f64], change_floor: f64) -> f64 {
    let peak = old.iter().copied().fold(0.0, f64::max);
    let floor = (change_floor * peak).max(f64::MIN_POSITIVE);
    old.iter()
        .zip(new)
        .map(|(&a, &b)| (b - a).abs() / a.max(floor))
        .fold(0.0, f64::max)
}

/// Step halvings tried before declaring that no descent is possible.
const MAX_HALVINGS: usize = 30;

fn iterate(
    config: &EstimatorConfig,
    dict: &EffectiveDictionary,
    snapshots: &[CVector],
    mut gamma: Vec<f64>,
    mut sigma: f64,
    sample: SampleCovariance,
) -> Result<SpectrumEstimate> {
    let y = snapshot_matrix(snapshots);
    let guarded = config.monotone && matches!(sample, SampleCovariance::Fixed(_));
    let evaluate = |g: &[f64], s: f64| ModelPoint::new(dict, &y, g, s);
    let mut point = evaluate(&gamma, sigma)?;
    let mut trace = Vec::with_capacity(config.max_iterations);
    let mut sigma_floor = 0.0;
    let mut converged = false;
    for iteration in 1..=config.max_iterations {
        let at = |e: Error| e.at_iteration(iteration);
        let owned;
        let w = match &sample {
            SampleCovariance::Fixed(w) => w,
            SampleCovariance::Reweighted(weight) => {
                owned = weighted_factor(&y, &point.mahalanobis, *weight);
                &owned
            }
        };
        let floor = config
            .sigma_floor
            .resolve(w.norm_squared() / dict.dim() as f64);
        let parts = parts_factored(&point.factor, w, dict);
        let (mut new_gamma, mut new_sigma) =
            apply_update(&gamma, sigma, &parts, floor, config).map_err(at)?;
        let candidate = evaluate(&new_gamma, new_sigma);
        let next = if !guarded {
            Some(candidate.map_err(at)?)
        } else {
            // A singular candidate model counts as infinitely unlikely.
            let improves = |c: &Result<ModelPoint>| matches!(c, Ok(p) if p.nll <= point.nll);
            let mut candidate = candidate;
            let (target_gamma, target_sigma) = (new_gamma.clone(), new_sigma);
            let mut t = 1.0;
            let mut halvings = 0;
            while !improves(&candidate) && halvings < MAX_HALVINGS {
                if let Err(e) = &candidate {
                    if !e.is_numerical() {
                        return Err(candidate.err().expect("checked above"));
                    }
                }
                t *= 0.5;
                halvings += 1;
                for ((g, &old), &target) in new_gamma.iter_mut().zip(&gamma).zip(&target_gamma) {
                    *g = old + t * (target - old);
                }
                new_sigma = sigma + t * (target_sigma - sigma);
                candidate = evaluate(&new_gamma, new_sigma);
            }
            if improves(&candidate) {
                candidate.ok()
            } else {
                new_gamma.clone_from(&gamma);
                new_sigma = sigma;
                None
            }
        };
        let change = max_relative_change(&gamma, &new_gamma, config.change_floor);
        if let Some(next) = next {
            point = next;
        }
        trace.push(IterationRecord {
            iteration,
            max_relative_change: change,
            sigma: new_sigma,
            nll: point.nll,
            min_gamma: new_gamma.iter().copied().fold(f64::INFINITY, f64::min),
        });
        gamma = new_gamma;
        sigma = new_sigma;
        sigma_floor = floor;
        if change < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(SpectrumEstimate {
        gamma,
        sigma,
        sigma_floor,
        iterations_used: trace.len(),
        converged,
        trace,
    })
}

/// Fits `(γ, σ)` to the snapshots: initialize, then iterate
/// covariance rebuild, re-weighting and clamped updates until the largest
/// relative power change falls below the tolerance or the iteration budget
/// runs out.
///
/// All-zero data yields an all-zero spectrum without iterating.
pub fn run(
    config: &EstimatorConfig,
    dict: &EffectiveDictionary,
    snapshots: &[CVector],
) -> Result<SpectrumEstimate> {
    config.validate()?;
    let dim = dict.dim();
    check_snapshots(snapshots, dim)?;
    let power =
        snapshots.iter().map(|y| y.norm_squared()).sum::<f64>() / (dim * snapshots.len()) as f64;
    if power == 0.0 {
        return Ok(SpectrumEstimate {
            gamma: vec![0.0; dict.grid_size()],
            sigma: 0.0,
            sigma_floor: 0.0,
            iterations_used: 0,
            converged: true,
            trace: Vec::new(),
        });
    }
    // The first re-weighting is against the white model `power · I`.
    let y = snapshot_matrix(snapshots);
    let start: Vec<f64> = snapshots.iter().map(|y| y.norm_squared() / power).collect();
    let w = weighted_factor(&y, &start, config.weight);
    let r_k = hermitian_part(&(&w * w.adjoint()));
    let (gamma, sigma) = initialize(dict, &r_k, snapshots)?;
    let sample = match config.weight {
        WeightFunction::Gaussian => SampleCovariance::Fixed(w),
        weight => SampleCovariance::Reweighted(weight),
    };
    iterate(config, dict, snapshots, gamma, sigma, sample)
}

/// Iterates from a given `(γ, σ)` against a pinned sample covariance.
/// With `r_k = R(γ, σ)` this is a fixed point and stops after one step.
pub fn run_pinned(
    config: &EstimatorConfig,
    dict: &EffectiveDictionary,
    snapshots: &[CVector],
    gamma: Vec<f64>,
    sigma: f64,
    r_k: &CMatrix,
) -> Result<SpectrumEstimate> {
    config.validate()?;
    check_snapshots(snapshots, dict.dim())?;
    if r_k.nrows() != dict.dim() || r_k.ncols() != dict.dim() {
        return Err(Error::Contract(
            "pinned covariance has the wrong size".into(),
        ));
    }
    iterate(
        config,
        dict,
        snapshots,
        gamma,
        sigma,
        SampleCovariance::Fixed(psd_square_root(r_k)),
    )
}

/// Initial `(γ⁰, σ⁰)` and the pinned covariance `R(γ⁰, σ⁰)` used by the
/// fixed-point diagnostic.
pub fn initial_model(
    dict: &EffectiveDictionary,
    snapshots: &[CVector],
) -> Result<(Vec<f64>, f64, CMatrix)> {
    let dim = dict.dim();
    check_snapshots(snapshots, dim)?;
    let r_k = robust_sample_covariance(
        snapshots,
        &DMatrix::identity(dim, dim),
        WeightFunction::Gaussian,
    )?;
    let (gamma, sigma) = initialize(dict, &r_k, snapshots)?;
    let r0 = assemble_covariance(dict, &gamma, sigma)?;
    Ok((gamma, sigma, r0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{build_dictionary, ArrayGeometry, GridKind};
    use crate::rng::complex_normal;
    use crate::schedule::sequential_schedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(
        n: usize,
        m: usize,
        k: usize,
        g: usize,
    ) -> (crate::array::SteeringDictionary, EffectiveDictionary) {
        let geo = ArrayGeometry::new(n, 3.5).unwrap();
        let full = build_dictionary(&geo, g, GridKind::UniformCosine).unwrap();
        let sel = sequential_schedule(n, m, k).unwrap().stack();
        let eff = EffectiveDictionary::new(&full, &sel).unwrap();
        (full, eff)
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::default().validate().is_ok());
        assert!(EstimatorConfig::enhanced(1.6).validate().is_err());
        assert!(EstimatorConfig::enhanced(0.0).validate().is_err());
        let bad = EstimatorConfig {
            max_iterations: 0,
            ..EstimatorConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn weights() {
        assert_eq!(WeightFunction::Gaussian.weight(3.0, 4), 1.0);
        assert_eq!(WeightFunction::Tyler.weight(2.0, 4), 2.0);
        assert_eq!(WeightFunction::Huber { c: 2.0 }.weight(4.0, 4), 0.5);
        assert_eq!(WeightFunction::Huber { c: 2.0 }.weight(1.0, 4), 1.0);
    }

    #[test]
    fn pinned_fixed_point_stops_after_one_iteration() {
        let (_, eff) = setup(16, 4, 2, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = vec![CVector::from_fn(8, |_, _| complex_normal(&mut rng, 1.0))];
        let (gamma, sigma, r0) = initial_model(&eff, &y).unwrap();
        let est = run_pinned(
            &EstimatorConfig::default(),
            &eff,
            &y,
            gamma.clone(),
            sigma,
            &r0,
        )
        .unwrap();
        assert_eq!(est.iterations_used, 1);
        assert!(est.trace[0].max_relative_change < 1e-10);
        assert!(est.converged);
    }

    #[test]
    fn single_path_peak() {
        let (full, eff) = setup(16, 4, 4, 32);
        let true_g = 11;
        let y = vec![eff.atoms().column(true_g) * Complex64::new(4.0, 0.0)];
        let est = run(&EstimatorConfig::default(), &eff, &y).unwrap();
        assert_eq!(est.peak(), true_g);
        let h_hat = reconstruct_channel(&est, &eff, &full, &y).unwrap();
        let h = full.atom(true_g) * Complex64::new(4.0, 0.0);
        assert!((h_hat - &h).norm() / h.norm() < 1e-3);
    }

    #[test]
    fn deterministic_trace() {
        let (_, eff) = setup(16, 2, 3, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<CVector> = (0..2)
            .map(|_| CVector::from_fn(6, |_, _| complex_normal(&mut rng, 1.0)))
            .collect();
        let a = run(&EstimatorConfig::default(), &eff, &y).unwrap();
        let b = run(&EstimatorConfig::default(), &eff, &y).unwrap();
        assert_eq!(a, b);
        assert!(a.gamma.iter().all(|&g| g >= 0.0));
        assert!(a
            .trace
            .iter()
            .all(|r| r.sigma >= a.sigma_floor && r.min_gamma >= 0.0));
    }

    #[test]
    fn max_iterations_bounds_trace() {
        let (_, eff) = setup(16, 2, 3, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = vec![CVector::from_fn(6, |_, _| complex_normal(&mut rng, 1.0))];
        let config = EstimatorConfig {
            max_iterations: 1,
            ..EstimatorConfig::default()
        };
        assert_eq!(run(&config, &eff, &y).unwrap().trace.len(), 1);
    }

    #[test]
    fn zero_data_gives_zero_spectrum() {
        let (full, eff) = setup(8, 2, 2, 10);
        let y = vec![CVector::zeros(4)];
        let est = run(&EstimatorConfig::default(), &eff, &y).unwrap();
        assert!(est.gamma.iter().all(|&g| g == 0.0));
        let h = reconstruct_channel(&est, &eff, &full, &y).unwrap();
        assert_eq!(h, CVector::zeros(8));
    }

    #[test]
    fn robust_weights_run() {
        let (_, eff) = setup(16, 4, 2, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y: Vec<CVector> = (0..4)
            .map(|_| CVector::from_fn(8, |_, _| complex_normal(&mut rng, 1.0)))
            .collect();
        for weight in [WeightFunction::Tyler, WeightFunction::Huber { c: 8.0 }] {
            let config = EstimatorConfig {
                weight,
                max_iterations: 20,
                ..EstimatorConfig::default()
            };
            let est = run(&config, &eff, &y).unwrap();
            assert!(est.gamma.iter().all(|g| g.is_finite() && *g >= 0.0));
            assert!(est.sigma >= est.sigma_floor);
        }
    }

    #[test]
    fn reconstruction_is_linear_in_data() {
        let (full, eff) = setup(16, 4, 2, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = vec![CVector::from_fn(8, |_, _| complex_normal(&mut rng, 1.0))];
        let est = run(&EstimatorConfig::default(), &eff, &y).unwrap();
        let c = Complex64::new(-1.5, 2.0);
        let scaled = vec![&y[0] * c];
        let a = reconstruct_channel(&est, &eff, &full, &y).unwrap();
        let b = reconstruct_channel(&est, &eff, &full, &scaled).unwrap();
        assert!((a * c - &b).norm() < 1e-10 * b.norm());
    }
}
