//! Seeded Monte-Carlo sweeps over SNR, RF-chain count and aperture.
//!
//! Every trial derives one seed from the base seed and its index, then
//! draws the channel, schedule, noise and data symbols from separate
//! sub-streams of it. All estimators and SNR points of a trial therefore see
//! the same channel and the same noise pattern, and results are identical
//! whether trials run serially or in parallel.

mod config;

pub use config::{EstimatorKind, ExperimentConfig, ScheduleKind, CONFIG_KEYS};

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{build_dictionary, ArrayGeometry, GridKind, SteeringDictionary};
use crate::baseline::{ls_estimate, omp_estimate, BaselineConfig};
use crate::channel::{sample_ssc_channel, ChannelRealization, SscParams};
use crate::error::{Error, Result};
use crate::metrics::{ber_qpsk, capacity, nmse, TrialRecord};
use crate::pilot::{sigma_for_snr, synthesize_observation, PilotObservation};
use crate::rng::{stream_rng, trial_seed, Stream};
use crate::samv::{self, EffectiveDictionary, EstimatorConfig, SpectrumEstimate};
use crate::schedule::{random_schedule, sequential_schedule, SwitchSchedule};

pub const SWEEP_HEADER: [&str; 9] = [
    "snr_db",
    "estimator",
    "trial",
    "nmse",
    "ber",
    "capacity_bits",
    "iterations",
    "elapsed_ms",
    "seed",
];

pub const CONVERGENCE_HEADER: [&str; 11] = [
    "n_chains",
    "snr_db",
    "estimator",
    "trial",
    "iteration",
    "max_rel_change",
    "sigma",
    "nll",
    "min_gamma",
    "sigma_floor",
    "seed",
];

pub const REGION_HEADER: [&str; 6] = [
    "region_wavelengths",
    "snr_db",
    "estimator",
    "trial",
    "capacity_bits",
    "seed",
];

/// Data symbols per trial for the BER estimate.
pub const BER_SYMBOLS: usize = 10_000;

/// A named text file produced alongside the CSV (`--dump-trace`).
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Geometry and dictionary shared by all trials at one aperture.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub dictionary: SteeringDictionary,
    pub ssc: SscParams,
}

impl Scenario {
    pub fn new(config: &ExperimentConfig, region_wavelengths: f64) -> Result<Self> {
        let geometry = ArrayGeometry::new(config.n_ports, region_wavelengths)?;
        let dictionary = build_dictionary(&geometry, config.grid_size, GridKind::UniformCosine)?;
        let ssc = SscParams {
            n_clusters: config.n_clusters,
            rays_per_cluster: config.rays_per_cluster,
            angle_spread: config.angle_spread_deg.to_radians(),
        };
        Ok(Self { dictionary, ssc })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        self.dictionary.geometry()
    }
}

/// Channel and schedule of one trial, before noise.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub seed: u64,
    pub channel: ChannelRealization,
    pub schedule: SwitchSchedule,
    pub effective: EffectiveDictionary,
}

impl TrialSetup {
    pub fn new(config: &ExperimentConfig, scenario: &Scenario, seed: u64) -> Result<Self> {
        let channel = sample_ssc_channel(
            scenario.geometry(),
            &scenario.ssc,
            &mut stream_rng(seed, Stream::Channel),
        )?;
        let schedule = match config.schedule_kind {
            ScheduleKind::Sequential => {
                let s = sequential_schedule(config.n_ports, config.n_chains, config.n_slots)?;
                if config.enforce_spacing {
                    s.validate(scenario.geometry(), true)
                        .map_err(|(k, v)| Error::ConfigKey {
                            key: "enforce_spacing".into(),
                            reason: format!("sequential slot {}: {v}", k + 1),
                        })?;
                }
                s
            }
            ScheduleKind::Random => random_schedule(
                scenario.geometry(),
                config.n_chains,
                config.n_slots,
                config.enforce_spacing,
                &mut stream_rng(seed, Stream::Schedule),
            )?,
        };
        let effective = EffectiveDictionary::new(&scenario.dictionary, &schedule.stack())?;
        Ok(Self {
            seed,
            channel,
            schedule,
            effective,
        })
    }

    /// Pilot snapshots at `snr_db` against the unit ensemble port power.
    pub fn observe(&self, config: &ExperimentConfig, snr_db: f64) -> Result<PilotObservation> {
        let sigma = sigma_for_snr(1.0, snr_db)?;
        synthesize_observation(
            &self.channel.h,
            &self.schedule.stack(),
            sigma,
            config.sweep_count,
            &mut stream_rng(self.seed, Stream::Noise),
        )
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub h_hat: DVector<Complex64>,
    /// Solver iterations, OMP atoms, or 0 for the non-iterative estimators.
    pub iterations: usize,
    pub spectrum: Option<SpectrumEstimate>,
}

pub fn estimator_config(config: &ExperimentConfig, kind: EstimatorKind) -> EstimatorConfig {
    let base = match kind {
        EstimatorKind::FasCheEnhanced => EstimatorConfig::enhanced(config.rho),
        _ => EstimatorConfig::default(),
    };
    EstimatorConfig {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
        ..base
    }
}

pub fn estimate(
    config: &ExperimentConfig,
    kind: EstimatorKind,
    scenario: &Scenario,
    setup: &TrialSetup,
    obs: &PilotObservation,
) -> Result<EstimateOutcome> {
    match kind {
        EstimatorKind::FasChe | EstimatorKind::FasCheEnhanced => {
            let spectrum = samv::run(
                &estimator_config(config, kind),
                &setup.effective,
                &obs.snapshots,
            )?;
            let h_hat = samv::reconstruct_channel(
                &spectrum,
                &setup.effective,
                &scenario.dictionary,
                &obs.snapshots,
            )?;
            Ok(EstimateOutcome {
                h_hat,
                iterations: spectrum.iterations_used,
                spectrum: Some(spectrum),
            })
        }
        EstimatorKind::Ls => Ok(EstimateOutcome {
            h_hat: ls_estimate(obs, &BaselineConfig::default())?,
            iterations: 0,
            spectrum: None,
        }),
        EstimatorKind::Omp => {
            let baseline = BaselineConfig {
                omp_max_atoms: config.n_clusters * config.rays_per_cluster,
                ..BaselineConfig::default()
            };
            let est = omp_estimate(obs, &setup.effective, &scenario.dictionary, &baseline)?;
            Ok(EstimateOutcome {
                iterations: est.support.len(),
                h_hat: est.h,
                spectrum: None,
            })
        }
        EstimatorKind::Perfect => Ok(EstimateOutcome {
            h_hat: setup.channel.h.clone(),
            iterations: 0,
            spectrum: None,
        }),
    }
}

/// Formats a float so that it parses back exactly and stays short.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn slug(v: f64) -> String {
    format_float(v).replace('-', "m")
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    /// Ordered by SNR, then estimator, then trial, each in config order.
    pub records: Vec<TrialRecord>,
    /// Present only if requested: schedules and solver traces.
    pub artifacts: Vec<Artifact>,
    /// Every fitted spectrum, kept for post-hoc checks when requested.
    pub spectra: Vec<SpectrumEstimate>,
}

struct TrialResult {
    records: Vec<TrialRecord>,
    artifacts: Vec<Artifact>,
    spectra: Vec<SpectrumEstimate>,
}

fn sweep_trial(
    config: &ExperimentConfig,
    scenario: &Scenario,
    snr_db: f64,
    trial: usize,
    keep: bool,
) -> Result<TrialResult> {
    let seed = trial_seed(config.base_seed, trial as u64);
    let setup = TrialSetup::new(config, scenario, seed)?;
    let obs = setup.observe(config, snr_db)?;
    let mut out = TrialResult {
        records: Vec::with_capacity(config.estimators.len()),
        artifacts: Vec::new(),
        spectra: Vec::new(),
    };
    for &kind in &config.estimators {
        let start = Instant::now();
        let est = estimate(config, kind, scenario, &setup, &obs)?;
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        let h = &setup.channel.h;
        let ber = ber_qpsk(
            &est.h_hat,
            h,
            snr_db,
            BER_SYMBOLS,
            &mut stream_rng(seed, Stream::Symbols),
        )?;
        out.records.push(TrialRecord {
            snr_db,
            estimator: kind.label().to_string(),
            trial,
            nmse: nmse(&est.h_hat, h)?,
            ber,
            capacity_bits: capacity(&est.h_hat, h, snr_db)?,
            iterations: est.iterations,
            elapsed_ms,
            seed,
        });
        if keep {
            if let Some(spectrum) = est.spectrum {
                out.artifacts.push(Artifact {
                    name: format!("snr{}_{}_trial{trial}.tsv", slug(snr_db), kind.label()),
                    contents: spectrum.trace_tsv(),
                });
                out.spectra.push(spectrum);
            }
        }
    }
    if keep {
        out.artifacts.push(Artifact {
            name: format!("snr{}_trial{trial}_schedule.txt", slug(snr_db)),
            contents: setup.schedule.to_text(),
        });
    }
    Ok(out)
}

/// Runs every (SNR, trial) cell for every configured estimator.
/// `keep_traces` additionally collects schedules, solver traces and spectra.
pub fn run_sweep(config: &ExperimentConfig, keep_traces: bool) -> Result<SweepOutput> {
    config.validate()?;
    let scenario = Scenario::new(config, config.region_wavelengths)?;
    let cells: Vec<(usize, usize)> = (0..config.snr_db_list.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let results: Vec<TrialResult> = cells
        .par_iter()
        .map(|&(s, t)| sweep_trial(config, &scenario, config.snr_db_list[s], t, keep_traces))
        .collect::<Result<_>>()?;

    let mut out = SweepOutput::default();
    let n_est = config.estimators.len();
    for s in 0..config.snr_db_list.len() {
        let block = &results[s * config.trials..(s + 1) * config.trials];
        for e in 0..n_est {
            out.records
                .extend(block.iter().map(|r| r.records[e].clone()));
        }
    }
    for r in results {
        out.artifacts.extend(r.artifacts);
        out.spectra.extend(r.spectra);
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record([
            format_float(r.snr_db),
            r.estimator.clone(),
            r.trial.to_string(),
            format_float(r.nmse),
            format_float(r.ber),
            format_float(r.capacity_bits),
            r.iterations.to_string(),
            format!("{:.3}", r.elapsed_ms),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Drops the `elapsed_ms` column, the only one not reproducible bit for bit.
pub fn strip_elapsed(csv_text: &str) -> String {
    let mut lines = csv_text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let Some(col) = header.split(',').position(|h| h == "elapsed_ms") else {
        return csv_text.to_string();
    };
    std::iter::once(header)
        .chain(lines)
        .map(|line| {
            let mut fields: Vec<&str> = line.split(',').collect();
            if col < fields.len() {
                fields.remove(col);
            }
            fields.join(",") + "\n"
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_chains: usize,
    pub snr_db: f64,
    pub estimator: EstimatorKind,
    pub trial: usize,
    pub iteration: usize,
    pub max_rel_change: f64,
    pub sigma: f64,
    pub nll: f64,
    pub min_gamma: f64,
    pub sigma_floor: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConvergenceOptions {
    /// Pin the sample covariance to the initial model `R(γ⁰, σ⁰)`; a
    /// correct update then stops after one iteration with zero change.
    pub pin_covariance: bool,
}

fn convergence_trial(
    config: &ExperimentConfig,
    scenario: &Scenario,
    kind: EstimatorKind,
    snr_db: f64,
    trial: usize,
    options: ConvergenceOptions,
) -> Result<Vec<ConvergenceRow>> {
    let seed = trial_seed(config.base_seed, trial as u64);
    let setup = TrialSetup::new(config, scenario, seed)?;
    let obs = setup.observe(config, snr_db)?;
    let est_config = estimator_config(config, kind);
    let spectrum = if options.pin_covariance {
        let (gamma, sigma, r0) = samv::initial_model(&setup.effective, &obs.snapshots)?;
        samv::run_pinned(
            &est_config,
            &setup.effective,
            &obs.snapshots,
            gamma,
            sigma,
            &r0,
        )?
    } else {
        samv::run(&est_config, &setup.effective, &obs.snapshots)?
    };
    Ok(spectrum
        .trace
        .iter()
        .map(|r| ConvergenceRow {
            n_chains: config.n_chains,
            snr_db,
            estimator: kind,
            trial,
            iteration: r.iteration,
            max_rel_change: r.max_relative_change,
            sigma: r.sigma,
            nll: r.nll,
            min_gamma: r.min_gamma,
            sigma_floor: spectrum.sigma_floor,
            seed,
        })
        .collect())
}

/// Per-iteration solver traces of the iterative estimators for each
/// RF-chain count in `chains`, SNR and trial.
pub fn run_convergence(
    config: &ExperimentConfig,
    chains: &[usize],
    options: ConvergenceOptions,
) -> Result<Vec<ConvergenceRow>> {
    config.validate()?;
    let kinds: Vec<EstimatorKind> = config
        .estimators
        .iter()
        .copied()
        .filter(|k| k.is_iterative())
        .collect();
    if kinds.is_empty() {
        return Err(Error::ConfigKey {
            key: "estimators".into(),
            reason: "convergence needs fas-che or fas-che-enhanced".into(),
        });
    }
    if chains.is_empty() {
        return Err(Error::Config("no RF-chain counts given".into()));
    }
    let scenario = Scenario::new(config, config.region_wavelengths)?;
    let mut rows = Vec::new();
    for &m in chains {
        let cfg = ExperimentConfig {
            n_chains: m,
            ..config.clone()
        };
        cfg.validate()?;
        for &snr in &cfg.snr_db_list {
            for &kind in &kinds {
                let per_trial: Vec<Vec<ConvergenceRow>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| convergence_trial(&cfg, &scenario, kind, snr, t, options))
                    .collect::<Result<_>>()?;
                rows.extend(per_trial.into_iter().flatten());
            }
        }
    }
    Ok(rows)
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CONVERGENCE_HEADER)?;
    for r in rows {
        w.write_record([
            r.n_chains.to_string(),
            format_float(r.snr_db),
            r.estimator.label().to_string(),
            r.trial.to_string(),
            r.iteration.to_string(),
            format_float(r.max_rel_change),
            format_float(r.sigma),
            format_float(r.nll),
            format_float(r.min_gamma),
            format_float(r.sigma_floor),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub region_wavelengths: f64,
    pub snr_db: f64,
    pub estimator: EstimatorKind,
    pub trial: usize,
    pub capacity_bits: f64,
    pub seed: u64,
}

/// Selected-port capacity for each aperture in `regions` (port spacing is
/// recomputed per value). The k-th repeat of an aperture uses trial indices
/// offset by `k · trials`, so repeats are independent replicates while
/// distinct apertures share seeds.
pub fn run_region_sweep(config: &ExperimentConfig, regions: &[f64]) -> Result<Vec<RegionRow>> {
    config.validate()?;
    if regions.is_empty() {
        return Err(Error::ConfigKey {
            key: "region_wavelengths".into(),
            reason: "region list must not be empty".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, &w) in regions.iter().enumerate() {
        let repeat = regions[..i].iter().filter(|&&v| v == w).count();
        let scenario = Scenario::new(config, w).map_err(|e| Error::ConfigKey {
            key: "region_wavelengths".into(),
            reason: e.to_string(),
        })?;
        let cfg = ExperimentConfig {
            region_wavelengths: w,
            ..config.clone()
        };
        for &snr in &config.snr_db_list {
            let per_trial: Vec<Vec<RegionRow>> = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let index = t + repeat * config.trials;
                    let seed = trial_seed(config.base_seed, index as u64);
                    let setup = TrialSetup::new(&cfg, &scenario, seed)?;
                    let obs = setup.observe(&cfg, snr)?;
                    config
                        .estimators
                        .iter()
                        .map(|&kind| {
                            let est = estimate(&cfg, kind, &scenario, &setup, &obs)?;
                            Ok(RegionRow {
                                region_wavelengths: w,
                                snr_db: snr,
                                estimator: kind,
                                trial: index,
                                capacity_bits: capacity(&est.h_hat, &setup.channel.h, snr)?,
                                seed,
                            })
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            for e in 0..config.estimators.len() {
                rows.extend(per_trial.iter().map(|r| r[e].clone()));
            }
        }
    }
    Ok(rows)
}

pub fn write_region_csv<W: Write>(rows: &[RegionRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REGION_HEADER)?;
    for r in rows {
        w.write_record([
            format_float(r.region_wavelengths),
            format_float(r.snr_db),
            r.estimator.label().to_string(),
            r.trial.to_string(),
            format_float(r.capacity_bits),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
