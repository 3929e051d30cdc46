//! Reference estimators: per-port least squares with interpolation, and
//! orthogonal matching pursuit over the steering dictionary.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array::SteeringDictionary;
use crate::error::{Error, Result};
use crate::pilot::PilotObservation;
use crate::samv::EffectiveDictionary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Linear in port index, real and imaginary parts separately.
    #[default]
    Linear,
    /// Zero-order hold from the closest observed port (ties to the lower).
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub omp_max_atoms: usize,
    /// OMP stops once `||residual|| <= omp_residual_tol · ||ȳ||`.
    pub omp_residual_tol: f64,
    pub interpolation: Interpolation,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            omp_max_atoms: 15,
            omp_residual_tol: 1e-6,
            interpolation: Interpolation::Linear,
        }
    }
}

/// Averages every measurement of each observed port, then fills the gaps by
/// interpolation over port index with constant extrapolation at the ends.
pub fn ls_estimate(obs: &PilotObservation, config: &BaselineConfig) -> Result<DVector<Complex64>> {
    let n = obs.selector.n_ports();
    let mut sums = vec![Complex64::new(0.0, 0.0); n];
    let mut counts = vec![0usize; n];
    for y in &obs.snapshots {
        for (&port, v) in obs.selector.row_ports().iter().zip(y.iter()) {
            sums[port] += v;
            counts[port] += 1;
        }
    }
    let observed: Vec<usize> = (0..n).filter(|&p| counts[p] > 0).collect();
    if observed.is_empty() {
        return Err(Error::Contract("no port was observed".into()));
    }
    let values: Vec<Complex64> = observed
        .iter()
        .map(|&p| sums[p] / counts[p] as f64)
        .collect();

    let mut h = DVector::zeros(n);
    let mut next = 0; // index into `observed` of the first port >= p
    for p in 0..n {
        while next < observed.len() && observed[next] < p {
            next += 1;
        }
        h[p] = if next < observed.len() && observed[next] == p {
            values[next]
        } else if next == 0 {
            values[0]
        } else if next == observed.len() {
            values[observed.len() - 1]
        } else {
            let (lo, hi) = (observed[next - 1], observed[next]);
            let (vlo, vhi) = (values[next - 1], values[next]);
            match config.interpolation {
                Interpolation::Linear => {
                    let t = (p - lo) as f64 / (hi - lo) as f64;
                    vlo + (vhi - vlo) * t
                }
                Interpolation::Nearest => {
                    if p - lo <= hi - p {
                        vlo
                    } else {
                        vhi
                    }
                }
            }
        };
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct OmpEstimate {
    pub h: DVector<Complex64>,
    /// Selected grid atoms in selection order.
    pub support: Vec<usize>,
    pub coefficients: Vec<Complex64>,
    /// Residual norm before the first selection and after each one.
    pub residual_norms: Vec<f64>,
    /// Set when a selected atom was linearly dependent on the support and
    /// got dropped.
    pub rank_deficient: bool,
}

/// Least squares on the chosen columns via QR. `None` when the last column
/// is numerically dependent on the others.
fn solve_support(
    columns: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
) -> Option<DVector<Complex64>> {
    let k = columns.ncols();
    let qr = columns.clone().qr();
    let r = qr.r();
    let scale = columns.column(k - 1).norm();
    if r[(k - 1, k - 1)].norm() <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return None;
    }
    let rhs = qr.q().adjoint() * y;
    r.solve_upper_triangular(&rhs)
}

/// Greedy pursuit on the snapshot mean against the effective atoms, then
/// `ĥ = A x̂` through the full dictionary.
pub fn omp_estimate(
    obs: &PilotObservation,
    effective: &EffectiveDictionary,
    full: &SteeringDictionary,
    config: &BaselineConfig,
) -> Result<OmpEstimate> {
    let b = effective.atoms();
    if full.grid_size() != b.ncols() {
        return Err(Error::Contract(format!(
            "full dictionary has {} atoms, effective has {}",
            full.grid_size(),
            b.ncols()
        )));
    }
    if config.omp_max_atoms == 0 {
        return Err(Error::Config("omp_max_atoms must be at least 1".into()));
    }
    let y = obs.mean_snapshot();
    if y.len() != b.nrows() {
        return Err(Error::Contract(format!(
            "observation length {} but dictionary dimension {}",
            y.len(),
            b.nrows()
        )));
    }
    let norms: Vec<f64> = b.column_iter().map(|c| c.norm()).collect();
    let stop = config.omp_residual_tol * y.norm();

    let mut support: Vec<usize> = Vec::new();
    let mut coefficients = DVector::zeros(0);
    let mut residual = y.clone();
    let mut residual_norms = vec![residual.norm()];
    let mut rank_deficient = false;

    while support.len() < config.omp_max_atoms.min(b.ncols()) && residual.norm() > stop {
        let correlations = b.adjoint() * &residual;
        let best = (0..b.ncols())
            .filter(|g| !support.contains(g) && norms[*g] > 0.0)
            .map(|g| (g, correlations[g].norm() / norms[g]))
            .fold(None, |acc: Option<(usize, f64)>, (g, c)| match acc {
                Some((_, best)) if best >= c => acc,
                _ => Some((g, c)),
            });
        let Some((g, corr)) = best else { break };
        if corr == 0.0 {
            break;
        }
        support.push(g);
        let columns = b.select_columns(&support);
        match solve_support(&columns, &y) {
            Some(x) => {
                residual = &y - &columns * &x;
                coefficients = x;
                residual_norms.push(residual.norm());
            }
            None => {
                support.pop();
                rank_deficient = true;
                break;
            }
        }
    }

    let h = if support.is_empty() {
        DVector::zeros(full.geometry().n_ports())
    } else {
        full.atoms().select_columns(&support) * &coefficients
    };
    Ok(OmpEstimate {
        h,
        support,
        coefficients: coefficients.iter().copied().collect(),
        residual_norms,
        rank_deficient,
    })
}
