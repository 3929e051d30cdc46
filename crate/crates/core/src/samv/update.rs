use super::covariance::{assemble_covariance, check_gamma, check_snapshots};
use super::{EffectiveDictionary, EstimatorConfig, UpdateRule};
use crate::error::{Error, Result};
use crate::linalg::{adjoint_mul, all_finite, mul, real_trace, CMatrix, CVector, HermitianFactor};

/// Per-atom and trace quantities of one iteration, all read from the same
/// frozen `R`.
pub(crate) struct UpdateParts {
    /// `b_g^H R^{-1} b_g`
    capon: Vec<f64>,
    /// `b_g^H Υ b_g` with `Υ = R^{-1} R_K R^{-1}`
    fit: Vec<f64>,
    trace_inv: f64,
    trace_inv_sq: f64,
    trace_upsilon: f64,
}

fn parts_dense(r: &CMatrix, r_k: &CMatrix, dict: &EffectiveDictionary) -> Result<UpdateParts> {
    let r_inv = HermitianFactor::new(r)?.inverse();
    let b = dict.atoms();
    let z = &r_inv * b;
    let w = r_k * &z;
    let (capon, fit) = (0..b.ncols())
        .map(|g| {
            let zg = z.column(g);
            (b.column(g).dotc(&zg).re, zg.dotc(&w.column(g)).re)
        })
        .unzip();
    let upsilon = &r_inv * r_k * &r_inv;
    Ok(UpdateParts {
        capon,
        fit,
        trace_inv: real_trace(&r_inv),
        // R^{-1} is Hermitian, so tr(R^{-2}) is its squared Frobenius norm.
        trace_inv_sq: r_inv.norm_squared(),
        trace_upsilon: real_trace(&upsilon),
    })
}

/// Same quantities from the Cholesky factor `R = L L^H` and a square-root
/// factor `R_K = W W^H` (one column per weighted snapshot), without forming
/// `R^{-1} B`: with `X = L^{-1} B` and `U = L^{-1} W`,
/// `b^H R^{-1} b = ||x||^2` and `b^H Υ b = ||x^H U||^2`.
pub(crate) fn parts_factored(
    factor: &HermitianFactor,
    w: &CMatrix,
    dict: &EffectiveDictionary,
) -> UpdateParts {
    let l_inv = factor.lower_inverse();
    let x = mul(&l_inv, dict.atoms());
    let u = mul(&l_inv, w);
    let p = adjoint_mul(&x, &u);
    let capon = x.column_iter().map(|c| c.norm_squared()).collect();
    let fit = p.row_iter().map(|r| r.norm_squared()).collect();
    UpdateParts {
        capon,
        fit,
        trace_inv: l_inv.norm_squared(),
        trace_inv_sq: adjoint_mul(&l_inv, &l_inv).norm_squared(),
        trace_upsilon: adjoint_mul(&l_inv, &u).norm_squared(),
    }
}

pub(crate) fn apply_update(
    gamma: &[f64],
    sigma: f64,
    t: &UpdateParts,
    floor: f64,
    config: &EstimatorConfig,
) -> Result<(Vec<f64>, f64)> {
    let new_gamma: Vec<f64> = match config.update_rule {
        UpdateRule::Additive => gamma
            .iter()
            .zip(t.capon.iter().zip(&t.fit))
            .map(|(&g, (&c, &f))| (f / (c * c) + g - 1.0 / c).max(0.0))
            .collect(),
        UpdateRule::PowerFamily => {
            let rho = config.rho;
            gamma
                .iter()
                .zip(t.capon.iter().zip(&t.fit))
                .map(|(&g, (&c, &f))| {
                    if g == 0.0 {
                        0.0
                    } else {
                        (f / c.powf(2.0 * rho) * g.powf(2.0 * (1.0 - rho))).max(0.0)
                    }
                })
                .collect()
        }
    };
    let raw_sigma = (t.trace_upsilon + sigma * t.trace_inv_sq - t.trace_inv) / t.trace_inv_sq;

    if !all_finite(&new_gamma) || !raw_sigma.is_finite() {
        return Err(Error::numerical(
            "non-finite power or noise update (covariance inverse overflowed)",
        ));
    }
    Ok((new_gamma, raw_sigma.max(floor)))
}

/// One clamped fixed-point step of the grid powers and the noise variance.
///
/// The additive rule is
/// `γ'_g = max(0, b^H Υ b / (b^H R^{-1} b)^2 + γ_g - 1 / (b^H R^{-1} b))`;
/// the power-family rule is
/// `γ'_g = b^H Υ b / (b^H R^{-1} b)^{2ρ} · γ_g^{2(1-ρ)}`.
/// Both share
/// `σ' = max(floor, (tr Υ + σ tr R^{-2} - tr R^{-1}) / tr R^{-2})`.
pub fn samv_update(
    gamma: &[f64],
    sigma: f64,
    dict: &EffectiveDictionary,
    r_k: &CMatrix,
    config: &EstimatorConfig,
) -> Result<(Vec<f64>, f64)> {
    check_gamma(dict, gamma, sigma)?;
    let dim = dict.dim();
    if r_k.nrows() != dim || r_k.ncols() != dim {
        return Err(Error::Contract(format!(
            "sample covariance is {}x{}, expected {dim}x{dim}",
            r_k.nrows(),
            r_k.ncols()
        )));
    }
    let floor = config.sigma_floor.resolve(real_trace(r_k) / dim as f64);
    let r = assemble_covariance(dict, gamma, sigma)?;
    let parts = parts_dense(&r, r_k, dict)?;
    apply_update(gamma, sigma, &parts, floor, config)
}

/// Starting point: `γ_g = b_g^H R_K b_g / ||b_g||^4` and the per-sample
/// mean power `Σ_t ||y_t||^2 / (K M T)` as noise variance.
pub fn initialize(
    dict: &EffectiveDictionary,
    r_k: &CMatrix,
    snapshots: &[CVector],
) -> Result<(Vec<f64>, f64)> {
    let dim = dict.dim();
    check_snapshots(snapshots, dim)?;
    if r_k.nrows() != dim || r_k.ncols() != dim {
        return Err(Error::Contract(format!(
            "sample covariance is {}x{}, expected {dim}x{dim}",
            r_k.nrows(),
            r_k.ncols()
        )));
    }
    let b = dict.atoms();
    let projected = r_k * b;
    let gamma = (0..b.ncols())
        .map(|g| {
            let col = b.column(g);
            let norm_sq = col.norm_squared();
            if norm_sq == 0.0 {
                return Err(Error::Config(format!("atom {g} has zero norm")));
            }
            Ok(col.dotc(&projected.column(g)).re / (norm_sq * norm_sq))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = snapshots.iter().map(|y| y.norm_squared()).sum();
    Ok((gamma, total / (dim * snapshots.len()) as f64))
}
