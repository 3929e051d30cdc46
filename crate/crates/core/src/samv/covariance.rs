use nalgebra::DMatrix;
use num_complex::Complex64;

use super::WeightFunction;
use crate::array::SteeringDictionary;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, mul_adjoint, CMatrix, CVector, HermitianFactor};
use crate::schedule::StackedSelector;

/// Steering atoms seen through the stacked selector: column `g` is
/// `b_g = S a(θ_g)`, living in the `K M`-dimensional observation space.
#[derive(Debug, Clone)]
pub struct EffectiveDictionary {
    atoms: CMatrix,
    row_ports: Option<Vec<usize>>,
}

impl EffectiveDictionary {
    pub fn new(full: &SteeringDictionary, selector: &StackedSelector) -> Result<Self> {
        if full.geometry().n_ports() != selector.n_ports() {
            return Err(Error::Contract(format!(
                "dictionary has {} ports, selector expects {}",
                full.geometry().n_ports(),
                selector.n_ports()
            )));
        }
        let rows = selector.row_ports();
        let a = full.atoms();
        let atoms = DMatrix::from_fn(rows.len(), a.ncols(), |r, g| a[(rows[r], g)]);
        Ok(Self {
            atoms,
            row_ports: Some(rows.to_vec()),
        })
    }

    /// Wraps an arbitrary atom matrix (observation dimension x grid size).
    pub fn from_atoms(atoms: CMatrix) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::Contract("effective dictionary is empty".into()));
        }
        Ok(Self {
            atoms,
            row_ports: None,
        })
    }

    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }

    /// Observation dimension `K M`.
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn grid_size(&self) -> usize {
        self.atoms.ncols()
    }

    /// Port read by each row, when built from a selector.
    pub fn row_ports(&self) -> Option<&[usize]> {
        self.row_ports.as_deref()
    }
}

pub(crate) fn check_gamma(dict: &EffectiveDictionary, gamma: &[f64], sigma: f64) -> Result<()> {
    if gamma.len() != dict.grid_size() {
        return Err(Error::Contract(format!(
            "{} powers for {} atoms",
            gamma.len(),
            dict.grid_size()
        )));
    }
    if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::Contract(
            "grid powers must be finite and non-negative".into(),
        ));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Contract(format!(
            "noise variance must be finite and non-negative, got {sigma}"
        )));
    }
    Ok(())
}

/// `R = Σ_g γ_g b_g b_g^H + σ I`.
pub fn assemble_covariance(
    dict: &EffectiveDictionary,
    gamma: &[f64],
    sigma: f64,
) -> Result<CMatrix> {
    check_gamma(dict, gamma, sigma)?;
    // Only active atoms contribute; the fitted spectra are sparse.
    let active: Vec<usize> = (0..gamma.len()).filter(|&g| gamma[g] > 0.0).collect();
    let b = dict.atoms().select_columns(&active);
    let mut weighted = b.clone();
    for (mut col, &g) in weighted.column_iter_mut().zip(&active) {
        col *= Complex64::from(gamma[g]);
    }
    let mut r = hermitian_part(&mul_adjoint(&weighted, &b));
    for i in 0..r.nrows() {
        r[(i, i)] += Complex64::from(sigma);
    }
    Ok(r)
}

pub(crate) fn check_snapshots(snapshots: &[CVector], dim: usize) -> Result<()> {
    if snapshots.is_empty() {
        return Err(Error::Contract("at least one snapshot is required".into()));
    }
    if let Some(y) = snapshots.iter().find(|y| y.len() != dim) {
        return Err(Error::Contract(format!(
            "snapshot of length {} in a {dim}-dimensional observation space",
            y.len()
        )));
    }
    Ok(())
}

/// Weighted sample covariance `(1/T) Σ κ_t y_t y_t^H` with
/// `κ_t = φ(y_t^H R^{-1} y_t)`. Gaussian weights never touch `r_current`.
pub fn robust_sample_covariance(
    snapshots: &[CVector],
    r_current: &CMatrix,
    weight: WeightFunction,
) -> Result<CMatrix> {
    let dim = r_current.nrows();
    check_snapshots(snapshots, dim)?;
    let weights: Vec<f64> = match weight {
        WeightFunction::Gaussian => vec![1.0; snapshots.len()],
        _ => {
            let factor = HermitianFactor::new(r_current).map_err(|_| {
                Error::numerical("robust covariance: current covariance is singular")
            })?;
            snapshots
                .iter()
                .map(|y| {
                    let t = y.dotc(&factor.solve(y)).re;
                    // Zero snapshots contribute nothing whatever their weight.
                    if t > 0.0 {
                        weight.weight(t, dim)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };
    let mut r_k = DMatrix::zeros(dim, dim);
    for (y, &kappa) in snapshots.iter().zip(&weights) {
        r_k.ger(
            Complex64::from(kappa),
            y,
            &y.conjugate(),
            Complex64::new(1.0, 0.0),
        );
    }
    r_k /= Complex64::from(snapshots.len() as f64);
    Ok(hermitian_part(&r_k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> CMatrix {
        DMatrix::from_element(1, 1, Complex64::from(v))
    }

    fn random_dict(rng: &mut ChaCha8Rng, dim: usize, g: usize) -> EffectiveDictionary {
        EffectiveDictionary::from_atoms(DMatrix::from_fn(dim, g, |_, _| complex_normal(rng, 1.0)))
            .unwrap()
    }

    #[test]
    fn zero_powers_give_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_dict(&mut rng, 5, 7);
        let r = assemble_covariance(&d, &[0.0; 7], 0.3).unwrap();
        assert_eq!(r, CMatrix::identity(5, 5) * Complex64::from(0.3));
    }

    #[test]
    fn scalar_covariance() {
        let d = EffectiveDictionary::from_atoms(scalar(1.0)).unwrap();
        assert_eq!(assemble_covariance(&d, &[1.0], 1.0).unwrap(), scalar(2.0));
    }

    #[test]
    fn covariance_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let d = random_dict(&mut rng, 8, 12);
            let gamma: Vec<f64> = (0..12).map(|i| (i % 3) as f64 * 0.7).collect();
            let r = assemble_covariance(&d, &gamma, 0.1).unwrap();
            assert!((&r - r.adjoint()).norm() < 1e-12 * r.norm());
        }
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let d = EffectiveDictionary::from_atoms(scalar(1.0)).unwrap();
        assert!(matches!(
            assemble_covariance(&d, &[1.0, 2.0], 1.0),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            assemble_covariance(&d, &[-1.0], 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn gaussian_single_snapshot_is_outer_product() {
        let y = CVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1)]);
        let r_k = robust_sample_covariance(
            std::slice::from_ref(&y),
            &CMatrix::identity(2, 2),
            WeightFunction::Gaussian,
        )
        .unwrap();
        assert!((r_k - &y * y.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn tyler_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ys: Vec<CVector> = (0..6)
            .map(|_| CVector::from_fn(4, |_, _| complex_normal(&mut rng, 1.0)))
            .collect();
        let scaled: Vec<CVector> = ys.iter().map(|y| y * Complex64::from(10.0)).collect();
        let r = CMatrix::identity(4, 4) * Complex64::from(2.0);
        let a = robust_sample_covariance(&ys, &r, WeightFunction::Tyler).unwrap();
        let b = robust_sample_covariance(&scaled, &r, WeightFunction::Tyler).unwrap();
        assert!((&a - &b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn huber_caps_large_snapshots() {
        let small = CVector::from_vec(vec![Complex64::new(0.1, 0.0)]);
        let large = CVector::from_vec(vec![Complex64::new(10.0, 0.0)]);
        let r = scalar(1.0);
        let w = WeightFunction::Huber { c: 1.0 };
        let a = robust_sample_covariance(std::slice::from_ref(&small), &r, w).unwrap();
        assert!((a[(0, 0)].re - 0.01).abs() < 1e-15);
        // t = 100 > c, so κ = c / t and κ |y|^2 = c.
        let b = robust_sample_covariance(std::slice::from_ref(&large), &r, w).unwrap();
        assert!((b[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_current_covariance_is_numerical_error() {
        let y = CVector::from_vec(vec![Complex64::new(1.0, 0.0); 2]);
        let r = CMatrix::zeros(2, 2);
        let err = robust_sample_covariance(&[y], &r, WeightFunction::Tyler).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn sample_covariance_converges() {
        // Draw from CN(0, R0) via R0 = L L^H and compare at T = 10^4.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = DMatrix::from_fn(4, 4, |i, j| {
            if j <= i {
                Complex64::new(1.0 / (1 + i + j) as f64, 0.3 * (i as f64 - j as f64))
            } else {
                Complex64::from(0.0)
            }
        });
        let r0 = &l * l.adjoint();
        let ys: Vec<CVector> = (0..10_000)
            .map(|_| &l * CVector::from_fn(4, |_, _| complex_normal(&mut rng, 1.0)))
            .collect();
        let r_k = robust_sample_covariance(&ys, &CMatrix::identity(4, 4), WeightFunction::Gaussian)
            .unwrap();
        assert!((&r_k - &r0).norm() / r0.norm() < 0.05);
    }

    #[test]
    fn effective_atoms_are_selected_rows() {
        use crate::array::{build_dictionary, ArrayGeometry, GridKind};
        use crate::schedule::SwitchSchedule;
        let g = ArrayGeometry::new(6, 2.0).unwrap();
        let full = build_dictionary(&g, 12, GridKind::UniformCosine).unwrap();
        let sched = SwitchSchedule::new(6, vec![vec![4, 1], vec![0, 5]]).unwrap();
        let eff = EffectiveDictionary::new(&full, &sched.stack()).unwrap();
        assert_eq!(eff.dim(), 4);
        for gidx in 0..12 {
            for (r, &p) in [4, 1, 0, 5].iter().enumerate() {
                assert_eq!(eff.atoms()[(r, gidx)], full.atoms()[(p, gidx)]);
            }
        }
    }
}
