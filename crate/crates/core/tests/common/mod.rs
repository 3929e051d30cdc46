#![allow(dead_code)]

use fasche::rng::complex_normal;
use fasche::{Complex64, DMatrix, DVector, EffectiveDictionary};
use rand::Rng;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Small random covariance-model instance.
pub struct Instance {
    pub dict: EffectiveDictionary,
    pub gamma: Vec<f64>,
    pub sigma: f64,
}

impl Instance {
    pub fn random<R: Rng>(rng: &mut R, max_dim: usize, max_grid: usize) -> Self {
        let dim = rng.random_range(2..=max_dim);
        let grid = rng.random_range(2..=max_grid);
        let atoms = CMatrix::from_fn(dim, grid, |_, _| complex_normal(rng, 1.0));
        let gamma = (0..grid).map(|_| rng.random_range(0.05..3.0)).collect();
        Self {
            dict: EffectiveDictionary::from_atoms(atoms).unwrap(),
            gamma,
            sigma: rng.random_range(0.1..2.0),
        }
    }

    pub fn atom(&self, g: usize) -> CVector {
        self.dict.atoms().column(g).into_owned()
    }

    /// `R` summed term by term, independent of the crate's assembly.
    pub fn covariance(&self) -> CMatrix {
        let dim = self.dict.dim();
        let mut r = CMatrix::identity(dim, dim) * Complex64::from(self.sigma);
        for (g, &p) in self.gamma.iter().enumerate() {
            let b = self.atom(g);
            r += &b * b.adjoint() * Complex64::from(p);
        }
        r
    }
}

pub fn inverse(m: &CMatrix) -> CMatrix {
    m.clone().try_inverse().expect("invertible")
}

/// `x^H M y`, real part.
pub fn form(x: &CVector, m: &CMatrix, y: &CVector) -> f64 {
    x.dotc(&(m * y)).re
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn matrix_rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

/// Random Hermitian positive-definite `(1/T) Σ y y^H + δ I` with its snapshots.
pub fn sample_covariance<R: Rng>(rng: &mut R, dim: usize, t: usize) -> (CMatrix, Vec<CVector>) {
    let ys: Vec<CVector> = (0..t)
        .map(|_| CVector::from_fn(dim, |_, _| complex_normal(rng, 1.0)))
        .collect();
    let mut r = CMatrix::zeros(dim, dim);
    for y in &ys {
        r += y * y.adjoint();
    }
    (r / Complex64::from(t as f64), ys)
}
