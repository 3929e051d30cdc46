//! Linear fluid-antenna port geometry and steering dictionaries.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `N` ports spread uniformly over a linear region of `W` wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    n_ports: usize,
    region_size_wavelengths: f64,
    port_spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn new(n_ports: usize, region_size_wavelengths: f64) -> Result<Self> {
        if n_ports < 2 {
            return Err(Error::Config(format!(
                "a fluid antenna needs at least 2 ports, got {n_ports}"
            )));
        }
        if !(region_size_wavelengths.is_finite() && region_size_wavelengths > 0.0) {
            return Err(Error::Config(format!(
                "region size must be positive, got {region_size_wavelengths}"
            )));
        }
        Ok(Self {
            n_ports,
            region_size_wavelengths,
            port_spacing_wavelengths: region_size_wavelengths / (n_ports - 1) as f64,
        })
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn region_size_wavelengths(&self) -> f64 {
        self.region_size_wavelengths
    }

    /// Port spacing `d/λ = W/(N-1)`.
    pub fn port_spacing_wavelengths(&self) -> f64 {
        self.port_spacing_wavelengths
    }

    /// Smallest port-index gap whose physical separation is at least half a
    /// wavelength, i.e. `ceil((N-1)/(2W))`.
    pub fn min_decoupled_gap(&self) -> usize {
        let exact = (self.n_ports - 1) as f64 / (2.0 * self.region_size_wavelengths);
        (exact - 1e-9).ceil().max(1.0) as usize
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "steering angle {theta} rad outside [0, pi]"
        )))
    }
}

fn steering_entries(theta: f64, geometry: &ArrayGeometry) -> impl Iterator<Item = Complex64> {
    let n = geometry.n_ports;
    let norm = 1.0 / (n as f64).sqrt();
    let phase_step = -2.0 * PI * geometry.port_spacing_wavelengths * theta.cos();
    (0..n).map(move |k| Complex64::from_polar(norm, phase_step * k as f64))
}

/// Unit-norm response of the port array to a plane wave from `theta`:
/// entry `k` is `exp(-j 2π (d/λ) k cos θ) / √N`.
pub fn steering_vector(theta: f64, geometry: &ArrayGeometry) -> Result<DVector<Complex64>> {
    check_angle(theta)?;
    Ok(DVector::from_iterator(
        geometry.n_ports,
        steering_entries(theta, geometry),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridKind {
    /// Angles equally spaced over `[0, π]`.
    UniformAngle,
    /// `cos θ` equally spaced over `[-1, 1]`.
    #[default]
    UniformCosine,
}

/// Steering vectors over an angular grid, one atom per column.
#[derive(Debug, Clone)]
pub struct SteeringDictionary {
    geometry: ArrayGeometry,
    grid_angles: Vec<f64>,
    atoms: DMatrix<Complex64>,
}

impl SteeringDictionary {
    /// Dictionary over an explicit, strictly increasing angle grid.
    pub fn from_angles(geometry: ArrayGeometry, grid_angles: Vec<f64>) -> Result<Self> {
        if grid_angles.is_empty() {
            return Err(Error::Config("angle grid is empty".into()));
        }
        for &theta in &grid_angles {
            check_angle(theta)?;
        }
        if grid_angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "grid angles must be strictly increasing".into(),
            ));
        }
        let n = geometry.n_ports;
        let mut atoms = DMatrix::zeros(n, grid_angles.len());
        for (g, &theta) in grid_angles.iter().enumerate() {
            for (k, v) in steering_entries(theta, &geometry).enumerate() {
                atoms[(k, g)] = v;
            }
        }
        Ok(Self {
            geometry,
            grid_angles,
            atoms,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn grid_angles(&self) -> &[f64] {
        &self.grid_angles
    }

    /// `N x G` atom matrix.
    pub fn atoms(&self) -> &DMatrix<Complex64> {
        &self.atoms
    }

    pub fn grid_size(&self) -> usize {
        self.grid_angles.len()
    }

    pub fn atom(&self, g: usize) -> DVector<Complex64> {
        self.atoms.column(g).into_owned()
    }
}

pub fn build_dictionary(
    geometry: &ArrayGeometry,
    grid_size: usize,
    kind: GridKind,
) -> Result<SteeringDictionary> {
    if grid_size < 2 {
        return Err(Error::Config(format!(
            "angle grid needs at least 2 points, got {grid_size}"
        )));
    }
    let last = (grid_size - 1) as f64;
    let angles = (0..grid_size)
        .map(|g| match kind {
            GridKind::UniformAngle => PI * g as f64 / last,
            // θ increasing means cos θ decreasing from 1 to -1.
            GridKind::UniformCosine => (1.0 - 2.0 * g as f64 / last).clamp(-1.0, 1.0).acos(),
        })
        .collect();
    SteeringDictionary::from_angles(*geometry, angles)
}
