//! Spatially-sparse clustered (SSC) channel realizations.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::array::{steering_vector, ArrayGeometry};
use crate::error::{Error, Result};
use crate::rng::complex_normal;

/// One ray: complex gain and arrival angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SscParams {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    /// Standard deviation of the ray angles around their cluster center.
    pub angle_spread: f64,
}

impl Default for SscParams {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            rays_per_cluster: 5,
            angle_spread: 5f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: DVector<Complex64>,
    pub paths: Vec<PathComponent>,
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
}

impl ChannelRealization {
    /// Assembles `h = sqrt(N / (Nc Nr)) Σ α a(θ)` from explicit paths.
    pub fn from_paths(
        geometry: &ArrayGeometry,
        paths: Vec<PathComponent>,
        n_clusters: usize,
        rays_per_cluster: usize,
    ) -> Result<Self> {
        if n_clusters == 0 || rays_per_cluster == 0 {
            return Err(Error::Config(
                "need at least one cluster and one ray per cluster".into(),
            ));
        }
        if paths.len() != n_clusters * rays_per_cluster {
            return Err(Error::Contract(format!(
                "{} paths given for {n_clusters} clusters of {rays_per_cluster} rays",
                paths.len()
            )));
        }
        let h = synthesize(geometry, &paths)?;
        Ok(Self {
            h,
            paths,
            n_clusters,
            rays_per_cluster,
        })
    }
}

/// Superposes `paths` with the `sqrt(N / path_count)` normalization.
pub fn synthesize(geometry: &ArrayGeometry, paths: &[PathComponent]) -> Result<DVector<Complex64>> {
    let n = geometry.n_ports();
    let mut h = DVector::zeros(n);
    for p in paths {
        h.axpy(
            p.gain,
            &steering_vector(p.angle, geometry)?,
            Complex64::new(1.0, 0.0),
        );
    }
    if !paths.is_empty() {
        h *= Complex64::from((n as f64 / paths.len() as f64).sqrt());
    }
    Ok(h)
}

/// Draws a channel: cluster centers uniform on `[0, π]`, ray angles
/// Gaussian around the center (clipped to `[0, π]`), gains `CN(0, 1)`.
pub fn sample_ssc_channel<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    params: &SscParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if !(params.angle_spread.is_finite() && params.angle_spread >= 0.0) {
        return Err(Error::Config(format!(
            "angle spread must be non-negative, got {}",
            params.angle_spread
        )));
    }
    let spread = Normal::new(0.0, params.angle_spread)
        .map_err(|e| Error::Config(format!("angle spread: {e}")))?;
    let mut paths = Vec::with_capacity(params.n_clusters * params.rays_per_cluster);
    for _ in 0..params.n_clusters {
        let center = rng.random_range(0.0..=PI);
        for _ in 0..params.rays_per_cluster {
            let angle = (center + spread.sample(rng)).clamp(0.0, PI);
            let gain = complex_normal(rng, 1.0);
            paths.push(PathComponent { gain, angle });
        }
    }
    ChannelRealization::from_paths(geometry, paths, params.n_clusters, params.rays_per_cluster)
}
