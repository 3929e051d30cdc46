//! Each additive coordinate step minimizes the single-coordinate likelihood:
//! a dense scan never finds a lower value.

mod common;

use common::*;
use fasche::{
    negative_log_likelihood, robust_sample_covariance, samv_update, EstimatorConfig, WeightFunction,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_form_beats_grid_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut interior = 0;
    for _ in 0..20 {
        let inst = Instance::random(&mut rng, 6, 5);
        let dim = inst.dict.dim();
        let (_, ys) = sample_covariance(&mut rng, dim, 8);
        let r_k =
            robust_sample_covariance(&ys, &CMatrix::identity(dim, dim), WeightFunction::Gaussian)
                .unwrap();
        let (gamma, _) = samv_update(
            &inst.gamma,
            inst.sigma,
            &inst.dict,
            &r_k,
            &EstimatorConfig::default(),
        )
        .unwrap();
        for (g, &best) in gamma.iter().enumerate() {
            if best <= 0.0 {
                continue;
            }
            interior += 1;
            let nll = |p: f64| {
                let mut trial = inst.gamma.clone();
                trial[g] = p;
                negative_log_likelihood(&trial, inst.sigma, &inst.dict, &ys).unwrap()
            };
            let at_best = nll(best);
            let scan = (0..1000)
                .map(|i| nll(10.0 * best * i as f64 / 999.0))
                .fold(f64::INFINITY, f64::min);
            assert!(
                at_best <= scan + 1e-9 * scan.abs(),
                "g={g}: {at_best} > {scan}"
            );
        }
    }
    assert!(interior >= 20, "only {interior} interior coordinates");
}
