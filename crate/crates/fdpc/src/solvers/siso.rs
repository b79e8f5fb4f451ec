//! Scalar-channel solver: one-dimensional search on the exact objective.
//!
//! For t = r = 1 with real scalar W the average log-determinant objective
//! per fading draw h is `log(|h|^2 P Q (1-W)^2 + W^2 Q N + P N)`, a smooth
//! function of W whose minimizer lies in [0, 1] (W = 0 treats interference
//! as noise, W = 1 cancels it outright). A 1e-3 grid pass brackets the
//! minimum and golden-section refines it to 1e-6.

use crate::channel::{draw_batch, ChannelConfig, ConditionalSampler};
use crate::solvers::{InflationFactor, SolverError, TAG_BATCH};
use crate::stats::golden_section_min;
use crate::stream::RandomStream;

/// Grid spacing of the coarse pass over [0, 1].
const GRID_STEP: f64 = 1e-3;
/// Width tolerance of the golden-section refinement.
const REFINE_TOL: f64 = 1e-6;

/// Minimize the exact scalar objective over real W in [0, 1].
pub fn siso_optimal_w(
    config: &ChannelConfig,
    sampler: &dyn ConditionalSampler,
    n_samples: usize,
    stream: RandomStream,
) -> Result<InflationFactor, SolverError> {
    let (t, r) = (config.t(), config.r());
    if t != 1 || r != 1 {
        return Err(SolverError::NotSiso { t, r });
    }
    if n_samples == 0 {
        return Err(SolverError::BadConfig("n_samples must be positive".into()));
    }
    let p = config.sigma_x().base()[(0, 0)].re;
    let q = config.sigma_s().base()[(0, 0)].re;
    let n = config.sigma_z().base()[(0, 0)].re;
    let batch = draw_batch(sampler, stream.child(TAG_BATCH), n_samples);
    let h2: Vec<f64> = batch.iter().map(|h| h[(0, 0)].norm_sqr()).collect();
    let objective = |w: f64| {
        h2.iter()
            .map(|&g| (g * p * q * (1.0 - w) * (1.0 - w) + w * w * q * n + p * n).ln())
            .sum::<f64>()
            / h2.len() as f64
    };
    let steps = (1.0 / GRID_STEP).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let w = i as f64 * GRID_STEP;
        let v = objective(w);
        if v < best.0 {
            best = (v, w);
        }
    }
    let lo = (best.1 - GRID_STEP).max(0.0);
    let hi = (best.1 + GRID_STEP).min(1.0);
    let w = golden_section_min(objective, lo, hi, REFINE_TOL).clamp(0.0, 1.0);
    Ok(InflationFactor::from_scalar(w.into()))
}
