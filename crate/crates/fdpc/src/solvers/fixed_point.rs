//! Damped fixed-point iteration on the stationarity condition of
//! `E log|M(W, H)|`.
//!
//! Differentiating the objective in W and setting the gradient to zero
//! yields `(E[A1] W + E[A2^H H]) Ss = 0`, where `[A1; A2]` are the first t
//! columns of `M^-1` split at row t. On the support of Ss this rearranges
//! to the fixed-point map `G(W) = -E[A1]^-1 E[A2^H H]`, so a stationary W
//! satisfies `W = G(W)`. The iteration applies `W <- (1-g) W + g G(W)` with
//! a step size `g` that backtracks (down to a floor of 1/8) whenever the
//! frozen-batch objective would rise.
//!
//! One batch is frozen for the whole run so the map being iterated is a
//! fixed deterministic function; convergence is declared when the
//! fixed-point gap `max|G(W) - W|` drops below `rel_tol` relative to the
//! size of W. The reported rate comes from a held-out evaluation batch,
//! while the residual is measured on the run batch the iteration actually
//! solved.

use crate::channel::{draw_batch, ChannelConfig, ConditionalSampler};
use crate::numerics::inverse;
use crate::solvers::{
    empirical_rate, expected_kkt_blocks, interference_support, mean_logdet_m,
    stationarity_residual, zero_interference_result, InflationFactor, SolverConfig, SolverError,
    SolverResult, TAG_BATCH, TAG_EVAL,
};
use crate::stream::RandomStream;

/// Minimum damping factor the backtracking line search may reach. Steps at
/// the floor are accepted even if the frozen-batch objective ticks up, so a
/// noisy plateau cannot deadlock the run; sustained worsening is caught by
/// the divergence guard instead.
const DAMPING_FLOOR: f64 = 0.125;
/// Accumulated worsening over the best objective seen, in bits, that turns
/// a run into [`SolverError::Diverged`].
const DIVERGENCE_BITS: f64 = 0.5;

/// Iterate the stationarity map `W <- (1-g) W + g G(W)` from W = I on a
/// frozen batch. Returns the final W with its held-out rate, the run-batch
/// residual, and the damped iteration count.
pub fn kkt_fixed_point_w(
    config: &ChannelConfig,
    sampler: &dyn ConditionalSampler,
    cfg: &SolverConfig,
    stream: RandomStream,
) -> Result<SolverResult, SolverError> {
    cfg.validate()?;
    let (t, r) = (config.t(), config.r());
    if sampler.dims() != (r, t) {
        return Err(SolverError::BadConfig(format!(
            "sampler produces {:?} matrices for a {r}x{t} channel",
            sampler.dims()
        )));
    }
    if interference_support(config)?.is_none() {
        return zero_interference_result(config, sampler, cfg, stream);
    }
    let batch = draw_batch(sampler, stream.child(TAG_BATCH), cfg.batch);
    let eval = draw_batch(sampler, stream.child(TAG_EVAL), cfg.batch);
    let to_bits = config.nats_to_bits();
    let mut w = InflationFactor::identity(t);
    let mut f_cur = mean_logdet_m(config, &w, &batch)?;
    let mut f_best = f_cur;
    let mut converged = false;
    let mut iterations = 0usize;
    for iteration in 1..=cfg.max_iters {
        let (e_a1, e_a2h) = expected_kkt_blocks(config, &w, &batch)?;
        let g = (&inverse(&e_a1)? * &e_a2h).scale_re(-1.0);
        let gap = (&g - w.matrix()).max_abs();
        if gap <= cfg.rel_tol * w.matrix().max_abs().max(1.0) {
            converged = true;
            break;
        }
        // Fresh backtracking line search each iteration: start at the
        // configured damping, halve while the frozen-batch objective would
        // rise, and accept unconditionally at the floor.
        let mut gamma = cfg.damping.min(1.0);
        let (cand, f_cand) = loop {
            let step = &w.matrix().scale_re(1.0 - gamma) + &g.scale_re(gamma);
            let cand = InflationFactor::new(step)?;
            let f_cand = mean_logdet_m(config, &cand, &batch)?;
            if f_cand <= f_cur + 1e-12 * f_cur.abs().max(1.0) || gamma <= DAMPING_FLOOR {
                break (cand, f_cand);
            }
            gamma = (0.5 * gamma).max(DAMPING_FLOOR);
        };
        iterations = iteration;
        w = cand;
        f_cur = f_cand;
        f_best = f_best.min(f_cur);
        let worsening_bits = (f_cur - f_best) * to_bits;
        if worsening_bits > DIVERGENCE_BITS {
            return Err(SolverError::Diverged {
                iteration,
                worsening_bits,
            });
        }
    }
    let rate = empirical_rate(config, &w, &eval)?;
    let residual = stationarity_residual(config, &w, &batch)?;
    Ok(SolverResult {
        w,
        rate,
        iterations,
        converged,
        residual,
        surrogate_steps: Vec::new(),
    })
}
