//! Inflation-factor solvers.
//!
//! The transmit-side precoding ("inflation") matrix W trades off cancelling
//! the known interference against tracking the unknown fading. This module
//! provides:
//!
//! - [`perfect_csit_w`]: the closed-form optimum when H is known exactly;
//! - [`siso_optimal_w`]: scalar-channel line search on the exact objective;
//! - [`coordinate_descent_w`]: row-wise minimization of an expected
//!   Schur-complement surrogate of the average log-determinant objective;
//! - [`kkt_fixed_point_w`]: damped fixed-point iteration on the first-order
//!   stationarity condition of the same objective;
//! - [`brute_force_w`]: grid-search oracle for cross-checking the above.
//!
//! All Monte-Carlo solvers draw their fading batches from a
//! [`ConditionalSampler`] through splittable streams, so a solve is a pure
//! function of (config, sampler, solver config, stream).

mod brute;
mod descent;
mod fixed_point;
mod perfect;
mod siso;

pub use brute::{brute_force_w, GridSpec};
pub use descent::coordinate_descent_w;
pub use fixed_point::kkt_fixed_point_w;
pub use perfect::perfect_csit_w;
pub use siso::siso_optimal_w;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{ChannelConfig, ChannelError, ConditionalSampler};
use crate::numerics::{logdet, solve, CMatrix, NumericsError};
use crate::rate::{assemble_m, RateEstimate};
use crate::stats::mean_and_std_error;
use crate::stream::RandomStream;

/// Stream tag for per-iteration (or frozen) solver batches.
pub(crate) const TAG_BATCH: u64 = 11;
/// Stream tag for the held-out evaluation batch.
pub(crate) const TAG_EVAL: u64 = 12;

/// A validated t x t inflation factor.
#[derive(Clone, Debug, PartialEq)]
pub struct InflationFactor {
    w: CMatrix,
}

impl InflationFactor {
    /// Wrap a square, finite matrix.
    pub fn new(w: CMatrix) -> Result<Self, SolverError> {
        if !w.is_square() {
            return Err(SolverError::BadInflation(format!(
                "inflation factor must be square, got {}x{}",
                w.rows(),
                w.cols()
            )));
        }
        if !w.is_finite() {
            return Err(SolverError::BadInflation(
                "inflation factor has non-finite entries".into(),
            ));
        }
        Ok(Self { w })
    }

    pub fn identity(t: usize) -> Self {
        Self {
            w: CMatrix::identity(t),
        }
    }

    pub fn zero(t: usize) -> Self {
        Self {
            w: CMatrix::zeros(t, t),
        }
    }

    /// 1x1 inflation factor for scalar channels.
    pub fn from_scalar(w: Complex64) -> Self {
        Self {
            w: CMatrix::scalar(w),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    /// The scalar value when this is 1x1.
    pub fn as_scalar(&self) -> Option<Complex64> {
        (self.dim() == 1).then(|| self.w[(0, 0)])
    }
}

/// Knobs common to the iterative solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Sweep / iteration cap.
    pub max_iters: usize,
    /// Relative improvement below which progress counts as stalled.
    pub rel_tol: f64,
    /// Initial step damping for the fixed-point iteration, in (0, 1].
    pub damping: f64,
    /// Conditional-sample batch size per iteration (and for evaluation).
    pub batch: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            rel_tol: 1e-5,
            damping: 1.0,
            batch: 200,
        }
    }
}

impl SolverConfig {
    pub(crate) fn validate(&self) -> Result<(), SolverError> {
        if self.max_iters == 0 {
            return Err(SolverError::BadConfig("max_iters must be positive".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(SolverError::BadConfig("rel_tol must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolverError::BadConfig("damping must be in (0, 1]".into()));
        }
        if self.batch == 0 {
            return Err(SolverError::BadConfig("batch must be positive".into()));
        }
        Ok(())
    }
}

/// One exactly-solved row step of the surrogate objective: its value before
/// and after, on that step's frozen batch. `post <= pre` up to roundoff is
/// the per-step descent guarantee.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateStep {
    pub sweep: usize,
    pub row: usize,
    pub pre: f64,
    pub post: f64,
}

/// What a solver run produced.
#[derive(Clone, Debug)]
pub struct SolverResult {
    pub w: InflationFactor,
    /// Rate evaluated on the held-out batch, bits.
    pub rate: RateEstimate,
    /// Sweeps (coordinate descent) or applied updates (fixed point).
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the averaged stationarity defect at the returned W.
    pub residual: f64,
    /// Per-row-step surrogate values (coordinate descent only; empty
    /// otherwise).
    pub surrogate_steps: Vec<SurrogateStep>,
}

/// Errors from the solvers.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver requires a scalar channel (t = r = 1), got {t}x{r}")]
    NotSiso { t: usize, r: usize },
    #[error(
        "surrogate objective increased at sweep {sweep}, row {row}: {pre:.12e} -> {post:.12e}"
    )]
    NonDecreasingBound {
        sweep: usize,
        row: usize,
        pre: f64,
        post: f64,
    },
    #[error("fixed-point iteration diverged at iteration {iteration}: objective worsened by {worsening_bits:.3} bits")]
    Diverged {
        iteration: usize,
        worsening_bits: f64,
    },
    #[error("grid has {points} points, above the {cap} cap")]
    GridTooLarge { points: u128, cap: u128 },
    #[error("invalid inflation factor: {0}")]
    BadInflation(String),
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Mean of `log|M(W, H)|` over a fading batch — the empirical objective the
/// iterative solvers drive down.
pub(crate) fn mean_logdet_m(
    config: &ChannelConfig,
    w: &InflationFactor,
    samples: &[CMatrix],
) -> Result<f64, SolverError> {
    let mut acc = 0.0;
    for h in samples {
        let m = assemble_m(config, w, h).map_err(rate_to_solver)?;
        acc += m.logdet()?;
    }
    Ok(acc / samples.len() as f64)
}

/// Rate estimate (bits) of a fixed W over a fading batch.
pub fn empirical_rate(
    config: &ChannelConfig,
    w: &InflationFactor,
    samples: &[CMatrix],
) -> Result<RateEstimate, SolverError> {
    let ld_sx = logdet(config.sigma_x().base())?;
    let mut vs = Vec::with_capacity(samples.len());
    for h in samples {
        let m = assemble_m(config, w, h).map_err(rate_to_solver)?;
        vs.push(ld_sx + logdet(&m.bottom_right())? - m.logdet()?);
    }
    let to_bits = config.nats_to_bits();
    let (mean, se) = mean_and_std_error(&vs);
    Ok(RateEstimate {
        rate: mean * to_bits,
        std_error: se * to_bits,
        n_outer: 1,
        n_inner: samples.len(),
    })
}

/// Max-norm of the averaged first-order stationarity defect
/// `E[A1 W + A2^H H] Ss`, where `[A1; A2]` are the first t columns of
/// `M(W, H)^-1` split at row t. Zero exactly at a stationary point of the
/// batch objective, for any interference covariance.
pub fn stationarity_residual(
    config: &ChannelConfig,
    w: &InflationFactor,
    samples: &[CMatrix],
) -> Result<f64, SolverError> {
    let (e_a1, e_a2h) = expected_kkt_blocks(config, w, samples)?;
    let defect = &(&(&e_a1 * w.matrix()) + &e_a2h) * config.sigma_s().base();
    Ok(defect.max_abs())
}

/// Batch averages of the KKT blocks: `E[A1]` and `E[A2^H H]`.
pub(crate) fn expected_kkt_blocks(
    config: &ChannelConfig,
    w: &InflationFactor,
    samples: &[CMatrix],
) -> Result<(CMatrix, CMatrix), SolverError> {
    let (t, r) = (config.t(), config.r());
    let rhs = CMatrix::from_blocks_2x2(
        &CMatrix::identity(t),
        &CMatrix::zeros(t, 0),
        &CMatrix::zeros(r, t),
        &CMatrix::zeros(r, 0),
    )?;
    let mut e_a1 = CMatrix::zeros(t, t);
    let mut e_a2h = CMatrix::zeros(t, t);
    for h in samples {
        let m = assemble_m(config, w, h).map_err(rate_to_solver)?;
        let x = solve(m.full(), &rhs)?;
        let a1 = x.submatrix(0, t, 0, t);
        let a2 = x.submatrix(t, t + r, 0, t);
        e_a1 = &e_a1 + &a1;
        e_a2h = &e_a2h + &(&a2.adjoint() * h);
    }
    let inv_n = 1.0 / samples.len() as f64;
    Ok((e_a1.scale_re(inv_n), e_a2h.scale_re(inv_n)))
}

/// Early-exit result for a zero interference covariance: W is irrelevant,
/// so return W = 0 with an exact zero residual.
pub(crate) fn zero_interference_result(
    config: &ChannelConfig,
    sampler: &dyn ConditionalSampler,
    cfg: &SolverConfig,
    stream: RandomStream,
) -> Result<SolverResult, SolverError> {
    let eval = crate::channel::draw_batch(sampler, stream.child(TAG_EVAL), cfg.batch);
    let w = InflationFactor::zero(config.t());
    let rate = empirical_rate(config, &w, &eval)?;
    let residual = stationarity_residual(config, &w, &eval)?;
    Ok(SolverResult {
        w,
        rate,
        iterations: 0,
        converged: true,
        residual,
        surrogate_steps: vec![],
    })
}

/// Rank of the interference covariance and a basis of its positive
/// eigenspace, shared by the iterative solvers.
pub(crate) fn interference_support(config: &ChannelConfig) -> Result<Option<CMatrix>, SolverError> {
    let sd = crate::numerics::psd_spectral(config.sigma_s())?;
    let (vplus, lam) = sd.positive_subspace(1e-10);
    Ok((!lam.is_empty()).then_some(vplus))
}

fn rate_to_solver(e: crate::rate::RateError) -> SolverError {
    match e {
        crate::rate::RateError::Numerics(n) => SolverError::Numerics(n),
        crate::rate::RateError::Channel(c) => SolverError::Channel(c),
        other => SolverError::BadConfig(other.to_string()),
    }
}
