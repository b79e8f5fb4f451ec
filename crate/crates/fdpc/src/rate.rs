//! Achievable-rate Monte Carlo for dirty-paper coding over the fading
//! channel, together with the no-interference upper bound.
//!
//! The per-realization rate integrand is built from the block matrix
//!
//! ```text
//! M(W, H) = [ Sx + W Ss W^H        (Sx + W Ss) H^H      ]
//!           [ H (Sx + Ss W^H)      H (Sx + Ss) H^H + Sz ]
//! ```
//!
//! (Sx, Ss, Sz the input/interference/noise covariances, W the t x t
//! inflation factor): the integrand in nats is
//! `log|Sx| + log|H (Sx+Ss) H^H + Sz| - log|M(W, H)|`, averaged over the
//! fading conditional given what the transmitter was told, and over the
//! CSIT realization itself. The no-interference benchmark replaces the whole
//! expression by `log|Sz + H Sx H^H| - log|Sz|`. Both estimators share the
//! same H draws (common random numbers) so their difference is far less
//! noisy than either value.
//!
//! Estimates are reported in bits, including the convention factor of the
//! signal alphabet (see [`ChannelConfig::nats_to_bits`]).

use rayon::prelude::*;

use crate::channel::{
    quantize, sample_conditional, sample_fading, ChannelConfig, ChannelError, CsitModel,
    FadingKind, QuantizedCsit,
};
use crate::numerics::{logdet, CMatrix, NumericsError};
use crate::solvers::{perfect_csit_w, InflationFactor, SolverError};
use crate::stats::mean_and_std_error;
use crate::stream::RandomStream;
use thiserror::Error;

/// Stream tag for CSIT-realization (outer) fading draws.
const TAG_OUTER: u64 = 1;
/// Stream tag for conditional (inner) fading draws.
const TAG_INNER: u64 = 2;

/// Errors from rate estimation.
#[derive(Debug, Error)]
pub enum RateError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("inflation policy failed: {0}")]
    Policy(#[from] SolverError),
    #[error("{0}")]
    Unsupported(String),
}

/// Sample sizes for the two-level Monte Carlo: `n_outer` CSIT realizations,
/// `n_inner` conditional draws each. Degenerate CSIT models collapse one of
/// the levels but keep the total draw count `n_outer * n_inner` (no CSIT)
/// or `n_outer` (perfect CSIT, where the conditional is a point).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarloConfig {
    pub n_outer: usize,
    pub n_inner: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_outer: 500,
            n_inner: 200,
        }
    }
}

impl MonteCarloConfig {
    pub fn new(n_outer: usize, n_inner: usize) -> Self {
        Self { n_outer, n_inner }
    }
}

/// A Monte-Carlo rate estimate in bits with its standard error and the
/// sample layout that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    /// Estimated rate, bits per channel use (complex-dimension convention).
    pub rate: f64,
    /// Standard error of the estimate, same units.
    pub std_error: f64,
    /// Outer cells actually used.
    pub n_outer: usize,
    /// Conditional draws per cell actually used.
    pub n_inner: usize,
}

/// Achievable rate, matching upper bound, and their gap (all bits).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaRReport {
    pub rate: RateEstimate,
    pub bound: RateEstimate,
    /// `bound.rate - rate.rate` from the same sample paths.
    pub delta: f64,
}

/// What the transmitter learned about H for one outer realization.
pub enum CsitRealization<'a> {
    /// Perfect CSIT: the exact matrix.
    Exact(&'a CMatrix),
    /// Quantized CSIT: the cell indices (and reconstruction).
    Cells(&'a QuantizedCsit),
    /// No CSIT.
    Absent,
}

/// Chooses the inflation factor from whatever the transmitter knows.
///
/// Implementations must be deterministic given the realization (the rate
/// estimator may invoke them from worker threads in any order).
pub trait WPolicy: Sync {
    fn inflation_for(
        &self,
        config: &ChannelConfig,
        csit: &CsitRealization<'_>,
    ) -> Result<InflationFactor, RateError>;
}

/// Uses one fixed inflation factor for every realization.
pub struct ConstantPolicy(pub InflationFactor);

impl WPolicy for ConstantPolicy {
    fn inflation_for(
        &self,
        _config: &ChannelConfig,
        _csit: &CsitRealization<'_>,
    ) -> Result<InflationFactor, RateError> {
        Ok(self.0.clone())
    }
}

/// Applies the closed-form optimum for exact H; rejects anything less.
pub struct PerfectCsitPolicy;

impl WPolicy for PerfectCsitPolicy {
    fn inflation_for(
        &self,
        config: &ChannelConfig,
        csit: &CsitRealization<'_>,
    ) -> Result<InflationFactor, RateError> {
        match csit {
            CsitRealization::Exact(h) => Ok(perfect_csit_w(config, h)?),
            _ => Err(RateError::Unsupported(
                "the closed-form policy needs the exact fading matrix".into(),
            )),
        }
    }
}

/// The assembled block matrix for one (W, H) pair.
#[derive(Clone, Debug)]
pub struct BlockMatrixM {
    full: CMatrix,
    t: usize,
    r: usize,
}

impl BlockMatrixM {
    pub fn full(&self) -> &CMatrix {
        &self.full
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.t, self.r)
    }

    /// Bottom-right block `H (Sx + Ss) H^H + Sz`.
    pub fn bottom_right(&self) -> CMatrix {
        self.full
            .submatrix(self.t, self.t + self.r, self.t, self.t + self.r)
    }

    pub fn logdet(&self) -> Result<f64, NumericsError> {
        logdet(&self.full)
    }
}

/// Assemble `M(W, H)` with shape checks. The result is Hermitian up to
/// roundoff whenever the covariances are.
pub fn assemble_m(
    config: &ChannelConfig,
    w: &InflationFactor,
    h: &CMatrix,
) -> Result<BlockMatrixM, RateError> {
    let (t, r) = (config.t(), config.r());
    let wm = w.matrix();
    if wm.rows() != t || wm.cols() != t {
        return Err(RateError::Unsupported(format!(
            "inflation factor must be {t}x{t}, got {}x{}",
            wm.rows(),
            wm.cols()
        )));
    }
    if h.rows() != r || h.cols() != t {
        return Err(RateError::Unsupported(format!(
            "fading matrix must be {r}x{t}, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let sx = config.sigma_x().base();
    let ss = config.sigma_s().base();
    let sz = config.sigma_z().base();
    let ws = wm * ss;
    let hh = h.adjoint();
    let tl = &(&ws * &wm.adjoint()) + sx;
    let x_plus_ws = &ws + sx;
    let tr = &x_plus_ws * &hh;
    let bl = tr.adjoint();
    let x_plus_s = sx + ss;
    let br = &(&(h * &x_plus_s) * &hh) + sz;
    let full = CMatrix::from_blocks_2x2(&tl, &tr, &bl, &br)?;
    debug_assert!(
        full.hermitian_deviation() <= 1e-10 * full.max_abs().max(1.0),
        "assembled block matrix must be Hermitian up to roundoff"
    );
    Ok(BlockMatrixM { full, t, r })
}

/// Natural-log integrands for one (W, H): the achievable-rate term and the
/// no-interference term, from shared factorizations.
fn sample_terms(
    config: &ChannelConfig,
    w: &InflationFactor,
    h: &CMatrix,
    ld_sx: f64,
    ld_sz: f64,
) -> Result<(f64, f64), RateError> {
    let m = assemble_m(config, w, h)?;
    let v = ld_sx + logdet(&m.bottom_right())? - m.logdet()?;
    let sx = config.sigma_x().base();
    let sz = config.sigma_z().base();
    let cover = &(&(h * sx) * &h.adjoint()) + sz;
    let u = logdet(&cover)? - ld_sz;
    Ok((v, u))
}

/// Per-cell means of the rate and bound integrands.
struct CellMeans {
    v: f64,
    u: f64,
}

/// Evaluate the achievable rate and the no-interference bound from the same
/// fading draws. This is the estimator everything else wraps.
pub fn paired_rate_and_bound(
    config: &ChannelConfig,
    csit: &CsitModel,
    policy: &dyn WPolicy,
    mc: &MonteCarloConfig,
    stream: RandomStream,
) -> Result<(RateEstimate, RateEstimate), RateError> {
    if mc.n_outer == 0 || mc.n_inner == 0 {
        return Err(RateError::Unsupported(
            "sample counts must be positive".into(),
        ));
    }
    if matches!(csit, CsitModel::Quantized(_))
        && matches!(config.fading(), FadingKind::PointMass(_))
    {
        return Err(RateError::Unsupported(
            "quantized CSIT is undefined for point-mass fading".into(),
        ));
    }
    let to_bits = config.nats_to_bits();
    let ld_sx = logdet(config.sigma_x().base())?;
    let ld_sz = logdet(config.sigma_z().base())?;

    match csit {
        CsitModel::Perfect => {
            // The conditional given exact H is a point: one draw per cell.
            let cells: Vec<Result<CellMeans, RateError>> = (0..mc.n_outer)
                .into_par_iter()
                .map(|i| {
                    let h = sample_fading(config, stream.child(TAG_OUTER).child(i as u64));
                    let w = policy.inflation_for(config, &CsitRealization::Exact(&h))?;
                    let (v, u) = sample_terms(config, &w, &h, ld_sx, ld_sz)?;
                    Ok(CellMeans { v, u })
                })
                .collect();
            reduce_cells(cells, to_bits, mc.n_outer, 1)
        }
        CsitModel::NoCsit => {
            // One degenerate outer cell carrying every marginal draw.
            let w = policy.inflation_for(config, &CsitRealization::Absent)?;
            let n = mc.n_outer * mc.n_inner;
            let inner = stream.child(TAG_INNER).child(0);
            let terms: Vec<Result<(f64, f64), RateError>> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let h = sample_fading(config, inner.child(j as u64));
                    sample_terms(config, &w, &h, ld_sx, ld_sz)
                })
                .collect();
            let mut vs = Vec::with_capacity(n);
            let mut us = Vec::with_capacity(n);
            for t in terms {
                let (v, u) = t?;
                vs.push(v);
                us.push(u);
            }
            let (mv, sv) = mean_and_std_error(&vs);
            let (mu, su) = mean_and_std_error(&us);
            Ok((
                RateEstimate {
                    rate: mv * to_bits,
                    std_error: sv * to_bits,
                    n_outer: 1,
                    n_inner: n,
                },
                RateEstimate {
                    rate: mu * to_bits,
                    std_error: su * to_bits,
                    n_outer: 1,
                    n_inner: n,
                },
            ))
        }
        CsitModel::Quantized(spec) => {
            let cells: Vec<Result<CellMeans, RateError>> = (0..mc.n_outer)
                .into_par_iter()
                .map(|i| {
                    let h_seen = sample_fading(config, stream.child(TAG_OUTER).child(i as u64));
                    let q = quantize(&h_seen, spec, config.fading())?;
                    let w = policy.inflation_for(config, &CsitRealization::Cells(&q))?;
                    let inner = stream.child(TAG_INNER).child(i as u64);
                    let (mut sv, mut su) = (0.0, 0.0);
                    for j in 0..mc.n_inner {
                        let h = sample_conditional(&q, spec, inner.child(j as u64));
                        let (v, u) = sample_terms(config, &w, &h, ld_sx, ld_sz)?;
                        sv += v;
                        su += u;
                    }
                    Ok(CellMeans {
                        v: sv / mc.n_inner as f64,
                        u: su / mc.n_inner as f64,
                    })
                })
                .collect();
            reduce_cells(cells, to_bits, mc.n_outer, mc.n_inner)
        }
    }
}

/// Combine per-cell means: the estimate is the grand mean, the standard
/// error comes from the spread across cells (the draws within a cell are
/// exchangeable with it).
fn reduce_cells(
    cells: Vec<Result<CellMeans, RateError>>,
    to_bits: f64,
    n_outer: usize,
    n_inner: usize,
) -> Result<(RateEstimate, RateEstimate), RateError> {
    let mut vs = Vec::with_capacity(cells.len());
    let mut us = Vec::with_capacity(cells.len());
    for c in cells {
        let c = c?;
        vs.push(c.v);
        us.push(c.u);
    }
    let (mv, sv) = mean_and_std_error(&vs);
    let (mu, su) = mean_and_std_error(&us);
    Ok((
        RateEstimate {
            rate: mv * to_bits,
            std_error: sv * to_bits,
            n_outer,
            n_inner,
        },
        RateEstimate {
            rate: mu * to_bits,
            std_error: su * to_bits,
            n_outer,
            n_inner,
        },
    ))
}

/// Achievable rate alone (same estimator as [`paired_rate_and_bound`]).
pub fn achievable_rate(
    config: &ChannelConfig,
    csit: &CsitModel,
    policy: &dyn WPolicy,
    mc: &MonteCarloConfig,
    stream: RandomStream,
) -> Result<RateEstimate, RateError> {
    Ok(paired_rate_and_bound(config, csit, policy, mc, stream)?.0)
}

/// No-interference upper bound alone, using the no-CSIT sample layout so a
/// paired call at the same stream shares its draws.
pub fn no_interference_bound(
    config: &ChannelConfig,
    mc: &MonteCarloConfig,
    stream: RandomStream,
) -> Result<RateEstimate, RateError> {
    let ld_sz = logdet(config.sigma_z().base())?;
    let sx = config.sigma_x().base().clone();
    let n = mc.n_outer * mc.n_inner;
    let inner = stream.child(TAG_INNER).child(0);
    let to_bits = config.nats_to_bits();
    let terms: Vec<Result<f64, RateError>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let h = sample_fading(config, inner.child(j as u64));
            let cover = &(&(&h * &sx) * &h.adjoint()) + config.sigma_z().base();
            Ok(logdet(&cover)? - ld_sz)
        })
        .collect();
    let us = terms.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let (mu, su) = mean_and_std_error(&us);
    Ok(RateEstimate {
        rate: mu * to_bits,
        std_error: su * to_bits,
        n_outer: 1,
        n_inner: n,
    })
}

/// Rate, bound, and gap from one set of common random draws.
pub fn delta_r(
    config: &ChannelConfig,
    csit: &CsitModel,
    policy: &dyn WPolicy,
    mc: &MonteCarloConfig,
    stream: RandomStream,
) -> Result<DeltaRReport, RateError> {
    let (rate, bound) = paired_rate_and_bound(config, csit, policy, mc, stream)?;
    Ok(DeltaRReport {
        rate,
        bound,
        delta: bound.rate - rate.rate,
    })
}
