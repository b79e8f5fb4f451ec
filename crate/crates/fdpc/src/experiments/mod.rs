//! Experiment orchestration: power sweeps over CSIT models and solver
//! choices, CSV emission, and the consistency checks built on top of them.
//!
//! A sweep walks a dB power grid; at each power it evaluates every
//! requested (CSIT model, algorithm) pair with the two-level Monte Carlo
//! from [`crate::rate`]. Random streams are keyed by seed and CSIT index
//! only — never by power or algorithm — so curves across powers and
//! between algorithms share their fading draws and differences between
//! rows are signal, not resampling noise. Quantized-CSIT points solve one
//! inflation factor per distinct quantizer cell pattern and cache it; the
//! per-cell solver stream is keyed by the cell contents, which keeps the
//! result identical however the outer loop is scheduled.
//!
//! A point whose solve or rate estimate fails is reported as a row of NaNs
//! plus a [`SweepFailure`], so one bad cell cannot silently drop a curve.

mod checks;
mod config;

pub use checks::{
    compare_algorithms, delta_r_check, fit_slope, scaling_check, AlgorithmGap, ComparisonReport,
    DeltaRCheck, DeltaRPoint, ScalingReport, MIN_TAIL_SPAN_DB,
};
pub use config::{load_experiment_file, parse_experiment_into, parse_experiment_str};

use std::collections::HashMap;
use std::io;
use std::str::FromStr;
use std::sync::Mutex;

use thiserror::Error;

use crate::channel::{
    build_quantizer, CellSampler, ChannelConfig, ChannelError, ConditionalSampler, CsitModel,
    FadingKind, MarginalSampler, QuantizerSpec,
};
use crate::rate::{
    paired_rate_and_bound, ConstantPolicy, CsitRealization, MonteCarloConfig, PerfectCsitPolicy,
    RateError, RateEstimate, WPolicy,
};
use crate::solvers::{
    brute_force_w, coordinate_descent_w, kkt_fixed_point_w, siso_optimal_w, stationarity_residual,
    GridSpec, InflationFactor, SolverConfig, SolverError,
};
use crate::stream::{splitmix64, RandomStream};

/// Stream tag for the per-CSIT-model branch of the sweep tree.
pub(crate) const TAG_CSIT: u64 = 21;
/// Stream tag for solver batches within one CSIT branch.
pub(crate) const TAG_SOLVER: u64 = 22;
/// Stream tag for the rate Monte Carlo within one CSIT branch.
pub(crate) const TAG_RATE: u64 = 23;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("bad experiment spec: {0}")]
    BadSpec(String),
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(
        "power grid tail spans {span_db:.1} dB; fitting a high-power slope needs {needed_db:.0} dB"
    )]
    InsufficientTail { span_db: f64, needed_db: f64 },
    #[error("sweep cell failed: {0}")]
    SweepFailed(String),
    #[error("{0}")]
    NotApplicable(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Transmitter knowledge model for one sweep curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CsitSpec {
    NoCsit,
    Quantized { bits: u32 },
    Perfect,
}

impl CsitSpec {
    /// Stable label used in CSV rows and config files: `nocsit`, `b<B>`,
    /// or `perfect`.
    pub fn label(&self) -> String {
        match self {
            CsitSpec::NoCsit => "nocsit".into(),
            CsitSpec::Quantized { bits } => format!("b{bits}"),
            CsitSpec::Perfect => "perfect".into(),
        }
    }

    fn to_model(self) -> Result<CsitModel, ExperimentError> {
        Ok(match self {
            CsitSpec::NoCsit => CsitModel::NoCsit,
            CsitSpec::Quantized { bits } => CsitModel::Quantized(build_quantizer(bits)?),
            CsitSpec::Perfect => CsitModel::Perfect,
        })
    }
}

impl FromStr for CsitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nocsit" | "none" => Ok(CsitSpec::NoCsit),
            "perfect" => Ok(CsitSpec::Perfect),
            _ => s
                .strip_prefix('b')
                .and_then(|d| d.parse::<u32>().ok())
                .map(|bits| CsitSpec::Quantized { bits })
                .ok_or_else(|| format!("unknown CSIT model `{s}` (try nocsit, b3, perfect)")),
        }
    }
}

/// Which procedure supplies the inflation factor for a curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    /// Surrogate coordinate descent.
    CoordinateDescent,
    /// Damped stationarity fixed point.
    FixedPoint,
    /// Fixed W = I baseline.
    IdentityW,
    /// Fixed W = 0 baseline (treat interference as noise).
    ZeroW,
    /// Scalar-channel grid refinement (single antenna only).
    SisoGrid,
    /// Exhaustive grid oracle.
    BruteForce,
}

impl AlgorithmKind {
    /// Stable label used in CSV rows and config files.
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmKind::CoordinateDescent => "alg1",
            AlgorithmKind::FixedPoint => "alg2",
            AlgorithmKind::IdentityW => "w_identity",
            AlgorithmKind::ZeroW => "w_zero",
            AlgorithmKind::SisoGrid => "siso",
            AlgorithmKind::BruteForce => "brute",
        }
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alg1" | "descent" => Ok(AlgorithmKind::CoordinateDescent),
            "alg2" | "fixed_point" => Ok(AlgorithmKind::FixedPoint),
            "w_identity" => Ok(AlgorithmKind::IdentityW),
            "w_zero" => Ok(AlgorithmKind::ZeroW),
            "siso" => Ok(AlgorithmKind::SisoGrid),
            "brute" => Ok(AlgorithmKind::BruteForce),
            _ => Err(format!(
                "unknown algorithm `{s}` (try alg1, alg2, w_identity, w_zero, siso, brute)"
            )),
        }
    }
}

/// CSV/config label for a fading law.
pub fn fading_label(kind: &FadingKind) -> &'static str {
    match kind {
        FadingKind::RealGaussian => "real",
        FadingKind::ComplexGaussian => "complex",
        FadingKind::PointMass(_) => "pointmass",
    }
}

/// Parse the fading laws a config file can name. Point-mass laws carry a
/// matrix and exist only through the API.
pub fn parse_fading(s: &str) -> Result<FadingKind, String> {
    match s {
        "real" => Ok(FadingKind::RealGaussian),
        "complex" => Ok(FadingKind::ComplexGaussian),
        _ => Err(format!("unknown fading `{s}` (try real, complex)")),
    }
}

/// Full description of one sweep: channel shape, power grid, CSIT models,
/// algorithms, sample sizes, and the master seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub t: usize,
    pub r: usize,
    /// Transmit power grid, dB over unit noise.
    pub p_grid_db: Vec<f64>,
    /// Interference-to-signal power ratio Q/P, held fixed along the grid.
    pub q_over_p: f64,
    pub csit: Vec<CsitSpec>,
    pub algorithms: Vec<AlgorithmKind>,
    pub fading: FadingKind,
    pub seed: u64,
    pub mc: MonteCarloConfig,
    pub solver: SolverConfig,
    /// Optional CSV destination named by a config file.
    pub out: Option<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::preset_3x2()
    }
}

impl ExperimentSpec {
    /// 3-transmit, 2-receive real-fading sweep from 0 to 30 dB with the
    /// no-CSIT, 1-bit, 2-bit, and perfect-CSIT curves.
    pub fn preset_3x2() -> Self {
        ExperimentSpec {
            t: 3,
            r: 2,
            p_grid_db: (0..=6).map(|k| 5.0 * k as f64).collect(),
            q_over_p: 1.0,
            csit: vec![
                CsitSpec::NoCsit,
                CsitSpec::Quantized { bits: 1 },
                CsitSpec::Quantized { bits: 2 },
                CsitSpec::Perfect,
            ],
            algorithms: vec![AlgorithmKind::CoordinateDescent],
            fading: FadingKind::RealGaussian,
            seed: 42,
            mc: MonteCarloConfig::default(),
            solver: SolverConfig::default(),
            out: None,
        }
    }

    /// Square 3x3 variant of [`ExperimentSpec::preset_3x2`].
    pub fn preset_3x3() -> Self {
        ExperimentSpec {
            r: 3,
            ..Self::preset_3x2()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.t == 0 || self.r == 0 {
            return Err(ExperimentError::BadSpec(
                "antenna counts must be at least 1".into(),
            ));
        }
        if self.p_grid_db.is_empty() {
            return Err(ExperimentError::BadSpec("empty power grid".into()));
        }
        if !self.p_grid_db.iter().all(|p| p.is_finite()) {
            return Err(ExperimentError::BadSpec(
                "power grid entries must be finite".into(),
            ));
        }
        if self.p_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ExperimentError::BadSpec(
                "power grid must be strictly ascending".into(),
            ));
        }
        if !(self.q_over_p.is_finite() && self.q_over_p >= 0.0) {
            return Err(ExperimentError::BadSpec(
                "q_over_p must be a nonnegative finite ratio".into(),
            ));
        }
        if self.csit.is_empty() || self.algorithms.is_empty() {
            return Err(ExperimentError::BadSpec(
                "need at least one CSIT model and one algorithm".into(),
            ));
        }
        if self.mc.n_outer == 0 || self.mc.n_inner == 0 {
            return Err(ExperimentError::BadSpec(
                "Monte Carlo sample counts must be positive".into(),
            ));
        }
        self.solver.validate()?;
        Ok(())
    }

    /// The channel this spec describes at one grid power: scaled-identity
    /// signal and interference covariances against unit noise.
    pub fn channel_at(&self, p_db: f64) -> Result<ChannelConfig, ExperimentError> {
        let p = 10f64.powf(p_db / 10.0);
        let q = self.q_over_p * p;
        Ok(ChannelConfig::scaled_identities(
            self.t,
            self.r,
            p,
            q,
            1.0,
            self.fading.clone(),
        )?)
    }
}

/// One row of a sweep: the estimate, its matching no-interference bound
/// from the same draws, and the solver diagnostics behind the W used.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub p_db: f64,
    pub q_over_p: f64,
    pub t: usize,
    pub r: usize,
    pub fading: &'static str,
    pub csit: CsitSpec,
    pub algorithm: AlgorithmKind,
    pub rate_bits: f64,
    pub std_err: f64,
    pub bound_bits: f64,
    pub delta_r: f64,
    /// Iterations of the slowest cell solve behind this point.
    pub iterations: usize,
    /// Largest stationarity residual among the cell solves.
    pub residual: f64,
    pub converged: bool,
}

/// A sweep point that could not be computed.
#[derive(Clone, Debug)]
pub struct SweepFailure {
    pub p_db: f64,
    pub csit: CsitSpec,
    pub algorithm: AlgorithmKind,
    pub message: String,
}

/// Everything a sweep produced: the full grid of rows (failures included
/// as NaN rows) plus the failure log.
#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub points: Vec<CurvePoint>,
    pub failures: Vec<SweepFailure>,
}

/// Solver diagnostics aggregated over however many solves fed one point.
#[derive(Clone, Copy, Debug)]
struct SolveStats {
    iterations: usize,
    residual: f64,
    converged: bool,
}

impl SolveStats {
    /// Stats for points that need no iterative solve (fixed or closed-form
    /// inflation).
    fn closed_form() -> Self {
        SolveStats {
            iterations: 0,
            residual: 0.0,
            converged: true,
        }
    }

    fn merge(self, other: SolveStats) -> Self {
        SolveStats {
            iterations: self.iterations.max(other.iterations),
            residual: self.residual.max(other.residual),
            converged: self.converged && other.converged,
        }
    }
}

/// Run the full sweep described by `spec`.
pub fn rate_sweep(spec: &ExperimentSpec) -> Result<SweepOutput, ExperimentError> {
    spec.validate()?;
    let root = RandomStream::new(spec.seed);
    let fading = fading_label(&spec.fading);
    let mut out = SweepOutput::default();
    for &p_db in &spec.p_grid_db {
        let config = spec.channel_at(p_db)?;
        for (ci, &csit) in spec.csit.iter().enumerate() {
            let model = csit.to_model()?;
            // Keyed by CSIT index only: every power and every algorithm on
            // this curve family sees the same draws.
            let cell_stream = root.child(TAG_CSIT).child(ci as u64);
            for &alg in &spec.algorithms {
                let row = sweep_point(spec, &config, csit, &model, alg, cell_stream);
                match row {
                    Ok((rate, bound, stats)) => out.points.push(CurvePoint {
                        p_db,
                        q_over_p: spec.q_over_p,
                        t: spec.t,
                        r: spec.r,
                        fading,
                        csit,
                        algorithm: alg,
                        rate_bits: rate.rate,
                        std_err: rate.std_error,
                        bound_bits: bound.rate,
                        delta_r: bound.rate - rate.rate,
                        iterations: stats.iterations,
                        residual: stats.residual,
                        converged: stats.converged,
                    }),
                    Err(err) => {
                        out.failures.push(SweepFailure {
                            p_db,
                            csit,
                            algorithm: alg,
                            message: err.to_string(),
                        });
                        out.points.push(CurvePoint {
                            p_db,
                            q_over_p: spec.q_over_p,
                            t: spec.t,
                            r: spec.r,
                            fading,
                            csit,
                            algorithm: alg,
                            rate_bits: f64::NAN,
                            std_err: f64::NAN,
                            bound_bits: f64::NAN,
                            delta_r: f64::NAN,
                            iterations: 0,
                            residual: f64::NAN,
                            converged: false,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn sweep_point(
    spec: &ExperimentSpec,
    config: &ChannelConfig,
    csit: CsitSpec,
    model: &CsitModel,
    alg: AlgorithmKind,
    cell_stream: RandomStream,
) -> Result<(RateEstimate, RateEstimate, SolveStats), ExperimentError> {
    let rate_stream = cell_stream.child(TAG_RATE);
    let solver_stream = cell_stream.child(TAG_SOLVER);
    let paired =
        |policy: &dyn WPolicy| paired_rate_and_bound(config, model, policy, &spec.mc, rate_stream);
    match alg {
        AlgorithmKind::IdentityW => {
            let policy = ConstantPolicy(InflationFactor::identity(spec.t));
            let (rate, bound) = paired(&policy)?;
            Ok((rate, bound, SolveStats::closed_form()))
        }
        AlgorithmKind::ZeroW => {
            let policy = ConstantPolicy(InflationFactor::zero(spec.t));
            let (rate, bound) = paired(&policy)?;
            Ok((rate, bound, SolveStats::closed_form()))
        }
        _ => match csit {
            // Perfect CSIT has an exact per-realization optimum; every
            // solver would only approximate it, so use it directly.
            CsitSpec::Perfect => {
                let (rate, bound) = paired(&PerfectCsitPolicy)?;
                Ok((rate, bound, SolveStats::closed_form()))
            }
            CsitSpec::NoCsit => {
                let sampler = MarginalSampler::new(config);
                let (w, stats) = solve_with(alg, config, &sampler, &spec.solver, solver_stream)?;
                let (rate, bound) = paired(&ConstantPolicy(w))?;
                Ok((rate, bound, stats))
            }
            CsitSpec::Quantized { .. } => {
                let CsitModel::Quantized(quantizer) = model else {
                    unreachable!("model built from csit spec");
                };
                let policy =
                    CachedCellPolicy::new(alg, quantizer.clone(), &spec.solver, solver_stream);
                let (rate, bound) = paired(&policy)?;
                Ok((rate, bound, policy.aggregate()))
            }
        },
    }
}

/// Solve for one inflation factor with the requested algorithm against an
/// arbitrary conditional sampler.
fn solve_with(
    alg: AlgorithmKind,
    config: &ChannelConfig,
    sampler: &dyn ConditionalSampler,
    cfg: &SolverConfig,
    stream: RandomStream,
) -> Result<(InflationFactor, SolveStats), SolverError> {
    let eval_residual = |w: &InflationFactor| -> Result<f64, SolverError> {
        let eval =
            crate::channel::draw_batch(sampler, stream.child(crate::solvers::TAG_EVAL), cfg.batch);
        stationarity_residual(config, w, &eval)
    };
    match alg {
        AlgorithmKind::CoordinateDescent => {
            let out = coordinate_descent_w(config, sampler, cfg, stream)?;
            Ok((
                out.w,
                SolveStats {
                    iterations: out.iterations,
                    residual: out.residual,
                    converged: out.converged,
                },
            ))
        }
        AlgorithmKind::FixedPoint => {
            let out = kkt_fixed_point_w(config, sampler, cfg, stream)?;
            Ok((
                out.w,
                SolveStats {
                    iterations: out.iterations,
                    residual: out.residual,
                    converged: out.converged,
                },
            ))
        }
        AlgorithmKind::SisoGrid => {
            let w = siso_optimal_w(config, sampler, cfg.batch, stream)?;
            let residual = eval_residual(&w)?;
            Ok((
                w,
                SolveStats {
                    iterations: 0,
                    residual,
                    converged: true,
                },
            ))
        }
        AlgorithmKind::BruteForce => {
            let grid = GridSpec::default_for(config.t(), config.fading().is_complex_signal());
            let w = brute_force_w(config, sampler, &grid, cfg.batch, stream)?;
            let residual = eval_residual(&w)?;
            Ok((
                w,
                SolveStats {
                    iterations: 0,
                    residual,
                    converged: true,
                },
            ))
        }
        AlgorithmKind::IdentityW => Ok((
            InflationFactor::identity(config.t()),
            SolveStats::closed_form(),
        )),
        AlgorithmKind::ZeroW => Ok((InflationFactor::zero(config.t()), SolveStats::closed_form())),
    }
}

/// Solves one W per distinct quantizer cell pattern and caches it. The
/// per-cell stream is derived from the cell contents, so results do not
/// depend on which outer realization triggered the solve.
struct CachedCellPolicy<'a> {
    kind: AlgorithmKind,
    quantizer: QuantizerSpec,
    solver: &'a SolverConfig,
    base: RandomStream,
    cache: Mutex<HashMap<Vec<u32>, (InflationFactor, SolveStats)>>,
}

impl<'a> CachedCellPolicy<'a> {
    fn new(
        kind: AlgorithmKind,
        quantizer: QuantizerSpec,
        solver: &'a SolverConfig,
        base: RandomStream,
    ) -> Self {
        CachedCellPolicy {
            kind,
            quantizer,
            solver,
            base,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Worst-case diagnostics over every cell solved so far.
    fn aggregate(&self) -> SolveStats {
        let cache = self.cache.lock().expect("cache lock");
        cache
            .values()
            .map(|(_, s)| *s)
            .fold(SolveStats::closed_form(), SolveStats::merge)
    }
}

impl WPolicy for CachedCellPolicy<'_> {
    fn inflation_for(
        &self,
        config: &ChannelConfig,
        csit: &CsitRealization<'_>,
    ) -> Result<InflationFactor, RateError> {
        let CsitRealization::Cells(qc) = csit else {
            return Err(RateError::Unsupported(
                "cell-cached policy needs quantized realizations".into(),
            ));
        };
        if let Some((w, _)) = self.cache.lock().expect("cache lock").get(&qc.cells) {
            return Ok(w.clone());
        }
        // Solve outside the lock; a concurrent duplicate solve reaches the
        // identical result because the stream is a pure function of the
        // cell contents.
        let sampler = CellSampler::new((*qc).clone(), self.quantizer.clone());
        let stream = self.base.child(hash_cells(&qc.cells));
        let (w, stats) = solve_with(self.kind, config, &sampler, self.solver, stream)
            .map_err(RateError::Policy)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(qc.cells.clone(), (w.clone(), stats));
        Ok(w)
    }
}

fn hash_cells(cells: &[u32]) -> u64 {
    cells.iter().fold(0x9e37_79b9_7f4a_7c15, |acc, &c| {
        splitmix64(acc ^ u64::from(c))
    })
}

/// Write sweep rows as CSV. Rates are fixed-point with six decimals and
/// the residual is scientific with three, so equal runs emit identical
/// bytes.
pub fn write_csv<W: io::Write>(out: &mut W, points: &[CurvePoint]) -> io::Result<()> {
    writeln!(
        out,
        "p_db,q_over_p,t,r,fading,csit,algorithm,rate_bits,std_err,bound_bits,delta_r,iterations,residual,converged"
    )?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{:.3e},{}",
            p.p_db,
            p.q_over_p,
            p.t,
            p.r,
            p.fading,
            p.csit.label(),
            p.algorithm.label(),
            p.rate_bits,
            p.std_err,
            p.bound_bits,
            p.delta_r,
            p.iterations,
            p.residual,
            p.converged
        )?;
    }
    Ok(())
}

/// [`write_csv`] into a string.
pub fn csv_string(points: &[CurvePoint]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, points).expect("write to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            t: 1,
            r: 1,
            p_grid_db: vec![10.0],
            q_over_p: 1.0,
            csit: vec![CsitSpec::NoCsit, CsitSpec::Perfect],
            algorithms: vec![AlgorithmKind::IdentityW],
            fading: FadingKind::RealGaussian,
            seed: 7,
            mc: MonteCarloConfig::new(40, 25),
            solver: SolverConfig {
                batch: 32,
                ..SolverConfig::default()
            },
            out: None,
        }
    }

    #[test]
    fn labels_round_trip_through_parsing() {
        for csit in [
            CsitSpec::NoCsit,
            CsitSpec::Quantized { bits: 3 },
            CsitSpec::Perfect,
        ] {
            assert_eq!(csit.label().parse::<CsitSpec>().unwrap(), csit);
        }
        for alg in [
            AlgorithmKind::CoordinateDescent,
            AlgorithmKind::FixedPoint,
            AlgorithmKind::IdentityW,
            AlgorithmKind::ZeroW,
            AlgorithmKind::SisoGrid,
            AlgorithmKind::BruteForce,
        ] {
            assert_eq!(alg.label().parse::<AlgorithmKind>().unwrap(), alg);
        }
        for fading in [FadingKind::RealGaussian, FadingKind::ComplexGaussian] {
            assert_eq!(parse_fading(fading_label(&fading)).unwrap(), fading);
        }
        assert!(parse_fading("pointmass").is_err(), "not a config-file law");
        assert!("b".parse::<CsitSpec>().is_err());
        assert!("b-1".parse::<CsitSpec>().is_err());
    }

    #[test]
    fn default_spec_validates_and_scales_power() {
        let spec = ExperimentSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.p_grid_db.len(), 7);
        let cfg = spec.channel_at(10.0).unwrap();
        assert!((cfg.power_budget() - 10.0).abs() < 1e-12);
        assert_eq!(ExperimentSpec::preset_3x3().r, 3);
    }

    #[test]
    fn sweep_produces_one_row_per_grid_cell() {
        let out = rate_sweep(&tiny_spec()).unwrap();
        assert_eq!(out.points.len(), 2, "1 power x 2 csit x 1 algorithm");
        assert!(out.failures.is_empty(), "failures: {:?}", out.failures);
        for p in &out.points {
            assert!(p.rate_bits.is_finite());
            assert!(p.bound_bits >= p.rate_bits - 1e-12);
            assert!(p.converged);
        }
    }

    #[test]
    fn bounds_share_draws_across_algorithms() {
        // The bound never depends on the algorithm, and the stream keying
        // must make that exact, not just statistical.
        let mut spec = tiny_spec();
        spec.algorithms = vec![AlgorithmKind::IdentityW, AlgorithmKind::ZeroW];
        let out = rate_sweep(&spec).unwrap();
        assert_eq!(out.points.len(), 4);
        for pair in out.points.chunks(2) {
            assert_eq!(
                pair[0].bound_bits, pair[1].bound_bits,
                "same csit cell must reuse draws across algorithms"
            );
            assert_eq!(pair[0].csit, pair[1].csit);
        }
    }

    #[test]
    fn quantized_cells_solve_and_cache() {
        let mut spec = tiny_spec();
        spec.csit = vec![CsitSpec::Quantized { bits: 1 }];
        spec.algorithms = vec![AlgorithmKind::CoordinateDescent];
        spec.mc = MonteCarloConfig::new(12, 10);
        let out = rate_sweep(&spec).unwrap();
        assert!(out.failures.is_empty(), "failures: {:?}", out.failures);
        let p = &out.points[0];
        assert!(p.converged, "cells should converge");
        assert!(p.iterations > 0, "iterative solver must report sweeps");
        assert!(p.residual.is_finite());
        assert!(p.rate_bits.is_finite());
    }

    #[test]
    fn failed_points_become_nan_rows_with_a_log_entry() {
        let mut spec = tiny_spec();
        spec.t = 2;
        spec.r = 2;
        spec.csit = vec![CsitSpec::NoCsit];
        spec.algorithms = vec![AlgorithmKind::SisoGrid];
        let out = rate_sweep(&spec).unwrap();
        assert_eq!(out.points.len(), 1);
        assert_eq!(out.failures.len(), 1);
        assert!(out.points[0].rate_bits.is_nan());
        assert!(!out.points[0].converged);
        assert!(
            out.failures[0].message.contains("scalar channel"),
            "message: {}",
            out.failures[0].message
        );
    }

    #[test]
    fn csv_format_is_stable() {
        let point = CurvePoint {
            p_db: 5.0,
            q_over_p: 1.0,
            t: 3,
            r: 2,
            fading: "real",
            csit: CsitSpec::Quantized { bits: 2 },
            algorithm: AlgorithmKind::CoordinateDescent,
            rate_bits: 1.234_567_89,
            std_err: 0.012_345,
            bound_bits: 1.3,
            delta_r: 0.065_432_11,
            iterations: 17,
            residual: 4.321e-6,
            converged: true,
        };
        let text = csv_string(&[point]);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "p_db,q_over_p,t,r,fading,csit,algorithm,rate_bits,std_err,bound_bits,delta_r,iterations,residual,converged"
        );
        assert_eq!(
            lines.next().unwrap(),
            "5,1,3,2,real,b2,alg1,1.234568,0.012345,1.300000,0.065432,17,4.321e-6,true"
        );
    }

    #[test]
    fn sweeps_are_deterministic() {
        let mut spec = tiny_spec();
        spec.csit = vec![CsitSpec::Quantized { bits: 1 }];
        spec.algorithms = vec![AlgorithmKind::CoordinateDescent];
        spec.mc = MonteCarloConfig::new(8, 8);
        let a = csv_string(&rate_sweep(&spec).unwrap().points);
        let b = csv_string(&rate_sweep(&spec).unwrap().points);
        assert_eq!(a, b);
    }
}
