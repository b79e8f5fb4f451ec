//! Exhaustive grid search over inflation matrices, used as a slow oracle
//! against which the iterative solvers are checked.
//!
//! Every entry of W (real part, and imaginary part when requested) ranges
//! over the same one-dimensional grid; the product grid is scanned in full
//! and the W minimizing the batch average of `log|M(W, H)|` is returned.
//! The per-sample quantities that do not depend on W — `log|R|` and
//! `P = H^H R^-1 H` with `R = H (Sx + Ss) H^H + Sz` — are computed once,
//! leaving only the t x t Schur determinant
//! `|Sx + W Ss W^H - (Sx + W Ss) P (Sx + Ss W^H)|` per (point, sample) pair.
//!
//! The scan parallelizes over grid points with an associative min-reduce;
//! exact ties go to the lexicographically earlier point (row-major entry
//! order, real part before imaginary part), so the result is identical
//! regardless of thread count. Grids above [`GRID_POINT_CAP`] points are
//! rejected up front rather than silently truncated.

use nalgebra::SMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{draw_batch, ChannelConfig, ConditionalSampler};
use crate::numerics::{logdet, lu_logdet_and_inverse, CMatrix};
use crate::solvers::{InflationFactor, SolverError, TAG_BATCH};
use crate::stream::RandomStream;

/// Hard ceiling on the number of grid points a scan may visit.
pub const GRID_POINT_CAP: u128 = 10_000_000;

type M2 = SMatrix<Complex64, 2, 2>;

/// One-dimensional grid replicated across every free entry of W.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Smallest grid value.
    pub lo: f64,
    /// Largest grid value (included when `lo + k * step` lands on it).
    pub hi: f64,
    /// Spacing between adjacent values.
    pub step: f64,
    /// Scan imaginary parts too. Leave false for real-valued searches,
    /// which shrinks the dimension count by half.
    pub complex_parts: bool,
}

impl GridSpec {
    /// Number of values along one dimension: `floor((hi-lo)/step) + 1`,
    /// with a half-step of slack so binary rounding cannot drop the
    /// endpoint.
    pub fn points_per_dim(&self) -> usize {
        ((self.hi - self.lo) / self.step + 0.5).floor() as usize + 1
    }

    /// Conventional search box: [0, 1] in millesimal steps for a scalar W,
    /// and [-0.5, 1.5] in steps of 0.05 per entry otherwise (imaginary
    /// parts included only for complex signalling).
    pub fn default_for(t: usize, complex_signal: bool) -> Self {
        if t == 1 {
            GridSpec {
                lo: 0.0,
                hi: 1.0,
                step: 1e-3,
                complex_parts: false,
            }
        } else {
            GridSpec {
                lo: -0.5,
                hi: 1.5,
                step: 0.05,
                complex_parts: complex_signal,
            }
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.step > 0.0 && self.hi > self.lo && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(SolverError::BadConfig(format!(
                "grid must satisfy lo < hi with a positive step, got [{}, {}] step {}",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }
}

/// Scan the full grid of inflation matrices and return the one minimizing
/// the batch-mean `log|M|` over `n_samples` conditional fading draws.
pub fn brute_force_w(
    config: &ChannelConfig,
    sampler: &dyn ConditionalSampler,
    grid: &GridSpec,
    n_samples: usize,
    stream: RandomStream,
) -> Result<InflationFactor, SolverError> {
    grid.validate()?;
    let (t, r) = (config.t(), config.r());
    if sampler.dims() != (r, t) {
        return Err(SolverError::BadConfig(format!(
            "sampler produces {:?} matrices for a {r}x{t} channel",
            sampler.dims()
        )));
    }
    if n_samples == 0 {
        return Err(SolverError::BadConfig(
            "grid search needs at least one fading sample".into(),
        ));
    }
    let dims = t * t * if grid.complex_parts { 2 } else { 1 };
    let ppd = grid.points_per_dim();
    let total = (0..dims)
        .try_fold(1u128, |acc, _| acc.checked_mul(ppd as u128))
        .unwrap_or(u128::MAX);
    if total > GRID_POINT_CAP {
        return Err(SolverError::GridTooLarge {
            points: total,
            cap: GRID_POINT_CAP,
        });
    }

    let batch = draw_batch(sampler, stream.child(TAG_BATCH), n_samples);
    let sx = config.sigma_x().base();
    let ss = config.sigma_s().base();
    let sz = config.sigma_z().base();
    let x_plus_s = sx + ss;
    let mut pres = Vec::with_capacity(batch.len());
    for h in &batch {
        let r_mat = &(&(h * &x_plus_s) * &h.adjoint()) + sz;
        let (ld, inv) = lu_logdet_and_inverse(&r_mat, true)?;
        let p = &(&h.adjoint() * &inv.expect("inverse requested")) * h;
        pres.push((ld, p));
    }

    let total = total as u64;
    let (best_val, best_idx) = if t == 2 {
        scan_2x2(grid, ppd, sx, ss, &pres, total)
    } else {
        scan_generic(grid, ppd, t, dims, sx, ss, &pres, total)
    };
    if !best_val.is_finite() {
        return Err(SolverError::BadConfig(
            "every grid point produced a singular objective".into(),
        ));
    }
    let w = decode_generic(grid, ppd, t, dims, best_idx);
    InflationFactor::new(w)
}

/// Associative combiner for the parallel min-reduce: smaller value wins,
/// exact ties go to the lower (lexicographically earlier) index.
fn better(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

#[allow(clippy::too_many_arguments)]
fn scan_generic(
    grid: &GridSpec,
    ppd: usize,
    t: usize,
    dims: usize,
    sx: &CMatrix,
    ss: &CMatrix,
    pres: &[(f64, CMatrix)],
    total: u64,
) -> (f64, u64) {
    let inv_n = 1.0 / pres.len() as f64;
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let w = decode_generic(grid, ppd, t, dims, idx);
            let wss = &w * ss;
            let tl = sx + &(&wss * &w.adjoint());
            let xw = sx + &wss;
            let xwh = xw.adjoint();
            let mut acc = 0.0;
            for (ld, p) in pres {
                let s = &tl - &(&(&xw * p) * &xwh);
                match logdet(&s) {
                    Ok(v) => acc += ld + v,
                    Err(_) => return (f64::INFINITY, idx),
                }
            }
            (acc * inv_n, idx)
        })
        .reduce(|| (f64::INFINITY, u64::MAX), better)
}

fn scan_2x2(
    grid: &GridSpec,
    ppd: usize,
    sx: &CMatrix,
    ss: &CMatrix,
    pres: &[(f64, CMatrix)],
    total: u64,
) -> (f64, u64) {
    let to_s2 = |m: &CMatrix| M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let sx2 = to_s2(sx);
    let ss2 = to_s2(ss);
    let pres2: Vec<(f64, M2)> = pres.iter().map(|(ld, p)| (*ld, to_s2(p))).collect();
    let dims = 4 * if grid.complex_parts { 2 } else { 1 };
    let inv_n = 1.0 / pres2.len() as f64;
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let w = decode_2x2(grid, ppd, dims, idx);
            let wss = w * ss2;
            let tl = sx2 + wss * w.adjoint();
            let xw = sx2 + wss;
            let xwh = xw.adjoint();
            let mut acc = 0.0;
            for (ld, p) in &pres2 {
                let s = tl - xw * p * xwh;
                let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
                let v = det.norm().ln();
                if !v.is_finite() {
                    return (f64::INFINITY, idx);
                }
                acc += ld + v;
            }
            (acc * inv_n, idx)
        })
        .reduce(|| (f64::INFINITY, u64::MAX), better)
}

/// Map a flat grid index to W. The first dimension is the most significant
/// digit, dimensions enumerate W's entries in row-major order, and a
/// complex scan interleaves each entry's real part before its imaginary
/// part — together this makes index order the documented lexicographic
/// order.
fn decode_generic(grid: &GridSpec, ppd: usize, t: usize, dims: usize, idx: u64) -> CMatrix {
    let mut digits = vec![0usize; dims];
    let mut rem = idx;
    for d in (0..dims).rev() {
        digits[d] = (rem % ppd as u64) as usize;
        rem /= ppd as u64;
    }
    let val = |d: usize| grid.lo + d as f64 * grid.step;
    let entries: Vec<Complex64> = (0..t * t)
        .map(|e| {
            if grid.complex_parts {
                Complex64::new(val(digits[2 * e]), val(digits[2 * e + 1]))
            } else {
                Complex64::new(val(digits[e]), 0.0)
            }
        })
        .collect();
    CMatrix::new(t, t, &entries).expect("grid point has the right shape")
}

fn decode_2x2(grid: &GridSpec, ppd: usize, dims: usize, idx: u64) -> M2 {
    let mut digits = [0usize; 8];
    let mut rem = idx;
    for d in (0..dims).rev() {
        digits[d] = (rem % ppd as u64) as usize;
        rem /= ppd as u64;
    }
    let val = |d: usize| grid.lo + d as f64 * grid.step;
    let entry = |e: usize| {
        if dims == 8 {
            Complex64::new(val(digits[2 * e]), val(digits[2 * e + 1]))
        } else {
            Complex64::new(val(digits[e]), 0.0)
        }
    };
    M2::new(entry(0), entry(1), entry(2), entry(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{FadingKind, MarginalSampler};
    use crate::solvers::perfect_csit_w;

    #[test]
    fn points_per_dim_survives_binary_rounding() {
        let unit = GridSpec {
            lo: 0.0,
            hi: 1.0,
            step: 1e-3,
            complex_parts: false,
        };
        assert_eq!(unit.points_per_dim(), 1001);
        let wide = GridSpec::default_for(2, false);
        assert_eq!(wide.points_per_dim(), 41);
        assert_eq!(GridSpec::default_for(1, false).points_per_dim(), 1001);
    }

    #[test]
    fn oversized_grids_are_rejected() {
        let cfg =
            ChannelConfig::scaled_identities(2, 2, 10.0, 10.0, 1.0, FadingKind::ComplexGaussian)
                .unwrap();
        let sampler = MarginalSampler::new(&cfg);
        // 8 dimensions at 41 points each is ~8e12 points.
        let grid = GridSpec::default_for(2, true);
        let err = brute_force_w(&cfg, &sampler, &grid, 8, RandomStream::new(1)).unwrap_err();
        match err {
            SolverError::GridTooLarge { points, cap } => {
                assert!(points > cap, "points {points} cap {cap}");
            }
            other => panic!("expected GridTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn siso_point_mass_recovers_the_known_fraction() {
        let (p, n, h) = (10.0, 1.0, 0.7);
        let cfg = ChannelConfig::scaled_identities(
            1,
            1,
            p,
            5.0,
            n,
            FadingKind::PointMass(CMatrix::from_real(1, 1, &[h]).unwrap()),
        )
        .unwrap();
        let sampler = MarginalSampler::new(&cfg);
        let grid = GridSpec::default_for(1, false);
        let w = brute_force_w(&cfg, &sampler, &grid, 4, RandomStream::new(2)).unwrap();
        let expect = p * h * h / (p * h * h + n);
        assert!(
            (w.matrix()[(0, 0)].re - expect).abs() <= grid.step,
            "grid squeezed {:?}, closed form {expect}",
            w.matrix()
        );
    }

    #[test]
    fn flat_objective_ties_break_to_the_first_point() {
        // With no interference the objective ignores W entirely, so every
        // grid point ties and the scan must return the all-lo corner.
        let cfg = ChannelConfig::scaled_identities(2, 2, 10.0, 0.0, 1.0, FadingKind::RealGaussian)
            .unwrap();
        let sampler = MarginalSampler::new(&cfg);
        let grid = GridSpec {
            lo: -0.2,
            hi: 0.2,
            step: 0.1,
            complex_parts: false,
        };
        let w = brute_force_w(&cfg, &sampler, &grid, 4, RandomStream::new(3)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(w.matrix()[(i, j)].re, grid.lo, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn two_by_two_point_mass_matches_the_closed_form_to_grid_accuracy() {
        let h = [1.0, 0.3, -0.2, 0.8];
        let cfg = ChannelConfig::scaled_identities(
            2,
            2,
            10.0,
            10.0,
            1.0,
            FadingKind::PointMass(CMatrix::from_real(2, 2, &h).unwrap()),
        )
        .unwrap();
        let sampler = MarginalSampler::new(&cfg);
        let grid = GridSpec {
            lo: -0.5,
            hi: 1.5,
            step: 0.1,
            complex_parts: false,
        };
        let w = brute_force_w(&cfg, &sampler, &grid, 2, RandomStream::new(4)).unwrap();
        let wopt = perfect_csit_w(&cfg, &CMatrix::from_real(2, 2, &h).unwrap()).unwrap();
        let dev = (w.matrix() - wopt.matrix()).max_abs();
        assert!(dev <= grid.step, "grid best {dev:.3} from the closed form");
    }

    #[test]
    fn scan_is_thread_count_invariant() {
        let cfg = ChannelConfig::scaled_identities(2, 2, 10.0, 10.0, 1.0, FadingKind::RealGaussian)
            .unwrap();
        let sampler = MarginalSampler::new(&cfg);
        let grid = GridSpec {
            lo: -0.5,
            hi: 1.5,
            step: 0.25,
            complex_parts: false,
        };
        let wide = brute_force_w(&cfg, &sampler, &grid, 8, RandomStream::new(5)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let narrow = pool
            .install(|| brute_force_w(&cfg, &sampler, &grid, 8, RandomStream::new(5)))
            .unwrap();
        assert_eq!(wide.matrix(), narrow.matrix());
    }
}
