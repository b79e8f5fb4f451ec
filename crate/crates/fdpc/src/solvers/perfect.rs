//! Closed-form inflation factor for exactly known fading.

use crate::channel::ChannelConfig;
use crate::numerics::{inverse, CMatrix};
use crate::solvers::{InflationFactor, SolverError};

/// The inflation factor that is optimal when the transmitter knows H:
/// `W = Sx H^H (H Sx H^H + Sz)^-1 H`. At this W the dirty-paper rate meets
/// the no-interference bound for that H exactly.
pub fn perfect_csit_w(config: &ChannelConfig, h: &CMatrix) -> Result<InflationFactor, SolverError> {
    let (t, r) = (config.t(), config.r());
    if h.rows() != r || h.cols() != t {
        return Err(SolverError::BadInflation(format!(
            "fading matrix must be {r}x{t}, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let sx = config.sigma_x().base();
    let sz = config.sigma_z().base();
    let hh = h.adjoint();
    let gram = &(&(h * sx) * &hh) + sz;
    let w = &(&(sx * &hh) * &inverse(&gram)?) * h;
    InflationFactor::new(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_fading, FadingKind};
    use crate::stream::RandomStream;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_channel_reduces_to_the_textbook_fraction() {
        for (p, n, h) in [(1.0, 1.0, 1.0), (10.0, 1.0, 1.0), (5.0, 2.0, 0.7)] {
            let cfg = ChannelConfig::scaled_identities(
                1,
                1,
                p,
                3.0,
                n,
                FadingKind::PointMass(CMatrix::from_real(1, 1, &[h]).unwrap()),
            )
            .unwrap();
            let w = perfect_csit_w(&cfg, &CMatrix::from_real(1, 1, &[h]).unwrap()).unwrap();
            let expect = p * h * h / (p * h * h + n);
            assert_relative_eq!(w.as_scalar().unwrap().re, expect, epsilon = 1e-12);
            assert_relative_eq!(w.as_scalar().unwrap().im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn approaches_identity_at_high_power_when_receive_side_dominates() {
        // For t <= r and full-rank H, W -> I as the power budget grows.
        for (t, r) in [(2usize, 2usize), (2, 3)] {
            let p = 1e6;
            let cfg =
                ChannelConfig::scaled_identities(t, r, p, p, 1.0, FadingKind::ComplexGaussian)
                    .unwrap();
            let h = sample_fading(&cfg, RandomStream::new(77).child(t as u64));
            let w = perfect_csit_w(&cfg, &h).unwrap();
            let dev = (w.matrix() - &CMatrix::identity(t)).max_abs();
            assert!(dev < 1e-2, "{t}x{r}: |W - I| = {dev:.3e}");
        }
    }

    #[test]
    fn rejects_mismatched_fading_shape() {
        let cfg = ChannelConfig::scaled_identities(2, 2, 1.0, 1.0, 1.0, FadingKind::RealGaussian)
            .unwrap();
        assert!(perfect_csit_w(&cfg, &CMatrix::identity(3)).is_err());
    }
}
