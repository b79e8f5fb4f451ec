//! Scalar Gaussian helpers: pdf/cdf/quantile, truncated-normal moments and
//! inverse-CDF sampling, and Kolmogorov-Smirnov statistics.
//!
//! The moment integrals are the closed forms
//! `int_a^b x phi = phi(a) - phi(b)` and
//! `int_a^b x^2 phi = Phi(b) - Phi(a) + a phi(a) - b phi(b)`,
//! evaluated with care at infinite endpoints; the quantizer design and the
//! conditional channel sampler are built entirely on them.

use statrs::distribution::{ContinuousCDF, Normal};

fn unit_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is always valid")
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    unit_normal().cdf(x)
}

/// Standard normal quantile (inverse CDF), for `p` in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    unit_normal().inverse_cdf(p)
}

/// Standard normal survival function `1 - Phi(x)`, kept accurate in the
/// upper tail by evaluating the mirrored CDF.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// `int_a^b phi(x) dx = Phi(b) - Phi(a)`, evaluated from whichever tail
/// avoids cancellation: a cell at 8 sigma still reports its true (tiny)
/// mass instead of a rounded zero.
pub fn phi_mass(a: f64, b: f64) -> f64 {
    let m = if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_cdf(b) - normal_cdf(a)
    } else {
        1.0 - normal_cdf(a) - normal_sf(b)
    };
    m.max(0.0)
}

/// `int_a^b x phi(x) dx = phi(a) - phi(b)`.
pub fn phi_first_moment(a: f64, b: f64) -> f64 {
    normal_pdf(a) - normal_pdf(b)
}

/// `int_a^b x^2 phi(x) dx = (Phi(b) - Phi(a)) + a phi(a) - b phi(b)`.
pub fn phi_second_moment(a: f64, b: f64) -> f64 {
    let edge = |x: f64| {
        if x.is_infinite() {
            0.0
        } else {
            x * normal_pdf(x)
        }
    };
    phi_mass(a, b) + edge(a) - edge(b)
}

/// Mean of a standard normal truncated to `(a, b)`. An interval so deep
/// in a tail that its mass underflows to zero collapses to the boundary
/// nearest the origin, which is where all its conditional mass huddles.
pub fn truncated_normal_mean(a: f64, b: f64) -> f64 {
    assert!(a < b, "truncation interval ({a}, {b}) is empty");
    let mass = phi_mass(a, b);
    if mass <= 0.0 {
        return if a >= 0.0 { a } else { b };
    }
    (phi_first_moment(a, b) / mass).clamp(a, b)
}

fn inverse_cdf_within(a: f64, b: f64, u: f64) -> f64 {
    let lo = normal_cdf(a);
    let hi = normal_cdf(b);
    let p = (lo + u * (hi - lo)).clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
    normal_quantile(p)
}

/// Inverse-CDF draw from a standard normal truncated to `(a, b)`, driven by
/// a uniform `u` in (0, 1). Cells on the positive axis are mirrored into
/// the lower tail, where the CDF keeps full relative precision; the result
/// is clamped strictly inside the interval so that re-binning the sample
/// always lands in the same cell.
pub fn sample_truncated_normal(a: f64, b: f64, u: f64) -> f64 {
    debug_assert!(a < b);
    debug_assert!((0.0..=1.0).contains(&u));
    let mut x = if a >= 0.0 {
        -inverse_cdf_within(-b, -a, 1.0 - u)
    } else {
        inverse_cdf_within(a, b, u)
    };
    if a.is_finite() {
        x = x.max(a + 1e-12 * (1.0 + a.abs()));
    }
    if b.is_finite() {
        x = x.min(b - 1e-12 * (1.0 + b.abs()));
    }
    x
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_xs(x) - F_ys(x)|`.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
pub fn ks_against_cdf(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!xs.is_empty());
    let mut a = xs.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let n = a.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Golden-section search for the minimizer of a unimodal function on
/// `[lo, hi]`, run until the bracket is narrower than `tol`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    assert!(lo < hi && tol > 0.0);
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Mean and standard error of the mean of a sample.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0);
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn cdf_and_quantile_are_inverse() {
        for &x in &[-3.0, -1.2, 0.0, 0.7, 2.5] {
            assert_relative_eq!(normal_quantile(normal_cdf(x)), x, epsilon = 1e-9);
        }
    }

    #[test]
    fn pdf_matches_known_values() {
        assert_relative_eq!(normal_pdf(0.0), 0.3989422804014327, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(1.96), 0.9750021048517795, epsilon = 1e-9);
    }

    #[test]
    fn moment_integrals_over_the_whole_line() {
        assert_relative_eq!(
            phi_mass(f64::NEG_INFINITY, f64::INFINITY),
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            phi_first_moment(f64::NEG_INFINITY, f64::INFINITY),
            0.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            phi_second_moment(f64::NEG_INFINITY, f64::INFINITY),
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn moment_integrals_match_quadrature() {
        // Simple Riemann check on a finite cell.
        let (a, b) = (-0.3, 1.1);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            let w = normal_pdf(x) * h;
            m0 += w;
            m1 += x * w;
            m2 += x * x * w;
        }
        assert_relative_eq!(phi_mass(a, b), m0, epsilon = 1e-8);
        assert_relative_eq!(phi_first_moment(a, b), m1, epsilon = 1e-8);
        assert_relative_eq!(phi_second_moment(a, b), m2, epsilon = 1e-8);
    }

    #[test]
    fn half_line_conditional_mean() {
        // E[X | X > 0] = sqrt(2/pi) for a standard normal.
        assert_relative_eq!(
            truncated_normal_mean(0.0, f64::INFINITY),
            (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn truncated_samples_stay_inside_and_match_cdf() {
        let (a, b) = (-0.5, 1.25);
        let mut rng = crate::stream::RandomStream::new(11).rng();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| sample_truncated_normal(a, b, rng.random()))
            .collect();
        assert!(xs.iter().all(|&x| x > a && x < b));
        let mass = phi_mass(a, b);
        let d = ks_against_cdf(&xs, |x| phi_mass(a, x.min(b)) / mass);
        assert!(
            d < 0.02,
            "KS statistic {d:.4} too large for truncated sampler"
        );
    }

    #[test]
    fn ks_two_sample_detects_shift_and_accepts_identity() {
        let mut rng = crate::stream::RandomStream::new(13).rng();
        let xs: Vec<f64> = (0..5000)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let ys: Vec<f64> = (0..5000)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let zs: Vec<f64> = ys.iter().map(|y| y + 0.5).collect();
        assert!(ks_two_sample(&xs, &ys) < 0.04);
        assert!(
            ks_two_sample(&xs, &zs) > 0.1,
            "a half-sigma shift must be visible"
        );
    }

    #[test]
    fn ks_one_sample_on_exact_grid() {
        // Points at exact quantiles of U(0,1): statistic is 1/(2n) at best,
        // here 1/n with left-endpoint placement.
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let d = ks_against_cdf(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.011);
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let x = golden_section_min(|x| (x - 0.37).powi(2) + 1.0, 0.0, 1.0, 1e-9);
        assert_relative_eq!(x, 0.37, epsilon = 1e-7);
    }

    #[test]
    fn mean_and_std_error_basics() {
        let (m, se) = mean_and_std_error(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(m, 2.5, epsilon = 1e-15);
        // sample var = 5/3, se = sqrt(5/12)
        assert_relative_eq!(se, (5.0f64 / 12.0).sqrt(), epsilon = 1e-12);
    }
}
