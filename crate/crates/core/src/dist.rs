//! Scalar normal and chi-square helpers.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma;
use std::f64::consts::SQRT_2;

/// Standard normal CDF `Φ(x)`; exact at `±∞`.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-x / SQRT_2)
    }
}

/// Standard normal upper tail `1 - Φ(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// `Φ⁻¹(p)`, returning `∓∞` at the endpoints.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
    }
}

/// Two-sided p-value `2Φ(-|z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    libm::erfc(z.abs() / SQRT_2).min(1.0)
}

/// Upper tail of a central chi-square with `df` degrees of freedom.
pub fn chisq_sf(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma::gamma_ur(df / 2.0, x / 2.0)
    }
}

/// The value `q` with `Pr(χ²₁ > q) = p`.
pub fn chisq1_upper_quantile(p: f64) -> f64 {
    let z = normal_quantile(p / 2.0);
    z * z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reference_values() {
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-14);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
        assert_eq!(normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(normal_cdf(f64::NEG_INFINITY), 0.0);
        assert!((two_sided_p(2.0) - 0.04550026389635842).abs() < 1e-15);
        // far tail keeps relative precision
        assert!((normal_sf(10.0) / 7.619853024160527e-24 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn chisq_reference_values() {
        // df = 2 has the closed form exp(-x/2)
        for &x in &[0.1, 1.0, 5.9914645471079817, 30.0] {
            assert!((chisq_sf(2.0, x) - (-x / 2.0).exp()).abs() < 1e-14);
        }
        // df = 1 equals the two-sided normal tail at sqrt(x)
        for &x in &[0.01, 1.0, 3.841458820694124, 25.0] {
            assert!((chisq_sf(1.0, x) - two_sided_p(x.sqrt())).abs() < 1e-13);
        }
        assert!((chisq1_upper_quantile(0.5) - 0.454936423119572).abs() < 1e-12);
        assert_eq!(chisq1_upper_quantile(1.0), 0.0);
    }
}
