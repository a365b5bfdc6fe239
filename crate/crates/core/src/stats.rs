//! Chi-square tail machinery for the correct-decision lower bound.

use crate::{Error, Result};

/// Natural log of the gamma function (Lanczos approximation, g = 5).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for (j, &c) in COEFFS.iter().enumerate() {
        ser += c / (x + 1.0 + j as f64);
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

const SERIES_EPS: f64 = 1e-15;
const MAX_ITER: usize = 500;

fn gamma_series(a: f64, x: f64) -> Result<f64> {
    let mut sum = 1.0 / a;
    let mut term = sum;
    for n in 1..MAX_ITER {
        term *= x / (a + n as f64);
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs() {
            return Ok(sum * (-x + a * x.ln() - ln_gamma(a)).exp());
        }
    }
    Err(Error::SolverFailure(format!("incomplete gamma series stalled at a={a}, x={x}")))
}

fn gamma_continued_fraction(a: f64, x: f64) -> Result<f64> {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < SERIES_EPS {
            return Ok((-x + a * x.ln() - ln_gamma(a)).exp() * h);
        }
    }
    Err(Error::SolverFailure(format!("incomplete gamma fraction stalled at a={a}, x={x}")))
}

/// Regularized lower incomplete gamma `P(a, x)`, absolute error below 1e-10.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::InvalidArgument(format!("shape must be positive, got {a}")));
    }
    if x < 0.0 {
        return Err(Error::InvalidArgument(format!("argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        Ok(1.0 - gamma_continued_fraction(a, x)?)
    }
}

/// CDF of the chi-square distribution with `n` degrees of freedom.
pub fn chi_square_cdf(x: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be >= 1".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    regularized_lower_gamma(n as f64 / 2.0, x / 2.0)
}

/// Lower bound on the probability of a correct likelihood-ratio decision for a
/// design of size `n` with separation `delta_value` and error standard
/// deviation `sigma`: the probability that the error norm stays below half the
/// surface separation, `P[chi2_n <= delta^2 / (4 sigma^2)]`.
pub fn correct_decision_lower_bound(delta_value: f64, n: usize, sigma: f64) -> Result<f64> {
    if delta_value < 0.0 || delta_value.is_nan() {
        return Err(Error::InvalidArgument("delta must be >= 0".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let t = delta_value / (2.0 * sigma);
    chi_square_cdf(t * t, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma_lr;

    #[test]
    fn zero_separation_gives_zero_probability() {
        assert_eq!(correct_decision_lower_bound(0.0, 5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn chi2_2_closed_form() {
        // With two degrees of freedom the bound is 1 - exp(-t^2/2).
        for t in [0.25, 1.0, 2.0, 3.5] {
            let p = correct_decision_lower_bound(2.0 * t, 2, 1.0).unwrap();
            let closed = 1.0 - (-t * t / 2.0).exp();
            assert!((p - closed).abs() < 1e-10, "t={t}: {p} vs {closed}");
        }
        let p = correct_decision_lower_bound(2.0, 2, 1.0).unwrap();
        assert!((p - 0.393_469_340_287_366_6).abs() < 1e-10);
    }

    #[test]
    fn large_separation_saturates_at_one() {
        let p = correct_decision_lower_bound(1e6, 3, 1.0).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(correct_decision_lower_bound(f64::INFINITY, 3, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn matches_reference_regularized_gamma() {
        for &a in &[0.5, 1.0, 2.5, 7.0, 30.0] {
            for &x in &[1e-3, 0.1, 0.9, 1.0, 2.0, 10.0, 55.0] {
                let mine = regularized_lower_gamma(a, x).unwrap();
                let reference = gamma_lr(a, x);
                assert!(
                    (mine - reference).abs() < 1e-10,
                    "P({a},{x}) = {mine} vs reference {reference}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(regularized_lower_gamma(-1.0, 1.0).is_err());
        assert!(regularized_lower_gamma(1.0, -1.0).is_err());
        assert!(chi_square_cdf(1.0, 0).is_err());
        assert!(correct_decision_lower_bound(1.0, 2, 0.0).is_err());
        assert!(correct_decision_lower_bound(-1.0, 2, 1.0).is_err());
    }

    #[test]
    fn monotone_in_separation() {
        let mut last = 0.0;
        for i in 0..50 {
            let d = i as f64 * 0.2;
            let p = correct_decision_lower_bound(d, 6, 0.3).unwrap();
            assert!(p >= last - 1e-14);
            last = p;
        }
    }
}
