use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, reflection below 1/2).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Upper tail `Q(a, x)` by the modified Lentz continued fraction.
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// CDF of the χ² distribution with `dof` degrees of freedom.
pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    regularized_lower_gamma(dof as f64 / 2.0, x / 2.0)
}

fn chi2_ln_pdf(dof: usize, x: f64) -> f64 {
    let k = dof as f64 / 2.0;
    (k - 1.0) * x.ln() - x / 2.0 - k * 2f64.ln() - ln_gamma(k)
}

/// Quantile `G_d⁻¹(t)` of the χ² distribution.
///
/// Safeguarded Newton iteration inside a bisection bracket.
pub fn chi2_inverse_cdf(dof: usize, t: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::invalid(
            "chi-squared degrees of freedom must be positive",
        ));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!(
            "chi-squared quantile level must lie in (0, 1), got {t}"
        )));
    }
    let mut lo = 0.0_f64;
    let mut hi = (dof as f64).max(1.0);
    while chi2_cdf(dof, hi) < t {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let err = chi2_cdf(dof, x) - t;
        if err.abs() <= 1e-15 {
            break;
        }
        if err > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = err / chi2_ln_pdf(dof, x).exp();
        let newton = x - step;
        x = if step.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn two_dof_is_exponential() {
        let t = 1.0 - (-1.0f64).exp();
        let q = chi2_inverse_cdf(2, t).unwrap();
        assert!((q - 2.0).abs() < 1e-10, "{q}");
        for x in [0.1, 1.0, 4.0, 30.0] {
            assert!((chi2_cdf(2, x) - (1.0 - (-x / 2.0).exp())).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_levels_outside_unit_interval() {
        for t in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(chi2_inverse_cdf(3, t).is_err());
        }
        assert!(chi2_inverse_cdf(0, 0.5).is_err());
    }

    #[test]
    fn monotone_in_level_and_dof() {
        let mut prev = 0.0;
        for i in 1..20 {
            let q = chi2_inverse_cdf(3, i as f64 / 20.0).unwrap();
            assert!(q > prev);
            prev = q;
        }
        let mut prev = 0.0;
        for d in 1..12 {
            let q = chi2_inverse_cdf(d, 0.9).unwrap();
            assert!(q > prev);
            prev = q;
        }
    }
}
