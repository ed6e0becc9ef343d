//! Statistical quantile kernels: F and standard-normal upper-tail quantiles
//! via numerical inversion of their forward CDFs.

use super::NumericsError;

const MAX_CF_ITER: usize = 300;

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().abs().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function I_x(a, b), continued fraction
/// (modified Lentz) with the symmetry switch for convergence.
pub fn betainc(a: f64, b: f64, x: f64) -> Result<f64, NumericsError> {
    if a <= 0.0 || b <= 0.0 {
        return Err(NumericsError::InvalidInput(
            "incomplete beta requires a > 0 and b > 0".into(),
        ));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(NumericsError::InvalidInput(format!(
            "incomplete beta argument {x} outside [0, 1]"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - betainc_cf(b, a, 1.0 - x)?)
    } else {
        betainc_cf(a, b, x)
    }
}

fn betainc_cf(a: f64, b: f64, x: f64) -> Result<f64, NumericsError> {
    let tiny = 1e-30;
    let eps = f64::EPSILON;
    let prefix = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut f = d;

    for m in 1..=MAX_CF_ITER {
        let fm = m as f64;
        let m2 = 2.0 * fm;

        let even = fm * (b - fm) * x / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + even / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        f *= d * c;

        let odd = -((a + fm) * (qab + fm) * x) / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + odd / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;
        if (delta - 1.0).abs() < eps {
            return Ok(prefix * f);
        }
    }
    Err(NumericsError::Numerical(
        "incomplete beta continued fraction did not converge".into(),
    ))
}

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// continued fraction otherwise.
fn gamma_p(a: f64, x: f64) -> Result<f64, NumericsError> {
    if x < 0.0 || a <= 0.0 {
        return Err(NumericsError::InvalidInput(
            "incomplete gamma requires a > 0, x >= 0".into(),
        ));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut term = sum;
        for _ in 0..MAX_CF_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON {
                return Ok(sum * (-x + a * x.ln() - ln_gamma(a)).exp());
            }
        }
        Err(NumericsError::Numerical(
            "incomplete gamma series did not converge".into(),
        ))
    } else {
        Ok(1.0 - gamma_q_cf(a, x)?)
    }
}

fn gamma_q_cf(a: f64, x: f64) -> Result<f64, NumericsError> {
    let tiny = 1e-30;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_CF_ITER {
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
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            return Ok(h * (-x + a * x.ln() - ln_gamma(a)).exp());
        }
    }
    Err(NumericsError::Numerical(
        "incomplete gamma continued fraction did not converge".into(),
    ))
}

/// Standard normal CDF Φ(z) through the incomplete gamma route:
/// erf(t) = P(1/2, t²).
pub fn normal_cdf(z: f64) -> f64 {
    let t = z * z / 2.0;
    if z >= 0.0 {
        0.5 * (1.0 + gamma_p(0.5, t).expect("gamma_p on valid domain"))
    } else {
        0.5 * (1.0 - gamma_p(0.5, t).expect("gamma_p on valid domain"))
    }
}

/// F-distribution CDF with d1, d2 degrees of freedom.
pub fn f_cdf(x: f64, d1: usize, d2: usize) -> Result<f64, NumericsError> {
    if d1 == 0 || d2 == 0 {
        return Err(NumericsError::InvalidInput(
            "F distribution requires d1 >= 1 and d2 >= 1".into(),
        ));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let (a, b) = (d1 as f64, d2 as f64);
    betainc(a / 2.0, b / 2.0, a * x / (a * x + b))
}

fn check_alpha(alpha: f64) -> Result<(), NumericsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(NumericsError::InvalidInput(format!(
            "tail probability {alpha} outside (0, 1)"
        )));
    }
    Ok(())
}

/// Upper-tail F quantile: the value F with P(F_{d1,d2} > F) = alpha.
pub fn f_quantile(d1: usize, d2: usize, alpha: f64) -> Result<f64, NumericsError> {
    if d1 == 0 || d2 == 0 {
        return Err(NumericsError::InvalidInput(
            "F distribution requires d1 >= 1 and d2 >= 1".into(),
        ));
    }
    check_alpha(alpha)?;
    let target = 1.0 - alpha;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut guard = 0;
    while f_cdf(hi, d1, d2)? < target {
        hi *= 2.0;
        guard += 1;
        if guard > 4000 {
            return Err(NumericsError::Numerical(
                "F quantile bracket expansion failed".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Upper-tail standard normal quantile: z with P(Z > z) = alpha.
pub fn normal_quantile(alpha: f64) -> Result<f64, NumericsError> {
    check_alpha(alpha)?;
    let target = 1.0 - alpha;
    let mut lo = -40.0_f64;
    let mut hi = 40.0_f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = normal_cdf(mid);
        if c == target {
            return Ok(mid);
        }
        if c < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
