//! One-dimensional integration helpers.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `Ei(x)` for `x > 0` by its power series.
pub fn exp_integral_ei(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut k = 1.0;
    loop {
        term *= x / k;
        let add = term / k;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    EULER_GAMMA + x.ln() + sum
}

/// `∫_a^b e^t / t dt` for `0 < a ≤ b`.
pub fn exp_over_t_integral(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Ei(b) - Ei(a) with the logarithms combined to avoid cancellation.
    let mut term_a = 1.0;
    let mut term_b = 1.0;
    let mut sum = 0.0;
    let mut k = 1.0;
    loop {
        term_a *= a / k;
        term_b *= b / k;
        let add = (term_b - term_a) / k;
        sum += add;
        if term_b / k < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
        k += 1.0;
    }
    (b / a).ln() + sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_polynomials_and_exponential() {
        assert_relative_eq!(adaptive_simpson(&|x| x * x * x, 0.0, 2.0, 1e-12), 4.0, max_relative = 1e-14);
        assert_relative_eq!(
            adaptive_simpson(&f64::exp, 0.0, 1.0, 1e-13),
            std::f64::consts::E - 1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn exponential_integral_values() {
        // Ei(1) = 1.8951178163559367
        assert_relative_eq!(exp_integral_ei(1.0), 1.895_117_816_355_936_8, max_relative = 1e-14);
        let direct = exp_over_t_integral(0.05, 0.2);
        assert_relative_eq!(direct, 1.546_124_010_676_974_2, max_relative = 1e-13);
        assert_relative_eq!(direct, exp_integral_ei(0.2) - exp_integral_ei(0.05), max_relative = 1e-12);
        let quad = adaptive_simpson(&|t: f64| t.exp() / t, 0.05, 0.2, 1e-13);
        assert_relative_eq!(direct, quad, max_relative = 1e-11);
        assert_eq!(exp_over_t_integral(0.3, 0.3), 0.0);
    }
}
