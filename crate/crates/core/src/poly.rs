//! Dense real polynomials stored in increasing degree order.

/// Drops trailing zero coefficients, keeping at least one entry.
pub fn trim(coeffs: &[f64]) -> Vec<f64> {
    let mut out = coeffs.to_vec();
    while out.len() > 1 && out[out.len() - 1] == 0.0 {
        out.pop();
    }
    out
}

/// Horner evaluation.
#[inline]
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Value and first derivative in one pass.
#[inline]
pub fn eval_with_derivative(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &c in coeffs.iter().rev() {
        d = d * x + v;
        v = v * x + c;
    }
    (v, d)
}

/// Coefficients of the `k`-th derivative. Returns `[0.0]` past the degree.
pub fn derivative(coeffs: &[f64], k: usize) -> Vec<f64> {
    if k >= coeffs.len() {
        return vec![0.0];
    }
    (k..coeffs.len())
        .map(|i| {
            let falling: f64 = ((i - k + 1)..=i).map(|j| j as f64).product();
            coeffs[i] * falling
        })
        .collect()
}

/// Cauchy bound on the magnitude of every real root. Zero for constants.
pub fn cauchy_bound(coeffs: &[f64]) -> f64 {
    let c = trim(coeffs);
    if c.len() <= 1 {
        return 0.0;
    }
    let lead = c[c.len() - 1].abs();
    1.0 + c[..c.len() - 1].iter().fold(0.0f64, |m, v| m.max(v.abs() / lead))
}

/// Global minimum on `[lo, hi]` by dense sampling and golden-section refinement.
pub fn minimize_on(coeffs: &[f64], lo: f64, hi: f64) -> f64 {
    const SAMPLES: usize = 4096;
    let h = (hi - lo) / SAMPLES as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..=SAMPLES {
        let v = eval(coeffs, lo + h * i as f64);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let a = lo + h * best_i.saturating_sub(1) as f64;
    let b = (lo + h * (best_i + 1) as f64).min(hi);
    let x = golden_min(|x| eval(coeffs, x), a, b, 1e-14);
    best.min(eval(coeffs, x))
}

/// Golden-section search for a minimizer of a unimodal function.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Root of a function that changes sign on `[lo, hi]`, via Newton steps
/// safeguarded by bisection. `fd` returns value and derivative.
pub fn safeguarded_newton<F: Fn(f64) -> (f64, f64)>(fd: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let (flo, _) = fd(lo);
    let (fhi, _) = fd(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    // orient so that f(lo) < 0 < f(hi)
    if flo > 0.0 {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = fd(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / d;
        let inside = d != 0.0 && newton.is_finite() && (newton - lo) * (newton - hi) < 0.0;
        let next = if inside { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= tol * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_coefficients() {
        // x^4 -> 12x^2 -> 24x -> 24 -> 0
        let p = [0.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(derivative(&p, 2), vec![0.0, 0.0, 12.0]);
        assert_eq!(derivative(&p, 3), vec![0.0, 24.0]);
        assert_eq!(derivative(&p, 4), vec![24.0]);
        assert_eq!(derivative(&p, 5), vec![0.0]);
        assert_eq!(derivative(&p, 0), p.to_vec());
    }

    #[test]
    fn value_and_slope() {
        let p = [1.0, -2.0, 0.5, 3.0];
        let (v, d) = eval_with_derivative(&p, 1.7);
        assert!((v - eval(&p, 1.7)).abs() < 1e-14);
        assert!((d - eval(&derivative(&p, 1), 1.7)).abs() < 1e-13);
    }

    #[test]
    fn roots_inside_cauchy_bound() {
        // (x - 3)(x + 5) = x^2 + 2x - 15
        assert!(cauchy_bound(&[-15.0, 2.0, 1.0]) >= 5.0);
        let r = safeguarded_newton(|x| eval_with_derivative(&[-15.0, 2.0, 1.0], x), 0.0, 16.0, 1e-15);
        assert!((r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn minimum_of_quartic() {
        // x^4 - 2x^2 has minimum -1 at ±1
        let m = minimize_on(&[0.0, 0.0, -2.0, 0.0, 1.0], -3.0, 3.0);
        assert!((m + 1.0).abs() < 1e-12);
    }
}
