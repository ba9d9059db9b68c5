//! The normalizing weight `C(η, τ) = ∫ exp(4π(xη − p(x) a·τ)) dx` and the
//! admissible frequency cone where it is finite.
//!
//! Values span hundreds of orders of magnitude across the frequencies a
//! kernel evaluation visits, so everything is carried as `log C` with the
//! exponent recentered at its maximum before integrating.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Frequency, PolynomialModel};
use crate::poly;
use crate::quad::{integrate, QuadOptions};

/// Width of the integration window below the exponent maximum.
/// `e^{-46} < 1e-20`.
pub const WINDOW_DEPTH: f64 = 46.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogWeight {
    /// Natural log of `C`; `+∞` outside the admissible cone.
    pub log_c: f64,
    /// Relative error estimate of `C`.
    pub est_error: f64,
    pub in_sigma: bool,
}

impl LogWeight {
    pub fn divergent() -> Self {
        LogWeight { log_c: f64::INFINITY, est_error: 0.0, in_sigma: false }
    }
}

/// Membership of `(η, τ)` in the region where `C` is finite.
///
/// With `p` of even degree and positive leading coefficient the exponent
/// tends to `-∞` in both directions exactly when `a·τ > 0`. On the boundary
/// `a·τ = 0` the integrand is `e^{4πxη}`, which is never integrable.
pub fn sigma_contains(model: &PolynomialModel, f: &Frequency) -> bool {
    model.a_dot(&f.tau) > 0.0
}

/// Closed form for `p = λx²`: `C = e^{πη²/(λτ)} / (2√(λτ))`.
pub fn log_weight_gaussian(lambda: f64, eta: f64, tau: f64) -> Result<LogWeight> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
    }
    if !(tau > 0.0) {
        return Err(Error::NonPositiveParameter { name: "tau", value: tau });
    }
    let lt = lambda * tau;
    Ok(LogWeight {
        log_c: PI * eta * eta / lt - 0.5 * lt.ln() - std::f64::consts::LN_2,
        est_error: 0.0,
        in_sigma: true,
    })
}

/// `log C` by adaptive quadrature around the maximizer of the exponent.
pub fn log_weight_quadrature(model: &PolynomialModel, f: &Frequency, rel_tol: f64) -> Result<LogWeight> {
    model.check_frequency(f)?;
    if !(rel_tol > 1e-14 && rel_tol < 1e-2) {
        return Err(Error::BadTolerance(rel_tol));
    }
    let c = model.a_dot(&f.tau);
    if !(c > 0.0) {
        return Err(Error::Divergent);
    }
    let (log_c, est_error) = ProfileWeight::new(model).log_weight(f.eta, c, rel_tol)?;
    Ok(LogWeight { log_c, est_error, in_sigma: true })
}

/// Precomputed profile data for repeated weight evaluations with one `p`.
#[derive(Debug, Clone)]
pub(crate) struct ProfileWeight {
    p: Vec<f64>,
    dp: Vec<f64>,
    ddp: Vec<f64>,
    convex: bool,
}

impl ProfileWeight {
    pub(crate) fn new(model: &PolynomialModel) -> Self {
        let p = model.p_coeffs().to_vec();
        ProfileWeight { dp: poly::derivative(&p, 1), ddp: poly::derivative(&p, 2), p, convex: model.is_convex() }
    }

    /// `(log C, relative error)` for scalar slope `c = a·τ > 0`.
    pub(crate) fn log_weight(&self, eta: f64, c: f64, rel_tol: f64) -> Result<(f64, f64)> {
        let q = |x: f64| 4.0 * PI * (x * eta - c * poly::eval(&self.p, x));
        // Critical points of q solve c p'(x) = η; bound them by the Cauchy radius.
        let mut crit = self.dp.clone();
        crit[0] -= eta / c;
        let radius = poly::cauchy_bound(&crit).max(1e-300);

        let x_star = if self.convex {
            let g = |x: f64| {
                let (v, d) = poly::eval_with_derivative(&crit, x);
                (v, d)
            };
            poly::safeguarded_newton(g, -radius, radius, 1e-15)
        } else {
            global_argmax(&q, -radius, radius)
        };
        let q_star = q(x_star);
        let threshold = q_star - WINDOW_DEPTH;
        let curvature = 4.0 * PI * c * poly::eval(&self.ddp, x_star);
        let step = if curvature > 0.0 { (WINDOW_DEPTH / curvature).sqrt() } else { 1.0 };

        let (left_start, right_start) =
            if self.convex { (x_star, x_star) } else { (x_star.min(-radius), x_star.max(radius)) };
        let left = window_edge(&q, left_start, -step, threshold);
        let right = window_edge(&q, right_start, step, threshold);

        let opts = QuadOptions { rel_tol: 0.25 * rel_tol, initial_panels: 4, max_panels: 400, ..Default::default() };
        let r = integrate(|x| (q(x) - q_star).exp(), left, right, &opts);
        let slope = |x: f64| 4.0 * PI * (eta - c * poly::eval(&self.dp, x)).abs();
        let tail = (q(left) - q_star).exp() / slope(left).max(1e-300)
            + (q(right) - q_star).exp() / slope(right).max(1e-300);
        let est_error = (r.error + tail) / r.value;
        if !(est_error <= rel_tol) || !(r.value > 0.0) {
            return Err(Error::ToleranceNotMet { requested: rel_tol, achieved: est_error });
        }
        Ok((q_star + r.value.ln(), est_error))
    }
}

fn global_argmax<F: Fn(f64) -> f64>(q: &F, lo: f64, hi: f64) -> f64 {
    const SAMPLES: usize = 2048;
    let h = (hi - lo) / SAMPLES as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=SAMPLES {
        let v = q(lo + h * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let a = lo + h * best_i.saturating_sub(1) as f64;
    let b = (lo + h * (best_i + 1) as f64).min(hi);
    poly::golden_min(|x| -q(x), a, b, 1e-15)
}

/// Point beyond `start` (in the direction of `step`) where `q` first drops to
/// `threshold`, assuming `q` is monotone beyond the first point below it.
fn window_edge<F: Fn(f64) -> f64>(q: &F, start: f64, step: f64, threshold: f64) -> f64 {
    if q(start) < threshold {
        return start;
    }
    let mut inner = start;
    let mut d = step;
    let mut outer = start + d;
    while q(outer) >= threshold {
        inner = outer;
        d *= 2.0;
        outer = start + d;
    }
    for _ in 0..60 {
        let mid = 0.5 * (inner + outer);
        if q(mid) >= threshold {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    outer
}
