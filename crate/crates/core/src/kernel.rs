//! Point evaluations of the Szegő kernel.
//!
//! For a single codimension the kernel is the frequency integral
//!
//! ```text
//! S(α, β) = ∫_0^∞ ∫_ℝ C(η,τ)^{-1} e^{2πη((x+x') + i(y−y'))} e^{−2πτ(p(x)+p(x') − i(t−t'))} dη dτ
//! ```
//!
//! For `P = a p` with several codimensions it is a Dirac mass along the leaf
//! `a_n(s − s') = b (t_n − t_n')` times a one-codimension kernel, which is
//! what [`DistributionalKernelValue`] records.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ManifoldPoint, PolynomialModel};
use crate::poly;
use crate::quad::{integrate, QuadOptions};
use crate::weights::ProfileWeight;

/// Absolute tolerance on the leaf offset.
pub const LEAF_TOL: f64 = 1e-9;

/// The distribution `amplitude · δ₀[leaf_offset]` on `ℝ^{n−1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionalKernelValue {
    pub leaf_offset: Vec<f64>,
    pub amplitude: Complex64,
    pub on_leaf: bool,
}

impl DistributionalKernelValue {
    fn new(leaf_offset: Vec<f64>, amplitude: Complex64) -> Self {
        let on_leaf = crate::geometry::offset_on_leaf(&leaf_offset);
        DistributionalKernelValue { leaf_offset, amplitude, on_leaf }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Method {
    /// Closed form when the profile is `λx²`, quadrature otherwise.
    #[default]
    Auto,
    Closed,
    Numeric,
}

fn single_codim(pt: &ManifoldPoint) -> Result<f64> {
    match pt.t.as_slice() {
        [t] => Ok(*t),
        other => Err(Error::DimensionMismatch { expected: 1, got: other.len() }),
    }
}

/// `πλ[(x−x')² + (y−y')²] − 2πi[(t−t') + λ(x+x')(y−y')]`.
pub fn quadric_denominator(lambda: f64, alpha: &ManifoldPoint, beta: &ManifoldPoint) -> Result<Complex64> {
    let dt = single_codim(alpha)? - single_codim(beta)?;
    let dx = alpha.x - beta.x;
    let dy = alpha.y - beta.y;
    Ok(Complex64::new(
        PI * lambda * (dx * dx + dy * dy),
        -2.0 * PI * (dt + lambda * (alpha.x + beta.x) * dy),
    ))
}

/// Closed-form kernel of the quadric `p = λx²`: `2λ / E²` with `E` from
/// [`quadric_denominator`].
pub fn quadric_kernel_1d(lambda: f64, alpha: &ManifoldPoint, beta: &ManifoldPoint) -> Result<Complex64> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
    }
    let e = quadric_denominator(lambda, alpha, beta)?;
    if e.norm() < 1e-300 {
        return Err(Error::OnDiagonal);
    }
    Ok(Complex64::new(2.0 * lambda, 0.0) / (e * e))
}

/// Numerical evaluation of the one-codimension kernel for a convex profile.
///
/// The inner `η` integral at each `τ` is truncated where its log-concave
/// envelope has dropped far below its peak. The outer `τ` integral runs to a
/// cutoff `T` and the remainder is closed with an endpoint asymptotic
/// expansion, which also handles separations along `t` alone, where the
/// integrand oscillates without decaying.
pub fn nagel_kernel_numeric(
    model: &PolynomialModel,
    alpha: &ManifoldPoint,
    beta: &ManifoldPoint,
    rel_tol: f64,
) -> Result<Complex64> {
    if model.n() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: model.n() });
    }
    if !model.is_convex() {
        return Err(Error::UnsupportedProfile("numeric kernel requires a convex profile"));
    }
    if !(rel_tol > 1e-12 && rel_tol < 1e-1) {
        return Err(Error::BadTolerance(rel_tol));
    }
    let ta = single_codim(alpha)?;
    let tb = single_codim(beta)?;
    if alpha.x == beta.x && alpha.y == beta.y && ta == tb {
        return Err(Error::OnDiagonal);
    }
    // a_n rescales the profile: p(x) a_n τ.
    let scaled = model.with_scaled_profile(model.a_last(), &[1.0])?;
    let integrand = TauIntegrand::new(&scaled, alpha, beta, ta - tb, rel_tol);
    integrand.integrate()
}

struct TauIntegrand {
    weight: ProfileWeight,
    dp: Vec<f64>,
    ddp: Vec<f64>,
    sum_x: f64,
    dy: f64,
    dt: f64,
    p_sum: f64,
    rel_tol: f64,
}

/// `F(τ) = exp(log_scale) · value`.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    log_scale: f64,
    value: Complex64,
}

impl Scaled {
    fn get(&self) -> Complex64 {
        self.value * self.log_scale.exp()
    }
}

impl TauIntegrand {
    fn new(model: &PolynomialModel, alpha: &ManifoldPoint, beta: &ManifoldPoint, dt: f64, rel_tol: f64) -> Self {
        TauIntegrand {
            weight: ProfileWeight::new(model),
            dp: poly::derivative(model.p_coeffs(), 1),
            ddp: poly::derivative(model.p_coeffs(), 2),
            sum_x: alpha.x + beta.x,
            dy: alpha.y - beta.y,
            dt,
            p_sum: model.p(alpha.x) + model.p(beta.x),
            rel_tol,
        }
    }

    fn weight_tol(&self) -> f64 {
        (1e-3 * self.rel_tol).clamp(1e-13, 1e-6)
    }

    /// Envelope exponent `2πηX − log C(η, τ)`; concave in `η`.
    fn envelope(&self, eta: f64, tau: f64) -> f64 {
        match self.weight.log_weight(eta, tau, self.weight_tol()) {
            Ok((log_c, _)) => 2.0 * PI * eta * self.sum_x - log_c,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn at(&self, tau: f64) -> Result<Scaled> {
        if tau <= 0.0 {
            return Ok(Scaled { log_scale: 0.0, value: Complex64::new(0.0, 0.0) });
        }
        let h = |eta: f64| self.envelope(eta, tau);
        // The η whose weight is centered at the midpoint of x and x'.
        let mid = 0.5 * self.sum_x;
        let center = tau * poly::eval(&self.dp, mid);
        let curv = tau * poly::eval(&self.ddp, mid);
        let width = if curv > 1e-12 { (curv / (4.0 * PI)).sqrt().max(1e-3 * (1.0 + center.abs())) } else { 1.0 };

        // Bracket the maximum of the concave envelope, then refine.
        let (mut lo, mut hi) = (center - width, center + width);
        let h_center = h(center);
        let mut step = width;
        for _ in 0..80 {
            if h(lo) <= h_center {
                break;
            }
            step *= 2.0;
            lo -= step;
        }
        step = width;
        for _ in 0..80 {
            if h(hi) <= h_center {
                break;
            }
            step *= 2.0;
            hi += step;
        }
        let eta_star = poly::golden_min(|e| -h(e), lo, hi, 1e-10);
        let h_star = h(eta_star);
        if !h_star.is_finite() {
            return Err(Error::ToleranceNotMet { requested: self.rel_tol, achieved: f64::INFINITY });
        }
        let depth = (1.0 / self.rel_tol).ln() + 25.0;
        let edge = |dir: f64| {
            let mut inner = eta_star;
            let mut d = dir * width;
            let mut outer = eta_star + d;
            for _ in 0..80 {
                if h(outer) <= h_star - depth {
                    break;
                }
                inner = outer;
                d *= 2.0;
                outer = eta_star + d;
            }
            for _ in 0..40 {
                let m = 0.5 * (inner + outer);
                if h(m) > h_star - depth {
                    inner = m;
                } else {
                    outer = m;
                }
            }
            outer
        };
        let (left, right) = (edge(-1.0), edge(1.0));
        let cycles = (right - left) * self.dy.abs();
        let opts = QuadOptions {
            abs_tol: 1e-4 * self.rel_tol * (right - left) / depth,
            rel_tol: 0.0,
            initial_panels: 4 + (2.0 * cycles).ceil() as usize,
            max_panels: 4000,
            parallel: false,
        };
        let dy = self.dy;
        let r = integrate(
            |eta: f64| {
                let mag = (h(eta) - h_star).exp();
                Complex64::from_polar(mag, 2.0 * PI * eta * dy)
            },
            left,
            right,
            &opts,
        );
        if !r.converged {
            return Err(Error::ToleranceNotMet { requested: self.rel_tol, achieved: r.error });
        }
        Ok(Scaled {
            log_scale: h_star - 2.0 * PI * tau * self.p_sum,
            value: r.value * Complex64::from_polar(1.0, 2.0 * PI * tau * self.dt),
        })
    }

    fn integrate(&self) -> Result<Complex64> {
        let mut cutoff = self.initial_cutoff();
        for _ in 0..8 {
            match self.try_cutoff(cutoff)? {
                Some(v) => return Ok(v),
                None => cutoff *= 2.0,
            }
        }
        Err(Error::NearDiagonal)
    }

    /// Start where the leading oscillation or decay has run through a few
    /// units of phase.
    fn initial_cutoff(&self) -> f64 {
        let decay = 2.0 * PI * self.p_sum;
        let rate = (2.0 * PI * self.dt).hypot(decay).max(1.0);
        (30.0 / rate).max(2.0)
    }

    fn try_cutoff(&self, cutoff: f64) -> Result<Option<Complex64>> {
        let cycles = cutoff * (self.dt.abs() + self.dy.abs() * (1.0 + self.sum_x.abs()));
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 0.05 * self.rel_tol,
            initial_panels: 4 + (2.0 * cycles).ceil() as usize,
            max_panels: 600,
            parallel: true,
        };
        let failure = std::sync::Mutex::new(None);
        // τ = v² regularizes the algebraic behavior at τ = 0.
        let body = integrate(
            |v: f64| match self.at(v * v) {
                Ok(s) => s.get() * (2.0 * v),
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            },
            0.0,
            cutoff.sqrt(),
            &opts,
        );
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        if !body.converged {
            return Ok(None);
        }

        let (tail, tail_err, ratio) = self.tail(cutoff)?;
        let total = body.value + tail;
        let scale = total.norm();
        let cancellation = body.abs_integral * 1e-13;
        if ratio < 0.1 && tail_err + cancellation + body.error <= self.rel_tol * scale {
            Ok(Some(total))
        } else {
            Ok(None)
        }
    }

    /// `∫_T^∞ e^{−u}` by the endpoint expansion
    /// `e^{−u}[1/u' − u''/u'³ + (3u''² − u'u''')/u'⁵]`, with derivatives of
    /// `log F` from finite differences. Returns the value, the size of the last
    /// retained term as its error, and `|u''|/|u'|²`.
    fn tail(&self, cutoff: f64) -> Result<(Complex64, f64, f64)> {
        let f0 = self.at(cutoff)?;
        let log_ratio = |s: &Scaled| (s.value / f0.value).ln() + (s.log_scale - f0.log_scale);
        // Local frequency from a narrow pair, used only to unwrap the phase.
        let twist = self.dy * poly::eval(&self.dp, 0.5 * self.sum_x);
        let rate_scale = (2.0 * PI * (self.dt.abs() + twist.abs())).hypot(2.0 * PI * self.p_sum).max(1.0 / cutoff);
        let narrow = (0.02 / rate_scale).min(0.01 * cutoff);
        let slope = (log_ratio(&self.at(cutoff + narrow)?) - log_ratio(&self.at(cutoff - narrow)?)) / (2.0 * narrow);

        let h = 0.03 * cutoff;
        let mut l = [Complex64::new(0.0, 0.0); 5];
        for (k, off) in [-2.0, -1.0, 1.0, 2.0].into_iter().enumerate() {
            let s = self.at(cutoff + off * h)?;
            let linear = slope * (off * h);
            let residual = (s.value / f0.value * (-linear).exp()).ln() + (s.log_scale - f0.log_scale);
            l[if k < 2 { k } else { k + 1 }] = residual + linear;
        }
        let d3 = (l[4] - 2.0 * l[3] + 2.0 * l[1] - l[0]) / (2.0 * h * h * h);
        let d1 = (l[3] - l[1]) / (2.0 * h) - d3 * (h * h / 6.0);
        let d2 = (l[3] + l[1]) / (h * h);
        let (u1, u2, u3) = (-d1, -d2, -d3);
        if u1.norm() == 0.0 {
            return Ok((Complex64::new(0.0, 0.0), f64::INFINITY, f64::INFINITY));
        }
        let e0 = f0.get();
        let t1 = e0 / u1;
        let t2 = -e0 * u2 / (u1 * u1 * u1);
        let t3 = e0 * (3.0 * u2 * u2 - u1 * u3) / u1.powi(5);
        let ratio = u2.norm() / u1.norm_sqr();
        // next term estimated from the geometric decay of the last two, plus
        // the finite-difference error in u''
        let err = t3.norm() * (t3.norm() / t2.norm().max(f64::MIN_POSITIVE)).min(1.0) + 1e-3 * t2.norm();
        Ok((t1 + t2 + t3, err, ratio))
    }
}

/// Kernel of a model `P = a p` with `a_n > 0`, as `amplitude · δ₀[offset]`.
///
/// The offset is `a_n(s − s') − b(t_n − t_n')`. Writing `P = (a/a_n)(a_n p)`
/// reduces to the normalized case, whose Dirac mass in `(s − s') − (b/a_n)Δt_n`
/// equals `a_n^{n−1} δ₀[offset]`; that factor is folded into the amplitude so
/// the pair represents the kernel itself.
pub fn factorized_kernel(
    model: &PolynomialModel,
    alpha: &ManifoldPoint,
    beta: &ManifoldPoint,
    rel_tol: f64,
    method: Method,
) -> Result<DistributionalKernelValue> {
    model.check_point(alpha)?;
    model.check_point(beta)?;
    let a_n = model.a_last();
    if a_n < 0.0 {
        return Err(Error::NegativeLastDirection(a_n));
    }
    let offset = crate::geometry::leaf_offset(model, alpha, beta);
    let a1 = alpha.project_last();
    let b1 = beta.project_last();
    let amplitude = match (model.quadric_coefficient(), method) {
        (Some(lambda), Method::Auto | Method::Closed) => quadric_kernel_1d(lambda * a_n, &a1, &b1)?,
        (None, Method::Closed) => return Err(Error::UnsupportedProfile("closed form needs p = λx²")),
        _ => {
            if !model.is_convex() {
                return Err(Error::UnsupportedProfile("profile is neither quadric nor convex"));
            }
            let one = model.with_scaled_profile(a_n, &[1.0])?;
            nagel_kernel_numeric(&one, &a1, &b1, rel_tol)?
        }
    };
    let jacobian = a_n.powi(offset.len() as i32);
    Ok(DistributionalKernelValue::new(offset, amplitude * jacobian))
}

/// Pairs a kernel with a test function in the single leaf variable `s'`
/// (codimension two), replacing `δ₀` by a centered Gaussian of standard
/// deviation `width`.
///
/// `producer(s')` evaluates the kernel with `s'` substituted into the second
/// point. The offset is affine in `s'`, which locates the leaf point and fixes
/// the integration window.
pub fn pair_with_test_function<K, P>(producer: K, phi: P, width: f64) -> Result<Complex64>
where
    K: Fn(f64) -> Result<DistributionalKernelValue> + Sync,
    P: Fn(f64) -> f64 + Sync,
{
    if !(width > 0.0) {
        return Err(Error::NonPositiveParameter { name: "width", value: width });
    }
    let v0 = producer(0.0)?;
    let v1 = producer(1.0)?;
    if v0.leaf_offset.len() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: v0.leaf_offset.len() });
    }
    let (o0, o1) = (v0.leaf_offset[0], v1.leaf_offset[0]);
    let slope = o1 - o0;
    if slope == 0.0 {
        return Err(Error::UnsupportedProfile("leaf offset does not depend on s'"));
    }
    let center = -o0 / slope;
    let half = 12.0 * width / slope.abs();
    let norm = 1.0 / (width * (2.0 * PI).sqrt());
    let failure = std::sync::Mutex::new(None);
    let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 1e-14, initial_panels: 8, max_panels: 2000, parallel: false };
    let r = integrate(
        |s: f64| match producer(s) {
            Ok(v) => {
                let z = v.leaf_offset[0] / width;
                v.amplitude * (phi(s) * norm * (-0.5 * z * z).exp())
            }
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        },
        center - half,
        center + half,
        &opts,
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    if !r.converged {
        return Err(Error::ToleranceNotMet { requested: opts.rel_tol, achieved: r.error });
    }
    Ok(r.value)
}
