//! Acceptance suites. Each suite computes its measurements against
//! independent oracles and returns named checks with pinned bounds; the CLI
//! `verify` command and the `acceptance` test target both run these.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::{self, control_distance_upper_bound, gauge, leaf_offset, size_ratio_report, tangency_report};
use crate::kernel::{factorized_kernel, nagel_kernel_numeric, pair_with_test_function, quadric_kernel_1d, Method};
use crate::model::{build_model, Frequency, ManifoldPoint};
use crate::projection::{
    apply_lbar, apply_with_cache, partial_fourier, suggest_half_width, Direction, GridFunction, GridSpec,
    SliceWeightCache,
};
use crate::quad::{integrate, QuadOptions};
use crate::weights::{log_weight_gaussian, log_weight_quadrature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Weights,
    Shift,
    Kernel,
    Factorization,
    Projection,
    Size,
    Geometry,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Weights,
        Suite::Shift,
        Suite::Kernel,
        Suite::Factorization,
        Suite::Projection,
        Suite::Size,
        Suite::Geometry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Weights => "weights",
            Suite::Shift => "shift",
            Suite::Kernel => "kernel",
            Suite::Factorization => "factorization",
            Suite::Projection => "projection",
            Suite::Size => "size",
            Suite::Geometry => "geometry",
            Suite::All => "all",
        }
    }

    pub fn expand(self) -> Vec<Suite> {
        if self == Suite::All {
            Self::EACH.to_vec()
        } else {
            vec![self]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub pass: bool,
    /// `None` when the measurement failed or is a suppressed timing.
    pub measured: Option<f64>,
    pub bound: f64,
    pub comparison: Comparison,
    pub runtime_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Record wall-clock times. Without them the report is byte-identical
    /// across runs with the same seed.
    pub timings: bool,
    /// Replaces the bound of every accuracy check, to exercise failures.
    pub tolerance_override: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 7, timings: true, tolerance_override: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub suites: Vec<&'static str>,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Collects checks for one suite.
struct Recorder<'a> {
    suite: &'static str,
    opts: &'a VerifyOptions,
    checks: Vec<Check>,
}

impl<'a> Recorder<'a> {
    fn new(suite: Suite, opts: &'a VerifyOptions) -> Self {
        Recorder { suite: suite.name(), opts, checks: Vec::new() }
    }

    fn ms(&self, start: Instant) -> u64 {
        if self.opts.timings {
            start.elapsed().as_millis() as u64
        } else {
            0
        }
    }

    fn push(&mut self, name: &str, measured: Result<f64>, bound: f64, cmp: Comparison, start: Instant) -> usize {
        let bound = match (self.opts.tolerance_override, cmp) {
            (Some(t), Comparison::AtMost) if bound > 0.0 => t,
            _ => bound,
        };
        let (measured, detail) = match measured {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(json!({ "error": e.to_string() }))),
        };
        let pass = measured.is_some_and(|m| match cmp {
            Comparison::AtMost => m <= bound,
            Comparison::AtLeast => m >= bound,
        });
        log::info!("{}.{}: {:?} vs {} -> {}", self.suite, name, measured, bound, if pass { "pass" } else { "FAIL" });
        self.checks.push(Check {
            suite: self.suite,
            name: name.to_string(),
            pass,
            measured: measured.filter(|m| m.is_finite()),
            bound,
            comparison: cmp,
            runtime_ms: self.ms(start),
            detail,
        });
        self.checks.len() - 1
    }

    fn at_most(&mut self, name: &str, measured: Result<f64>, bound: f64, start: Instant) -> usize {
        self.push(name, measured, bound, Comparison::AtMost, start)
    }

    fn at_least(&mut self, name: &str, measured: Result<f64>, bound: f64, start: Instant) -> usize {
        self.push(name, measured, bound, Comparison::AtLeast, start)
    }

    /// Wall-clock limit; the measured value is withheld without timings.
    fn runtime(&mut self, name: &str, start: Instant, limit_s: f64) {
        let secs = start.elapsed().as_secs_f64();
        let pass = secs <= limit_s;
        self.checks.push(Check {
            suite: self.suite,
            name: name.to_string(),
            pass,
            measured: self.opts.timings.then_some(secs),
            bound: limit_s,
            comparison: Comparison::AtMost,
            runtime_ms: self.ms(start),
            detail: None,
        });
    }

    fn detail(&mut self, idx: usize, value: serde_json::Value) {
        let slot = &mut self.checks[idx].detail;
        match slot {
            Some(serde_json::Value::Object(m)) => {
                if let serde_json::Value::Object(extra) = value {
                    m.extend(extra);
                }
            }
            _ => *slot = Some(value),
        }
    }
}

pub fn run(suite: Suite, opts: &VerifyOptions) -> Report {
    let suites = suite.expand();
    let mut checks = Vec::new();
    for s in &suites {
        let mut rec = Recorder::new(*s, opts);
        match s {
            Suite::Weights => weights_suite(&mut rec),
            Suite::Shift => shift_suite(&mut rec),
            Suite::Kernel => kernel_suite(&mut rec),
            Suite::Factorization => factorization_suite(&mut rec),
            Suite::Projection => projection_suite(&mut rec),
            Suite::Size => size_suite(&mut rec),
            Suite::Geometry => geometry_suite(&mut rec),
            Suite::All => unreachable!("expanded above"),
        }
        checks.extend(rec.checks);
    }
    Report {
        seed: opts.seed,
        suites: suites.iter().map(|s| s.name()).collect(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

fn rel_c_error(log_a: f64, log_b: f64) -> f64 {
    (log_a - log_b).exp_m1().abs()
}

fn weights_suite(rec: &mut Recorder) {
    let start = Instant::now();
    let mut grid = Vec::new();
    for lambda in [0.5, 1.0, 2.0] {
        for i in 0..=12 {
            for k in 1..=20 {
                grid.push((lambda, -3.0 + 0.5 * i as f64, 0.25 * k as f64));
            }
        }
    }
    let errors: Result<Vec<f64>> = grid
        .par_iter()
        .map(|&(lambda, eta, tau)| {
            let model = build_model(&[0.0, 0.0, lambda], &[1.0])?;
            let q = log_weight_quadrature(&model, &Frequency::new(eta, vec![tau]), 1e-12)?;
            Ok(rel_c_error(q.log_c, log_weight_gaussian(lambda, eta, tau)?.log_c))
        })
        .collect();
    let worst = errors.map(|e| e.into_iter().fold(0.0, f64::max));
    let i = rec.at_most("gaussian_oracle_rel_error", worst, 1e-8, start);
    rec.detail(i, json!({ "points": grid.len() }));
    rec.runtime("runtime_s", start, 10.0);
}

fn shift_suite(rec: &mut Recorder) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(rec.opts.seed);
    let result = (|| -> Result<f64> {
        let two = build_model(&[0.0, 0.0, 1.0], &[2.0, 1.0])?;
        let one = build_model(&[0.0, 0.0, 1.0], &[1.0])?;
        let mut worst: f64 = 0.0;
        let mut count = 0;
        while count < 200 {
            let eta = rng.gen_range(-3.0..3.0);
            let sigma = rng.gen_range(-2.0..2.0);
            let tau_n = rng.gen_range(-2.0..4.0);
            let c = tau_n + 2.0 * sigma;
            if !(0.05..=6.0).contains(&c) {
                continue;
            }
            let lhs = log_weight_quadrature(&two, &Frequency::new(eta, vec![sigma, tau_n]), 1e-13)?;
            let rhs = log_weight_quadrature(&one, &Frequency::new(eta, vec![c]), 1e-13)?;
            worst = worst.max(rel_c_error(lhs.log_c, rhs.log_c));
            count += 1;
        }
        Ok(worst)
    })();
    rec.at_most("shift_identity_rel_error", result, 1e-10, start);
}

/// Pairs on the λ = 1 quadric with gauge separation uniform in `[lo, hi]`.
fn gauge_pairs(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64) -> Vec<(ManifoldPoint, ManifoldPoint)> {
    (0..count)
        .map(|_| {
            let alpha = ManifoldPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), vec![rng.gen_range(
                -1.0..1.0,
            )]);
            let rho: f64 = rng.gen_range(lo..hi);
            let theta: f64 = rng.gen_range(-0.5 * PI..0.5 * PI);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let r = theta.cos().sqrt() * rho;
            let (dx, dy) = (r * phi.cos(), r * phi.sin());
            let dt = theta.sin() * rho * rho - (2.0 * alpha.x - dx) * dy;
            let beta = ManifoldPoint::new(alpha.x - dx, alpha.y - dy, vec![alpha.t[0] - dt]);
            (alpha, beta)
        })
        .collect()
}

fn kernel_suite(rec: &mut Recorder) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(rec.opts.seed);
    let pairs = gauge_pairs(&mut rng, 20, 0.5, 3.0);
    let result = (|| -> Result<(f64, f64, f64)> {
        let model = build_model(&[0.0, 0.0, 1.0], &[1.0])?;
        let errs: Result<Vec<(f64, f64)>> = pairs
            .par_iter()
            .map(|(a, b)| {
                let exact = quadric_kernel_1d(1.0, a, b)?;
                let numeric = nagel_kernel_numeric(&model, a, b, 1e-6)?;
                Ok(((numeric - exact).norm() / exact.norm(), gauge(1.0, a, b)?))
            })
            .collect();
        let errs = errs?;
        let worst = errs.iter().map(|e| e.0).fold(0.0, f64::max);
        let gmin = errs.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        let gmax = errs.iter().map(|e| e.1).fold(0.0, f64::max);
        Ok((worst, gmin, gmax))
    })();
    let measured = result.as_ref().map(|r| r.0).map_err(Clone::clone);
    let i = rec.at_most("numeric_vs_closed_rel_error", measured, 1e-4, start);
    if let Ok((_, gmin, gmax)) = result {
        rec.detail(i, json!({ "points": pairs.len(), "gauge_min": gmin, "gauge_max": gmax }));
    }
    rec.runtime("runtime_s", start, 60.0);
}

/// Fourier-side oracle for the `n = 2` quadric `a x²`: the pairing of the
/// kernel against `φ(s') = e^{−s'²}` in the leaf variable, with the kernel
/// mollified by a Gaussian of standard deviation `width` in `s − s'`
/// (`width = 0` gives the exact pairing).
///
/// `∫dσ e^{2πiσs} e^{−2π²w²σ²} φ̂(σ) K(σ)`, where `φ̂(σ) = √π e^{−π²σ²}` and
/// `K(σ) = ∫_{a·τ>0} dτ_n ∫ dη C⁻¹ e^{2πη(x+x') + 2πiηΔy − 2π(a·τ)(x²+x'²) + 2πiτ_nΔt_n}`
/// with `τ = (σ, τ_n)`. Only the weight `C` is taken in closed form.
pub fn fourier_pairing(a: [f64; 2], alpha: &ManifoldPoint, beta: &ManifoldPoint, width: f64) -> Result<Complex64> {
    let (x, xp) = (alpha.x, beta.x);
    let sum_x = x + xp;
    let dy = alpha.y - beta.y;
    let dtn = alpha.t_n() - beta.t_n();
    let s = alpha.s()[0];
    let quad = |tol: f64| QuadOptions { rel_tol: tol, abs_tol: 1e-300, initial_panels: 4, max_panels: 4000, parallel: false };

    let inner = |c: f64| -> Complex64 {
        let half = 12.0 * c.sqrt() + 1e-9;
        let center = c * sum_x;
        integrate(
            |eta: f64| {
                let logc = log_weight_gaussian(1.0, eta, c).map_or(f64::INFINITY, |w| w.log_c);
                let re = 2.0 * PI * eta * sum_x - 2.0 * PI * c * (x * x + xp * xp) - logc;
                Complex64::from_polar(re.exp(), 2.0 * PI * eta * dy)
            },
            center - half,
            center + half,
            &quad(1e-12),
        )
        .value
    };
    let k_of_sigma = |sigma: f64| -> Complex64 {
        // τ_n = τ_lo + u with a·τ = a_n u
        let tau_lo = -a[0] * sigma / a[1];
        let f = |u: f64| {
            if u <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            inner(a[1] * u) * Complex64::from_polar(1.0, 2.0 * PI * (tau_lo + u) * dtn)
        };
        let mut upper = 1.0;
        let mut peak: f64 = 0.0;
        loop {
            let v = f(upper).norm();
            peak = peak.max(v);
            if v < 1e-17 * peak.max(1e-300) && upper > 1.0 || upper > 1e4 {
                break;
            }
            upper *= 2.0;
        }
        integrate(f, 0.0, upper, &QuadOptions { initial_panels: 16, ..quad(1e-11) }).value
    };
    let r = integrate(
        |sigma: f64| {
            let weight = PI.sqrt() * (-PI * PI * sigma * sigma * (1.0 + 2.0 * width * width)).exp();
            k_of_sigma(sigma) * Complex64::from_polar(weight, 2.0 * PI * sigma * s)
        },
        -5.0,
        5.0,
        &QuadOptions { initial_panels: 8, parallel: true, ..quad(1e-10) },
    );
    if !r.converged {
        return Err(Error::ToleranceNotMet { requested: 1e-10, achieved: r.error / r.value.norm() });
    }
    Ok(r.value)
}

pub const MOLLIFIER_WIDTHS: [f64; 3] = [0.1, 0.05, 0.025];

#[derive(Debug, Clone, Serialize)]
pub struct NormalizationStudy {
    pub a: [f64; 2],
    pub pairings: Vec<Complex64>,
    pub errors: Vec<f64>,
    pub worst_error_ratio: f64,
    pub extrapolated: Complex64,
    /// `A φ(s*) / a_n`: Dirac mass in `a_n(s − s') − bΔt_n` with unit weight.
    pub form_offset_scaled: Complex64,
    /// `A φ(s*)`: Dirac mass in `(s − s') − (b/a_n)Δt_n` with unit weight.
    pub form_unit_slope: Complex64,
    pub matched_form: &'static str,
    pub match_rel_error: f64,
    /// The library's factorized kernel paired through the same mollifier widths.
    pub library_pairings: Vec<Complex64>,
    pub library_limit_rel_error: f64,
}

pub fn normalization_study(a: [f64; 2]) -> Result<NormalizationStudy> {
    let alpha = ManifoldPoint::new(0.0, 0.0, vec![0.3, 0.0]);
    let beta_at = |s: f64| ManifoldPoint::new(0.8, 0.2, vec![s, 0.25]);
    let phi = |s: f64| (-s * s).exp();
    let pairings: Result<Vec<Complex64>> =
        MOLLIFIER_WIDTHS.par_iter().map(|&w| fourier_pairing(a, &alpha, &beta_at(0.0), w)).collect();
    let pairings = pairings?;
    let extrapolated = (pairings[2] * 4.0 - pairings[1]) / 3.0;

    let a_n = a[1];
    let amp = quadric_kernel_1d(a_n, &alpha.project_last(), &beta_at(0.0).project_last())?;
    let s_star = alpha.s()[0] - a[0] * (alpha.t_n() - 0.25) / a_n;
    let form_unit_slope = amp * phi(s_star);
    let form_offset_scaled = form_unit_slope / a_n;
    let err_a = (extrapolated - form_offset_scaled).norm() / form_offset_scaled.norm();
    let err_b = (extrapolated - form_unit_slope).norm() / form_unit_slope.norm();
    let (matched_form, match_rel_error, limit) = if (a_n - 1.0).abs() < 1e-15 {
        ("both (a_n = 1)", err_b, form_unit_slope)
    } else if err_b <= err_a {
        ("unit_slope", err_b, form_unit_slope)
    } else {
        ("offset_scaled", err_a, form_offset_scaled)
    };
    let errors: Vec<f64> = pairings.iter().map(|p| (p - limit).norm()).collect();
    let worst_error_ratio = (errors[1] / errors[0]).max(errors[2] / errors[1]);

    let model = build_model(&[0.0, 0.0, 1.0], &a)?;
    let library_pairings: Result<Vec<Complex64>> = MOLLIFIER_WIDTHS
        .iter()
        .map(|&w| {
            pair_with_test_function(|s| factorized_kernel(&model, &alpha, &beta_at(s), 1e-8, Method::Closed), phi, w)
        })
        .collect();
    let library_pairings = library_pairings?;
    let lib_limit = (library_pairings[2] * 4.0 - library_pairings[1]) / 3.0;
    Ok(NormalizationStudy {
        a,
        errors,
        worst_error_ratio,
        extrapolated,
        form_offset_scaled,
        form_unit_slope,
        matched_form,
        match_rel_error,
        library_limit_rel_error: (lib_limit - extrapolated).norm() / extrapolated.norm(),
        library_pairings,
        pairings,
    })
}

fn factorization_suite(rec: &mut Recorder) {
    for a in [[1.0, 2.0], [2.0, 1.0]] {
        let start = Instant::now();
        let tag = format!("a=({},{})", a[0], a[1]);
        match normalization_study(a) {
            Ok(st) => {
                let detail = serde_json::to_value(&st).unwrap_or_default();
                let i = rec.at_most(&format!("{tag}.error_ratio"), Ok(st.worst_error_ratio), 0.6, start);
                rec.detail(i, json!({ "errors": st.errors }));
                let i = rec.at_most(&format!("{tag}.limit_match"), Ok(st.match_rel_error), 1e-3, start);
                rec.detail(i, detail);
                rec.at_most(&format!("{tag}.library_agrees"), Ok(st.library_limit_rel_error), 1e-3, start);
            }
            Err(e) => {
                rec.at_most(&format!("{tag}.limit_match"), Err(e), 1e-3, start);
            }
        }
    }
}

/// The 64³ grid used for criterion-level projection checks.
pub fn projection_grid() -> GridSpec {
    let mut spec = GridSpec { n: 1, n_x: 64, n_y: 64, n_t: 64, x_max: 1.0, l_y: 16.0, l_t: 2.0 };
    spec.x_max = suggest_half_width(1.0, &spec);
    spec
}

fn random_grid(spec: GridSpec, rng: &mut ChaCha8Rng) -> GridFunction {
    let samples = (0..spec.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    GridFunction { spec, samples }
}

/// A smooth input with a few low `(η, τ)` modes and Gaussian `x` profiles,
/// sampled on any `x` resolution of the same box.
fn smooth_input(spec: GridSpec, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, Complex64)> = (-2..=2)
        .flat_map(|j| (-1..=3).map(move |k| (j, k)))
        .map(|(j, k)| {
            let w = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (j as f64 / spec.l_y, k as f64 / spec.l_t, rng.gen_range(-1.0..1.0), w)
        })
        .collect();
    GridFunction::from_fn(spec, |x, y, t| {
        modes
            .iter()
            .map(|(eta, tau, c, w)| w * (-(x - c) * (x - c)).exp() * Complex64::from_polar(1.0, 2.0 * PI * (eta * y + tau * t[0])))
            .sum()
    })
    .expect("valid grid")
}

fn projection_suite(rec: &mut Recorder) {
    let start = Instant::now();
    let spec = projection_grid();
    let setup = build_model(&[0.0, 0.0, 1.0], &[1.0]).and_then(|m| Ok((SliceWeightCache::new(spec, &m)?, m)));
    let (cache, model) = match setup {
        Ok(v) => v,
        Err(e) => {
            rec.at_most("setup", Err(e), 0.0, start);
            return;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rec.opts.seed);
    let project = |f: &GridFunction| apply_with_cache(f, &cache).map(|r| r.0);

    let t = Instant::now();
    let inputs: Vec<GridFunction> = (0..10).map(|_| random_grid(spec, &mut rng)).collect();
    let stats: Result<Vec<(f64, f64)>> = inputs
        .iter()
        .map(|f| {
            let sf = project(f)?;
            let ssf = project(&sf)?;
            Ok((ssf.sub(&sf).norm() / sf.norm(), sf.norm() / f.norm()))
        })
        .collect();
    match stats {
        Ok(stats) => {
            rec.at_most("idempotence_rel_error", Ok(stats.iter().map(|s| s.0).fold(0.0, f64::max)), 1e-6, t);
            rec.at_most("contraction_norm_ratio", Ok(stats.iter().map(|s| s.1).fold(0.0, f64::max)), 1.0 + 1e-8, t);
        }
        Err(e) => {
            rec.at_most("idempotence_rel_error", Err(e), 1e-6, t);
        }
    }

    let t = Instant::now();
    let defect = (|| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for pair in inputs.chunks_exact(2) {
            let (f, g) = (&pair[0], &pair[1]);
            let d = (project(f)?.inner(g) - f.inner(&project(g)?)).norm() / (f.norm() * g.norm());
            worst = worst.max(d);
        }
        Ok(worst)
    })();
    rec.at_most("self_adjointness_defect", defect, 1e-8, t);

    let t = Instant::now();
    let reproduce = (|| -> Result<f64> {
        let m = spec.slice_count();
        let mut hat = GridFunction::zeros(spec)?;
        for (s, slice) in cache.slices.iter().enumerate() {
            let fr = &slice.frequency;
            if slice.active() && fr.eta.abs() <= 0.25 && fr.tau[0] <= 2.0 {
                let w = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                for (i, p) in slice.profile.iter().enumerate() {
                    hat.samples[i * m + s] = w * p;
                }
            }
        }
        let f = partial_fourier(&hat, Direction::Inverse);
        Ok(project(&f)?.sub(&f).norm() / f.norm())
    })();
    rec.at_most("reproducing_input_rel_error", reproduce, 1e-6, t);

    let t = Instant::now();
    let study = (|| -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        let mut n_x = spec.n_x;
        for _ in 0..4 {
            let fine = GridSpec { n_x, ..spec };
            let f = smooth_input(fine, rec.opts.seed);
            let cache = SliceWeightCache::new(fine, &model)?;
            let sf = apply_with_cache(&f, &cache)?.0;
            out.push((n_x, apply_lbar(&sf, &model)?.norm() / sf.norm()));
            n_x = 2 * n_x - 1;
        }
        Ok(out)
    })();
    match study {
        Ok(levels) => {
            let drops: Vec<f64> = levels.windows(2).map(|w| w[0].1 / w[1].1).collect();
            let i = rec.at_least("lbar_refinement_drop", Ok(*drops.last().unwrap_or(&0.0)), 8.0, t);
            rec.detail(
                i,
                json!({ "n_x": levels.iter().map(|l| l.0).collect::<Vec<_>>(),
                        "residual": levels.iter().map(|l| l.1).collect::<Vec<_>>(),
                        "drops": drops }),
            );
        }
        Err(e) => {
            rec.at_least("lbar_refinement_drop", Err(e), 8.0, t);
        }
    }
    rec.runtime("runtime_s", start, 120.0);
}

fn size_suite(rec: &mut Recorder) {
    for (order, bound) in [(0u8, 50.0), (1u8, 100.0)] {
        let start = Instant::now();
        let reports: Result<Vec<_>> =
            [0.5, 1.0, 2.0].iter().map(|&l| size_ratio_report(l, 1000, order, rec.opts.seed)).collect();
        match reports {
            Ok(reports) => {
                let worst = reports.iter().map(|r| r.spread).fold(0.0, f64::max);
                let i = rec.at_most(&format!("j{order}_spread"), Ok(worst), bound, start);
                rec.detail(i, json!({ "per_lambda": reports }));
            }
            Err(e) => {
                rec.at_most(&format!("j{order}_spread"), Err(e), bound, start);
            }
        }
    }
}

fn geometry_suite(rec: &mut Recorder) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(rec.opts.seed);
    let tangency = (|| -> Result<f64> {
        let mut violations = 0;
        for (p, a) in [
            (vec![0.0, 0.0, 1.0], vec![2.0, 1.0]),
            (vec![0.0, 0.0, 1.0], vec![1.0, 2.0]),
            (vec![0.0, 0.0, 1.0], vec![0.0, 1.0]),
            (vec![0.0, 1.0, 1.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]),
            (vec![0.0, 0.0, 0.0, 0.0, 1.0], vec![-1.0, 0.5]),
        ] {
            let model = build_model(&p, &a)?;
            for _ in 0..100 {
                let r = tangency_report(&model, rng.gen_range(-5.0..5.0));
                if !(r.span_dim_at_x == 3 && r.span_dim_at_x < r.tangent_dim && !r.finite_type) {
                    violations += 1;
                }
            }
        }
        Ok(violations as f64)
    })();
    rec.at_most("tangency_violations", tangency, 0.0, start);

    let t = Instant::now();
    let o = ManifoldPoint::new(0.0, 0.0, vec![0.0]);
    let d = control_distance_upper_bound(1.0, &o, &ManifoldPoint::new(0.0, 0.0, vec![1.0]), 4);
    rec.at_most("control_distance_to_t_axis", d, 0.708 + 1e-2, t);

    let t = Instant::now();
    let mismatches = (|| -> Result<f64> {
        let mut bad = 0;
        let model = build_model(&[0.0, 0.0, 1.0], &[2.0, 1.0])?;
        for i in 0..1000 {
            let alpha =
                ManifoldPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), vec![
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]);
            let dtn = rng.gen_range(-1.0..1.0);
            let s = if i % 2 == 0 { alpha.t[0] - 2.0 * dtn } else { rng.gen_range(-1.0..1.0) };
            let beta = ManifoldPoint::new(alpha.x + rng.gen_range(0.1..1.0), alpha.y, vec![s, alpha.t[1] - dtn]);
            let off = leaf_offset(&model, &alpha, &beta);
            let k = factorized_kernel(&model, &alpha, &beta, 1e-6, Method::Closed)?;
            if off != k.leaf_offset || geometry::offset_on_leaf(&off) != k.on_leaf {
                bad += 1;
            }
        }
        Ok(bad as f64)
    })();
    rec.at_most("leaf_consistency_mismatches", mismatches, 0.0, t);
}
