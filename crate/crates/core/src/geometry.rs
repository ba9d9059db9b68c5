//! Control geometry of the model: the commutators of `X₁ = ∂_x` and
//! `X₂ = ∂_y − p'(x) a·∂_t`, the span they generate, the leaf condition,
//! and size estimates for the quadric kernel against a homogeneous gauge.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{quadric_denominator, quadric_kernel_1d, LEAF_TOL};
use crate::model::{ManifoldPoint, PolynomialModel};
use crate::poly;

/// `Y_k = −p^{(k)}(x) a·∂_t`, the length-`k` commutator `[X₁,[X₁,…,[X₁,X₂]]]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorField {
    pub degree: usize,
    /// Ascending coefficients of `−p^{(k)}`.
    pub coefficient_poly: Vec<f64>,
    pub direction: Vec<f64>,
}

impl CommutatorField {
    pub fn coefficient(&self, x: f64) -> f64 {
        poly::eval(&self.coefficient_poly, x)
    }
}

pub fn commutator_fields(model: &PolynomialModel) -> Vec<CommutatorField> {
    fields_for_profile(model.p_coeffs(), model.a())
}

/// Commutator fields of an arbitrary polynomial profile; empty when `p'' = 0`.
pub fn fields_for_profile(p_coeffs: &[f64], a: &[f64]) -> Vec<CommutatorField> {
    let degree = poly::trim(p_coeffs).len().saturating_sub(1);
    (2..=degree)
        .map(|k| CommutatorField {
            degree: k,
            coefficient_poly: poly::derivative(p_coeffs, k).iter().map(|c| -c).collect(),
            direction: a.to_vec(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangencyReport {
    pub x: f64,
    pub span_dim_at_x: usize,
    pub tangent_dim: usize,
    pub finite_type: bool,
    /// Smallest `k ≥ 2` with `p^{(k)}(x) ≠ 0`.
    pub type_order_at_x: Option<usize>,
    /// Longest commutator considered, `deg p`.
    pub commutator_length_bound: usize,
}

/// All `Y_k` point along the single direction `a·∂_t`, so `X₁, X₂` and their
/// commutators span at most three of the `n + 2` real tangent directions.
pub fn tangency_report(model: &PolynomialModel, x: f64) -> TangencyReport {
    let type_order = commutator_fields(model).iter().find(|f| f.coefficient(x) != 0.0).map(|f| f.degree);
    TangencyReport {
        x,
        span_dim_at_x: 2 + type_order.is_some() as usize,
        tangent_dim: model.n() + 2,
        // The top derivative of p is a nonzero constant, so the type is
        // bounded by deg p everywhere; only the codimension can spoil it.
        finite_type: model.n() == 1,
        type_order_at_x: type_order,
        commutator_length_bound: model.degree(),
    }
}

/// `a_n(s − s') − b(t_n − t_n')`; zero exactly when the two points can be
/// joined by a path of finite control length.
pub fn leaf_offset(model: &PolynomialModel, alpha: &ManifoldPoint, beta: &ManifoldPoint) -> Vec<f64> {
    let a_n = model.a_last();
    let dtn = alpha.t_n() - beta.t_n();
    alpha.s().iter().zip(beta.s()).zip(model.b()).map(|((s, s2), b)| a_n * (s - s2) - b * dtn).collect()
}

pub fn offset_on_leaf(offset: &[f64]) -> bool {
    offset.iter().all(|v| v.abs() <= LEAF_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeReport {
    pub gauge: f64,
    pub ball_volume: f64,
    pub ratio: f64,
}

/// `ρ = ((Δx² + Δy²)² + (Δt + λ(x + x')Δy)²)^{1/4}` on the quadric `λx²`.
pub fn gauge(lambda: f64, alpha: &ManifoldPoint, beta: &ManifoldPoint) -> Result<f64> {
    let e = quadric_denominator(lambda, alpha, beta)?;
    let h = e.re / (std::f64::consts::PI * lambda);
    let v = e.im / (2.0 * std::f64::consts::PI);
    Ok((h * h + v * v).sqrt().sqrt())
}

pub fn gauge_distance(lambda: f64, alpha: &ManifoldPoint, beta: &ManifoldPoint) -> Result<GaugeReport> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
    }
    let rho = gauge(lambda, alpha, beta)?;
    if rho == 0.0 {
        return Err(Error::OnDiagonal);
    }
    let ball_volume = rho.powi(4);
    let s = quadric_kernel_1d(lambda, alpha, beta)?;
    Ok(GaugeReport { gauge: rho, ball_volume, ratio: s.norm() * ball_volume })
}

/// `(X₁S, X₂S)` for the quadric kernel, differentiating in the first point:
/// `XS = −4λ E⁻³ XE` with `X₁E = 2πλ(Δx − iΔy)` and `X₂E = 2πλ(Δy + iΔx)`.
pub fn quadric_kernel_gradient(
    lambda: f64,
    alpha: &ManifoldPoint,
    beta: &ManifoldPoint,
) -> Result<[Complex64; 2]> {
    let e = quadric_denominator(lambda, alpha, beta)?;
    if e.norm() < 1e-300 {
        return Err(Error::OnDiagonal);
    }
    let dx = alpha.x - beta.x;
    let dy = alpha.y - beta.y;
    let c = 2.0 * std::f64::consts::PI * lambda;
    let pre = Complex64::new(-4.0 * lambda, 0.0) / (e * e * e);
    Ok([pre * Complex64::new(c * dx, -c * dy), pre * Complex64::new(c * dy, c * dx)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeSample {
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub alpha_t: f64,
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_t: f64,
    pub gauge: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeRatioReport {
    pub lambda: f64,
    pub derivative_order: u8,
    pub sample_count: usize,
    pub seed: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub spread: f64,
    #[serde(skip)]
    pub samples: Vec<SizeSample>,
}

impl SizeRatioReport {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.samples {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gauge range the pairs are drawn from.
pub const SIZE_GAUGE_RANGE: (f64, f64) = (0.3, 5.0);

/// Extremes of `|S|ρ⁴` (J = 0) or `max_i |X_i S|ρ⁵` (J = 1) over random pairs.
///
/// Pairs are uniform in Lebesgue measure on each gauge sphere: the first
/// point has `x ∈ [−2, 2]`, the separation has uniform horizontal angle and
/// uniform angle in the `(Δx² + Δy², twisted Δt)` half-plane, and `log ρ` is
/// uniform on [`SIZE_GAUGE_RANGE`].
pub fn size_ratio_report(lambda: f64, sample_count: usize, derivative_order: u8, seed: u64) -> Result<SizeRatioReport> {
    use std::f64::consts::PI;
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
    }
    if derivative_order > 1 {
        return Err(Error::NonPositiveParameter { name: "derivative_order", value: derivative_order as f64 });
    }
    if sample_count == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = SIZE_GAUGE_RANGE;
    let mut samples = Vec::with_capacity(sample_count);
    while samples.len() < sample_count {
        let x = rng.gen_range(-2.0..2.0);
        let y = rng.gen_range(-2.0..2.0);
        let t = rng.gen_range(-2.0..2.0);
        let rho = (rng.gen_range(lo.ln()..hi.ln()) as f64).exp();
        let theta: f64 = rng.gen_range(-0.5 * PI..0.5 * PI);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let r = theta.cos().max(0.0).sqrt() * rho;
        let (dx, dy) = (r * phi.cos(), r * phi.sin());
        let twisted = theta.sin() * rho * rho;
        // Δt + λ(x + x')Δy = twisted with x' = x − Δx
        let dt = twisted - lambda * (2.0 * x - dx) * dy;
        let alpha = ManifoldPoint::new(x, y, vec![t]);
        let beta = ManifoldPoint::new(x - dx, y - dy, vec![t - dt]);
        let rho = gauge(lambda, &alpha, &beta)?;
        if rho == 0.0 {
            continue;
        }
        let ratio = if derivative_order == 0 {
            quadric_kernel_1d(lambda, &alpha, &beta)?.norm() * rho.powi(4)
        } else {
            let [g1, g2] = quadric_kernel_gradient(lambda, &alpha, &beta)?;
            g1.norm().max(g2.norm()) * rho.powi(5)
        };
        samples.push(SizeSample {
            alpha_x: alpha.x,
            alpha_y: alpha.y,
            alpha_t: t,
            beta_x: beta.x,
            beta_y: beta.y,
            beta_t: t - dt,
            gauge: rho,
            ratio,
        });
    }
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(SizeRatioReport {
        lambda,
        derivative_order,
        sample_count,
        seed,
        min_ratio,
        max_ratio,
        spread: max_ratio / min_ratio,
        samples,
    })
}

/// Piecewise-constant controls `(c₀, c₁, c₂)` on equal segments of `[0, 1]`
/// for `γ' = c₀X₁ + c₁X₂ + c₂Y₂` on the quadric `λx²`, where `Y₂ = −2λ∂_t`.
struct ControlProblem {
    lambda: f64,
    start: [f64; 3],
    target: [f64; 3],
    segments: usize,
}

impl ControlProblem {
    fn h(&self) -> f64 {
        1.0 / self.segments as f64
    }

    /// Endpoint of the flow; the ODE integrates exactly on each segment.
    fn endpoint(&self, c: &[f64]) -> [f64; 3] {
        let h = self.h();
        let [mut x, mut y, mut t] = self.start;
        for k in c.chunks_exact(3) {
            let (c0, c1, c2) = (k[0], k[1], k[2]);
            t += -2.0 * self.lambda * (c1 * (x * h + 0.5 * c0 * h * h) + c2 * h);
            x += c0 * h;
            y += c1 * h;
        }
        [x, y, t]
    }

    fn residual(&self, c: &[f64]) -> [f64; 3] {
        let e = self.endpoint(c);
        [e[0] - self.target[0], e[1] - self.target[1], e[2] - self.target[2]]
    }

    /// `½|residual|²` and its gradient.
    fn loss_grad(&self, c: &[f64], grad: &mut [f64]) -> f64 {
        let h = self.h();
        let l2 = 2.0 * self.lambda;
        let r = self.residual(c);
        let m = self.segments;
        // c1 weight accumulated from later segments: ∂t/∂c0_j.
        let mut later_c1 = 0.0;
        let mut x_before: Vec<f64> = Vec::with_capacity(m);
        let mut x = self.start[0];
        for k in c.chunks_exact(3) {
            x_before.push(x);
            x += k[0] * h;
        }
        for j in (0..m).rev() {
            let (c0, c1) = (c[3 * j], c[3 * j + 1]);
            let dt_dc0 = -l2 * (0.5 * c1 * h * h + later_c1 * h * h);
            let dt_dc1 = -l2 * (x_before[j] * h + 0.5 * c0 * h * h);
            let dt_dc2 = -l2 * h;
            grad[3 * j] = r[0] * h + r[2] * dt_dc0;
            grad[3 * j + 1] = r[1] * h + r[2] * dt_dc1;
            grad[3 * j + 2] = r[2] * dt_dc2;
            later_c1 += c1;
        }
        0.5 * (r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    }
}

fn project_box(c: &mut [f64], delta: f64) {
    let lim = [delta, delta, delta * delta];
    for (i, v) in c.iter_mut().enumerate() {
        *v = v.clamp(-lim[i % 3], lim[i % 3]);
    }
}

/// Projected gradient with backtracking from `c`; returns the final terminal error.
fn descend(p: &ControlProblem, c: &mut Vec<f64>, delta: f64, tol: f64) -> f64 {
    let mut grad = vec![0.0; c.len()];
    let mut trial = c.clone();
    let mut loss = p.loss_grad(c, &mut grad);
    let mut step = 1.0;
    for _ in 0..4000 {
        if (2.0 * loss).sqrt() < tol {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            for ((t, v), g) in trial.iter_mut().zip(c.iter()).zip(&grad) {
                *t = v - step * g;
            }
            project_box(&mut trial, delta);
            let moved: f64 = trial.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let mut tg = vec![0.0; c.len()];
            let tl = p.loss_grad(&trial, &mut tg);
            if tl <= loss - 1e-4 * moved / step {
                std::mem::swap(c, &mut trial);
                grad = tg;
                loss = tl;
                step *= 2.0;
                improved = moved > 0.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (2.0 * loss).sqrt()
}

const CONTROL_RESTARTS: usize = 8;
const CONTROL_SEED: u64 = 0x5eed;

/// Whether some admissible control with bound `δ` steers close enough.
fn reachable(p: &ControlProblem, delta: f64, shrink: f64) -> bool {
    let bound = delta * shrink;
    let tol = 1e-3 * delta;
    let m = p.segments;
    // Direct guess: straight horizontal motion plus the commutator for the
    // remaining vertical offset.
    let mut guess = vec![0.0; 3 * m];
    let (dx, dy) = (p.target[0] - p.start[0], p.target[1] - p.start[1]);
    for k in guess.chunks_exact_mut(3) {
        k[0] = dx;
        k[1] = dy;
    }
    let r = p.residual(&guess);
    for k in guess.chunks_exact_mut(3) {
        k[2] = r[2] / (2.0 * p.lambda);
    }
    project_box(&mut guess, bound);
    if descend(p, &mut guess, bound, tol) < tol {
        return true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(CONTROL_SEED ^ delta.to_bits());
    for _ in 0..CONTROL_RESTARTS {
        let mut c: Vec<f64> = (0..3 * m)
            .map(|i| {
                let lim = if i % 3 == 2 { bound * bound } else { bound };
                rng.gen_range(-lim..=lim)
            })
            .collect();
        if descend(p, &mut c, bound, tol) < tol {
            return true;
        }
    }
    false
}

/// Smallest `δ` (to relative `1e−4`) for which the path search finds
/// admissible controls steering `α` to within `1e−3·δ` of `β` in unit time.
/// Controls stay strictly inside the bounds `|c₀|, |c₁| < δ`, `|c₂| < δ²`.
pub fn control_distance_upper_bound(
    lambda: f64,
    alpha: &ManifoldPoint,
    beta: &ManifoldPoint,
    resolution: usize,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
    }
    if resolution == 0 {
        return Err(Error::NoPathFound(resolution));
    }
    let [ta, tb] = [alpha, beta].map(|p| match p.t.as_slice() {
        [t] => Ok(*t),
        other => Err(Error::DimensionMismatch { expected: 1, got: other.len() }),
    });
    let p = ControlProblem {
        lambda,
        start: [alpha.x, alpha.y, ta?],
        target: [beta.x, beta.y, tb?],
        segments: resolution,
    };
    if p.residual(&vec![0.0; 3 * resolution]).iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let shrink = 1.0 - 1e-9;
    let mut hi = gauge(lambda, alpha, beta)?.max(1e-6);
    let mut tries = 0;
    while !reachable(&p, hi, shrink) {
        hi *= 2.0;
        tries += 1;
        if tries > 30 {
            return Err(Error::NoPathFound(resolution));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if reachable(&p, mid, shrink) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{factorized_kernel, Method};
    use crate::model::build_model;
    use std::f64::consts::PI;

    fn pt(x: f64, y: f64, t: f64) -> ManifoldPoint {
        ManifoldPoint::new(x, y, vec![t])
    }

    #[test]
    fn commutator_examples() {
        let f = commutator_fields(&build_model(&[0.0, 0.0, 1.0], &[1.0]).unwrap());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].degree, 2);
        assert_eq!(f[0].coefficient_poly, vec![-2.0]);

        let f = commutator_fields(&build_model(&[0.0, 0.0, 0.0, 0.0, 1.0], &[1.0]).unwrap());
        assert_eq!(f.iter().map(|c| c.coefficient_poly.clone()).collect::<Vec<_>>(), vec![
            vec![0.0, 0.0, -12.0],
            vec![0.0, -24.0],
            vec![-24.0]
        ]);
        assert!(fields_for_profile(&[1.0, 3.0], &[1.0]).is_empty());
    }

    type Field<'a> = &'a dyn Fn(&[f64; 4]) -> f64;

    fn diff(u: Field, i: usize, z: &[f64; 4]) -> f64 {
        let h = 0.02;
        let at = |s: f64| {
            let mut w = *z;
            w[i] += s * h;
            u(&w)
        };
        (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
    }

    /// `Y_1 = X₂`, `Y_{k+1} = [X₁, Y_k]`, every derivative a fourth-order
    /// central difference nested as deep as the commutator.
    fn nested(k: usize, m: &PolynomialModel, u: Field, z: &[f64; 4]) -> f64 {
        if k == 1 {
            let a = m.a();
            return diff(u, 1, z) - m.p_derivative(1, z[0]) * (a[0] * diff(u, 2, z) + a[1] * diff(u, 3, z));
        }
        let x1_after = diff(&|w: &[f64; 4]| nested(k - 1, m, u, w), 0, z);
        let x1_before = nested(k - 1, m, &|w: &[f64; 4]| diff(u, 0, w), z);
        x1_after - x1_before
    }

    #[test]
    fn commutators_match_nested_differences() {
        let model = build_model(&[0.3, -0.2, 0.5, 0.1, 0.25], &[2.0, 1.0]).unwrap();
        let u = |z: &[f64; 4]| (0.3 * z[0]).sin() + z[1] * z[0] + 0.7 * z[2] - 0.4 * z[3] + 0.1 * z[2] * z[1];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fields = commutator_fields(&model);
        assert_eq!(fields.len(), 3);
        for field in &fields {
            for _ in 0..5 {
                let z = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0];
                // a·∇_t u
                let a_grad = 2.0 * (0.7 + 0.1 * z[1]) - 0.4;
                let measured = nested(field.degree, &model, &u, &z) / a_grad;
                let exact = field.coefficient(z[0]);
                assert!(
                    (measured - exact).abs() < 1e-5 * exact.abs().max(1.0),
                    "k={} {measured} {exact}",
                    field.degree
                );
            }
        }
    }

    #[test]
    fn tangency_examples() {
        let heis = build_model(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let r = tangency_report(&heis, 0.0);
        assert_eq!((r.span_dim_at_x, r.tangent_dim, r.finite_type, r.type_order_at_x), (3, 3, true, Some(2)));

        let two = build_model(&[0.0, 0.0, 1.0], &[2.0, 1.0]).unwrap();
        for x in [-3.0, 0.0, 0.7, 10.0] {
            let r = tangency_report(&two, x);
            assert_eq!((r.span_dim_at_x, r.tangent_dim, r.finite_type), (3, 4, false));
        }

        let quartic = build_model(&[0.0, 0.0, 0.0, 0.0, 1.0], &[1.0]).unwrap();
        assert_eq!(tangency_report(&quartic, 0.0).type_order_at_x, Some(4));
        assert_eq!(tangency_report(&quartic, 1.0).type_order_at_x, Some(2));
        assert_eq!(tangency_report(&quartic, 0.0).commutator_length_bound, 4);
    }

    #[test]
    fn leaf_offset_examples() {
        let m = build_model(&[0.0, 0.0, 1.0], &[2.0, 1.0]).unwrap();
        let o = ManifoldPoint::new(0.0, 0.0, vec![0.0, 0.0]);
        assert_eq!(leaf_offset(&m, &ManifoldPoint::new(0.3, 1.0, vec![1.0, 0.5]), &o), vec![0.0]);
        let off = leaf_offset(&m, &ManifoldPoint::new(0.0, 0.0, vec![0.0, 1.0]), &o);
        assert_eq!(off, vec![-2.0]);
        assert!(!offset_on_leaf(&off));
        let flat = build_model(&[0.0, 0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(leaf_offset(&flat, &ManifoldPoint::new(0.0, 0.0, vec![0.0, 3.7]), &o), vec![0.0]);
    }

    #[test]
    fn leaf_offset_agrees_with_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for a in [[2.0, 1.0], [1.0, 2.0], [-0.5, 0.25]] {
            let m = build_model(&[0.0, 0.0, 1.0], &a).unwrap();
            for i in 0..400 {
                let alpha = ManifoldPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), vec![
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]);
                let dtn = rng.gen_range(-1.0..1.0);
                // every other pair is placed on the leaf
                let s = if i % 2 == 0 { alpha.t[0] - m.b()[0] * dtn / a[1] } else { rng.gen_range(-1.0..1.0) };
                let beta = ManifoldPoint::new(alpha.x + 0.5, alpha.y, vec![s, alpha.t[1] - dtn]);
                let off = leaf_offset(&m, &alpha, &beta);
                let k = factorized_kernel(&m, &alpha, &beta, 1e-6, Method::Closed).unwrap();
                assert_eq!(off, k.leaf_offset);
                assert_eq!(offset_on_leaf(&off), k.on_leaf);
                if i % 2 == 0 {
                    assert!(k.on_leaf);
                }
            }
        }
    }

    #[test]
    fn gauge_examples() {
        let o = pt(0.0, 0.0, 0.0);
        let r = gauge_distance(1.0, &o, &pt(1.0, 0.0, 0.0)).unwrap();
        assert!((r.gauge - 1.0).abs() < 1e-15);
        assert!((r.ratio - 2.0 / (PI * PI)).abs() < 1e-12);
        let r = gauge_distance(1.0, &o, &pt(0.0, 0.0, 1.0)).unwrap();
        assert!((r.gauge - 1.0).abs() < 1e-15);
        assert!((r.ratio - 1.0 / (2.0 * PI * PI)).abs() < 1e-12);
        assert!(matches!(gauge_distance(1.0, &o, &o), Err(Error::OnDiagonal)));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = pt(rng.gen(), rng.gen(), rng.gen());
            let b = pt(rng.gen(), rng.gen(), rng.gen());
            assert_eq!(gauge(0.7, &a, &b).unwrap(), gauge(0.7, &b, &a).unwrap());
        }
    }

    #[test]
    fn kernel_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (dx, dy, dt) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let r: f64 = rng.gen_range(0.2..5.0);
            let s = |k: f64| {
                quadric_kernel_1d(1.3, &pt(0.5 * k * dx, 0.5 * k * dy, 0.5 * k * k * dt), &pt(-0.5 * k * dx, -0.5 * k * dy, -0.5 * k * k * dt))
                    .unwrap()
            };
            let (s1, sr) = (s(1.0), s(r));
            assert!((sr * r.powi(4) - s1).norm() < 1e-12 * s1.norm());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let lambda = 0.8;
        let beta = pt(0.3, -0.4, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let alpha = pt(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let [g1, g2] = quadric_kernel_gradient(lambda, &alpha, &beta).unwrap();
            let s = |x: f64, y: f64, t: f64| quadric_kernel_1d(lambda, &pt(x, y, t), &beta).unwrap();
            let h = 1e-5;
            let (x, y, t) = (alpha.x, alpha.y, alpha.t[0]);
            let d1 = (s(x + h, y, t) - s(x - h, y, t)) / (2.0 * h);
            let dy = (s(x, y + h, t) - s(x, y - h, t)) / (2.0 * h);
            let dt = (s(x, y, t + h) - s(x, y, t - h)) / (2.0 * h);
            let d2 = dy - 2.0 * lambda * x * dt;
            assert!((g1 - d1).norm() < 1e-6 * g1.norm().max(1.0));
            assert!((g2 - d2).norm() < 1e-6 * g2.norm().max(1.0));
        }
    }

    #[test]
    fn axis_pair_derivative_constant() {
        // |∂_x S| r⁵ = 8 / (π² λ) along the x-axis
        for lambda in [0.5, 1.0, 2.0] {
            for r in [0.3, 1.0, 4.0] {
                let [g1, _] = quadric_kernel_gradient(lambda, &pt(r, 0.0, 0.0), &pt(0.0, 0.0, 0.0)).unwrap();
                assert!((g1.norm() * r.powi(5) - 8.0 / (PI * PI * lambda)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn size_report_zeroth_order() {
        for lambda in [0.5, 1.0, 2.0] {
            let r = size_ratio_report(lambda, 1000, 0, 7).unwrap();
            assert!(r.spread < 50.0, "λ={lambda} spread {}", r.spread);
            // two-sided bound from the closed form on the unit gauge sphere
            let lo = 2.0 * lambda / (PI * PI * (lambda * lambda).max(4.0));
            let hi = 2.0 * lambda / (PI * PI * (lambda * lambda).min(4.0));
            assert!(r.min_ratio >= lo * (1.0 - 1e-9) && r.max_ratio <= hi * (1.0 + 1e-9));
            assert!(r.samples.iter().all(|s| s.gauge >= 0.3 * (1.0 - 1e-9) && s.gauge <= 5.0 * (1.0 + 1e-9)));
        }
        assert_eq!(size_ratio_report(1.0, 50, 1, 9).unwrap(), size_ratio_report(1.0, 50, 1, 9).unwrap());
    }

    #[test]
    fn control_examples() {
        let o = pt(0.0, 0.0, 0.0);
        let d = control_distance_upper_bound(1.0, &o, &pt(1.0, 0.0, 0.0), 4).unwrap();
        assert!(d <= 1.001, "{d}");
        let d = control_distance_upper_bound(1.0, &o, &pt(0.0, 0.0, 1.0), 4).unwrap();
        assert!(d <= 0.708, "{d}");
        assert_eq!(control_distance_upper_bound(1.0, &o, &o, 4).unwrap(), 0.0);
    }

    #[test]
    fn control_bound_comparable_to_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let a = pt(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b = pt(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let d = control_distance_upper_bound(1.0, &a, &b, 6).unwrap();
            let rho = gauge(1.0, &a, &b).unwrap();
            assert!((0.3..=3.0).contains(&(d / rho)), "{d} vs {rho}");
        }
    }

    #[test]
    fn endpoint_gradient_is_exact() {
        let p = ControlProblem { lambda: 0.7, start: [0.1, 0.2, 0.3], target: [1.0, -1.0, 0.5], segments: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; 15];
        p.loss_grad(&c, &mut g);
        for i in 0..15 {
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp[i] += 1e-6;
            cm[i] -= 1e-6;
            let mut tmp = vec![0.0; 15];
            let fd = (p.loss_grad(&cp, &mut tmp) - p.loss_grad(&cm, &mut tmp)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6, "{i}: {fd} {}", g[i]);
        }
    }

    proptest::proptest! {
        #[test]
        fn gauge_symmetric_and_homogeneous(
            x in -2.0f64..2.0, y in -2.0f64..2.0, t in -2.0f64..2.0,
            dx in -2.0f64..2.0, dy in -2.0f64..2.0, dt in -2.0f64..2.0,
            r in 0.1f64..10.0, lambda in 0.2f64..3.0,
        ) {
            let a = pt(x, y, t);
            let b = pt(x - dx, y - dy, t - dt);
            let g = gauge(lambda, &a, &b).unwrap();
            proptest::prop_assert!((g - gauge(lambda, &b, &a).unwrap()).abs() <= 1e-15 * g.max(1.0));
            // dilation about a point with x + x' = 0
            let c = pt(0.5 * dx, 0.5 * dy, 0.5 * dt);
            let d = pt(-0.5 * dx, -0.5 * dy, -0.5 * dt);
            let cr = pt(0.5 * r * dx, 0.5 * r * dy, 0.5 * r * r * dt);
            let dr = pt(-0.5 * r * dx, -0.5 * r * dy, -0.5 * r * r * dt);
            let (g1, gr) = (gauge(lambda, &c, &d).unwrap(), gauge(lambda, &cr, &dr).unwrap());
            proptest::prop_assert!((gr - r * g1).abs() <= 1e-12 * gr.max(1e-300));
        }
    }
}
