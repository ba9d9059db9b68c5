//! Polynomial models `M_P = {Im w = p(x) a}` in the identified coordinates
//! `(x, y, t) ∈ ℝ × ℝ × ℝⁿ`, together with points and dual frequencies.
//!
//! Every model handled here has the factored form `P(x) = p(x) a` with a
//! single real polynomial profile `p` and a direction vector `a ∈ ℝⁿ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// On-disk model description. Coefficients are in increasing degree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub p_coeffs: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    p_coeffs: Vec<f64>,
    a: Vec<f64>,
    degree: usize,
    convex: bool,
}

impl PolynomialModel {
    pub fn new(p_coeffs: &[f64], a: &[f64]) -> Result<Self> {
        build_model(p_coeffs, a)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        build_model(&spec.p_coeffs, &spec.a)
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec { p_coeffs: self.p_coeffs.clone(), a: self.a.clone() }
    }

    pub fn p_coeffs(&self) -> &[f64] {
        &self.p_coeffs
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// First `n - 1` entries of `a`.
    pub fn b(&self) -> &[f64] {
        &self.a[..self.a.len() - 1]
    }

    pub fn a_last(&self) -> f64 {
        self.a[self.a.len() - 1]
    }

    /// Codimension.
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    /// `a_n == 1` exactly.
    pub fn is_normalized(&self) -> bool {
        self.a_last() == 1.0
    }

    /// `Some(λ)` when `p(x) = λ x²` with no lower-order terms.
    pub fn quadric_coefficient(&self) -> Option<f64> {
        (self.degree == 2 && self.p_coeffs[0] == 0.0 && self.p_coeffs[1] == 0.0)
            .then(|| self.p_coeffs[2])
    }

    pub fn p(&self, x: f64) -> f64 {
        poly::eval(&self.p_coeffs, x)
    }

    pub fn p_derivative(&self, k: usize, x: f64) -> f64 {
        p_derivative(self, k, x)
    }

    /// `a · τ`.
    pub fn a_dot(&self, tau: &[f64]) -> f64 {
        self.a.iter().zip(tau).map(|(a, t)| a * t).sum()
    }

    /// The same profile scaled by `c`, paired with a new direction vector.
    pub fn with_scaled_profile(&self, c: f64, a: &[f64]) -> Result<Self> {
        let coeffs: Vec<f64> = self.p_coeffs.iter().map(|v| v * c).collect();
        build_model(&coeffs, a)
    }

    pub(crate) fn check_point(&self, pt: &ManifoldPoint) -> Result<()> {
        if pt.t.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: pt.t.len() });
        }
        Ok(())
    }

    pub(crate) fn check_frequency(&self, f: &Frequency) -> Result<()> {
        if f.tau.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: f.tau.len() });
        }
        Ok(())
    }
}

/// Validates `p` and `a` and derives the cached data.
pub fn build_model(p_coeffs: &[f64], a: &[f64]) -> Result<PolynomialModel> {
    if p_coeffs.is_empty() || a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let coeffs = poly::trim(p_coeffs);
    let degree = coeffs.len().saturating_sub(1);
    let leading = coeffs.last().copied().unwrap_or(0.0);
    if degree < 2 || degree % 2 == 1 || leading <= 0.0 || !leading.is_finite() {
        return Err(Error::NonSuperlinear { degree, leading });
    }
    if a[a.len() - 1] == 0.0 {
        return Err(Error::ZeroLastDirection);
    }
    let convex = is_convex(&coeffs);
    Ok(PolynomialModel { p_coeffs: coeffs, a: a.to_vec(), degree, convex })
}

/// Exact `p^{(k)}(x)`; zero once `k` exceeds the degree.
pub fn p_derivative(model: &PolynomialModel, k: usize, x: f64) -> f64 {
    poly::eval(&poly::derivative(&model.p_coeffs, k), x)
}

fn is_convex(coeffs: &[f64]) -> bool {
    let only_even_nonneg = coeffs
        .iter()
        .enumerate()
        .all(|(i, &c)| if i % 2 == 1 { c == 0.0 } else { c >= 0.0 });
    if only_even_nonneg {
        return true;
    }
    let second = poly::derivative(coeffs, 2);
    if second.len() <= 1 {
        return second.first().copied().unwrap_or(0.0) >= 0.0;
    }
    // p'' has even degree and positive leading coefficient, so its minimum
    // sits inside the root bound of p'''.
    let radius = poly::cauchy_bound(&poly::derivative(&second, 1)).max(1.0);
    let min = poly::minimize_on(&second, -radius, radius);
    let scale = second.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    min >= -1e-12 * scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub x: f64,
    pub y: f64,
    pub t: Vec<f64>,
}

impl ManifoldPoint {
    pub fn new(x: f64, y: f64, t: Vec<f64>) -> Self {
        ManifoldPoint { x, y, t }
    }

    /// Parses `x,y,t1,...,tn`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let vals = parse_list(s)?;
        if vals.len() < 3 {
            return Err(format!("point `{s}` needs at least x,y,t"));
        }
        Ok(ManifoldPoint { x: vals[0], y: vals[1], t: vals[2..].to_vec() })
    }

    pub fn s(&self) -> &[f64] {
        &self.t[..self.t.len() - 1]
    }

    pub fn t_n(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// The point seen in the single-codimension model `(x, y, t_n)`.
    pub fn project_last(&self) -> ManifoldPoint {
        ManifoldPoint { x: self.x, y: self.y, t: vec![self.t_n()] }
    }
}

pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad number `{v}`: {e}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub eta: f64,
    pub tau: Vec<f64>,
}

impl Frequency {
    pub fn new(eta: f64, tau: Vec<f64>) -> Self {
        Frequency { eta, tau }
    }

    pub fn sigma(&self) -> &[f64] {
        &self.tau[..self.tau.len() - 1]
    }

    pub fn tau_n(&self) -> f64 {
        self.tau[self.tau.len() - 1]
    }
}
