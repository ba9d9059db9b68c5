//! The Szegő projection as an operator on sampled functions of `(x, y, t)`.
//!
//! After a partial Fourier transform in the translation-invariant variables
//! `(y, t)`, the projection decouples into one rank-one map per frequency
//! `(η, τ)`: project onto the span of `ψ(x) = e^{2π(xη − p(x) a·τ)}`, and do
//! nothing (return zero) outside the admissible cone. The `y` and `t`
//! directions are periodic with lengths `L_y`, `L_t`; `x` is a uniform grid on
//! `[−X, X]` with trapezoid weights, and the slice maps are orthogonal
//! projections in that weighted inner product, so the discrete operator is
//! exactly idempotent and self-adjoint.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Frequency, PolynomialModel};
use crate::poly;
use crate::weights::{log_weight_quadrature, sigma_contains};

/// Relative size of the slice profile at the box edge above which a slice
/// is considered truncated by the box.
pub const GUARD_LEVEL: f64 = 1e-12;

/// Slices carrying less than this fraction of the input energy are not
/// counted when deciding whether the box is too small.
pub const ENERGY_FLOOR: f64 = 1e-8;

/// Maximum fraction of energy-carrying admissible slices that may be truncated.
pub const MAX_GUARDED_FRACTION: f64 = 0.01;

/// Grid geometry; serialized as the JSON sidecar of a grid file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "N_x")]
    pub n_x: usize,
    #[serde(rename = "N_y")]
    pub n_y: usize,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    #[serde(rename = "X")]
    pub x_max: f64,
    #[serde(rename = "L_y")]
    pub l_y: f64,
    #[serde(rename = "L_t")]
    pub l_t: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGrid(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.n_x < 5 {
            return bad(format!("N_x = {} is below the 5-point stencil", self.n_x));
        }
        if !self.n_y.is_power_of_two() || !self.n_t.is_power_of_two() {
            return bad(format!("N_y = {} and N_t = {} must be powers of two", self.n_y, self.n_t));
        }
        if !(self.x_max > 0.0 && self.l_y > 0.0 && self.l_t > 0.0) {
            return bad("X, L_y and L_t must be positive".into());
        }
        self.n_t.checked_pow(self.n as u32).and_then(|v| v.checked_mul(self.n_y * self.n_x)).map_or_else(
            || bad("grid too large".into()),
            |_| Ok(()),
        )
    }

    /// Number of `(y, t)` lattice points, i.e. of frequency slices.
    pub fn slice_count(&self) -> usize {
        self.n_y * self.n_t.pow(self.n as u32)
    }

    pub fn len(&self) -> usize {
        self.n_x * self.slice_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.x_max / (self.n_x - 1) as f64
    }

    pub fn x_node(&self, i: usize) -> f64 {
        -self.x_max + self.hx() * i as f64
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x_node(i)).collect()
    }

    /// Trapezoid weights on the `x` nodes.
    pub fn x_weights(&self) -> Vec<f64> {
        let h = self.hx();
        (0..self.n_x).map(|i| if i == 0 || i + 1 == self.n_x { 0.5 * h } else { h }).collect()
    }

    /// Volume of one `(y, t)` cell.
    pub fn cell_yt(&self) -> f64 {
        (self.l_y / self.n_y as f64) * (self.l_t / self.n_t as f64).powi(self.n as i32)
    }

    pub fn y_node(&self, j: usize) -> f64 {
        self.l_y * j as f64 / self.n_y as f64
    }

    pub fn t_node(&self, k: usize) -> f64 {
        self.l_t * k as f64 / self.n_t as f64
    }

    /// Splits a slice index into `(j_y, [k_t1, ..., k_tn])`.
    pub fn slice_indices(&self, slice: usize) -> (usize, Vec<usize>) {
        let mut rest = slice;
        let mut ks = vec![0; self.n];
        for k in ks.iter_mut().rev() {
            *k = rest % self.n_t;
            rest /= self.n_t;
        }
        (rest, ks)
    }

    /// Dual-lattice frequency of a slice, in FFT order.
    pub fn frequency(&self, slice: usize) -> Frequency {
        let (j, ks) = self.slice_indices(slice);
        Frequency::new(
            signed_index(j, self.n_y) as f64 / self.l_y,
            ks.iter().map(|&k| signed_index(k, self.n_t) as f64 / self.l_t).collect(),
        )
    }
}

fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Complex samples, row-major over `(i_x, i_y, i_t1, ..., i_tn)` with `x`
/// slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub spec: GridSpec,
    pub samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        Ok(GridFunction { spec, samples: vec![Complex64::new(0.0, 0.0); spec.len()] })
    }

    pub fn from_samples(spec: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        spec.validate()?;
        if samples.len() != spec.len() {
            return Err(Error::InvalidGrid(format!("expected {} samples, got {}", spec.len(), samples.len())));
        }
        Ok(GridFunction { spec, samples })
    }

    /// Samples `f(x, y, t)` at the grid nodes.
    pub fn from_fn<F: Fn(f64, f64, &[f64]) -> Complex64>(spec: GridSpec, f: F) -> Result<Self> {
        let mut g = Self::zeros(spec)?;
        let m = spec.slice_count();
        let mut t = vec![0.0; spec.n];
        for i in 0..spec.n_x {
            let x = spec.x_node(i);
            for s in 0..m {
                let (j, ks) = spec.slice_indices(s);
                for (tv, k) in t.iter_mut().zip(&ks) {
                    *tv = spec.t_node(*k);
                }
                g.samples[i * m + s] = f(x, spec.y_node(j), &t);
            }
        }
        Ok(g)
    }

    /// Weighted inner product `Σ w_x Δy Δt f ḡ`.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let w = self.spec.x_weights();
        let m = self.spec.slice_count();
        let cell = self.spec.cell_yt();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, wi) in w.iter().enumerate() {
            let row: Complex64 = self.samples[i * m..(i + 1) * m]
                .iter()
                .zip(&other.samples[i * m..(i + 1) * m])
                .map(|(a, b)| a * b.conj())
                .sum();
            acc += row * (wi * cell);
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            spec: self.spec,
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Discrete Fourier transform along `y` and every `t` axis with kernel
/// `e^{∓2πi(yη + t·τ)}`. The forward map carries the cell volume and the
/// inverse divides by the torus volume, so the pair is an exact inverse and
/// approximates the continuous transform.
pub fn partial_fourier(f: &GridFunction, direction: Direction) -> GridFunction {
    let spec = f.spec;
    let m = spec.slice_count();
    let mut out = f.samples.clone();
    let mut planner = FftPlanner::<f64>::new();
    // Axis lengths and strides inside one x-row: y first, then t_1..t_n.
    let mut axes = vec![(spec.n_y, m / spec.n_y)];
    let mut stride = m / spec.n_y;
    for _ in 0..spec.n {
        stride /= spec.n_t;
        axes.push((spec.n_t, stride));
    }
    for &(len, stride) in &axes {
        let fft = match direction {
            Direction::Forward => planner.plan_fft_forward(len),
            Direction::Inverse => planner.plan_fft_inverse(len),
        };
        out.par_chunks_mut(m).for_each(|row| {
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            let block = len * stride;
            for base in (0..m).step_by(block) {
                for off in 0..stride {
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = row[base + off + k * stride];
                    }
                    fft.process(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        row[base + off + k * stride] = *v;
                    }
                }
            }
        });
    }
    let scale = match direction {
        Direction::Forward => spec.cell_yt(),
        Direction::Inverse => 1.0 / (spec.l_y * spec.l_t.powi(spec.n as i32)),
    };
    out.iter_mut().for_each(|v| *v *= scale);
    GridFunction { spec, samples: out }
}

/// Per-slice data: admissibility, `log C`, and the recentered profile
/// `e^{2π(xη − p(x) a·τ) − shift}` on the `x` nodes.
#[derive(Debug, Clone)]
pub struct SliceWeight {
    pub frequency: Frequency,
    pub in_sigma: bool,
    /// `log C` from the weights module; `None` outside the cone or when the
    /// quadrature could not certify it.
    pub log_c: Option<f64>,
    pub shift: f64,
    pub profile: Vec<f64>,
    /// `Σ w ψ²` with the recentered profile.
    pub discrete_norm: f64,
    /// Profile still above [`GUARD_LEVEL`] at the box edge.
    pub guarded: bool,
}

impl SliceWeight {
    /// `log` of the trapezoid approximation of `C`.
    pub fn discrete_log_c(&self) -> f64 {
        2.0 * self.shift + self.discrete_norm.ln()
    }

    pub fn active(&self) -> bool {
        self.in_sigma && !self.guarded
    }
}

#[derive(Debug, Clone)]
pub struct SliceWeightCache {
    pub spec: GridSpec,
    pub slices: Vec<SliceWeight>,
}

impl SliceWeightCache {
    pub fn new(spec: GridSpec, model: &PolynomialModel) -> Result<Self> {
        spec.validate()?;
        if spec.n != model.n() {
            return Err(Error::DimensionMismatch { expected: model.n(), got: spec.n });
        }
        let xs = spec.x_nodes();
        let w = spec.x_weights();
        let p: Vec<f64> = xs.iter().map(|&x| model.p(x)).collect();
        let slices = (0..spec.slice_count())
            .into_par_iter()
            .map(|s| {
                let frequency = spec.frequency(s);
                let in_sigma = sigma_contains(model, &frequency);
                if !in_sigma {
                    return SliceWeight {
                        frequency,
                        in_sigma,
                        log_c: None,
                        shift: 0.0,
                        profile: Vec::new(),
                        discrete_norm: 0.0,
                        guarded: false,
                    };
                }
                let c = model.a_dot(&frequency.tau);
                let expo: Vec<f64> =
                    xs.iter().zip(&p).map(|(&x, &px)| 2.0 * PI * (x * frequency.eta - px * c)).collect();
                let shift = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let profile: Vec<f64> = expo.iter().map(|e| (e - shift).exp()).collect();
                let discrete_norm = profile.iter().zip(&w).map(|(v, w)| v * v * w).sum();
                let guarded = profile[0] > GUARD_LEVEL || profile[profile.len() - 1] > GUARD_LEVEL;
                let log_c = log_weight_quadrature(model, &frequency, 1e-13).ok().map(|lw| lw.log_c);
                SliceWeight { frequency, in_sigma, log_c, shift, profile, discrete_norm, guarded }
            })
            .collect();
        Ok(SliceWeightCache { spec, slices })
    }
}

/// The conjugated rank-one projection on one frequency slice:
/// `ψ(x) Σ_j w_j g_j ψ(x_j) / Σ_j w_j ψ(x_j)²`, zero when the slice is outside
/// the cone or truncated by the box.
pub fn frequency_slice_project(g: &[Complex64], slice: &SliceWeight, x_weights: &[f64]) -> Vec<Complex64> {
    if !slice.active() || slice.discrete_norm <= 0.0 {
        return vec![Complex64::new(0.0, 0.0); g.len()];
    }
    let coef: Complex64 =
        g.iter().zip(&slice.profile).zip(x_weights).map(|((gv, pv), w)| gv * (pv * w)).sum::<Complex64>()
            / slice.discrete_norm;
    slice.profile.iter().map(|pv| coef * pv).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProjectionDiagnostics {
    pub slice_count: usize,
    pub in_sigma_count: usize,
    pub guarded_slice_count: usize,
    /// Energy-carrying admissible slices, and how many of those were guarded.
    pub energy_carrying_in_sigma: usize,
    pub energy_carrying_guarded: usize,
    /// Fraction of the input energy on admissible frequencies.
    pub energy_in_sigma: f64,
    pub runtime_ms: u64,
}

/// `S = F⁻¹ ∘ (slice projections) ∘ F`.
pub fn apply_szego_projection(
    f: &GridFunction,
    model: &PolynomialModel,
) -> Result<(GridFunction, ProjectionDiagnostics)> {
    let cache = SliceWeightCache::new(f.spec, model)?;
    apply_with_cache(f, &cache)
}

pub fn apply_with_cache(f: &GridFunction, cache: &SliceWeightCache) -> Result<(GridFunction, ProjectionDiagnostics)> {
    let start = Instant::now();
    let spec = f.spec;
    if spec != cache.spec {
        return Err(Error::InvalidGrid("cache built for a different grid".into()));
    }
    let m = spec.slice_count();
    let w = spec.x_weights();
    let hat = partial_fourier(f, Direction::Forward);

    let columns: Vec<(Vec<Complex64>, f64)> = (0..m)
        .into_par_iter()
        .map(|s| {
            let g: Vec<Complex64> = (0..spec.n_x).map(|i| hat.samples[i * m + s]).collect();
            let energy: f64 = g.iter().zip(&w).map(|(v, w)| v.norm_sqr() * w).sum();
            (frequency_slice_project(&g, &cache.slices[s], &w), energy)
        })
        .collect();

    let total_energy: f64 = columns.iter().map(|c| c.1).sum();
    let mut diag = ProjectionDiagnostics { slice_count: m, ..Default::default() };
    let mut sigma_energy = 0.0;
    for (slice, (_, energy)) in cache.slices.iter().zip(&columns) {
        if !slice.in_sigma {
            continue;
        }
        diag.in_sigma_count += 1;
        sigma_energy += energy;
        diag.guarded_slice_count += slice.guarded as usize;
        if *energy >= ENERGY_FLOOR * total_energy && total_energy > 0.0 {
            diag.energy_carrying_in_sigma += 1;
            diag.energy_carrying_guarded += slice.guarded as usize;
        }
    }
    diag.energy_in_sigma = if total_energy > 0.0 { sigma_energy / total_energy } else { 0.0 };
    if diag.energy_carrying_guarded as f64 > MAX_GUARDED_FRACTION * diag.energy_carrying_in_sigma as f64 {
        return Err(Error::BoxTooSmall { guarded: diag.energy_carrying_guarded, total: diag.energy_carrying_in_sigma });
    }

    let mut projected = GridFunction { spec, samples: vec![Complex64::new(0.0, 0.0); spec.len()] };
    for (s, (col, _)) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            projected.samples[i * m + s] = *v;
        }
    }
    let out = partial_fourier(&projected, Direction::Inverse);
    diag.runtime_ms = start.elapsed().as_millis() as u64;
    Ok((out, diag))
}

/// `L̄ = ∂_x + i(∂_y − p'(x) a·∂_t)`: spectral in `(y, t)`, fourth-order
/// finite differences in `x` with one-sided stencils at the edges.
pub fn apply_lbar(f: &GridFunction, model: &PolynomialModel) -> Result<GridFunction> {
    let spec = f.spec;
    if spec.n != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: spec.n });
    }
    let m = spec.slice_count();
    let dp = poly::derivative(model.p_coeffs(), 1);
    let xs = spec.x_nodes();

    // i(∂_y − p' a·∂_t) ↦ −2π(η − p'(x) a·τ) on the transform side.
    let mut hat = partial_fourier(f, Direction::Forward);
    let freqs: Vec<(f64, f64)> =
        (0..m).map(|s| spec.frequency(s)).map(|fr| (fr.eta, model.a_dot(&fr.tau))).collect();
    hat.samples.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let slope = poly::eval(&dp, xs[i]);
        for (v, (eta, at)) in row.iter_mut().zip(&freqs) {
            *v *= -2.0 * PI * (eta - slope * at);
        }
    });
    let mut out = partial_fourier(&hat, Direction::Inverse);

    let h = spec.hx();
    let nx = spec.n_x;
    let col = |i: usize, s: usize| f.samples[i * m + s];
    for s in 0..m {
        for i in 0..nx {
            let d = if i >= 2 && i + 2 < nx {
                -col(i + 2, s) + 8.0 * col(i + 1, s) - 8.0 * col(i - 1, s) + col(i - 2, s)
            } else if i == 0 {
                -25.0 * col(0, s) + 48.0 * col(1, s) - 36.0 * col(2, s) + 16.0 * col(3, s) - 3.0 * col(4, s)
            } else if i == 1 {
                -3.0 * col(0, s) - 10.0 * col(1, s) + 18.0 * col(2, s) - 6.0 * col(3, s) + col(4, s)
            } else if i == nx - 1 {
                25.0 * col(nx - 1, s) - 48.0 * col(nx - 2, s) + 36.0 * col(nx - 3, s) - 16.0 * col(nx - 4, s)
                    + 3.0 * col(nx - 5, s)
            } else {
                3.0 * col(nx - 1, s) + 10.0 * col(nx - 2, s) - 18.0 * col(nx - 3, s) + 6.0 * col(nx - 4, s)
                    - col(nx - 5, s)
            };
            out.samples[i * m + s] += d / (12.0 * h);
        }
    }
    Ok(out)
}

/// Box half-width for a quadric profile `λx²`, wide enough that the
/// admissible slices of the lattice decay below [`GUARD_LEVEL`] at the edge:
/// the widest profile (smallest `λτ`) centered at the largest offset
/// `|η| / (2λτ)`.
pub fn suggest_half_width(lambda: f64, spec: &GridSpec) -> f64 {
    let tau_min = 1.0 / spec.l_t;
    let eta_max = (spec.n_y / 2) as f64 / spec.l_y;
    let lt = lambda * tau_min;
    6.0 / lt.powf(0.25) + eta_max / (2.0 * lt)
}

/// Sidecar and binary paths for a grid file given either path or the stem.
pub fn grid_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

pub fn write_grid(path: &Path, g: &GridFunction) -> std::io::Result<()> {
    let (json, bin) = grid_paths(path);
    fs::write(&json, serde_json::to_string_pretty(&g.spec)?)?;
    let mut bytes = Vec::with_capacity(16 * g.samples.len());
    for v in &g.samples {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(bin, bytes)
}

#[derive(Debug, thiserror::Error)]
pub enum GridIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed grid sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Grid(#[from] Error),
}

pub fn read_grid(path: &Path) -> std::result::Result<GridFunction, GridIoError> {
    let (json, bin) = grid_paths(path);
    let spec: GridSpec = serde_json::from_str(&fs::read_to_string(json)?)?;
    spec.validate()?;
    let bytes = fs::read(bin)?;
    if bytes.len() != 16 * spec.len() {
        return Err(Error::InvalidGrid(format!("binary holds {} bytes, expected {}", bytes.len(), 16 * spec.len())).into());
    }
    let samples = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok(GridFunction::from_samples(spec, samples)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_spec() -> GridSpec {
        GridSpec { n: 1, n_x: 32, n_y: 16, n_t: 16, x_max: 6.0, l_y: 16.0, l_t: 2.0 }
    }

    fn random(spec: GridSpec, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..spec.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        GridFunction::from_samples(spec, samples).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(small_spec().validate().is_ok());
        assert!(GridSpec { n_y: 12, ..small_spec() }.validate().is_err());
        assert!(GridSpec { n_x: 4, ..small_spec() }.validate().is_err());
        assert!(GridSpec { l_t: 0.0, ..small_spec() }.validate().is_err());
    }

    #[test]
    fn sidecar_field_names() {
        let v: serde_json::Value = serde_json::to_value(small_spec()).unwrap();
        for k in ["n", "N_x", "N_y", "N_t", "X", "L_y", "L_t"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert!(serde_json::from_str::<GridSpec>(r#"{"n":1,"N_x":8,"N_y":4,"N_t":4,"X":1,"L_y":1,"L_t":1,"extra":0}"#).is_err());
    }

    #[test]
    fn slice_frequencies_in_fft_order() {
        let spec = GridSpec { n: 2, n_x: 8, n_y: 4, n_t: 4, x_max: 1.0, l_y: 2.0, l_t: 4.0 };
        // slice = (j * 4 + k1) * 4 + k2
        let f = spec.frequency((3 * 4 + 1) * 4 + 2);
        assert_eq!(f.eta, -0.5);
        assert_eq!(f.tau, vec![0.25, -0.5]);
    }

    #[test]
    fn pure_tone_concentrates() {
        let spec = small_spec();
        let f = GridFunction::from_fn(spec, |x, y, _| {
            Complex64::from_polar((-x * x).exp(), 2.0 * PI * 3.0 * y / spec.l_y)
        })
        .unwrap();
        let hat = partial_fourier(&f, Direction::Forward);
        let m = spec.slice_count();
        let target = 3 * spec.n_t; // j = 3, k = 0
        for s in 0..m {
            let mag: f64 = (0..spec.n_x).map(|i| hat.samples[i * m + s].norm()).sum();
            if s == target {
                assert!(mag > 1.0);
            } else {
                assert!(mag < 1e-10, "slice {s} holds {mag}");
            }
        }
    }

    #[test]
    fn constant_goes_to_zero_frequency() {
        let spec = small_spec();
        let f = GridFunction::from_fn(spec, |_, _, _| Complex64::new(1.0, 0.0)).unwrap();
        let hat = partial_fourier(&f, Direction::Forward);
        let m = spec.slice_count();
        for i in 0..spec.n_x {
            assert!((hat.samples[i * m] - Complex64::new(spec.l_y * spec.l_t, 0.0)).norm() < 1e-12);
            assert!(hat.samples[i * m + 1..(i + 1) * m].iter().all(|v| v.norm() < 1e-12));
        }
    }

    #[test]
    fn fourier_round_trip() {
        let spec = GridSpec { n: 2, n_x: 6, n_y: 8, n_t: 4, x_max: 1.0, l_y: 3.0, l_t: 5.0 };
        let f = random(spec, 1);
        let back = partial_fourier(&partial_fourier(&f, Direction::Forward), Direction::Inverse);
        let err = f.sub(&back).samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mx = f.samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err / mx < 1e-12);
    }

    #[test]
    fn slice_fixed_point_and_zero_cases() {
        let model = build_model(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let spec = small_spec();
        let cache = SliceWeightCache::new(spec, &model).unwrap();
        let w = spec.x_weights();
        // η = 0, τ = 1/L_t
        let slice = &cache.slices[1];
        assert!(slice.active());
        let g: Vec<Complex64> = slice.profile.iter().map(|v| Complex64::new(2.0 * v, -v)).collect();
        let out = frequency_slice_project(&g, slice, &w);
        for (a, b) in g.iter().zip(&out) {
            assert!((a - b).norm() < 1e-14);
        }
        // odd input against an even profile
        let odd: Vec<Complex64> = spec.x_nodes().iter().map(|&x| Complex64::new(x * (-x * x).exp(), 0.0)).collect();
        assert!(frequency_slice_project(&odd, slice, &w).iter().all(|v| v.norm() < 1e-14));
        // τ < 0 lies outside the cone
        let outside = &cache.slices[spec.n_t - 1];
        assert!(!outside.in_sigma);
        assert!(frequency_slice_project(&g, outside, &w).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn cache_matches_weights_module() {
        let model = build_model(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let spec = GridSpec { n_x: 257, ..small_spec() };
        let cache = SliceWeightCache::new(spec, &model).unwrap();
        for s in cache.slices.iter().filter(|s| s.active()) {
            let direct = log_weight_quadrature(&model, &s.frequency, 1e-13).unwrap().log_c;
            assert_eq!(s.log_c, Some(direct));
            // the trapezoid rule is spectrally accurate on resolved profiles
            if s.frequency.tau[0] <= 2.0 {
                assert!((s.discrete_log_c() - direct).abs() < 1e-12, "{:?}", s.frequency);
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_contractive() {
        let model = build_model(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let spec = small_spec();
        let f = random(spec, 2);
        let (sf, diag) = apply_szego_projection(&f, &model).unwrap();
        assert_eq!(diag.energy_carrying_guarded, 0);
        let (ssf, _) = apply_szego_projection(&sf, &model).unwrap();
        assert!(ssf.sub(&sf).norm() / sf.norm() < 1e-12);
        assert!(sf.norm() <= f.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn small_box_is_rejected() {
        let model = build_model(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let spec = GridSpec { n_x: 8, x_max: 1.0, ..small_spec() };
        let f = random(spec, 3);
        assert!(matches!(apply_szego_projection(&f, &model), Err(Error::BoxTooSmall { .. })));
    }

    #[test]
    fn lbar_on_simple_functions() {
        let model = build_model(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let spec = GridSpec { n_x: 129, ..small_spec() };
        // x times a cutoff that is flat on [-2, 2]
        let cutoff = |x: f64| if x.abs() < 2.0 { 1.0 } else { (-(x.abs() - 2.0).powi(4)).exp() };
        let f = GridFunction::from_fn(spec, |x, _, _| Complex64::new(x * cutoff(x), 0.0)).unwrap();
        let l = apply_lbar(&f, &model).unwrap();
        let m = spec.slice_count();
        for i in 0..spec.n_x {
            let x = spec.x_node(i);
            if x.abs() < 1.5 {
                assert!((l.samples[i * m + 5] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
            }
        }
        // a y-tone: i ∂_y e^{2πiy/L} = −(2π/L) e^{2πiy/L}
        let k = 2.0 * PI / spec.l_y;
        let tone = GridFunction::from_fn(spec, |_, y, _| Complex64::from_polar(1.0, k * y)).unwrap();
        let l = apply_lbar(&tone, &model).unwrap();
        for (a, b) in l.samples.iter().zip(&tone.samples) {
            assert!((a - b * (-k)).norm() < 1e-10);
        }
    }

    #[test]
    fn grid_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let f = random(GridSpec { n: 2, n_x: 5, n_y: 4, n_t: 2, x_max: 1.0, l_y: 1.0, l_t: 1.0 }, 9);
        write_grid(&path, &f).unwrap();
        assert_eq!(read_grid(&path).unwrap(), f);
        std::fs::write(dir.path().join("g.bin"), [0u8; 10]).unwrap();
        assert!(read_grid(&path).is_err());
    }
}
