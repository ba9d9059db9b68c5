//! Globally adaptive 15-point Gauss–Kronrod quadrature.
//!
//! Panels are refined in order of their error estimate. The final value is
//! summed over panels sorted by position, so results are reproducible for a
//! given partition regardless of whether node evaluation ran in parallel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Scalar types the integrator can accumulate.
pub trait QuadValue: Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Uniform panels before adaptive refinement starts.
    pub initial_panels: usize,
    /// Evaluate the 15 nodes of each panel on the rayon pool.
    pub parallel: bool,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 0.0, rel_tol: 1e-10, max_panels: 2000, initial_panels: 1, parallel: false }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    /// Estimate of the integral of `|f|`.
    pub abs_integral: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    abs_value: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.a == other.a
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<T: QuadValue, F: Fn(f64) -> T + Sync>(f: &F, a: f64, b: f64, parallel: bool) -> Panel<T> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut nodes = [0.0f64; 15];
    for j in 0..7 {
        nodes[2 * j] = c - h * XGK[j];
        nodes[2 * j + 1] = c + h * XGK[j];
    }
    nodes[14] = c;
    let vals: Vec<T> = if parallel {
        nodes.par_iter().map(|&x| f(x)).collect()
    } else {
        nodes.iter().map(|&x| f(x)).collect()
    };
    let mut kron = vals[14] * WGK[7];
    let mut gauss = vals[14] * WG[3];
    let mut abs_k = vals[14].magnitude() * WGK[7];
    for j in 0..7 {
        let pair = vals[2 * j] + vals[2 * j + 1];
        kron = kron + pair * WGK[j];
        abs_k += (vals[2 * j].magnitude() + vals[2 * j + 1].magnitude()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let h_abs = h.abs();
    let value = kron * h;
    let error = ((kron - gauss) * h).magnitude().max(50.0 * f64::EPSILON * abs_k * h_abs);
    Panel { a, b, value, error, abs_value: abs_k * h_abs }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: Fn(f64) -> T + Sync,
{
    let mut heap = BinaryHeap::new();
    let n0 = opts.initial_panels.max(1);
    let w = (b - a) / n0 as f64;
    for i in 0..n0 {
        let lo = a + w * i as f64;
        let hi = if i + 1 == n0 { b } else { a + w * (i + 1) as f64 };
        heap.push(gk15(&f, lo, hi, opts.parallel));
    }
    let mut evaluations = 15 * n0;
    loop {
        let (value, error, _) = totals(heap.iter());
        let target = opts.abs_tol.max(opts.rel_tol * value.magnitude());
        if error <= target || heap.len() >= opts.max_panels {
            return finish(heap, evaluations, error <= target);
        }
        let worst = heap.pop().expect("non-empty panel heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            heap.push(worst);
            return finish(heap, evaluations, false);
        }
        heap.push(gk15(&f, worst.a, mid, opts.parallel));
        heap.push(gk15(&f, mid, worst.b, opts.parallel));
        evaluations += 30;
    }
}

fn totals<'a, T: QuadValue + 'a>(panels: impl Iterator<Item = &'a Panel<T>>) -> (T, f64, f64) {
    panels.fold((T::zero(), 0.0, 0.0), |(v, e, m), p| (v + p.value, e + p.error, m + p.abs_value))
}

fn finish<T: QuadValue>(heap: BinaryHeap<Panel<T>>, evaluations: usize, converged: bool) -> QuadResult<T> {
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let (value, error, abs_integral) = totals(panels.iter());
    QuadResult { value, error, abs_integral, evaluations, converged }
}
