//! C ABI for `szego-core`.
//!
//! Models are opaque handles created by [`szego_model_new`] and released with
//! [`szego_model_free`]. Every fallible call returns a [`SzegoStatus`]; on
//! failure a message is available from [`szego_last_error`] on the same
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use num_complex::Complex64;
use szego::projection::{GridFunction, GridSpec};
use szego::{Error, Frequency, ManifoldPoint, Method, PolynomialModel};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzegoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidModel = 2,
    InvalidArgument = 3,
    Divergent = 4,
    OnDiagonal = 5,
    NearDiagonal = 6,
    ToleranceNotMet = 7,
    BoxTooSmall = 8,
    Unsupported = 9,
    Panic = 10,
}

/// Kernel evaluation method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzegoMethod {
    Auto = 0,
    Closed = 1,
    Numeric = 2,
}

/// Grid geometry; samples are interleaved `(re, im)` doubles, row-major over
/// `(i_x, i_y, i_t1, ..., i_tn)` with `x` slowest.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SzegoGridSpec {
    pub n: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_t: usize,
    pub x_max: f64,
    pub l_y: f64,
    pub l_t: f64,
}

/// Opaque model handle.
pub struct SzegoModel {
    inner: PolynomialModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SzegoStatus {
    match e {
        Error::EmptyInput
        | Error::NonSuperlinear { .. }
        | Error::ZeroLastDirection
        | Error::NegativeLastDirection(_) => SzegoStatus::InvalidModel,
        Error::Divergent => SzegoStatus::Divergent,
        Error::OnDiagonal => SzegoStatus::OnDiagonal,
        Error::NearDiagonal => SzegoStatus::NearDiagonal,
        Error::ToleranceNotMet { .. } | Error::NoPathFound(_) => SzegoStatus::ToleranceNotMet,
        Error::BoxTooSmall { .. } => SzegoStatus::BoxTooSmall,
        Error::UnsupportedProfile(_) => SzegoStatus::Unsupported,
        _ => SzegoStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard<F: FnOnce() -> Result<(), (SzegoStatus, String)>>(f: F) -> SzegoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SzegoStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SzegoStatus::Panic
        }
    }
}

fn lib(e: Error) -> (SzegoStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SzegoStatus, String) {
    (SzegoStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn read<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (SzegoStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `m` must be null or a handle from [`szego_model_new`] that was not freed.
unsafe fn model<'a>(m: *const SzegoModel) -> Result<&'a PolynomialModel, (SzegoStatus, String)> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

/// Builds a model with profile `p_coeffs` (ascending) and direction `a`
/// (length `n`). On success `*out` receives a new handle.
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn szego_model_new(
    p_coeffs: *const f64,
    p_len: usize,
    a: *const f64,
    n: usize,
    out: *mut *mut SzegoModel,
) -> SzegoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = read(p_coeffs, p_len, "p_coeffs")?;
        let a = read(a, n, "a")?;
        let inner = szego::build_model(p, a).map_err(lib)?;
        *out = Box::into_raw(Box::new(SzegoModel { inner }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must be null or a live handle from [`szego_model_new`].
#[no_mangle]
pub unsafe extern "C" fn szego_model_free(model: *mut SzegoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Codimension `n` of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn szego_model_codimension(model: *const SzegoModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n())
}

/// `log C_{η,τ}` with `tau` of length `n`.
///
/// # Safety
/// `tau` must hold `tau_len` doubles; output pointers must be writable
/// (`out_est_error` may be null).
#[no_mangle]
pub unsafe extern "C" fn szego_log_weight(
    model: *const SzegoModel,
    eta: f64,
    tau: *const f64,
    tau_len: usize,
    rel_tol: f64,
    out_log_c: *mut f64,
    out_est_error: *mut f64,
) -> SzegoStatus {
    guard(|| {
        let m = self::model(model)?;
        let tau = read(tau, tau_len, "tau")?;
        if out_log_c.is_null() {
            return Err(null("out_log_c"));
        }
        let w = szego::log_weight_quadrature(m, &Frequency::new(eta, tau.to_vec()), rel_tol).map_err(lib)?;
        *out_log_c = w.log_c;
        if !out_est_error.is_null() {
            *out_est_error = w.est_error;
        }
        Ok(())
    })
}

/// Kernel as `amplitude · δ₀[leaf_offset]` between points given as
/// `(x, y, t_1, ..., t_n)` arrays of length `n + 2`. `out_offset` receives
/// `n − 1` values and may be null when `n = 1`.
///
/// # Safety
/// `alpha` and `beta` must hold `point_len` doubles; output pointers must be
/// writable for their documented lengths.
#[no_mangle]
pub unsafe extern "C" fn szego_kernel(
    model: *const SzegoModel,
    alpha: *const f64,
    beta: *const f64,
    point_len: usize,
    rel_tol: f64,
    method: SzegoMethod,
    out_amplitude_re: *mut f64,
    out_amplitude_im: *mut f64,
    out_offset: *mut f64,
    out_on_leaf: *mut bool,
) -> SzegoStatus {
    guard(|| {
        let m = self::model(model)?;
        if point_len < 3 {
            return Err((SzegoStatus::InvalidArgument, format!("points need at least 3 coordinates, got {point_len}")));
        }
        let to_point = |v: &[f64]| ManifoldPoint::new(v[0], v[1], v[2..].to_vec());
        let a = to_point(read(alpha, point_len, "alpha")?);
        let b = to_point(read(beta, point_len, "beta")?);
        if out_amplitude_re.is_null() || out_amplitude_im.is_null() {
            return Err(null("amplitude output"));
        }
        let method = match method {
            SzegoMethod::Auto => Method::Auto,
            SzegoMethod::Closed => Method::Closed,
            SzegoMethod::Numeric => Method::Numeric,
        };
        let v = szego::factorized_kernel(m, &a, &b, rel_tol, method).map_err(lib)?;
        if !v.leaf_offset.is_empty() {
            if out_offset.is_null() {
                return Err(null("out_offset"));
            }
            slice::from_raw_parts_mut(out_offset, v.leaf_offset.len()).copy_from_slice(&v.leaf_offset);
        }
        *out_amplitude_re = v.amplitude.re;
        *out_amplitude_im = v.amplitude.im;
        if !out_on_leaf.is_null() {
            *out_on_leaf = v.on_leaf;
        }
        Ok(())
    })
}

/// Number of complex samples a grid holds, or 0 for an invalid spec.
#[no_mangle]
pub extern "C" fn szego_grid_len(spec: SzegoGridSpec) -> usize {
    let g = to_grid(spec);
    if g.validate().is_ok() {
        g.len()
    } else {
        0
    }
}

fn to_grid(s: SzegoGridSpec) -> GridSpec {
    GridSpec { n: s.n, n_x: s.n_x, n_y: s.n_y, n_t: s.n_t, x_max: s.x_max, l_y: s.l_y, l_t: s.l_t }
}

/// Applies the Szegő projection. `input` and `output` hold
/// `2 * szego_grid_len(spec)` doubles and may alias.
///
/// # Safety
/// Buffers must be valid for the stated length.
#[no_mangle]
pub unsafe extern "C" fn szego_project(
    model: *const SzegoModel,
    spec: SzegoGridSpec,
    input: *const f64,
    output: *mut f64,
) -> SzegoStatus {
    guard(|| {
        let m = self::model(model)?;
        let grid = to_grid(spec);
        grid.validate().map_err(lib)?;
        let len = grid.len();
        let raw = read(input, 2 * len, "input")?;
        let samples = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        if output.is_null() {
            return Err(null("output"));
        }
        let f = GridFunction::from_samples(grid, samples).map_err(lib)?;
        let (sf, _) = szego::apply_szego_projection(&f, m).map_err(lib)?;
        let out = slice::from_raw_parts_mut(output, 2 * len);
        for (o, v) in out.chunks_exact_mut(2).zip(&sf.samples) {
            o[0] = v.re;
            o[1] = v.im;
        }
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn szego_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn szego_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
