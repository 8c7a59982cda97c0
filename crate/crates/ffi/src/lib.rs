//! C ABI over the `uiotrack` core.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns a status code:
//! `UIO_OK` on success, `UIO_ERR_INVALID_ARGUMENT` for null pointers, bad
//! sizes or short buffers, `UIO_ERR_PANIC` if the core panicked, and the
//! core's own error code otherwise. The message for the most recent failure
//! on the calling thread is available from `uio_last_error_message`.
//!
//! Matrices and signals are passed as row-major `double` arrays. A signal of
//! `steps` samples in dimension `m` occupies `steps * m` doubles, sample after
//! sample.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use uiotrack::design::{Design, DesignOptions};
use uiotrack::estimator::{nmp_error_bound, reconstruct, FirConfig, InitPolicy};
use uiotrack::linalg::{Mat, Vector};
use uiotrack::system::{SignalTrace, StateSpace, DEFAULT_GRID_POINTS};
use uiotrack::tracker::{track, tracking_error_bound, TrackingConfig};
use uiotrack::zeros::transmission_zeros;

pub const UIO_OK: i32 = 0;
pub const UIO_ERR_INVALID_ARGUMENT: i32 = 1;
pub const UIO_ERR_PANIC: i32 = 255;

/// Far-end guess of the non-minimum-phase filter: all zeros.
pub const UIO_POLICY_ZERO: i32 = 0;
/// Far-end guess of the non-minimum-phase filter: the previous estimate.
pub const UIO_POLICY_WARM_START: i32 = 1;

/// Square discrete-time plant `x(k+1) = A x + B u`, `y = C x + D u`.
pub struct UioSystem(StateSpace);

/// Observer, partition and zero dynamics synthesized for one plant.
pub struct UioDesign(Design);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(i32);

impl From<uiotrack::Error> for Failure {
    fn from(e: uiotrack::Error) -> Self {
        set_error(e.to_string());
        Failure(e.code())
    }
}

fn invalid(msg: &str) -> Failure {
    set_error(msg);
    Failure(UIO_ERR_INVALID_ARGUMENT)
}

/// Run `f`, translating errors and panics into status codes.
fn guarded(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            UIO_OK
        }
        Ok(Err(Failure(code))) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in uiotrack".to_string());
            set_error(format!("internal error: {msg}"));
            UIO_ERR_PANIC
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn design_ref<'a>(design: *const UioDesign) -> Result<&'a Design, Failure> {
    design
        .as_ref()
        .map(|d| &d.0)
        .ok_or_else(|| invalid("design handle is null"))
}

fn policy(code: i32) -> Result<InitPolicy, Failure> {
    match code {
        UIO_POLICY_ZERO => Ok(InitPolicy::Zero),
        UIO_POLICY_WARM_START => Ok(InitPolicy::WarmStart),
        other => Err(invalid(&format!("unknown init policy {other}"))),
    }
}

fn signal(data: &[f64], dim: usize) -> Result<SignalTrace, Failure> {
    if dim == 0 {
        return Err(invalid("signal dimension is zero"));
    }
    let samples = data.chunks(dim).map(Vector::from_row_slice).collect();
    Ok(SignalTrace::new(0, dim, samples)?)
}

/// Copy a trace into `buf`, which holds `capacity` samples.
unsafe fn write_trace(
    trace: &SignalTrace,
    buf: *mut f64,
    capacity: usize,
    first_index: *mut i64,
    count: *mut usize,
) -> Result<(), Failure> {
    let first_index = output(first_index, "first_index")?;
    let count = output(count, "count")?;
    *first_index = trace.start();
    *count = trace.len();
    if trace.len() > capacity {
        return Err(invalid(&format!(
            "buffer holds {capacity} samples, {} needed",
            trace.len()
        )));
    }
    if trace.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(invalid("output buffer is null"));
    }
    let out = slice::from_raw_parts_mut(buf, trace.len() * trace.dim());
    for (dst, src) in out.chunks_mut(trace.dim()).zip(trace.samples()) {
        dst.copy_from_slice(src.as_slice());
    }
    Ok(())
}

/// Build a plant from row-major `A` (n×n), `B` (n×m), `C` (m×n), `D` (m×m).
///
/// # Safety
/// Each matrix pointer must reference the stated number of doubles and
/// `out` must be a valid place to store a handle.
#[no_mangle]
pub unsafe extern "C" fn uio_system_new(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    d: *const f64,
    out: *mut *mut UioSystem,
) -> i32 {
    guarded(|| {
        let out = output(out, "out")?;
        let a = Mat::from_row_slice(n, n, input(a, n * n, "A")?);
        let b = Mat::from_row_slice(n, m, input(b, n * m, "B")?);
        let c = Mat::from_row_slice(m, n, input(c, m * n, "C")?);
        let d = Mat::from_row_slice(m, m, input(d, m * m, "D")?);
        let sys = StateSpace::new(a, b, c, d)?;
        sys.require_square()?;
        *out = Box::into_raw(Box::new(UioSystem(sys)));
        Ok(())
    })
}

/// Release a plant. Null is ignored.
///
/// # Safety
/// `sys` must come from `uio_system_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uio_system_free(sys: *mut UioSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Finite transmission zeros, sorted. `count` receives the number of zeros
/// even when `capacity` is too small, in which case nothing is written.
///
/// # Safety
/// `re` and `im` must each hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn uio_system_zeros(
    sys: *const UioSystem,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> i32 {
    guarded(|| {
        let sys = sys
            .as_ref()
            .ok_or_else(|| invalid("system handle is null"))?;
        let count = output(count, "count")?;
        let zeros = transmission_zeros(&sys.0, DesignOptions::default().uc_tol)?.all();
        *count = zeros.len();
        if zeros.len() > capacity {
            return Err(invalid(&format!(
                "buffer holds {capacity} zeros, {} needed",
                zeros.len()
            )));
        }
        if zeros.is_empty() {
            return Ok(());
        }
        if re.is_null() || im.is_null() {
            return Err(invalid("output buffer is null"));
        }
        for (i, z) in zeros.iter().enumerate() {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
        Ok(())
    })
}

/// Synthesize the observer and zero dynamics with default options.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid place to store a handle.
#[no_mangle]
pub unsafe extern "C" fn uio_design_new(sys: *const UioSystem, out: *mut *mut UioDesign) -> i32 {
    guarded(|| {
        let sys = sys
            .as_ref()
            .ok_or_else(|| invalid("system handle is null"))?;
        let out = output(out, "out")?;
        let design = Design::new(sys.0.clone(), DesignOptions::default())?;
        *out = Box::into_raw(Box::new(UioDesign(design)));
        Ok(())
    })
}

/// Release a design. Null is ignored.
///
/// # Safety
/// `design` must come from `uio_design_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uio_design_free(design: *mut UioDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// State order, input count, observer order `q` and the dimension of the
/// non-minimum-phase coordinates. Any output pointer may be null.
///
/// # Safety
/// `design` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn uio_design_dims(
    design: *const UioDesign,
    n: *mut usize,
    m: *mut usize,
    q: *mut usize,
    nmp_dim: *mut usize,
) -> i32 {
    guarded(|| {
        let d = design_ref(design)?;
        for (ptr, v) in [
            (n, d.n()),
            (m, d.sys.m()),
            (q, d.q()),
            (nmp_dim, d.nmp_dim()),
        ] {
            if let Some(p) = ptr.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Worst-case gain from input energy to the non-minimum-phase state error
/// for preview delay `n_d`.
///
/// # Safety
/// `design` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uio_design_nmp_bound(
    design: *const UioDesign,
    n_d: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let d = design_ref(design)?;
        let out = output(out, "out")?;
        FirConfig::new(n_d, InitPolicy::Zero)?;
        *out = nmp_error_bound(
            &d.zero_dynamics,
            &d.partition,
            n_d,
            DEFAULT_GRID_POINTS,
            d.options.uc_tol,
        )?;
        Ok(())
    })
}

/// Worst-case gain from reference-generating input energy to the output
/// tracking error for preview delay `n_d`.
///
/// # Safety
/// `design` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uio_design_tracking_bound(
    design: *const UioDesign,
    n_d: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let d = design_ref(design)?;
        let out = output(out, "out")?;
        FirConfig::new(n_d, InitPolicy::Zero)?;
        *out = tracking_error_bound(d, n_d)?;
        Ok(())
    })
}

/// Reconstruct the unknown input from `steps` output samples starting at
/// index 0, with the observer started at zero. The estimate for sample
/// `first_index + i` is written to row `i` of `u_hat`.
///
/// # Safety
/// `y` must hold `steps * m` doubles and `u_hat` `capacity * m` doubles.
#[no_mangle]
pub unsafe extern "C" fn uio_reconstruct(
    design: *const UioDesign,
    y: *const f64,
    steps: usize,
    n_d: usize,
    init_policy: i32,
    u_hat: *mut f64,
    capacity: usize,
    first_index: *mut i64,
    count: *mut usize,
) -> i32 {
    guarded(|| {
        let d = design_ref(design)?;
        let y = signal(input(y, steps * d.sys.l(), "y")?, d.sys.l())?;
        let cfg = FirConfig::new(n_d, policy(init_policy)?)?;
        let rec = reconstruct(d, &y, &Vector::zeros(d.q()), cfg)?;
        write_trace(&rec.u_hat, u_hat, capacity, first_index, count)
    })
}

/// Compute the command that makes the plant, started at rest, follow `y_d`
/// with preview delay `n_d`. Commands are written as in `uio_reconstruct`.
///
/// # Safety
/// `y_d` must hold `steps * m` doubles and `u` `capacity * m` doubles.
#[no_mangle]
pub unsafe extern "C" fn uio_track(
    design: *const UioDesign,
    y_d: *const f64,
    steps: usize,
    n_d: usize,
    init_policy: i32,
    u: *mut f64,
    capacity: usize,
    first_index: *mut i64,
    count: *mut usize,
) -> i32 {
    guarded(|| {
        let d = design_ref(design)?;
        let y_d = signal(input(y_d, steps * d.sys.l(), "y_d")?, d.sys.l())?;
        let cfg = TrackingConfig::new(n_d, policy(init_policy)?, Vector::zeros(d.n()))?;
        let r = track(d, &y_d, &cfg)?;
        write_trace(&r.u_hat, u, capacity, first_index, count)
    })
}

/// Copy the last error message of this thread into `buf` as a NUL-terminated
/// string, truncating if needed. Returns the full message length without
/// the terminator. An empty message means the last call succeeded.
///
/// # Safety
/// `buf` must hold `len` bytes, or be null with `len` zero.
#[no_mangle]
pub unsafe extern "C" fn uio_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            let dst = slice::from_raw_parts_mut(buf as *mut u8, n + 1);
            dst[..n].copy_from_slice(&msg.as_bytes()[..n]);
            dst[n] = 0;
        }
        msg.len()
    })
}
