//! C ABI over the swamm sliding-window sketches.
//!
//! Sketches are opaque heap handles created by `*_new` or `*_load` and
//! released with `*_free`. Every fallible call returns a [`SwammStatus`];
//! the message for the most recent failure on the calling thread is
//! available from [`swamm_last_error`]. Matrices cross the boundary as
//! column-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use swamm::{DenseMatrix, Error, LayeredSketch, SlidingSketch};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwammStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    NotNormalized = 5,
    NormOutOfRange = 6,
    BufferTooSmall = 7,
    Corrupt = 8,
    Panic = 9,
}

/// Sliding-window sketch for a fixed threshold.
pub struct SwammSketch(SlidingSketch);

/// Layered sketch for columns with squared norms in `[1, R]`.
pub struct SwammLayered(LayeredSketch);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: SwammStatus, msg: impl Into<String>) -> SwammStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> SwammStatus {
    match e {
        Error::NonFinite => SwammStatus::NonFinite,
        Error::DimensionMismatch { .. } => SwammStatus::DimensionMismatch,
        Error::NotNormalized { .. } => SwammStatus::NotNormalized,
        Error::NormOutOfRange { .. } => SwammStatus::NormOutOfRange,
        Error::Corrupt(_) => SwammStatus::Corrupt,
        _ => SwammStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SwammStatus>) -> SwammStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SwammStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(SwammStatus::Panic, "internal panic"),
    }
}

fn check(r: swamm::Result<()>) -> Result<(), SwammStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], SwammStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SwammStatus::NullPointer, "null input array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, SwammStatus> {
    p.as_ref().ok_or_else(|| fail(SwammStatus::NullPointer, "null handle"))
}

unsafe fn handle_mut<'a, T>(p: *mut T) -> Result<&'a mut T, SwammStatus> {
    p.as_mut().ok_or_else(|| fail(SwammStatus::NullPointer, "null handle"))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), SwammStatus> {
    if out.is_null() {
        return Err(fail(SwammStatus::NullPointer, "null output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_count(out: *mut usize, n: usize) -> Result<(), SwammStatus> {
    if out.is_null() {
        return Err(fail(SwammStatus::NullPointer, "null output pointer"));
    }
    *out = n;
    Ok(())
}

/// Copy `m` column-major into `out[..len]`.
unsafe fn write_matrix(m: &DenseMatrix, out: *mut f64, len: usize) -> Result<(), SwammStatus> {
    let need = m.len();
    if need == 0 {
        return Ok(());
    }
    if len < need {
        return Err(fail(
            SwammStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {need}"),
        ));
    }
    if out.is_null() {
        return Err(fail(SwammStatus::NullPointer, "null output array"));
    }
    std::slice::from_raw_parts_mut(out, need).copy_from_slice(m.as_slice());
    Ok(())
}

/// Write `bytes` to `out` when it fits; `written` always receives the size.
unsafe fn write_bytes(bytes: &[u8], out: *mut u8, len: usize, written: *mut usize) -> Result<(), SwammStatus> {
    write_count(written, bytes.len())?;
    if len < bytes.len() || out.is_null() {
        return Err(fail(
            SwammStatus::BufferTooSmall,
            format!("buffer holds {len} bytes, need {}", bytes.len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, bytes.len()).copy_from_slice(bytes);
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn swamm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Normalized-model sketch: unit-norm columns, threshold `eps * n_window`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_new(
    d_x: usize,
    d_y: usize,
    eps: f64,
    n_window: u64,
    out: *mut *mut SwammSketch,
) -> SwammStatus {
    guard(|| {
        let s = SlidingSketch::new(d_x, d_y, eps, n_window).map_err(|e| fail(status_of(&e), e.to_string()))?;
        store(out, SwammSketch(s))
    })
}

/// Sketch with explicit width and registration threshold; any column norms.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_new_with_threshold(
    d_x: usize,
    d_y: usize,
    width: usize,
    n_window: u64,
    theta: f64,
    out: *mut *mut SwammSketch,
) -> SwammStatus {
    guard(|| {
        let s = SlidingSketch::with_threshold(d_x, d_y, width, n_window, theta)
            .map_err(|e| fail(status_of(&e), e.to_string()))?;
        store(out, SwammSketch(s))
    })
}

/// # Safety
/// `sketch` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_free(sketch: *mut SwammSketch) {
    if !sketch.is_null() {
        drop(Box::from_raw(sketch));
    }
}

/// Append one column pair. `fast` selects the incremental update.
///
/// # Safety
/// `x` and `y` must point to `x_len` and `y_len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_update(
    sketch: *mut SwammSketch,
    x: *const f64,
    x_len: usize,
    y: *const f64,
    y_len: usize,
    fast: bool,
) -> SwammStatus {
    guard(|| {
        let s = &mut handle_mut(sketch)?.0;
        let (x, y) = (slice(x, x_len)?, slice(y, y_len)?);
        check(if fast { s.fast_update(x, y) } else { s.update(x, y) })
    })
}

/// Number of items seen so far.
///
/// # Safety
/// `sketch` must be a live handle and `now` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_now(sketch: *const SwammSketch, now: *mut u64) -> SwammStatus {
    guard(|| {
        let s = &handle(sketch)?.0;
        if now.is_null() {
            return Err(fail(SwammStatus::NullPointer, "null output pointer"));
        }
        *now = s.now();
        Ok(())
    })
}

/// Number of columns a query returns right now.
///
/// # Safety
/// `sketch` must be a live handle and `cols` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_query_columns(sketch: *const SwammSketch, cols: *mut usize) -> SwammStatus {
    guard(|| write_count(cols, handle(sketch)?.0.query().columns()))
}

/// Write the query factors `A` (`d_x x cols`) and `B` (`d_y x cols`).
/// `cols` always receives the column count, also on `BufferTooSmall`.
///
/// # Safety
/// `a` and `b` must be writable for `a_len` and `b_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_query(
    sketch: *const SwammSketch,
    a: *mut f64,
    a_len: usize,
    b: *mut f64,
    b_len: usize,
    cols: *mut usize,
) -> SwammStatus {
    guard(|| {
        let q = handle(sketch)?.0.query();
        write_count(cols, q.columns())?;
        write_matrix(&q.a, a, a_len)?;
        write_matrix(&q.b, b, b_len)
    })
}

/// Write the `d_x x d_y` window product estimate.
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_product(sketch: *const SwammSketch, out: *mut f64, len: usize) -> SwammStatus {
    guard(|| write_matrix(&handle(sketch)?.0.query().product(), out, len))
}

/// Serialize into `out`. `written` receives the blob size; pass a null or
/// short buffer to learn it (the call then returns `BufferTooSmall`).
///
/// # Safety
/// `out` must be writable for `len` bytes and `written` for one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_save(
    sketch: *const SwammSketch,
    out: *mut u8,
    len: usize,
    written: *mut usize,
) -> SwammStatus {
    guard(|| write_bytes(&handle(sketch)?.0.to_bytes(), out, len, written))
}

/// Restore a sketch from a blob produced by [`swamm_sketch_save`].
///
/// # Safety
/// `data` must be readable for `len` bytes and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swamm_sketch_load(data: *const u8, len: usize, out: *mut *mut SwammSketch) -> SwammStatus {
    guard(|| {
        if data.is_null() && len > 0 {
            return Err(fail(SwammStatus::NullPointer, "null input buffer"));
        }
        let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
        let s = SlidingSketch::from_bytes(bytes).map_err(|e| fail(status_of(&e), e.to_string()))?;
        store(out, SwammSketch(s))
    })
}

/// Layered sketch for squared column norms in `[1, r_bound]`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swamm_layered_new(
    d_x: usize,
    d_y: usize,
    eps: f64,
    n_window: u64,
    r_bound: f64,
    out: *mut *mut SwammLayered,
) -> SwammStatus {
    guard(|| {
        let s = LayeredSketch::new(d_x, d_y, eps, n_window, r_bound)
            .map_err(|e| fail(status_of(&e), e.to_string()))?;
        store(out, SwammLayered(s))
    })
}

/// # Safety
/// `sketch` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swamm_layered_free(sketch: *mut SwammLayered) {
    if !sketch.is_null() {
        drop(Box::from_raw(sketch));
    }
}

/// # Safety
/// `x` and `y` must point to `x_len` and `y_len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn swamm_layered_update(
    sketch: *mut SwammLayered,
    x: *const f64,
    x_len: usize,
    y: *const f64,
    y_len: usize,
) -> SwammStatus {
    guard(|| {
        let s = &mut handle_mut(sketch)?.0;
        check(s.update(slice(x, x_len)?, slice(y, y_len)?))
    })
}

/// Query factors of the answering layer; `layer` receives its index and
/// `fallback` whether no layer covered the whole window.
///
/// # Safety
/// Output arrays must be writable for their lengths; scalar outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn swamm_layered_query(
    sketch: *const SwammLayered,
    a: *mut f64,
    a_len: usize,
    b: *mut f64,
    b_len: usize,
    cols: *mut usize,
    layer: *mut usize,
    fallback: *mut bool,
) -> SwammStatus {
    guard(|| {
        let q = handle(sketch)?.0.query();
        if !layer.is_null() {
            *layer = q.layer;
        }
        if !fallback.is_null() {
            *fallback = q.fallback;
        }
        write_count(cols, q.query.columns())?;
        write_matrix(&q.query.a, a, a_len)?;
        write_matrix(&q.query.b, b, b_len)
    })
}

/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swamm_layered_product(sketch: *const SwammLayered, out: *mut f64, len: usize) -> SwammStatus {
    guard(|| write_matrix(&handle(sketch)?.0.query().query.product(), out, len))
}

/// # Safety
/// `out` must be writable for `len` bytes and `written` for one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn swamm_layered_save(
    sketch: *const SwammLayered,
    out: *mut u8,
    len: usize,
    written: *mut usize,
) -> SwammStatus {
    guard(|| write_bytes(&handle(sketch)?.0.to_bytes(), out, len, written))
}

/// # Safety
/// `data` must be readable for `len` bytes and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swamm_layered_load(data: *const u8, len: usize, out: *mut *mut SwammLayered) -> SwammStatus {
    guard(|| {
        if data.is_null() && len > 0 {
            return Err(fail(SwammStatus::NullPointer, "null input buffer"));
        }
        let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
        let s = LayeredSketch::from_bytes(bytes).map_err(|e| fail(status_of(&e), e.to_string()))?;
        store(out, SwammLayered(s))
    })
}
