//! C ABI for quadrom.
//!
//! Objects are exposed as opaque handles created by `qr_*` constructors and
//! released with the matching `*_free` function. Every fallible call returns a
//! `QrStatus`; on failure the message is available from
//! `qr_last_error_message` on the same thread. Complex arrays are passed
//! interleaved as `re, im, re, im, ...`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use quadrom::acquisition::{self, NoiseSpec};
use quadrom::dataset::{HarmonicDataset, Provenance};
use quadrom::experiment::{self, LearnOptions, LoewnerConfig};
use quadrom::inference::SolverConfig;
use quadrom::loewner::Partition;
use quadrom::{io, Error, QuadraticSystem};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Singular = 4,
    Simulation = 5,
    Io = 6,
    Internal = 99,
}

/// Opaque quadratic system.
pub struct QrSystem(QuadraticSystem);

/// Opaque result of a learning run.
pub struct QrFit(experiment::LearnOutcome);

/// Options for `qr_fit_learn`; initialize with `qr_learn_options_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QrLearnOptions {
    /// Relative singular-value threshold for order selection.
    pub threshold: f64,
    /// Fixed reduced order; 0 selects the order from `threshold`.
    pub order: usize,
    /// 0 = interleaved, 1 = halves.
    pub partition: u32,
    pub tau: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Nonzero stops after the second-harmonic estimate.
    pub one_step: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QrStatus {
    match e {
        Error::Dimension(_) => QrStatus::Dimension,
        Error::SingularDescriptor
        | Error::SingularResolvent { .. }
        | Error::SingularE(_)
        | Error::ZeroPencil
        | Error::ZeroMatrix
        | Error::DegenerateLinearization => QrStatus::Singular,
        Error::UnstableSimulation(_) | Error::NonConvergedTransient { .. } => QrStatus::Simulation,
        Error::Io(_) | Error::Format { .. } | Error::Json(_) | Error::MissingArtifacts(_) => QrStatus::Io,
        Error::Acquisition { source, .. } => status_of(source),
        _ => QrStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (QrStatus, String)>) -> QrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QrStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (QrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QrStatus, String) {
    (QrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (QrStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn system_ref<'a>(sys: *const QrSystem) -> Result<&'a QuadraticSystem, (QrStatus, String)> {
    sys.as_ref().map(|s| &s.0).ok_or_else(|| null("system"))
}

unsafe fn fit_ref<'a>(fit: *const QrFit) -> Option<&'a experiment::LearnOutcome> {
    fit.as_ref().map(|f| &f.0)
}

unsafe fn path_arg(path: *const c_char) -> Result<&'static Path, (QrStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path).to_str().map_err(|e| (QrStatus::InvalidArgument, format!("path is not UTF-8: {e}")))?;
    Ok(Path::new(s))
}

unsafe fn put_system(out: *mut *mut QrSystem, sys: QuadraticSystem) -> Result<(), (QrStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(QrSystem(sys)));
    Ok(())
}

fn complex(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The two-state benchmark system.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn qr_system_toy(out: *mut *mut QrSystem) -> QrStatus {
    guard(|| put_system(out, acquisition::make_toy_system()))
}

/// Finite-difference Burgers system with `n` interior nodes.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn qr_system_burgers(
    n: usize,
    viscosity: f64,
    boundary_gain: f64,
    out: *mut *mut QrSystem,
) -> QrStatus {
    guard(|| put_system(out, acquisition::make_burgers_system(n, viscosity, boundary_gain).map_err(lib_err)?))
}

/// Real system from row-major arrays: `e`, `a` are `n x n`, `q` is `n x n²`,
/// `b` and `c` have `n` entries. A null `e` means the identity.
///
/// # Safety
/// Non-null pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn qr_system_new(
    n: usize,
    e: *const f64,
    a: *const f64,
    q: *const f64,
    b: *const f64,
    c: *const f64,
    out: *mut *mut QrSystem,
) -> QrStatus {
    guard(|| {
        if n == 0 {
            return Err((QrStatus::Dimension, "n must be positive".into()));
        }
        let e = if e.is_null() {
            nalgebra::DMatrix::identity(n, n)
        } else {
            nalgebra::DMatrix::from_row_slice(n, n, slice(e, n * n, "e")?)
        };
        let a = nalgebra::DMatrix::from_row_slice(n, n, slice(a, n * n, "a")?);
        let q = nalgebra::DMatrix::from_row_slice(n, n * n, slice(q, n * n * n, "q")?);
        let sys = QuadraticSystem::from_real(&e, &a, &q, slice(b, n, "b")?, slice(c, n, "c")?).map_err(lib_err)?;
        put_system(out, sys)
    })
}

/// Reads a system JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_system_read_json(path: *const c_char, out: *mut *mut QrSystem) -> QrStatus {
    guard(|| put_system(out, io::read_system(path_arg(path)?).map_err(lib_err)?))
}

/// Writes a system JSON file.
///
/// # Safety
/// `sys` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qr_system_write_json(sys: *const QrSystem, path: *const c_char) -> QrStatus {
    guard(|| io::write_system(path_arg(path)?, system_ref(sys)?).map_err(lib_err))
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qr_system_order(sys: *const QrSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.0.n())
}

/// Evaluates `H_m(s)` for `m` in 1..=3.
///
/// # Safety
/// `sys` must be a live handle; `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_system_eval_h(
    sys: *const QrSystem,
    m: u32,
    s_re: f64,
    s_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> QrStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output"));
        }
        let h = sys.eval_h(m as usize, Complex64::new(s_re, s_im)).map_err(lib_err)?;
        *out_re = h.re;
        *out_im = h.im;
        Ok(())
    })
}

/// Copies the real parts of the quadratic operator, row-major `n x n²`, into
/// `buf` of length `len`.
///
/// # Safety
/// `sys` must be a live handle and `buf` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn qr_system_q(sys: *const QrSystem, buf: *mut f64, len: usize) -> QrStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        let q = sys.q();
        if len != q.len() {
            return Err((QrStatus::Dimension, format!("buffer holds {len} values, Q has {}", q.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for i in 0..q.nrows() {
            for j in 0..q.ncols() {
                out[i * q.ncols() + j] = q[(i, j)].re;
            }
        }
        Ok(())
    })
}

/// Closed-form `H1, H2, H3` at `jω` for `n_points` frequencies. Each of
/// `h1`, `h2`, `h3` receives `2 * n_points` interleaved values.
///
/// # Safety
/// `omegas` must hold `n_points` values and each output `2 * n_points`.
#[no_mangle]
pub unsafe extern "C" fn qr_sample_direct(
    sys: *const QrSystem,
    omegas: *const f64,
    n_points: usize,
    h1: *mut f64,
    h2: *mut f64,
    h3: *mut f64,
) -> QrStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        let w = slice(omegas, n_points, "omegas")?;
        let ds = acquisition::sample_direct(sys, w, &[1, 2, 3]).map_err(lib_err)?;
        for (m, out) in [h1, h2, h3].into_iter().enumerate() {
            if out.is_null() {
                return Err(null("output"));
            }
            let out = std::slice::from_raw_parts_mut(out, 2 * n_points);
            for (k, z) in ds.level(m + 1).map_err(lib_err)?.iter().enumerate() {
                out[2 * k] = z.re;
                out[2 * k + 1] = z.im;
            }
        }
        Ok(())
    })
}

/// Adds seeded complex Gaussian noise at `snr_db` to one interleaved level in
/// place.
///
/// # Safety
/// `values` must hold `2 * n_points` writable values.
#[no_mangle]
pub unsafe extern "C" fn qr_add_noise(values: *mut f64, n_points: usize, snr_db: f64, seed: u64) -> QrStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let buf = std::slice::from_raw_parts_mut(values, 2 * n_points);
        let omegas: Vec<f64> = (1..=n_points).map(|k| k as f64).collect();
        let ds = HarmonicDataset::new(omegas, [Some(complex(buf)), None, None], Provenance::Direct).map_err(lib_err)?;
        let noisy = acquisition::add_noise(&ds, &NoiseSpec { snr_db, seed });
        for (k, z) in noisy.level(1).map_err(lib_err)?.iter().enumerate() {
            buf[2 * k] = z.re;
            buf[2 * k + 1] = z.im;
        }
        Ok(())
    })
}

/// Default learning options.
#[no_mangle]
pub extern "C" fn qr_learn_options_default() -> QrLearnOptions {
    let s = SolverConfig::default();
    QrLearnOptions { threshold: 1e-3, order: 0, partition: 0, tau: s.tau, epsilon: s.epsilon, max_iter: s.max_iter, one_step: 0 }
}

/// Learns a reduced quadratic model from interleaved `H1`, `H2`, `H3`
/// samples at `jω`. A fit that did not converge is still returned; query it
/// with `qr_fit_converged`.
///
/// # Safety
/// `omegas` must hold `n_points` values, each level `2 * n_points`;
/// `opts` may be null for defaults; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_fit_learn(
    omegas: *const f64,
    n_points: usize,
    h1: *const f64,
    h2: *const f64,
    h3: *const f64,
    opts: *const QrLearnOptions,
    out: *mut *mut QrFit,
) -> QrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let o = opts.as_ref().copied().unwrap_or_else(|| qr_learn_options_default());
        let w = slice(omegas, n_points, "omegas")?.to_vec();
        let levels = [
            Some(complex(slice(h1, 2 * n_points, "h1")?)),
            Some(complex(slice(h2, 2 * n_points, "h2")?)),
            (o.one_step == 0).then(|| slice(h3, 2 * n_points, "h3").map(complex)).transpose()?,
        ];
        let ds = HarmonicDataset::new(w, levels, Provenance::Direct).map_err(lib_err)?;
        let partition = match o.partition {
            0 => Partition::Interleaved,
            1 => Partition::Halves,
            p => return Err((QrStatus::InvalidArgument, format!("unknown partition {p}"))),
        };
        let options = LearnOptions {
            loewner: LoewnerConfig {
                threshold: Some(o.threshold),
                order: (o.order > 0).then_some(o.order),
                partition,
                ..Default::default()
            },
            solver: SolverConfig { tau: o.tau, epsilon: o.epsilon, max_iter: o.max_iter },
            one_step: o.one_step != 0,
        };
        let outcome = experiment::learn(&ds, &options, None).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(QrFit(outcome)));
        Ok(())
    })
}

/// Reduced order of the fit, or 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qr_fit_order(fit: *const QrFit) -> usize {
    fit_ref(fit).map_or(0, |f| f.order())
}

/// Completed iteration steps (0 in one-step mode).
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qr_fit_iterations(fit: *const QrFit) -> usize {
    fit_ref(fit).and_then(|f| f.fit.as_ref()).map_or(0, |r| r.iterations)
}

/// 1 when the iteration met its tolerance (always 1 in one-step mode).
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qr_fit_converged(fit: *const QrFit) -> i32 {
    fit_ref(fit).map_or(0, |f| f.converged() as i32)
}

/// Last deviation of the iteration, NaN when unavailable.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qr_fit_final_deviation(fit: *const QrFit) -> f64 {
    fit_ref(fit).and_then(|f| f.fit.as_ref()).map_or(f64::NAN, |r| r.final_deviation())
}

/// New system handle holding the learned model.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qr_fit_model(fit: *const QrFit, out: *mut *mut QrSystem) -> QrStatus {
    guard(|| {
        let f = fit_ref(fit).ok_or_else(|| null("fit"))?;
        put_system(out, f.model.clone())
    })
}

/// Releases a system handle. Null is ignored.
///
/// # Safety
/// `sys` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qr_system_free(sys: *mut QrSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Releases a fit handle. Null is ignored.
///
/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qr_fit_free(fit: *mut QrFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
