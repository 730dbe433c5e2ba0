//! C ABI over `proxyqas`.
//!
//! Every function returns a [`QpStatus`]; on failure the message is kept in a
//! thread-local slot readable through [`qp_last_error`]. Objects cross the
//! boundary as opaque handles that must be released with the matching
//! `_free` function. Strings returned to the caller are owned by the caller
//! and released with [`qp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DMatrix;
use proxyqas::circuit::CircuitStats;
use proxyqas::device::{hardware_fidelity, load_calibration};
use proxyqas::pipeline::emit_results;
use proxyqas::proxies::{concentration, gram_matrix, kta, GramMatrix, GramMode};
use proxyqas::{Circuit, DeviceModel, Error, SearchConfig};

/// Outcome of an API call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidCircuit = 4,
    Device = 5,
    Config = 6,
    Numerical = 7,
    Dataset = 8,
    Io = 9,
    Parse = 10,
    Panic = 11,
}

/// Opaque circuit handle.
pub struct QpCircuit(Circuit);

/// Opaque device handle.
pub struct QpDevice(DeviceModel);

/// Structural counts of a circuit.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QpCircuitStats {
    pub n_qubits: usize,
    pub depth: usize,
    pub gate_count: usize,
    pub cnot_count: usize,
    pub param_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> QpStatus {
    match err {
        Error::Bind { .. } | Error::InvalidCircuit(_) | Error::UnsupportedGate { .. } | Error::QubitOutOfRange { .. } => {
            QpStatus::InvalidCircuit
        }
        Error::Incompatible { .. } | Error::Calibration { .. } => QpStatus::Device,
        Error::Config(_) | Error::Sampler(_) | Error::Ranking(_) => QpStatus::Config,
        Error::DegenerateKernel(_) | Error::Svm(_) => QpStatus::Numerical,
        Error::Dataset(_) | Error::Csv { .. } => QpStatus::Dataset,
        Error::Stage { source, .. } => status_of(source),
        Error::Io(_) => QpStatus::Io,
        Error::Json(_) => QpStatus::Parse,
    }
}

struct Failure(QpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QpStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and the last-error
/// message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QpStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            QpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(QpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

unsafe fn square_gram(gram: *const f64, m: usize) -> Result<GramMatrix, Failure> {
    let values = slice_arg(gram, m * m, "gram")?;
    let matrix = DMatrix::from_row_slice(m, m, values);
    Ok(GramMatrix::from_matrix(matrix)?)
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next API call on the same thread.
#[no_mangle]
pub extern "C" fn qp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a circuit from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_circuit_from_json(json: *const c_char, out: *mut *mut QpCircuit) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let c = Circuit::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(QpCircuit(c)));
        Ok(())
    })
}

/// Serializes a circuit to JSON. Free the result with [`qp_string_free`].
///
/// # Safety
/// `circuit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_circuit_to_json(circuit: *const QpCircuit, out: *mut *mut c_char) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let c = ref_arg(circuit, "circuit")?;
        *out = owned_string(c.0.to_json()?);
        Ok(())
    })
}

/// # Safety
/// `circuit` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qp_circuit_free(circuit: *mut QpCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// # Safety
/// `circuit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_circuit_stats(circuit: *const QpCircuit, out: *mut QpCircuitStats) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = &ref_arg(circuit, "circuit")?.0;
        let CircuitStats { depth, gate_count, cnot_count, param_count } = c.stats();
        *out = QpCircuitStats { n_qubits: c.n_qubits(), depth, gate_count, cnot_count, param_count };
        Ok(())
    })
}

/// The bundled default device.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_device_default(out: *mut *mut QpDevice) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(QpDevice(DeviceModel::bundled_default())));
        Ok(())
    })
}

/// Loads a calibration file from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_device_load(path: *const c_char, out: *mut *mut QpDevice) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let d = load_calibration(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(QpDevice(d)));
        Ok(())
    })
}

/// Parses calibration JSON held in memory.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_device_from_json(json: *const c_char, out: *mut *mut QpDevice) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let d = DeviceModel::parse_calibration(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(QpDevice(d)));
        Ok(())
    })
}

/// # Safety
/// `device` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qp_device_free(device: *mut QpDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

/// Calibrated success probability of `circuit` on `device`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_hardware_fidelity(circuit: *const QpCircuit, device: *const QpDevice, out: *mut f64) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = ref_arg(circuit, "circuit")?;
        let d = ref_arg(device, "device")?;
        *out = hardware_fidelity(&c.0, &d.0)?;
        Ok(())
    })
}

/// Exact fidelity Gram matrix of `m` points with `d` features each (row
/// major). `out` receives `m * m` values, row major.
///
/// # Safety
/// `xs` holds `m * d` values, `theta` holds `n_theta`, `out` has room for
/// `m * m`.
#[no_mangle]
pub unsafe extern "C" fn qp_gram(
    circuit: *const QpCircuit,
    xs: *const f64,
    m: usize,
    d: usize,
    theta: *const f64,
    n_theta: usize,
    out: *mut f64,
) -> QpStatus {
    guard(|| {
        let c = ref_arg(circuit, "circuit")?;
        let m_sq = m.checked_mul(m).ok_or_else(|| Failure(QpStatus::InvalidArgument, "m is too large".into()))?;
        let m_d = m.checked_mul(d).ok_or_else(|| Failure(QpStatus::InvalidArgument, "m * d is too large".into()))?;
        let flat = slice_arg(xs, m_d, "xs")?;
        let theta = slice_arg(theta, n_theta, "theta")?;
        if m_sq > 0 && out.is_null() {
            return Err(null("out"));
        }
        let points: Vec<Vec<f64>> = if d == 0 { vec![Vec::new(); m] } else { flat.chunks(d).map(<[f64]>::to_vec).collect() };
        let gram = gram_matrix(&c.0, &points, theta, GramMode::Exact)?;
        let dst = if m_sq == 0 { &mut [][..] } else { std::slice::from_raw_parts_mut(out, m_sq) };
        for i in 0..m {
            for j in 0..m {
                dst[i * m + j] = gram.matrix()[(i, j)];
            }
        }
        Ok(())
    })
}

/// Kernel-target alignment of an `m × m` Gram matrix against ±1 labels.
///
/// # Safety
/// `gram` holds `m * m` values, `labels` holds `m`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_kta(gram: *const f64, m: usize, labels: *const f64, out: *mut f64) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let g = square_gram(gram, m)?;
        *out = kta(&g, slice_arg(labels, m, "labels")?)?;
        Ok(())
    })
}

/// Frobenius distance of an `m × m` Gram matrix from the all-ones matrix.
///
/// # Safety
/// `gram` holds `m * m` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_concentration(gram: *const f64, m: usize, out: *mut f64) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = concentration(&square_gram(gram, m)?);
        Ok(())
    })
}

/// Runs a full search from TOML config text and returns the run report as
/// JSON. When `out_dir` is not NULL the result files are also written there.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string, `out_dir` one or NULL, and
/// `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn qp_run_search(config_toml: *const c_char, out_dir: *const c_char, report_json: *mut *mut c_char) -> QpStatus {
    guard(|| {
        let report_json = out_arg(report_json, "report_json")?;
        *report_json = ptr::null_mut();
        let cfg = SearchConfig::from_toml(str_arg(config_toml, "config_toml")?)?;
        let outcome = proxyqas::run_search(&cfg)?;
        if !out_dir.is_null() {
            emit_results(&outcome, str_arg(out_dir, "out_dir")?)?;
        }
        *report_json = owned_string(outcome.report.to_json()?);
        Ok(())
    })
}
