//! C ABI over the assortment solver.
//!
//! Instances and reports are opaque heap handles owned by the caller and
//! released with their `*_free` function. Every fallible call returns an
//! [`AsmStatus`]; on failure, [`asm_last_error_message`] describes the error
//! for the calling thread. Strings returned by the library are freed with
//! [`asm_string_free`].
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_int, c_void};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use assortment::greedy::{greedy_opt, GreedyConfig, SolveReport};
use assortment::io::{generate_instance, parse_instance, GeneratorSpec, InstanceFile};
use assortment::report::{self, RunReport, SolveOptions};
use assortment::{
    brute_force_opt, mnl_revenue, Assortment, Error, ExactOracle, Instance, NoiseSpec, ProductId,
    RevenueOracle,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Schema = 3,
    Validation = 4,
    Config = 5,
    Oracle = 6,
    Assertion = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

impl From<&Error> for AsmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Schema(_) => AsmStatus::Schema,
            Error::Config(_) | Error::Noise(_) | Error::Range(_) | Error::EnumerationCap { .. } => {
                AsmStatus::Config
            }
            Error::Oracle(_) => AsmStatus::Oracle,
            Error::Assertion(_) => AsmStatus::Assertion,
            Error::Io { .. } => AsmStatus::Io,
            _ => AsmStatus::Validation,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsmNoiseMode {
    None = 0,
    Fixed = 1,
    SeededUniform = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsmSolveOptions {
    pub seed_size: usize,
    pub capacity: usize,
    pub exchange_budget: u32,
    pub noise_mode: AsmNoiseMode,
    /// ε for fixed noise, ε_max for seeded-uniform noise.
    pub eps: f64,
    pub noise_seed: u64,
    pub trace: bool,
    /// Brute-force the optimum and include gap and bounds in the report.
    pub exact: bool,
}

/// Revenue callback: writes the revenue of the `len` product ids at `ids`
/// (ascending) to `out_revenue` and returns 0, or returns nonzero on failure.
/// Calls are serialized; the callback is never entered concurrently.
pub type AsmRevenueFn =
    Option<unsafe extern "C" fn(ctx: *mut c_void, ids: *const u32, len: usize, out_revenue: *mut f64) -> c_int>;

/// Opaque product universe.
pub struct AsmInstance {
    instance: Instance,
    file: InstanceFile,
}

enum ReportKind {
    Run(Box<RunReport>),
    Plain(SolveReport),
}

/// Opaque solver output.
pub struct AsmReport {
    kind: ReportKind,
}

impl AsmReport {
    fn solve_report(&self) -> &SolveReport {
        match &self.kind {
            ReportKind::Run(r) => &r.result,
            ReportKind::Plain(r) => r,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: AsmStatus, msg: impl Into<String>) -> AsmStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> AsmStatus {
    let status = AsmStatus::from(&e);
    fail(status, format!("{}: {e}", e.code()))
}

fn guard(f: impl FnOnce() -> AsmStatus) -> AsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(AsmStatus::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn asm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn asm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Parses an instance document (NUL-terminated UTF-8 JSON).
#[no_mangle]
pub unsafe extern "C" fn asm_instance_from_json(json: *const c_char, out: *mut *mut AsmInstance) -> AsmStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(AsmStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(AsmStatus::InvalidUtf8, "instance JSON is not UTF-8");
        };
        match parse_instance(text.as_bytes()) {
            Ok((instance, file)) => {
                *out = Box::into_raw(Box::new(AsmInstance { instance, file }));
                AsmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Generates an instance with the default weight and price ranges.
/// `capacity == 0` stores no capacity.
#[no_mangle]
pub unsafe extern "C" fn asm_instance_generate(
    n: usize,
    seed: u64,
    capacity: usize,
    out: *mut *mut AsmInstance,
) -> AsmStatus {
    guard(|| {
        if out.is_null() {
            return fail(AsmStatus::NullPointer, "null argument");
        }
        let mut spec = GeneratorSpec::new(n, seed);
        if capacity > 0 {
            spec = spec.with_capacity(capacity);
        }
        match generate_instance(&spec) {
            Ok(instance) => {
                let file = InstanceFile::from_instance(&instance, spec.metadata());
                *out = Box::into_raw(Box::new(AsmInstance { instance, file }));
                AsmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn asm_instance_free(instance: *mut AsmInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of products, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn asm_instance_len(instance: *const AsmInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.instance.len())
}

/// Canonical JSON for the instance; free with `asm_string_free`.
#[no_mangle]
pub unsafe extern "C" fn asm_instance_to_json(instance: *const AsmInstance) -> *mut c_char {
    match instance.as_ref() {
        Some(i) => into_c_string(i.file.to_json()),
        None => ptr::null_mut(),
    }
}

unsafe fn read_assortment(ids: *const u32, len: usize) -> Result<Assortment, AsmStatus> {
    if len == 0 {
        return Ok(Assortment::empty());
    }
    if ids.is_null() {
        return Err(fail(AsmStatus::NullPointer, "null id array"));
    }
    let slice = std::slice::from_raw_parts(ids, len);
    Assortment::from_ids(slice.iter().copied()).map_err(from_error)
}

/// Exact MNL revenue of the `len` ids at `ids`.
#[no_mangle]
pub unsafe extern "C" fn asm_mnl_revenue(
    instance: *const AsmInstance,
    ids: *const u32,
    len: usize,
    out_revenue: *mut f64,
) -> AsmStatus {
    guard(|| {
        let (Some(inst), false) = (instance.as_ref(), out_revenue.is_null()) else {
            return fail(AsmStatus::NullPointer, "null argument");
        };
        let m = match read_assortment(ids, len) {
            Ok(m) => m,
            Err(s) => return s,
        };
        match mnl_revenue(&inst.instance, &m) {
            Ok(r) => {
                *out_revenue = r;
                AsmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

fn noise_spec(opts: &AsmSolveOptions) -> NoiseSpec {
    match opts.noise_mode {
        AsmNoiseMode::None => NoiseSpec::none(),
        AsmNoiseMode::Fixed => NoiseSpec::fixed(opts.eps),
        AsmNoiseMode::SeededUniform => NoiseSpec::seeded_uniform(opts.eps, opts.noise_seed),
    }
}

/// Runs the greedy optimizer with the built-in MNL oracle (optionally noisy)
/// and produces a full run report.
#[no_mangle]
pub unsafe extern "C" fn asm_solve(
    instance: *const AsmInstance,
    options: *const AsmSolveOptions,
    out: *mut *mut AsmReport,
) -> AsmStatus {
    guard(|| {
        let (Some(inst), Some(opts), false) = (instance.as_ref(), options.as_ref(), out.is_null()) else {
            return fail(AsmStatus::NullPointer, "null argument");
        };
        let config = GreedyConfig::new(opts.seed_size, opts.capacity, opts.exchange_budget);
        let solve_opts = SolveOptions {
            trace: opts.trace,
            exact: opts.exact,
        };
        match report::solve(&inst.file, config, noise_spec(opts), solve_opts) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(AsmReport {
                    kind: ReportKind::Run(Box::new(r)),
                }));
                AsmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

struct CallbackOracle {
    callback: unsafe extern "C" fn(*mut c_void, *const u32, usize, *mut f64) -> c_int,
    ctx: *mut c_void,
}

// Only ever driven from a single-threaded pool; see `asm_solve_with_oracle`.
unsafe impl Send for CallbackOracle {}
unsafe impl Sync for CallbackOracle {}

impl RevenueOracle for CallbackOracle {
    fn evaluate(&self, m: &Assortment) -> assortment::Result<f64> {
        let mut out = f64::NAN;
        let ids = m.ids();
        let rc = unsafe { (self.callback)(self.ctx, ids.as_ptr(), ids.len(), &mut out) };
        if rc != 0 {
            return Err(Error::Oracle(format!("callback returned {rc} for {m}")));
        }
        if !out.is_finite() {
            return Err(Error::Oracle(format!("callback produced non-finite revenue for {m}")));
        }
        Ok(out)
    }
}

/// Runs the greedy optimizer over products `1..=universe_size` against a
/// caller-supplied revenue function.
#[no_mangle]
pub unsafe extern "C" fn asm_solve_with_oracle(
    universe_size: usize,
    seed_size: usize,
    capacity: usize,
    exchange_budget: u32,
    callback: AsmRevenueFn,
    ctx: *mut c_void,
    out: *mut *mut AsmReport,
) -> AsmStatus {
    guard(|| {
        let (Some(callback), false) = (callback, out.is_null()) else {
            return fail(AsmStatus::NullPointer, "null argument");
        };
        let oracle = CallbackOracle { callback, ctx };
        let universe: Vec<ProductId> = (1..=universe_size as ProductId).collect();
        let config = GreedyConfig::new(seed_size, capacity, exchange_budget);
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
            Ok(p) => p,
            Err(e) => return fail(AsmStatus::Config, e.to_string()),
        };
        match pool.install(|| greedy_opt(&config, &universe, &oracle, false)) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(AsmReport {
                    kind: ReportKind::Plain(r),
                }));
                AsmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Oracle revenue of the best assortment, or NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn asm_report_revenue(report: *const AsmReport) -> f64 {
    report
        .as_ref()
        .map_or(f64::NAN, |r| r.solve_report().best_oracle_revenue)
}

#[no_mangle]
pub unsafe extern "C" fn asm_report_oracle_calls(report: *const AsmReport) -> u64 {
    report.as_ref().map_or(0, |r| r.solve_report().oracle_calls)
}

/// 1 if the report's checks all passed, 0 if not, -1 for NULL. Reports from
/// `asm_solve_with_oracle` carry no checks and always return 1.
#[no_mangle]
pub unsafe extern "C" fn asm_report_passed(report: *const AsmReport) -> c_int {
    match report.as_ref().map(|r| &r.kind) {
        None => -1,
        Some(ReportKind::Run(r)) => c_int::from(r.failures.is_empty()),
        Some(ReportKind::Plain(_)) => 1,
    }
}

/// Copies the best assortment's ids into `out_ids`. `*out_len` always
/// receives the assortment size; if it exceeds `capacity`, nothing is copied
/// and `BufferTooSmall` is returned.
#[no_mangle]
pub unsafe extern "C" fn asm_report_assortment(
    report: *const AsmReport,
    out_ids: *mut u32,
    capacity: usize,
    out_len: *mut usize,
) -> AsmStatus {
    guard(|| {
        let (Some(r), false) = (report.as_ref(), out_len.is_null()) else {
            return fail(AsmStatus::NullPointer, "null argument");
        };
        copy_ids(r.solve_report().best_assortment.ids(), out_ids, capacity, out_len)
    })
}

unsafe fn copy_ids(ids: &[u32], out_ids: *mut u32, capacity: usize, out_len: *mut usize) -> AsmStatus {
    *out_len = ids.len();
    if ids.len() > capacity {
        return fail(
            AsmStatus::BufferTooSmall,
            format!("need room for {} ids, got {capacity}", ids.len()),
        );
    }
    if !ids.is_empty() {
        if out_ids.is_null() {
            return fail(AsmStatus::NullPointer, "null output buffer");
        }
        ptr::copy_nonoverlapping(ids.as_ptr(), out_ids, ids.len());
    }
    AsmStatus::Ok
}

/// Report as JSON (the CLI's run-report schema for `asm_solve` results);
/// free with `asm_string_free`.
#[no_mangle]
pub unsafe extern "C" fn asm_report_to_json(report: *const AsmReport) -> *mut c_char {
    match report.as_ref().map(|r| &r.kind) {
        Some(ReportKind::Run(r)) => into_c_string(r.to_json()),
        Some(ReportKind::Plain(r)) => serde_json::to_string(r).map_or(ptr::null_mut(), into_c_string),
        None => ptr::null_mut(),
    }
}

#[no_mangle]
pub unsafe extern "C" fn asm_report_free(report: *mut AsmReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Exact optimum over assortments of size at most `capacity`, by enumeration.
#[no_mangle]
pub unsafe extern "C" fn asm_exact(
    instance: *const AsmInstance,
    capacity: usize,
    out_revenue: *mut f64,
    out_ids: *mut u32,
    ids_capacity: usize,
    out_len: *mut usize,
) -> AsmStatus {
    guard(|| {
        let (Some(inst), false, false) = (instance.as_ref(), out_revenue.is_null(), out_len.is_null()) else {
            return fail(AsmStatus::NullPointer, "null argument");
        };
        let ids = inst.instance.ids();
        match brute_force_opt(&ExactOracle::new(&inst.instance), &ids, capacity) {
            Ok(sol) => {
                *out_revenue = sol.revenue;
                copy_ids(sol.assortment.ids(), out_ids, ids_capacity, out_len)
            }
            Err(e) => from_error(e),
        }
    })
}
