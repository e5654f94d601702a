//! C ABI over the lineopt library.
//!
//! Objects are opaque handles created by `*_new`/`*_load`/`lineopt_reduce`
//! and released with the matching `*_free`. Every fallible call returns a
//! [`LineoptStatus`]; on failure `lineopt_last_error` describes the error
//! for the calling thread until its next failing call.
//!
//! Configurations cross the boundary as 12 bytes `s1, r1, ..., s6, r6`
//! (1-based shift and rate ids, shops body1, body2, paint1, paint2, asm1,
//! asm2). Bitstrings are arrays of 0/1 bytes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use lineopt::catalog::{default_catalog, load_catalog, ProblemCatalog, STAGES};
use lineopt::encoding::{BitString, Codec, SchemeKind, TripleCodec};
use lineopt::evaluator::SimEvaluator;
use lineopt::freestage::{reduce_space, DevMode, PgKey, ReducedSpace};
use lineopt::simulator::{cost, simulate, LineConfig};
use lineopt::solvers::{run_solver, RunOptions, SolverKind};
use lineopt::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InfeasibleMargin = 5,
    InvalidState = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineoptScheme {
    Basic = 0,
    Gray = 1,
    Pggray = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineoptSolver {
    Ga1 = 0,
    Ga2 = 1,
    Gau = 2,
    Sa = 3,
    Pt = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LineoptCost {
    pub total: f64,
    pub production_term: f64,
    pub idle_term: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LineoptSimulation {
    pub monthly_production: [u64; 12],
    pub annual_production: u64,
    pub total_idle_hours: f64,
    pub final_buffers: [u32; 2],
    pub cost: LineoptCost,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LineoptSolveResult {
    pub best_cost: f64,
    pub best_triple: [u32; 3],
    pub best_config: [u8; 12],
    pub evaluations: usize,
}

/// Opaque problem catalog.
pub struct LineoptCatalog(ProblemCatalog);

/// Opaque reduced 3-body search space.
pub struct LineoptSpace(Arc<ReducedSpace>);

/// Opaque encoding of a reduced space.
pub struct LineoptCodec(TripleCodec);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> LineoptStatus {
    match err {
        Error::Io { .. } => LineoptStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => LineoptStatus::Parse,
        Error::InfeasibleMargin { .. } => LineoptStatus::InfeasibleMargin,
        Error::InvalidState => LineoptStatus::InvalidState,
        Error::Validation(_) | Error::Config(_) | Error::OverCap { .. } => LineoptStatus::InvalidArgument,
        Error::Mps(_) => LineoptStatus::Internal,
    }
}

struct Failure(LineoptStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: LineoptStatus, message: &str) -> Result<T, Failure> {
    Err(Failure(status, message.to_string()))
}

/// Runs `f`, turning errors and panics into a status and the thread's last
/// error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LineoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LineoptStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LineoptStatus::Internal
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    // SAFETY: callers pass either null or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or(Failure(LineoptStatus::NullPointer, "null pointer argument".into()))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or(Failure(LineoptStatus::NullPointer, "null output pointer".into()))
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return fail(LineoptStatus::NullPointer, "null array argument");
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn read_config(catalog: &ProblemCatalog, p: *const u8) -> Result<LineConfig, Failure> {
    let bytes: [u8; 12] = unsafe { slice(p, 12) }?.try_into().expect("12 bytes");
    let config = LineConfig::from_twelve(bytes);
    config.validate(catalog)?;
    Ok(config)
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the calling thread's last failure, or null if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lineopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// The built-in default catalog.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lineopt_catalog_default(out: *mut *mut LineoptCatalog) -> LineoptStatus {
    guard(|| {
        *unsafe { out_ref(out) }? = boxed(LineoptCatalog(default_catalog()));
        Ok(())
    })
}

/// Loads a catalog file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lineopt_catalog_load(path: *const c_char, out: *mut *mut LineoptCatalog) -> LineoptStatus {
    guard(|| {
        let out = unsafe { out_ref(out) }?;
        if path.is_null() {
            return fail(LineoptStatus::NullPointer, "null path");
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| Failure(LineoptStatus::InvalidArgument, "path is not UTF-8".into()))?;
        *out = boxed(LineoptCatalog(load_catalog(path)?));
        Ok(())
    })
}

/// # Safety
/// `catalog` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lineopt_catalog_free(catalog: *mut LineoptCatalog) {
    if !catalog.is_null() {
        drop(unsafe { Box::from_raw(catalog) });
    }
}

/// Simulates a configuration and returns its cost.
///
/// # Safety
/// `config` must point to 12 bytes; handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lineopt_evaluate(
    catalog: *const LineoptCatalog,
    config: *const u8,
    out: *mut LineoptCost,
) -> LineoptStatus {
    guard(|| {
        let LineoptCatalog(cat) = unsafe { as_ref(catalog) }?;
        let config = unsafe { read_config(cat, config) }?;
        let c = cost(&simulate(cat, &config), cat);
        *unsafe { out_ref(out) }? = LineoptCost {
            total: c.total,
            production_term: c.production_term,
            idle_term: c.idle_term,
        };
        Ok(())
    })
}

/// Simulates a configuration and returns production, idle time and cost.
///
/// # Safety
/// As for [`lineopt_evaluate`].
#[no_mangle]
pub unsafe extern "C" fn lineopt_simulate(
    catalog: *const LineoptCatalog,
    config: *const u8,
    out: *mut LineoptSimulation,
) -> LineoptStatus {
    guard(|| {
        let LineoptCatalog(cat) = unsafe { as_ref(catalog) }?;
        let config = unsafe { read_config(cat, config) }?;
        let r = simulate(cat, &config);
        let c = cost(&r, cat);
        *unsafe { out_ref(out) }? = LineoptSimulation {
            monthly_production: r.monthly_production,
            annual_production: r.annual_production(),
            total_idle_hours: r.total_idle_hours(),
            final_buffers: r.final_buffers,
            cost: LineoptCost {
                total: c.total,
                production_term: c.production_term,
                idle_term: c.idle_term,
            },
        };
        Ok(())
    })
}

/// Reduced 3-body space for a margin (1.0 or more keeps every state).
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lineopt_reduce(
    catalog: *const LineoptCatalog,
    margin: f64,
    free_rates: bool,
    out: *mut *mut LineoptSpace,
) -> LineoptStatus {
    guard(|| {
        let LineoptCatalog(cat) = unsafe { as_ref(catalog) }?;
        let out = unsafe { out_ref(out) }?;
        let dev = if free_rates { DevMode::Yes } else { DevMode::No };
        *out = boxed(LineoptSpace(Arc::new(reduce_space(cat, margin, dev)?)));
        Ok(())
    })
}

/// # Safety
/// `space` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lineopt_space_free(space: *mut LineoptSpace) {
    if !space.is_null() {
        drop(unsafe { Box::from_raw(space) });
    }
}

/// Number of allowed states of each stage.
///
/// # Safety
/// `space` must be valid and `sizes` point to 3 writable values.
#[no_mangle]
pub unsafe extern "C" fn lineopt_space_stage_sizes(space: *const LineoptSpace, sizes: *mut u64) -> LineoptStatus {
    guard(|| {
        let LineoptSpace(s) = unsafe { as_ref(space) }?;
        if sizes.is_null() {
            return fail(LineoptStatus::NullPointer, "null sizes");
        }
        for (k, n) in s.stage_sizes().iter().enumerate() {
            // SAFETY: caller provides 3 slots.
            unsafe { *sizes.add(k) = *n as u64 };
        }
        Ok(())
    })
}

/// Configuration addressed by a triple of stage positions.
///
/// # Safety
/// `triple` must point to 3 values and `config` to 12 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lineopt_space_config(
    space: *const LineoptSpace,
    triple: *const u32,
    config: *mut u8,
) -> LineoptStatus {
    guard(|| {
        let LineoptSpace(s) = unsafe { as_ref(space) }?;
        let t: [u32; STAGES] = unsafe { slice(triple, STAGES) }?.try_into().expect("3 values");
        if t.iter().zip(s.stage_sizes()).any(|(&i, n)| i as usize >= n) {
            return fail(LineoptStatus::InvalidState, "triple outside the space");
        }
        if config.is_null() {
            return fail(LineoptStatus::NullPointer, "null config");
        }
        let bytes = s.config(t).to_twelve();
        // SAFETY: caller provides 12 writable bytes.
        unsafe { ptr::copy_nonoverlapping(bytes.as_ptr(), config, 12) };
        Ok(())
    })
}

/// Encoding of a space. `chained` keys stage 3 to the chosen stage-2
/// estimate instead of stage 1 (PGGray only).
///
/// # Safety
/// `space` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lineopt_codec_new(
    space: *const LineoptSpace,
    scheme: LineoptScheme,
    chained: bool,
    out: *mut *mut LineoptCodec,
) -> LineoptStatus {
    guard(|| {
        let LineoptSpace(s) = unsafe { as_ref(space) }?;
        let out = unsafe { out_ref(out) }?;
        let kind = match scheme {
            LineoptScheme::Basic => SchemeKind::Basic,
            LineoptScheme::Gray => SchemeKind::Gray,
            LineoptScheme::Pggray => SchemeKind::Pggray,
        };
        let key = if chained { PgKey::Chained } else { PgKey::FirstStage };
        *out = boxed(LineoptCodec(TripleCodec::new(s.clone(), kind, key)));
        Ok(())
    })
}

/// # Safety
/// `codec` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lineopt_codec_free(codec: *mut LineoptCodec) {
    if !codec.is_null() {
        drop(unsafe { Box::from_raw(codec) });
    }
}

/// Bits per encoded state, or 0 for a null handle.
///
/// # Safety
/// `codec` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn lineopt_codec_n_bits(codec: *const LineoptCodec) -> usize {
    unsafe { codec.as_ref() }.map_or(0, |c| c.0.n_bits())
}

/// Writes the code of `triple` into `bits` (`len` bytes, at least n_bits).
///
/// # Safety
/// `triple` must point to 3 values and `bits` to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lineopt_encode(
    codec: *const LineoptCodec,
    triple: *const u32,
    bits: *mut u8,
    len: usize,
) -> LineoptStatus {
    guard(|| {
        let LineoptCodec(c) = unsafe { as_ref(codec) }?;
        let t = unsafe { slice(triple, STAGES) }?;
        let code = c.try_encode(t)?;
        if len < code.len() {
            return fail(LineoptStatus::BufferTooSmall, "bit buffer shorter than n_bits");
        }
        if bits.is_null() {
            return fail(LineoptStatus::NullPointer, "null bit buffer");
        }
        // SAFETY: checked length above.
        unsafe { ptr::copy_nonoverlapping(code.bits().as_ptr(), bits, code.len()) };
        Ok(())
    })
}

/// Decodes `len` bits into a triple; fails with `InvalidState` for codes
/// outside the space.
///
/// # Safety
/// `bits` must point to `len` bytes and `triple` to 3 writable values.
#[no_mangle]
pub unsafe extern "C" fn lineopt_decode(
    codec: *const LineoptCodec,
    bits: *const u8,
    len: usize,
    triple: *mut u32,
) -> LineoptStatus {
    guard(|| {
        let LineoptCodec(c) = unsafe { as_ref(codec) }?;
        let raw = unsafe { slice(bits, len) }?;
        if raw.iter().any(|&b| b > 1) {
            return fail(LineoptStatus::InvalidArgument, "bits must be 0 or 1");
        }
        let point = c.decode(&BitString::from_bits(raw.to_vec()))?;
        if triple.is_null() {
            return fail(LineoptStatus::NullPointer, "null triple");
        }
        // SAFETY: caller provides 3 writable values.
        unsafe { ptr::copy_nonoverlapping(point.as_ptr(), triple, STAGES) };
        Ok(())
    })
}

/// Runs one conventional solver on a reduced space.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lineopt_solve(
    catalog: *const LineoptCatalog,
    space: *const LineoptSpace,
    solver: LineoptSolver,
    budget: usize,
    seed: u64,
    out: *mut LineoptSolveResult,
) -> LineoptStatus {
    guard(|| {
        let LineoptCatalog(cat) = unsafe { as_ref(catalog) }?;
        let LineoptSpace(s) = unsafe { as_ref(space) }?;
        let out = unsafe { out_ref(out) }?;
        let kind = SolverKind::ALL[solver as usize];
        let trace = run_solver(kind, &**s, RunOptions::new(budget, seed), &SimEvaluator::new(cat))?;
        let best = trace
            .best()
            .ok_or(Failure(LineoptStatus::Internal, "no evaluations".into()))?;
        *out = LineoptSolveResult {
            best_cost: best.cost,
            best_triple: [best.point[0], best.point[1], best.point[2]],
            best_config: best.config.to_twelve(),
            evaluations: trace.len(),
        };
        Ok(())
    })
}
