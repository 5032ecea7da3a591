//! C interface to the atomic-mimo detectors.
//!
//! Problems and scenarios are opaque handles created by `*_new` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`AmimoStatus`]; on failure [`amimo_last_error_message`] describes the
//! error for the calling thread.
//!
//! Complex arrays are interleaved `re, im` doubles. The channel `A` is
//! `K x N`, stored row by row (user `k`, antenna `n` at `2 (k N + n)`).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use atomic_mimo::constellation::Constellation;
use atomic_mimo::crlb;
use atomic_mimo::detect::{
    biased_gs, em_gs, exhaustive_search, zf_known_phase, DetectionResult, DetectorConfig, SearchCriterion,
};
use atomic_mimo::instance::{Instance, Problem};
use atomic_mimo::model::CVector;
use atomic_mimo::scenario::{generate_trial, Scenario, ScenarioConfig};
use atomic_mimo::special;
use atomic_mimo::Error;
use num_complex::Complex64;

/// Result codes. `AMIMO_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmimoStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Dimension = 3,
    Singular = 4,
    Config = 5,
    Budget = 6,
    Numerical = 7,
    Parse = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmimoDetector {
    BiasedGs = 0,
    EmGs = 1,
    ZfKnown = 2,
    ExhaustiveLs = 3,
    ExhaustiveMl = 4,
}

/// Magnitude observation with its channel, reference and optional extras.
pub struct AmimoProblem {
    inner: Problem,
}

/// One random trial drawn by the simulator.
pub struct AmimoScenario {
    inner: Scenario,
    order: usize,
}

enum Fail {
    Null(&'static str),
    Core(Error),
    Panic,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status(f: impl FnOnce() -> Result<(), Fail>) -> AmimoStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or(Err(Fail::Panic));
    let (code, msg) = match outcome {
        Ok(()) => return AmimoStatus::Ok,
        Err(Fail::Null(what)) => (AmimoStatus::NullPointer, format!("null pointer: {what}")),
        Err(Fail::Panic) => (AmimoStatus::Panic, "internal panic".to_string()),
        Err(Fail::Core(e)) => {
            let code = match e {
                Error::Domain(_) => AmimoStatus::Domain,
                Error::Dimension(_) => AmimoStatus::Dimension,
                Error::Singular { .. } => AmimoStatus::Singular,
                Error::Config(_) | Error::Io(_) => AmimoStatus::Config,
                Error::Budget { .. } => AmimoStatus::Budget,
                Error::Numerical(_) => AmimoStatus::Numerical,
                Error::Parse(_) => AmimoStatus::Parse,
            };
            (code, e.to_string())
        }
    };
    set_error(msg);
    code
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

fn pairs(v: &[f64]) -> Vec<[f64; 2]> {
    v.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

fn complex(v: &[f64]) -> CVector {
    CVector::from_iterator(v.len() / 2, v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])))
}

fn write_complex(v: &CVector, out: &mut [f64]) {
    for (i, x) in v.iter().enumerate() {
        out[2 * i] = x.re;
        out[2 * i + 1] = x.im;
    }
}

fn store<T>(value: T, out: *mut *mut T) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; never free it.
#[no_mangle]
pub extern "C" fn amimo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a problem from raw arrays. `sigma2 <= 0` or NaN means unknown;
/// `order` may be 0 for the default 16-QAM.
///
/// # Safety
/// `a` must hold `2 K N` doubles, `b` `2 N` and `z` `N`; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn amimo_problem_new(
    users: usize,
    antennas: usize,
    a: *const f64,
    b: *const f64,
    z: *const f64,
    sigma2: f64,
    order: usize,
    out: *mut *mut AmimoProblem,
) -> AmimoStatus {
    status(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let a = slice(a, 2 * users * antennas, "a")?;
        let inst = Instance {
            a: a.chunks_exact(2 * antennas.max(1)).map(pairs).collect(),
            b: pairs(slice(b, 2 * antennas, "b")?),
            z: slice(z, antennas, "z")?.to_vec(),
            sigma2: (sigma2 > 0.0).then_some(sigma2),
            order: (order > 0).then_some(order),
            s_true: None,
            y: None,
        };
        store(AmimoProblem { inner: inst.problem()? }, out);
        Ok(())
    })
}

/// Attaches the complex field `y` (`2 N` doubles) needed by the
/// known-phase baseline.
///
/// # Safety
/// `problem` must come from this library; `y` must hold `2 N` doubles.
#[no_mangle]
pub unsafe extern "C" fn amimo_problem_set_field(problem: *mut AmimoProblem, y: *const f64) -> AmimoStatus {
    status(|| {
        let p = problem.as_mut().ok_or(Fail::Null("problem"))?;
        let n = p.inner.channel.antennas();
        p.inner.y = Some(complex(slice(y, 2 * n, "y")?));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn amimo_problem_free(problem: *mut AmimoProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; `users` and `antennas` may be null.
#[no_mangle]
pub unsafe extern "C" fn amimo_problem_dims(
    problem: *const AmimoProblem,
    users: *mut usize,
    antennas: *mut usize,
) -> AmimoStatus {
    status(|| {
        let p = handle(problem, "problem")?;
        if let Some(u) = users.as_mut() {
            *u = p.inner.channel.users();
        }
        if let Some(n) = antennas.as_mut() {
            *n = p.inner.channel.antennas();
        }
        Ok(())
    })
}

/// Draws trial `trial` of the normalised-channel simulator.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amimo_scenario_new(
    antennas: usize,
    users: usize,
    order: usize,
    snr_db: f64,
    rsr_db: f64,
    seed: u64,
    trial: u64,
    out: *mut *mut AmimoScenario,
) -> AmimoStatus {
    status(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let cfg = ScenarioConfig::new(antennas, users, order, snr_db, rsr_db, seed);
        cfg.validate()?;
        store(
            AmimoScenario {
                inner: generate_trial(&cfg, trial)?,
                order,
            },
            out,
        );
        Ok(())
    })
}

/// Problem view of a scenario, including noise variance, true symbols and
/// the complex field.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amimo_scenario_problem(
    scenario: *const AmimoScenario,
    out: *mut *mut AmimoProblem,
) -> AmimoStatus {
    status(|| {
        let s = handle(scenario, "scenario")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let inner = Instance::from_scenario(&s.inner, s.order).problem()?;
        store(AmimoProblem { inner }, out);
        Ok(())
    })
}

/// Copies the transmitted symbols (`2 K` doubles) and, if `sigma2` is not
/// null, the noise variance.
///
/// # Safety
/// `scenario` must be a live handle; `symbols` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn amimo_scenario_truth(
    scenario: *const AmimoScenario,
    symbols: *mut f64,
    len: usize,
    sigma2: *mut f64,
) -> AmimoStatus {
    status(|| {
        let s = handle(scenario, "scenario")?;
        let k = s.inner.s_true.len();
        if len < 2 * k {
            return Err(Error::Dimension(format!("symbol buffer holds {len} doubles, need {}", 2 * k)).into());
        }
        write_complex(&s.inner.s_true, slice_mut(symbols, 2 * k, "symbols")?);
        if let Some(v) = sigma2.as_mut() {
            *v = s.inner.sigma2;
        }
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn amimo_scenario_free(scenario: *mut AmimoScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs one detector. `s_soft` receives `2 K` doubles, `indices` `K`
/// constellation indices; `iterations` may be null. `t0 = 0` uses the
/// default iteration count.
///
/// # Safety
/// `problem` must be a live handle and the output buffers large enough.
#[no_mangle]
pub unsafe extern "C" fn amimo_detect(
    problem: *const AmimoProblem,
    detector: AmimoDetector,
    t0: usize,
    s_soft: *mut f64,
    indices: *mut usize,
    iterations: *mut usize,
) -> AmimoStatus {
    status(|| {
        let p = &handle(problem, "problem")?.inner;
        let k = p.channel.users();
        let soft = slice_mut(s_soft, 2 * k, "s_soft")?;
        let idx = slice_mut(indices, k, "indices")?;
        let c = Constellation::new(p.order.unwrap_or(16))?;
        let mut cfg = DetectorConfig::default();
        if t0 > 0 {
            cfg.t0 = t0;
        }
        let sigma2 = || p.sigma2.ok_or_else(|| Error::Config("detector needs a positive noise variance".into()));
        let (z, a, b) = (&p.z, &p.channel, &p.reference);
        let r: DetectionResult = match detector {
            AmimoDetector::BiasedGs => biased_gs(z, a, b, &cfg, None, &c)?,
            AmimoDetector::EmGs => em_gs(z, a, b, sigma2()?, &cfg, None, &c)?,
            AmimoDetector::ZfKnown => {
                let y = p.y.as_ref().ok_or_else(|| Error::Config("known-phase baseline needs the complex field".into()))?;
                zf_known_phase(y, a, b, &c)?
            }
            AmimoDetector::ExhaustiveLs => {
                exhaustive_search(z, a, b, p.sigma2.unwrap_or(1.0), &c, SearchCriterion::LeastSquares, &cfg)?
            }
            AmimoDetector::ExhaustiveMl => {
                exhaustive_search(z, a, b, sigma2()?, &c, SearchCriterion::MaximumLikelihood, &cfg)?
            }
        };
        write_complex(&r.s_soft, soft);
        idx.copy_from_slice(&r.indices);
        if let Some(it) = iterations.as_mut() {
            *it = r.iterations_run;
        }
        Ok(())
    })
}

/// `I1(x) / I0(x)` for `x >= 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amimo_bessel_ratio(x: f64, out: *mut f64) -> AmimoStatus {
    status(|| {
        let v = special::bessel_ratio(x)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

/// Normalised CRLB `Tr(I^-1) / K` at `s_true` (`2 K` doubles). Passing a
/// null `s_true` uses the symbols stored in the problem, if any.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amimo_normalized_crlb(
    problem: *const AmimoProblem,
    s_true: *const f64,
    out: *mut f64,
) -> AmimoStatus {
    status(|| {
        let p = &handle(problem, "problem")?.inner;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let s = if s_true.is_null() {
            p.s_true.clone().ok_or(Fail::Null("s_true"))?
        } else {
            complex(slice(s_true, 2 * p.channel.users(), "s_true")?)
        };
        let sigma2 = p.sigma2.ok_or_else(|| Error::Config("bound needs a positive noise variance".into()))?;
        *out = crlb::normalized_crlb(&p.channel, &s, &p.reference, sigma2)?;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn amimo_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
