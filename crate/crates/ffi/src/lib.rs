//! C interface. Problems and ground states are opaque heap handles; every
//! fallible call returns a [`DnlsStatus`] and leaves a message retrievable
//! with [`dnls_last_error_message`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dnls::energy::Functional;
use dnls::hardy::{compute_constants, HardyWeight, InequalityConstants};
use dnls::lattice::BoxDomain;
use dnls::nonlinearity::{Nonlinearity, Power};
use dnls::solver::{solve_ground_state, GroundStateResult, SolverConfig};
use dnls::spectral::{bloch_band_edges, split_box, PeriodicPotential, SpectralSplit};
use dnls::{Error, ErrorClass};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DnlsStatus {
    Ok = 0,
    /// Null pointer, bad size or malformed parameters.
    InvalidArgument = 1,
    /// A model hypothesis fails: no spectral gap, ρ out of range, N < 3.
    Hypothesis = 2,
    /// An algorithm did not converge.
    Numerical = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Box, checkerboard potential `c(−1)^{Σx} + shift` and power nonlinearity.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DnlsProblemSpec {
    pub dimension: u32,
    pub radius: u32,
    pub amplitude: f64,
    /// NaN selects the default `−2N`.
    pub shift: f64,
    pub p: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DnlsConstants {
    pub kappa: f64,
    pub rho_plus: f64,
    pub rho_tilde_plus: f64,
    pub rho_max: f64,
}

pub struct DnlsProblem {
    potential: PeriodicPotential,
    split: SpectralSplit,
    model: Box<dyn Nonlinearity>,
    constants: Option<InequalityConstants>,
}

pub struct DnlsGroundState {
    result: GroundStateResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DnlsStatus {
    match e.class() {
        ErrorClass::Input => DnlsStatus::InvalidArgument,
        ErrorClass::Hypothesis => DnlsStatus::Hypothesis,
        ErrorClass::Numerical => DnlsStatus::Numerical,
        ErrorClass::Io => DnlsStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> DnlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DnlsStatus::Ok
        }
        Ok(Err(e)) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DnlsStatus::Panic
        }
    }
}

fn null(what: &str) -> Error {
    Error::InvalidInput(format!("{what} is null"))
}

/// Builds the box operator and its spectral splitting.
///
/// # Safety
/// `spec` must point to a valid `DnlsProblemSpec`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dnls_problem_new(spec: *const DnlsProblemSpec, out: *mut *mut DnlsProblem) -> DnlsStatus {
    guard(|| {
        let spec = unsafe { spec.as_ref() }.ok_or_else(|| null("spec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        faer::set_global_parallelism(faer::Par::Seq);
        let n = spec.dimension as usize;
        let potential = if spec.shift.is_nan() {
            PeriodicPotential::default_checkerboard(n, spec.amplitude)?
        } else {
            PeriodicPotential::checkerboard(n, spec.amplitude, spec.shift)?
        };
        let domain = BoxDomain::new(n, spec.radius as usize)?;
        let split = split_box(&domain, &potential, None)?;
        let model = Box::new(Power::new(spec.p)?);
        let problem = Box::new(DnlsProblem {
            potential,
            split,
            model,
            constants: None,
        });
        unsafe { *out = Box::into_raw(problem) };
        Ok(())
    })
}

/// # Safety
/// `problem` must come from `dnls_problem_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dnls_problem_free(problem: *mut DnlsProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Number of lattice sites, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dnls_problem_sites(problem: *const DnlsProblem) -> usize {
    unsafe { problem.as_ref() }.map_or(0, |p| p.split.len())
}

/// Bloch gap edges of the potential on a `grid`-point k-mesh per axis.
///
/// # Safety
/// `problem` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dnls_problem_gap(
    problem: *const DnlsProblem,
    grid: u32,
    sigma_minus: *mut f64,
    sigma_plus: *mut f64,
) -> DnlsStatus {
    guard(|| {
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        if sigma_minus.is_null() || sigma_plus.is_null() {
            return Err(null("output"));
        }
        let t = bloch_band_edges(&p.potential, grid as usize)?;
        unsafe {
            *sigma_minus = t.sigma_minus;
            *sigma_plus = t.sigma_plus;
        }
        Ok(())
    })
}

fn ensure_constants(p: &mut DnlsProblem) -> Result<InequalityConstants, Error> {
    if let Some(c) = &p.constants {
        return Ok(c.clone());
    }
    let c = compute_constants(&p.split, HardyWeight::Euclidean)?.constants;
    p.constants = Some(c.clone());
    Ok(c)
}

/// Hardy constant, `ρ⁺` and `ρ_max` of the box (computed once, then cached).
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dnls_problem_constants(problem: *mut DnlsProblem, out: *mut DnlsConstants) -> DnlsStatus {
    guard(|| {
        let p = unsafe { problem.as_mut() }.ok_or_else(|| null("problem"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let c = ensure_constants(p)?;
        *out = DnlsConstants {
            kappa: c.kappa,
            rho_plus: c.rho_plus,
            rho_tilde_plus: c.rho_tilde_plus,
            rho_max: c.rho_max,
        };
        Ok(())
    })
}

/// Ground state at `rho` with default solver settings and the given seed.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dnls_solve(
    problem: *mut DnlsProblem,
    rho: f64,
    seed: u64,
    out: *mut *mut DnlsGroundState,
) -> DnlsStatus {
    guard(|| {
        let p = unsafe { problem.as_mut() }.ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let constants = if rho != 0.0 { Some(ensure_constants(p)?) } else { None };
        let mut f = Functional::new(&p.split, p.model.as_ref(), rho)?;
        if let Some(c) = &constants {
            f = f.with_constants(c);
        }
        let cfg = SolverConfig {
            seed,
            ..SolverConfig::default()
        };
        let result = solve_ground_state(&f, &cfg)?;
        unsafe { *out = Box::into_raw(Box::new(DnlsGroundState { result })) };
        Ok(())
    })
}

/// # Safety
/// `state` must come from `dnls_solve` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dnls_ground_state_free(state: *mut DnlsGroundState) {
    if !state.is_null() {
        drop(unsafe { Box::from_raw(state) });
    }
}

/// `J_ρ(u)`, NaN for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dnls_ground_state_level(state: *const DnlsGroundState) -> f64 {
    unsafe { state.as_ref() }.map_or(f64::NAN, |s| s.result.level)
}

/// `‖J'_ρ(u)‖₂`, NaN for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dnls_ground_state_residual(state: *const DnlsGroundState) -> f64 {
    unsafe { state.as_ref() }.map_or(f64::NAN, |s| s.result.residual)
}

/// Copies the field values (site enumeration order) into `buf`, which must
/// hold exactly `dnls_problem_sites` entries.
///
/// # Safety
/// `state` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dnls_ground_state_copy_field(
    state: *const DnlsGroundState,
    buf: *mut f64,
    len: usize,
) -> DnlsStatus {
    guard(|| {
        let s = unsafe { state.as_ref() }.ok_or_else(|| null("state"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = s.result.field.values();
        if len != v.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                found: len,
            });
        }
        unsafe { ptr::copy_nonoverlapping(v.as_ptr(), buf, len) };
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn dnls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn dnls_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}
