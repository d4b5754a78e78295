//! C ABI over the `parasemi` toolkit.
//!
//! Operators are opaque handles created by `ps_operator_new`,
//! `ps_heat_operator_new` or `ps_yosida_new` and released with
//! `ps_operator_free`. Every fallible call returns a [`PsStatus`]; on failure
//! the message is kept per thread and can be copied out with
//! `ps_last_error_message`. Arrays are caller-owned and never retained.

use std::cell::RefCell;
use std::ffi::c_char;
use std::num::NonZeroU32;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use parasemi::heat::{assemble_operator, TorusSpec};
use parasemi::mild::{mild_solve, DeterministicProblem, Forcing};
use parasemi::profile::{ModalFunction, ProfileKind, TimeProfile};
use parasemi::spaces::{beta_kernel_integral, HolderParams, TimeGrid};
use parasemi::spectral::SpectralOperator;
use parasemi::stochastic::{ito_isometry_check, DiffusionOperator, NoiseConfig};
use parasemi::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Shape = 3,
    Singularity = 4,
    Regime = 5,
    Precondition = 6,
    Tolerance = 7,
    Internal = 8,
}

/// Time profile of a modal forcing or gain.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsProfile {
    Zero = 0,
    Constant = 1,
    /// `t^{β-1}`
    Power = 2,
    /// `t^{β-1+σ}`
    Holder = 3,
    /// `t^{β-1} + t^{β-1+σ}`
    PowerPlusHolder = 4,
}

impl From<PsProfile> for ProfileKind {
    fn from(p: PsProfile) -> Self {
        match p {
            PsProfile::Zero => ProfileKind::Zero,
            PsProfile::Constant => ProfileKind::Constant,
            PsProfile::Power => ProfileKind::Power,
            PsProfile::Holder => ProfileKind::Holder,
            PsProfile::PowerPlusHolder => ProfileKind::PowerPlusHolder,
        }
    }
}

/// Opaque diagonal operator handle.
pub struct PsOperator {
    inner: SpectralOperator,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsIsometry {
    pub mc_mean_square: f64,
    pub analytic: f64,
    pub standard_error: f64,
    pub z_score: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::Shape { .. } => PsStatus::Shape,
        Error::Singularity(_) | Error::SpectrumHit { .. } | Error::UnsupportedSingularity { .. } => PsStatus::Singularity,
        Error::Regime(_) => PsStatus::Regime,
        Error::Precondition(_) => PsStatus::Precondition,
        Error::Tolerance(_) => PsStatus::Tolerance,
        _ => PsStatus::InvalidInput,
    }
}

struct Null(&'static str);

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<Null> for Failure {
    fn from(n: Null) -> Self {
        Failure::Null(n.0)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PsStatus::Ok
        }
        Ok(Err(Failure::Null(arg))) => {
            set_error(format!("null pointer passed for `{arg}`"));
            PsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            PsStatus::Internal
        }
    }
}

unsafe fn input<'a>(p: *const f64, n: usize, name: &'static str) -> Result<&'a [f64], Null> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Null(name));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, name: &'static str) -> Result<&'a mut [f64], Null> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Null(name));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a>(op: *const PsOperator) -> Result<&'a SpectralOperator, Null> {
    op.as_ref().map(|o| &o.inner).ok_or(Null("op"))
}

unsafe fn emit(op: SpectralOperator, out: *mut *mut PsOperator) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Null("out").into());
    }
    *out = Box::into_raw(Box::new(PsOperator { inner: op }));
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<(), Error> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}

/// Copies the calling thread's last error message (NUL-terminated, truncated
/// to `len`) into `buf` and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates an operator with eigenvalues `eig[0..n]` and space weights
/// `weights[0..n]`; a null `weights` selects unit weights.
///
/// # Safety
/// `eig` (and `weights` when non-null) must point to `n` readable doubles;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_operator_new(
    eig: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut *mut PsOperator,
) -> PsStatus {
    guard(|| {
        let eig = input(eig, n, "eig")?.to_vec();
        let op = if weights.is_null() {
            SpectralOperator::with_unit_weights(eig)?
        } else {
            SpectralOperator::new(eig, input(weights, n, "weights")?.to_vec())?
        };
        emit(op, out)
    })
}

/// `-Δ + a` on the `d`-torus in `H^{-1}`, modes `|k|_∞ ≤ k_max` sorted by
/// eigenvalue.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_heat_operator_new(d: u32, k_max: u32, a: f64, out: *mut *mut PsOperator) -> PsStatus {
    guard(|| {
        let torus = TorusSpec::new(d as usize, k_max as usize)?;
        emit(assemble_operator(torus, a)?.op, out)
    })
}

/// Yosida approximation `A (1 + A/n)^{-1}` of `op`.
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_yosida_new(op: *const PsOperator, n: u32, out: *mut *mut PsOperator) -> PsStatus {
    guard(|| {
        let op = handle(op)?;
        let n = NonZeroU32::new(n).ok_or_else(|| Error::Input("Yosida index must be positive".into()))?;
        emit(op.yosida(n), out)
    })
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_operator_free(op: *mut PsOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_operator_dim(op: *const PsOperator) -> usize {
    op.as_ref().map_or(0, |o| o.inner.dim())
}

/// Copies the eigenvalues into `out[0..n]`.
///
/// # Safety
/// `op` must be a live handle; `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_operator_eigenvalues(op: *const PsOperator, out: *mut f64, n: usize) -> PsStatus {
    guard(|| {
        let op = handle(op)?;
        check_len(op.dim(), n)?;
        output(out, n, "out")?.copy_from_slice(op.eigenvalues());
        Ok(())
    })
}

/// `out = A^θ S(t) v`.
///
/// # Safety
/// `op` must be a live handle; `v` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_semigroup_apply(
    op: *const PsOperator,
    t: f64,
    theta: f64,
    v: *const f64,
    out: *mut f64,
    n: usize,
) -> PsStatus {
    guard(|| {
        let op = handle(op)?;
        let r = op.semigroup_apply(t, theta, input(v, n, "v")?)?;
        output(out, n, "out")?.copy_from_slice(&r);
        Ok(())
    })
}

/// `out = A^θ v`.
///
/// # Safety
/// `op` must be a live handle; `v` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_frac_power_apply(
    op: *const PsOperator,
    theta: f64,
    v: *const f64,
    out: *mut f64,
    n: usize,
) -> PsStatus {
    guard(|| {
        let op = handle(op)?;
        let r = op.frac_power_apply(theta, input(v, n, "v")?)?;
        output(out, n, "out")?.copy_from_slice(&r);
        Ok(())
    })
}

/// Observed `t^θ ‖A^θ S(t)‖` on `grid[0..m]` (written to `observed` when
/// non-null) and the certified bound `(θ/e)^θ`. `violation` is set to 1 if
/// any observation exceeds the bound.
///
/// # Safety
/// `op` must be a live handle; `grid` must hold `m` doubles, `observed` must
/// be null or hold `m` doubles; `certified` and `violation` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_semigroup_bound(
    op: *const PsOperator,
    theta: f64,
    grid: *const f64,
    m: usize,
    observed: *mut f64,
    certified: *mut f64,
    violation: *mut i32,
) -> PsStatus {
    guard(|| {
        let op = handle(op)?;
        let p = op.semigroup_bound_profile(theta, input(grid, m, "grid")?)?;
        if !observed.is_null() {
            output(observed, m, "observed")?.copy_from_slice(&p.observed);
        }
        let certified = certified.as_mut().ok_or(Null("certified"))?;
        let violation = violation.as_mut().ok_or(Null("violation"))?;
        *certified = p.certified_bound;
        *violation = p.violation as i32;
        Ok(())
    })
}

/// `∫_s^t (t-u)^{a-1} (u-s)^{b-1} du` for `a, b ∈ (0, 1)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_beta_kernel(a: f64, b: f64, s: f64, t: f64, out: *mut f64) -> PsStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Null("out"))?;
        *out = beta_kernel_integral(a, b, s, t)?;
        Ok(())
    })
}

/// Mild solution of `dX + AX dt = F dt`, `X(0) = xi`, with modal forcing
/// `A^{-α₁}F(t) = profile(t) · forcing`, on the grid `nodes[0..m]`
/// (starting at 0). Writes `X` node-major into `out[0..m·n]`.
///
/// # Safety
/// `op` must be a live handle; `xi` and `forcing` must hold `n` doubles,
/// `nodes` `m` doubles and `out` `m·n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_mild_solve(
    op: *const PsOperator,
    alpha1: f64,
    xi: *const f64,
    forcing: *const f64,
    profile: PsProfile,
    beta: f64,
    sigma: f64,
    nodes: *const f64,
    m: usize,
    out: *mut f64,
    n: usize,
) -> PsStatus {
    guard(|| {
        let op = handle(op)?;
        check_len(op.dim(), n)?;
        let grid = TimeGrid::new(input(nodes, m, "nodes")?.to_vec())?;
        let params = HolderParams::new(beta, sigma, grid.horizon())?;
        let profile = TimeProfile::from_kind(profile.into(), beta, sigma)?;
        let f = ModalFunction::new(input(forcing, n, "forcing")?.to_vec(), profile);
        let problem = DeterministicProblem::new(
            op.clone(),
            alpha1,
            Forcing::Modal(f),
            input(xi, n, "xi")?.to_vec(),
            params,
        )?;
        let sol = mild_solve(&problem, &grid)?;
        let dst = output(out, m * n, "out")?;
        dst.copy_from_slice(sol.x.data());
        Ok(())
    })
}

/// Monte-Carlo Itô isometry check at `t = horizon` for constant gains
/// `gains[0..n]` on a uniform grid with `steps` intervals.
///
/// # Safety
/// `op` must be a live handle; `gains` must hold `n` doubles and `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_isometry_check(
    op: *const PsOperator,
    gains: *const f64,
    n: usize,
    horizon: f64,
    steps: usize,
    seed: u64,
    n_paths: usize,
    out: *mut PsIsometry,
) -> PsStatus {
    guard(|| {
        let op = handle(op)?;
        check_len(op.dim(), n)?;
        let out = out.as_mut().ok_or(Null("out"))?;
        let params = HolderParams::new(1.0, 0.25, horizon)?;
        let g = DiffusionOperator::new(
            ModalFunction::new(input(gains, n, "gains")?.to_vec(), TimeProfile::constant()),
            0.0,
            params,
        )?;
        let config = NoiseConfig::new(seed, n_paths, TimeGrid::uniform(horizon, steps)?)?;
        let r = ito_isometry_check(op, &g, horizon, &config)?;
        *out = PsIsometry {
            mc_mean_square: r.mc_mean_square,
            analytic: r.analytic,
            standard_error: r.standard_error,
            z_score: r.z_score,
        };
        Ok(())
    })
}
