//! C ABI for the trading-prophets toolkit.
//!
//! Conventions:
//! - Opaque handles (`TpDistribution`, `TpProcess`) own their Rust objects
//!   and must be released with the matching `_free` function.
//! - Every fallible call returns a [`TpStatus`] and writes results through
//!   out-pointers, which are touched only on `TP_STATUS_OK`.
//! - [`tp_last_error_message`] returns a thread-local, NUL-terminated
//!   description of the most recent failure on the calling thread; the
//!   pointer is valid until the next failing call on that thread.
//! - Panics never unwind across the boundary; they surface as
//!   `TP_STATUS_INTERNAL_ERROR`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use trading_prophets::adversary;
use trading_prophets::analysis;
use trading_prophets::engine;
use trading_prophets::error::Error;
use trading_prophets::market::{CostModel, PriceDistribution, PriceProcess};
use trading_prophets::oracle;
use trading_prophets::traders::{
    solve_thresholds, Bbsa, Blsh, EpsMargin, GreedyLookahead, Trader,
};
use trading_prophets::Realization;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ZeroProbability = 3,
    DiscontinuousCdf = 4,
    HorizonTooLarge = 5,
    ProtocolViolation = 6,
    BoundViolated = 7,
    InternalError = 8,
}

/// An owned price distribution (atoms plus perturbation half-width).
pub struct TpDistribution(PriceDistribution);

/// An owned price process.
pub struct TpProcess(PriceProcess);

/// Buy/sell thresholds and the derived quantities, by value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TpThresholds {
    pub z_l: f64,
    pub z_h: f64,
    pub v: f64,
    pub p: f64,
    pub v_l: f64,
    pub v_h: f64,
    pub median: f64,
}

/// Summary of a Monte Carlo batch, by value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TpBatchStats {
    pub trials: u64,
    pub alg_mean: f64,
    pub alg_se: f64,
    pub opt_mean: f64,
    pub opt_se: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> TpStatus {
    match err {
        Error::ZeroProbabilityEvent(_) => TpStatus::ZeroProbability,
        Error::DiscontinuousCdf(_) | Error::DegenerateThresholds(_) => {
            TpStatus::DiscontinuousCdf
        }
        Error::HorizonTooLarge { .. } => TpStatus::HorizonTooLarge,
        Error::ProtocolViolation(_) => TpStatus::ProtocolViolation,
        Error::BoundViolated(_) => TpStatus::BoundViolated,
        _ => TpStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> TpStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

fn guarded(f: impl FnOnce() -> TpStatus) -> TpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            TpStatus::InternalError
        }
    }
}

/// Message describing the most recent failure on this thread. Never null;
/// empty when no failure has occurred.
#[no_mangle]
pub extern "C" fn tp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

macro_rules! nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_error(concat!("null pointer: ", stringify!($ptr)));
            return TpStatus::NullPointer;
        }
    };
}

/// Builds a distribution from parallel `values`/`probs` arrays of length
/// `len` and perturbation half-width `delta`.
///
/// # Safety
/// `values` and `probs` must point to `len` readable doubles; `out` must be
/// a valid location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_distribution_new(
    values: *const f64,
    probs: *const f64,
    len: usize,
    delta: f64,
    out: *mut *mut TpDistribution,
) -> TpStatus {
    guarded(|| {
        nonnull!(values);
        nonnull!(probs);
        nonnull!(out);
        let values = unsafe { slice::from_raw_parts(values, len) };
        let probs = unsafe { slice::from_raw_parts(probs, len) };
        let atoms = values.iter().copied().zip(probs.iter().copied()).collect();
        match PriceDistribution::new(atoms, delta) {
            Ok(d) => {
                unsafe { *out = Box::into_raw(Box::new(TpDistribution(d))) };
                TpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// The uniform distribution on [0, 1].
///
/// # Safety
/// `out` must be a valid location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_distribution_uniform01(out: *mut *mut TpDistribution) -> TpStatus {
    guarded(|| {
        nonnull!(out);
        unsafe {
            *out = Box::into_raw(Box::new(TpDistribution(PriceDistribution::uniform01())))
        };
        TpStatus::Ok
    })
}

/// Releases a distribution handle. Null is ignored.
///
/// # Safety
/// `d` must be a pointer previously returned by a constructor, or null.
#[no_mangle]
pub unsafe extern "C" fn tp_distribution_free(d: *mut TpDistribution) {
    if !d.is_null() {
        drop(unsafe { Box::from_raw(d) });
    }
}

macro_rules! dist_query {
    ($(#[$attr:meta])* $name:ident, |$d:ident, $x:ident| $body:expr) => {
        $(#[$attr])*
        #[no_mangle]
        pub unsafe extern "C" fn $name(
            d: *const TpDistribution,
            $x: f64,
            out: *mut f64,
        ) -> TpStatus {
            guarded(|| {
                nonnull!(d);
                nonnull!(out);
                let $d = unsafe { &(*d).0 };
                match $body {
                    Ok(value) => {
                        unsafe { *out = value };
                        TpStatus::Ok
                    }
                    Err(e) => fail(e),
                }
            })
        }
    };
}

/// E[X].
///
/// # Safety
/// `d` must be a live distribution handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_distribution_mean(
    d: *const TpDistribution,
    out: *mut f64,
) -> TpStatus {
    guarded(|| {
        nonnull!(d);
        nonnull!(out);
        unsafe { *out = (*d).0.mean() };
        TpStatus::Ok
    })
}

dist_query!(
    /// Pr[X <= x].
    ///
    /// # Safety
    /// `d` must be a live distribution handle; `out` must be writable.
    tp_distribution_cdf,
    |dist, x| Ok::<f64, Error>(dist.cdf(x))
);

dist_query!(
    /// E[X | X <= z]; fails with `TP_STATUS_ZERO_PROBABILITY` when Pr[X <= z] = 0.
    ///
    /// # Safety
    /// `d` must be a live distribution handle; `out` must be writable.
    tp_distribution_mean_below,
    |dist, z| dist.conditional_mean_below(z)
);

dist_query!(
    /// E[X | X >= z]; fails with `TP_STATUS_ZERO_PROBABILITY` when Pr[X >= z] = 0.
    ///
    /// # Safety
    /// `d` must be a live distribution handle; `out` must be writable.
    tp_distribution_mean_above,
    |dist, z| dist.conditional_mean_above(z)
);

dist_query!(
    /// E[(threshold - X)_+].
    ///
    /// # Safety
    /// `d` must be a live distribution handle; `out` must be writable.
    tp_distribution_part_gap,
    |dist, threshold| Ok::<f64, Error>(dist.expected_positive_part_gap(threshold))
);

/// E[(X_cur - X_prev)_+] for independent draws.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_pair_gap(
    prev: *const TpDistribution,
    cur: *const TpDistribution,
    out: *mut f64,
) -> TpStatus {
    guarded(|| {
        nonnull!(prev);
        nonnull!(cur);
        nonnull!(out);
        unsafe {
            *out = trading_prophets::market::expected_positive_pair_gap(&(*prev).0, &(*cur).0)
        };
        TpStatus::Ok
    })
}

/// Solves the buy/sell thresholds for a distribution under a cost model.
///
/// # Safety
/// `d` must be a live distribution handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_thresholds_solve(
    d: *const TpDistribution,
    eps_pi: f64,
    eps_sigma: f64,
    out: *mut TpThresholds,
) -> TpStatus {
    guarded(|| {
        nonnull!(d);
        nonnull!(out);
        let cm = match CostModel::new(eps_pi, eps_sigma) {
            Ok(cm) => cm,
            Err(e) => return fail(e),
        };
        match solve_thresholds(unsafe { &(*d).0 }, &cm) {
            Ok(th) => {
                unsafe {
                    *out = TpThresholds {
                        z_l: th.z_l,
                        z_h: th.z_h,
                        v: th.v,
                        p: th.p,
                        v_l: th.v_l,
                        v_h: th.v_h,
                        median: th.median,
                    }
                };
                TpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

fn realization_from(prices: &[f64]) -> Result<Realization, Error> {
    Realization::new(prices.to_vec())
}

/// Zero-cost offline optimum of a realized price path (telescoping sum).
///
/// # Safety
/// `prices` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_opt_telescoping(
    prices: *const f64,
    len: usize,
    out: *mut f64,
) -> TpStatus {
    guarded(|| {
        nonnull!(prices);
        nonnull!(out);
        let prices = unsafe { slice::from_raw_parts(prices, len) };
        let result = realization_from(prices)
            .and_then(|r| oracle::opt_telescoping(&r, &CostModel::zero()));
        match result {
            Ok(v) => {
                unsafe { *out = v };
                TpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Offline optimum of a realized price path under transaction costs.
///
/// # Safety
/// `prices` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_opt_with_costs(
    prices: *const f64,
    len: usize,
    eps_pi: f64,
    eps_sigma: f64,
    initial_stock: bool,
    out: *mut f64,
) -> TpStatus {
    guarded(|| {
        nonnull!(prices);
        nonnull!(out);
        let cm = match CostModel::new(eps_pi, eps_sigma) {
            Ok(cm) => cm,
            Err(e) => return fail(e),
        };
        let prices = unsafe { slice::from_raw_parts(prices, len) };
        match realization_from(prices) {
            Ok(r) => {
                unsafe { *out = oracle::opt_with_costs_dp(&r, &cm, initial_stock) };
                TpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

fn emit_process(process: Result<PriceProcess, Error>, out: *mut *mut TpProcess) -> TpStatus {
    match process {
        Ok(p) => {
            unsafe { *out = Box::into_raw(Box::new(TpProcess(p))) };
            TpStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// I.i.d. process over `horizon` steps (the distribution is copied).
///
/// # Safety
/// `d` must be a live distribution handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_process_iid(
    d: *const TpDistribution,
    horizon: usize,
    out: *mut *mut TpProcess,
) -> TpStatus {
    guarded(|| {
        nonnull!(d);
        nonnull!(out);
        emit_process(
            PriceProcess::iid(unsafe { (*d).0.clone() }, horizon),
            out,
        )
    })
}

/// Independent per-step distributions (each handle is copied).
///
/// # Safety
/// `dists` must point to `len` live distribution handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_process_independent(
    dists: *const *const TpDistribution,
    len: usize,
    out: *mut *mut TpProcess,
) -> TpStatus {
    guarded(|| {
        nonnull!(dists);
        nonnull!(out);
        let handles = unsafe { slice::from_raw_parts(dists, len) };
        let mut owned = Vec::with_capacity(len);
        for &h in handles {
            nonnull!(h);
            owned.push(unsafe { (*h).0.clone() });
        }
        emit_process(PriceProcess::independent(owned), out)
    })
}

/// Fixed deterministic price path.
///
/// # Safety
/// `prices` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_process_deterministic(
    prices: *const f64,
    len: usize,
    out: *mut *mut TpProcess,
) -> TpStatus {
    guarded(|| {
        nonnull!(prices);
        nonnull!(out);
        let prices = unsafe { slice::from_raw_parts(prices, len) }.to_vec();
        emit_process(PriceProcess::deterministic(prices), out)
    })
}

/// The alternating two-distribution family whose prophet/online gap
/// approaches 3. `horizon` must be even.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_process_prop_adversarial(
    eps: f64,
    horizon: usize,
    out: *mut *mut TpProcess,
) -> TpStatus {
    guarded(|| {
        nonnull!(out);
        emit_process(adversary::gen_prop_adversarial(eps, horizon), out)
    })
}

/// The i.i.d. three-atom family whose gap approaches 2.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_process_prop_iid(
    eps: f64,
    horizon: usize,
    out: *mut *mut TpProcess,
) -> TpStatus {
    guarded(|| {
        nonnull!(out);
        emit_process(adversary::gen_prop_iid(eps, horizon), out)
    })
}

/// The i.i.d. distribution on which the margin trader never buys.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_process_appendix_failure(
    eps: f64,
    horizon: usize,
    out: *mut *mut TpProcess,
) -> TpStatus {
    guarded(|| {
        nonnull!(out);
        emit_process(adversary::gen_appendix_failure(eps, horizon), out)
    })
}

/// The adaptive phase adversary (additive cost `eps`, `phases` phases,
/// lookahead window `k`).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_process_phase(
    eps: f64,
    phases: usize,
    k: usize,
    out: *mut *mut TpProcess,
) -> TpStatus {
    guarded(|| {
        nonnull!(out);
        let spec = match trading_prophets::market::AdaptiveSpec::new(eps, phases, k) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        emit_process(Ok(PriceProcess::Adaptive(spec)), out)
    })
}

/// Releases a process handle. Null is ignored.
///
/// # Safety
/// `p` must be a pointer previously returned by a constructor, or null.
#[no_mangle]
pub unsafe extern "C" fn tp_process_free(p: *mut TpProcess) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Closed-form zero-cost E[OPT] of the process.
///
/// # Safety
/// `p` must be a live process handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_expected_opt_zero_cost(
    p: *const TpProcess,
    out: *mut f64,
) -> TpStatus {
    guarded(|| {
        nonnull!(p);
        nonnull!(out);
        match oracle::expected_opt_zero_cost(unsafe { &(*p).0 }) {
            Ok(v) => {
                unsafe { *out = v };
                TpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Closed-form zero-cost expected profit of the buy-low-sell-high rule
/// (equivalently, the best-online upper bound).
///
/// # Safety
/// `p` must be a live process handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_expected_alg_blsh(p: *const TpProcess, out: *mut f64) -> TpStatus {
    guarded(|| {
        nonnull!(p);
        nonnull!(out);
        match analysis::expected_alg_blsh(unsafe { &(*p).0 }, &CostModel::zero()) {
            Ok(v) => {
                unsafe { *out = v };
                TpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

fn build_trader(
    name: &str,
    margin: f64,
    process: &PriceProcess,
    cm: &CostModel,
) -> Result<Box<dyn Trader>, Error> {
    let iid_dist = || -> Result<&PriceDistribution, Error> {
        match process {
            PriceProcess::Iid { dist, .. } => Ok(dist),
            _ => Err(Error::InvalidParameter(format!(
                "trader `{name}` needs an i.i.d. process"
            ))),
        }
    };
    match name {
        "blsh" => Ok(Box::new(Blsh)),
        "bbsa" => Ok(Box::new(Bbsa::new(solve_thresholds(iid_dist()?, cm)?))),
        "eps-margin" => Ok(Box::new(EpsMargin::for_distribution(iid_dist()?, margin))),
        other => {
            if let Some(k) = other.strip_prefix("lookahead:") {
                let k: usize = k.parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad lookahead window in `{other}`"))
                })?;
                if k != 1 {
                    return Err(Error::InvalidParameter(
                        "only lookahead:1 is exposed over the C ABI".into(),
                    ));
                }
                Ok(Box::new(GreedyLookahead::new(cm)))
            } else {
                Err(Error::InvalidParameter(format!("unknown trader `{other}`")))
            }
        }
    }
}

/// Runs a reproducible Monte Carlo batch of `trader_name` ("blsh", "bbsa",
/// "eps-margin", "lookahead:1") against the process. `margin` is read only
/// by "eps-margin".
///
/// # Safety
/// `p` must be a live process handle, `trader_name` a NUL-terminated string,
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_monte_carlo(
    p: *const TpProcess,
    trader_name: *const c_char,
    margin: f64,
    eps_pi: f64,
    eps_sigma: f64,
    trials: usize,
    master_seed: u64,
    out: *mut TpBatchStats,
) -> TpStatus {
    guarded(|| {
        nonnull!(p);
        nonnull!(trader_name);
        nonnull!(out);
        let name = match unsafe { std::ffi::CStr::from_ptr(trader_name) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("trader name is not valid UTF-8");
                return TpStatus::InvalidArgument;
            }
        };
        let cm = match CostModel::new(eps_pi, eps_sigma) {
            Ok(cm) => cm,
            Err(e) => return fail(e),
        };
        let process = unsafe { &(*p).0 };
        if let Err(e) = build_trader(name, margin, process, &cm) {
            return fail(e);
        }
        let result = engine::monte_carlo(
            process,
            || build_trader(name, margin, process, &cm).expect("validated above"),
            &cm,
            trials,
            master_seed,
        );
        match result {
            Ok(run) => {
                let s = run.stats;
                unsafe {
                    *out = TpBatchStats {
                        trials: s.trials as u64,
                        alg_mean: s.alg_mean,
                        alg_se: s.alg_se,
                        opt_mean: s.opt_mean,
                        opt_se: s.opt_se,
                        ratio: s.ratio,
                        ratio_se: s.ratio_se,
                    }
                };
                TpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
