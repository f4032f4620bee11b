//! C ABI over `bdcert`.
//!
//! Every handle is opaque and owned by the caller once returned; release it
//! with the matching `*_free`. Functions return a [`BdcStatus`]; on failure
//! the message is available from [`bdc_last_error`] on the same thread.
//! Strings returned by the library are released with [`bdc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bdcert::presets::{self, Preset};
use bdcert::solver::RegimeOptions;
use bdcert::truncation::{certificate_at, DEFAULT_LEVEL_CAP};
use bdcert::{
    ergodicity_report, limiting_regime, select_truncation, BoundCertificate, Constants, Criterion, Error,
    IntensityModel, LimitingRegime, ReportOptions, TruncationSetup, WeightSequence,
};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BdcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidModel = 3,
    DivergentSeries = 4,
    NotEssential = 5,
    NotStabilized = 6,
    ZeroW = 7,
    TargetUnreachable = 8,
    InitialStateOutside = 9,
    Numerical = 10,
    Io = 11,
    Panic = 12,
}

impl From<&Error> for BdcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidModel(_) | Error::NegativeRate { .. } | Error::Unbounded(_) => BdcStatus::InvalidModel,
            Error::DivergentSeries(_) => BdcStatus::DivergentSeries,
            Error::NotEssential { .. } => BdcStatus::NotEssential,
            Error::NotStabilized { .. } => BdcStatus::NotStabilized,
            Error::ZeroW => BdcStatus::ZeroW,
            Error::TargetUnreachable { .. } => BdcStatus::TargetUnreachable,
            Error::InitialStateOutside { .. } => BdcStatus::InitialStateOutside,
            Error::EnvelopeCertification { .. }
            | Error::StepTooLarge { .. }
            | Error::NegativeProbability { .. }
            | Error::MajorantViolated { .. } => BdcStatus::Numerical,
            Error::InvalidArgument(_) | Error::Json(_) => BdcStatus::InvalidArgument,
            Error::Io(_) | Error::Csv(_) => BdcStatus::Io,
        }
    }
}

/// Which bound governs truncation-level selection.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BdcCriterion {
    Tv = 0,
    Mean = 1,
    Both = 2,
}

impl From<BdcCriterion> for Criterion {
    fn from(c: BdcCriterion) -> Self {
        match c {
            BdcCriterion::Tv => Criterion::Tv,
            BdcCriterion::Mean => Criterion::Mean,
            BdcCriterion::Both => Criterion::Both,
        }
    }
}

/// A validated model with its weight sequence and run defaults.
pub struct BdcModel {
    model: IntensityModel,
    weights: WeightSequence,
    servers: usize,
    preset: Option<Preset>,
}

/// A truncation level with its bounds.
pub struct BdcCertificate(BoundCertificate);

/// One period of the limiting regime.
pub struct BdcRegime(LimitingRegime);

/// One output time of a [`BdcRegime`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct BdcRegimeSample {
    pub t: f64,
    pub p0: f64,
    pub at_most_servers: f64,
    pub mean: f64,
    pub tv_bound: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (BdcStatus, String)>) -> BdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BdcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BdcStatus::Panic
        }
    }
}

fn fail(e: Error) -> (BdcStatus, String) {
    (BdcStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (BdcStatus, String) {
    (BdcStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (BdcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (BdcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (BdcStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bdc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn bdc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn bdc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads `example1` .. `example4`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_model_from_preset(name: *const c_char, out: *mut *mut BdcModel) -> BdcStatus {
    guard(|| {
        let p = presets::by_name(read_str(name, "name")?).map_err(fail)?;
        write_out(
            out,
            BdcModel {
                model: p.model.clone(),
                weights: p.weights.clone(),
                servers: p.servers,
                preset: Some(p),
            },
        )
    })
}

/// Parses a JSON model description. Weights default to unit weights.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_model_from_json(json: *const c_char, out: *mut *mut BdcModel) -> BdcStatus {
    guard(|| {
        let model = IntensityModel::from_json(read_str(json, "json")?).map_err(fail)?;
        write_out(
            out,
            BdcModel {
                model,
                weights: WeightSequence::unit(),
                servers: 0,
                preset: None,
            },
        )
    })
}

/// Replaces the weight sequence (`geometric:2`, `geometric-linear:9/8:200`, ...).
///
/// # Safety
/// `model` must be a live handle; `rule` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bdc_model_set_weights(model: *mut BdcModel, rule: *const c_char) -> BdcStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.weights = read_str(rule, "rule")?.parse().map_err(fail)?;
        Ok(())
    })
}

/// Sets `S` in `Pr(X <= S)`.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdc_model_set_servers(model: *mut BdcModel, servers: usize) -> BdcStatus {
    guard(|| {
        model.as_mut().ok_or_else(|| null("model"))?.servers = servers;
        Ok(())
    })
}

/// Model description as JSON; release with [`bdc_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_model_to_json(model: *const BdcModel, out: *mut *mut c_char) -> BdcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = owned_string(m.model.to_json().map_err(fail)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bdc_model_free(model: *mut BdcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn constants_for(m: &BdcModel, published: bool) -> Result<Constants, (BdcStatus, String)> {
    if published {
        return m
            .preset
            .as_ref()
            .map(|p| p.published.constants())
            .ok_or_else(|| (BdcStatus::InvalidArgument, "published constants need a preset model".into()));
    }
    let rep = ergodicity_report(&m.model, Some(&m.weights), &ReportOptions::default()).map_err(fail)?;
    Constants::from_report(&rep).map_err(fail)
}

/// Selects the smallest truncation level whose bound over
/// `[window_start, window_end]` meets `target`.
///
/// With `published_constants` the preset's published constants replace the
/// self-certified ones.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_truncate(
    model: *const BdcModel,
    target: f64,
    window_start: f64,
    window_end: f64,
    criterion: BdcCriterion,
    published_constants: bool,
    out: *mut *mut BdcCertificate,
) -> BdcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let k = constants_for(m, published_constants)?;
        let setup = TruncationSetup::new(&m.model, m.weights.clone(), k, 0).map_err(fail)?;
        let c = select_truncation(&setup, target, [window_start, window_end], criterion.into(), DEFAULT_LEVEL_CAP)
            .map_err(fail)?;
        write_out(out, BdcCertificate(c))
    })
}

/// Bounds at a fixed truncation level.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_certificate_at_level(
    model: *const BdcModel,
    level: usize,
    window_start: f64,
    window_end: f64,
    target: f64,
    published_constants: bool,
    out: *mut *mut BdcCertificate,
) -> BdcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let k = constants_for(m, published_constants)?;
        let setup = TruncationSetup::new(&m.model, m.weights.clone(), k, 0).map_err(fail)?;
        let c = certificate_at(&setup, level, [window_start, window_end], Criterion::Tv, target).map_err(fail)?;
        write_out(out, BdcCertificate(c))
    })
}

/// # Safety
/// `cert` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdc_certificate_level(cert: *const BdcCertificate) -> usize {
    cert.as_ref().map_or(0, |c| c.0.level)
}

/// Whether the certificate meets its target over the whole window.
///
/// # Safety
/// `cert` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdc_certificate_met(cert: *const BdcCertificate) -> bool {
    cert.as_ref().is_some_and(|c| c.0.met)
}

/// Total-variation bound at time `t`, or NaN for a NULL handle.
///
/// # Safety
/// `cert` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdc_certificate_tv_at(cert: *const BdcCertificate, t: f64) -> f64 {
    cert.as_ref().map_or(f64::NAN, |c| c.0.tv_at(t))
}

/// Mean bound at time `t`; fails with `ZeroW` when unavailable.
///
/// # Safety
/// `cert` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_certificate_mean_at(cert: *const BdcCertificate, t: f64, out: *mut f64) -> BdcStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        let v = c.0.mean_at(t).ok_or_else(|| fail(Error::ZeroW))?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Certificate as JSON; release with [`bdc_string_free`].
///
/// # Safety
/// `cert` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_certificate_to_json(cert: *const BdcCertificate, out: *mut *mut c_char) -> BdcStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = owned_string(c.0.to_json().map_err(fail)?);
        Ok(())
    })
}

/// # Safety
/// `cert` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bdc_certificate_free(cert: *mut BdcCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Computes one period of the limiting regime from state 0 with total error `target`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_regime(model: *const BdcModel, target: f64, out: *mut *mut BdcRegime) -> BdcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let r = limiting_regime(&m.model, &m.weights, target, m.servers, &RegimeOptions::default()).map_err(fail)?;
        write_out(out, BdcRegime(r))
    })
}

/// # Safety
/// `regime` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdc_regime_len(regime: *const BdcRegime) -> usize {
    regime.as_ref().map_or(0, |r| r.0.times.len())
}

/// # Safety
/// `regime` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdc_regime_level(regime: *const BdcRegime) -> usize {
    regime.as_ref().map_or(0, |r| r.0.certificate.level)
}

/// # Safety
/// `regime` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_regime_sample(
    regime: *const BdcRegime,
    index: usize,
    out: *mut BdcRegimeSample,
) -> BdcStatus {
    guard(|| {
        let r = &regime.as_ref().ok_or_else(|| null("regime"))?.0;
        if index >= r.times.len() {
            return Err((
                BdcStatus::InvalidArgument,
                format!("index {index} out of range 0..{}", r.times.len()),
            ));
        }
        *out.as_mut().ok_or_else(|| null("out"))? = BdcRegimeSample {
            t: r.times[index],
            p0: r.p0[index],
            at_most_servers: r.at_most_servers[index],
            mean: r.mean[index],
            tv_bound: r.tv_bound[index],
        };
        Ok(())
    })
}

/// Regime as JSON; release with [`bdc_string_free`].
///
/// # Safety
/// `regime` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdc_regime_to_json(regime: *const BdcRegime, out: *mut *mut c_char) -> BdcStatus {
    guard(|| {
        let r = regime.as_ref().ok_or_else(|| null("regime"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string_pretty(&r.0).map_err(|e| fail(e.into()))?;
        *out = owned_string(text);
        Ok(())
    })
}

/// # Safety
/// `regime` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bdc_regime_free(regime: *mut BdcRegime) {
    if !regime.is_null() {
        drop(Box::from_raw(regime));
    }
}
