//! C ABI over the confgap toolkit.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` or
//! producing call and released with the matching `*_free`. Every fallible
//! call returns a [`ConfgapStatus`]; on failure the message is available
//! from [`confgap_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use confgap::convexity::{build_phi, default_s_max, PhiTable};
use confgap::error::Error;
use confgap::gap::{scan_gap, Verdict};
use confgap::metric::ConformalFactor;
use confgap::profile::{integrate, ProfileCurve, Truncation};
use confgap::shooting::{angenent_waist, combined_example_with, free_boundary_param, ShootingResult};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfgapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfDomain = 3,
    SingularAxis = 4,
    NonPositiveSigma = 5,
    ToleranceUnachievable = 6,
    NoRoot = 7,
    QuadratureFailed = 8,
    OutOfTable = 9,
    DegenerateCurve = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfgapMetricKind {
    Euclidean = 0,
    Hyperbolic = 1,
    Spherical = 2,
    Gaussian = 3,
}

/// Why an integration stopped early; `None` when it reached its end.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfgapTruncation {
    None = 0,
    Axis = 1,
    SlopeCap = 2,
    Domain = 3,
    Event = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfgapVerdict {
    HoldsStrictly = 0,
    HoldsWithEquality = 1,
    Fails = 2,
}

pub struct ConfgapMetric(ConformalFactor);

pub struct ConfgapCurve(ProfileCurve);

pub struct ConfgapPhiTable(PhiTable);

/// Point on a profile: `slope` is `x'` for graph curves and the tangent angle for arclength ones.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfgapPoint {
    pub param: f64,
    pub x: f64,
    pub z: f64,
    pub slope: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfgapGapSummary {
    pub verdict: ConfgapVerdict,
    pub sample_count: usize,
    pub fail_count: usize,
    pub equality_count: usize,
    /// NaN when no sample has σ > 0.
    pub max_f: f64,
    pub min_lambda: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfgapRoot {
    pub parameter: f64,
    pub residual: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub iterations: usize,
    /// Boundary radius for free-boundary searches, far intercept for the torus; NaN otherwise.
    pub extra: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfgapExample {
    pub delta: f64,
    pub epsilon: f64,
    pub xi: f64,
    pub r: f64,
    pub boundary_curvature: f64,
    pub verdict: ConfgapVerdict,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ConfgapStatus {
    match e {
        Error::OutOfDomain { .. } => ConfgapStatus::OutOfDomain,
        Error::SingularAxis { .. } => ConfgapStatus::SingularAxis,
        Error::NonPositiveSigma { .. } => ConfgapStatus::NonPositiveSigma,
        Error::ToleranceUnachievable { .. } => ConfgapStatus::ToleranceUnachievable,
        Error::NoRoot { .. } => ConfgapStatus::NoRoot,
        Error::QuadratureFailed { .. } => ConfgapStatus::QuadratureFailed,
        Error::OutOfTable { .. } => ConfgapStatus::OutOfTable,
        Error::Precondition(_) | Error::Config { .. } => ConfgapStatus::InvalidArgument,
        Error::DegenerateCurve(_) => ConfgapStatus::DegenerateCurve,
        Error::Io(_) => ConfgapStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard<F>(f: F) -> ConfgapStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ConfgapStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer passed as `{what}`"));
            ConfgapStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            ConfgapStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_box<T>(out: *mut *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    put(out, ptr::null_mut(), what)?;
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

fn verdict(v: Verdict) -> ConfgapVerdict {
    match v {
        Verdict::HoldsStrictly => ConfgapVerdict::HoldsStrictly,
        Verdict::HoldsWithEquality => ConfgapVerdict::HoldsWithEquality,
        Verdict::Fails => ConfgapVerdict::Fails,
    }
}

fn root(r: &ShootingResult) -> ConfgapRoot {
    ConfgapRoot {
        parameter: r.parameter,
        residual: r.residual,
        bracket_lo: r.bracket.0,
        bracket_hi: r.bracket.1,
        iterations: r.iterations,
        extra: r.radius.or(r.far_intercept).unwrap_or(f64::NAN),
    }
}

/// Message for the last failed call on this thread, or null. Owned by the library;
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn confgap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn confgap_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn confgap_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn confgap_metric_new(kind: ConfgapMetricKind, out: *mut *mut ConfgapMetric) -> ConfgapStatus {
    guard(|| {
        let cf = match kind {
            ConfgapMetricKind::Euclidean => ConformalFactor::euclidean(),
            ConfgapMetricKind::Hyperbolic => ConformalFactor::hyperbolic(),
            ConfgapMetricKind::Spherical => ConformalFactor::spherical(),
            ConfgapMetricKind::Gaussian => ConformalFactor::gaussian(),
        };
        put_box(out, ConfgapMetric(cf), "out")
    })
}

/// Custom factor `u(t) = sum coeffs[i] t^i`. Pass a non-positive or NaN
/// `domain_limit` for an unbounded domain.
///
/// # Safety
/// `coeffs` must point to `len` doubles; `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn confgap_metric_new_polynomial(
    coeffs: *const f64,
    len: usize,
    domain_limit: f64,
    out: *mut *mut ConfgapMetric,
) -> ConfgapStatus {
    guard(|| {
        if coeffs.is_null() && len > 0 {
            return Err(Failure::Null("coeffs"));
        }
        let poly = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(coeffs, len).to_vec()
        };
        let limit = (domain_limit > 0.0).then_some(domain_limit);
        let cf = ConformalFactor::custom(poly, None, limit)?;
        put_box(out, ConfgapMetric(cf), "out")
    })
}

/// # Safety
/// `metric` must come from a metric constructor and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn confgap_metric_free(metric: *mut ConfgapMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// # Safety
/// `metric` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_metric_sigma(
    metric: *const ConfgapMetric,
    radius_sq: f64,
    out: *mut f64,
) -> ConfgapStatus {
    guard(|| {
        let m = get(metric, "metric")?;
        put(out, m.0.sigma(radius_sq)?, "out")
    })
}

/// # Safety
/// `metric` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_metric_sigma_positivity_radius(
    metric: *const ConfgapMetric,
    out: *mut f64,
) -> ConfgapStatus {
    guard(|| {
        let m = get(metric, "metric")?;
        put(out, m.0.sigma_positivity_radius(), "out")
    })
}

/// # Safety
/// `metric` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_metric_distance(metric: *const ConfgapMetric, r: f64, out: *mut f64) -> ConfgapStatus {
    guard(|| {
        let m = get(metric, "metric")?;
        put(out, m.0.conformal_distance(r)?, "out")
    })
}

/// Integrates the graph profile of constant conformal mean curvature `hbar`
/// from `(t = 0, x0, xp0)` to `t_end`.
///
/// # Safety
/// `metric` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn confgap_integrate(
    metric: *const ConfgapMetric,
    hbar: f64,
    x0: f64,
    xp0: f64,
    t_end: f64,
    tol: f64,
    out: *mut *mut ConfgapCurve,
) -> ConfgapStatus {
    guard(|| {
        let m = get(metric, "metric")?;
        let curve = integrate(&m.0, hbar, x0, xp0, t_end, tol)?;
        put_box(out, ConfgapCurve(curve), "out")
    })
}

/// Same as [`confgap_integrate`] but reflects the result through `t = 0`,
/// covering `[-t_end, t_end]`.
///
/// # Safety
/// `metric` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn confgap_integrate_symmetric(
    metric: *const ConfgapMetric,
    hbar: f64,
    x0: f64,
    t_end: f64,
    tol: f64,
    out: *mut *mut ConfgapCurve,
) -> ConfgapStatus {
    guard(|| {
        let m = get(metric, "metric")?;
        let curve = integrate(&m.0, hbar, x0, 0.0, t_end, tol)?.mirrored_even()?;
        put_box(out, ConfgapCurve(curve), "out")
    })
}

/// # Safety
/// `curve` must come from an integration call and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn confgap_curve_free(curve: *mut ConfgapCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// # Safety
/// `curve` must be a live handle; `lo` and `hi` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn confgap_curve_range(curve: *const ConfgapCurve, lo: *mut f64, hi: *mut f64) -> ConfgapStatus {
    guard(|| {
        let c = get(curve, "curve")?;
        let (a, b) = c.0.param_range();
        put(lo, a, "lo")?;
        put(hi, b, "hi")
    })
}

/// # Safety
/// `curve` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_curve_truncation(
    curve: *const ConfgapCurve,
    out: *mut ConfgapTruncation,
) -> ConfgapStatus {
    guard(|| {
        let c = get(curve, "curve")?;
        let t = match c.0.truncation() {
            None => ConfgapTruncation::None,
            Some(Truncation::Axis) => ConfgapTruncation::Axis,
            Some(Truncation::SlopeCap) => ConfgapTruncation::SlopeCap,
            Some(Truncation::Domain) => ConfgapTruncation::Domain,
            Some(Truncation::Event) => ConfgapTruncation::Event,
        };
        put(out, t, "out")
    })
}

/// Dense-output evaluation at parameter `p` inside the curve's range.
///
/// # Safety
/// `curve` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_curve_eval(
    curve: *const ConfgapCurve,
    p: f64,
    out: *mut ConfgapPoint,
) -> ConfgapStatus {
    guard(|| {
        let c = get(curve, "curve")?;
        let st = c.0.eval(p)?;
        let point = ConfgapPoint {
            param: st.param(),
            x: st.x(),
            z: st.z(),
            slope: st.slope_or_angle(),
        };
        put(out, point, "out")
    })
}

/// Checks the gap condition along the curve with equality tolerance `tolerance`.
///
/// # Safety
/// `curve` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_curve_gap_check(
    curve: *const ConfgapCurve,
    tolerance: f64,
    out: *mut ConfgapGapSummary,
) -> ConfgapStatus {
    guard(|| {
        let c = get(curve, "curve")?;
        let report = scan_gap(&c.0, tolerance)?;
        let s = report.summary();
        let summary = ConfgapGapSummary {
            verdict: verdict(s.verdict),
            sample_count: s.sample_count,
            fail_count: s.fails_at.len(),
            equality_count: s.equality_at.len(),
            max_f: s.max_f.unwrap_or(f64::NAN),
            min_lambda: s.min_lambda.unwrap_or(f64::NAN),
        };
        put(out, summary, "out")
    })
}

/// Tabulates the convexity potential on `[0, s_max]` with `n` nodes. Pass a
/// non-positive `s_max` for the default range.
///
/// # Safety
/// `metric` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn confgap_phi_table_new(
    metric: *const ConfgapMetric,
    s_max: f64,
    n: usize,
    out: *mut *mut ConfgapPhiTable,
) -> ConfgapStatus {
    guard(|| {
        let m = get(metric, "metric")?;
        let s_max = if s_max > 0.0 { s_max } else { default_s_max(&m.0) };
        let table = build_phi(&m.0, s_max, n)?;
        put_box(out, ConfgapPhiTable(table), "out")
    })
}

/// # Safety
/// `table` must come from [`confgap_phi_table_new`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn confgap_phi_table_free(table: *mut ConfgapPhiTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Value and first derivative of the potential at `s`.
///
/// # Safety
/// `table` must be a live handle; `phi` and `dphi` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn confgap_phi_table_eval(
    table: *const ConfgapPhiTable,
    s: f64,
    phi: *mut f64,
    dphi: *mut f64,
) -> ConfgapStatus {
    guard(|| {
        let t = get(table, "table")?;
        let v = t.0.phi_at(s)?;
        let d = t.0.dphi_at(s)?;
        put(phi, v, "phi")?;
        put(dphi, d, "dphi")
    })
}

/// Boundary height where the profile through `(0, x0)` meets a sphere orthogonally.
///
/// # Safety
/// `metric` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_find_free_boundary(
    metric: *const ConfgapMetric,
    hbar: f64,
    x0: f64,
    search_lo: f64,
    search_hi: f64,
    tol: f64,
    out: *mut ConfgapRoot,
) -> ConfgapStatus {
    guard(|| {
        let m = get(metric, "metric")?;
        let r = free_boundary_param(&m.0, hbar, x0, (search_lo, search_hi), tol)?;
        put(out, root(&r), "out")
    })
}

/// Waist of the rotationally symmetric shrinking torus; `extra` holds its far intercept.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_find_torus(
    search_lo: f64,
    search_hi: f64,
    tol: f64,
    out: *mut ConfgapRoot,
) -> ConfgapStatus {
    guard(|| {
        let r = angenent_waist((search_lo, search_hi), tol)?;
        put(out, root(&r), "out")
    })
}

/// Shrinker piece through `(0, x0)` cut at a convex boundary and certified against the gap condition.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn confgap_example(x0: f64, tol: f64, margin: f64, out: *mut ConfgapExample) -> ConfgapStatus {
    guard(|| {
        let ex = combined_example_with(x0, tol, margin)?;
        let value = ConfgapExample {
            delta: ex.delta.parameter,
            epsilon: ex.gap.epsilon,
            xi: ex.xi,
            r: ex.r,
            boundary_curvature: ex.boundary_curvature,
            verdict: verdict(ex.report.verdict),
        };
        put(out, value, "out")
    })
}
