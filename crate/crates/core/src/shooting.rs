//! Root-finding over profile families: free boundary radii, convex
//! boundaries and gap intervals for shrinkers, and the closed shrinker
//! torus profile.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::curvature::{boundary_geodesic_curvature, profile_circle_curvature};
use crate::error::{Error, Result};
use crate::gap::{gaussian_gap_functional, scan_gap, waist_threshold, GapReport, GapSummary};
use crate::metric::{ConformalFactor, MetricKind};
use crate::numerics::roots::{self, RootResult, RootTolerance};
use crate::profile::{
    integrate_arclength_until, integrate_until, ArcState, GraphState, ProfileCurve, ProfileState, Truncation,
    DEFAULT_TOL,
};

/// Default bracket for the torus waist.
pub const TORUS_BRACKET: (f64, f64) = (0.3, 0.6);
/// Arclength budget for one torus shot.
pub const TORUS_MAX_ARCLENGTH: f64 = 40.0;
/// Grid points used to bracket a sign change before refining.
pub const SEARCH_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingResult {
    pub parameter: f64,
    pub residual: f64,
    pub tol: f64,
    /// Tightest bracket from the root finder that holds `parameter` strictly inside.
    pub bracket: (f64, f64),
    pub history: Vec<(f64, f64)>,
    pub iterations: usize,
    /// `r = sqrt(x^2 + t^2)` at the solution, for boundary searches.
    pub radius: Option<f64>,
    /// Far intercept `x2` of a closed profile.
    pub far_intercept: Option<f64>,
    #[serde(skip)]
    pub curve: ProfileCurve,
}

impl ShootingResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn strict_bracket(r: &RootResult, search: (f64, f64)) -> (f64, f64) {
    r.history
        .iter()
        .rev()
        .find(|&&(lo, hi)| lo < r.root && r.root < hi)
        .copied()
        .unwrap_or(search)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("tolerance must be positive, got {tol}")))
    }
}

fn root_tol(lo: f64, hi: f64) -> RootTolerance {
    RootTolerance::new(4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0), 0.0)
}

// Samples `f` on a uniform grid and Brent-refines the first sign change.
fn first_sign_change<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, n: usize) -> Result<RootResult> {
    let mut samples = Vec::with_capacity(n + 1);
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=n {
        let p = lo + (hi - lo) * k as f64 / n as f64;
        let v = f(p)?;
        samples.push((p, v));
        if let Some((pp, pv)) = prev {
            if v == 0.0 || (v < 0.0) != (pv < 0.0) {
                let mut failure = None;
                let r = roots::brent(
                    |q| {
                        f(q).unwrap_or_else(|e| {
                            failure.get_or_insert(e);
                            f64::NAN
                        })
                    },
                    pp,
                    p,
                    root_tol(pp, p),
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                return r;
            }
        }
        prev = Some((p, v));
    }
    Err(Error::NoRoot { lo, hi, samples })
}

fn graph_at(curve: &ProfileCurve, t: f64) -> Result<GraphState> {
    curve
        .eval(t)?
        .as_graph()
        .copied()
        .ok_or_else(|| Error::Precondition("graph-mode curve expected".into()))
}

/// Parameter `δ > 0` where the profile from `(x0, 0)` meets the sphere
/// through `(x(δ), δ)` orthogonally: `g(δ) = x - x' δ = 0`.
pub fn free_boundary_param(
    cf: &ConformalFactor,
    hbar: f64,
    x0: f64,
    search: (f64, f64),
    tol: f64,
) -> Result<ShootingResult> {
    check_tol(tol)?;
    let (lo, hi) = search;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Precondition(format!(
            "search interval [{lo}, {hi}] must satisfy 0 <= lo < hi"
        )));
    }
    let curve = integrate_until(cf, hbar, x0, 0.0, hi, tol, None)?;
    let reached = curve.param_range().1;
    if reached < hi {
        return Err(Error::Precondition(format!(
            "profile stopped at t = {reached} ({}) before the end of the search interval {hi}",
            curve.truncation().map_or("unknown", Truncation::name)
        )));
    }
    let g = |d: f64| graph_at(&curve, d).map(|s| s.x - s.xp * d);
    let r = first_sign_change(g, lo, hi, 32)?;
    let residual = r.value.abs();
    if residual > tol {
        return Err(Error::ToleranceUnachievable { tol, at: r.root });
    }
    let st = graph_at(&curve, r.root)?;
    Ok(ShootingResult {
        parameter: r.root,
        residual,
        tol,
        bracket: strict_bracket(&r, search),
        history: r.history.clone(),
        iterations: r.iterations,
        radius: Some(st.radius_sq().sqrt()),
        far_intercept: None,
        curve,
    })
}

fn require_gaussian(cf: &ConformalFactor) -> Result<()> {
    if cf.kind() == MetricKind::Gaussian {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "shrinker searches need the gaussian metric, got {}",
            cf.kind().name()
        )))
    }
}

fn require_below_threshold(x0: f64) -> Result<()> {
    let th = waist_threshold();
    if x0 > 0.0 && x0 < th {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "waist x0 = {x0} must lie in (0, sqrt(4 - 2 sqrt 2) = {th})"
        )))
    }
}

// Upper half of the shrinker through `(x0, 0)`, stopped just inside σ = 0.
fn shrinker_half(cf: &ConformalFactor, x0: f64, tol: f64) -> Result<ProfileCurve> {
    let edge = 4.0 * (1.0 - 1e-6);
    let ev = |st: &ProfileState| edge - st.radius_sq();
    integrate_until(cf, 0.0, x0, 0.0, 2.0, tol, Some(&ev))
}

/// Smallest `δ > 0` with `f̄(δ) >= tol` on the shrinker with waist `x0`,
/// integrated at `min(tol, DEFAULT_TOL)`.
pub fn convex_boundary_param(cf: &ConformalFactor, x0: f64, tol: f64) -> Result<ShootingResult> {
    convex_boundary_param_with(cf, x0, tol, tol.min(DEFAULT_TOL))
}

/// Smallest `δ > 0` with `f̄(δ) >= level`, integrating at `tol`.
pub fn convex_boundary_param_with(cf: &ConformalFactor, x0: f64, level: f64, tol: f64) -> Result<ShootingResult> {
    require_gaussian(cf)?;
    require_below_threshold(x0)?;
    check_tol(tol)?;
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::Precondition(format!(
            "curvature level must be positive, got {level}"
        )));
    }
    let curve = shrinker_half(cf, x0, tol)?;
    let end = curve.param_range().1;
    let fbar = |t: f64| profile_circle_curvature(cf, &graph_at(&curve, t)?).map(|v| v - level);
    let r = first_sign_change(fbar, 0.0, end, SEARCH_GRID)?;
    let st = graph_at(&curve, r.root)?;
    Ok(ShootingResult {
        parameter: r.root,
        residual: r.value.abs(),
        tol,
        bracket: strict_bracket(&r, (0.0, end)),
        history: r.history.clone(),
        iterations: r.iterations,
        radius: Some(st.radius_sq().sqrt()),
        far_intercept: None,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalLimit {
    /// `F` reaches `1 + tol` at the endpoint.
    Condition,
    /// The profile (or the region σ > 0) ended first.
    RangeEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapInterval {
    pub x0: f64,
    pub tol: f64,
    /// The interval is `(-epsilon, epsilon)`.
    pub epsilon: f64,
    pub f_at_end: f64,
    pub limit: IntervalLimit,
    pub range_end: f64,
}

/// Largest symmetric interval around the waist on which the shrinker's
/// gap functional stays at most `1 + tol`.
pub fn gap_interval(cf: &ConformalFactor, x0: f64, tol: f64) -> Result<GapInterval> {
    require_gaussian(cf)?;
    require_below_threshold(x0)?;
    check_tol(tol)?;
    let curve = shrinker_half(cf, x0, tol)?;
    let end = curve.param_range().1;
    let excess = |t: f64| gaussian_gap_functional(&graph_at(&curve, t)?).map(|f| f - 1.0 - tol);
    match first_sign_change(excess, 0.0, end, SEARCH_GRID) {
        Ok(r) => Ok(GapInterval {
            x0,
            tol,
            epsilon: r.root,
            f_at_end: r.value + 1.0 + tol,
            limit: IntervalLimit::Condition,
            range_end: end,
        }),
        Err(Error::NoRoot { .. }) => Ok(GapInterval {
            x0,
            tol,
            epsilon: end,
            f_at_end: gaussian_gap_functional(&graph_at(&curve, end)?)?,
            limit: IntervalLimit::RangeEnd,
            range_end: end,
        }),
        Err(e) => Err(e),
    }
}

struct TorusShot {
    z: f64,
    x_far: f64,
    length: f64,
    curve: ProfileCurve,
}

fn torus_shot(cf: &ConformalFactor, x0: f64, tol: f64) -> Result<TorusShot> {
    let start = ArcState {
        s: 0.0,
        x: x0,
        z: 0.0,
        theta: FRAC_PI_2,
    };
    let ev = |st: &ProfileState| st.slope_or_angle() + FRAC_PI_2;
    let curve = integrate_arclength_until(cf, 0.0, start, TORUS_MAX_ARCLENGTH, tol, Some(&ev))?;
    let Some(hit) = curve.event().copied() else {
        let reason = curve.truncation().map_or("arclength budget", Truncation::name);
        return Err(Error::Precondition(format!(
            "shot from x0 = {x0} never turned back parallel to the axis (stopped: {reason})"
        )));
    };
    Ok(TorusShot {
        z: hit.state.z(),
        x_far: hit.state.x(),
        length: hit.param,
        curve,
    })
}

/// Waist `x1` of the closed, non-circular, symmetric shrinker profile:
/// shoot upwards from `(x0, 0)` until the tangent is again parallel to the
/// axis and root-find the height there.
pub fn angenent_waist(search: (f64, f64), tol: f64) -> Result<ShootingResult> {
    check_tol(tol)?;
    let (lo, hi) = search;
    let cyl = 2f64.sqrt();
    if !(lo > 0.0 && hi > lo && hi < cyl) {
        return Err(Error::Precondition(format!(
            "torus bracket [{lo}, {hi}] must lie inside (0, sqrt 2)"
        )));
    }
    let cf = ConformalFactor::gaussian();
    let closure = |x0: f64| {
        let shot = torus_shot(&cf, x0, tol)?;
        // a shot that returns immediately is the cylinder, not a torus
        if shot.length <= 1e-6 || (shot.x_far - x0).abs() <= 1e-6 {
            return Err(Error::DegenerateCurve(format!("closure at x0 = {x0} has zero length")));
        }
        Ok(shot.z)
    };
    let mut failure = None;
    let r = roots::brent(
        |x0| {
            closure(x0).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        lo,
        hi,
        root_tol(lo, hi),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let r = r?;
    let shot = torus_shot(&cf, r.root, tol)?;
    let residual = shot.z.abs();
    if residual > tol {
        return Err(Error::ToleranceUnachievable { tol, at: r.root });
    }
    if shot.x_far <= cyl {
        return Err(Error::DegenerateCurve(format!(
            "far intercept {} does not lie beyond the cylinder radius",
            shot.x_far
        )));
    }
    Ok(ShootingResult {
        parameter: r.root,
        residual,
        tol,
        bracket: strict_bracket(&r, search),
        history: r.history.clone(),
        iterations: r.iterations,
        radius: None,
        far_intercept: Some(shot.x_far),
        curve: shot.curve,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedExample {
    pub x0: f64,
    pub delta: ShootingResult,
    pub gap: GapInterval,
    pub xi: f64,
    pub r: f64,
    /// `f̄(ξ)` of the boundary circle at `t = ξ`.
    pub boundary_curvature: f64,
    /// Curvature of the same circle in the sphere of radius `r`, had it met it orthogonally.
    pub sphere_boundary_curvature: f64,
    pub curve: ProfileCurve,
    pub report: GapReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinedSummary {
    pub x0: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub epsilon_limit: IntervalLimit,
    pub xi: f64,
    pub r: f64,
    pub boundary_curvature: f64,
    pub sphere_boundary_curvature: f64,
    pub gap: GapSummary,
}

impl CombinedExample {
    pub fn summary(&self) -> CombinedSummary {
        CombinedSummary {
            x0: self.x0,
            delta: self.delta.parameter,
            epsilon: self.gap.epsilon,
            epsilon_limit: self.gap.limit,
            xi: self.xi,
            r: self.r,
            boundary_curvature: self.boundary_curvature,
            sphere_boundary_curvature: self.sphere_boundary_curvature,
            gap: self.report.summary(),
        }
    }
}

/// The shrinker piece over `[-ξ, ξ]`, `ξ = min(δ, ε)`, with its gap report
/// and boundary curvature.
pub fn combined_example(x0: f64) -> Result<CombinedExample> {
    combined_example_with(x0, DEFAULT_TOL, DEFAULT_TOL)
}

/// [`combined_example`] with an explicit tolerance and the level `margin`
/// that `f̄(δ)` must reach.
pub fn combined_example_with(x0: f64, tol: f64, margin: f64) -> Result<CombinedExample> {
    let cf = ConformalFactor::gaussian();
    let delta = convex_boundary_param_with(&cf, x0, margin, tol)?;
    let gap = gap_interval(&cf, x0, tol)?;
    let xi = delta.parameter.min(gap.epsilon);
    let half = integrate_until(&cf, 0.0, x0, 0.0, xi, tol, None)?;
    if half.param_range().1 < xi {
        return Err(Error::DegenerateCurve(format!("shrinker stopped before t = {xi}")));
    }
    let curve = half.mirrored_even()?;
    let end = graph_at(&curve, xi)?;
    let r = end.radius_sq().sqrt();
    let boundary_curvature = profile_circle_curvature(&cf, &end)?;
    let report = scan_gap(&curve, tol)?;
    Ok(CombinedExample {
        x0,
        delta,
        gap,
        xi,
        r,
        boundary_curvature,
        sphere_boundary_curvature: boundary_geodesic_curvature(&cf, r)?,
        curve,
        report,
    })
}
