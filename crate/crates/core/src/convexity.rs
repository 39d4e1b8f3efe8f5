//! The convexity potential `Φ` and the Hessian of `Ψ = Φ(φ)` on a surface.
//!
//! With `a(t) = e^{2u(t)} t` and `b(t) = σ(t) = 1 + 2u'(t) t`, `Φ` solves
//! `Φ''(a) a' b + Φ'(a) b' = 0`, normalized by `Φ(0) = 0` and `Φ'(0) = 1`:
//! `Φ(s) = ∫_0^s dξ / b(a^{-1}(ξ))`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curvature::{conformal_curvatures, conformal_curvatures_arc, PointGeometry};
use crate::error::{Error, Result};
use crate::gap::hessian_eigen_factors;
use crate::metric::ConformalFactor;
use crate::numerics::interp::MonotoneHermite;
use crate::numerics::quadrature;
use crate::numerics::roots;
use crate::profile::{ProfileCurve, ProfileState};

pub const DEFAULT_GRID: usize = 2048;

/// `a(t) = e^{2u(t)} t`.
pub fn a_of(cf: &ConformalFactor, t: f64) -> f64 {
    (2.0 * cf.u(t)).exp() * t
}

/// `a'(t) = e^{2u(t)} σ(t)`.
pub fn da_of(cf: &ConformalFactor, t: f64) -> f64 {
    (2.0 * cf.u(t)).exp() * cf.sigma_unchecked(t)
}

/// `b'(t) = 2(u''(t) t + u'(t))`.
pub fn db_of(cf: &ConformalFactor, t: f64) -> f64 {
    2.0 * (cf.ddu(t) * t + cf.du(t))
}

/// `φ(x) = g(x, x) = e^{2u(|x|^2)} |x|^2`.
pub fn phi_of_position(cf: &ConformalFactor, radius_sq: f64) -> f64 {
    a_of(cf, radius_sq)
}

/// Largest `t` on which `a` is increasing and σ positive.
fn t_ceiling(cf: &ConformalFactor) -> f64 {
    let r = cf.sigma_positivity_radius();
    r * r
}

/// Largest `s` the potential can be built up to.
pub fn s_ceiling(cf: &ConformalFactor) -> f64 {
    let t = t_ceiling(cf);
    if t.is_finite() && cf.in_domain(t) {
        a_of(cf, t)
    } else if t.is_finite() {
        // domain edge: a grows without bound for the built-in factors
        let probe = t * (1.0 - 1e-12);
        if a_of(cf, probe) > 1e12 {
            f64::INFINITY
        } else {
            a_of(cf, probe)
        }
    } else {
        f64::INFINITY
    }
}

/// `a^{-1}(ξ)` by safeguarded Newton on the increasing branch.
pub fn a_inverse(cf: &ConformalFactor, xi: f64) -> Result<f64> {
    if xi < 0.0 {
        return Err(Error::Precondition(format!(
            "a^-1 needs a nonnegative argument, got {xi}"
        )));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    let cap = t_ceiling(cf);
    let hi = if cap.is_finite() {
        let hi = if cf.in_domain(cap) { cap } else { cap * (1.0 - 1e-12) };
        if a_of(cf, hi) < xi {
            return Err(Error::Precondition(format!(
                "s = {xi} lies beyond the image of a on the sigma-positive range (sup {})",
                a_of(cf, hi)
            )));
        }
        hi
    } else {
        let mut hi = 1.0f64;
        while a_of(cf, hi) < xi {
            hi *= 2.0;
            if !hi.is_finite() || hi > 1e300 {
                return Err(Error::Precondition(format!("could not bracket a^-1({xi})")));
            }
        }
        hi
    };
    let ftol = 1e-12_f64.min(1e-15 * xi.max(1.0));
    roots::safeguarded_newton(|t| (a_of(cf, t) - xi, da_of(cf, t)), 0.0, hi, ftol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    cf: ConformalFactor,
    pub s_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    interp: MonotoneHermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiRow {
    pub s: f64,
    pub phi: f64,
    pub dphi: f64,
}

/// Tabulates `Φ` on the images `s = a(t)` of `n` points of `[0, a^{-1}(s_max)]`,
/// clustered towards both ends.
pub fn build_phi(cf: &ConformalFactor, s_max: f64, n: usize) -> Result<PhiTable> {
    if n < 2 {
        return Err(Error::Precondition(
            "the potential table needs at least two points".into(),
        ));
    }
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::Precondition(format!(
            "s_max must be positive and finite, got {s_max}"
        )));
    }
    let ceiling = s_ceiling(cf);
    if s_max >= ceiling {
        return Err(Error::Precondition(format!(
            "s_max = {s_max} is not below {ceiling}, the image of a where sigma > 0"
        )));
    }
    let t_max = a_inverse(cf, s_max)?;
    let mut t_grid: Vec<f64> = (0..n)
        .map(|i| {
            let v = i as f64 / (n - 1) as f64;
            t_max * v * v * (3.0 - 2.0 * v)
        })
        .collect();
    t_grid[n - 1] = t_max;
    let mut s_grid: Vec<f64> = t_grid.iter().map(|&t| a_of(cf, t)).collect();
    s_grid[n - 1] = s_max;
    let dphi: Vec<f64> = t_grid.iter().map(|&t| 1.0 / cf.sigma_unchecked(t)).collect();
    let mut phi = Vec::with_capacity(n);
    phi.push(0.0);
    let mut failure = None;
    for w in s_grid.windows(2) {
        let integrand = |xi: f64| match a_inverse(cf, xi) {
            Ok(t) => 1.0 / cf.sigma_unchecked(t),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        };
        let piece = quadrature::integrate(integrand, w[0], w[1], 1e-14 * s_max.max(1.0))?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        phi.push(phi.last().expect("seeded") + piece.value);
    }
    let interp = MonotoneHermite::new(s_grid.clone(), phi.clone(), dphi.clone())?;
    Ok(PhiTable {
        cf: cf.clone(),
        s_grid,
        t_grid,
        phi,
        dphi,
        interp,
    })
}

impl PhiTable {
    pub fn metric(&self) -> &ConformalFactor {
        &self.cf
    }

    pub fn s_max(&self) -> f64 {
        *self.s_grid.last().expect("nonempty")
    }

    /// Interpolated `Φ(s)`.
    pub fn phi_at(&self, s: f64) -> Result<f64> {
        self.interp.eval(s)
    }

    /// `Φ'(s) = 1 / b(a^{-1}(s))`, evaluated directly.
    pub fn dphi_at(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        Ok(1.0 / self.cf.sigma_unchecked(a_inverse(&self.cf, s)?))
    }

    /// `Φ''(s) = -Φ' b' / (a' b)` at `t = a^{-1}(s)`.
    pub fn ddphi_at(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        let t = a_inverse(&self.cf, s)?;
        let b = self.cf.sigma_unchecked(t);
        Ok(-(1.0 / b) * db_of(&self.cf, t) / (da_of(&self.cf, t) * b))
    }

    fn check_range(&self, s: f64) -> Result<()> {
        let (lo, hi) = (0.0, self.s_max());
        if s >= lo && s <= hi {
            Ok(())
        } else {
            Err(Error::OutOfTable { value: s, lo, hi })
        }
    }

    pub fn rows(&self) -> Vec<PhiRow> {
        (0..self.s_grid.len())
            .map(|i| PhiRow {
                s: self.s_grid[i],
                phi: self.phi[i],
                dphi: self.dphi[i],
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in self.rows() {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `Ψ = Φ(φ)` at a profile point.
pub fn psi_on_profile(table: &PhiTable, state: &ProfileState) -> Result<f64> {
    table.phi_at(phi_of_position(&table.cf, state.radius_sq()))
}

// Unit tangent (radial, axial), meridian curvature and geometry at a state.
fn frame(cf: &ConformalFactor, state: &ProfileState, second: f64) -> Result<((f64, f64), PointGeometry)> {
    match state {
        ProfileState::Graph(g) => {
            let sq = (1.0 + g.xp * g.xp).sqrt();
            Ok(((g.xp / sq, 1.0 / sq), conformal_curvatures(cf, g, second)?))
        }
        ProfileState::Arclength(a) => Ok(((a.theta.cos(), a.theta.sin()), conformal_curvatures_arc(cf, a, second)?)),
    }
}

/// Diagonal of `Hess φ` on the surface in the (meridian, latitude) unit
/// directions, from the closed form in terms of σ, its gradient and the
/// conformal curvatures. `second` is `x''` (graph) or `dθ/ds` (arclength).
pub fn hessian_phi_point(cf: &ConformalFactor, state: &ProfileState, second: f64) -> Result<(f64, f64)> {
    let ((tr, tz), pg) = frame(cf, state, second)?;
    let rho = pg.radius_sq();
    let c = cf.grad_sigma_coefficient(rho)?;
    let radial = pg.x * tr + pg.z * tz;
    let s = pg.support_conf;
    let sigma = pg.sigma;
    let e2u = (2.0 * cf.u(rho)).exp();
    let meridian = 2.0 * (c * e2u * radial * radial + sigma * sigma + sigma * pg.kbar1 * s);
    let latitude = 2.0 * (sigma * sigma + sigma * pg.kbar2 * s);
    Ok((meridian, latitude))
}

/// Coordinate Hessian of a function `f(t)` on the surface of a graph
/// profile, normalized by the metric: returns
/// `(Hess f(∂t, ∂t) / g_tt, Hess f(∂w, ∂w) / g_ww)`.
///
/// `f'` and `f''` come from central differences; the Christoffel symbols of
/// `e^{2h}((1 + x'^2) dt^2 + x^2 dw^2)` are analytic.
pub fn coordinate_hessian<F>(curve: &ProfileCurve, t: f64, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let st = curve.eval(t)?;
    let ProfileState::Graph(g) = st else {
        return Err(Error::Precondition("coordinate Hessian needs a graph profile".into()));
    };
    let cf = curve.metric();
    let xpp = curve.second_order(&st)?;
    let (x, xp) = (g.x, g.xp);
    let rho = x * x + t * t;
    let scale = t.abs().max(1.0);
    let h1 = f64::EPSILON.cbrt() * scale;
    // second differences need the larger fourth-root step to stay above rounding noise
    let h2 = f64::EPSILON.sqrt().sqrt() * scale;
    let df = (f(t + h1)? - f(t - h1)?) / (2.0 * h1);
    let ddf = (-f(t + 2.0 * h2)? + 16.0 * f(t + h2)? - 30.0 * f(t)? + 16.0 * f(t - h2)? - f(t - 2.0 * h2)?)
        / (12.0 * h2 * h2);
    let e2h = (2.0 * cf.u(rho)).exp();
    let q = 1.0 + xp * xp;
    let h_t = cf.du(rho) * (2.0 * x * xp + 2.0 * t);
    let g_tt = e2h * q;
    let g_ww = e2h * x * x;
    let dg_tt = e2h * (2.0 * h_t * q + 2.0 * xp * xpp);
    let dg_ww = e2h * (2.0 * h_t * x * x + 2.0 * x * xp);
    let gamma_t_tt = dg_tt / (2.0 * g_tt);
    let gamma_t_ww = -dg_ww / (2.0 * g_tt);
    Ok(((ddf - gamma_t_tt * df) / g_tt, (-gamma_t_ww * df) / g_ww))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianSample {
    pub param: f64,
    /// Normalized coordinate Hessian of Ψ, meridian and latitude.
    pub coordinate: (f64, f64),
    /// `2 σ² Φ' λi`.
    pub factored: (f64, f64),
    pub lambda: (f64, f64),
    /// `2 σ² Φ'`, the scale residuals are measured against.
    pub scale: f64,
}

impl HessianSample {
    pub fn residual(&self) -> f64 {
        let d1 = (self.coordinate.0 - self.factored.0).abs();
        let d2 = (self.coordinate.1 - self.factored.1).abs();
        d1.max(d2) / self.scale
    }
}

/// Both sides of `Hess Ψ = 2 σ² Φ' λi` at the dense samples of `curve`
/// that leave room for the difference stencil.
pub fn hessian_samples(table: &PhiTable, curve: &ProfileCurve) -> Result<Vec<HessianSample>> {
    if !matches!(curve.first(), ProfileState::Graph(_)) {
        return Err(Error::Precondition("Hessian verification needs a graph profile".into()));
    }
    if curve.steps() == 0 {
        return Err(Error::DegenerateCurve("profile has no integration steps".into()));
    }
    let cf = curve.metric();
    let (lo, hi) = curve.param_range();
    let psi = |t: f64| curve.eval(t).and_then(|st| psi_on_profile(table, &st));
    let mut out = Vec::new();
    for st in curve.samples(2) {
        let t = st.param();
        let margin = 2.0 * f64::EPSILON.sqrt().sqrt() * t.abs().max(1.0) * 1.01;
        if t - margin < lo || t + margin > hi {
            continue;
        }
        let second = curve.second_order(&st)?;
        let (_, pg) = frame(cf, &st, second)?;
        if pg.sigma <= 0.0 {
            return Err(Error::NonPositiveSigma {
                sigma: pg.sigma,
                radius_sq: pg.radius_sq(),
            });
        }
        let (l1, l2) = hessian_eigen_factors(&pg)?;
        let dphi = table.dphi_at(phi_of_position(cf, pg.radius_sq()))?;
        let scale = 2.0 * pg.sigma * pg.sigma * dphi;
        let coordinate = coordinate_hessian(curve, t, psi)?;
        out.push(HessianSample {
            param: t,
            coordinate,
            factored: (scale * l1, scale * l2),
            lambda: (l1, l2),
            scale,
        });
    }
    if out.is_empty() {
        return Err(Error::DegenerateCurve(
            "profile too short for the difference stencil".into(),
        ));
    }
    Ok(out)
}

/// Largest residual of `Hess Ψ = 2 σ² Φ' λi`, relative to `2 σ² Φ'`.
pub fn verify_hessian_factorization(table: &PhiTable, curve: &ProfileCurve) -> Result<f64> {
    Ok(hessian_samples(table, curve)?
        .iter()
        .map(HessianSample::residual)
        .fold(0.0, f64::max))
}

/// `s_max` used when none is given: the image of `a` at 90% of the
/// σ-positivity radius, or 4 when σ never vanishes and the domain is
/// unbounded.
pub fn default_s_max(cf: &ConformalFactor) -> f64 {
    let r = cf.sigma_positivity_radius();
    if r.is_finite() {
        let t = (0.9 * r) * (0.9 * r);
        a_of(cf, t)
    } else {
        4.0
    }
}
