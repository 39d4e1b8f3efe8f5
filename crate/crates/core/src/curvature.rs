//! Pointwise curvature of a surface of revolution, Euclidean and conformal.
//!
//! The unit normal is `N = (-1, x') / sqrt(1 + x'^2)` in (radial, axial)
//! components, pointing towards the axis for a graph profile. In arclength
//! form this is `(-sin θ, cos θ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::profile::{ArcState, GraphState, ProfileCurve, ProfileState};

/// Everything the gap and convexity checks need at one profile point.
///
/// CSV column order is the field order below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointGeometry {
    pub param: f64,
    pub x: f64,
    pub z: f64,
    /// Meridian curvature.
    pub k1: f64,
    /// Curvature along the latitude circle.
    pub k2: f64,
    pub kbar1: f64,
    pub kbar2: f64,
    /// `kbar1 + kbar2`.
    pub hbar: f64,
    /// `<x, N>`.
    pub support_euclid: f64,
    /// `g(x, N)` with the conformal unit normal.
    pub support_conf: f64,
    pub sigma: f64,
    /// Squared norm of the traceless second fundamental form, `(kbar1 - kbar2)^2 / 2`.
    pub traceless_sq: f64,
}

impl PointGeometry {
    pub fn radius_sq(&self) -> f64 {
        self.x * self.x + self.z * self.z
    }
}

fn check_x(x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::SingularAxis { x })
    }
}

/// Principal curvatures `(k1, k2)` of the graph profile in the flat metric.
pub fn euclidean_curvatures(state: &GraphState, xpp: f64) -> Result<(f64, f64)> {
    check_x(state.x)?;
    let q = 1.0 + state.xp * state.xp;
    let sq = q.sqrt();
    Ok((-xpp / (q * sq), 1.0 / (state.x * sq)))
}

// (sin θ, cos θ) is the unit tangent in (axial, radial) order, k1 = dθ/ds.
fn from_frame(cf: &ConformalFactor, param: f64, x: f64, z: f64, sin: f64, cos: f64, k1: f64) -> Result<PointGeometry> {
    check_x(x)?;
    let rho = x * x + z * z;
    cf.check_domain(rho)?;
    let k2 = sin / x;
    let support = z * cos - x * sin;
    let u = cf.u(rho);
    let du = cf.du(rho);
    let shrink = (-u).exp();
    let kbar1 = shrink * (k1 - 2.0 * du * support);
    let kbar2 = shrink * (k2 - 2.0 * du * support);
    let gap = kbar1 - kbar2;
    Ok(PointGeometry {
        param,
        x,
        z,
        k1,
        k2,
        kbar1,
        kbar2,
        hbar: kbar1 + kbar2,
        support_euclid: support,
        support_conf: u.exp() * support,
        sigma: cf.sigma_unchecked(rho),
        traceless_sq: 0.5 * gap * gap,
    })
}

/// Euclidean and conformal curvature data at a graph point with second
/// derivative `xpp`.
pub fn conformal_curvatures(cf: &ConformalFactor, state: &GraphState, xpp: f64) -> Result<PointGeometry> {
    check_x(state.x)?;
    let q = 1.0 + state.xp * state.xp;
    let sq = q.sqrt();
    let k1 = -xpp / (q * sq);
    from_frame(cf, state.t, state.x, state.t, 1.0 / sq, state.xp / sq, k1)
}

/// Same as [`conformal_curvatures`] for an arclength point with `dθ/ds = kappa`.
pub fn conformal_curvatures_arc(cf: &ConformalFactor, state: &ArcState, kappa: f64) -> Result<PointGeometry> {
    let (sin, cos) = state.theta.sin_cos();
    from_frame(cf, state.s, state.x, state.z, sin, cos, kappa)
}

/// Geometry at a point of `curve`, with the second-order term taken from
/// the curve's own equation.
pub fn geometry_on(curve: &ProfileCurve, state: &ProfileState) -> Result<PointGeometry> {
    let second = curve.second_order(state)?;
    match state {
        ProfileState::Graph(g) => conformal_curvatures(curve.metric(), g, second),
        ProfileState::Arclength(a) => conformal_curvatures_arc(curve.metric(), a, second),
    }
}

/// Conformal geodesic curvature of the boundary of a surface meeting the
/// sphere of Euclidean radius `r` orthogonally.
pub fn boundary_geodesic_curvature(cf: &ConformalFactor, r: f64) -> Result<f64> {
    let limit = cf.sigma_positivity_radius();
    if !(r > 0.0 && r < limit) {
        return Err(Error::Precondition(format!(
            "boundary radius {r} must lie in (0, {limit}) where sigma is positive"
        )));
    }
    let t = r * r;
    Ok(cf.sigma_unchecked(t) / (cf.scale(t) * r))
}

/// Conformal geodesic curvature of the latitude circle at `state`, as a
/// boundary of the part of the surface with smaller `t`. The part with
/// larger `t` sees the opposite sign.
pub fn profile_circle_curvature(cf: &ConformalFactor, state: &GraphState) -> Result<f64> {
    let GraphState { t, x, xp } = *state;
    check_x(x)?;
    let rho = x * x + t * t;
    cf.check_domain(rho)?;
    let sq = (1.0 + xp * xp).sqrt();
    let flat = xp / (x * sq);
    Ok((-cf.u(rho)).exp() * (flat + 2.0 * cf.du(rho) * (x * xp + t) / sq))
}
