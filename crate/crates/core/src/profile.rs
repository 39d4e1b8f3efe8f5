//! Profile curves of rotationally symmetric surfaces with constant
//! conformal mean curvature.
//!
//! The surface is `X(t, θ) = (x(t) cos θ, x(t) sin θ, t)`. In graph mode the
//! profile is `x` as a function of the axial coordinate `t`; in arclength
//! mode it is `(x(s), z(s))` with tangent angle `θ(s)` measured from the
//! radial direction, so closed profiles with vertical tangents can be
//! followed.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{ConformalFactor, MetricSpec};
use crate::numerics::ode::{self, DenseSegment, OdeSystem, StepOptions, StopReason, Trajectory};
use crate::numerics::roots::{self, RootTolerance};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Graph-mode integration stops once `|x'|` exceeds this.
pub const SLOPE_CAP: f64 = 1e6;
/// Profiles closer than this to the rotation axis count as collisions.
pub const AXIS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Graph,
    Arclength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Axis,
    SlopeCap,
    Domain,
    /// A caller-supplied stop event fired.
    Event,
}

impl Truncation {
    pub fn name(self) -> &'static str {
        match self {
            Truncation::Axis => "axis",
            Truncation::SlopeCap => "slope_cap",
            Truncation::Domain => "domain",
            Truncation::Event => "event",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphState {
    pub t: f64,
    pub x: f64,
    pub xp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcState {
    pub s: f64,
    pub x: f64,
    pub z: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ProfileState {
    Graph(GraphState),
    Arclength(ArcState),
}

impl GraphState {
    pub fn new(t: f64, x: f64, xp: f64) -> Self {
        GraphState { t, x, xp }
    }

    pub fn radius_sq(&self) -> f64 {
        self.x * self.x + self.t * self.t
    }

    /// Same point with arclength parameter `s`, tangent oriented towards
    /// increasing `t`.
    pub fn to_arc(&self, s: f64) -> ArcState {
        ArcState {
            s,
            x: self.x,
            z: self.t,
            theta: 1f64.atan2(self.xp),
        }
    }
}

impl ArcState {
    pub fn radius_sq(&self) -> f64 {
        self.x * self.x + self.z * self.z
    }

    /// Graph-mode view of this point; `None` where the tangent does not
    /// point towards increasing `z`.
    pub fn to_graph(&self) -> Option<GraphState> {
        let (sin, cos) = self.theta.sin_cos();
        (sin > 0.0).then(|| GraphState::new(self.z, self.x, cos / sin))
    }
}

impl ProfileState {
    pub fn param(&self) -> f64 {
        match self {
            ProfileState::Graph(g) => g.t,
            ProfileState::Arclength(a) => a.s,
        }
    }

    pub fn x(&self) -> f64 {
        match self {
            ProfileState::Graph(g) => g.x,
            ProfileState::Arclength(a) => a.x,
        }
    }

    /// Axial coordinate.
    pub fn z(&self) -> f64 {
        match self {
            ProfileState::Graph(g) => g.t,
            ProfileState::Arclength(a) => a.z,
        }
    }

    /// `x'` in graph mode, `θ` in arclength mode.
    pub fn slope_or_angle(&self) -> f64 {
        match self {
            ProfileState::Graph(g) => g.xp,
            ProfileState::Arclength(a) => a.theta,
        }
    }

    pub fn radius_sq(&self) -> f64 {
        let (x, z) = (self.x(), self.z());
        x * x + z * z
    }

    pub fn as_graph(&self) -> Option<&GraphState> {
        match self {
            ProfileState::Graph(g) => Some(g),
            ProfileState::Arclength(_) => None,
        }
    }
}

fn check_point(cf: &ConformalFactor, x: f64, z: f64) -> Result<()> {
    if !(x > 0.0) {
        return Err(Error::SingularAxis { x });
    }
    cf.check_domain(x * x + z * z)
}

/// `x''` solved from the constant mean curvature equation of a graph profile.
pub fn cmc_rhs(cf: &ConformalFactor, hbar: f64, state: &GraphState) -> Result<f64> {
    check_point(cf, state.x, state.t)?;
    Ok(cmc_rhs_unchecked(cf, hbar, state.t, state.x, state.xp))
}

fn cmc_rhs_unchecked(cf: &ConformalFactor, hbar: f64, t: f64, x: f64, xp: f64) -> f64 {
    let rho = x * x + t * t;
    let q = 1.0 + xp * xp;
    q / x + 4.0 * cf.du(rho) * (x - xp * t) * q - hbar * cf.scale(rho) * q * q.sqrt()
}

/// Conformal mean curvature of the surface through `state` whose profile
/// has second derivative `xpp`. Inverse of [`cmc_rhs`].
pub fn graph_mean_curvature(cf: &ConformalFactor, state: &GraphState, xpp: f64) -> Result<f64> {
    check_point(cf, state.x, state.t)?;
    let GraphState { t, x, xp } = *state;
    let rho = x * x + t * t;
    let q = 1.0 + xp * xp;
    let sq = q.sqrt();
    Ok((-cf.u(rho)).exp() * ((q - xpp * x) / (x * q * sq) + 4.0 * cf.du(rho) * (x - xp * t) / sq))
}

/// Self-shrinker profile equation, `x''` for the metric `e^{-|x|^2/4}`.
pub fn shrinker_rhs(state: &GraphState) -> Result<f64> {
    let GraphState { t, x, xp } = *state;
    if !(x > 0.0) {
        return Err(Error::SingularAxis { x });
    }
    Ok((1.0 + xp * xp) * (1.0 / x - 0.5 * (x - xp * t)))
}

/// `dθ/ds` of an arclength profile.
pub fn arc_curvature(cf: &ConformalFactor, hbar: f64, state: &ArcState) -> Result<f64> {
    check_point(cf, state.x, state.z)?;
    Ok(arc_curvature_unchecked(cf, hbar, state.x, state.z, state.theta))
}

fn arc_curvature_unchecked(cf: &ConformalFactor, hbar: f64, x: f64, z: f64, theta: f64) -> f64 {
    let rho = x * x + z * z;
    let (sin, cos) = theta.sin_cos();
    hbar * cf.scale(rho) - sin / x + 4.0 * cf.du(rho) * (z * cos - x * sin)
}

struct GraphSystem<'a> {
    cf: &'a ConformalFactor,
    hbar: f64,
}

impl OdeSystem<2> for GraphSystem<'_> {
    fn rhs(&self, t: f64, y: &[f64; 2]) -> Option<[f64; 2]> {
        let [x, xp] = *y;
        if !(x > 0.0) || !self.cf.in_domain(x * x + t * t) {
            return None;
        }
        let xpp = cmc_rhs_unchecked(self.cf, self.hbar, t, x, xp);
        xpp.is_finite().then_some([xp, xpp])
    }
}

struct ArcSystem<'a> {
    cf: &'a ConformalFactor,
    hbar: f64,
}

impl OdeSystem<3> for ArcSystem<'_> {
    fn rhs(&self, _s: f64, y: &[f64; 3]) -> Option<[f64; 3]> {
        let [x, z, theta] = *y;
        if !(x > 0.0) || !self.cf.in_domain(x * x + z * z) {
            return None;
        }
        let k = arc_curvature_unchecked(self.cf, self.hbar, x, z, theta);
        k.is_finite().then_some([theta.cos(), theta.sin(), k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Path {
    Graph(Trajectory<2>),
    Arclength(Trajectory<3>),
}

/// A located stop event: parameter and state where the event function
/// changed sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventHit {
    pub param: f64,
    pub state: ProfileState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    metric: ConformalFactor,
    hbar: f64,
    tol: f64,
    truncation: Option<Truncation>,
    event: Option<EventHit>,
    path: Path,
}

fn graph_state(t: f64, y: &[f64; 2]) -> ProfileState {
    ProfileState::Graph(GraphState::new(t, y[0], y[1]))
}

fn arc_state(s: f64, y: &[f64; 3]) -> ProfileState {
    ProfileState::Arclength(ArcState {
        s,
        x: y[0],
        z: y[1],
        theta: y[2],
    })
}

// Index of the step containing `p` in a monotone node list.
fn locate(ts: &[f64], p: f64) -> Option<usize> {
    let n = ts.len();
    if n < 2 {
        return (n == 1 && ts[0] == p).then_some(0);
    }
    let ascending = ts[n - 1] > ts[0];
    let (lo, hi) = if ascending {
        (ts[0], ts[n - 1])
    } else {
        (ts[n - 1], ts[0])
    };
    if !(p >= lo && p <= hi) {
        return None;
    }
    let i = if ascending {
        ts.partition_point(|&v| v <= p)
    } else {
        ts.partition_point(|&v| v >= p)
    };
    Some(i.saturating_sub(1).min(n - 2))
}

fn eval_path<const N: usize>(traj: &Trajectory<N>, p: f64) -> Option<[f64; N]> {
    let i = locate(&traj.ts, p)?;
    if traj.segments.is_empty() {
        return Some(traj.ys[0]);
    }
    if p == traj.ts[i] {
        return Some(traj.ys[i]);
    }
    if p == traj.ts[i + 1] {
        return Some(traj.ys[i + 1]);
    }
    Some(traj.segments[i].eval(p))
}

fn derivative_path<const N: usize>(traj: &Trajectory<N>, p: f64) -> Option<[f64; N]> {
    let i = locate(&traj.ts, p)?;
    traj.segments.get(i).map(|seg| seg.derivative(p))
}

fn sample_path<const N: usize>(traj: &Trajectory<N>, per_step: usize, out: &mut Vec<(f64, [f64; N])>) {
    out.push((traj.ts[0], traj.ys[0]));
    for (i, seg) in traj.segments.iter().enumerate() {
        let (a, b) = (traj.ts[i], traj.ts[i + 1]);
        for k in 1..per_step {
            let p = a + (b - a) * k as f64 / per_step as f64;
            out.push((p, seg.eval(p)));
        }
        out.push((b, traj.ys[i + 1]));
    }
}

/// One CSV/JSON row of a serialized profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub param: f64,
    pub x: f64,
    pub xp_or_theta: f64,
    pub z: f64,
}

impl From<&ProfileState> for ProfileRow {
    fn from(s: &ProfileState) -> Self {
        ProfileRow {
            param: s.param(),
            x: s.x(),
            xp_or_theta: s.slope_or_angle(),
            z: s.z(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub mode: Mode,
    pub metric: MetricSpec,
    pub hbar: f64,
    pub tol: f64,
    pub truncation: Option<Truncation>,
    pub states: Vec<ProfileRow>,
}

impl ProfileCurve {
    pub fn mode(&self) -> Mode {
        match self.path {
            Path::Graph(_) => Mode::Graph,
            Path::Arclength(_) => Mode::Arclength,
        }
    }

    pub fn metric(&self) -> &ConformalFactor {
        &self.metric
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn truncation(&self) -> Option<Truncation> {
        self.truncation
    }

    pub fn event(&self) -> Option<&EventHit> {
        self.event.as_ref()
    }

    fn ts(&self) -> &[f64] {
        match &self.path {
            Path::Graph(tr) => &tr.ts,
            Path::Arclength(tr) => &tr.ts,
        }
    }

    pub fn len(&self) -> usize {
        self.ts().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of accepted integration steps.
    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    /// First and last parameter, in traversal order.
    pub fn endpoints(&self) -> (f64, f64) {
        let ts = self.ts();
        (ts[0], ts[ts.len() - 1])
    }

    /// Parameter range as `(min, max)`.
    pub fn param_range(&self) -> (f64, f64) {
        let (a, b) = self.endpoints();
        (a.min(b), a.max(b))
    }

    /// States at the accepted integration steps.
    pub fn states(&self) -> Vec<ProfileState> {
        match &self.path {
            Path::Graph(tr) => tr.ts.iter().zip(&tr.ys).map(|(&t, y)| graph_state(t, y)).collect(),
            Path::Arclength(tr) => tr.ts.iter().zip(&tr.ys).map(|(&s, y)| arc_state(s, y)).collect(),
        }
    }

    pub fn first(&self) -> ProfileState {
        self.states()[0]
    }

    pub fn last(&self) -> ProfileState {
        match &self.path {
            Path::Graph(tr) => graph_state(tr.last_t(), &tr.last_y()),
            Path::Arclength(tr) => arc_state(tr.last_t(), &tr.last_y()),
        }
    }

    /// Dense-output state at parameter `p`.
    pub fn eval(&self, p: f64) -> Result<ProfileState> {
        let found = match &self.path {
            Path::Graph(tr) => eval_path(tr, p).map(|y| graph_state(p, &y)),
            Path::Arclength(tr) => eval_path(tr, p).map(|y| arc_state(p, &y)),
        };
        found.ok_or_else(|| {
            let (lo, hi) = self.param_range();
            Error::OutOfTable { value: p, lo, hi }
        })
    }

    /// Step nodes plus `per_step - 1` dense points inside every step, in
    /// traversal order.
    pub fn samples(&self, per_step: usize) -> Vec<ProfileState> {
        let per_step = per_step.max(1);
        match &self.path {
            Path::Graph(tr) => {
                let mut v = Vec::new();
                sample_path(tr, per_step, &mut v);
                v.iter().map(|(t, y)| graph_state(*t, y)).collect()
            }
            Path::Arclength(tr) => {
                let mut v = Vec::new();
                sample_path(tr, per_step, &mut v);
                v.iter().map(|(s, y)| arc_state(*s, y)).collect()
            }
        }
    }

    /// `x''` (graph mode) or `dθ/ds` (arclength mode) from the equation.
    pub fn second_order(&self, state: &ProfileState) -> Result<f64> {
        match state {
            ProfileState::Graph(g) => cmc_rhs(&self.metric, self.hbar, g),
            ProfileState::Arclength(a) => arc_curvature(&self.metric, self.hbar, a),
        }
    }

    /// Derivative of the interpolant's slope component at `p`: `x''` from
    /// the dense output rather than from the equation.
    pub fn interpolated_second_order(&self, p: f64) -> Result<f64> {
        let found = match &self.path {
            Path::Graph(tr) => derivative_path(tr, p).map(|d| d[1]),
            Path::Arclength(tr) => derivative_path(tr, p).map(|d| d[2]),
        };
        found.ok_or_else(|| {
            let (lo, hi) = self.param_range();
            Error::OutOfTable { value: p, lo, hi }
        })
    }

    /// Even extension `x(-t) = x(t)` of a graph curve that starts at `t = 0`
    /// with `x'(0) = 0` and runs towards positive `t`.
    pub fn mirrored_even(&self) -> Result<ProfileCurve> {
        let Path::Graph(tr) = &self.path else {
            return Err(Error::Precondition("only graph profiles can be mirrored".into()));
        };
        if tr.ts[0] != 0.0 || tr.ys[0][1] != 0.0 {
            return Err(Error::Precondition(
                "mirroring needs a start at t = 0 with x'(0) = 0".into(),
            ));
        }
        if tr.ts.len() > 1 && tr.ts[1] < 0.0 {
            return Err(Error::Precondition(
                "mirroring needs a curve running towards positive t".into(),
            ));
        }
        let signs = [1.0, -1.0];
        let n = tr.ts.len();
        let mut ts = Vec::with_capacity(2 * n - 1);
        let mut ys = Vec::with_capacity(2 * n - 1);
        for i in (1..n).rev() {
            ts.push(-tr.ts[i]);
            ys.push([tr.ys[i][0], -tr.ys[i][1]]);
        }
        ts.extend_from_slice(&tr.ts);
        ys.extend_from_slice(&tr.ys);
        let segments: Vec<DenseSegment<2>> = tr
            .segments
            .iter()
            .rev()
            .map(|s| s.mirrored(&signs))
            .chain(tr.segments.iter().copied())
            .collect();
        Ok(ProfileCurve {
            path: Path::Graph(Trajectory { ys, ts, segments }),
            ..self.clone()
        })
    }

    /// Graph-mode views of the stored arclength states.
    pub fn to_graph_states(&self) -> Result<Vec<GraphState>> {
        self.states()
            .iter()
            .map(|s| match s {
                ProfileState::Graph(g) => Ok(*g),
                ProfileState::Arclength(a) => a.to_graph().ok_or_else(|| {
                    Error::DegenerateCurve(format!("tangent not transverse to the axis at s = {}", a.s))
                }),
            })
            .collect()
    }

    pub fn record(&self) -> ProfileRecord {
        ProfileRecord {
            mode: self.mode(),
            metric: self.metric.spec(),
            hbar: self.hbar,
            tol: self.tol,
            truncation: self.truncation,
            states: self.states().iter().map(ProfileRow::from).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in self.states() {
            out.serialize(ProfileRow::from(&s))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn validate_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("tolerance must be positive, got {tol}")))
    }
}

fn near_domain_edge(cf: &ConformalFactor, radius_sq: f64, rel: f64) -> bool {
    let lim = cf.domain_limit_sq();
    lim.is_finite() && radius_sq >= lim * (1.0 - rel)
}

/// Event function on states; integration stops where it changes sign.
pub type EventFn<'a> = &'a dyn Fn(&ProfileState) -> f64;

struct Run<const N: usize> {
    traj: Trajectory<N>,
    truncation: Option<Truncation>,
    event: Option<EventHit>,
}

#[allow(clippy::too_many_arguments)]
fn run<S, const N: usize>(
    sys: &S,
    p0: f64,
    y0: [f64; N],
    p_end: f64,
    tol: f64,
    to_state: fn(f64, &[f64; N]) -> ProfileState,
    classify: &dyn Fn(&ProfileState) -> Option<Truncation>,
    event: Option<EventFn>,
    stalled: &dyn Fn(&ProfileState) -> Option<Truncation>,
) -> Result<Run<N>>
where
    S: OdeSystem<N>,
{
    let opts = StepOptions::with_tol(tol);
    let mut g_prev = event.map(|g| g(&to_state(p0, &y0)));
    let mut hit: Option<(DenseSegment<N>, f64, f64)> = None;
    let mut truncation = None;
    let (mut traj, stop) = ode::solve(sys, p0, y0, p_end, &opts, |seg, p, y| {
        let st = to_state(p, y);
        if let (Some(g), Some(gp)) = (event, g_prev) {
            let gv = g(&st);
            if gv == 0.0 || (gv < 0.0) != (gp < 0.0) {
                hit = Some((*seg, gp, gv));
                return false;
            }
            g_prev = Some(gv);
        }
        if let Some(reason) = classify(&st) {
            truncation = Some(reason);
            return false;
        }
        true
    });
    let mut event_hit = None;
    match stop {
        StopReason::SingularStart => {
            return Err(Error::Precondition(format!(
                "equation is singular at the initial point {y0:?}"
            )));
        }
        StopReason::StepUnderflow { at } | StopReason::MaxSteps { at } => {
            let last = to_state(traj.last_t(), &traj.last_y());
            match stalled(&last) {
                Some(reason) => truncation = Some(reason),
                None => return Err(Error::ToleranceUnachievable { tol, at }),
            }
        }
        StopReason::Observer | StopReason::Completed => {}
    }
    if let (Some((seg, _, gv)), Some(g)) = (hit, event) {
        let (a, b) = (seg.t0, seg.t1());
        let p = if gv == 0.0 {
            b
        } else {
            let f = |p: f64| g(&to_state(p, &seg.eval(p)));
            roots::brent(f, a, b, RootTolerance::new(4.0 * f64::EPSILON * b.abs().max(1.0), 0.0))?.root
        };
        let y = if p == b { traj.last_y() } else { seg.eval(p) };
        *traj.ts.last_mut().expect("nonempty") = p;
        *traj.ys.last_mut().expect("nonempty") = y;
        truncation = Some(Truncation::Event);
        event_hit = Some(EventHit {
            param: p,
            state: to_state(p, &y),
        });
    }
    Ok(Run {
        traj,
        truncation,
        event: event_hit,
    })
}

/// Integrates the graph-mode profile from `(0, x0, xp0)` to `t_end` (which
/// may be negative).
pub fn integrate(cf: &ConformalFactor, hbar: f64, x0: f64, xp0: f64, t_end: f64, tol: f64) -> Result<ProfileCurve> {
    integrate_until(cf, hbar, x0, xp0, t_end, tol, None)
}

/// [`integrate`] with an optional stop event.
pub fn integrate_until(
    cf: &ConformalFactor,
    hbar: f64,
    x0: f64,
    xp0: f64,
    t_end: f64,
    tol: f64,
    event: Option<EventFn>,
) -> Result<ProfileCurve> {
    if !(x0 > 0.0) {
        return Err(Error::SingularAxis { x: x0 });
    }
    validate_tol(tol)?;
    if !xp0.is_finite() || !t_end.is_finite() || !hbar.is_finite() {
        return Err(Error::Precondition("initial data and span must be finite".into()));
    }
    cf.check_domain(x0 * x0)?;
    let sys = GraphSystem { cf, hbar };
    let classify = |st: &ProfileState| {
        let (x, xp) = (st.x(), st.slope_or_angle());
        if x <= AXIS_EPS {
            Some(Truncation::Axis)
        } else if xp.abs() > SLOPE_CAP {
            Some(Truncation::SlopeCap)
        } else if near_domain_edge(cf, st.radius_sq(), 1e-12) {
            Some(Truncation::Domain)
        } else {
            None
        }
    };
    let stalled = |st: &ProfileState| {
        if near_domain_edge(cf, st.radius_sq(), 1e-6) {
            Some(Truncation::Domain)
        } else if st.x() < 1e-6 {
            Some(Truncation::Axis)
        } else if st.slope_or_angle().abs() > 1e3 {
            Some(Truncation::SlopeCap)
        } else {
            None
        }
    };
    let r = run(
        &sys,
        0.0,
        [x0, xp0],
        t_end,
        tol,
        graph_state,
        &classify,
        event,
        &stalled,
    )?;
    Ok(ProfileCurve {
        metric: cf.clone(),
        hbar,
        tol,
        truncation: r.truncation,
        event: r.event,
        path: Path::Graph(r.traj),
    })
}

/// Integrates the arclength-mode profile from `start` for arclength `max_s`.
pub fn integrate_arclength(
    cf: &ConformalFactor,
    hbar: f64,
    start: ArcState,
    max_s: f64,
    tol: f64,
) -> Result<ProfileCurve> {
    integrate_arclength_until(cf, hbar, start, max_s, tol, None)
}

/// [`integrate_arclength`] with an optional stop event.
pub fn integrate_arclength_until(
    cf: &ConformalFactor,
    hbar: f64,
    start: ArcState,
    max_s: f64,
    tol: f64,
    event: Option<EventFn>,
) -> Result<ProfileCurve> {
    if !(start.x > 0.0) {
        return Err(Error::SingularAxis { x: start.x });
    }
    validate_tol(tol)?;
    if !start.z.is_finite() || !start.theta.is_finite() || !max_s.is_finite() || !hbar.is_finite() {
        return Err(Error::Precondition("initial data and length must be finite".into()));
    }
    cf.check_domain(start.radius_sq())?;
    let sys = ArcSystem { cf, hbar };
    let classify = |st: &ProfileState| {
        if st.x() <= AXIS_EPS {
            Some(Truncation::Axis)
        } else if near_domain_edge(cf, st.radius_sq(), 1e-12) {
            Some(Truncation::Domain)
        } else {
            None
        }
    };
    let stalled = |st: &ProfileState| {
        if near_domain_edge(cf, st.radius_sq(), 1e-6) {
            Some(Truncation::Domain)
        } else if st.x() < 1e-6 {
            Some(Truncation::Axis)
        } else {
            None
        }
    };
    let y0 = [start.x, start.z, start.theta];
    let r = run(
        &sys,
        start.s,
        y0,
        start.s + max_s,
        tol,
        arc_state,
        &classify,
        event,
        &stalled,
    )?;
    Ok(ProfileCurve {
        metric: cf.clone(),
        hbar,
        tol,
        truncation: r.truncation,
        event: r.event,
        path: Path::Arclength(r.traj),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn rhs_examples() {
        let e = ConformalFactor::euclidean();
        let g = ConformalFactor::gaussian();
        assert_eq!(cmc_rhs(&e, 0.0, &GraphState::new(0.0, 1.0, 0.0)).unwrap(), 1.0);
        assert!((cmc_rhs(&g, 0.0, &GraphState::new(0.0, 0.5, 0.0)).unwrap() - 1.75).abs() < 1e-15);
        for t in [0.3, 1.0] {
            let v = cmc_rhs(&e, 0.0, &GraphState::new(t, t.cosh(), t.sinh())).unwrap();
            assert!(rel(v, t.cosh()) < 1e-14);
        }
        assert!(shrinker_rhs(&GraphState::new(0.0, 2f64.sqrt(), 0.0)).unwrap().abs() < 1e-15);
        assert!((shrinker_rhs(&GraphState::new(0.0, 0.5, 0.0)).unwrap() - 1.75).abs() < 1e-15);
    }

    #[test]
    fn rhs_rejects_axis_and_domain() {
        let h = ConformalFactor::hyperbolic();
        assert!(matches!(
            cmc_rhs(&h, 0.0, &GraphState::new(0.0, 0.0, 0.0)),
            Err(Error::SingularAxis { .. })
        ));
        assert!(matches!(
            cmc_rhs(&h, 0.0, &GraphState::new(0.9, 0.5, 0.0)),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            shrinker_rhs(&GraphState::new(0.0, -1.0, 0.0)),
            Err(Error::SingularAxis { .. })
        ));
    }

    #[test]
    fn shrinker_matches_gaussian_cmc() {
        let g = ConformalFactor::gaussian();
        for i in 0..20 {
            let x0 = 0.05 + 1.4 * (i as f64 + 0.5) / 20.0;
            let st = GraphState::new(0.0, x0, 0.0);
            assert!(rel(shrinker_rhs(&st).unwrap(), cmc_rhs(&g, 0.0, &st).unwrap()) < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn forward_residual_inverts_rhs(
            which in 0usize..4,
            hbar in -3.0f64..3.0,
            t in -0.6f64..0.6,
            x in 0.05f64..0.7,
            xp in -5.0f64..5.0,
        ) {
            let cf = [
                ConformalFactor::euclidean(),
                ConformalFactor::hyperbolic(),
                ConformalFactor::spherical(),
                ConformalFactor::gaussian(),
            ][which].clone();
            let st = GraphState::new(t, x, xp);
            let xpp = cmc_rhs(&cf, hbar, &st).unwrap();
            let back = graph_mean_curvature(&cf, &st, xpp).unwrap();
            // the relative scale is set by the largest term of the equation
            let q = 1.0 + xp * xp;
            let scale = hbar.abs().max((q / x).abs() / q.powf(1.5) * (-cf.u(st.radius_sq())).exp()).max(1.0);
            prop_assert!((back - hbar).abs() <= 1e-12 * scale, "{back} vs {hbar}");
        }

        #[test]
        fn arclength_curvature_matches_graph(t in -1.0f64..1.0, x in 0.1f64..2.0, xp in -4.0f64..4.0, hbar in -2.0f64..2.0) {
            let g = ConformalFactor::gaussian();
            let st = GraphState::new(t, x, xp);
            let xpp = cmc_rhs(&g, hbar, &st).unwrap();
            let k = arc_curvature(&g, hbar, &st.to_arc(0.0)).unwrap();
            let q = 1.0 + xp * xp;
            prop_assert!((k + xpp / q.powf(1.5)).abs() < 1e-11 * (1.0 + k.abs()));
        }
    }

    #[test]
    fn catenoid_oracle() {
        let e = ConformalFactor::euclidean();
        for c0 in [0.5, 1.0, 2.0] {
            let tol = 1e-10;
            let curve = integrate(&e, 0.0, c0, 0.0, 2.0 * c0, tol).unwrap();
            assert_eq!(curve.truncation(), None);
            let worst = curve
                .samples(5)
                .iter()
                .map(|s| (s.x() - c0 * (s.param() / c0).cosh()).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 10.0 * tol * c0.max(1.0) * 4.0, "c0={c0} err={worst}");
        }
    }

    #[test]
    fn catenoid_error_tracks_tolerance() {
        let e = ConformalFactor::euclidean();
        let err = |tol: f64| {
            let c = integrate(&e, 0.0, 1.0, 0.0, 2.0, tol).unwrap();
            let s = c.last();
            (s.x() - 2f64.cosh()).abs()
        };
        let coarse = err(1e-6);
        let fine = err(1e-9);
        assert!(fine < coarse);
        // fifth-order local control: three decades of tolerance buy at least two of error
        assert!(coarse / fine > 100.0, "{coarse} {fine}");
    }

    #[test]
    fn forward_residual_along_solution() {
        let g = ConformalFactor::gaussian();
        let tol = 1e-10;
        let curve = integrate(&g, 0.0, 0.7, 0.0, 1.5, tol).unwrap();
        // nodes right at the slope cap lose digits to cancellation in the interpolant
        for st in curve.states().iter().filter(|s| s.slope_or_angle().abs() < 1e3) {
            let xpp = curve.interpolated_second_order(st.param()).unwrap();
            let h = graph_mean_curvature(&g, st.as_graph().unwrap(), xpp).unwrap();
            assert!(h.abs() <= 100.0 * tol, "t={} H={h}", st.param());
        }
        // between nodes the interpolant's derivative is one order less accurate
        for k in 0..=200 {
            let t = 0.5 * k as f64 / 200.0;
            let st = *curve.eval(t).unwrap().as_graph().unwrap();
            let h = graph_mean_curvature(&g, &st, curve.interpolated_second_order(t).unwrap()).unwrap();
            assert!(h.abs() <= 1e3 * tol, "t={t} H={h}");
        }
    }

    #[test]
    fn even_symmetry_of_shrinkers() {
        let g = ConformalFactor::gaussian();
        let tol = 1e-10;
        for x0 in [0.3, 0.45, 1.0] {
            let span = integrate(&g, 0.0, x0, 0.0, 0.8, tol).unwrap().endpoints().1 * 0.99;
            let fwd = integrate(&g, 0.0, x0, 0.0, span, tol).unwrap();
            let back = integrate(&g, 0.0, x0, 0.0, -span, tol).unwrap();
            for k in 0..=40 {
                let t = span * k as f64 / 40.0;
                let d = (fwd.eval(t).unwrap().x() - back.eval(-t).unwrap().x()).abs();
                assert!(d <= 10.0 * tol, "x0={x0} t={t} d={d}");
            }
            let full = fwd.mirrored_even().unwrap();
            assert_eq!(full.param_range(), (-span, span));
            for k in 0..=40 {
                let t = -span + 2.0 * span * k as f64 / 40.0;
                let a = full.eval(t).unwrap();
                let b = if t < 0.0 {
                    back.eval(t).unwrap()
                } else {
                    fwd.eval(t).unwrap()
                };
                assert!((a.x() - b.x()).abs() <= 10.0 * tol);
                assert!((a.slope_or_angle() - b.slope_or_angle()).abs() <= 100.0 * tol);
            }
        }
    }

    #[test]
    fn waist_equilibrium_is_constant() {
        let g = ConformalFactor::gaussian();
        let tol = 1e-10;
        let c = integrate(&g, 0.0, 2f64.sqrt(), 0.0, 3.0, tol).unwrap();
        for s in c.samples(4) {
            assert!((s.x() - 2f64.sqrt()).abs() <= 10.0 * tol);
        }
        let start = ArcState {
            s: 0.0,
            x: 2f64.sqrt(),
            z: 0.0,
            theta: std::f64::consts::FRAC_PI_2,
        };
        let a = integrate_arclength(&g, 0.0, start, 3.0, tol).unwrap();
        for s in a.samples(4) {
            assert!((s.x() - 2f64.sqrt()).abs() <= 10.0 * tol);
        }
    }

    #[test]
    fn rejects_bad_start() {
        let e = ConformalFactor::euclidean();
        assert!(matches!(
            integrate(&e, 0.0, 0.0, 0.0, 1.0, 1e-10),
            Err(Error::SingularAxis { .. })
        ));
        assert!(matches!(
            integrate(&e, 0.0, -1.0, 0.0, 1.0, 1e-10),
            Err(Error::SingularAxis { .. })
        ));
        assert!(matches!(
            integrate(&e, 0.0, 1.0, 0.0, 1.0, 0.0),
            Err(Error::Precondition(_))
        ));
        let h = ConformalFactor::hyperbolic();
        assert!(matches!(
            integrate(&h, 0.0, 1.5, 0.0, 1.0, 1e-10),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn graph_arclength_round_trip() {
        let e = ConformalFactor::euclidean();
        let tol = 1e-11;
        let graph = integrate(&e, 0.0, 1.0, 0.0, 1.5, tol).unwrap();
        let start = GraphState::new(0.0, 1.0, 0.0).to_arc(0.0);
        let stop = |s: &ProfileState| s.z() - 1.5;
        let arc = integrate_arclength_until(&e, 0.0, start, 10.0, tol, Some(&stop)).unwrap();
        assert_eq!(arc.truncation(), Some(Truncation::Event));
        let hit = arc.event().unwrap();
        assert!((hit.state.z() - 1.5).abs() < 1e-12);
        // arclength of cosh from 0 to 1.5 is sinh(1.5)
        assert!((hit.param - 1.5f64.sinh()).abs() < 1e-8);
        for g in arc.to_graph_states().unwrap() {
            let reference = graph.eval(g.t).unwrap();
            assert!((g.x - reference.x()).abs() < 1e-8);
            assert!((g.xp - reference.slope_or_angle()).abs() < 1e-8);
            assert!((g.x - g.t.cosh()).abs() < 1e-8);
        }
    }

    #[test]
    fn arclength_passes_vertical_tangent() {
        // a Euclidean sphere of radius 1 centred on the axis: graph mode hits
        // the slope cap at the equator-free poles, arclength mode goes round
        let e = ConformalFactor::euclidean();
        let tol = 1e-10;
        let graph = integrate(&e, 2.0, 1.0, 0.0, 1.5, tol).unwrap();
        assert!(matches!(
            graph.truncation(),
            Some(Truncation::SlopeCap) | Some(Truncation::Axis)
        ));
        let start = ArcState {
            s: 0.0,
            x: 1.0,
            z: 0.0,
            theta: std::f64::consts::FRAC_PI_2,
        };
        let arc = integrate_arclength(&e, 2.0, start, 1.4, tol).unwrap();
        for s in arc.samples(3) {
            assert!((s.radius_sq() - 1.0).abs() < 1e-9);
        }
        let (_, t_graph_end) = graph.endpoints();
        for g in arc.to_graph_states().unwrap().iter().filter(|g| g.t < t_graph_end) {
            assert!((graph.eval(g.t).unwrap().x() - g.x).abs() < 1e-7);
        }
    }

    #[test]
    fn arclength_shrinker_continues_past_vertical_tangent() {
        let g = ConformalFactor::gaussian();
        let tol = 1e-10;
        let x0 = 0.45;
        let graph = integrate(&g, 0.0, x0, 0.0, 5.0, tol).unwrap();
        assert_eq!(graph.truncation(), Some(Truncation::SlopeCap));
        let start = ArcState {
            s: 0.0,
            x: x0,
            z: 0.0,
            theta: std::f64::consts::FRAC_PI_2,
        };
        let arc = integrate_arclength(&g, 0.0, start, 6.0, tol).unwrap();
        assert_eq!(arc.truncation(), None);
        assert!(arc.states().iter().any(|s| s.slope_or_angle() < 0.0));
        let (_, t_end) = graph.endpoints();
        let mut checked = 0;
        for a in arc.states() {
            let ProfileState::Arclength(a) = a else { unreachable!() };
            if a.theta > 0.05 && a.z < t_end {
                let gs = a.to_graph().unwrap();
                assert!((graph.eval(gs.t).unwrap().x() - gs.x).abs() < 1e-7);
                checked += 1;
            }
        }
        assert!(checked > 5);
    }

    #[test]
    fn serializes_rows_and_metadata() {
        let e = ConformalFactor::euclidean();
        let c = integrate(&e, 0.0, 1.0, 0.0, 0.5, 1e-8).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("param,x,xp_or_theta,z\n"));
        assert_eq!(text.lines().count(), c.len() + 1);
        let json = serde_json::to_value(c.record()).unwrap();
        assert_eq!(json["mode"], "graph");
        assert_eq!(json["metric"]["kind"], "euclidean");
        assert!(json["truncation"].is_null());
    }
}
