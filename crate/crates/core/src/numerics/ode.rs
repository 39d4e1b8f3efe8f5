//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The dense output is the standard fourth-order continuous extension of
//! the Dormand–Prince pair, stored per accepted step so callers can locate
//! events or resample a trajectory after the fact.

use serde::{Deserialize, Serialize};

/// Right-hand side of `y' = f(t, y)`. Returning `None` marks a point where the
/// field is undefined; the integrator rejects the step and retries smaller.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> Option<[f64; N]>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl StepOptions {
    pub fn with_tol(tol: f64) -> Self {
        StepOptions {
            rtol: tol,
            atol: tol,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// One accepted step `[t0, t0 + h]` (h may be negative) and its interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    #[serde(with = "coef_serde")]
    coef: [[f64; N]; 5],
}

mod coef_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(c: &[[f64; N]; 5], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = c.iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[[f64; N]; 5], D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let mut out = [[0.0; N]; 5];
        if rows.len() != 5 || rows.iter().any(|r| r.len() != N) {
            return Err(serde::de::Error::custom("dense coefficient shape mismatch"));
        }
        for (dst, src) in out.iter_mut().zip(rows) {
            dst.copy_from_slice(&src);
        }
        Ok(out)
    }
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn lo(&self) -> f64 {
        self.t0.min(self.t1())
    }

    pub fn hi(&self) -> f64 {
        self.t0.max(self.t1())
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo() && t <= self.hi()
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coef;
        std::array::from_fn(|i| r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i]))))
    }

    /// Time derivative of the interpolant.
    pub fn derivative(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [_, r2, r3, r4, r5] = &self.coef;
        std::array::from_fn(|i| {
            let a = r4[i] + theta1 * r5[i];
            let b = r3[i] + theta * a;
            let c = r2[i] + theta1 * b;
            let da = -r5[i];
            let db = a + theta * da;
            let dc = -b + theta1 * db;
            (c + theta * dc) / self.h
        })
    }

    /// Image under `t -> -t` with each component multiplied by `signs[i]`.
    pub fn mirrored(&self, signs: &[f64; N]) -> Self {
        let mut coef = self.coef;
        for row in coef.iter_mut() {
            for (c, s) in row.iter_mut().zip(signs) {
                *c *= s;
            }
        }
        DenseSegment {
            t0: -self.t0,
            h: -self.h,
            coef,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<const N: usize> {
    #[serde(with = "points_serde")]
    pub ys: Vec<[f64; N]>,
    pub ts: Vec<f64>,
    pub segments: Vec<DenseSegment<N>>,
}

mod points_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(v: &[[f64; N]], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = v.iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<Vec<[f64; N]>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|r| <[f64; N]>::try_from(r.as_slice()).map_err(|_| serde::de::Error::custom("state length mismatch")))
            .collect()
    }
}

impl<const N: usize> Trajectory<N> {
    fn start(t0: f64, y0: [f64; N]) -> Self {
        Trajectory {
            ts: vec![t0],
            ys: vec![y0],
            segments: Vec::new(),
        }
    }

    pub fn last_t(&self) -> f64 {
        *self.ts.last().expect("trajectory has a start point")
    }

    pub fn last_y(&self) -> [f64; N] {
        *self.ys.last().expect("trajectory has a start point")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    Completed,
    /// The observer asked to stop after the last accepted step.
    Observer,
    /// Step size fell below the floating-point resolution of `t`.
    StepUnderflow {
        at: f64,
    },
    MaxSteps {
        at: f64,
    },
    /// The right-hand side is undefined at the initial point.
    SingularStart,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

struct Step<const N: usize> {
    y_new: [f64; N],
    k7: [f64; N],
    err: f64,
    segment: DenseSegment<N>,
}

fn try_step<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    opts: &StepOptions,
) -> Option<Step<N>> {
    let k2 = sys.rhs(t + C2 * h, &combo(y, h, &[(A21, k1)]))?;
    let k3 = sys.rhs(t + C3 * h, &combo(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = sys.rhs(t + C4 * h, &combo(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = sys.rhs(
        t + C5 * h,
        &combo(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = sys.rhs(
        t + h,
        &combo(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y_new = combo(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    if y_new.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let k7 = sys.rhs(t + h, &y_new)?;

    let mut acc = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        acc += (e / sc).powi(2);
    }
    let err = (acc / N as f64).sqrt();
    if !err.is_finite() {
        return None;
    }

    let mut coef = [[0.0; N]; 5];
    for i in 0..N {
        let dy = y_new[i] - y[i];
        let bspl = h * k1[i] - dy;
        coef[0][i] = y[i];
        coef[1][i] = dy;
        coef[2][i] = bspl;
        coef[3][i] = dy - h * k7[i] - bspl;
        coef[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Some(Step {
        y_new,
        k7,
        err,
        segment: DenseSegment { t0: t, h, coef },
    })
}

fn initial_step<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    span: f64,
    opts: &StepOptions,
) -> f64 {
    let sc: [f64; N] = std::array::from_fn(|i| opts.atol + opts.rtol * y0[i].abs());
    let norm = |v: &[f64; N]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span.abs()).min(opts.h_max);
    let dir = span.signum();
    let y1 = combo(y0, dir * h0, &[(1.0, f0)]);
    let h1 = match sys.rhs(t0 + dir * h0, &y1) {
        Some(f1) => {
            let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
            let d2 = norm(&diff) / h0;
            let m = d1.max(d2);
            if m <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / m).powf(0.2)
            }
        }
        None => h0 * 1e-3,
    };
    (100.0 * h0).min(h1).min(span.abs()).min(opts.h_max)
}

/// Integrates from `t0` towards `t_end`, calling `observer` after every
/// accepted step with that step's dense segment and new state. The observer
/// returns `false` to stop early.
pub fn solve<S, O, const N: usize>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &StepOptions,
    mut observer: O,
) -> (Trajectory<N>, StopReason)
where
    S: OdeSystem<N>,
    O: FnMut(&DenseSegment<N>, f64, &[f64; N]) -> bool,
{
    let mut traj = Trajectory::start(t0, y0);
    let Some(mut k1) = sys.rhs(t0, &y0) else {
        return (traj, StopReason::SingularStart);
    };
    if t_end == t0 {
        return (traj, StopReason::Completed);
    }
    let dir = (t_end - t0).signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = initial_step(sys, t0, &y0, &k1, t_end - t0, opts);
    let mut steps = 0usize;
    let mut last_rejected = false;

    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            return (traj, StopReason::Completed);
        }
        if steps >= opts.max_steps {
            return (traj, StopReason::MaxSteps { at: t });
        }
        let mut h_abs = h.abs().min(opts.h_max);
        let last = h_abs >= remaining * (1.0 - 1e-12);
        if last {
            h_abs = remaining;
        }
        if h_abs <= 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            return (traj, StopReason::StepUnderflow { at: t });
        }
        let h_signed = dir * h_abs;
        steps += 1;

        match try_step(sys, t, &y, &k1, h_signed, opts) {
            Some(step) if step.err <= 1.0 => {
                t = if last { t_end } else { t + h_signed };
                y = step.y_new;
                k1 = step.k7;
                traj.ts.push(t);
                traj.ys.push(y);
                traj.segments.push(step.segment);
                let grow = if step.err == 0.0 {
                    5.0
                } else {
                    (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0)
                };
                let grow = if last_rejected { grow.min(1.0) } else { grow };
                h = h_abs * grow;
                last_rejected = false;
                if !observer(&step.segment, t, &y) {
                    return (traj, StopReason::Observer);
                }
            }
            Some(step) => {
                h = h_abs * (0.9 * step.err.powf(-0.2)).clamp(0.1, 0.9);
                last_rejected = true;
            }
            None => {
                h = h_abs * 0.25;
                last_rejected = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> Option<[f64; 2]> {
            Some([y[1], -y[0]])
        }
    }

    #[test]
    fn harmonic_oscillator_endpoint() {
        let (traj, stop) = solve(
            &Oscillator,
            0.0,
            [0.0, 1.0],
            10.0,
            &StepOptions::with_tol(1e-11),
            |_, _, _| true,
        );
        assert_eq!(stop, StopReason::Completed);
        assert_eq!(traj.last_t(), 10.0);
        let y = traj.last_y();
        assert!((y[0] - 10f64.sin()).abs() < 1e-9, "{}", y[0] - 10f64.sin());
        assert!((y[1] - 10f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let (traj, _) = solve(
            &Oscillator,
            0.0,
            [0.0, 1.0],
            6.0,
            &StepOptions::with_tol(1e-10),
            |_, _, _| true,
        );
        let mut worst: f64 = 0.0;
        for seg in &traj.segments {
            for k in 1..8 {
                let t = seg.t0 + seg.h * k as f64 / 8.0;
                let y = seg.eval(t);
                worst = worst.max((y[0] - t.sin()).abs());
            }
            // interpolant reproduces the step endpoints
            assert!((seg.eval(seg.t0)[0] - seg.t0.sin()).abs() < 1e-9);
        }
        assert!(worst < 1e-9, "dense error {worst}");
    }

    #[test]
    fn dense_derivative_tracks_the_field() {
        let (traj, _) = solve(
            &Oscillator,
            0.0,
            [0.0, 1.0],
            3.0,
            &StepOptions::with_tol(1e-11),
            |_, _, _| true,
        );
        for seg in &traj.segments {
            let t = seg.t0 + 0.37 * seg.h;
            let d = seg.derivative(t);
            assert!((d[0] - t.cos()).abs() < 1e-7);
            assert!((d[1] + t.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn backward_integration() {
        let (traj, _) = solve(
            &Oscillator,
            0.0,
            [0.0, 1.0],
            -2.0,
            &StepOptions::with_tol(1e-11),
            |_, _, _| true,
        );
        let y = traj.last_y();
        assert!((y[0] - (-2f64).sin()).abs() < 1e-9);
        let seg = traj.segments[0];
        assert!(seg.h < 0.0 && seg.contains(seg.t0 + 0.5 * seg.h));
    }

    #[test]
    fn mirrored_segment_matches_reflected_solution() {
        let (traj, _) = solve(
            &Oscillator,
            0.0,
            [0.0, 1.0],
            1.0,
            &StepOptions::with_tol(1e-11),
            |_, _, _| true,
        );
        // sin is odd, cos is even: under t -> -t, y0 flips and y1 is unchanged
        let seg = traj.segments[1].mirrored(&[-1.0, 1.0]);
        let t = 0.5 * (seg.lo() + seg.hi());
        let y = seg.eval(t);
        assert!((y[0] - t.sin()).abs() < 1e-9);
        assert!((y[1] - t.cos()).abs() < 1e-9);
    }

    #[test]
    fn fifth_order_convergence() {
        // halving the tolerance by 32x should cut the error by roughly 32x
        let err = |tol: f64| {
            let (traj, _) = solve(
                &Oscillator,
                0.0,
                [0.0, 1.0],
                5.0,
                &StepOptions::with_tol(tol),
                |_, _, _| true,
            );
            (traj.last_y()[0] - 5f64.sin()).abs()
        };
        let e1 = err(1e-6);
        let e2 = err(1e-6 / 32.0);
        assert!(e2 < e1 / 8.0, "{e1} {e2}");
    }

    struct Blowup;

    impl OdeSystem<1> for Blowup {
        fn rhs(&self, _t: f64, y: &[f64; 1]) -> Option<[f64; 1]> {
            // y = 1/(1-t): singular at t = 1
            Some([y[0] * y[0]])
        }
    }

    #[test]
    fn finite_time_blowup_stops() {
        let (traj, stop) = solve(&Blowup, 0.0, [1.0], 2.0, &StepOptions::with_tol(1e-10), |_, _, y| {
            y[0] < 1e8
        });
        assert_eq!(stop, StopReason::Observer);
        assert!(traj.last_t() < 1.0);
    }

    struct Undefined;

    impl OdeSystem<1> for Undefined {
        fn rhs(&self, _t: f64, y: &[f64; 1]) -> Option<[f64; 1]> {
            (y[0] > 0.0).then(|| [1.0 / y[0]])
        }
    }

    #[test]
    fn singular_start_is_reported() {
        let (_, stop) = solve(&Undefined, 0.0, [0.0], 1.0, &StepOptions::with_tol(1e-8), |_, _, _| {
            true
        });
        assert_eq!(stop, StopReason::SingularStart);
    }
}
