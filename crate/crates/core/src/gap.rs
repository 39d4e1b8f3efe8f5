//! Pinching condition and Hessian eigenvalue factors along a profile.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{geometry_on, PointGeometry};
use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::profile::{GraphState, ProfileCurve};

/// Waist radius below which `F''(0) < 0` for shrinkers: `sqrt(4 - 2 sqrt 2)`.
pub fn waist_threshold() -> f64 {
    (4.0 - 2.0 * 2f64.sqrt()).sqrt()
}

/// Closed form of `F''(0)` for a shrinker with waist `x0`.
pub fn gap_second_derivative_at_waist(x0: f64) -> f64 {
    let x2 = x0 * x0;
    (-x2 * x2 + 8.0 * x2 - 8.0) / (2.0 * x2)
}

/// Relative width of the band in which a sample counts as equality.
pub const EQUALITY_TOL: f64 = 1e-8;
/// Dense points per integration step used by [`scan_gap`].
pub const SAMPLES_PER_STEP: usize = 4;

fn positive_sigma(pg: &PointGeometry) -> Result<()> {
    if pg.sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveSigma {
            sigma: pg.sigma,
            radius_sq: pg.radius_sq(),
        })
    }
}

/// `(λ1, λ2) = (1 + kbar1 s / σ, 1 + kbar2 s / σ)` with `s = g(x, N)`; the
/// Hessian of the convexity potential is `2 σ² Φ' λi` in the principal
/// directions.
pub fn hessian_eigen_factors(pg: &PointGeometry) -> Result<(f64, f64)> {
    positive_sigma(pg)?;
    let s = pg.support_conf / pg.sigma;
    Ok((1.0 + pg.kbar1 * s, 1.0 + pg.kbar2 * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCondition {
    pub lhs: f64,
    pub rhs: f64,
    /// `2 + H s / σ >= 0`.
    pub second_ok: bool,
}

/// Both inequalities of the pinching condition at one point.
pub fn gap_condition(pg: &PointGeometry) -> Result<GapCondition> {
    positive_sigma(pg)?;
    let s = pg.support_conf / pg.sigma;
    let m = 2.0 + pg.hbar * s;
    Ok(GapCondition {
        lhs: pg.traceless_sq * s * s,
        rhs: 0.5 * m * m,
        second_ok: m >= 0.0,
    })
}

/// The shrinker gap functional `F(t)`; the condition holds where `|F| <= 1`.
pub fn gaussian_gap_functional(state: &GraphState) -> Result<f64> {
    let GraphState { t, x, xp } = *state;
    if !(x > 0.0) {
        return Err(Error::SingularAxis { x });
    }
    let rho = x * x + t * t;
    if rho >= 4.0 {
        return Err(Error::NonPositiveSigma {
            sigma: (4.0 - rho) / 4.0,
            radius_sq: rho,
        });
    }
    let b = x - xp * t;
    Ok((4.0 - x * b) * b / (x * (4.0 - rho) * (1.0 + xp * xp)))
}

/// The minimal-surface gap ratio for an arbitrary conformal factor; equals
/// `-kbar2 g(x, N) / σ`.
pub fn general_gap_functional(cf: &ConformalFactor, state: &GraphState) -> Result<f64> {
    let GraphState { t, x, xp } = *state;
    if !(x > 0.0) {
        return Err(Error::SingularAxis { x });
    }
    let rho = x * x + t * t;
    let sigma = cf.sigma(rho)?;
    if sigma <= 0.0 {
        return Err(Error::NonPositiveSigma { sigma, radius_sq: rho });
    }
    let du = cf.du(rho);
    let b = x - xp * t;
    Ok((1.0 + 2.0 * du * b * x) * b / (sigma * x * (1.0 + xp * xp)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub param: f64,
    pub x: f64,
    pub z: f64,
    /// `-kbar2 g(x, N) / σ`; `None` where σ <= 0.
    pub f_value: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub second_ok: bool,
    pub pass: bool,
    pub equality: bool,
    /// σ <= 0 here, outside the region where the condition makes sense.
    pub sigma_domain: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    HoldsStrictly,
    HoldsWithEquality,
    Fails,
}

impl Verdict {
    /// Short label: `holds` or `fails`.
    pub fn label(self) -> &'static str {
        match self {
            Verdict::HoldsStrictly | Verdict::HoldsWithEquality => "holds",
            Verdict::Fails => "fails",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub tolerance: f64,
    pub verdict: Verdict,
    pub equality_at: Vec<f64>,
    pub fails_at: Vec<f64>,
    pub sigma_domain_at: Vec<f64>,
    pub samples: Vec<GapSample>,
}

/// The JSON-facing part of a report: verdict and offending parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub verdict: Verdict,
    pub label: String,
    pub tolerance: f64,
    pub sample_count: usize,
    pub equality_at: Vec<f64>,
    pub fails_at: Vec<f64>,
    pub sigma_domain_at: Vec<f64>,
    pub max_f: Option<f64>,
    pub min_lambda: Option<f64>,
}

impl GapReport {
    pub fn holds(&self) -> bool {
        self.verdict != Verdict::Fails
    }

    pub fn summary(&self) -> GapSummary {
        let fold = |f: fn(&GapSample) -> Option<f64>, pick: fn(f64, f64) -> f64| {
            self.samples.iter().filter_map(f).reduce(pick)
        };
        GapSummary {
            verdict: self.verdict,
            label: self.verdict.label().to_string(),
            tolerance: self.tolerance,
            sample_count: self.samples.len(),
            equality_at: self.equality_at.clone(),
            fails_at: self.fails_at.clone(),
            sigma_domain_at: self.sigma_domain_at.clone(),
            max_f: fold(|s| s.f_value, f64::max),
            min_lambda: fold(|s| s.lambda1.zip(s.lambda2).map(|(a, b)| a.min(b)), f64::min),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.samples {
            out.serialize(s)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Evaluates one point; σ <= 0 is reported as a failing sample rather than
/// an error.
pub fn gap_sample(pg: &PointGeometry, tolerance: f64) -> GapSample {
    let mut sample = GapSample {
        param: pg.param,
        x: pg.x,
        z: pg.z,
        f_value: None,
        lambda1: None,
        lambda2: None,
        lhs: None,
        rhs: None,
        second_ok: false,
        pass: false,
        equality: false,
        sigma_domain: true,
    };
    let (Ok((l1, l2)), Ok(cond)) = (hessian_eigen_factors(pg), gap_condition(pg)) else {
        return sample;
    };
    sample.sigma_domain = false;
    sample.f_value = Some(-pg.kbar2 * pg.support_conf / pg.sigma);
    sample.lambda1 = Some(l1);
    sample.lambda2 = Some(l2);
    sample.lhs = Some(cond.lhs);
    sample.rhs = Some(cond.rhs);
    sample.second_ok = cond.second_ok;
    sample.pass = cond.lhs <= cond.rhs + tolerance && cond.second_ok;
    sample.equality = (cond.lhs - cond.rhs).abs() <= EQUALITY_TOL * cond.rhs.max(1.0);
    sample
}

/// Verdict over a list of samples already in parameter order.
pub fn report_from_samples(samples: Vec<GapSample>, tolerance: f64) -> GapReport {
    let fails_at: Vec<f64> = samples.iter().filter(|s| !s.pass).map(|s| s.param).collect();
    let equality_at: Vec<f64> = samples
        .iter()
        .filter(|s| s.pass && s.equality)
        .map(|s| s.param)
        .collect();
    let sigma_domain_at: Vec<f64> = samples.iter().filter(|s| s.sigma_domain).map(|s| s.param).collect();
    let verdict = if !fails_at.is_empty() {
        Verdict::Fails
    } else if !equality_at.is_empty() {
        Verdict::HoldsWithEquality
    } else {
        Verdict::HoldsStrictly
    };
    GapReport {
        tolerance,
        verdict,
        equality_at,
        fails_at,
        sigma_domain_at,
        samples,
    }
}

/// Evaluates the condition at every step node and [`SAMPLES_PER_STEP`]` - 1`
/// dense points per step. Samples are computed in parallel and kept in
/// curve order.
pub fn scan_gap(curve: &ProfileCurve, tolerance: f64) -> Result<GapReport> {
    if curve.steps() == 0 {
        return Err(Error::DegenerateCurve(
            "a profile without integration steps cannot be scanned; the flat disk case is certified analytically"
                .into(),
        ));
    }
    let states = curve.samples(SAMPLES_PER_STEP);
    let samples = states
        .par_iter()
        .map(|st| geometry_on(curve, st).map(|pg| gap_sample(&pg, tolerance)))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from_samples(samples, tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::conformal_curvatures;
    use crate::profile::{cmc_rhs, integrate};
    use proptest::prelude::*;

    fn pg(kbar1: f64, kbar2: f64, support_conf: f64, sigma: f64) -> PointGeometry {
        let d = kbar1 - kbar2;
        PointGeometry {
            param: 0.0,
            x: 1.0,
            z: 0.0,
            k1: kbar1,
            k2: kbar2,
            kbar1,
            kbar2,
            hbar: kbar1 + kbar2,
            support_euclid: support_conf,
            support_conf,
            sigma,
            traceless_sq: 0.5 * d * d,
        }
    }

    #[test]
    fn threshold_constant() {
        assert_eq!(format!("{:.5}", waist_threshold()), "1.08239");
        assert!(gap_second_derivative_at_waist(1.2) > 0.0);
        assert!(gap_second_derivative_at_waist(1.0) < 0.0);
        assert!(gap_second_derivative_at_waist(waist_threshold()).abs() < 1e-14);
        assert_eq!(gap_second_derivative_at_waist(0.5), -12.125);
    }

    #[test]
    fn disk_and_minimal_cases() {
        let disk = pg(0.0, 0.0, 0.0, 1.0);
        assert_eq!(hessian_eigen_factors(&disk).unwrap(), (1.0, 1.0));
        let c = gap_condition(&disk).unwrap();
        assert_eq!((c.lhs, c.rhs, c.second_ok), (0.0, 2.0, true));
        let minimal = pg(0.7, -0.7, 0.4, 0.9);
        let c = gap_condition(&minimal).unwrap();
        let a2 = 0.7 * 0.7 * 2.0;
        assert!((c.lhs - a2 * 0.4 * 0.4 / 0.81).abs() < 1e-15);
        assert_eq!(c.rhs, 2.0);
        assert!(matches!(
            hessian_eigen_factors(&pg(1.0, 1.0, 1.0, 0.0)),
            Err(Error::NonPositiveSigma { .. })
        ));
    }

    proptest! {
        #[test]
        fn factor_identities(k1 in -5.0f64..5.0, k2 in -5.0f64..5.0, s in -3.0f64..3.0, sigma in 0.05f64..3.0) {
            let p = pg(k1, k2, s, sigma);
            let (l1, l2) = hessian_eigen_factors(&p).unwrap();
            let r = s / sigma;
            let a = 0.25 * (2.0 + p.hbar * r).powi(2);
            let b = p.traceless_sq * r * r / 2.0;
            prop_assert!((l1 * l2 - (a - b)).abs() <= 1e-10 * (a + b).max(1e-300));
            prop_assert!((l1 + l2 - (2.0 + p.hbar * r)).abs() <= 1e-10 * (2.0 + (p.hbar * r).abs()));
            let c = gap_condition(&p).unwrap();
            // equality in the first inequality exactly when the smaller factor vanishes
            let gap = c.rhs - c.lhs;
            prop_assert!((gap - 2.0 * l1 * l2).abs() <= 1e-10 * (c.rhs + c.lhs));
        }

        #[test]
        fn general_matches_gaussian(t in -1.0f64..1.0, x in 0.05f64..1.6, xp in -3.0f64..3.0) {
            prop_assume!(x * x + t * t < 3.9);
            let g = ConformalFactor::gaussian();
            let st = GraphState::new(t, x, xp);
            let a = gaussian_gap_functional(&st).unwrap();
            let b = general_gap_functional(&g, &st).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn general_matches_curvature_chain(which in 0usize..4, t in -0.5f64..0.5, x in 0.05f64..0.8, xp in -3.0f64..3.0) {
            let cf = [
                ConformalFactor::euclidean(),
                ConformalFactor::hyperbolic(),
                ConformalFactor::spherical(),
                ConformalFactor::gaussian(),
            ][which].clone();
            let st = GraphState::new(t, x, xp);
            let xpp = cmc_rhs(&cf, 0.0, &st).unwrap();
            let p = conformal_curvatures(&cf, &st, xpp).unwrap();
            let f = general_gap_functional(&cf, &st).unwrap();
            let chain = -p.kbar2 * p.support_conf / p.sigma;
            prop_assert!((f - chain).abs() <= 1e-12 * f.abs().max(1.0));
        }
    }

    #[test]
    fn gap_functional_examples() {
        for x0 in [0.2, 0.5, 1.0, 1.3] {
            assert_eq!(gaussian_gap_functional(&GraphState::new(0.0, x0, 0.0)).unwrap(), 1.0);
        }
        let e = ConformalFactor::euclidean();
        assert_eq!(
            general_gap_functional(&e, &GraphState::new(0.0, 1.0, 0.0)).unwrap(),
            1.0
        );
        assert!(matches!(
            gaussian_gap_functional(&GraphState::new(1.5, 1.5, 0.0)),
            Err(Error::NonPositiveSigma { .. })
        ));
    }

    #[test]
    fn shrinker_near_waist_holds() {
        let g = ConformalFactor::gaussian();
        let curve = integrate(&g, 0.0, 0.45, 0.0, 0.1, 1e-10)
            .unwrap()
            .mirrored_even()
            .unwrap();
        let report = scan_gap(&curve, 1e-10).unwrap();
        assert_eq!(report.verdict.label(), "holds");
        assert!(report.fails_at.is_empty());
        for s in &report.samples {
            assert!(s.f_value.unwrap() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn sigma_domain_exit_fails() {
        let g = ConformalFactor::gaussian();
        // the waist equilibrium runs straight out through |x| = 2
        let curve = integrate(&g, 0.0, 2f64.sqrt(), 0.0, 2.0, 1e-10).unwrap();
        let report = scan_gap(&curve, 1e-10).unwrap();
        assert_eq!(report.verdict, Verdict::Fails);
        assert!(!report.sigma_domain_at.is_empty());
        for p in &report.sigma_domain_at {
            assert!(report.fails_at.contains(p));
            assert!(2.0 + p * p >= 4.0 - 1e-9);
        }
        let json = serde_json::to_value(report.summary()).unwrap();
        assert_eq!(json["label"], "fails");
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("param,x,z,f_value,lambda1,lambda2,lhs,rhs,"));
    }

    #[test]
    fn scan_rejects_empty_curve() {
        let g = ConformalFactor::gaussian();
        let curve = integrate(&g, 0.0, 0.5, 0.0, 0.0, 1e-10).unwrap();
        assert!(matches!(scan_gap(&curve, 1e-10), Err(Error::DegenerateCurve(_))));
    }

    #[test]
    fn scan_is_thread_count_independent() {
        let g = ConformalFactor::gaussian();
        let curve = integrate(&g, 0.0, 0.6, 0.0, 0.5, 1e-10)
            .unwrap()
            .mirrored_even()
            .unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| scan_gap(&curve, 1e-10).unwrap());
        let b = many.install(|| scan_gap(&curve, 1e-10).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
