//! Radial conformal factors `g = e^{2u(|x|^2)} <,>` on Euclidean balls.
//!
//! Every factor is stored as a polynomial in `t = |x|^2` plus an optional
//! logarithmic term `ln(c / (1 + d t))`, so `u`, `u'` and `u''` are all
//! evaluated from closed forms. The four named spaces are special cases:
//!
//! | kind        | u(t)             | domain      |
//! |-------------|------------------|-------------|
//! | euclidean   | 0                | R^3         |
//! | hyperbolic  | ln(2 / (1 - t))  | unit ball   |
//! | spherical   | ln(2 / (1 + t))  | R^3         |
//! | gaussian    | -t / 8           | R^3         |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{quadrature, roots};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Hyperbolic,
    Spherical,
    Gaussian,
    Custom,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Hyperbolic => "hyperbolic",
            MetricKind::Spherical => "spherical",
            MetricKind::Gaussian => "gaussian",
            MetricKind::Custom => "custom",
        }
    }
}

/// `u(t) += ln(scale / (1 + slope * t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRational {
    pub scale: f64,
    pub slope: f64,
}

/// Wire form of a metric selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean,
    Hyperbolic,
    Spherical,
    Gaussian,
    Custom {
        poly: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log_rational: Option<LogRational>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_limit: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricSpec", into = "MetricSpec")]
pub struct ConformalFactor {
    kind: MetricKind,
    poly: Vec<f64>,
    log: Option<LogRational>,
    domain_limit: f64,
    // cached: the scan behind it is too slow to repeat per evaluation
    positivity_radius: f64,
}

impl TryFrom<MetricSpec> for ConformalFactor {
    type Error = Error;

    fn try_from(spec: MetricSpec) -> Result<Self> {
        Ok(match spec {
            MetricSpec::Euclidean => Self::euclidean(),
            MetricSpec::Hyperbolic => Self::hyperbolic(),
            MetricSpec::Spherical => Self::spherical(),
            MetricSpec::Gaussian => Self::gaussian(),
            MetricSpec::Custom {
                poly,
                log_rational,
                domain_limit,
            } => Self::custom(poly, log_rational, domain_limit)?,
        })
    }
}

impl From<ConformalFactor> for MetricSpec {
    fn from(cf: ConformalFactor) -> Self {
        match cf.kind {
            MetricKind::Euclidean => MetricSpec::Euclidean,
            MetricKind::Hyperbolic => MetricSpec::Hyperbolic,
            MetricKind::Spherical => MetricSpec::Spherical,
            MetricKind::Gaussian => MetricSpec::Gaussian,
            MetricKind::Custom => MetricSpec::Custom {
                poly: cf.poly,
                log_rational: cf.log,
                domain_limit: cf.domain_limit.is_finite().then_some(cf.domain_limit),
            },
        }
    }
}

impl ConformalFactor {
    pub fn euclidean() -> Self {
        ConformalFactor {
            kind: MetricKind::Euclidean,
            poly: vec![],
            log: None,
            domain_limit: f64::INFINITY,
            positivity_radius: f64::NAN,
        }
        .with_positivity_radius()
    }

    /// Poincaré ball model.
    pub fn hyperbolic() -> Self {
        ConformalFactor {
            kind: MetricKind::Hyperbolic,
            poly: vec![],
            log: Some(LogRational {
                scale: 2.0,
                slope: -1.0,
            }),
            domain_limit: 1.0,
            positivity_radius: f64::NAN,
        }
        .with_positivity_radius()
    }

    /// Stereographic model of the sphere minus a pole.
    pub fn spherical() -> Self {
        ConformalFactor {
            kind: MetricKind::Spherical,
            poly: vec![],
            log: Some(LogRational { scale: 2.0, slope: 1.0 }),
            domain_limit: f64::INFINITY,
            positivity_radius: f64::NAN,
        }
        .with_positivity_radius()
    }

    /// `e^{-|x|^2/4} <,>`, whose minimal surfaces are self-shrinkers.
    pub fn gaussian() -> Self {
        ConformalFactor {
            kind: MetricKind::Gaussian,
            poly: vec![0.0, -0.125],
            log: None,
            domain_limit: f64::INFINITY,
            positivity_radius: f64::NAN,
        }
        .with_positivity_radius()
    }

    pub fn custom(poly: Vec<f64>, log: Option<LogRational>, domain_limit: Option<f64>) -> Result<Self> {
        if poly.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("metric.poly", "coefficients must be finite"));
        }
        let mut natural = f64::INFINITY;
        if let Some(lr) = log {
            if !(lr.scale > 0.0 && lr.scale.is_finite()) || !lr.slope.is_finite() {
                return Err(Error::config(
                    "metric.log_rational",
                    "scale must be positive and slope finite",
                ));
            }
            if lr.slope < 0.0 {
                natural = (-1.0 / lr.slope).sqrt();
            }
        }
        let limit = match domain_limit {
            Some(a) if !(a > 0.0) => {
                return Err(Error::config("metric.domain_limit", "must be positive"));
            }
            Some(a) => a.min(natural),
            None => natural,
        };
        Ok(ConformalFactor {
            kind: MetricKind::Custom,
            poly,
            log,
            domain_limit: limit,
            positivity_radius: f64::NAN,
        }
        .with_positivity_radius())
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn spec(&self) -> MetricSpec {
        self.clone().into()
    }

    /// Euclidean radius `a` of the ball carrying the metric.
    pub fn domain_limit(&self) -> f64 {
        self.domain_limit
    }

    pub fn domain_limit_sq(&self) -> f64 {
        self.domain_limit * self.domain_limit
    }

    pub fn in_domain(&self, radius_sq: f64) -> bool {
        radius_sq >= 0.0 && radius_sq < self.domain_limit_sq()
    }

    pub fn check_domain(&self, radius_sq: f64) -> Result<()> {
        if self.in_domain(radius_sq) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                radius: radius_sq.abs().sqrt(),
                radius_sq,
                limit: self.domain_limit,
            })
        }
    }

    pub fn u(&self, t: f64) -> f64 {
        let mut v = horner(&self.poly, t);
        if let Some(lr) = self.log {
            v += lr.scale.ln() - (lr.slope * t).ln_1p();
        }
        v
    }

    pub fn du(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for (k, c) in self.poly.iter().enumerate().skip(1).rev() {
            v = v * t + k as f64 * c;
        }
        if let Some(lr) = self.log {
            v -= lr.slope / (1.0 + lr.slope * t);
        }
        v
    }

    pub fn ddu(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for (k, c) in self.poly.iter().enumerate().skip(2).rev() {
            v = v * t + (k * (k - 1)) as f64 * c;
        }
        if let Some(lr) = self.log {
            let q = 1.0 + lr.slope * t;
            v += lr.slope * lr.slope / (q * q);
        }
        v
    }

    /// `e^{u(t)}`, the length scale factor.
    pub fn scale(&self, t: f64) -> f64 {
        self.u(t).exp()
    }

    /// Potential of the position field: `L_x g = 2 sigma g`.
    pub fn sigma(&self, radius_sq: f64) -> Result<f64> {
        self.check_domain(radius_sq)?;
        Ok(self.sigma_unchecked(radius_sq))
    }

    pub(crate) fn sigma_unchecked(&self, t: f64) -> f64 {
        1.0 + 2.0 * self.du(t) * t
    }

    /// `c` with `grad_g sigma = c * x`.
    pub fn grad_sigma_coefficient(&self, radius_sq: f64) -> Result<f64> {
        self.check_domain(radius_sq)?;
        let t = radius_sq;
        Ok(4.0 * (-2.0 * self.u(t)).exp() * (self.ddu(t) * t + self.du(t)))
    }

    fn with_positivity_radius(mut self) -> Self {
        self.positivity_radius = self.scan_positivity_radius();
        self
    }

    /// Largest `r <= a` with `sigma > 0` on the open ball of radius `r`.
    pub fn sigma_positivity_radius(&self) -> f64 {
        self.positivity_radius
    }

    fn scan_positivity_radius(&self) -> f64 {
        let t_max = self.domain_limit_sq();
        let mut prev = 0.0;
        for t in scan_grid(t_max) {
            if self.sigma_unchecked(t) <= 0.0 {
                // right end of the final bracket: first point where sigma <= 0
                let root = roots::bisect(|s| self.sigma_unchecked(s), prev, t, 0.0)
                    .map(|r| r.bracket.1)
                    .unwrap_or(t);
                return root.sqrt();
            }
            prev = t;
        }
        self.domain_limit
    }

    /// Length of the straight segment from the origin to a point at
    /// Euclidean radius `r`, measured in the conformal metric.
    pub fn conformal_distance(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::OutOfDomain {
                radius: r,
                radius_sq: r * r,
                limit: self.domain_limit,
            });
        }
        self.check_domain(r * r)?;
        if r == 0.0 {
            return Ok(0.0);
        }
        let q = quadrature::integrate(|s| self.scale(s * s * r * r), 0.0, 1.0, 1e-11 / r.max(1.0))?;
        Ok(r * q.value)
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

// Uniform on [0, 1], then geometric out to the domain edge (or 1e12).
fn scan_grid(t_max: f64) -> impl Iterator<Item = f64> {
    let cap = if t_max.is_finite() { t_max } else { 1e12 };
    let uniform = (1..=1000).map(|k| k as f64 * 1e-3);
    let mut t = 1.0;
    let geometric = std::iter::from_fn(move || {
        t *= 1.002;
        Some(t)
    });
    uniform
        .chain(geometric)
        .map(move |t| {
            if t_max.is_finite() {
                t.min(t_max * (1.0 - 1e-15))
            } else {
                t
            }
        })
        .take_while(move |&t| t < cap)
        .scan(f64::NEG_INFINITY, |last, t| {
            // stop once clamping would repeat the final point
            if t <= *last {
                None
            } else {
                *last = t;
                Some(t)
            }
        })
}

/// A point of the ambient ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientPoint {
    pub position: [f64; 3],
    pub radius_sq: f64,
}

impl AmbientPoint {
    pub fn new(position: [f64; 3], cf: &ConformalFactor) -> Result<Self> {
        let radius_sq = position.iter().map(|c| c * c).sum();
        cf.check_domain(radius_sq)?;
        Ok(AmbientPoint { position, radius_sq })
    }

    /// Conformal squared length of the position vector, `g(x, x)`.
    pub fn conformal_norm_sq(&self, cf: &ConformalFactor) -> f64 {
        (2.0 * cf.u(self.radius_sq)).exp() * self.radius_sq
    }
}
