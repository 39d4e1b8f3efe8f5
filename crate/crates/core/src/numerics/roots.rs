//! Bracketing scalar root finders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTolerance {
    /// Stop once the bracket is narrower than this.
    pub xtol: f64,
    /// Stop once `|f(root)|` is at most this.
    pub ftol: f64,
    pub max_iter: usize,
}

impl RootTolerance {
    pub fn new(xtol: f64, ftol: f64) -> Self {
        RootTolerance {
            xtol,
            ftol,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootResult {
    pub root: f64,
    pub value: f64,
    /// Final bracket `[lo, hi]`; contains `root`.
    pub bracket: (f64, f64),
    /// Bracket after every iteration, for audit.
    pub history: Vec<(f64, f64)>,
    pub iterations: usize,
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Brent's method on `[a, b]`. `f(a)` and `f(b)` must differ in sign.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: RootTolerance) -> Result<RootResult> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(RootResult {
            root: a,
            value: fa,
            bracket: ordered(a, a),
            history: vec![],
            iterations: 0,
        });
    }
    if fb == 0.0 {
        return Ok(RootResult {
            root: b,
            value: fb,
            bracket: ordered(b, b),
            history: vec![],
            iterations: 0,
        });
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        let (lo, hi) = ordered(a, b);
        return Err(Error::NoRoot {
            lo,
            hi,
            samples: vec![(a, fa), (b, fb)],
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    let mut history = Vec::new();

    for iter in 1..=tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.xtol;
        let xm = 0.5 * (c - b);
        history.push(ordered(b, c));
        if xm.abs() <= tol1 || fb.abs() <= tol.ftol {
            return Ok(RootResult {
                root: b,
                value: fb,
                bracket: ordered(b, c),
                history,
                iterations: iter,
            });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::NoRoot {
                lo: b.min(c),
                hi: b.max(c),
                samples: vec![(b, fb)],
            });
        }
    }
    Ok(RootResult {
        root: b,
        value: fb,
        bracket: ordered(b, c),
        history,
        iterations: tol.max_iter,
    })
}

/// Plain bisection; converges to a sign change of `f` inside `[a, b]`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<RootResult> {
    let (mut lo, mut hi) = ordered(a, b);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(RootResult {
            root: lo,
            value: 0.0,
            bracket: (lo, lo),
            history: vec![],
            iterations: 0,
        });
    }
    if fhi == 0.0 {
        return Ok(RootResult {
            root: hi,
            value: 0.0,
            bracket: (hi, hi),
            history: vec![],
            iterations: 0,
        });
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::NoRoot {
            lo,
            hi,
            samples: vec![(lo, flo), (hi, fhi)],
        });
    }
    let mut history = Vec::new();
    let mut iterations = 0;
    while hi - lo > xtol && iterations < 2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            history.push((lo, hi));
            iterations += 1;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        history.push((lo, hi));
        iterations += 1;
    }
    let root = 0.5 * (lo + hi);
    Ok(RootResult {
        root,
        value: f(root),
        bracket: (lo, hi),
        history,
        iterations,
    })
}

/// Newton iteration guarded by a bracket on a monotone increasing `f`.
/// Falls back to bisection whenever the Newton step leaves the bracket.
pub fn safeguarded_newton<F>(mut f: F, lo: f64, hi: f64, ftol: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut lo, mut hi) = ordered(lo, hi);
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::NoRoot {
            lo,
            hi,
            samples: vec![(lo, flo), (hi, fhi)],
        });
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        x = if dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0 * x - 5.0, 2.0, 3.0, RootTolerance::new(1e-14, 0.0)).unwrap();
        assert!((r.root - 2.094_551_481_542_326_5).abs() < 1e-13);
        let (lo, hi) = r.bracket;
        assert!(lo <= r.root && r.root <= hi);
        assert!(!r.history.is_empty());
    }

    #[test]
    fn brent_rejects_same_sign() {
        let err = brent(|x| x * x + 1.0, -1.0, 1.0, RootTolerance::new(1e-12, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NoRoot { .. }));
    }

    #[test]
    fn bisection_bracket_shrinks() {
        let r = bisect(|x| x.cos() - x, 0.0, 1.0, 1e-13).unwrap();
        assert!((r.root - 0.739_085_133_215_160_6).abs() < 1e-12);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-13);
    }

    #[test]
    fn newton_inverts_monotone_map() {
        let x = safeguarded_newton(|t| (t.exp() - 3.0, t.exp()), 0.0, 5.0, 1e-15).unwrap();
        assert!((x - 3f64.ln()).abs() < 1e-14);
    }
}
