//! Scalar root finding and unimodal maximization.

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug)]
pub struct Root {
    pub x: f64,
    pub iterations: usize,
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
/// Illinois-style regula falsi, falling back to bisection steps.
pub fn increasing_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<Root> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Solver { iterations: 0, lo, hi });
    }
    if flo == 0.0 {
        return Ok(Root { x: lo, iterations: 0 });
    }
    if fhi == 0.0 {
        return Ok(Root { x: hi, iterations: 0 });
    }
    let mut side = 0i32;
    for it in 1..=MAX_ITER {
        let width = hi - lo;
        let mid = 0.5 * (lo + hi);
        if width <= rel_tol * lo.abs().max(hi.abs()).max(1.0) || mid == lo || mid == hi {
            return Ok(Root { x: 0.5 * (lo + hi), iterations: it });
        }
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        // keep the secant step well inside the bracket, else bisect
        if !x.is_finite() || x <= lo + 0.01 * width || x >= hi - 0.01 * width || it % 4 == 0 {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(Root { x, iterations: it });
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi /= 2.0;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo /= 2.0;
            }
            side = 1;
        }
    }
    Err(Error::Solver { iterations: MAX_ITER, lo, hi })
}

/// Expands `[x0, x0 + step]` upward until `f(hi) >= 0`, doubling the step.
pub fn bracket_up(f: impl Fn(f64) -> f64, x0: f64, step: f64) -> Result<(f64, f64)> {
    let mut lo = x0;
    let mut h = step;
    for _ in 0..MAX_ITER {
        let hi = lo + h;
        if f(hi) >= 0.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        h *= 2.0;
    }
    Err(Error::Solver { iterations: MAX_ITER, lo, hi: lo + h })
}

/// Expands `[x0 - step, x0]` downward until `f(lo) <= 0`, doubling the step.
pub fn bracket_down(f: impl Fn(f64) -> f64, x0: f64, step: f64) -> Result<(f64, f64)> {
    let mut hi = x0;
    let mut h = step;
    for _ in 0..MAX_ITER {
        let lo = hi - h;
        if f(lo) <= 0.0 {
            return Ok((lo, hi));
        }
        hi = lo;
        h *= 2.0;
    }
    Err(Error::Solver { iterations: MAX_ITER, lo: hi - h, hi })
}

/// Maximizer of a unimodal function on `[a, b]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<Root> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for it in 1..=MAX_ITER {
        if (b - a).abs() <= tol * a.abs().max(b.abs()).max(1.0) {
            return Ok(Root { x: 0.5 * (a + b), iterations: it });
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    Err(Error::Solver { iterations: MAX_ITER, lo: a, hi: b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots() {
        let r = increasing_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-12);
        let r = increasing_root(|x| x.exp() - 1e6, 0.0, 100.0, 1e-14).unwrap();
        assert!((r.x - 1e6f64.ln()).abs() < 1e-11);
        assert!(increasing_root(|x| x, 1.0, 2.0, 1e-12).is_err());
    }

    #[test]
    fn brackets_and_golden() {
        let (lo, hi) = bracket_up(|x| x - 37.0, 0.0, 1.0).unwrap();
        assert!(lo <= 37.0 && hi >= 37.0);
        let (lo, hi) = bracket_down(|x| x + 37.0, 0.0, 1.0).unwrap();
        assert!(lo <= -37.0 && hi >= -37.0);
        let m = golden_max(|x| -(x - 1.3) * (x - 1.3), -5.0, 5.0, 1e-10).unwrap();
        assert!((m.x - 1.3).abs() < 1e-8);
    }
}
