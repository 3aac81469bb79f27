//! Bracketed scalar root finding for ray crossings `g(t) = c(O + t d)`.

use crate::error::{HcrError, Result};

/// Escape bound factor: bracket expansion gives up once the upper end exceeds
/// this multiple of the initial upper end.
pub const ESCAPE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    /// Absolute tolerance on `t`.
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_iter: 100,
        }
    }
}

impl RootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(HcrError::InvalidConfig(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(HcrError::InvalidConfig(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Expands `[t_lo, t_hi]` by doubling the upper end until `g(t_lo) < 0 <= g(t_hi)`.
///
/// The lower end is kept fixed. Fails with [`HcrError::EscapeBoundExceeded`] once
/// the upper end passes `ESCAPE_FACTOR * t_hi`.
pub fn bracket_root<F>(mut g: F, t_lo: f64, t_hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    if !(t_lo < t_hi) {
        return Err(HcrError::InvalidConfig(format!(
            "bracket requires t_lo < t_hi, got [{t_lo}, {t_hi}]"
        )));
    }
    let g_lo = g(t_lo);
    if !(g_lo < 0.0) {
        return Err(HcrError::NoSignChange { lo: t_lo, hi: t_hi });
    }
    let span = t_hi - t_lo;
    let bound = t_lo + ESCAPE_FACTOR * span;
    let mut hi = t_hi;
    loop {
        let g_hi = g(hi);
        if g_hi.is_nan() {
            return Err(HcrError::NoSignChange { lo: t_lo, hi });
        }
        if g_hi >= 0.0 {
            return Ok((t_lo, hi));
        }
        let next = t_lo + 2.0 * (hi - t_lo);
        if next > bound {
            return Err(HcrError::EscapeBoundExceeded { bound });
        }
        hi = next;
    }
}

/// Brent's method on a sign-changing bracket.
///
/// The returned `t` is the endpoint of the final bracket on the non-positive
/// side of `g`, so for a crossing from negative to non-negative the result never
/// overshoots the root by more than rounding, and undershoots by less than
/// `abs_tol`.
pub fn brent_root<F>(mut g: F, bracket: (f64, f64), cfg: &RootConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    cfg.validate()?;
    let (mut a, mut b) = bracket;
    let mut fa = g(a);
    let mut fb = g(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(HcrError::NoSignChange { lo: a, hi: b });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..cfg.max_iter {
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

        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.25 * cfg.abs_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            // [b, c] brackets the root; hand back the side with g <= 0.
            return Ok(if fb <= 0.0 { b } else { c });
        }

        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic interpolation
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
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
        fb = g(b);
        if fb.is_nan() {
            return Err(HcrError::NoSignChange { lo: a, hi: b });
        }
    }
    Err(HcrError::MaxIterExceeded {
        iterations: cfg.max_iter,
    })
}

/// Smallest `t > 0` with `g(t) = 0`, given `g(0) < 0` and `g` convex in `t`.
pub fn ray_crossing<F>(mut g: F, initial_hi: f64, cfg: &RootConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let bracket = bracket_root(&mut g, 0.0, initial_hi)?;
    brent_root(&mut g, bracket, cfg)
}
