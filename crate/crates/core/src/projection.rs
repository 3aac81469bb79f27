//! Euclidean projection onto a feasible region.
//!
//! Balls are projected radially. Intersections of balls and halfspaces use
//! Dykstra's alternating projections. Regions with generic constraints fall
//! back to a projected subgradient method. Whatever the route, [`project`]
//! finishes with a radial pull toward the origin so the result is always
//! feasible.

use crate::constraint::{check_dim, ConstraintKind, FeasibleRegion};
use crate::error::{HcrError, Result};
use crate::hyperspherical::{frontier_full_scan, normalize_direction};
use crate::linalg::{self, dot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykstraConfig {
    pub max_sweeps: usize,
    /// Convergence tolerance on the change of the iterate over one sweep.
    pub tol: f64,
    /// Maximum constraint value accepted at convergence.
    pub tol_feas: f64,
}

impl Default for DykstraConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 1000,
            tol: 1e-9,
            tol_feas: crate::constraint::DEFAULT_TOL_FEAS,
        }
    }
}

/// Iteration cap for the subgradient fallback.
pub const SUBGRADIENT_MAX_ITERS: usize = 10_000;

/// Radial projection onto the ball, pulled inward by `strict_margin`.
///
/// Points strictly inside are returned unchanged.
pub fn project_ball(y: &[f64], center: &[f64], radius: f64, strict_margin: f64) -> Vec<f64> {
    let dist = linalg::dist(y, center);
    if dist < radius {
        return y.to_vec();
    }
    let scale = radius * (1.0 - strict_margin) / dist;
    y.iter()
        .zip(center)
        .map(|(v, c)| c + (v - c) * scale)
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum ConvexSet<'a> {
    Halfspace {
        normal: &'a [f64],
        offset: f64,
        norm_sq: f64,
    },
    Ball {
        center: &'a [f64],
        radius: f64,
    },
}

impl ConvexSet<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        match *self {
            ConvexSet::Halfspace { normal, offset, .. } => dot(normal, y) - offset,
            ConvexSet::Ball { center, radius } => linalg::dist(y, center) - radius,
        }
    }

    fn project_in_place(&self, z: &mut [f64]) {
        match *self {
            ConvexSet::Halfspace {
                normal,
                offset,
                norm_sq,
            } => {
                let excess = dot(normal, z) - offset;
                if excess > 0.0 {
                    let k = excess / norm_sq;
                    for (zi, a) in z.iter_mut().zip(normal) {
                        *zi -= k * a;
                    }
                }
            }
            ConvexSet::Ball { center, radius } => {
                let dist = linalg::dist(z, center);
                if dist > radius {
                    let scale = radius / dist;
                    for (zi, c) in z.iter_mut().zip(center) {
                        *zi = c + (*zi - c) * scale;
                    }
                }
            }
        }
    }
}

fn dykstra(y: &[f64], sets: &[ConvexSet<'_>], cfg: &DykstraConfig) -> Result<Vec<f64>> {
    let n = y.len();
    let mut x = y.to_vec();
    let mut increments = vec![0.0; sets.len() * n];
    let mut z = vec![0.0; n];
    let mut prev = x.clone();
    for _ in 0..cfg.max_sweeps {
        prev.copy_from_slice(&x);
        for (set, p) in sets.iter().zip(increments.chunks_exact_mut(n)) {
            for ((zi, xi), pi) in z.iter_mut().zip(&x).zip(p.iter()) {
                *zi = xi + pi;
            }
            x.copy_from_slice(&z);
            set.project_in_place(&mut x);
            for ((pi, zi), xi) in p.iter_mut().zip(&z).zip(&x) {
                *pi = zi - xi;
            }
        }
        let change = linalg::dist(&x, &prev);
        if change <= cfg.tol {
            let worst = sets
                .iter()
                .map(|s| s.value(&x))
                .fold(f64::NEG_INFINITY, f64::max);
            if worst <= cfg.tol_feas {
                return Ok(x);
            }
        }
    }
    Err(HcrError::NotConverged {
        sweeps: cfg.max_sweeps,
        best: x,
    })
}

/// Euclidean projection onto `{ y : a_i . y <= b_i }` by Dykstra's method.
///
/// On non-convergence the error carries the last iterate, which may be
/// slightly infeasible.
pub fn project_polytope(
    y: &[f64],
    halfspaces: &[(Vec<f64>, f64)],
    cfg: &DykstraConfig,
) -> Result<Vec<f64>> {
    let mut sets = Vec::with_capacity(halfspaces.len());
    for (normal, offset) in halfspaces {
        check_dim(y.len(), normal)?;
        let norm_sq = dot(normal, normal);
        if norm_sq == 0.0 {
            return Err(HcrError::InvalidConstraint(
                "halfspace normal has zero norm".into(),
            ));
        }
        sets.push(ConvexSet::Halfspace {
            normal,
            offset: *offset,
            norm_sq,
        });
    }
    dykstra(y, &sets, cfg)
}

fn analytic_sets(region: &FeasibleRegion) -> Option<Vec<ConvexSet<'_>>> {
    region
        .constraints()
        .iter()
        .map(|c| match c.kind() {
            ConstraintKind::Halfspace { normal, offset } => Some(ConvexSet::Halfspace {
                normal,
                offset: *offset,
                norm_sq: dot(normal, normal),
            }),
            ConstraintKind::Ball { center, radius } => Some(ConvexSet::Ball {
                center,
                radius: *radius,
            }),
            ConstraintKind::GenericConvex(_) => None,
        })
        .collect()
}

/// Projected subgradient search for the nearest feasible point.
///
/// Steps along the objective gradient when feasible and along the most
/// violated constraint's subgradient otherwise, with step length
/// `radial_length / k`. Returns the best feasible iterate, if any.
fn subgradient_projection(region: &FeasibleRegion, y: &[f64]) -> Option<Vec<f64>> {
    let scale = region.radial_length();
    let mut z = y.to_vec();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 1..=SUBGRADIENT_MAX_ITERS {
        let (worst_idx, worst) = region
            .constraints()
            .iter()
            .map(|c| (c.index(), c.value(&z)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, v| if v.1 > acc.1 { v } else { acc },
            );
        let g = if worst <= region.tol_feas() {
            let d = linalg::dist(&z, y);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, z.clone()));
            }
            if d == 0.0 {
                break;
            }
            linalg::sub(&z, y)
        } else {
            region.constraints()[worst_idx].gradient(&z)
        };
        let gn = linalg::norm(&g);
        if gn == 0.0 {
            break;
        }
        let step = scale / k as f64 / gn;
        for (zi, gi) in z.iter_mut().zip(&g) {
            *zi -= step * gi;
        }
    }
    best.map(|(_, p)| p)
}

/// Pulls `z` toward the origin until it is feasible.
pub fn radial_safeguard(region: &FeasibleRegion, z: &[f64]) -> Result<Vec<f64>> {
    check_dim(region.dim(), z)?;
    if region.is_feasible(z)? {
        return Ok(z.to_vec());
    }
    let origin = region.origin();
    let diff = linalg::sub(z, origin);
    let dist = linalg::norm(&diff);
    let d = normalize_direction(&diff);
    let s = frontier_full_scan(region, &d)?.distance;
    let mut t = dist.min(s);
    for _ in 0..64 {
        let p = linalg::along(origin, &d, t);
        if region.is_feasible(&p)? {
            return Ok(p);
        }
        t *= 1.0 - 1e-9;
    }
    Ok(origin.to_vec())
}

/// Nearest feasible point to `y`.
///
/// Feasible inputs come back unchanged. If Dykstra does not converge the
/// error still carries a feasible point, obtained by the radial safeguard.
pub fn project(region: &FeasibleRegion, y: &[f64]) -> Result<Vec<f64>> {
    project_with(region, y, &DykstraConfig::default())
}

pub fn project_with(region: &FeasibleRegion, y: &[f64], cfg: &DykstraConfig) -> Result<Vec<f64>> {
    check_dim(region.dim(), y)?;
    if region.is_feasible(y)? {
        return Ok(y.to_vec());
    }
    if let Some((center, radius)) = region.single_ball() {
        let p = project_ball(y, center, radius, region.strict_margin());
        return radial_safeguard(region, &p);
    }
    match analytic_sets(region) {
        Some(sets) => {
            let cfg = DykstraConfig {
                tol_feas: region.tol_feas(),
                ..*cfg
            };
            match dykstra(y, &sets, &cfg) {
                Ok(p) => radial_safeguard(region, &p),
                Err(HcrError::NotConverged { sweeps, best }) => Err(HcrError::NotConverged {
                    sweeps,
                    best: radial_safeguard(region, &best)?,
                }),
                Err(e) => Err(e),
            }
        }
        None => {
            let p = subgradient_projection(region, y).unwrap_or_else(|| y.to_vec());
            radial_safeguard(region, &p)
        }
    }
}

/// Like [`project`], but accepts the safeguarded point of a non-converged
/// projection instead of failing. The flag reports convergence.
pub fn project_lenient(region: &FeasibleRegion, y: &[f64]) -> Result<(Vec<f64>, bool)> {
    match project(region, y) {
        Ok(p) => Ok((p, true)),
        Err(HcrError::NotConverged { best, .. }) => Ok((best, false)),
        Err(e) => Err(e),
    }
}
