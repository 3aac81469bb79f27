//! Conversion between Euclidean points of a feasible region and the
//! hyperspherical pair `(d, r)`: a unit direction from the region origin and the
//! fraction of the frontier distance along it.
//!
//! `y = O + d * r * s(d)`, where `s(d)` is the distance from `O` to the first
//! constraint crossing along `d`. Every `(d, r)` with `|d| = 1` and
//! `r` in `[0, 1]` maps to a feasible point.

use crate::constraint::{check_dim, FeasibleRegion};
use crate::error::{HcrError, Result};
use crate::linalg::{self, basis};

/// Norm below which a vector is treated as having no direction.
pub const DIRECTION_EPS: f64 = 1e-12;
/// Allowed deviation of `|d|` from one.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HypersphericalCoord {
    direction: Vec<f64>,
    radius: f64,
}

impl HypersphericalCoord {
    pub fn new(direction: Vec<f64>, radius: f64) -> Result<Self> {
        let norm = linalg::norm(&direction);
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(HcrError::InvalidCoordinate(format!(
                "direction must have unit norm, got {norm}"
            )));
        }
        if !(0.0..=1.0).contains(&radius) {
            return Err(HcrError::InvalidCoordinate(format!(
                "radius must lie in [0, 1], got {radius}"
            )));
        }
        Ok(Self { direction, radius })
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn into_parts(self) -> (Vec<f64>, f64) {
        (self.direction, self.radius)
    }
}

/// Probe schedule for [`restrict_constraints`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelConfig {
    pub base_multiplier: f64,
    pub max_iterations: usize,
}

impl AccelConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 20;

    pub fn new(base_multiplier: f64, max_iterations: usize) -> Result<Self> {
        if !(base_multiplier > 0.0) || !base_multiplier.is_finite() {
            return Err(HcrError::InvalidConfig(format!(
                "base_multiplier must be positive, got {base_multiplier}"
            )));
        }
        if max_iterations == 0 {
            return Err(HcrError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(Self {
            base_multiplier,
            max_iterations,
        })
    }

    /// Probes scaled by the region's estimated radial length.
    pub fn for_region(region: &FeasibleRegion) -> Self {
        Self {
            base_multiplier: region.radial_length(),
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Result of a frontier search along one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frontier {
    /// `s(d)`
    pub distance: f64,
    /// Constraint achieving the minimum (lowest index on ties).
    pub index: usize,
    /// Number of constraints whose crossing was actually computed.
    pub candidates: usize,
}

/// Candidate constraints for the frontier along `d`.
///
/// Probes `O + d * base * (1 + 0.5 i)` for `i = 0, 1, ...` and returns the
/// constraints violated at the first probe that violates anything. After
/// `max_iterations` unsuccessful probes every index is returned.
pub fn restrict_constraints(
    region: &FeasibleRegion,
    d: &[f64],
    accel: &AccelConfig,
) -> Result<Vec<usize>> {
    check_dim(region.dim(), d)?;
    Ok(restrict_unchecked(region, d, accel))
}

fn restrict_unchecked(region: &FeasibleRegion, d: &[f64], accel: &AccelConfig) -> Vec<usize> {
    let origin = region.origin();
    let mut probe = origin.to_vec();
    for i in 0..accel.max_iterations {
        let mult = accel.base_multiplier * (1.0 + 0.5 * i as f64);
        for ((p, o), di) in probe.iter_mut().zip(origin).zip(d) {
            *p = o + di * mult;
        }
        let violated = region.violated_unchecked(&probe);
        if !violated.is_empty() {
            return violated;
        }
    }
    (0..region.len()).collect()
}

/// Frontier search over the restricted candidate set.
pub fn frontier(region: &FeasibleRegion, d: &[f64], accel: &AccelConfig) -> Result<Frontier> {
    check_dim(region.dim(), d)?;
    // a lone constraint is the probe search's answer whether or not a probe hits it
    if region.len() == 1 {
        let (distance, index) = region.min_crossing(d, &[0], accel.base_multiplier)?;
        return Ok(Frontier {
            distance,
            index,
            candidates: 1,
        });
    }
    let candidates = restrict_unchecked(region, d, accel);
    let (distance, index) = region.min_crossing(d, &candidates, accel.base_multiplier)?;
    Ok(Frontier {
        distance,
        index,
        candidates: candidates.len(),
    })
}

/// Frontier search over every constraint, bypassing the probe schedule.
pub fn frontier_full_scan(region: &FeasibleRegion, d: &[f64]) -> Result<Frontier> {
    check_dim(region.dim(), d)?;
    let all: Vec<usize> = (0..region.len()).collect();
    let initial_hi = region.radial_length();
    let (distance, index) = region.min_crossing(d, &all, initial_hi)?;
    Ok(Frontier {
        distance,
        index,
        candidates: all.len(),
    })
}

/// `s(d)` and the index of the constraint that achieves it.
pub fn frontier_distance(
    region: &FeasibleRegion,
    d: &[f64],
    accel: &AccelConfig,
) -> Result<(f64, usize)> {
    frontier(region, d, accel).map(|f| (f.distance, f.index))
}

/// `v / |v|`, or the first basis vector when `|v|` is below [`DIRECTION_EPS`].
pub fn normalize_direction(v: &[f64]) -> Vec<f64> {
    let norm = linalg::norm(v);
    if norm > DIRECTION_EPS {
        v.iter().map(|x| x / norm).collect()
    } else if v.is_empty() {
        Vec::new()
    } else {
        basis(v.len(), 0)
    }
}

/// Euclidean point to `(d, r)`. The point must be feasible.
///
/// `y = O` has no direction; it maps to the first basis vector with `r = 0`.
pub fn to_hyperspherical(
    region: &FeasibleRegion,
    y: &[f64],
    accel: &AccelConfig,
) -> Result<HypersphericalCoord> {
    let violated = region.violated_constraints(y)?;
    if !violated.is_empty() {
        return Err(HcrError::InfeasibleInput { violated });
    }
    let diff = linalg::sub(y, region.origin());
    let dist = linalg::norm(&diff);
    if dist <= DIRECTION_EPS {
        return Ok(HypersphericalCoord {
            direction: basis(y.len(), 0),
            radius: 0.0,
        });
    }
    let direction: Vec<f64> = diff.into_iter().map(|v| v / dist).collect();
    let (s, _) = frontier_distance(region, &direction, accel)?;
    // root-finder tolerance can push r a hair past 1 on the frontier
    let radius = (dist / s).clamp(0.0, 1.0);
    Ok(HypersphericalCoord { direction, radius })
}

/// `(d, r)` to the Euclidean point `O + d * r * s(d)`.
pub fn from_hyperspherical(
    region: &FeasibleRegion,
    coord: &HypersphericalCoord,
    accel: &AccelConfig,
) -> Result<Vec<f64>> {
    check_dim(region.dim(), &coord.direction)?;
    if coord.radius == 0.0 {
        return Ok(region.origin().to_vec());
    }
    let (s, _) = frontier_distance(region, &coord.direction, accel)?;
    Ok(linalg::along(
        region.origin(),
        &coord.direction,
        coord.radius * s,
    ))
}
