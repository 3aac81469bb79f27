//! Convex scalar constraints `c(y) <= 0` and the feasible region they define.
//!
//! A [`FeasibleRegion`] is an ordered conjunction of constraints plus a strictly
//! feasible origin. Constraint order is fixed at construction and every
//! index-returning query uses it.

use std::fmt;
use std::sync::Arc;

use crate::error::{HcrError, Result};
use crate::linalg::{self, dot};
use crate::rootfind::{self, RootConfig};

/// Default tolerance for counting a point as feasible.
pub const DEFAULT_TOL_FEAS: f64 = 1e-12;
/// Default inward margin used when a strictly interior point has to be produced.
pub const DEFAULT_STRICT_MARGIN: f64 = 1e-9;

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A caller-supplied convex function. Convexity is a contract, not checked.
#[derive(Clone)]
pub struct GenericConvex {
    dim: usize,
    eval: Evaluator,
}

impl GenericConvex {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl fmt::Debug for GenericConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericConvex")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum ConstraintKind {
    /// `||y - center|| - radius <= 0`
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `normal . y - offset <= 0`
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    GenericConvex(GenericConvex),
}

impl ConstraintKind {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        ConstraintKind::Ball { center, radius }
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Self {
        ConstraintKind::Halfspace { normal, offset }
    }

    pub fn generic<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ConstraintKind::GenericConvex(GenericConvex::new(dim, f))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintKind::Ball { center, .. } => center.len(),
            ConstraintKind::Halfspace { normal, .. } => normal.len(),
            ConstraintKind::GenericConvex(g) => g.dim,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, ConstraintKind::GenericConvex(_))
    }

    fn validate(&self) -> Result<()> {
        match self {
            ConstraintKind::Ball { center, radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(HcrError::InvalidConstraint(format!(
                        "ball radius must be positive and finite, got {radius}"
                    )));
                }
                if center.iter().any(|v| !v.is_finite()) {
                    return Err(HcrError::InvalidConstraint(
                        "ball center is not finite".into(),
                    ));
                }
            }
            ConstraintKind::Halfspace { normal, offset } => {
                if normal.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
                    return Err(HcrError::InvalidConstraint(
                        "halfspace is not finite".into(),
                    ));
                }
                if linalg::norm(normal) == 0.0 {
                    return Err(HcrError::InvalidConstraint(
                        "halfspace normal has zero norm".into(),
                    ));
                }
            }
            ConstraintKind::GenericConvex(_) => {}
        }
        if self.dim() == 0 {
            return Err(HcrError::InvalidConstraint(
                "zero-dimensional constraint".into(),
            ));
        }
        Ok(())
    }
}

/// One constraint of a region, tagged with its position in the region's list.
#[derive(Debug, Clone)]
pub struct Constraint {
    kind: ConstraintKind,
    index: usize,
}

impl Constraint {
    pub fn kind(&self) -> &ConstraintKind {
        &self.kind
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// `c(y)`, checking the dimension of `y`.
    pub fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y)?;
        let v = self.value(y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(HcrError::NonFiniteConstraint { index: self.index })
        }
    }

    /// `c(y)` without the dimension check.
    #[inline]
    pub fn value(&self, y: &[f64]) -> f64 {
        match &self.kind {
            ConstraintKind::Ball { center, radius } => linalg::dist(y, center) - radius,
            ConstraintKind::Halfspace { normal, offset } => dot(normal, y) - offset,
            ConstraintKind::GenericConvex(g) => (g.eval)(y),
        }
    }

    /// A subgradient of `c` at `y`. Generic constraints use central differences.
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        match &self.kind {
            ConstraintKind::Ball { center, .. } => {
                let diff = linalg::sub(y, center);
                let r = linalg::norm(&diff);
                if r == 0.0 {
                    vec![0.0; y.len()]
                } else {
                    diff.into_iter().map(|v| v / r).collect()
                }
            }
            ConstraintKind::Halfspace { normal, .. } => normal.clone(),
            ConstraintKind::GenericConvex(g) => {
                let mut probe = y.to_vec();
                (0..y.len())
                    .map(|i| {
                        let h = 1e-6 * (1.0 + y[i].abs());
                        probe[i] = y[i] + h;
                        let up = (g.eval)(&probe);
                        probe[i] = y[i] - h;
                        let down = (g.eval)(&probe);
                        probe[i] = y[i];
                        (up - down) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    /// Smallest `t > 0` with `c(origin + t * dir) = 0`, assuming `c(origin) < 0`.
    ///
    /// Ball and halfspace crossings are closed-form; rays that never cross a
    /// halfspace return `f64::INFINITY`. Generic constraints go through the
    /// bracketed root finder starting from `initial_hi`.
    pub fn ray_crossing(
        &self,
        origin: &[f64],
        dir: &[f64],
        initial_hi: f64,
        cfg: &RootConfig,
    ) -> Result<f64> {
        match &self.kind {
            ConstraintKind::Ball { center, radius } => {
                // |w + t d|^2 = R^2 with w = O - c:  a t^2 + 2 b t + c0 = 0, c0 < 0
                let (mut a, mut b, mut ww) = (0.0, 0.0, 0.0);
                for ((o, c), d) in origin.iter().zip(center).zip(dir) {
                    let w = o - c;
                    a += d * d;
                    b += w * d;
                    ww += w * w;
                }
                let c0 = ww - radius * radius;
                let disc = (b * b - a * c0).sqrt();
                if b > 0.0 {
                    Ok(-c0 / (b + disc))
                } else {
                    Ok((disc - b) / a)
                }
            }
            ConstraintKind::Halfspace { normal, offset } => {
                let rate = dot(normal, dir);
                if rate > 0.0 {
                    Ok((offset - dot(normal, origin)) / rate)
                } else {
                    Ok(f64::INFINITY)
                }
            }
            ConstraintKind::GenericConvex(g) => {
                let mut point = origin.to_vec();
                let f = |t: f64| {
                    for ((p, o), d) in point.iter_mut().zip(origin).zip(dir) {
                        *p = o + d * t;
                    }
                    (g.eval)(&point)
                };
                rootfind::ray_crossing(f, initial_hi, cfg)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeasibleRegion {
    constraints: Vec<Constraint>,
    origin: Vec<f64>,
    strict_margin: f64,
    tol_feas: f64,
    root_cfg: RootConfig,
    radial_length: f64,
    origin_terms: Vec<OriginTerms>,
}

/// Per-constraint quantities that depend only on the origin, so a ray crossing
/// costs one pass over the direction.
#[derive(Debug, Clone)]
enum OriginTerms {
    /// `w = O - c` (`None` when the origin is the center) and `|w|^2 - R^2`.
    Ball {
        w: Option<Vec<f64>>,
        c0: f64,
    },
    /// `b - a . O`
    Halfspace {
        slack: f64,
    },
    Generic,
}

impl OriginTerms {
    fn new(kind: &ConstraintKind, origin: &[f64]) -> Self {
        match kind {
            ConstraintKind::Ball { center, radius } => {
                let w = linalg::sub(origin, center);
                let c0 = dot(&w, &w) - radius * radius;
                let w = w.iter().any(|&v| v != 0.0).then_some(w);
                OriginTerms::Ball { w, c0 }
            }
            ConstraintKind::Halfspace { normal, offset } => OriginTerms::Halfspace {
                slack: offset - dot(normal, origin),
            },
            ConstraintKind::GenericConvex(_) => OriginTerms::Generic,
        }
    }
}

impl FeasibleRegion {
    /// Builds a region and checks that the origin is strictly feasible.
    ///
    /// Also estimates the radial length (mean frontier distance over the `2n`
    /// signed axis directions), which is the default probe scale for the
    /// restricted constraint search. An unbounded axis direction is reported as
    /// [`HcrError::EscapeBoundExceeded`].
    pub fn new(origin: Vec<f64>, kinds: Vec<ConstraintKind>) -> Result<Self> {
        Self::with_options(origin, kinds, DEFAULT_STRICT_MARGIN, DEFAULT_TOL_FEAS)
    }

    pub fn with_options(
        origin: Vec<f64>,
        kinds: Vec<ConstraintKind>,
        strict_margin: f64,
        tol_feas: f64,
    ) -> Result<Self> {
        if kinds.is_empty() {
            return Err(HcrError::InvalidConstraint(
                "a region needs at least one constraint".into(),
            ));
        }
        if origin.is_empty() || origin.iter().any(|v| !v.is_finite()) {
            return Err(HcrError::InvalidConstraint(
                "origin must be finite and non-empty".into(),
            ));
        }
        if !(strict_margin >= 0.0) || !(tol_feas >= 0.0) {
            return Err(HcrError::InvalidConfig(
                "strict_margin and tol_feas must be non-negative".into(),
            ));
        }
        let n = origin.len();
        let mut constraints = Vec::with_capacity(kinds.len());
        for (index, kind) in kinds.into_iter().enumerate() {
            kind.validate()?;
            if kind.dim() != n {
                return Err(HcrError::DimensionMismatch {
                    expected: n,
                    got: kind.dim(),
                });
            }
            let c = Constraint { kind, index };
            let v = c.value(&origin);
            if !v.is_finite() {
                return Err(HcrError::NonFiniteConstraint { index });
            }
            if !(v < 0.0) {
                return Err(HcrError::OriginNotStrictlyFeasible { index, value: v });
            }
            constraints.push(c);
        }
        let mut region = Self {
            constraints,
            origin,
            strict_margin,
            tol_feas,
            root_cfg: RootConfig::default(),
            radial_length: f64::NAN,
            origin_terms: Vec::new(),
        };
        region.origin_terms = region
            .constraints
            .iter()
            .map(|c| OriginTerms::new(&c.kind, &region.origin))
            .collect();
        region.radial_length = region.estimate_radial_length()?;
        Ok(region)
    }

    pub fn with_root_config(mut self, cfg: RootConfig) -> Result<Self> {
        cfg.validate()?;
        self.root_cfg = cfg;
        Ok(self)
    }

    fn estimate_radial_length(&self) -> Result<f64> {
        let n = self.dim();
        let all: Vec<usize> = (0..self.len()).collect();
        let mut total = 0.0;
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[i] = sign;
                let (s, _) = self.min_crossing(&d, &all, 1.0)?;
                total += s;
            }
        }
        Ok(total / (2 * n) as f64)
    }

    /// Minimum crossing distance along `dir` over `candidates` (ascending
    /// indices), with the lowest index winning ties.
    pub(crate) fn min_crossing(
        &self,
        dir: &[f64],
        candidates: &[usize],
        initial_hi: f64,
    ) -> Result<(f64, usize)> {
        let mut best = (f64::INFINITY, usize::MAX);
        for &i in candidates {
            let t = self.crossing(i, dir, initial_hi)?;
            if t < best.0 {
                best = (t, i);
            }
        }
        if best.0.is_finite() {
            Ok(best)
        } else {
            Err(HcrError::EscapeBoundExceeded {
                bound: rootfind::ESCAPE_FACTOR * initial_hi,
            })
        }
    }

    fn crossing(&self, i: usize, dir: &[f64], initial_hi: f64) -> Result<f64> {
        match (&self.origin_terms[i], &self.constraints[i].kind) {
            (OriginTerms::Ball { w, c0 }, _) => {
                let (a, b) = match w {
                    Some(w) => w
                        .iter()
                        .zip(dir)
                        .fold((0.0, 0.0), |(a, b), (w, d)| (a + d * d, b + w * d)),
                    None => (dot(dir, dir), 0.0),
                };
                let disc = (b * b - a * c0).sqrt();
                Ok(if b > 0.0 {
                    -c0 / (b + disc)
                } else {
                    (disc - b) / a
                })
            }
            (OriginTerms::Halfspace { slack }, ConstraintKind::Halfspace { normal, .. }) => {
                let rate = dot(normal, dir);
                Ok(if rate > 0.0 {
                    slack / rate
                } else {
                    f64::INFINITY
                })
            }
            _ => self.constraints[i].ray_crossing(&self.origin, dir, initial_hi, &self.root_cfg),
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// Number of constraints `m`.
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn strict_margin(&self) -> f64 {
        self.strict_margin
    }

    pub fn tol_feas(&self) -> f64 {
        self.tol_feas
    }

    pub fn root_config(&self) -> &RootConfig {
        &self.root_cfg
    }

    /// Mean frontier distance over the signed axis directions, computed once at
    /// construction.
    pub fn radial_length(&self) -> f64 {
        self.radial_length
    }

    pub fn is_all_halfspaces(&self) -> bool {
        self.constraints
            .iter()
            .all(|c| matches!(c.kind, ConstraintKind::Halfspace { .. }))
    }

    pub fn single_ball(&self) -> Option<(&[f64], f64)> {
        match self.constraints.as_slice() {
            [Constraint {
                kind: ConstraintKind::Ball { center, radius },
                ..
            }] => Some((center, *radius)),
            _ => None,
        }
    }

    pub fn evaluate(&self, index: usize, y: &[f64]) -> Result<f64> {
        self.constraints
            .get(index)
            .ok_or_else(|| HcrError::InvalidConstraint(format!("no constraint {index}")))?
            .evaluate(y)
    }

    pub fn is_feasible(&self, y: &[f64]) -> Result<bool> {
        self.is_feasible_with_tol(y, self.tol_feas)
    }

    pub fn is_feasible_with_tol(&self, y: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), y)?;
        Ok(self.constraints.iter().all(|c| c.value(y) <= tol))
    }

    /// Indices of constraints with `c(y) > tol_feas`, in ascending order.
    pub fn violated_constraints(&self, y: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.dim(), y)?;
        Ok(self.violated_unchecked(y))
    }

    pub(crate) fn violated_unchecked(&self, y: &[f64]) -> Vec<usize> {
        self.constraints
            .iter()
            .filter(|c| c.value(y) > self.tol_feas)
            .map(|c| c.index)
            .collect()
    }

    /// Largest constraint value at `y` (positive means infeasible).
    pub fn max_violation(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y)?;
        Ok(self
            .constraints
            .iter()
            .map(|c| c.value(y))
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

pub(crate) fn check_dim(expected: usize, y: &[f64]) -> Result<()> {
    if y.len() == expected {
        Ok(())
    } else {
        Err(HcrError::DimensionMismatch {
            expected,
            got: y.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn circle() -> FeasibleRegion {
        FeasibleRegion::new(
            vec![0.0, 0.0],
            vec![ConstraintKind::ball(vec![0.0, 0.0], 10.0)],
        )
        .unwrap()
    }

    fn unit_box() -> FeasibleRegion {
        FeasibleRegion::new(
            vec![0.0, 0.0],
            vec![
                ConstraintKind::halfspace(vec![1.0, 0.0], 1.0),
                ConstraintKind::halfspace(vec![-1.0, 0.0], 1.0),
                ConstraintKind::halfspace(vec![0.0, 1.0], 1.0),
                ConstraintKind::halfspace(vec![0.0, -1.0], 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let region = circle();
        let ball = &region.constraints()[0];
        assert_eq!(ball.evaluate(&[5.0, 0.0]).unwrap(), -5.0);
        assert_eq!(ball.evaluate(&[20.0, 0.0]).unwrap(), 10.0);
        let r = unit_box();
        assert_eq!(r.evaluate(0, &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let err = circle().constraints()[0].evaluate(&[1.0]).unwrap_err();
        assert!(matches!(
            err,
            HcrError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        ));
    }

    #[test]
    fn feasibility_examples() {
        let c = circle();
        assert!(c.is_feasible(&[5.0, 0.0]).unwrap());
        assert!(!c.is_feasible(&[10.0 + 1e-6, 0.0]).unwrap());
        assert!(unit_box().is_feasible(&[1.0, 1.0]).unwrap());
        assert!(c.is_feasible(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn violated_examples() {
        let c = circle();
        assert!(c.violated_constraints(&[5.0, 0.0]).unwrap().is_empty());
        assert_eq!(c.violated_constraints(&[20.0, 0.0]).unwrap(), vec![0]);
        assert_eq!(
            unit_box().violated_constraints(&[2.0, -3.0]).unwrap(),
            vec![0, 3]
        );
    }

    #[test]
    fn origin_must_be_strictly_feasible() {
        let err = FeasibleRegion::new(
            vec![1.0, 0.0],
            vec![ConstraintKind::halfspace(vec![1.0, 0.0], 1.0)],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            HcrError::OriginNotStrictlyFeasible { index: 0, .. }
        ));
    }

    #[test]
    fn rejects_bad_constraints() {
        assert!(
            FeasibleRegion::new(vec![0.0], vec![ConstraintKind::ball(vec![0.0], 0.0)]).is_err()
        );
        assert!(
            FeasibleRegion::new(vec![0.0], vec![ConstraintKind::halfspace(vec![0.0], 1.0)])
                .is_err()
        );
        assert!(FeasibleRegion::new(vec![0.0], vec![]).is_err());
        assert!(matches!(
            FeasibleRegion::new(vec![0.0, 0.0], vec![ConstraintKind::ball(vec![0.0], 1.0)]),
            Err(HcrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unbounded_axis_is_an_error() {
        let err = FeasibleRegion::new(
            vec![0.0, 0.0],
            vec![ConstraintKind::halfspace(vec![1.0, 0.0], 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, HcrError::EscapeBoundExceeded { .. }));
    }

    #[test]
    fn radial_length_of_circle_and_box() {
        assert_eq!(circle().radial_length(), 10.0);
        assert_eq!(unit_box().radial_length(), 1.0);
    }

    #[test]
    fn generic_constraint_crossing() {
        // ellipse x^2/4 + y^2 - 1 <= 0
        let region = FeasibleRegion::new(
            vec![0.0, 0.0],
            vec![ConstraintKind::generic(2, |y| {
                y[0] * y[0] / 4.0 + y[1] * y[1] - 1.0
            })],
        )
        .unwrap();
        let t = region.min_crossing(&[1.0, 0.0], &[0], 1.0).unwrap().0;
        assert!((t - 2.0).abs() < 1e-10);
        assert!(region.constraints()[0].value(&[t, 0.0]) <= 0.0);
    }

    #[test]
    fn origin_is_feasible() {
        for r in [circle(), unit_box()] {
            assert!(r.is_feasible(r.origin()).unwrap());
        }
    }

    proptest! {
        #[test]
        fn violated_empty_iff_feasible(x in -15.0f64..15.0, y in -15.0f64..15.0) {
            for r in [circle(), unit_box()] {
                let p = [x, y];
                prop_assert_eq!(
                    r.violated_constraints(&p).unwrap().is_empty(),
                    r.is_feasible(&p).unwrap()
                );
            }
        }

        #[test]
        fn monotone_along_rays(theta in 0.0f64..std::f64::consts::TAU, t1 in 0.0f64..20.0, dt in 0.0f64..20.0) {
            let d = [theta.cos(), theta.sin()];
            let t2 = t1 + dt + 1e-9;
            for r in [circle(), unit_box()] {
                for c in r.constraints() {
                    let v1 = c.value(&linalg::along(r.origin(), &d, t1));
                    let v2 = c.value(&linalg::along(r.origin(), &d, t2));
                    if v1 > 0.0 {
                        prop_assert!(v2 > 0.0);
                    }
                }
            }
        }
    }
}
