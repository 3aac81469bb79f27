//! JSON description of a feasible region.
//!
//! ```json
//! {"origin": [0, 0],
//!  "constraints": [{"kind": "ball", "center": [0, 0], "radius": 10},
//!                  {"kind": "halfspace", "normal": [1, 0], "offset": 5}]}
//! ```
//!
//! `strict_margin` and `tol_feas` may be given as optional top-level numbers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraint::{ConstraintKind, FeasibleRegion, DEFAULT_STRICT_MARGIN, DEFAULT_TOL_FEAS};
use crate::error::{HcrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace { normal: Vec<f64>, offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub origin: Vec<f64>,
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_feas: Option<f64>,
}

impl RegionFile {
    pub fn from_region(region: &FeasibleRegion) -> Result<Self> {
        let constraints = region
            .constraints()
            .iter()
            .map(|c| match c.kind() {
                ConstraintKind::Ball { center, radius } => Ok(ConstraintSpec::Ball {
                    center: center.clone(),
                    radius: *radius,
                }),
                ConstraintKind::Halfspace { normal, offset } => Ok(ConstraintSpec::Halfspace {
                    normal: normal.clone(),
                    offset: *offset,
                }),
                ConstraintKind::GenericConvex(_) => Err(HcrError::Unsupported(
                    "generic convex constraints cannot be serialized".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            origin: region.origin().to_vec(),
            constraints,
            strict_margin: Some(region.strict_margin()),
            tol_feas: Some(region.tol_feas()),
        })
    }

    pub fn into_region(self) -> Result<FeasibleRegion> {
        let kinds = self
            .constraints
            .into_iter()
            .map(|c| match c {
                ConstraintSpec::Ball { center, radius } => ConstraintKind::Ball { center, radius },
                ConstraintSpec::Halfspace { normal, offset } => {
                    ConstraintKind::Halfspace { normal, offset }
                }
            })
            .collect();
        FeasibleRegion::with_options(
            self.origin,
            kinds,
            self.strict_margin.unwrap_or(DEFAULT_STRICT_MARGIN),
            self.tol_feas.unwrap_or(DEFAULT_TOL_FEAS),
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_region(path: impl AsRef<Path>) -> Result<FeasibleRegion> {
    let text = fs::read_to_string(path)?;
    RegionFile::parse(&text)?.into_region()
}

pub fn save_region(region: &FeasibleRegion, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, RegionFile::from_region(region)?.to_json()?)?;
    Ok(())
}
