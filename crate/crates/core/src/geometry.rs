use serde::{Deserialize, Serialize};

use crate::error::{Result, SsfError};
use crate::solutions::BoundaryCondition;

/// Where the operator lives and which boundary conditions it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "kebab-case")]
pub enum Geometry {
    Interval {
        length: f64,
        alpha: BoundaryCondition,
        beta: BoundaryCondition,
    },
    HalfLine {
        alpha: BoundaryCondition,
    },
}

impl Geometry {
    pub fn interval(length: f64, alpha: BoundaryCondition, beta: BoundaryCondition) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(SsfError::domain(format!("interval length R = {length} must be positive")));
        }
        Ok(Geometry::Interval { length, alpha, beta })
    }

    pub fn halfline(alpha: BoundaryCondition) -> Self {
        Geometry::HalfLine { alpha }
    }

    pub fn dirichlet_interval(length: f64) -> Result<Self> {
        Self::interval(length, BoundaryCondition::DIRICHLET, BoundaryCondition::DIRICHLET)
    }

    pub fn alpha(&self) -> BoundaryCondition {
        match self {
            Geometry::Interval { alpha, .. } | Geometry::HalfLine { alpha } => *alpha,
        }
    }

    pub fn length(&self) -> Option<f64> {
        match self {
            Geometry::Interval { length, .. } => Some(*length),
            Geometry::HalfLine { .. } => None,
        }
    }
}
