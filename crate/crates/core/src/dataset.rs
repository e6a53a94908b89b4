use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SamplingGrid;

/// One detected quadrature value `X′` at a grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub grid_index: u32,
    pub x_value: f64,
}

/// How the LO phases were chosen when the data were taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSampling {
    /// Phases are the grid values.
    #[default]
    Grid,
    /// Every record used independent uniform phases; only the θ part of the
    /// grid index is meaningful. Such data determine phase-insensitive
    /// quantities only.
    Randomized,
}

/// Measurement records together with the grid and efficiency they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureDataset {
    pub grid: SamplingGrid,
    pub eta: f64,
    pub seed: Option<u64>,
    pub phases: PhaseSampling,
    pub records: Vec<MeasurementRecord>,
    pub per_point_counts: Vec<u64>,
}

impl QuadratureDataset {
    /// Checks indices and efficiency and tallies the per-point counts.
    pub fn new(
        grid: SamplingGrid,
        eta: f64,
        seed: Option<u64>,
        phases: PhaseSampling,
        records: Vec<MeasurementRecord>,
    ) -> Result<Self> {
        check_eta(eta)?;
        let mut per_point_counts = vec![0u64; grid.len()];
        for (i, r) in records.iter().enumerate() {
            let slot = per_point_counts.get_mut(r.grid_index as usize).ok_or_else(|| {
                Error::Index(format!(
                    "record {i} references grid point {} but the grid has {} points",
                    r.grid_index,
                    grid.len()
                ))
            })?;
            *slot += 1;
        }
        Ok(Self { grid, eta, seed, phases, records, per_point_counts })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.grid.modes()
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eta must lie in (0, 1], got {eta}")))
    }
}
