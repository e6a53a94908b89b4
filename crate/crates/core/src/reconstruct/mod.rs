//! Estimators: sample means of kernel functions weighted over the LO grid.
//!
//! Every estimator has the form `Σ_g w_g · E_g[K(X, g)]`, where `E_g` is the
//! mean over the records taken at grid point `g`. The kernels are expanded in a
//! small per-record feature vector (Kummer or Hermite values) whose running
//! moments are kept per grid point by a [`GridAccumulator`]; the grid-dependent
//! coefficients are applied afterwards. Standard errors come from the
//! per-point sample covariances, `Var = Σ_g aᵀ C_g a / n_g`.
//!
//! The same machinery runs on exact per-point expectations (Gauss–Hermite
//! integration over the detected quadrature law of a Gaussian state), which
//! isolates grid discretization from sampling noise.

mod accumulator;
mod moments;
mod quasi;
mod rho;
mod validate;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use accumulator::{accumulate, partition_ranges, GridAccumulator};
pub use moments::{estimate_moments, mandel_q, moment_indices_up_to, MomentReconstruction, ScalarEstimate};
pub use quasi::{estimate_quasidist, exact_quasidist};
pub use rho::{estimate_rho, fock_indices, RhoReconstruction};
pub use validate::{
    moment_parameter_count, sufficient_point_count, validate_request, Check, Request, ValidationReport,
};

use crate::dataset::{PhaseSampling, QuadratureDataset};
use crate::error::{Error, Result};
use crate::gaussian_sim::{detected_stats, quadrature_stats, GaussianState};
use crate::geometry::{PhaseSpacePoint, SamplingGrid, WeightKind};
use crate::kernels::MomentIndex;
use crate::quadrature::gauss_hermite;

/// A reconstructed value with separate standard errors of its real and
/// imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Complex64,
    pub std_error_re: f64,
    pub std_error_im: f64,
}

impl Estimate {
    pub fn real(value: f64, std_error: f64) -> Self {
        Self { value: Complex64::new(value, 0.0), std_error_re: std_error, std_error_im: 0.0 }
    }

    /// Combined error `√(σ_re² + σ_im²)`.
    pub fn std_error(&self) -> f64 {
        self.std_error_re.hypot(self.std_error_im)
    }

    pub fn conj(&self) -> Self {
        Self { value: self.value.conj(), ..*self }
    }
}

/// What a table row refers to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryKey {
    /// Quasidistribution value at a phase-space point.
    Point { alpha: Vec<Complex64> },
    /// Density-matrix element `⟨m|ρ|n⟩`.
    Fock { m: Vec<u32>, n: Vec<u32> },
    /// Moment `⟨{a†^{m_j} a^{n_j}}_s⟩`.
    Moment { m: Vec<u32>, n: Vec<u32> },
}

impl EntryKey {
    pub fn point(p: &PhaseSpacePoint) -> Self {
        EntryKey::Point { alpha: p.alpha.clone() }
    }

    pub fn fock(idx: &MomentIndex) -> Self {
        EntryKey::Fock { m: idx.m.clone(), n: idx.n.clone() }
    }

    pub fn moment(idx: &MomentIndex) -> Self {
        EntryKey::Moment { m: idx.m.clone(), n: idx.n.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Quasidistribution,
    DensityMatrix,
    Moments,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub key: EntryKey,
    pub estimate: Estimate,
}

/// Covariance of the real parts of entries `a` and `b` (row positions).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryCovariance {
    pub a: usize,
    pub b: usize,
    pub re: f64,
}

/// Reconstructed values with their errors, ready for output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    pub kind: TableKind,
    pub modes: usize,
    pub eta: f64,
    /// Ordering parameter, where one applies.
    pub s: Option<f64>,
    /// Records behind the estimates (zero for exact expectations).
    pub records: u64,
    pub entries: Vec<TableEntry>,
    #[serde(default)]
    pub covariances: Vec<EntryCovariance>,
}

impl EstimateTable {
    pub fn position(&self, key: &EntryKey) -> Option<usize> {
        self.entries.iter().position(|e| &e.key == key)
    }

    pub fn get(&self, key: &EntryKey) -> Option<&Estimate> {
        self.position(key).map(|i| &self.entries[i].estimate)
    }

    /// Stored covariance of the real parts of two rows; the variance when `a == b`.
    pub fn covariance_re(&self, a: usize, b: usize) -> Option<f64> {
        if a == b {
            let e = self.entries.get(a)?.estimate.std_error_re;
            return Some(e * e);
        }
        self.covariances
            .iter()
            .find(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
            .map(|c| c.re)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Where per-point feature means come from.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Source<'a> {
    Data(&'a QuadratureDataset),
    /// Exact expectations for a Gaussian state at efficiency `eta`.
    Exact { state: &'a GaussianState, grid: &'a SamplingGrid, eta: f64, nodes: usize },
}

impl<'a> Source<'a> {
    pub(crate) fn grid(&self) -> &'a SamplingGrid {
        match self {
            Source::Data(d) => &d.grid,
            Source::Exact { grid, .. } => grid,
        }
    }

    pub(crate) fn eta(&self) -> f64 {
        match self {
            Source::Data(d) => d.eta,
            Source::Exact { eta, .. } => *eta,
        }
    }

    pub(crate) fn phases(&self) -> PhaseSampling {
        match self {
            Source::Data(d) => d.phases,
            Source::Exact { .. } => PhaseSampling::Grid,
        }
    }

    pub(crate) fn records(&self) -> u64 {
        match self {
            Source::Data(d) => d.records.len() as u64,
            Source::Exact { .. } => 0,
        }
    }

    /// Grid-kind, emptiness and state-shape checks shared by all estimators.
    pub(crate) fn check(&self, want: WeightKind) -> Result<()> {
        let grid = self.grid();
        if grid.weight_kind() != want {
            return Err(Error::GridKind {
                expected: want.name().to_string(),
                found: grid.weight_kind().name().to_string(),
            });
        }
        match self {
            Source::Data(d) if d.is_empty() => Err(Error::EmptyDataset),
            Source::Exact { state, grid, .. } if state.modes() != grid.modes() => Err(Error::Dimension(format!(
                "state has {} modes, grid {}",
                state.modes(),
                grid.modes()
            ))),
            _ => Ok(()),
        }
    }

    /// Per-point feature statistics; every grid point must carry data.
    pub(crate) fn collect<F>(&self, dim: usize, full_cov: bool, features: F) -> Result<GridAccumulator>
    where
        F: Fn(usize, f64, &mut [f64]) + Sync,
    {
        match self {
            Source::Data(d) => {
                let acc = accumulate(d, dim, full_cov, features);
                acc.require_all_sampled()?;
                Ok(acc)
            }
            Source::Exact { state, grid, eta, nodes } => {
                let rule = gauss_hermite(*nodes);
                let weight_sum: f64 = rule.1.iter().sum();
                let means: Vec<Vec<f64>> = grid
                    .points
                    .par_iter()
                    .enumerate()
                    .map(|(g, point)| {
                        let (m, v) = quadrature_stats(state, &point.config)?;
                        let (m, v) = detected_stats(m, v, *eta);
                        let mut buf = vec![0.0; dim];
                        let mut out = vec![0.0; dim];
                        // one pass over the nodes fills every feature
                        let scale = (2.0 * v).sqrt();
                        for (x, w) in rule.0.iter().zip(&rule.1) {
                            features(g, m + scale * x, &mut buf);
                            for (o, b) in out.iter_mut().zip(&buf) {
                                *o += w * b;
                            }
                        }
                        out.iter_mut().for_each(|o| *o /= weight_sum);
                        Ok(out)
                    })
                    .collect::<Result<_>>()?;
                Ok(GridAccumulator::from_means(grid.len(), dim, means.concat()))
            }
        }
    }
}

/// Accumulates value and error of `Σ_g coef_gᵀ mean_g` over one point.
#[derive(Default)]
pub(crate) struct FormSum {
    value: Complex64,
    var_re: f64,
    var_im: f64,
}

impl FormSum {
    pub(crate) fn add(&mut self, acc: &GridAccumulator, g: usize, re: &[f64], im: &[f64]) {
        let mean = acc.mean(g);
        let mut v = Complex64::new(0.0, 0.0);
        for p in 0..re.len() {
            v += Complex64::new(re[p], im[p]) * mean[p];
        }
        self.value += v;
        self.var_re += acc.mean_quadratic_form(g, re, re);
        self.var_im += acc.mean_quadratic_form(g, im, im);
    }

    pub(crate) fn finish(self) -> Estimate {
        Estimate { value: self.value, std_error_re: self.var_re.max(0.0).sqrt(), std_error_im: self.var_im.max(0.0).sqrt() }
    }
}
