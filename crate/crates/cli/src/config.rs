//! JSON run configuration.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use tomolab_core::gaussian_sim::{
    beam_splitter, coherent, displace, phase_shift, squeeze, three_mode_demo_state, vacuum, GaussianState,
};
use tomolab_core::geometry::{GridSpec, PhaseSpacePoint, WeightKind};
use tomolab_core::kernels::MomentIndex;
use tomolab_core::reconstruct::Request;
use tomolab_core::{Error, PhaseSampling, Result};

/// A complex number written as `[re, im]`.
pub type Pair = [f64; 2];

fn complex(p: &Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Squeezed vacuum split over three modes.
    Demo { r: f64 },
    Vacuum { modes: usize },
    Coherent { alpha: Vec<Pair> },
    /// Vacuum on `modes` modes followed by a list of operations.
    Script { modes: usize, ops: Vec<Op> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    Squeeze { mode: usize, r: f64 },
    BeamSplitter { i: usize, j: usize, angle: f64 },
    PhaseShift { mode: usize, phi: f64 },
    Displace { alpha: Vec<Pair> },
}

impl StateSpec {
    pub fn build(&self) -> Result<GaussianState> {
        match self {
            StateSpec::Demo { r } => Ok(three_mode_demo_state(*r)),
            StateSpec::Vacuum { modes } if *modes >= 1 => Ok(vacuum(*modes)),
            StateSpec::Vacuum { .. } => Err(Error::InvalidArgument("vacuum needs at least one mode".into())),
            StateSpec::Coherent { alpha } if !alpha.is_empty() => {
                Ok(coherent(&alpha.iter().map(complex).collect::<Vec<_>>()))
            }
            StateSpec::Coherent { .. } => Err(Error::InvalidArgument("coherent state needs amplitudes".into())),
            StateSpec::Script { modes, ops } => {
                if *modes == 0 {
                    return Err(Error::InvalidArgument("script needs at least one mode".into()));
                }
                ops.iter().try_fold(vacuum(*modes), |s, op| match op {
                    Op::Squeeze { mode, r } => squeeze(&s, *mode, *r),
                    Op::BeamSplitter { i, j, angle } => beam_splitter(&s, *i, *j, *angle),
                    Op::PhaseShift { mode, phi } => phase_shift(&s, *mode, *phi),
                    Op::Displace { alpha } => displace(&s, &alpha.iter().map(complex).collect::<Vec<_>>()),
                })
            }
        }
    }
}

/// Phase-space points for a quasidistribution run; all modes share `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSet {
    /// Real `α = a` on every mode, `a` evenly spaced over `[min, max]`.
    Cut { min: f64, max: f64, count: usize },
    /// `α = x + iy` on every mode, `(x, y)` on a square grid over `[min, max]²`.
    Plane { min: f64, max: f64, count: usize },
    /// Explicit points, one `[re, im]` per mode.
    List { points: Vec<Vec<Pair>> },
}

fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![min],
        _ => (0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect(),
    }
}

impl PointSet {
    pub fn points(&self, modes: usize) -> Result<Vec<PhaseSpacePoint>> {
        match self {
            PointSet::Cut { min, max, count } => {
                Ok(linspace(*min, *max, *count).into_iter().map(|a| PhaseSpacePoint::diagonal(modes, a)).collect())
            }
            PointSet::Plane { min, max, count } => {
                let axis = linspace(*min, *max, *count);
                Ok(axis
                    .iter()
                    .flat_map(|&y| axis.iter().map(move |&x| PhaseSpacePoint::new(vec![Complex64::new(x, y); modes])))
                    .collect())
            }
            PointSet::List { points } => points
                .iter()
                .map(|p| {
                    if p.len() == modes {
                        Ok(PhaseSpacePoint::new(p.iter().map(complex).collect()))
                    } else {
                        Err(Error::Dimension(format!("point with {} entries for {modes} modes", p.len())))
                    }
                })
                .collect(),
        }
    }
}

fn default_q_s() -> f64 {
    -1.0
}

fn default_moment_s() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Simulate,
    Q {
        #[serde(default = "default_q_s")]
        s: f64,
        points: PointSet,
    },
    Rho {
        cutoff: usize,
    },
    Moments {
        #[serde(default = "default_moment_s")]
        s: f64,
        #[serde(default)]
        max_order: u32,
        /// Extra indices beyond the full family up to `max_order`.
        #[serde(default)]
        indices: Vec<MomentIndex>,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Q { .. } => "q",
            Task::Rho { .. } => "rho",
            Task::Moments { .. } => "moments",
        }
    }

    /// The grid kind the task needs, if any.
    pub fn weight_kind(&self) -> Option<WeightKind> {
        match self {
            Task::Simulate => None,
            Task::Q { .. } | Task::Rho { .. } => Some(WeightKind::Quasidistribution),
            Task::Moments { .. } => Some(WeightKind::Moment),
        }
    }

    pub fn request(&self) -> Option<Request> {
        match self {
            Task::Simulate => None,
            Task::Q { s, .. } => Some(Request::Quasidistribution { s: *s }),
            Task::Rho { cutoff } => Some(Request::Rho { cutoff: *cutoff }),
            Task::Moments { s, max_order, indices } => {
                Some(Request::Moments { s: *s, max_order: *max_order, indices: indices.clone() })
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for every file a command writes.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Dataset to reconstruct from; when absent, `reconstruct` simulates one in memory.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub state: StateSpec,
    pub grid: GridSpec,
    pub per_point: usize,
    pub eta: f64,
    pub seed: u64,
    #[serde(default)]
    pub phases: PhaseSampling,
    pub task: Task,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Grid/task compatibility and basic ranges.
    pub fn check(&self) -> Result<()> {
        if let Some(kind) = self.task.weight_kind() {
            if kind != self.grid.weight_kind {
                return Err(Error::GridKind {
                    expected: kind.name().to_string(),
                    found: self.grid.weight_kind.name().to_string(),
                });
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidArgument(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.per_point == 0 {
            return Err(Error::InvalidArgument("per_point must be at least 1".into()));
        }
        Ok(())
    }
}
