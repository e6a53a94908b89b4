//! `simulate`, `reconstruct` and `validate`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use tomolab_core::gaussian_sim::{analytic_moment, analytic_q, analytic_rho, simulate_dataset_with, GaussianState};
use tomolab_core::geometry::build_grid;
use tomolab_core::io::{load_dataset, save_dataset, write_table_csv, write_table_json, Encoding};
use tomolab_core::reconstruct::{
    estimate_quasidist, estimate_rho, mandel_q, validate_request, EntryKey, EstimateTable, MomentReconstruction,
    ScalarEstimate, TableEntry, TableKind, ValidationReport,
};
use tomolab_core::{Error, QuadratureDataset, Result};

use crate::config::{RunConfig, Task};

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub eta: Option<f64>,
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = Some(out.clone());
        }
        if let Some(ds) = &self.dataset {
            cfg.output.dataset = Some(ds.clone());
        }
        cfg.check()?;
        Ok(cfg)
    }
}

pub fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<QuadratureDataset> {
    let state = cfg.state.build()?;
    let grid = build_grid(&cfg.grid)?;
    simulate_dataset_with(&state, &grid, cfg.per_point, cfg.eta, cfg.seed, cfg.phases)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateSummary {
    pub path: PathBuf,
    pub records: usize,
    pub grid_points: usize,
    pub modes: usize,
}

/// Simulates the configured experiment and writes `dataset.csv` (or `.bin`).
pub fn cmd_simulate(cfg: &RunConfig, encoding: Encoding) -> Result<SimulateSummary> {
    let dataset = simulate(cfg)?;
    let name = if encoding == Encoding::Binary { "dataset.bin" } else { "dataset.csv" };
    let path = output_dir(cfg)?.join(name);
    save_dataset(&path, &dataset, encoding)?;
    Ok(SimulateSummary { path, records: dataset.len(), grid_points: dataset.grid.len(), modes: dataset.modes() })
}

/// Checks the configured task against the grid and efficiency.
pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidationReport> {
    let request = cfg
        .task
        .request()
        .ok_or_else(|| Error::InvalidArgument("the simulate task has nothing to validate".into()))?;
    Ok(validate_request(&cfg.grid, cfg.eta, &request))
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructSummary {
    pub task: String,
    pub records: u64,
    pub entries: usize,
    /// Mandel parameter of each mode, for normally ordered moment runs.
    pub mandel: Vec<Option<ScalarEstimate>>,
    pub files: Vec<PathBuf>,
}

/// Runs the configured reconstruction and writes `estimates.json`,
/// `estimates.csv` (with exact-value columns) and `validation.json`.
pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<ReconstructSummary> {
    let dir = output_dir(cfg)?;
    let report = cmd_validate(cfg)?;
    let validation = dir.join("validation.json");
    write_json(&validation, &report)?;
    report.into_result()?;

    let dataset = match &cfg.output.dataset {
        Some(path) => load_dataset(path)?,
        None => simulate(cfg)?,
    };
    let state = cfg.state.build()?;
    if state.modes() != dataset.modes() {
        return Err(Error::Dimension(format!("state has {} modes, dataset {}", state.modes(), dataset.modes())));
    }
    if dataset.grid.spec != cfg.grid || dataset.eta != cfg.eta {
        // the dataset is authoritative; re-check the request against what it holds
        let request = cfg.task.request().expect("validated above");
        validate_request(&dataset.grid.spec, dataset.eta, &request).into_result()?;
    }
    let table = reconstruct_table(&cfg.task, &dataset)?;
    let reference = reference_values(&state, &table)?;

    let json = dir.join("estimates.json");
    let csv = dir.join("estimates.csv");
    let mut w = create(&json)?;
    write_table_json(&mut w, &table)?;
    w.flush()?;
    let mut w = create(&csv)?;
    write_table_csv(&mut w, &table, reference.as_deref())?;
    w.flush()?;

    let mandel = if table.kind == TableKind::Moments && table.s == Some(1.0) {
        (0..table.modes).map(|j| mandel_q(&table, j).ok()).collect()
    } else {
        Vec::new()
    };
    Ok(ReconstructSummary {
        task: cfg.task.name().into(),
        records: table.records,
        entries: table.len(),
        mandel,
        files: vec![json, csv, validation],
    })
}

pub fn reconstruct_table(task: &Task, dataset: &QuadratureDataset) -> Result<EstimateTable> {
    match task {
        Task::Simulate => Err(Error::InvalidArgument("the simulate task does not reconstruct".into())),
        Task::Q { s, points } => estimate_quasidist(dataset, *s, &points.points(dataset.modes())?),
        Task::Rho { cutoff } => estimate_rho(dataset, *cutoff),
        Task::Moments { s, max_order, indices } => {
            let top = indices.iter().map(|i| i.total_order()).fold(*max_order, u32::max);
            let rec = MomentReconstruction::from_dataset(dataset, *s, top)?;
            let mut table = if top == *max_order {
                rec.table()?
            } else {
                // only the listed indices above the requested family order
                let low = MomentReconstruction::from_dataset(dataset, *s, *max_order)?;
                low.table()?
            };
            for idx in indices {
                let key = EntryKey::moment(idx);
                if table.position(&key).is_none() {
                    table.entries.push(TableEntry { key, estimate: rec.moment(idx)? });
                }
            }
            Ok(table)
        }
    }
}

/// Exact values for every row, when the state gives them in closed form.
pub fn reference_values(state: &GaussianState, table: &EstimateTable) -> Result<Option<Vec<Complex64>>> {
    match table.kind {
        TableKind::Quasidistribution if table.s == Some(-1.0) => table
            .entries
            .iter()
            .map(|e| match &e.key {
                EntryKey::Point { alpha } => {
                    analytic_q(state, &tomolab_core::geometry::PhaseSpacePoint::new(alpha.clone())).map(Complex64::from)
                }
                _ => Err(Error::Format("non-point key in a quasidistribution table".into())),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
        TableKind::Quasidistribution => Ok(None),
        TableKind::DensityMatrix => {
            let cutoff = table
                .entries
                .iter()
                .filter_map(|e| match &e.key {
                    EntryKey::Fock { m, n } => m.iter().chain(n).max().copied(),
                    _ => None,
                })
                .max()
                .unwrap_or(0) as usize;
            let rho = analytic_rho(state, cutoff)?;
            let as_usize = |v: &[u32]| v.iter().map(|&k| k as usize).collect::<Vec<_>>();
            table
                .entries
                .iter()
                .map(|e| match &e.key {
                    EntryKey::Fock { m, n } => Ok(rho.get(&as_usize(m), &as_usize(n))),
                    _ => Err(Error::Format("non-Fock key in a density-matrix table".into())),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        }
        TableKind::Moments => {
            let s = table.s.unwrap_or(1.0);
            table
                .entries
                .iter()
                .map(|e| match &e.key {
                    EntryKey::Moment { m, n } => analytic_moment(state, m, n, s),
                    _ => Err(Error::Format("non-moment key in a moment table".into())),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        }
    }
}
