//! Plot data for the sampling-function, biorthogonal-function and
//! three-mode experiment figures. Every curve or surface goes to its own CSV
//! file with a header row; the Monte Carlo figures also write a JSON summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use tomolab_core::gaussian_sim::{analytic_moment, analytic_q, simulate_dataset, three_mode_demo_state};
use tomolab_core::geometry::{build_grid, GridSpec, PhaseSpacePoint, WeightKind};
use tomolab_core::kernels::{f_biorthogonal_closed, s_kernel, KernelSpec, MomentIndex};
use tomolab_core::reconstruct::{estimate_quasidist, mandel_q, EstimateTable, MomentReconstruction, ScalarEstimate};
use tomolab_core::{Error, Result};

use crate::commands::{create, write_json};

/// Seed used by the Monte Carlo figures unless overridden.
pub const FIGURE_SEED: u64 = 19_990_401;
pub const DEMO_R: f64 = 1.0;
pub const DEMO_ETA: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    SamplingFunctions,
    Biorthogonal,
    QuasiCut,
    SingleModeMoments,
    MultimodeMoments,
}

impl Figure {
    pub const ALL: [Figure; 5] = [
        Figure::SamplingFunctions,
        Figure::Biorthogonal,
        Figure::QuasiCut,
        Figure::SingleModeMoments,
        Figure::MultimodeMoments,
    ];

    pub fn number(self) -> u32 {
        match self {
            Figure::SamplingFunctions => 3,
            Figure::Biorthogonal => 4,
            Figure::QuasiCut => 6,
            Figure::SingleModeMoments => 7,
            Figure::MultimodeMoments => 8,
        }
    }

    pub fn parse(which: &str) -> Result<Vec<Figure>> {
        if which == "all" {
            return Ok(Self::ALL.to_vec());
        }
        Self::ALL
            .iter()
            .find(|f| f.number().to_string() == which)
            .map(|f| vec![*f])
            .ok_or_else(|| Error::InvalidArgument(format!("unknown figure {which:?}; expected 3, 4, 6, 7, 8 or all")))
    }
}

/// Sizes of the Monte Carlo figures; the defaults are the full experiment.
#[derive(Clone, Debug)]
pub struct FigureOptions {
    pub out: PathBuf,
    pub seed: u64,
    /// Records per grid point; 50 for the quasidistribution, 200 for moments.
    pub per_point: Option<usize>,
    /// Points per angle and per phase (10).
    pub grid_count: usize,
    /// Points per axis of the `Q(α, α, α)` plane (21).
    pub plane_count: usize,
}

impl FigureOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { out: out.into(), seed: FIGURE_SEED, per_point: None, grid_count: 10, plane_count: 21 }
    }
}

/// Writes the requested figures and returns the files produced.
pub fn cmd_figures(figures: &[Figure], opts: &FigureOptions) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&opts.out).map_err(|e| Error::Io(format!("{}: {e}", opts.out.display())))?;
    let mut files = Vec::new();
    // figures 7 and 8 share one moment dataset
    let mut moments: Option<MomentRun> = None;
    for fig in figures {
        match fig {
            Figure::SamplingFunctions => files.push(sampling_functions(&opts.out)?),
            Figure::Biorthogonal => files.push(biorthogonal(&opts.out)?),
            Figure::QuasiCut => files.extend(quasi_cut(opts)?),
            Figure::SingleModeMoments | Figure::MultimodeMoments => {
                if moments.is_none() {
                    moments = Some(MomentRun::simulate(opts)?);
                }
                let run = moments.as_ref().expect("set above");
                files.extend(if *fig == Figure::SingleModeMoments {
                    run.single_mode(&opts.out)?
                } else {
                    run.multimode(&opts.out)?
                });
            }
        }
    }
    Ok(files)
}

fn csv_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// `S_N(ξ; −1)` for `N = 1..4`, `ξ ∈ [−4, 4]` in steps of 0.02.
fn sampling_functions(out: &Path) -> Result<PathBuf> {
    let path = out.join("fig3_sampling_functions.csv");
    let specs: Vec<KernelSpec> = (1..=4).map(|n| KernelSpec::new(n, -1.0, 1.0)).collect();
    let rows = (0..=400)
        .map(|i| {
            let xi = -4.0 + 0.02 * i as f64;
            let mut row = vec![format!("{xi:.2}")];
            for spec in &specs {
                row.push(num(s_kernel(xi, spec)?));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    csv_rows(&path, &["xi", "s_1", "s_2", "s_3", "s_4"], rows)?;
    Ok(path)
}

/// `F_m^2(θ)` for `m = 0, 1, 2` on `[0, π]`.
fn biorthogonal(out: &Path) -> Result<PathBuf> {
    let path = out.join("fig4_biorthogonal.csv");
    let rows = (0..=360)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / 360.0;
            let mut row = vec![num(theta)];
            for m in 0..=2 {
                row.push(num(f_biorthogonal_closed(m, 2, theta)?));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    csv_rows(&path, &["theta", "f_0", "f_1", "f_2"], rows)?;
    Ok(path)
}

#[derive(Serialize)]
struct QuasiSummary {
    seed: u64,
    records: usize,
    eta: f64,
    points: usize,
    /// Largest `|ΔQ|/σ` over the plane.
    max_abs_z: f64,
    q_origin: Option<Entry>,
}

#[derive(Serialize)]
struct Entry {
    estimate: f64,
    std_error: f64,
    exact: f64,
}

/// Reconstructed and exact `Q(α, α, α)` over a square in the complex plane.
fn quasi_cut(opts: &FigureOptions) -> Result<Vec<PathBuf>> {
    let state = three_mode_demo_state(DEMO_R);
    let spec = GridSpec::new(3, opts.grid_count, opts.grid_count, WeightKind::Quasidistribution);
    let grid = build_grid(&spec)?;
    let dataset = simulate_dataset(&state, &grid, opts.per_point.unwrap_or(50), DEMO_ETA, opts.seed)?;
    let count = opts.plane_count.max(1);
    let axis: Vec<f64> = if count == 1 {
        vec![0.0]
    } else {
        (0..count).map(|i| -1.5 + 3.0 * i as f64 / (count - 1) as f64).collect()
    };
    let points: Vec<PhaseSpacePoint> = axis
        .iter()
        .flat_map(|&y| axis.iter().map(move |&x| PhaseSpacePoint::new(vec![Complex64::new(x, y); 3])))
        .collect();
    let table = estimate_quasidist(&dataset, -1.0, &points)?;
    let mut rows = Vec::with_capacity(points.len());
    let mut max_abs_z: f64 = 0.0;
    let mut origin = None;
    for (p, e) in points.iter().zip(&table.entries) {
        let exact = analytic_q(&state, p)?;
        let est = e.estimate.value.re;
        let sigma = e.estimate.std_error_re;
        let delta = exact - est;
        if sigma > 0.0 {
            max_abs_z = max_abs_z.max(delta.abs() / sigma);
        }
        if p.alpha[0].norm() == 0.0 {
            origin = Some(Entry { estimate: est, std_error: sigma, exact });
        }
        rows.push(vec![
            num(p.alpha[0].re),
            num(p.alpha[0].im),
            num(est),
            num(e.estimate.value.im),
            num(sigma),
            num(exact),
            num(delta),
        ]);
    }
    let csv = opts.out.join("fig6_q_cut.csv");
    csv_rows(&csv, &["alpha_re", "alpha_im", "q_re", "q_im", "std_error", "exact", "delta"], rows)?;
    let json = opts.out.join("fig6_summary.json");
    write_json(
        &json,
        &QuasiSummary {
            seed: opts.seed,
            records: dataset.len(),
            eta: DEMO_ETA,
            points: points.len(),
            max_abs_z,
            q_origin: origin,
        },
    )?;
    Ok(vec![csv, json])
}

/// Normally ordered moments of the demo state from one moment-grid run.
struct MomentRun {
    seed: u64,
    records: u64,
    table: EstimateTable,
    state: tomolab_core::gaussian_sim::GaussianState,
}

#[derive(Serialize)]
struct MomentSummary {
    seed: u64,
    records: u64,
    eta: f64,
    mandel_q: Vec<Option<ScalarEstimate>>,
}

fn unit(k: u32) -> Vec<u32> {
    vec![k, 0, 0]
}

impl MomentRun {
    const MAX_ORDER: u32 = 8;

    fn simulate(opts: &FigureOptions) -> Result<Self> {
        let state = three_mode_demo_state(DEMO_R);
        let spec = GridSpec::new(3, opts.grid_count, opts.grid_count, WeightKind::Moment);
        let grid = build_grid(&spec)?;
        let dataset = simulate_dataset(&state, &grid, opts.per_point.unwrap_or(200), DEMO_ETA, opts.seed)?;
        let table = MomentReconstruction::from_dataset(&dataset, 1.0, Self::MAX_ORDER)?.table()?;
        Ok(Self { seed: opts.seed, records: dataset.len() as u64, table, state })
    }

    fn row(&self, label: &str, idx: &MomentIndex) -> Result<Vec<String>> {
        let key = tomolab_core::reconstruct::EntryKey::moment(idx);
        let e = self
            .table
            .get(&key)
            .ok_or_else(|| Error::Index(format!("{idx:?} is not in the moment table")))?;
        let exact = analytic_moment(&self.state, &idx.m, &idx.n, 1.0)?;
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        Ok(vec![
            label.to_string(),
            join(&idx.m),
            join(&idx.n),
            num(e.value.re),
            num(e.value.im),
            num(e.std_error_re),
            num(e.std_error_im),
            num(exact.re),
            num(exact.im),
        ])
    }

    fn write(&self, path: &Path, rows: &[(String, MomentIndex)]) -> Result<()> {
        let rows = rows.iter().map(|(l, i)| self.row(l, i)).collect::<Result<Vec<_>>>()?;
        csv_rows(
            path,
            &["moment", "m", "n", "value_re", "value_im", "std_error_re", "std_error_im", "exact_re", "exact_im"],
            rows,
        )
    }

    fn single_mode(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let mut rows = Vec::new();
        for k in 1..=4 {
            rows.push((format!(":n_1^{k}:"), MomentIndex { m: unit(k), n: unit(k) }));
        }
        for k in 1..=6 {
            rows.push((format!("a_1^{k}"), MomentIndex { m: unit(0), n: unit(k) }));
        }
        let csv = out.join("fig7_single_mode_moments.csv");
        self.write(&csv, &rows)?;
        let json = out.join("fig7_summary.json");
        write_json(
            &json,
            &MomentSummary {
                seed: self.seed,
                records: self.records,
                eta: DEMO_ETA,
                mandel_q: (0..3).map(|j| mandel_q(&self.table, j).ok()).collect(),
            },
        )?;
        Ok(vec![csv, json])
    }

    fn multimode(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let idx = |m: [u32; 3], n: [u32; 3]| MomentIndex { m: m.to_vec(), n: n.to_vec() };
        let rows = vec![
            (":n_1 n_2:".to_string(), idx([1, 1, 0], [1, 1, 0])),
            (":n_1 n_2 n_3:".to_string(), idx([1, 1, 1], [1, 1, 1])),
            (":n_1^2 n_2:".to_string(), idx([2, 1, 0], [2, 1, 0])),
            (":n_1^2 n_2^2:".to_string(), idx([2, 2, 0], [2, 2, 0])),
            ("a_1 a_2".to_string(), idx([0, 0, 0], [1, 1, 0])),
            ("a_1^+ a_2".to_string(), idx([1, 0, 0], [0, 1, 0])),
            ("a_1 a_2 a_3^2".to_string(), idx([0, 0, 0], [1, 1, 2])),
            ("a_1^2 a_2^2".to_string(), idx([0, 0, 0], [2, 2, 0])),
        ];
        let csv = out.join("fig8_multimode_moments.csv");
        self.write(&csv, &rows)?;
        Ok(vec![csv])
    }
}
