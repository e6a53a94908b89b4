use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, WeightKind};
use crate::kernels::{KernelSpec, MomentIndex};
use crate::special_fns::{binomial, MAX_KUMMER_ORDER};

/// What a reconstruction is asked to produce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Request {
    Quasidistribution { s: f64 },
    Rho { cutoff: usize },
    /// Every moment of total order at most `max_order`, plus any listed index.
    Moments {
        s: f64,
        max_order: u32,
        #[serde(default)]
        indices: Vec<MomentIndex>,
    },
}

/// One named inequality and whether it holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of checking a request against a dataset's grid and efficiency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Sufficient number of LO configurations, `(M+1)^{2N−1}`, for moment requests.
    pub sufficient_points: Option<u64>,
    /// Real parameters of the order-M moment family, `C(M+2N−1, M)`.
    pub parameter_count: Option<u64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `Err(Error::Bound)` naming the first failed inequality.
    pub fn into_result(self) -> Result<Self> {
        if let Some(c) = self.failures().next() {
            return Err(Error::Bound(format!("{}: {}", c.name, c.detail)));
        }
        Ok(self)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

/// `(M+1)^{2N−1}`.
pub fn sufficient_point_count(max_order: u32, modes: usize) -> Option<u64> {
    (max_order as u64 + 1).checked_pow(2 * modes as u32 - 1)
}

/// `C(M+2N−1, M)`.
pub fn moment_parameter_count(max_order: u32, modes: usize) -> Option<u64> {
    binomial(max_order as u64 + 2 * modes as u64 - 1, max_order as i64).ok()
}

/// Checks the efficiency, ordering and aliasing limits of a request.
pub fn validate_request(grid: &GridSpec, eta: f64, request: &Request) -> ValidationReport {
    let mut report = ValidationReport { checks: Vec::new(), sufficient_points: None, parameter_count: None };
    let n = grid.modes;
    report.push(
        "eta in (0, 1]",
        eta > 0.0 && eta <= 1.0,
        format!("detection efficiency eta = {eta}"),
    );
    match request {
        Request::Quasidistribution { s } => {
            kind_check(&mut report, grid, WeightKind::Quasidistribution);
            let spec = KernelSpec::new(n, *s, eta);
            report.push(
                "s < s_eta",
                spec.admits_quasidistribution(),
                format!(
                    "ordering parameter must satisfy s < s_eta = -(1-eta)/eta = {:.6}; got s = {s}",
                    spec.s_eta()
                ),
            );
        }
        Request::Rho { cutoff } => {
            kind_check(&mut report, grid, WeightKind::Quasidistribution);
            report.push("eta > 1/2", eta > 0.5, format!("eta must exceed 1/2 for density-matrix sampling; got eta = {eta}"));
            report.push(
                "2*cutoff < N_psi",
                2 * cutoff < grid.psi_count,
                format!(
                    "phase aliasing: Fock cutoff {cutoff} needs 2*cutoff < N_psi = {}",
                    grid.psi_count
                ),
            );
            let order = (n * cutoff) as u32 + n as u32 + 1;
            report.push(
                "kernel order supported",
                order <= MAX_KUMMER_ORDER,
                format!("pattern functions up to cutoff {cutoff} on {n} modes need Kummer order {order} <= {MAX_KUMMER_ORDER}"),
            );
        }
        Request::Moments { s: _, max_order, indices } => {
            kind_check(&mut report, grid, WeightKind::Moment);
            let mut worst_m = 0u32;
            let mut worst_partial = vec![0u32; n.saturating_sub(1)];
            let mut consider = |idx: &MomentIndex| {
                worst_m = worst_m.max(*idx.m.iter().chain(&idx.n).max().unwrap_or(&0));
                for (l, v) in idx.partial_orders().iter().take(n - 1).enumerate() {
                    worst_partial[l] = worst_partial[l].max(*v);
                }
            };
            for idx in indices {
                consider(idx);
            }
            if *max_order > 0 {
                // the family of all orders up to M contains m_1 = M and M_1 = M
                let mut m = vec![0; n];
                m[0] = *max_order;
                consider(&MomentIndex { m, n: vec![0; n] });
            }
            report.push(
                "m_j < N_psi and n_j < N_psi",
                worst_m < grid.psi_count as u32,
                format!(
                    "phase aliasing: largest single-mode index {worst_m} must be below N_psi = {}",
                    grid.psi_count
                ),
            );
            for (l, v) in worst_partial.iter().enumerate() {
                report.push(
                    format!("M_{} < N_theta", l + 1),
                    (*v as usize) < grid.theta_count,
                    format!(
                        "angular aliasing: M_{} = {v} must be below N_theta = {}",
                        l + 1,
                        grid.theta_count
                    ),
                );
            }
            let total = indices.iter().map(|i| i.total_order()).chain([*max_order]).max().unwrap_or(0);
            report.sufficient_points = sufficient_point_count(total, n);
            report.parameter_count = moment_parameter_count(total, n);
        }
    }
    report
}

fn kind_check(report: &mut ValidationReport, grid: &GridSpec, want: WeightKind) {
    report.push(
        format!("{} grid", want.name()),
        grid.weight_kind == want,
        format!("the estimator needs a {} grid, dataset has a {} grid", want.name(), grid.weight_kind.name()),
    );
}
