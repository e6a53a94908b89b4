use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::validate::{validate_request, Request};
use super::{EntryCovariance, EntryKey, Estimate, EstimateTable, GridAccumulator, Source, TableEntry, TableKind};
use crate::dataset::{PhaseSampling, QuadratureDataset};
use crate::error::{Error, Result};
use crate::gaussian_sim::GaussianState;
use crate::geometry::{SamplingGrid, WeightKind};
use crate::kernels::{moment_angle_factor, moment_k_product, MomentIndex};
use crate::special_fns::hermite_scaled_all;

/// Every `(m, n)` with `Σ(m_j + n_j) ≤ max_order`, ordered by total order.
pub fn moment_indices_up_to(modes: usize, max_order: u32) -> Vec<MomentIndex> {
    let mut out = Vec::new();
    for order in 0..=max_order {
        let mut digits = vec![0u32; 2 * modes];
        compositions(order, 0, &mut digits, &mut |d| {
            out.push(MomentIndex { m: d[..modes].to_vec(), n: d[modes..].to_vec() });
        });
    }
    out
}

fn compositions(left: u32, slot: usize, digits: &mut [u32], emit: &mut dyn FnMut(&[u32])) {
    if slot + 1 == digits.len() {
        digits[slot] = left;
        emit(digits);
        return;
    }
    for v in (0..=left).rev() {
        digits[slot] = v;
        compositions(left - v, slot + 1, digits, emit);
    }
}

/// All moments up to `max_order`, with covariances among the
/// phase-insensitive (`m = n`) rows.
pub fn estimate_moments(dataset: &QuadratureDataset, s: f64, max_order: u32) -> Result<EstimateTable> {
    MomentReconstruction::from_dataset(dataset, s, max_order)?.table()
}

/// Per-point statistics of the detected Hermite features
/// `P_M(X; ηs + 1 − η)`, `M ≤ max_order`.
///
/// Since `P_M(λx; λ²t) = λ^M P_M(x; t)`, the kernel argument
/// `P_M(X/√η; s + (1−η)/η)` equals `η^{−M/2} P_M(X; ηs + 1 − η)`: for
/// normal ordering (`s = 1`) the features are the loss-free `P_M(X; 1)` and
/// the loss enters only through the `η^{−M/2}` factor.
#[derive(Debug)]
pub struct MomentReconstruction<'a> {
    grid: &'a SamplingGrid,
    eta: f64,
    s: f64,
    max_order: u32,
    phases: PhaseSampling,
    records: u64,
    acc: GridAccumulator,
}

impl<'a> MomentReconstruction<'a> {
    pub fn from_dataset(dataset: &'a QuadratureDataset, s: f64, max_order: u32) -> Result<Self> {
        Self::build(Source::Data(dataset), &dataset.grid, s, max_order)
    }

    pub fn exact(state: &GaussianState, grid: &'a SamplingGrid, eta: f64, s: f64, max_order: u32) -> Result<Self> {
        // the features are polynomials of degree ≤ max_order
        let nodes = max_order as usize / 2 + 2;
        Self::build(Source::Exact { state, grid, eta, nodes }, grid, s, max_order)
    }

    fn build(source: Source<'_>, grid: &'a SamplingGrid, s: f64, max_order: u32) -> Result<Self> {
        source.check(WeightKind::Moment)?;
        let eta = source.eta();
        validate_request(&grid.spec, eta, &Request::Moments { s, max_order, indices: vec![] }).into_result()?;
        let t = eta * s + 1.0 - eta;
        let acc = source.collect(max_order as usize + 1, true, |_, x, out| hermite_scaled_all(x, t, out))?;
        Ok(Self { grid, eta, s, max_order, phases: source.phases(), records: source.records(), acc })
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    fn check_index(&self, idx: &MomentIndex) -> Result<()> {
        if idx.modes() != self.grid.modes() {
            return Err(Error::Dimension(format!("index has {} modes, grid {}", idx.modes(), self.grid.modes())));
        }
        if idx.total_order() > self.max_order {
            return Err(Error::Index(format!(
                "{idx:?} has order {} above the reconstructed maximum {}",
                idx.total_order(),
                self.max_order
            )));
        }
        if self.phases == PhaseSampling::Randomized && idx.m != idx.n {
            return Err(Error::InvalidArgument(format!(
                "phase-randomized data determine phase-insensitive moments only; {idx:?} has m != n"
            )));
        }
        Ok(())
    }

    /// Kernel coefficient of feature `M` at every grid point.
    fn coefficients(&self, idx: &MomentIndex) -> Result<Vec<Complex64>> {
        let per = self.grid.psi_block_len();
        let order = idx.total_order();
        let scale = moment_k_product(idx) * self.eta.powf(-(order as f64) / 2.0);
        let angular: Vec<f64> = (0..self.grid.theta_block_count())
            .map(|t| moment_angle_factor(idx, &self.grid.points[t * per].config.theta))
            .collect::<Result<_>>()?;
        Ok(self
            .grid
            .points
            .iter()
            .enumerate()
            .map(|(g, gp)| {
                let arg: f64 = (0..idx.modes()).map(|j| (idx.n[j] as f64 - idx.m[j] as f64) * gp.config.psi[j]).sum();
                Complex64::from_polar(gp.weight * scale * angular[g / per], arg)
            })
            .collect())
    }

    pub fn moment(&self, idx: &MomentIndex) -> Result<Estimate> {
        self.check_index(idx)?;
        let f = idx.total_order() as usize;
        let coef = self.coefficients(idx)?;
        let mut value = Complex64::new(0.0, 0.0);
        let (mut var_re, mut var_im) = (0.0, 0.0);
        for (g, c) in coef.iter().enumerate() {
            value += c * self.acc.mean(g)[f];
            let n = self.acc.count(g);
            if n > 1 {
                let v = self.acc.covariance(g, f, f) / n as f64;
                var_re += c.re * c.re * v;
                var_im += c.im * c.im * v;
            }
        }
        if idx.m == idx.n {
            // the weight sum of a phase-free kernel is real; drop rounding residue
            value.im = 0.0;
            var_im = 0.0;
        }
        Ok(Estimate { value, std_error_re: var_re.max(0.0).sqrt(), std_error_im: var_im.max(0.0).sqrt() })
    }

    /// Covariance of the real parts of two moment estimates.
    pub fn covariance_re(&self, a: &MomentIndex, b: &MomentIndex) -> Result<f64> {
        self.check_index(a)?;
        self.check_index(b)?;
        let (fa, fb) = (a.total_order() as usize, b.total_order() as usize);
        let (ca, cb) = (self.coefficients(a)?, self.coefficients(b)?);
        let mut cov = 0.0;
        for g in 0..self.grid.len() {
            let n = self.acc.count(g);
            if n > 1 {
                cov += ca[g].re * cb[g].re * self.acc.covariance(g, fa, fb) / n as f64;
            }
        }
        Ok(cov)
    }

    /// All moments up to the maximum order; `C_nm` is stored as the conjugate
    /// of `C_mn`.
    pub fn table(&self) -> Result<EstimateTable> {
        let modes = self.grid.modes();
        let indices: Vec<MomentIndex> = moment_indices_up_to(modes, self.max_order)
            .into_iter()
            .filter(|i| self.phases == PhaseSampling::Grid || i.m == i.n)
            .collect();
        let mut estimates: Vec<Option<Estimate>> = vec![None; indices.len()];
        for (i, idx) in indices.iter().enumerate() {
            let conj = idx.conjugate();
            if conj < *idx {
                if let Some(j) = indices.iter().position(|k| *k == conj) {
                    if let Some(e) = estimates[j] {
                        estimates[i] = Some(e.conj());
                        continue;
                    }
                }
            }
            estimates[i] = Some(self.moment(idx)?);
        }
        let diagonal: Vec<usize> = (0..indices.len()).filter(|&i| indices[i].m == indices[i].n && indices[i].total_order() > 0).collect();
        let mut covariances = Vec::new();
        for (x, &a) in diagonal.iter().enumerate() {
            for &b in &diagonal[x + 1..] {
                covariances.push(EntryCovariance { a, b, re: self.covariance_re(&indices[a], &indices[b])? });
            }
        }
        let entries = indices
            .iter()
            .zip(estimates)
            .map(|(idx, e)| TableEntry { key: EntryKey::moment(idx), estimate: e.expect("filled above") })
            .collect();
        Ok(EstimateTable {
            kind: TableKind::Moments,
            modes,
            eta: self.eta,
            s: Some(self.s),
            records: self.records,
            entries,
            covariances,
        })
    }
}

/// A real derived quantity with its propagated standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Mandel `Q_j = (⟨:n_j²:⟩ − ⟨n_j⟩²)/⟨n_j⟩` from a normally ordered moment
/// table, with first-order error propagation including the covariance of
/// the two moments.
///
/// Undefined (an error) unless `⟨n_j⟩` exceeds its own standard error.
pub fn mandel_q(table: &EstimateTable, mode: usize) -> Result<ScalarEstimate> {
    if table.kind != TableKind::Moments {
        return Err(Error::InvalidArgument("Mandel Q needs a moment table".into()));
    }
    if table.s != Some(1.0) {
        return Err(Error::InvalidArgument(format!(
            "Mandel Q needs normally ordered moments (s = 1), table has s = {:?}",
            table.s
        )));
    }
    if mode >= table.modes {
        return Err(Error::Index(format!("mode {mode} of a {}-mode table", table.modes)));
    }
    let unit = |k: u32| {
        let mut v = vec![0; table.modes];
        v[mode] = k;
        EntryKey::Moment { m: v.clone(), n: v }
    };
    let find = |key: &EntryKey| {
        table
            .position(key)
            .ok_or_else(|| Error::InvalidArgument(format!("moment table lacks {key:?}; reconstruct up to order 4")))
    };
    let (i1, i2) = (find(&unit(1))?, find(&unit(2))?);
    let c1 = table.entries[i1].estimate;
    let c2 = table.entries[i2].estimate;
    let (n1, n2) = (c1.value.re, c2.value.re);
    if !(n1 > c1.std_error_re) || n1 <= 0.0 {
        return Err(Error::Undefined(format!(
            "mean photon number {n1:e} of mode {mode} does not exceed its standard error {:e}",
            c1.std_error_re
        )));
    }
    let v11 = c1.std_error_re * c1.std_error_re;
    let v22 = c2.std_error_re * c2.std_error_re;
    let v12 = table.covariance_re(i1, i2).unwrap_or(0.0);
    let value = (n2 - n1 * n1) / n1;
    let d1 = -n2 / (n1 * n1) - 1.0;
    let d2 = 1.0 / n1;
    let var = d1 * d1 * v11 + d2 * d2 * v22 + 2.0 * d1 * d2 * v12;
    Ok(ScalarEstimate { value, std_error: var.max(0.0).sqrt() })
}
