use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{EntryKey, Estimate, EstimateTable, FormSum, GridAccumulator, Source, TableEntry, TableKind};
use super::validate::{validate_request, Request};
use crate::dataset::{PhaseSampling, QuadratureDataset};
use crate::error::{Error, Result};
use crate::gaussian_sim::GaussianState;
use crate::geometry::{SamplingGrid, WeightKind};
use crate::kernels::{pattern_coefficients, xi_function_all, MomentIndex};

/// Every index `(m, n)` with all entries at most `cutoff`, `m_1` varying fastest.
pub fn fock_indices(modes: usize, cutoff: usize) -> Vec<MomentIndex> {
    let base = cutoff + 1;
    let total = base.pow(2 * modes as u32);
    (0..total)
        .map(|mut flat| {
            let mut m = vec![0; modes];
            let mut n = vec![0; modes];
            for slot in m.iter_mut().chain(n.iter_mut()) {
                *slot = (flat % base) as u32;
                flat /= base;
            }
            MomentIndex { m, n }
        })
        .collect()
}

/// Sampled density matrix in the Fock basis up to a per-mode cutoff.
pub fn estimate_rho(dataset: &QuadratureDataset, cutoff: usize) -> Result<EstimateTable> {
    RhoReconstruction::from_dataset(dataset, cutoff)?.table()
}

/// Per-point statistics of `Ξ_N(X/√(2η−1), p)`, from which any element up to
/// the cutoff, and any linear combination of elements, can be formed.
#[derive(Debug)]
pub struct RhoReconstruction<'a> {
    grid: &'a SamplingGrid,
    eta: f64,
    cutoff: usize,
    phases: PhaseSampling,
    records: u64,
    acc: GridAccumulator,
}

impl<'a> RhoReconstruction<'a> {
    pub fn from_dataset(dataset: &'a QuadratureDataset, cutoff: usize) -> Result<Self> {
        Self::build(Source::Data(dataset), &dataset.grid, cutoff)
    }

    /// Exact expectations for `state` in place of sample means.
    pub fn exact(
        state: &GaussianState,
        grid: &'a SamplingGrid,
        eta: f64,
        cutoff: usize,
        nodes: usize,
    ) -> Result<Self> {
        Self::build(Source::Exact { state, grid, eta, nodes }, grid, cutoff)
    }

    fn build(source: Source<'_>, grid: &'a SamplingGrid, cutoff: usize) -> Result<Self> {
        source.check(WeightKind::Quasidistribution)?;
        let eta = source.eta();
        validate_request(&grid.spec, eta, &Request::Rho { cutoff }).into_result()?;
        let modes = grid.modes();
        let dim = 2 * modes * cutoff + 1;
        let scale = 1.0 / (2.0 * eta - 1.0).sqrt();
        let acc = source.collect(dim, true, |_, x, out| xi_function_all(modes, x * scale, out))?;
        Ok(Self { grid, eta, cutoff, phases: source.phases(), records: source.records(), acc })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn check_index(&self, idx: &MomentIndex) -> Result<()> {
        if idx.modes() != self.grid.modes() {
            return Err(Error::Dimension(format!("index has {} modes, grid {}", idx.modes(), self.grid.modes())));
        }
        if idx.m.iter().chain(&idx.n).any(|&k| k as usize > self.cutoff) {
            return Err(Error::Index(format!("{idx:?} exceeds the cutoff {}", self.cutoff)));
        }
        if self.phases == PhaseSampling::Randomized && idx.m != idx.n {
            return Err(Error::InvalidArgument(format!(
                "phase-randomized data determine diagonal elements only; {idx:?} is off-diagonal"
            )));
        }
        Ok(())
    }

    /// Pattern-function coefficients of `idx` for every θ block.
    fn block_coefficients(&self, idx: &MomentIndex) -> Result<Vec<Vec<f64>>> {
        let per = self.grid.psi_block_len();
        (0..self.grid.theta_block_count())
            .map(|t| pattern_coefficients(idx, &self.grid.points[t * per].u, self.eta))
            .collect()
    }

    pub fn element(&self, idx: &MomentIndex) -> Result<Estimate> {
        self.combination(&[(idx.clone(), Complex64::new(1.0, 0.0))])
    }

    /// `Σ_i c_i ρ_{m_i n_i}` with an error that includes all covariances.
    pub fn combination(&self, terms: &[(MomentIndex, Complex64)]) -> Result<Estimate> {
        for (idx, _) in terms {
            self.check_index(idx)?;
        }
        let coeffs: Vec<Vec<Vec<f64>>> = terms.iter().map(|(i, _)| self.block_coefficients(i)).collect::<Result<_>>()?;
        let dim = self.acc.dim();
        let mut sum = FormSum::default();
        let mut re = vec![0.0; dim];
        let mut im = vec![0.0; dim];
        for (g, gp) in self.grid.points.iter().enumerate() {
            let t = self.grid.theta_block(g);
            re.iter_mut().for_each(|v| *v = 0.0);
            im.iter_mut().for_each(|v| *v = 0.0);
            for ((idx, c), cf) in terms.iter().zip(&coeffs) {
                let arg: f64 = (0..idx.modes()).map(|j| (idx.m[j] as f64 - idx.n[j] as f64) * gp.config.psi[j]).sum();
                let z = c * Complex64::from_polar(gp.weight, arg);
                for (p, v) in cf[t].iter().enumerate() {
                    re[p] += z.re * v;
                    im[p] += z.im * v;
                }
            }
            sum.add(&self.acc, g, &re, &im);
        }
        Ok(sum.finish())
    }

    /// `Tr ρ` over the captured block, with its propagated error.
    pub fn trace(&self) -> Result<Estimate> {
        let terms: Vec<_> = fock_indices(self.grid.modes(), self.cutoff)
            .into_iter()
            .filter(|i| i.m == i.n)
            .map(|i| (i, Complex64::new(1.0, 0.0)))
            .collect();
        self.combination(&terms)
    }

    /// All elements up to the cutoff (diagonal only for phase-randomized data).
    ///
    /// Elements sharing `m − n` share their phase sums, so the grid is swept
    /// once per distinct difference; `ρ_nm` is stored as the conjugate of
    /// `ρ_mn`, making the table Hermitian by construction.
    pub fn table(&self) -> Result<EstimateTable> {
        let modes = self.grid.modes();
        let indices: Vec<MomentIndex> = fock_indices(modes, self.cutoff)
            .into_iter()
            .filter(|i| self.phases == PhaseSampling::Grid || i.m == i.n)
            .collect();
        let mut groups: BTreeMap<Vec<i64>, Vec<&MomentIndex>> = BTreeMap::new();
        for idx in &indices {
            if idx.conjugate() < *idx {
                continue;
            }
            let d: Vec<i64> = (0..modes).map(|j| idx.m[j] as i64 - idx.n[j] as i64).collect();
            groups.entry(d).or_default().push(idx);
        }
        let dim = self.acc.dim();
        let per = self.grid.psi_block_len();
        let blocks = self.grid.theta_block_count();
        let mut values: BTreeMap<MomentIndex, Estimate> = BTreeMap::new();
        for (d, members) in groups {
            let mut phase_sum = vec![Complex64::new(0.0, 0.0); blocks * dim];
            let mut cos_cov = vec![0.0; blocks * dim * dim];
            let mut sin_cov = vec![0.0; blocks * dim * dim];
            for (g, gp) in self.grid.points.iter().enumerate() {
                let t = g / per;
                let arg: f64 = d.iter().zip(&gp.config.psi).map(|(k, p)| *k as f64 * p).sum();
                let z = Complex64::from_polar(gp.weight, arg);
                let mean = self.acc.mean(g);
                for p in 0..dim {
                    phase_sum[t * dim + p] += z * mean[p];
                }
                let n = self.acc.count(g);
                if n < 2 {
                    continue;
                }
                let (cc, ss) = (z.re * z.re / n as f64, z.im * z.im / n as f64);
                let base = t * dim * dim;
                for a in 0..dim {
                    for b in a..dim {
                        let c = self.acc.covariance(g, a, b);
                        cos_cov[base + a * dim + b] += cc * c;
                        sin_cov[base + a * dim + b] += ss * c;
                    }
                }
            }
            for idx in members {
                let cf = self.block_coefficients(idx)?;
                let mut value = Complex64::new(0.0, 0.0);
                let (mut var_re, mut var_im) = (0.0, 0.0);
                for (t, c) in cf.iter().enumerate() {
                    for (p, cp) in c.iter().enumerate() {
                        if *cp == 0.0 {
                            continue;
                        }
                        value += phase_sum[t * dim + p] * cp;
                        let base = t * dim * dim;
                        for (q, cq) in c.iter().enumerate().skip(p) {
                            let w = if q == p { cp * cq } else { 2.0 * cp * cq };
                            var_re += w * cos_cov[base + p * dim + q];
                            var_im += w * sin_cov[base + p * dim + q];
                        }
                    }
                }
                values.insert(
                    idx.clone(),
                    Estimate { value, std_error_re: var_re.max(0.0).sqrt(), std_error_im: var_im.max(0.0).sqrt() },
                );
            }
        }
        let entries = indices
            .iter()
            .map(|idx| {
                let estimate = match values.get(idx) {
                    Some(e) if idx.m == idx.n => Estimate { value: Complex64::new(e.value.re, 0.0), std_error_im: 0.0, ..*e },
                    Some(e) => *e,
                    None => values[&idx.conjugate()].conj(),
                };
                TableEntry { key: EntryKey::fock(idx), estimate }
            })
            .collect();
        Ok(EstimateTable {
            kind: TableKind::DensityMatrix,
            modes,
            eta: self.eta,
            s: None,
            records: self.records,
            entries,
            covariances: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fock_index_enumeration() {
        let all = fock_indices(2, 1);
        assert_eq!(all.len(), 16);
        assert_eq!(all[1], MomentIndex { m: vec![1, 0], n: vec![0, 0] });
        assert_eq!(all[2], MomentIndex { m: vec![0, 1], n: vec![0, 0] });
    }
}
