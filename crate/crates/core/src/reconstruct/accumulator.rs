use rayon::prelude::*;

use crate::dataset::QuadratureDataset;
use crate::error::{Error, Result};

/// Per-grid-point running mean and (co)variance of a feature vector.
///
/// Updates use Welford's recurrence; partial accumulators combine with the
/// pairwise formula of Chan et al., so the result does not depend on how the
/// records were split (up to rounding).
#[derive(Clone, Debug, PartialEq)]
pub struct GridAccumulator {
    points: usize,
    dim: usize,
    full_cov: bool,
    count: Vec<u64>,
    mean: Vec<f64>,
    /// Sum of centered products: the upper triangle row by row when
    /// `full_cov`, the diagonal otherwise.
    comoment: Vec<f64>,
}

impl GridAccumulator {
    pub fn new(points: usize, dim: usize, full_cov: bool) -> Self {
        let width = if full_cov { dim * (dim + 1) / 2 } else { dim };
        Self {
            points,
            dim,
            full_cov,
            count: vec![0; points],
            mean: vec![0.0; points * dim],
            comoment: vec![0.0; points * width],
        }
    }

    /// Accumulator holding known expectations and no sampling noise.
    pub fn from_means(points: usize, dim: usize, means: Vec<f64>) -> Self {
        assert_eq!(means.len(), points * dim);
        let mut acc = Self::new(points, dim, false);
        acc.count.iter_mut().for_each(|c| *c = 1);
        acc.mean = means;
        acc
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn width(&self) -> usize {
        if self.full_cov {
            self.dim * (self.dim + 1) / 2
        } else {
            self.dim
        }
    }

    pub fn count(&self, point: usize) -> u64 {
        self.count[point]
    }

    pub fn total_count(&self) -> u64 {
        self.count.iter().sum()
    }

    pub fn mean(&self, point: usize) -> &[f64] {
        &self.mean[point * self.dim..(point + 1) * self.dim]
    }

    pub fn push(&mut self, point: usize, features: &[f64]) {
        debug_assert_eq!(features.len(), self.dim);
        self.count[point] += 1;
        let n = self.count[point] as f64;
        let dim = self.dim;
        let width = self.width();
        let mean = &mut self.mean[point * dim..(point + 1) * dim];
        let co = &mut self.comoment[point * width..(point + 1) * width];
        if self.full_cov {
            // δ_old ⊗ δ_new, with δ_new = x − updated mean = δ_old (n−1)/n
            let scale = (n - 1.0) / n;
            let mut deltas = [0.0f64; 64];
            let mut heap;
            let delta: &mut [f64] = if dim <= 64 {
                &mut deltas[..dim]
            } else {
                heap = vec![0.0; dim];
                &mut heap
            };
            for a in 0..dim {
                delta[a] = features[a] - mean[a];
                mean[a] += delta[a] / n;
            }
            let mut k = 0;
            for a in 0..dim {
                let da = delta[a] * scale;
                for b in a..dim {
                    co[k] += da * delta[b];
                    k += 1;
                }
            }
        } else {
            for a in 0..dim {
                let d = features[a] - mean[a];
                mean[a] += d / n;
                co[a] += d * (features[a] - mean[a]);
            }
        }
    }

    /// Folds `other` into `self`.
    pub fn merge(&mut self, other: &GridAccumulator) -> Result<()> {
        if self.points != other.points || self.dim != other.dim || self.full_cov != other.full_cov {
            return Err(Error::GridMismatch(format!(
                "cannot merge accumulators of shape ({} points, {} features) and ({} points, {} features)",
                self.points, self.dim, other.points, other.dim
            )));
        }
        let dim = self.dim;
        let width = self.width();
        for g in 0..self.points {
            let nb = other.count[g];
            if nb == 0 {
                continue;
            }
            let na = self.count[g];
            let ma = &mut self.mean[g * dim..(g + 1) * dim];
            let mb = &other.mean[g * dim..(g + 1) * dim];
            let ca = &mut self.comoment[g * width..(g + 1) * width];
            let cb = &other.comoment[g * width..(g + 1) * width];
            if na == 0 {
                ma.copy_from_slice(mb);
                ca.copy_from_slice(cb);
                self.count[g] = nb;
                continue;
            }
            let n = (na + nb) as f64;
            let f = na as f64 * nb as f64 / n;
            let delta: Vec<f64> = (0..dim).map(|a| mb[a] - ma[a]).collect();
            if self.full_cov {
                let mut k = 0;
                for a in 0..dim {
                    for b in a..dim {
                        ca[k] += cb[k] + delta[a] * delta[b] * f;
                        k += 1;
                    }
                }
            } else {
                for a in 0..dim {
                    ca[a] += cb[a] + delta[a] * delta[a] * f;
                }
            }
            for a in 0..dim {
                ma[a] += delta[a] * nb as f64 / n;
            }
            self.count[g] = na + nb;
        }
        Ok(())
    }

    /// Sample covariance of features `a` and `b` at `point` (divisor `n − 1`);
    /// zero when fewer than two records are present.
    pub fn covariance(&self, point: usize, a: usize, b: usize) -> f64 {
        let n = self.count[point];
        if n < 2 {
            return 0.0;
        }
        let width = self.width();
        let co = &self.comoment[point * width..(point + 1) * width];
        let raw = if self.full_cov {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            co[a * self.dim - a * (a + 1) / 2 + b]
        } else if a == b {
            co[a]
        } else {
            panic!("accumulator tracks variances only")
        };
        raw / (n - 1) as f64
    }

    /// `xᵀ Cov y / n` at one point: the covariance of the two linear
    /// combinations of the point's feature means.
    pub fn mean_quadratic_form(&self, point: usize, x: &[f64], y: &[f64]) -> f64 {
        let n = self.count[point];
        if n < 2 {
            return 0.0;
        }
        let width = self.width();
        let co = &self.comoment[point * width..(point + 1) * width];
        let mut acc = 0.0;
        if self.full_cov {
            let mut k = 0;
            for a in 0..self.dim {
                for b in a..self.dim {
                    let c = co[k];
                    k += 1;
                    if c == 0.0 {
                        continue;
                    }
                    acc += if a == b { c * x[a] * y[a] } else { c * (x[a] * y[b] + x[b] * y[a]) };
                }
            }
        } else {
            for a in 0..self.dim {
                acc += co[a] * x[a] * y[a];
            }
        }
        acc / ((n - 1) as f64 * n as f64)
    }

    /// Fails on the first grid point without data.
    pub fn require_all_sampled(&self) -> Result<()> {
        match self.count.iter().position(|&c| c == 0) {
            Some(g) => Err(Error::UnsampledGridPoint(g)),
            None => Ok(()),
        }
    }
}

/// Splits `len` records into at most `parts` contiguous ranges.
pub fn partition_ranges(len: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.max(1).min(len.max(1));
    let base = len / parts;
    let extra = len % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let size = base + usize::from(i < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}

/// Evaluates `features(grid_index, x, out)` for every record and accumulates.
///
/// Records are cut into one contiguous range per worker; the partial
/// accumulators are merged left to right in range order, so the result is
/// deterministic for a fixed worker count.
pub fn accumulate<F>(dataset: &QuadratureDataset, dim: usize, full_cov: bool, features: F) -> GridAccumulator
where
    F: Fn(usize, f64, &mut [f64]) + Sync,
{
    let points = dataset.grid.len();
    let ranges = partition_ranges(dataset.records.len(), rayon::current_num_threads());
    let partials: Vec<GridAccumulator> = ranges
        .into_par_iter()
        .map(|range| {
            let mut acc = GridAccumulator::new(points, dim, full_cov);
            let mut buf = vec![0.0; dim];
            for r in &dataset.records[range] {
                let g = r.grid_index as usize;
                features(g, r.x_value, &mut buf);
                acc.push(g, &buf);
            }
            acc
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut total = iter.next().unwrap_or_else(|| GridAccumulator::new(points, dim, full_cov));
    for part in iter {
        total.merge(&part).expect("partials share one shape");
    }
    total
}
