//! Local-oscillator geometry.
//!
//! A normalized LO mode `A = Σ_j z_j a_j` is parametrized by `N − 1` angles
//! and `N` phases,
//!
//! ```text
//! z_j = u_j(θ) e^{−iψ_j},  u_j = cosθ_j Π_{l<j} sinθ_l,  u_N = Π_{l<N} sinθ_l,
//! ```
//!
//! and the measured quadrature is `X = (A + A†)/√2`. Integrals over all LO
//! configurations use `dΩ = g(θ) dθ dψ` with
//! `g(θ) = Π_l cosθ_l (sinθ_l)^{2(N−l)−1}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{Error, Result};

/// Angles and phases selecting one LO mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoConfiguration {
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
}

impl LoConfiguration {
    pub fn new(theta: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::Dimension("an LO configuration needs at least one phase".into()));
        }
        if theta.len() + 1 != psi.len() {
            return Err(Error::Dimension(format!(
                "{} phases require {} angles, got {}",
                psi.len(),
                psi.len() - 1,
                theta.len()
            )));
        }
        Ok(Self { theta, psi })
    }

    pub fn modes(&self) -> usize {
        self.psi.len()
    }
}

/// A point `{α_j}` of the multimode phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub alpha: Vec<Complex64>,
}

impl PhaseSpacePoint {
    pub fn new(alpha: Vec<Complex64>) -> Self {
        Self { alpha }
    }

    /// `(a, a, …, a)` for real `a`: the diagonal cut used in the Q-function plots.
    pub fn diagonal(modes: usize, a: f64) -> Self {
        Self { alpha: vec![Complex64::new(a, 0.0); modes] }
    }

    pub fn modes(&self) -> usize {
        self.alpha.len()
    }
}

/// `u_j(θ)`.
pub fn direction_cosines(theta: &[f64], modes: usize) -> Result<Vec<f64>> {
    if modes == 0 || theta.len() + 1 != modes {
        return Err(Error::Dimension(format!(
            "{modes} modes require {} angles, got {}",
            modes.saturating_sub(1),
            theta.len()
        )));
    }
    let mut u = Vec::with_capacity(modes);
    let mut sines = 1.0;
    for &t in theta {
        u.push(t.cos() * sines);
        sines *= t.sin();
    }
    u.push(sines);
    Ok(u)
}

/// `z_j = u_j e^{−iψ_j}`.
pub fn mode_coefficients(config: &LoConfiguration) -> Result<Vec<Complex64>> {
    let u = direction_cosines(&config.theta, config.psi.len())?;
    Ok(u.iter()
        .zip(&config.psi)
        .map(|(&uj, &p)| Complex64::from_polar(uj, -p))
        .collect())
}

/// Jacobian `g(θ)` of the hyperspherical measure.
pub fn jacobian_weight(theta: &[f64], modes: usize) -> Result<f64> {
    if modes == 0 || theta.len() + 1 != modes {
        return Err(Error::Dimension(format!(
            "{modes} modes require {} angles, got {}",
            modes.saturating_sub(1),
            theta.len()
        )));
    }
    Ok(theta
        .iter()
        .enumerate()
        .map(|(i, &t)| t.cos() * t.sin().powi((2 * (modes - i - 1) - 1) as i32))
        .product())
}

/// The c-number quadrature `X̃ = (1/√2) Σ_j (z_j α_j + c.c.)`.
pub fn projected_quadrature(alpha: &PhaseSpacePoint, config: &LoConfiguration) -> Result<f64> {
    if alpha.modes() != config.modes() {
        return Err(Error::Dimension(format!(
            "phase-space point has {} modes, LO configuration {}",
            alpha.modes(),
            config.modes()
        )));
    }
    let z = mode_coefficients(config)?;
    Ok(SQRT_2 * z.iter().zip(&alpha.alpha).map(|(z, a)| (z * a).re).sum::<f64>())
}

/// `X̃` from precomputed direction cosines; no dimension checks.
pub(crate) fn projected_quadrature_raw(u: &[f64], psi: &[f64], alpha: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..u.len() {
        let (s, c) = psi[j].sin_cos();
        acc += u[j] * (c * alpha[j].re + s * alpha[j].im);
    }
    SQRT_2 * acc
}

/// Which integration measure the grid weights discretize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `θ ∈ (0, π/2]`, `ψ ∈ (0, 2π]`, weights include `g(θ)`.
    Quasidistribution,
    /// `θ ∈ (0, π]`, `ψ ∈ (0, π]`, plain product weights.
    Moment,
}

impl WeightKind {
    pub fn name(self) -> &'static str {
        match self {
            WeightKind::Quasidistribution => "quasidistribution",
            WeightKind::Moment => "moment",
        }
    }

    pub fn theta_max(self) -> f64 {
        match self {
            WeightKind::Quasidistribution => FRAC_PI_2,
            WeightKind::Moment => PI,
        }
    }

    pub fn psi_max(self) -> f64 {
        match self {
            WeightKind::Quasidistribution => 2.0 * PI,
            WeightKind::Moment => PI,
        }
    }
}

/// Node placement inside each grid cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// `θ^{(k)} = k·Δθ`, `k = 1..count`.
    #[default]
    RightEndpoint,
    /// `θ^{(k)} = (k − 1/2)·Δθ`.
    Midpoint,
}

/// Everything needed to rebuild a grid; this is what dataset headers store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub modes: usize,
    pub theta_count: usize,
    pub psi_count: usize,
    pub weight_kind: WeightKind,
    #[serde(default)]
    pub rule: QuadratureRule,
}

impl GridSpec {
    pub fn new(modes: usize, theta_count: usize, psi_count: usize, weight_kind: WeightKind) -> Self {
        Self { modes, theta_count, psi_count, weight_kind, rule: QuadratureRule::RightEndpoint }
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn point_count(&self) -> usize {
        self.theta_count.pow(self.modes as u32 - 1) * self.psi_count.pow(self.modes as u32)
    }

    pub fn theta_max(&self) -> f64 {
        self.weight_kind.theta_max()
    }

    pub fn psi_max(&self) -> f64 {
        self.weight_kind.psi_max()
    }

    fn node(&self, k: usize, step: f64) -> f64 {
        match self.rule {
            QuadratureRule::RightEndpoint => (k + 1) as f64 * step,
            QuadratureRule::Midpoint => (k as f64 + 0.5) * step,
        }
    }

    /// The `theta_count` angle values shared by every `θ_l`.
    pub fn theta_values(&self) -> Vec<f64> {
        let step = self.theta_max() / self.theta_count as f64;
        (0..self.theta_count).map(|k| self.node(k, step)).collect()
    }

    /// The `psi_count` phase values shared by every `ψ_j`.
    pub fn psi_values(&self) -> Vec<f64> {
        let step = self.psi_max() / self.psi_count as f64;
        (0..self.psi_count).map(|k| self.node(k, step)).collect()
    }
}

/// One grid node: LO configuration, its direction cosines and its weight.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub config: LoConfiguration,
    pub u: Vec<f64>,
    pub weight: f64,
}

/// Tensor-product grid over LO configurations.
///
/// Points are ordered lexicographically in `(θ_1, …, θ_{N−1}, ψ_1, …, ψ_N)`
/// with `ψ_N` varying fastest, so `index = θ_flat · N_ψ^N + ψ_flat`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingGrid {
    pub spec: GridSpec,
    pub points: Vec<GridPoint>,
}

impl SamplingGrid {
    pub fn modes(&self) -> usize {
        self.spec.modes
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_kind(&self) -> WeightKind {
        self.spec.weight_kind
    }

    /// Number of distinct θ tuples, `N_θ^{N−1}`.
    pub fn theta_block_count(&self) -> usize {
        self.spec.theta_count.pow(self.spec.modes as u32 - 1)
    }

    /// Points per θ tuple, `N_ψ^N`.
    pub fn psi_block_len(&self) -> usize {
        self.spec.psi_count.pow(self.spec.modes as u32)
    }

    /// Flat θ index of a grid point; all points sharing it have identical `u`.
    pub fn theta_block(&self, index: usize) -> usize {
        index / self.psi_block_len()
    }

    /// Per-angle indices `(k_1, …, k_{N−1})` of a grid point.
    pub fn theta_indices(&self, index: usize) -> Vec<usize> {
        digits(self.theta_block(index), self.spec.theta_count, self.spec.modes - 1)
    }

    /// Per-phase indices `(k_1, …, k_N)` of a grid point.
    pub fn psi_indices(&self, index: usize) -> Vec<usize> {
        digits(index % self.psi_block_len(), self.spec.psi_count, self.spec.modes)
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }
}

fn digits(mut flat: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = flat % base;
        flat /= base;
    }
    out
}

/// Builds the tensor-product grid described by `spec`.
pub fn build_grid(spec: &GridSpec) -> Result<SamplingGrid> {
    if spec.modes == 0 {
        return Err(Error::InvalidArgument("grid needs at least one mode".into()));
    }
    if spec.psi_count == 0 || (spec.modes > 1 && spec.theta_count == 0) {
        return Err(Error::InvalidArgument(format!(
            "grid counts must be at least 1 (theta_count = {}, psi_count = {})",
            spec.theta_count, spec.psi_count
        )));
    }
    let mut spec = spec.clone();
    if spec.modes == 1 {
        // there is no θ dimension; keep the count harmless for index arithmetic
        spec.theta_count = spec.theta_count.max(1);
    }
    let n = spec.modes;
    let count = spec.point_count();
    if count > 50_000_000 {
        return Err(Error::InvalidArgument(format!("grid with {count} points is too large")));
    }
    let thetas = spec.theta_values();
    let psis = spec.psi_values();
    let d_theta = spec.theta_max() / spec.theta_count as f64;
    let d_psi = spec.psi_max() / spec.psi_count as f64;
    let cell = d_theta.powi(n as i32 - 1) * d_psi.powi(n as i32);

    let theta_blocks = spec.theta_count.pow(n as u32 - 1);
    let psi_block = spec.psi_count.pow(n as u32);
    let mut points = Vec::with_capacity(count);
    for tb in 0..theta_blocks {
        let theta: Vec<f64> = digits(tb, spec.theta_count, n - 1).iter().map(|&k| thetas[k]).collect();
        let u = direction_cosines(&theta, n)?;
        let weight = match spec.weight_kind {
            WeightKind::Quasidistribution => jacobian_weight(&theta, n)? * cell,
            WeightKind::Moment => cell,
        };
        for pb in 0..psi_block {
            let psi: Vec<f64> = digits(pb, spec.psi_count, n).iter().map(|&k| psis[k]).collect();
            points.push(GridPoint {
                config: LoConfiguration { theta: theta.clone(), psi },
                u: u.clone(),
                weight,
            });
        }
    }
    Ok(SamplingGrid { spec, points })
}
