//! Gaussian states, their exact statistics, and simulated homodyne data.
//!
//! Quadratures are `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`, ordered
//! `(x_1, p_1, …, x_N, p_N)`; the vacuum covariance is `I/2`.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dataset::{check_eta, MeasurementRecord, PhaseSampling, QuadratureDataset};
use crate::error::{Error, Result};
use crate::geometry::{direction_cosines, LoConfiguration, PhaseSpacePoint, SamplingGrid};
use crate::special_fns::factorial_f64;

/// Mean vector and covariance matrix of `2N` quadratures.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 || cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Dimension(format!(
                "mean of length {dim} and covariance {}x{} do not describe N modes",
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    fn check_mode(&self, i: usize) -> Result<()> {
        if i < self.modes() {
            Ok(())
        } else {
            Err(Error::Index(format!("mode {i} out of range for {} modes", self.modes())))
        }
    }

    /// `mean → S mean`, `cov → S cov Sᵀ`.
    pub fn transform(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.nrows() != self.mean.len() || s.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "{}x{} transformation on {} quadratures",
                s.nrows(),
                s.ncols(),
                self.mean.len()
            )));
        }
        Ok(Self { mean: s * &self.mean, cov: s * &self.cov * s.transpose() })
    }
}

pub fn vacuum(modes: usize) -> GaussianState {
    assert!(modes >= 1, "a state needs at least one mode");
    GaussianState {
        mean: DVector::zeros(2 * modes),
        cov: DMatrix::identity(2 * modes, 2 * modes) * 0.5,
    }
}

/// Multimode coherent state `|α_1, …, α_N⟩`.
pub fn coherent(alpha: &[Complex64]) -> GaussianState {
    displace(&vacuum(alpha.len()), alpha).expect("dimensions match by construction")
}

/// Applies the displacement `a_j → a_j + α_j`.
pub fn displace(state: &GaussianState, alpha: &[Complex64]) -> Result<GaussianState> {
    if alpha.len() != state.modes() {
        return Err(Error::Dimension(format!(
            "{} displacements for {} modes",
            alpha.len(),
            state.modes()
        )));
    }
    let mut out = state.clone();
    for (j, a) in alpha.iter().enumerate() {
        out.mean[2 * j] += std::f64::consts::SQRT_2 * a.re;
        out.mean[2 * j + 1] += std::f64::consts::SQRT_2 * a.im;
    }
    Ok(out)
}

/// `a → a cosh r + a† sinh r`: `x` is stretched by `e^r`, `p` shrunk by `e^{−r}`.
pub fn squeeze(state: &GaussianState, mode: usize, r: f64) -> Result<GaussianState> {
    state.check_mode(mode)?;
    let mut s = DMatrix::identity(state.mean.len(), state.mean.len());
    s[(2 * mode, 2 * mode)] = r.exp();
    s[(2 * mode + 1, 2 * mode + 1)] = (-r).exp();
    state.transform(&s)
}

/// `a_i → cosφ a_i + sinφ a_j`, `a_j → −sinφ a_i + cosφ a_j`.
pub fn beam_splitter(state: &GaussianState, i: usize, j: usize, mixing_angle: f64) -> Result<GaussianState> {
    state.check_mode(i)?;
    state.check_mode(j)?;
    if i == j {
        return Err(Error::Index(format!("beam splitter needs two distinct modes, got {i} twice")));
    }
    let (sn, cs) = mixing_angle.sin_cos();
    let mut s = DMatrix::identity(state.mean.len(), state.mean.len());
    for q in 0..2 {
        let (a, b) = (2 * i + q, 2 * j + q);
        s[(a, a)] = cs;
        s[(a, b)] = sn;
        s[(b, a)] = -sn;
        s[(b, b)] = cs;
    }
    state.transform(&s)
}

/// `a → a e^{iφ}`.
pub fn phase_shift(state: &GaussianState, mode: usize, phi: f64) -> Result<GaussianState> {
    state.check_mode(mode)?;
    let (sn, cs) = phi.sin_cos();
    let mut s = DMatrix::identity(state.mean.len(), state.mean.len());
    let (x, p) = (2 * mode, 2 * mode + 1);
    s[(x, x)] = cs;
    s[(x, p)] = -sn;
    s[(p, x)] = sn;
    s[(p, p)] = cs;
    state.transform(&s)
}

/// Passive linear network `a_i → Σ_j U_ij a_j` for a unitary `U`.
pub fn apply_passive(state: &GaussianState, u: &DMatrix<Complex64>) -> Result<GaussianState> {
    let n = state.modes();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} network on {n} modes", u.nrows(), u.ncols())));
    }
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let c = u[(i, j)];
            s[(2 * i, 2 * j)] = c.re;
            s[(2 * i, 2 * j + 1)] = -c.im;
            s[(2 * i + 1, 2 * j)] = c.im;
            s[(2 * i + 1, 2 * j + 1)] = c.re;
        }
    }
    state.transform(&s)
}

/// Squeezed vacuum in one input port spread over three output modes.
///
/// The outputs are `a_1 = (b_1 + √2 b_2)/√3`,
/// `a_2 = b_1/√3 − b_2/√6 − b_3/√2`, `a_3 = b_1/√3 − b_2/√6 + b_3/√2`, with
/// `b_1` squeezed by `r` and `b_2`, `b_3` in vacuum. The equal-weight LO with
/// zero phases then measures the anti-squeezed quadrature of `b_1`.
pub fn three_mode_demo_state(r: f64) -> GaussianState {
    let s = squeeze(&vacuum(3), 0, r).unwrap();
    let s = beam_splitter(&s, 0, 1, (1.0 / 3f64.sqrt()).acos()).unwrap();
    let s = beam_splitter(&s, 1, 2, std::f64::consts::FRAC_PI_4).unwrap();
    phase_shift(&s, 1, std::f64::consts::PI).unwrap()
}

/// Symplectic form `Ω` for `N` modes.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        w[(2 * j, 2 * j + 1)] = 1.0;
        w[(2 * j + 1, 2 * j)] = -1.0;
    }
    w
}

/// Whether `V + (i/2)Ω ⪰ 0` within `tol`, via the real `4N × 4N` embedding.
pub fn is_physical(state: &GaussianState, tol: f64) -> bool {
    let v = &state.cov;
    if (v - v.transpose()).amax() > tol {
        return false;
    }
    let d = v.nrows();
    let w = symplectic_form(state.modes()) * 0.5;
    let mut big = DMatrix::zeros(2 * d, 2 * d);
    big.view_mut((0, 0), (d, d)).copy_from(v);
    big.view_mut((d, d), (d, d)).copy_from(v);
    big.view_mut((0, d), (d, d)).copy_from(&(-&w));
    big.view_mut((d, 0), (d, d)).copy_from(&w);
    big.symmetric_eigenvalues().min() >= -tol
}

/// Coefficients of `X = Σ_j u_j (x_j cosψ_j + p_j sinψ_j)` on the quadrature vector.
pub fn quadrature_direction(config: &LoConfiguration) -> Result<DVector<f64>> {
    let u = direction_cosines(&config.theta, config.modes())?;
    Ok(direction_from(&u, &config.psi))
}

fn direction_from(u: &[f64], psi: &[f64]) -> DVector<f64> {
    let mut v = DVector::zeros(2 * u.len());
    for j in 0..u.len() {
        let (s, c) = psi[j].sin_cos();
        v[2 * j] = u[j] * c;
        v[2 * j + 1] = u[j] * s;
    }
    v
}

/// Exact mean and variance of the LO quadrature `X`.
pub fn quadrature_stats(state: &GaussianState, config: &LoConfiguration) -> Result<(f64, f64)> {
    if config.modes() != state.modes() {
        return Err(Error::Dimension(format!(
            "LO configuration has {} modes, state {}",
            config.modes(),
            state.modes()
        )));
    }
    let v = quadrature_direction(config)?;
    Ok(stats_along(state, &v))
}

fn stats_along(state: &GaussianState, v: &DVector<f64>) -> (f64, f64) {
    (v.dot(&state.mean), (&state.cov * v).dot(v))
}

/// Mean and variance of the detected `X′ = √η X + √(1−η) X_vac`.
pub fn detected_stats(mean: f64, var: f64, eta: f64) -> (f64, f64) {
    (eta.sqrt() * mean, eta * var + 0.5 * (1.0 - eta))
}

/// Draws one detected quadrature value `X′ = √η X + √(1−η) X_vac`.
pub fn sample_quadrature<R: Rng + ?Sized>(
    state: &GaussianState,
    config: &LoConfiguration,
    eta: f64,
    rng: &mut R,
) -> Result<f64> {
    check_eta(eta)?;
    let (mean, var) = quadrature_stats(state, config)?;
    Ok(draw(mean, var, eta, rng))
}

fn draw<R: Rng + ?Sized>(mean: f64, var: f64, eta: f64, rng: &mut R) -> f64 {
    let x: f64 = mean + var.max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal);
    let vac: f64 = std::f64::consts::FRAC_1_SQRT_2 * rng.sample::<f64, _>(StandardNormal);
    eta.sqrt() * x + (1.0 - eta).sqrt() * vac
}

/// Random stream for one grid point: the same `(seed, index)` always yields
/// the same draws, independent of scheduling.
pub fn point_rng(seed: u64, grid_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(grid_index as u64);
    rng
}

/// `per_point` detected values at every grid point, phases from the grid.
pub fn simulate_dataset(
    state: &GaussianState,
    grid: &SamplingGrid,
    per_point: usize,
    eta: f64,
    seed: u64,
) -> Result<QuadratureDataset> {
    simulate_dataset_with(state, grid, per_point, eta, seed, PhaseSampling::Grid)
}

/// As [`simulate_dataset`], optionally drawing fresh uniform phases per record.
pub fn simulate_dataset_with(
    state: &GaussianState,
    grid: &SamplingGrid,
    per_point: usize,
    eta: f64,
    seed: u64,
    phases: PhaseSampling,
) -> Result<QuadratureDataset> {
    check_eta(eta)?;
    if per_point == 0 {
        return Err(Error::InvalidArgument("per_point must be at least 1".into()));
    }
    if grid.modes() != state.modes() {
        return Err(Error::Dimension(format!(
            "grid has {} modes, state {}",
            grid.modes(),
            state.modes()
        )));
    }
    if grid.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument("grid too large for 32-bit indices".into()));
    }
    let n = state.modes();
    let blocks: Vec<Vec<MeasurementRecord>> = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            let mut rng = point_rng(seed, index);
            let fixed = stats_along(state, &direction_from(&point.u, &point.config.psi));
            let mut psi = vec![0.0; n];
            (0..per_point)
                .map(|_| {
                    let (mean, var) = match phases {
                        PhaseSampling::Grid => fixed,
                        PhaseSampling::Randomized => {
                            for p in psi.iter_mut() {
                                *p = rng.random_range(0.0..std::f64::consts::TAU);
                            }
                            stats_along(state, &direction_from(&point.u, &psi))
                        }
                    };
                    MeasurementRecord { grid_index: index as u32, x_value: draw(mean, var, eta, &mut rng) }
                })
                .collect()
        })
        .collect();
    let records = blocks.concat();
    QuadratureDataset::new(grid.clone(), eta, Some(seed), phases, records)
}

/// `Q({α_j}) = ⟨{α_j}|ρ|{α_j}⟩/π^N`.
pub fn analytic_q(state: &GaussianState, alpha: &PhaseSpacePoint) -> Result<f64> {
    let n = state.modes();
    if alpha.modes() != n {
        return Err(Error::Dimension(format!("point has {} modes, state {n}", alpha.modes())));
    }
    let sigma = &state.cov + DMatrix::identity(2 * n, 2 * n) * 0.5;
    let chol = Cholesky::new(sigma)
        .ok_or_else(|| Error::Covariance("V + I/2 is not positive definite".into()))?;
    let mut d = DVector::zeros(2 * n);
    for j in 0..n {
        d[2 * j] = std::f64::consts::SQRT_2 * alpha.alpha[j].re - state.mean[2 * j];
        d[2 * j + 1] = std::f64::consts::SQRT_2 * alpha.alpha[j].im - state.mean[2 * j + 1];
    }
    let quad = d.dot(&chol.solve(&d));
    let det = chol.determinant();
    Ok((-0.5 * quad).exp() / (std::f64::consts::PI.powi(n as i32) * det.sqrt()))
}

/// Exact s-ordered moment `⟨Π_j a_j†^{m_j} a_j^{n_j}⟩_s`.
///
/// The s-ordered moments are the moments of the s-parametrized
/// quasidistribution, which for a Gaussian state is Gaussian with covariance
/// `V − (s/2)I`; the product of linear forms is expanded with Isserlis' rule.
pub fn analytic_moment(state: &GaussianState, m: &[u32], n: &[u32], s: f64) -> Result<Complex64> {
    let modes = state.modes();
    if m.len() != modes || n.len() != modes {
        return Err(Error::Dimension(format!(
            "index vectors of length {} and {} for {modes} modes",
            m.len(),
            n.len()
        )));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // each factor is a complex linear form c·r of the phase-space coordinates
    let mut forms: Vec<(usize, Complex64, Complex64)> = Vec::new();
    for j in 0..modes {
        for _ in 0..m[j] {
            forms.push((j, Complex64::new(h, 0.0), Complex64::new(0.0, -h)));
        }
        for _ in 0..n[j] {
            forms.push((j, Complex64::new(h, 0.0), Complex64::new(0.0, h)));
        }
    }
    if forms.len() > 24 {
        return Err(Error::InvalidArgument(format!("moment of total order {} is too large", forms.len())));
    }
    let cov = &state.cov - DMatrix::identity(2 * modes, 2 * modes) * (0.5 * s);
    let k = forms.len();
    let means: Vec<Complex64> = forms
        .iter()
        .map(|&(j, cx, cp)| cx * state.mean[2 * j] + cp * state.mean[2 * j + 1])
        .collect();
    let mut pair = vec![Complex64::new(0.0, 0.0); k * k];
    for a in 0..k {
        for b in 0..k {
            let (ja, xa, pa) = forms[a];
            let (jb, xb, pb) = forms[b];
            pair[a * k + b] = xa * xb * cov[(2 * ja, 2 * jb)]
                + xa * pb * cov[(2 * ja, 2 * jb + 1)]
                + pa * xb * cov[(2 * ja + 1, 2 * jb)]
                + pa * pb * cov[(2 * ja + 1, 2 * jb + 1)];
        }
    }
    let mut memo: HashMap<u32, Complex64> = HashMap::new();
    Ok(isserlis((1u32 << k) - 1, k, &means, &pair, &mut memo))
}

/// `E[Π_{i∈set} L_i] = E[L_f] E[Π_{rest}] + Σ_{j∈rest} Cov(L_f, L_j) E[Π_{rest∖j}]`.
fn isserlis(set: u32, k: usize, means: &[Complex64], pair: &[Complex64], memo: &mut HashMap<u32, Complex64>) -> Complex64 {
    if set == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if let Some(v) = memo.get(&set) {
        return *v;
    }
    let first = set.trailing_zeros() as usize;
    let rest = set & !(1 << first);
    let mut acc = means[first] * isserlis(rest, k, means, pair, memo);
    let mut bits = rest;
    while bits != 0 {
        let j = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        acc += pair[first * k + j] * isserlis(rest & !(1 << j), k, means, pair, memo);
    }
    memo.insert(set, acc);
    acc
}

/// Fock-basis density matrix `ρ_{mn}` with every index at most `cutoff`.
#[derive(Clone, Debug)]
pub struct FockMatrix {
    pub modes: usize,
    pub cutoff: usize,
    values: Vec<Complex64>,
}

impl FockMatrix {
    fn flat(&self, m: &[usize], n: &[usize]) -> usize {
        let base = self.cutoff + 1;
        let mut i = 0;
        for j in 0..self.modes {
            i = (i * base + n[j]) * base + m[j];
        }
        i
    }

    /// `⟨m|ρ|n⟩`; panics when an index exceeds the cutoff.
    pub fn get(&self, m: &[usize], n: &[usize]) -> Complex64 {
        assert!(m.iter().chain(n).all(|&k| k <= self.cutoff), "index beyond cutoff {}", self.cutoff);
        self.values[self.flat(m, n)]
    }

    /// `Σ ρ_nn` over all captured diagonal entries.
    pub fn trace(&self) -> f64 {
        let base = self.cutoff + 1;
        (0..base.pow(self.modes as u32))
            .map(|flat| {
                let idx = digits(flat, base, self.modes);
                self.get(&idx, &idx).re
            })
            .sum()
    }
}

pub(crate) fn digits(mut flat: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = flat % base;
        flat /= base;
    }
    out
}

/// Exact `ρ_{mn}` from the Taylor coefficients of `π^N Q(α) e^{|α|²}`.
///
/// With `w = (α_1, ᾱ_1, …)` this generating function is `exp(c₀ + bᵀw − ½wᵀAw)`
/// and its coefficients obey
/// `k_i g_k = b_i g_{k−e_i} − Σ_j A_ij g_{k−e_i−e_j}`;
/// then `ρ_{mn} = Π_j √(m_j! n_j!) · g_k` with `k = n_j` on `α_j` and `m_j` on `ᾱ_j`.
pub fn analytic_rho(state: &GaussianState, cutoff: usize) -> Result<FockMatrix> {
    let n = state.modes();
    let dim = 2 * n;
    let base = cutoff + 1;
    let size = base
        .checked_pow(dim as u32)
        .filter(|&s| s <= 20_000_000)
        .ok_or_else(|| Error::InvalidArgument(format!("cutoff {cutoff} too large for {n} modes")))?;

    let sigma = &state.cov + DMatrix::identity(dim, dim) * 0.5;
    let chol = Cholesky::new(sigma).ok_or_else(|| Error::Covariance("V + I/2 is not positive definite".into()))?;
    let inv = chol.inverse();
    let det = chol.determinant();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut t = DMatrix::<Complex64>::zeros(dim, dim);
    let mut jm = DMatrix::<Complex64>::zeros(dim, dim);
    for j in 0..n {
        t[(2 * j, 2 * j)] = Complex64::new(h, 0.0);
        t[(2 * j, 2 * j + 1)] = Complex64::new(h, 0.0);
        t[(2 * j + 1, 2 * j)] = Complex64::new(0.0, -h);
        t[(2 * j + 1, 2 * j + 1)] = Complex64::new(0.0, h);
        jm[(2 * j, 2 * j + 1)] = Complex64::new(1.0, 0.0);
        jm[(2 * j + 1, 2 * j)] = Complex64::new(1.0, 0.0);
    }
    let inv_c = inv.map(|x| Complex64::new(x, 0.0));
    let mu_c = state.mean.map(|x| Complex64::new(x, 0.0));
    let a = t.transpose() * &inv_c * &t - jm;
    let b = t.transpose() * (&inv_c * &mu_c);
    let c0 = -0.5 * state.mean.dot(&(&inv * &state.mean));

    // g is indexed by k in base `base`, variable order (α_1, ᾱ_1, …), first slowest
    let strides: Vec<usize> = (0..dim).map(|i| base.pow((dim - 1 - i) as u32)).collect();
    let mut g = vec![Complex64::new(0.0, 0.0); size];
    g[0] = Complex64::new(c0.exp() / det.sqrt(), 0.0);
    let mut k = vec![0usize; dim];
    for flat in 1..size {
        let mut rem = flat;
        for i in 0..dim {
            k[i] = rem / strides[i];
            rem %= strides[i];
        }
        let i = (0..dim).find(|&i| k[i] > 0).unwrap();
        let down = flat - strides[i];
        let mut acc = b[i] * g[down];
        for j in 0..dim {
            let kj = if j == i { k[j] - 1 } else { k[j] };
            if kj > 0 {
                acc -= a[(i, j)] * g[down - strides[j]];
            }
        }
        g[flat] = acc / k[i] as f64;
    }

    // reorder into ρ storage and apply the factorial normalization
    let mut out = FockMatrix { modes: n, cutoff, values: vec![Complex64::new(0.0, 0.0); size] };
    let mut values = vec![Complex64::new(0.0, 0.0); size];
    for (flat, gk) in g.iter().enumerate() {
        let k = digits(flat, base, dim);
        let mut norm = 1.0;
        let mut m_idx = vec![0; n];
        let mut n_idx = vec![0; n];
        for j in 0..n {
            n_idx[j] = k[2 * j];
            m_idx[j] = k[2 * j + 1];
            norm *= (factorial_f64(n_idx[j] as u32) * factorial_f64(m_idx[j] as u32)).sqrt();
        }
        values[out.flat(&m_idx, &n_idx)] = gk * norm;
    }
    out.values = values;
    Ok(out)
}

/// Smallest cutoff whose diagonal block holds at least `fraction` of the trace.
pub fn default_cutoff(state: &GaussianState, fraction: f64) -> Result<usize> {
    for c in 0..=60 {
        let rho = analytic_rho(state, c)?;
        if rho.trace() >= fraction {
            return Ok(c);
        }
    }
    Err(Error::InvalidArgument(format!("no cutoff up to 60 captures {fraction} of the trace")))
}
