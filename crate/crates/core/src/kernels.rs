//! Sampling kernels.
//!
//! Averaging a kernel over measured quadrature values (and integrating over
//! LO configurations) yields:
//!
//! * `S_N`: an s-parametrized quasidistribution at one phase-space point,
//! * `F_mn · Π e^{i(m_j−n_j)ψ_j}`: a Fock-basis density matrix element,
//! * `D_mn`: an s-ordered moment.
//!
//! Detection loss is compensated by evaluating the ideal kernel at
//! `X/√η` with ordering `s + (1−η)/η`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::geometry::{direction_cosines, LoConfiguration};
use crate::quadrature::integrate;
use crate::special_fns::{
    asymptotic_switch, binomial_f64, factorial_f64, hermite_scaled, kummer_half, kummer_three_half, laguerre, ln_binomial,
    MAX_KUMMER_ORDER,
};

/// Ordering, efficiency and mode count shared by every kernel evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub modes: usize,
    pub s: f64,
    pub eta: f64,
}

impl KernelSpec {
    pub fn new(modes: usize, s: f64, eta: f64) -> Self {
        Self { modes, s, eta }
    }

    /// `s + (1−η)/η`, the ordering the ideal kernel is evaluated at.
    pub fn s_eff(&self) -> f64 {
        effective_ordering(self.s, self.eta)
    }

    /// `s_η = −(1−η)/η`: quasidistributions need `s < s_η`.
    pub fn s_eta(&self) -> f64 {
        -(1.0 - self.eta) / self.eta
    }

    /// Whether `s < s_η` holds with room to spare. `s = s_η` lands on
    /// `s_eff ≈ ±1e−17` after rounding, where the kernel width vanishes, so
    /// values within a few ulps of the bound are treated as on it.
    pub fn admits_quasidistribution(&self) -> bool {
        let scale = 1.0 + self.s.abs() + self.s_eta().abs();
        self.s_eff() < -64.0 * f64::EPSILON * scale
    }

    pub fn check_quasidistribution(&self) -> Result<()> {
        check_eta_range(self.eta)?;
        if self.admits_quasidistribution() {
            Ok(())
        } else {
            Err(Error::Bound(format!(
                "ordering parameter must satisfy s < s_eta = -(1-eta)/eta = {:.6}; got s = {} at eta = {}",
                self.s_eta(),
                self.s,
                self.eta
            )))
        }
    }
}

pub fn effective_ordering(s: f64, eta: f64) -> f64 {
    s + (1.0 - eta) / eta
}

fn check_eta_range(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eta must lie in (0, 1], got {eta}")))
    }
}

/// `η > 1/2`, below which the density-matrix kernels do not exist.
pub fn check_pattern_efficiency(eta: f64) -> Result<()> {
    check_eta_range(eta)?;
    if eta > 0.5 {
        Ok(())
    } else {
        Err(Error::Bound(format!("eta must exceed 1/2 for density-matrix sampling; got eta = {eta}")))
    }
}

/// `S_N(ξ; s)` with the loss-adjusted ordering folded into its constants.
#[derive(Clone, Copy, Debug)]
pub struct QuasiKernel {
    modes: u32,
    inv_abs_s: f64,
    prefactor: f64,
}

impl QuasiKernel {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        spec.check_quasidistribution()?;
        if spec.modes == 0 || spec.modes as u32 > MAX_KUMMER_ORDER {
            return Err(Error::InvalidArgument(format!("unsupported mode count {}", spec.modes)));
        }
        let n = spec.modes as i32;
        let abs_s = spec.s_eff().abs();
        let prefactor =
            2f64.powi(n - 1) * factorial_f64(spec.modes as u32 - 1) / (PI.powi(2 * n) * abs_s.powi(n));
        Ok(Self { modes: spec.modes as u32, inv_abs_s: 1.0 / abs_s, prefactor })
    }

    /// Kernel at `ξ = X/√η − X̃`.
    pub fn eval(&self, xi: f64) -> f64 {
        self.prefactor * kummer_half(self.modes, xi * self.inv_abs_s.sqrt())
    }
}

/// [`QuasiKernel`] read from a table: cubic Hermite interpolation in
/// `x = |ξ|/√|s_eff|` on a uniform grid of step 1/1024 below the asymptotic
/// switch, direct evaluation above it. Nodes carry exact slopes,
/// `d/dx Φ(N, 1/2; −x²) = −4Nx Φ(N+1, 3/2; −x²)`, which keeps the
/// interpolation error near 1e-12 of the peak value.
#[derive(Clone, Debug)]
pub struct TabulatedQuasiKernel {
    exact: QuasiKernel,
    x_max: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const TABLE_STEPS_PER_UNIT: f64 = 1024.0;

impl TabulatedQuasiKernel {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        let exact = QuasiKernel::new(spec)?;
        let a = exact.modes;
        if a >= MAX_KUMMER_ORDER {
            return Err(Error::InvalidArgument(format!("unsupported mode count {a}")));
        }
        let x_max = asymptotic_switch(a).sqrt();
        let count = (x_max * TABLE_STEPS_PER_UNIT).ceil() as usize + 2;
        let h = 1.0 / TABLE_STEPS_PER_UNIT;
        let values = (0..count).map(|i| kummer_half(a, i as f64 * h)).collect();
        let slopes = (0..count)
            .map(|i| {
                let x = i as f64 * h;
                -4.0 * a as f64 * x * kummer_three_half(a + 1, x)
            })
            .collect();
        Ok(Self { exact, x_max, values, slopes })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let x = xi.abs() * self.exact.inv_abs_s.sqrt();
        if x >= self.x_max {
            return self.exact.eval(xi);
        }
        let u = x * TABLE_STEPS_PER_UNIT;
        let i = u as usize;
        let t = u - i as f64;
        let h = 1.0 / TABLE_STEPS_PER_UNIT;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let phi = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        self.exact.prefactor * phi
    }
}

/// `S_N(ξ; s_eff) = 2^{N−1}(N−1)!/(π^{2N}|s_eff|^N) · Φ(N, 1/2; −ξ²/|s_eff|)`.
pub fn s_kernel(xi: f64, spec: &KernelSpec) -> Result<f64> {
    Ok(QuasiKernel::new(spec)?.eval(xi))
}

/// `(1/π^{2N}) ∫₀^∞ e^{s_eff r²/2} cos(√2 rξ) r^{2N−1} dr` by adaptive quadrature.
pub fn s_kernel_integral_oracle(xi: f64, spec: &KernelSpec) -> Result<f64> {
    spec.check_quasidistribution()?;
    let n = spec.modes as i32;
    let c = 0.5 * spec.s_eff();
    let r_max = radial_cutoff(-c, (2 * n - 1) as f64);
    let v = integrate(
        |r| (c * r * r).exp() * (SQRT_2 * r * xi).cos() * r.powi(2 * n - 1),
        0.0,
        r_max,
        1e-15,
        1e-13,
    );
    Ok(v / PI.powi(2 * n))
}

/// Radius beyond which `e^{−decay r²} r^power` is below `e^{−60}` of the scale.
fn radial_cutoff(decay: f64, power: f64) -> f64 {
    let mut r = 1.0f64;
    while decay * r * r - power * r.ln() < 60.0 {
        r += 0.25;
    }
    r
}

/// Photon-number indices `(m, n)` of a density-matrix element or moment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MomentIndex {
    pub m: Vec<u32>,
    pub n: Vec<u32>,
}

impl MomentIndex {
    pub fn new(m: Vec<u32>, n: Vec<u32>) -> Result<Self> {
        if m.len() != n.len() || m.is_empty() {
            return Err(Error::Dimension(format!(
                "index vectors of length {} and {} must be equal and non-empty",
                m.len(),
                n.len()
            )));
        }
        Ok(Self { m, n })
    }

    pub fn modes(&self) -> usize {
        self.m.len()
    }

    pub fn mu(&self) -> Vec<u32> {
        self.m.iter().zip(&self.n).map(|(a, b)| *a.max(b)).collect()
    }

    pub fn nu(&self) -> Vec<u32> {
        self.m.iter().zip(&self.n).map(|(a, b)| *a.min(b)).collect()
    }

    /// `M = Σ_j (m_j + n_j)`.
    pub fn total_order(&self) -> u32 {
        self.m.iter().chain(&self.n).sum()
    }

    /// `M_l = Σ_{p≥l} (m_p + n_p)` for `l = 1..N`.
    pub fn partial_orders(&self) -> Vec<u32> {
        let mut out = vec![0; self.modes()];
        let mut acc = 0;
        for l in (0..self.modes()).rev() {
            acc += self.m[l] + self.n[l];
            out[l] = acc;
        }
        out
    }

    /// The index with `m` and `n` swapped.
    pub fn conjugate(&self) -> Self {
        Self { m: self.n.clone(), n: self.m.clone() }
    }
}

/// `Ξ_N(x, p)`: `(−1)^k (N+k−1)! Φ(N+k, 1/2; −x²)` for `p = 2k`,
/// `2x (−1)^k (N+k)! Φ(N+k+1, 3/2; −x²)` for `p = 2k+1`.
pub fn xi_function(modes: usize, x: f64, p: u32) -> f64 {
    let n = modes as u32;
    let k = p / 2;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    if p % 2 == 0 {
        sign * factorial_f64(n + k - 1) * kummer_half(n + k, x)
    } else {
        2.0 * x * sign * factorial_f64(n + k) * kummer_three_half(n + k + 1, x)
    }
}

/// Writes `Ξ_N(x, p)` for `p < out.len()`.
pub fn xi_function_all(modes: usize, x: f64, out: &mut [f64]) {
    for (p, slot) in out.iter_mut().enumerate() {
        *slot = xi_function(modes, x, p as u32);
    }
}

/// Coefficients `c_p` with `F_mn(X, θ; η) = Σ_p c_p Ξ_N(X/√(2η−1), p)`.
///
/// `u` holds the direction cosines of the angle tuple; every sum over
/// `k_l ∈ 0..=ν_l` starts at zero, the last one included.
pub fn pattern_coefficients(idx: &MomentIndex, u: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_pattern_efficiency(eta)?;
    let n = idx.modes();
    if u.len() != n {
        return Err(Error::Dimension(format!("{} direction cosines for {n} modes", u.len())));
    }
    let mu = idx.mu();
    let nu = idx.nu();
    let gain = 2.0 * eta / (2.0 * eta - 1.0);
    let mut pref = 2f64.powi(n as i32 - 1) / PI.powi(n as i32) * (eta / (2.0 * eta - 1.0)).powi(n as i32);
    for j in 0..n {
        let d = (mu[j] - nu[j]) as i32;
        pref *= (factorial_f64(nu[j]) / factorial_f64(mu[j])).sqrt() * (gain.sqrt() * u[j]).powi(d);
    }
    let base_p: u32 = (0..n).map(|j| mu[j] - nu[j]).sum();
    let max_p = idx.total_order();
    if max_p / 2 + n as u32 + 1 > MAX_KUMMER_ORDER {
        return Err(Error::InvalidArgument(format!("pattern function of total order {max_p} is too high")));
    }
    let mut coeffs = vec![0.0; max_p as usize + 1];
    // iterate over all k-vectors with 0 ≤ k_l ≤ ν_l
    let mut k = vec![0u32; n];
    loop {
        let mut term = pref;
        for l in 0..n {
            term *= binomial_f64(mu[l] as i64, (nu[l] - k[l]) as i64) / factorial_f64(k[l])
                * (gain * u[l] * u[l]).powi(k[l] as i32);
        }
        let p = base_p + 2 * k.iter().sum::<u32>();
        coeffs[p as usize] += term;
        let mut l = 0;
        loop {
            if l == n {
                return Ok(coeffs);
            }
            if k[l] < nu[l] {
                k[l] += 1;
                break;
            }
            k[l] = 0;
            l += 1;
        }
    }
}

/// Real pattern function `F_mn(X, θ; η)`.
pub fn pattern_function(idx: &MomentIndex, x: f64, theta: &[f64], eta: f64) -> Result<f64> {
    let u = direction_cosines(theta, idx.modes())?;
    let coeffs = pattern_coefficients(idx, &u, eta)?;
    let arg = x / (2.0 * eta - 1.0).sqrt();
    Ok(coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(p, c)| c * xi_function(idx.modes(), arg, p as u32))
        .sum())
}

/// Full density-matrix kernel `F_mn(X, θ; η) · Π_j e^{i(m_j−n_j)ψ_j}`.
pub fn pattern_kernel(idx: &MomentIndex, x: f64, config: &LoConfiguration, eta: f64) -> Result<Complex64> {
    let f = pattern_function(idx, x, &config.theta, eta)?;
    Ok(f * phase_factor(&idx.m, &idx.n, &config.psi))
}

/// `Π_j e^{i(a_j−b_j)ψ_j}`.
pub fn phase_factor(a: &[u32], b: &[u32], psi: &[f64]) -> Complex64 {
    let arg: f64 = (0..psi.len()).map(|j| (a[j] as f64 - b[j] as f64) * psi[j]).sum();
    Complex64::from_polar(1.0, arg)
}

/// The complex Laguerre-integral form of the pattern function, by quadrature.
///
/// Its real part equals [`pattern_function`]; the imaginary part is a null
/// function whose average over any physical quadrature law vanishes.
pub fn pattern_integral_oracle(idx: &MomentIndex, x: f64, theta: &[f64], eta: f64) -> Result<Complex64> {
    check_pattern_efficiency(eta)?;
    let n = idx.modes();
    let u = direction_cosines(theta, n)?;
    let mu = idx.mu();
    let nu = idx.nu();
    let mut pref = Complex64::new(PI.powi(-(n as i32)), 0.0);
    let mut power = 2 * n as i32 - 1;
    for j in 0..n {
        let d = mu[j] - nu[j];
        pref *= (factorial_f64(nu[j]) / factorial_f64(mu[j])).sqrt() * Complex64::new(0.0, -u[j]).powu(d);
        power += d as i32;
    }
    let decay = (2.0 * eta - 1.0) / (2.0 * eta);
    let freq = (2.0 / eta).sqrt() * x;
    let radial = |r: f64| -> f64 {
        let mut v = (-decay * r * r).exp() * r.powi(power);
        for j in 0..n {
            v *= laguerre(nu[j], mu[j] - nu[j], r * r * u[j] * u[j]);
        }
        v
    };
    let laguerre_degree: u32 = nu.iter().sum();
    let r_max = radial_cutoff(decay, (power as u32 + 2 * laguerre_degree) as f64 + 4.0);
    let re = integrate(|r| radial(r) * (freq * r).cos(), 0.0, r_max, 1e-14, 1e-12);
    let im = integrate(|r| radial(r) * (freq * r).sin(), 0.0, r_max, 1e-14, 1e-12);
    Ok(pref * Complex64::new(re, im))
}

/// `G_k^l(θ) = C(l,k) cos^kθ sin^{l−k}θ`.
pub fn g_poly(k: u32, l: u32, theta: f64) -> Result<f64> {
    if k > l {
        return Err(Error::Index(format!("G_k^l needs k <= l, got k = {k}, l = {l}")));
    }
    let (s, c) = theta.sin_cos();
    Ok(binomial_f64(l as i64, k as i64) * c.powi(k as i32) * s.powi((l - k) as i32))
}

/// Angle nodes `θ^{(n)} = nπ/N_θ`, `n = 1..N_θ`, of the moment grid.
pub fn moment_theta_nodes(n_theta: usize) -> Vec<f64> {
    (1..=n_theta).map(|k| k as f64 * PI / n_theta as f64).collect()
}

/// Functions biorthogonal to `G_k^l` under the `N_θ`-point rule on `(0, π]`,
/// built as `F_m = Σ_k A_mk G_k` with `A` the inverse Gram matrix.
///
/// Returns `F[m][n] = F_m^l(θ^{(n)})`.
pub fn f_biorthogonal_solve(l: u32, n_theta: usize) -> Result<Vec<Vec<f64>>> {
    if (l as usize) >= n_theta {
        return Err(Error::Bound(format!(
            "angular aliasing: order l = {l} must satisfy l < N_theta = {n_theta}"
        )));
    }
    let nodes = moment_theta_nodes(n_theta);
    let w = PI / n_theta as f64;
    let dim = l as usize + 1;
    let g = DMatrix::from_fn(dim, n_theta, |k, i| g_poly(k as u32, l, nodes[i]).unwrap());
    let gram = &g * g.transpose() * w;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument(format!("singular Gram matrix for l = {l}")))?;
    let f = inv * g;
    Ok((0..dim).map(|m| f.row(m).iter().copied().collect()).collect())
}

/// `E_mk^l = ((−i)^{l−m}/π) C(l,k)^{−1} Σ_j C(m,j) C(l−m,k−j) (−1)^{k−j}`.
fn e_coefficient(m: u32, l: u32, k: u32, phase: Complex64) -> Complex64 {
    let sum: f64 = (0..=m)
        .map(|j| {
            let sign = if (k as i64 - j as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            binomial_f64(m as i64, j as i64) * binomial_f64((l - m) as i64, k as i64 - j as i64) * sign
        })
        .sum();
    phase.powu(l - m) * (sum / (PI * binomial_f64(l as i64, k as i64)))
}

fn fourier_sum(m: u32, l: u32, theta: f64, phase: Complex64) -> f64 {
    (0..=l)
        .map(|k| Complex64::from_polar(1.0, (l as f64 - 2.0 * k as f64) * theta) * e_coefficient(m, l, k, phase))
        .sum::<Complex64>()
        .re
}

/// Closed form of `F_m^l(θ)` on `[0, π]`: `Σ_k e^{i(l−2k)θ} E_mk^l`.
///
/// The leading phase is `(−i)^{l−m}`; with `i^{l−m}` the result changes sign
/// whenever `l − m` is odd and is no longer biorthogonal to `G_k^l`.
pub fn f_biorthogonal_closed(m: u32, l: u32, theta: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Index(format!("F_m^l needs m <= l, got m = {m}, l = {l}")));
    }
    Ok(fourier_sum(m, l, theta, Complex64::new(0.0, -1.0)))
}

/// The same sum with leading phase `i^{l−m}`; kept to document the sign fix.
pub fn f_biorthogonal_closed_unconjugated(m: u32, l: u32, theta: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Index(format!("F_m^l needs m <= l, got m = {m}, l = {l}")));
    }
    Ok(fourier_sum(m, l, theta, Complex64::new(0.0, 1.0)))
}

/// `K(m, n) = [π C(m+n, n)]^{−1}`, via logarithms.
pub fn k_factor(m: u32, n: u32) -> f64 {
    (-PI.ln() - ln_binomial((m + n) as u64, n as u64)).exp()
}

/// θ-dependent factor `Π_{l<N} F_{m_l+n_l}^{M_l}(θ_l)` of the moment kernel.
pub fn moment_angle_factor(idx: &MomentIndex, theta: &[f64]) -> Result<f64> {
    if theta.len() + 1 != idx.modes() {
        return Err(Error::Dimension(format!("{} angles for {} modes", theta.len(), idx.modes())));
    }
    let orders = idx.partial_orders();
    theta.iter().enumerate().try_fold(1.0, |acc, (l, &t)| {
        Ok(acc * f_biorthogonal_closed(idx.m[l] + idx.n[l], orders[l], t)?)
    })
}

/// `Π_j K(m_j, n_j)`.
pub fn moment_k_product(idx: &MomentIndex) -> f64 {
    idx.m.iter().zip(&idx.n).map(|(&a, &b)| k_factor(a, b)).product()
}

/// Moment kernel `D_mn(X/√η, θ, ψ; s + (1−η)/η)`.
pub fn moment_kernel(idx: &MomentIndex, x: f64, config: &LoConfiguration, s: f64, eta: f64) -> Result<Complex64> {
    check_eta_range(eta)?;
    if config.modes() != idx.modes() {
        return Err(Error::Dimension(format!(
            "LO configuration has {} modes, index {}",
            config.modes(),
            idx.modes()
        )));
    }
    let radial = hermite_scaled(idx.total_order(), x / eta.sqrt(), effective_ordering(s, eta));
    let angular = moment_angle_factor(idx, &config.theta)?;
    Ok(radial * angular * moment_k_product(idx) * phase_factor(&idx.n, &idx.m, &config.psi))
}
