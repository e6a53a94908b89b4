//! Special functions the sampling kernels are built from.
//!
//! The confluent hypergeometric function is only ever needed at a negative
//! real argument with a positive integer first parameter and a half-integer
//! second parameter, `Φ(a, b; −x²)` with `b ∈ {1/2, 3/2}`. In that regime the
//! plain Kummer series cancels catastrophically once `x² ≳ 10`, so it is
//! evaluated through Kummer's transformation
//!
//! ```text
//! Φ(a, b; −z) = e^{−z} Φ(b − a, b; z)
//! ```
//!
//! whose terms keep a single sign past the first `a` of them, and through the
//! algebraic asymptotic expansion once `z` exceeds [`asymptotic_switch`].

use std::sync::OnceLock;

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Largest `a` for which [`kummer_half`] and [`kummer_three_half`] are supported.
pub const MAX_KUMMER_ORDER: u32 = 60;

/// `z = x²` beyond which the asymptotic expansion replaces the transformed series.
///
/// The algebraic expansion drops a companion term of relative size about
/// `e^{−z} z^{2a+1}`; the switch is the root of `z − (2a+1) ln z = 42`, which
/// puts that term below 1e-18. The `a(a+1)` floor makes the asymptotic terms
/// decrease from the first one on, so optimal truncation is well defined.
pub fn asymptotic_switch(a: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..=MAX_KUMMER_ORDER + 1).map(solve_switch).collect());
    match table.get(a as usize) {
        Some(&z) => z,
        None => solve_switch(a),
    }
}

fn solve_switch(a: u32) -> f64 {
    let slope = 2.0 * a as f64 + 1.0;
    let mut z = 60.0_f64;
    for _ in 0..50 {
        z = 42.0 + slope * z.ln();
    }
    z.max(a as f64 * (a as f64 + 1.0))
}

/// `Φ(a, 1/2; −x²)` for a positive integer `a`.
pub fn kummer_half(a: u32, x: f64) -> f64 {
    kummer_neg(a, 0.5, x * x)
}

/// `Φ(a, 3/2; −x²)` for a positive integer `a`.
pub fn kummer_three_half(a: u32, x: f64) -> f64 {
    kummer_neg(a, 1.5, x * x)
}

fn kummer_neg(a: u32, b: f64, z: f64) -> f64 {
    assert!(
        (1..=MAX_KUMMER_ORDER).contains(&a),
        "Kummer order a = {a} outside 1..={MAX_KUMMER_ORDER}"
    );
    if z < asymptotic_switch(a) {
        kummer_neg_transformed(a, b, z)
    } else {
        kummer_neg_asymptotic(a, b, z)
    }
}

/// `e^{−z} Σ_k (b−a)_k / (b)_k · z^k / k!`.
///
/// The partial sum grows like `e^z`, so the damping factor is applied in
/// installments whenever the running term gets large.
pub(crate) fn kummer_neg_transformed(a: u32, b: f64, z: f64) -> f64 {
    let c = b - a as f64;
    let af = a as f64;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    let mut damping_left = z;
    let mut k = 0.0;
    loop {
        term *= (c + k) / ((b + k) * (k + 1.0)) * z;
        k += 1.0;
        sum += term;
        if term.abs() > 1e200 && damping_left > 0.0 {
            let step = damping_left.min(400.0);
            let f = (-step).exp();
            term *= f;
            sum *= f;
            damping_left -= step;
        }
        if k > af && k > z && term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        if k > 20_000.0 {
            break;
        }
    }
    sum * (-damping_left).exp()
}

/// `Γ(b)/Γ(b−a) · z^{−a} Σ_s (a)_s (a−b+1)_s / s! · z^{−s}`, optimally truncated.
pub(crate) fn kummer_neg_asymptotic(a: u32, b: f64, z: f64) -> f64 {
    let af = a as f64;
    let lead: f64 = (1..=a).map(|i| b - i as f64).product::<f64>() * z.powi(-(a as i32));
    let c2 = af - b + 1.0;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for s in 0..500 {
        let s = s as f64;
        let next = term * (af + s) * (c2 + s) / ((s + 1.0) * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

/// Imaginary error function `erfi(x) = −i erf(ix)`.
///
/// Fails with [`Error::Overflow`] once `e^{x²}` leaves the `f64` range
/// (|x| ≳ 26.6).
pub fn erfi(x: f64) -> Result<f64> {
    let ax = x.abs();
    let value = if ax <= 6.0 {
        // all terms positive: no cancellation
        let x2 = ax * ax;
        let mut power = ax;
        let mut sum = ax;
        let mut k = 0.0;
        loop {
            k += 1.0;
            power *= x2 / k;
            let add = power / (2.0 * k + 1.0);
            sum += add;
            if add <= 1e-17 * sum {
                break;
            }
        }
        FRAC_2_SQRT_PI * sum
    } else {
        let x2 = ax * ax;
        let growth = x2.exp();
        if !growth.is_finite() {
            return Err(Error::Overflow(format!("erfi({x}) exceeds f64 range")));
        }
        let mut term = 1.0_f64;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            let next = term * (2.0 * k - 1.0) / (2.0 * x2);
            if next >= term || next <= 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
        }
        growth / (ax * SQRT_PI) * sum
    };
    if !value.is_finite() {
        return Err(Error::Overflow(format!("erfi({x}) exceeds f64 range")));
    }
    Ok(if x < 0.0 { -value } else { value })
}

/// `(s/2)^{n/2} H_n(X/√s)` evaluated as a polynomial in `X` and `s`.
///
/// Uses `P_{n+1} = √2 X P_n − n s P_{n−1}`, `P_0 = 1`, `P_1 = √2 X`, so no
/// square root of `s` is ever taken and `s ≤ 0` is fine.
pub fn hermite_scaled(n: u32, x: f64, s: f64) -> f64 {
    let sqrt2x = std::f64::consts::SQRT_2 * x;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = sqrt2x;
    for k in 1..n {
        let next = sqrt2x * cur - k as f64 * s * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = hermite_scaled(k, x, s)` for `k < out.len()`.
pub fn hermite_scaled_all(x: f64, s: f64, out: &mut [f64]) {
    let sqrt2x = std::f64::consts::SQRT_2 * x;
    for k in 0..out.len() {
        out[k] = match k {
            0 => 1.0,
            1 => sqrt2x,
            _ => sqrt2x * out[k - 1] - (k - 1) as f64 * s * out[k - 2],
        };
    }
}

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Generalized Laguerre polynomial `L_n^α(x)` (three-term recurrence).
pub fn laguerre(n: u32, alpha: u32, x: f64) -> f64 {
    let a = alpha as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Binomial coefficient `C(n, k)`, zero when `k < 0` or `k > n`.
pub fn binomial(n: u64, k: i64) -> Result<u64> {
    if k < 0 || k as u64 > n {
        return Ok(0);
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc holds C(n, i) · (n − i) / (i + 1) = C(n, i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return Err(Error::Overflow(format!("C({n}, {k}) exceeds u64")));
        }
    }
    Ok(acc as u64)
}

/// Floating-point binomial with the same out-of-range convention as [`binomial`].
pub fn binomial_f64(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `ln C(n, k)` for `0 ≤ k ≤ n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `n!` with overflow checking.
pub fn factorial(n: u32) -> Result<u64> {
    (1..=n as u64).try_fold(1u64, |acc, k| {
        acc.checked_mul(k)
            .ok_or_else(|| Error::Overflow(format!("{n}! exceeds u64")))
    })
}

/// `n!` as a float (exact for `n ≤ 22`).
pub fn factorial_f64(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Direct Kummer power series, used only as an independent oracle at small |x|.
    fn kummer_series(a: f64, b: f64, z: f64, terms: usize) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..terms {
            let k = k as f64;
            term *= (a + k) / ((b + k) * (k + 1.0)) * z;
            sum += term;
        }
        sum
    }

    #[test]
    fn kummer_at_zero_is_one() {
        assert_eq!(kummer_half(3, 0.0), 1.0);
        assert_eq!(kummer_three_half(2, 0.0), 1.0);
    }

    #[test]
    fn kummer_half_unit_argument() {
        // 40-digit reference: −0.0761590138255368382727748408...
        let v = kummer_half(1, 1.0);
        assert!((v - (-0.076_159_013_825_536_84)).abs() < 1e-14, "{v}");
        assert!((v - kummer_series(1.0, 0.5, -1.0, 60)).abs() < 1e-13);
        let via_erfi = 1.0 - SQRT_PI * (-1.0f64).exp() * erfi(1.0).unwrap();
        assert!((v - via_erfi).abs() < 1e-14);
    }

    #[test]
    fn kummer_half_decays_like_inverse_square() {
        let v = kummer_half(1, 100.0);
        assert!(v < 0.0 && v.abs() < 1e-3);
        assert_relative_eq!(v, -1.0 / (2.0 * 1e4), max_relative = 1e-3);
    }

    #[test]
    fn kummer_three_half_matches_power_series() {
        assert!((kummer_three_half(1, 1.0) - kummer_series(1.0, 1.5, -1.0, 60)).abs() < 1e-14);
        // 40-digit reference value
        assert!((kummer_three_half(1, 1.0) - 0.538_079_506_912_768_4).abs() < 1e-14);
        assert!((kummer_three_half(5, 3.0) - (-0.001_055_655_961_011_700_7)).abs() < 1e-14);
    }

    #[test]
    fn kummer_reference_table() {
        // (a, x, Φ(a,1/2;−x²), Φ(a,3/2;−x²)) from a 40-digit reference evaluation
        let table = [
            (1, 2.5, -0.115_418_610_837_177_4, 0.089_233_488_866_974_19),
            (1, 9.0, -0.006_290_841_038_308_293, 0.006_211_671_858_261_162),
            (2, 4.0, 0.004_368_143_376_593_409, -0.001_223_504_789_519_823),
            (3, 6.5, -3.272_987_703_463_903e-5, 6.033_582_811_230_856e-6),
            (4, 15.0, 2.778_718_717_040_421_5e-9, -3.897_553_018_297_797e-10),
            (7, 2.5, 0.046_721_475_220_984_48, -0.002_135_345_959_241_551),
            (7, 9.0, -9.511_282_241_096_044e-11, 6.610_462_051_089_202e-12),
            (12, 0.3, -0.446_310_627_927_707_7, 0.429_702_341_144_558_2),
            (12, 4.0, 2.966_461_242_212_616e-4, 2.516_737_357_274_212e-7),
            (12, 15.0, 9.315_250_306_950_491e-21, -3.820_507_949_752_251e-22),
        ];
        for (a, x, half, three) in table {
            let h = kummer_half(a, x);
            let t = kummer_three_half(a, x);
            assert!((h - half).abs() <= 1e-13 + 1e-10 * half.abs(), "a={a} x={x}: {h} vs {half}");
            assert!((t - three).abs() <= 1e-13 + 1e-10 * three.abs(), "a={a} x={x}: {t} vs {three}");
        }
    }

    #[test]
    fn both_routes_agree_across_the_switch() {
        for a in 1..=20u32 {
            for b in [0.5, 1.5] {
                let z0 = asymptotic_switch(a);
                for z in [z0, z0 * 1.1, z0 * 1.5] {
                    let s = kummer_neg_transformed(a, b, z);
                    let t = kummer_neg_asymptotic(a, b, z);
                    assert!(
                        (s - t).abs() <= 1e-12 * s.abs().max(1e-300),
                        "a={a} b={b} z={z}: {s} vs {t}"
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_identity_first_order() {
        // Φ(2,1/2;−x²) = −(1/4) d²/dx² Φ(1,1/2;−x²)
        let h = 1e-3;
        for i in 0..=60 {
            let x = -3.0 + 0.1 * i as f64;
            let d2 = (kummer_half(1, x + h) - 2.0 * kummer_half(1, x) + kummer_half(1, x - h)) / (h * h);
            assert!((kummer_half(2, x) + d2 / 4.0).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn erfi_values() {
        assert_eq!(erfi(0.0).unwrap(), 0.0);
        assert!((erfi(1.0).unwrap() - 1.650_425_758_797_542_9).abs() < 1e-14);
        assert!((erfi(-1.0).unwrap() + 1.650_425_758_797_542_9).abs() < 1e-14);
        assert_relative_eq!(erfi(3.7).unwrap(), 140_087.228_388_536_36, max_relative = 1e-13);
        assert_relative_eq!(erfi(8.0).unwrap(), 4.432_449_746_002_334_6e26, max_relative = 1e-13);
        assert!(matches!(erfi(27.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn hermite_scaled_examples() {
        assert_eq!(hermite_scaled(0, 7.0, -3.0), 1.0);
        for (x, s) in [(0.3, 1.0), (-1.2, 0.0), (2.0, -1.0), (0.7, -0.4)] {
            assert!((hermite_scaled(2, x, s) - (2.0 * x * x - s)).abs() < 1e-14);
        }
        assert!((hermite_scaled(4, 1.0, 1.0) - (-5.0)).abs() < 1e-13);
    }

    #[test]
    fn hermite_scaled_reduces_to_classical_at_unit_ordering() {
        for n in 0..=8 {
            for i in 0..=16 {
                let x = -4.0 + 0.5 * i as f64;
                let want = 0.5f64.powf(n as f64 / 2.0) * hermite(n, x);
                let got = hermite_scaled(n, x, 1.0);
                assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "n={n} x={x}");
            }
        }
        let mut all = [0.0; 9];
        hermite_scaled_all(1.3, -0.7, &mut all);
        for (n, v) in all.iter().enumerate() {
            assert_eq!(*v, hermite_scaled(n as u32, 1.3, -0.7));
        }
    }

    #[test]
    fn laguerre_examples() {
        for x in [-1.0, 0.0, 0.4, 3.0] {
            assert!((laguerre(1, 0, x) - (1.0 - x)).abs() < 1e-15);
        }
        assert_eq!(laguerre(0, 5, 3.2), 1.0);
        let explicit = |n: u32, a: u32, x: f64| -> f64 {
            (0..=n)
                .map(|k| {
                    (-1f64).powi(k as i32) * binomial_f64((n + a) as i64, (n - k) as i64) * x.powi(k as i32)
                        / factorial_f64(k)
                })
                .sum()
        };
        assert!((laguerre(3, 2, 1.5) - explicit(3, 2, 1.5)).abs() < 1e-14);
        assert!((laguerre(3, 2, 1.5) - 0.0625).abs() < 1e-14);
        for n in 0..8 {
            for a in 0..4 {
                assert!((laguerre(n, a, 2.7) - explicit(n, a, 2.7)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial(5, 2).unwrap(), 10);
        assert_eq!(binomial(3, -1).unwrap(), 0);
        assert_eq!(binomial(3, 4).unwrap(), 0);
        assert_eq!(binomial(7, 2).unwrap(), 21);
        assert_eq!(binomial(67, 33).unwrap(), 14_226_520_737_620_288_370);
        assert!(matches!(binomial(70, 35), Err(Error::Overflow(_))));
        assert_eq!(binomial_f64(7, 2), 21.0);
        assert_eq!(binomial_f64(2, 3), 0.0);
        assert!((ln_binomial(40, 20) - (binomial(40, 20).unwrap() as f64).ln()).abs() < 1e-12);
        assert_eq!(factorial(20).unwrap(), 2_432_902_008_176_640_000);
        assert!(factorial(21).is_err());
    }

    proptest! {
        #[test]
        fn kummer_functions_are_even(a in 1u32..12, x in 0.0f64..20.0) {
            prop_assert_eq!(kummer_half(a, x), kummer_half(a, -x));
            prop_assert_eq!(kummer_three_half(a, x), kummer_three_half(a, -x));
        }

        #[test]
        fn hermite_scaled_parity(n in 0u32..12, x in -5.0f64..5.0, s in -3.0f64..3.0) {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let lhs = hermite_scaled(n, -x, s);
            let rhs = sign * hermite_scaled(n, x, s);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn erfi_is_odd(x in -20.0f64..20.0) {
            prop_assert_eq!(erfi(-x).unwrap(), -erfi(x).unwrap());
        }
    }
}
