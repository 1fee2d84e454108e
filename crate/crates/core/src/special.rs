//! Special functions: Hermite polynomials, Gaussian tails, unit-ball volumes,
//! flag coefficients, incomplete beta, χ and noncentral χ densities.
//!
//! Hermite polynomials follow the probabilists' convention,
//! `d^n/dx^n e^{-x²/2} = (−1)^n H_n(x) e^{-x²/2}`, so `H_2(x) = x² − 1`.
//! The physicists' polynomials differ by scaling and must not be mixed in.
//!
//! Arguments with `|x| > 40` underflow the Gaussian factors to 0.

use std::f64::consts::{LN_2, PI, SQRT_2};

use libm::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{GkfError, Result};
use crate::numeric;

/// `1/√(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_9;

/// Probabilists' Hermite polynomial `H_n(x)` by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut h0, mut h1) = (1.0, x);
            for k in 1..n {
                let h2 = x * h1 - k as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    }
}

/// `H_0(x), …, H_nmax(x)`.
pub fn hermite_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(nmax + 1);
    h.push(1.0);
    if nmax >= 1 {
        h.push(x);
    }
    for k in 1..nmax {
        h.push(x * h[k] - k as f64 * h[k - 1]);
    }
    h
}

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 − Φ(x)`, accurate for large positive `x`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Mills ratio `(1 − Φ(x)) / φ(x)`.
pub fn mills_ratio(x: f64) -> f64 {
    if x < 25.0 {
        return norm_sf(x) / norm_pdf(x);
    }
    // continued fraction x + 1/(x + 2/(x + 3/(x + …)))
    let mut t = x;
    for k in (1..60).rev() {
        t = x + k as f64 / t;
    }
    1.0 / t
}

pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Binomial coefficient, zero outside `0 ≤ k ≤ n`.
pub fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Volume of the unit ball in `R^k`, `π^{k/2} / Γ(k/2 + 1)`.
pub fn unit_ball_volume(k: usize) -> f64 {
    if k > 100 {
        let h = k as f64 / 2.0;
        return (h * PI.ln() - ln_gamma(h + 1.0)).exp();
    }
    // ω_k = ω_{k−2}·2π/k
    let mut w = if k % 2 == 0 { 1.0 } else { 2.0 };
    let mut i = 2 + k % 2;
    while i <= k {
        w *= 2.0 * PI / i as f64;
        i += 2;
    }
    w
}

/// `Γ(k/2)` by the half-integer recursion for moderate `k`.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k >= 1);
    if k > 300 {
        return ln_gamma(k as f64 / 2.0).exp();
    }
    let (mut g, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Flag coefficient `[k i] = C(k,i) ω_k / (ω_i ω_{k−i})`.
pub fn flag_coeff(k: usize, i: usize) -> Result<f64> {
    if i > k {
        return Err(GkfError::InvalidArgument(format!("flag coefficient needs i ≤ k, got i={i}, k={k}")));
    }
    let j = i.min(k - i);
    Ok(binomial(k as i64, j as i64) * unit_ball_volume(k) / (unit_ball_volume(j) * unit_ball_volume(k - j)))
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn beta_fn(a: f64, b: f64) -> f64 {
    ln_beta(a, b).exp()
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

// ∫_0^y t^{a−1}(1−t)^{b−1} dt for y ≤ 1/2, substituting v = t^a when a < 1.
fn beta_head(a: f64, b: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let q = if a < 1.0 {
        numeric::integrate_best_effort(
            &|v: f64| (1.0 - v.powf(1.0 / a)).powf(b - 1.0) / a,
            0.0,
            y.powf(a),
            1e-300,
            1e-14,
        )
    } else {
        numeric::integrate_best_effort(&|t: f64| t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0), 0.0, y, 1e-300, 1e-14)
    };
    q.value
}

/// Unnormalized incomplete beta `IB_{ν1,ν2}(x) = ∫_0^x t^{ν1−1}(1−t)^{ν2−1} dt`.
///
/// Uses adaptive quadrature (split at 1/2, endpoint singularities removed by
/// substitution) when either parameter is below 1 and the continued fraction
/// otherwise.
pub fn incomplete_beta(nu1: f64, nu2: f64, x: f64) -> Result<f64> {
    if !(nu1 > 0.0 && nu2 > 0.0) {
        return Err(GkfError::InvalidArgument(format!("beta parameters must be positive, got ({nu1}, {nu2})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(GkfError::InvalidArgument(format!("incomplete beta argument {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(beta_fn(nu1, nu2));
    }
    if nu1 < 1.0 || nu2 < 1.0 {
        let head = beta_head(nu1, nu2, x.min(0.5));
        let tail = if x > 0.5 { beta_head(nu2, nu1, 0.5) - beta_head(nu2, nu1, 1.0 - x) } else { 0.0 };
        return Ok(head + tail);
    }
    let front = (nu1 * x.ln() + nu2 * (1.0 - x).ln()).exp();
    if x < (nu1 + 1.0) / (nu1 + nu2 + 2.0) {
        Ok(front * beta_cf(nu1, nu2, x) / nu1)
    } else {
        Ok(beta_fn(nu1, nu2) - front * beta_cf(nu2, nu1, 1.0 - x) / nu2)
    }
}

/// Regularized incomplete beta `I_x(ν1, ν2)`.
pub fn incomplete_beta_reg(nu1: f64, nu2: f64, x: f64) -> Result<f64> {
    Ok(incomplete_beta(nu1, nu2, x)? / beta_fn(nu1, nu2))
}

fn chi_log_norm(k: usize) -> f64 {
    let h = k as f64 / 2.0;
    ln_gamma(h) + (h - 1.0) * LN_2
}

/// Density of `‖Z‖`, `Z ~ N(0, I_k)`: `t^{k−1} e^{−t²/2} / (Γ(k/2) 2^{(k−2)/2})`.
pub fn chi_density(k: usize, t: f64) -> f64 {
    if t < 0.0 || k == 0 {
        return 0.0;
    }
    if t == 0.0 {
        return if k == 1 { (2.0 / PI).sqrt() } else { 0.0 };
    }
    chi_prefactor(k, k as f64 - 1.0, t)
}

// t^p e^{−t²/2} / (Γ(k/2) 2^{(k−2)/2})
fn chi_prefactor(k: usize, p: f64, t: f64) -> f64 {
    if k <= 60 && t > 1e-3 && t < 30.0 {
        t.powf(p) * (-0.5 * t * t).exp() / (gamma_half(k) * f64::powf(2.0, (k as f64 - 2.0) / 2.0))
    } else {
        (p * t.ln() - 0.5 * t * t - chi_log_norm(k)).exp()
    }
}

/// `(j−1)`-th derivative of the χ_k density at `t > 0` by the closed double sum
/// `t^{k−j} e^{−t²/2}/c_k · Σ_l Σ_m C(k−1, j−1−m−2l) (−1)^{m+l} (j−1)!/(m! l! 2^l) t^{2m+2l}`.
pub fn chi_density_derivative(k: usize, j: usize, t: f64) -> Result<f64> {
    if k == 0 || j == 0 {
        return Err(GkfError::InvalidArgument(format!("need k ≥ 1 and j ≥ 1, got k={k}, j={j}")));
    }
    if !(t > 0.0) {
        return Err(GkfError::Domain(format!("χ density derivatives need t > 0, got {t}")));
    }
    let n = j - 1;
    let fact_n = factorial(n);
    let mut sum = 0.0;
    for l in 0..=n / 2 {
        for m in 0..=(n - 2 * l) {
            let c = binomial(k as i64 - 1, (n - m - 2 * l) as i64);
            if c == 0.0 {
                continue;
            }
            let sign = if (m + l) % 2 == 0 { 1.0 } else { -1.0 };
            let coef = sign * fact_n / (factorial(m) * factorial(l) * f64::powi(2.0, l as i32));
            sum += c * coef * t.powi((2 * m + 2 * l) as i32);
        }
    }
    Ok(chi_prefactor(k, k as f64 - j as f64, t) * sum)
}

/// Upper tail `P(‖Z‖ ≥ x)` of the χ_k distribution.
pub fn chi_sf(k: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(k as f64 / 2.0, 0.5 * x * x)
}

/// A truncated series value together with the number of terms used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
}

pub const SERIES_TERM_CAP: usize = 10_000;

/// Poisson(λ) weights `e^{−λ} λ^i / i!`, truncated at the first index whose
/// remaining tail mass is below `tol·1e−2`.
pub fn poisson_weights(lambda: f64, tol: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(GkfError::InvalidArgument(format!("noncentrality must be ≥ 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(vec![1.0]);
    }
    let threshold = tol * 1e-2;
    let mut w = Vec::new();
    for i in 0..SERIES_TERM_CAP {
        w.push((-lambda + i as f64 * lambda.ln() - ln_factorial(i)).exp());
        // P(N > i) = P(i+1, λ), the regularized lower incomplete gamma
        if gamma_lr(i as f64 + 1.0, lambda) < threshold {
            return Ok(w);
        }
    }
    Err(GkfError::SeriesFailure { terms: SERIES_TERM_CAP })
}

/// Density of `‖Z + μ‖` with `α = ‖μ‖²`: `Σ_i Pois(i; α/2) f_{k+2i}(t)`.
pub fn noncentral_chi_density(k: usize, alpha: f64, t: f64, tol: f64) -> Result<SeriesValue> {
    if k == 0 {
        return Err(GkfError::InvalidArgument("k must be ≥ 1".into()));
    }
    let w = poisson_weights(alpha / 2.0, tol)?;
    let value = w.iter().enumerate().map(|(i, wi)| wi * chi_density(k + 2 * i, t)).sum();
    Ok(SeriesValue { value, terms: w.len() })
}

/// Upper tail `P(‖Z + μ‖ ≥ x)` with `α = ‖μ‖²`.
pub fn noncentral_chi_sf(k: usize, alpha: f64, x: f64, tol: f64) -> Result<SeriesValue> {
    if k == 0 {
        return Err(GkfError::InvalidArgument("k must be ≥ 1".into()));
    }
    let w = poisson_weights(alpha / 2.0, tol)?;
    let value = w.iter().enumerate().map(|(i, wi)| wi * chi_sf(k + 2 * i, x)).sum();
    Ok(SeriesValue { value, terms: w.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{integrate, richardson_derivative};
    use proptest::prelude::*;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.7), 1.0);
        assert_eq!(hermite(2, 0.0), -1.0);
        assert_eq!(hermite(3, 2.0), 2.0);
        // H_n(0) = (−1)^l (2l)!/(l! 2^l) for n = 2l
        assert_eq!(hermite(4, 0.0), 3.0);
        assert_eq!(hermite(6, 0.0), -15.0);
        assert_eq!(hermite(5, 0.0), 0.0);
        let all = hermite_all(8, 1.3);
        for (n, h) in all.iter().enumerate() {
            assert_eq!(*h, hermite(n, 1.3));
        }
    }

    fn gauss(x: f64) -> f64 {
        (-0.5 * x * x).exp()
    }

    #[test]
    fn hermite_derivative_identity_direct() {
        // direct order-n stencils; steps chosen per order to keep round-off
        // below the target (a 1e−3 step loses everything past n = 3)
        let steps = [0.0, 1e-3, 1e-3, 0.05, 0.2, 0.3, 0.6, 0.8, 0.4];
        let levels = [0, 4, 4, 5, 6, 5, 5, 5, 4];
        for n in 1..=8usize {
            for &x in &[-2.0, -1.0, 0.0, 1.0, 2.0] {
                let fd = richardson_derivative(gauss, x, n, steps[n], levels[n]);
                let exact = if n % 2 == 0 { 1.0 } else { -1.0 } * hermite(n, x) * gauss(x);
                let tol = if n <= 6 { 1e-6 } else { 1e-6 * exact.abs().max(1.0) * 10.0 };
                assert!((fd - exact).abs() < tol, "n={n} x={x} fd={fd} exact={exact}");
            }
        }
    }

    #[test]
    fn hermite_derivative_identity_stepwise() {
        // d/dx[(−1)^{n−1} H_{n−1} e^{−x²/2}] = (−1)^n H_n e^{−x²/2}, step 1e−3
        for n in 1..=8usize {
            for &x in &[-2.0, -1.0, 0.0, 1.0, 2.0] {
                let s = |y: f64| if (n - 1) % 2 == 0 { 1.0 } else { -1.0 } * hermite(n - 1, y) * gauss(y);
                let fd = richardson_derivative(s, x, 1, 1e-3, 4);
                let exact = if n % 2 == 0 { 1.0 } else { -1.0 } * hermite(n, x) * gauss(x);
                assert!((fd - exact).abs() < 1e-6, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(0) - 1.0).abs() < 1e-15);
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn ball_volume_recursion() {
        use statrs::function::gamma::gamma;
        for k in 1..=20usize {
            let k_f = k as f64;
            let rec = unit_ball_volume(k - 1) * PI.sqrt() * gamma((k_f + 1.0) / 2.0) / gamma(k_f / 2.0 + 1.0);
            assert!((unit_ball_volume(k) - rec).abs() < 1e-12 * rec.max(1.0), "k={k}");
        }
    }

    #[test]
    fn flag_coefficients() {
        assert!((flag_coeff(5, 0).unwrap() - 1.0).abs() < 1e-14);
        assert!((flag_coeff(2, 1).unwrap() - PI / 2.0).abs() < 1e-14);
        assert!((flag_coeff(3, 1).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(flag_coeff(2, 3), Err(GkfError::InvalidArgument(_))));
    }

    #[test]
    fn incomplete_beta_values() {
        assert!((incomplete_beta(1.0, 1.0, 0.75).unwrap() - 0.75).abs() < 1e-14);
        assert!((incomplete_beta(0.5, 0.5, 1.0).unwrap() - PI).abs() < 1e-13);
        assert!((incomplete_beta(2.0, 1.0, 0.5).unwrap() - 0.125).abs() < 1e-14);
        assert!(incomplete_beta(2.0, 1.0, 1.5).is_err());
        assert!(incomplete_beta(-1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn incomplete_beta_against_statrs() {
        use statrs::function::beta::beta_reg;
        for &(a, b) in &[(0.5, 0.5), (0.3, 2.5), (2.5, 0.7), (1.0, 3.0), (4.5, 2.0), (7.0, 11.0), (0.9, 0.2)] {
            for &x in &[0.01, 0.2, 0.5, 0.7, 0.95, 0.999] {
                let ours = incomplete_beta_reg(a, b, x).unwrap();
                let theirs = beta_reg(a, b, x);
                assert!((ours - theirs).abs() < 1e-11, "a={a} b={b} x={x}: {ours} vs {theirs}");
            }
        }
    }

    #[test]
    fn chi_derivative_examples() {
        for &t in &[0.3f64, 1.0, 2.2] {
            let e = (-0.5 * t * t).exp();
            assert!((chi_density_derivative(2, 1, t).unwrap() - t * e).abs() < 1e-15);
            assert!((chi_density_derivative(2, 2, t).unwrap() - (1.0 - t * t) * e).abs() < 1e-14);
        }
        let v = chi_density_derivative(3, 1, 1.0).unwrap();
        assert!((v - (2.0 / PI).sqrt() * (-0.5f64).exp()).abs() < 1e-15);
        assert!(matches!(chi_density_derivative(2, 1, 0.0), Err(GkfError::Domain(_))));
    }

    #[test]
    fn chi_derivative_chain_matches_finite_differences() {
        for k in 1..=6usize {
            for j in 1..=5usize {
                for i in 0..20 {
                    let t = 0.25 + 0.2 * i as f64;
                    let fd = richardson_derivative(|s| chi_density_derivative(k, j, s).unwrap(), t, 1, 1e-3, 4);
                    let exact = chi_density_derivative(k, j + 1, t).unwrap();
                    assert!((fd - exact).abs() < 1e-6, "k={k} j={j} t={t}");
                }
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for k in 1..=8usize {
            let q = integrate(|t| chi_density(k, t), 0.0, 20.0, 1e-13, 1e-13).unwrap();
            assert!((q.value - 1.0).abs() < 1e-8, "k={k}");
        }
        for &(k, alpha) in &[(1usize, 0.5f64), (2, 1.0), (3, 4.0), (2, 25.0)] {
            let hi = 20.0 + 5.0 * alpha.sqrt();
            let q = integrate(|t| noncentral_chi_density(k, alpha, t, 1e-12).unwrap().value, 0.0, hi, 1e-13, 1e-13)
                .unwrap();
            assert!((q.value - 1.0).abs() < 1e-8, "k={k} alpha={alpha}");
        }
    }

    #[test]
    fn noncentral_reduces_to_central() {
        let v = noncentral_chi_density(3, 0.0, 1.4, 1e-12).unwrap();
        assert_eq!(v.terms, 1);
        assert_eq!(v.value, chi_density(3, 1.4));
    }

    #[test]
    fn noncentral_density_matches_monte_carlo() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        // kernel estimate of the density of ‖Z + (1, 0)‖ at 1
        let n = 10_000_000usize;
        let h = 1e-2;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0u64;
        for _ in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let r = ((a + 1.0).powi(2) + b * b).sqrt();
            if (r - 1.0).abs() < h {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let est = p / (2.0 * h);
        let se = (p * (1.0 - p) / n as f64).sqrt() / (2.0 * h);
        let exact = noncentral_chi_density(2, 1.0, 1.0, 1e-12).unwrap().value;
        assert!((est - exact).abs() < 3.0 * se, "est={est} exact={exact} se={se}");
    }

    #[test]
    fn series_cap_is_reported() {
        assert!(matches!(poisson_weights(1e6, 1e-12), Err(GkfError::SeriesFailure { .. })));
    }

    proptest! {
        #[test]
        fn flag_coeff_symmetry(k in 0usize..25, i in 0usize..25) {
            prop_assume!(i <= k);
            prop_assert_eq!(flag_coeff(k, i).unwrap(), flag_coeff(k, k - i).unwrap());
        }

        #[test]
        fn hermite_recurrence(n in 1usize..20, x in -5.0f64..5.0) {
            let lhs = hermite(n + 1, x);
            let rhs = x * hermite(n, x) - n as f64 * hermite(n - 1, x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn beta_complement(a in 0.2f64..6.0, b in 0.2f64..6.0, x in 0.0f64..1.0) {
            let s = incomplete_beta(a, b, x).unwrap() + incomplete_beta(b, a, 1.0 - x).unwrap();
            prop_assert!((s - beta_fn(a, b)).abs() < 1e-10 * beta_fn(a, b).max(1.0));
        }
    }
}
