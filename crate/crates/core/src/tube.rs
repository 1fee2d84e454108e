//! Monte Carlo Gaussian tube volumes, polynomial coefficient extraction and
//! coarea window estimators.
//!
//! All radii of a [`TubeCurve`] are evaluated on one sample set: each sample's
//! distance to the domain is compared against every radius. The indicator of
//! `d ≤ r_i` is then nested in `r`, the curve is monotone, and its covariance is
//! `(p_min(i,j) − p_i p_j) / n`, which the fit propagates.

use nalgebra::{DMatrix, DVector};
use rand_distr::StandardNormal;
use rand::Rng;
use serde::Serialize;

use crate::error::{GkfError, Result};
use crate::gmf::{Cone2, Domain, ImplicitDomain, SmoothMap};
use crate::rng::par_blocks;
use crate::special::factorial;

const PROJECTION_CAP: usize = 200;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn ray_distance(p: [f64; 2], origin: [f64; 2], dir: [f64; 2]) -> f64 {
    let d = [p[0] - origin[0], p[1] - origin[1]];
    let t = (d[0] * dir[0] + d[1] * dir[1]).max(0.0);
    let e = [d[0] - t * dir[0], d[1] - t * dir[1]];
    (e[0] * e[0] + e[1] * e[1]).sqrt()
}

/// Distance from `x` to a convex planar cone: zero inside, otherwise the
/// nearer of the two edge rays (which covers the apex).
pub fn cone_distance(cone: &Cone2, x: &[f64]) -> f64 {
    let p = [x[0] - cone.apex[0], x[1] - cone.apex[1]];
    let (v1, v2) = (cone.v1, cone.v2);
    let det = v1[0] * v2[1] - v1[1] * v2[0];
    let a1 = (p[0] * v2[1] - p[1] * v2[0]) / det;
    let a2 = (v1[0] * p[1] - v1[1] * p[0]) / det;
    if a1 >= 0.0 && a2 >= 0.0 {
        return 0.0;
    }
    let q = [x[0], x[1]];
    ray_distance(q, cone.apex, v1).min(ray_distance(q, cone.apex, v2))
}

/// Distance to `{‖a‖² ≥ c‖b‖²}` with `a = x[..k1]`, `b = x[k1..]`,
/// `c = k1·u/k2`. In the `(‖a‖, ‖b‖)` quarter-plane the region is the wedge
/// below the ray `s = √c·t`, so the distance is to that ray.
pub fn f_region_distance(k1: usize, k2: usize, level: f64, x: &[f64]) -> f64 {
    let c = k1 as f64 * level / k2 as f64;
    let s = norm(&x[..k1]);
    let t = norm(&x[k1..]);
    let sc = c.sqrt();
    if s >= sc * t {
        0.0
    } else {
        (sc * t - s) / (1.0 + c).sqrt()
    }
}

fn level_step(f: &dyn SmoothMap, u: f64, y: &mut [f64], g: &mut [f64]) -> Result<()> {
    f.gradient(y, g);
    let gg = dot(g, g);
    if !(gg > 0.0) || !gg.is_finite() {
        return Err(GkfError::ProjectionFailure { iterations: 0 });
    }
    let step = (u - f.value(y)) / gg;
    for (yi, gi) in y.iter_mut().zip(g.iter()) {
        *yi += step * gi;
    }
    Ok(())
}

/// Nearest point on `{F = u}`. Alternating gradient steps onto the level set
/// and removal of the tangential part of `x − y` bring `y` close; Newton on
/// the Lagrange conditions `y − x = λ∇F(y)`, `F(y) = u` then converges. The
/// total iteration count is capped.
pub fn implicit_distance(d: &ImplicitDomain, x: &[f64]) -> Result<f64> {
    let f = d.map.as_ref();
    let u = d.level;
    if f.value(x) >= u {
        return Ok(0.0);
    }
    let k = x.len();
    let mut g = vec![0.0; k];
    let mut h = vec![0.0; k * k];
    let mut y = x.to_vec();
    let scale = u.abs().max(1.0);
    let mut iterations = 0;
    while iterations < PROJECTION_CAP / 4 {
        iterations += 1;
        let prev = y.clone();
        level_step(f, u, &mut y, &mut g)?;
        f.gradient(&y, &mut g);
        let gn = norm(&g);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let along = dot(&diff, &g) / gn;
        for i in 0..k {
            y[i] += diff[i] - along * g[i] / gn;
        }
        let moved = y.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if moved < 1e-4 * norm(&y).max(1.0) {
            break;
        }
    }
    level_step(f, u, &mut y, &mut g)?;
    let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let mut lambda = dot(&diff, &g) / dot(&g, &g);
    while iterations < PROJECTION_CAP {
        iterations += 1;
        f.gradient(&y, &mut g);
        f.hessian(&y, &mut h);
        let mut jac = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for i in 0..k {
            for j in 0..k {
                jac[(i, j)] = if i == j { 1.0 } else { 0.0 } - lambda * h[i * k + j];
            }
            jac[(i, k)] = -g[i];
            jac[(k, i)] = g[i];
            rhs[i] = -(y[i] - x[i] - lambda * g[i]);
        }
        rhs[k] = u - f.value(&y);
        let delta = jac.lu().solve(&rhs).ok_or(GkfError::ProjectionFailure { iterations })?;
        for i in 0..k {
            y[i] += delta[i];
        }
        lambda += delta[k];
        let moved = (0..k).map(|i| delta[i] * delta[i]).sum::<f64>().sqrt();
        if moved < 1e-12 * norm(&y).max(1.0) && (f.value(&y) - u).abs() <= 1e-10 * scale {
            return Ok(y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
    }
    Err(GkfError::ProjectionFailure { iterations })
}

/// Euclidean distance from `x` to the domain; zero inside.
pub fn distance_to_domain(domain: &Domain, x: &[f64]) -> Result<f64> {
    if x.len() != domain.dim() {
        return Err(GkfError::InvalidArgument(format!(
            "point has dimension {}, domain has {}",
            x.len(),
            domain.dim()
        )));
    }
    Ok(match domain {
        Domain::HalfSpace { direction, level } => (level - dot(x, direction)).max(0.0),
        Domain::BallComplement { radius, .. } => (radius - norm(x)).max(0.0),
        Domain::NoncentralBallComplement { center, radius } => {
            let d = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (radius - d).max(0.0)
        }
        Domain::FRegion { k1, k2, level } => f_region_distance(*k1, *k2, *level, x),
        Domain::Cone2(c) => cone_distance(c, x),
        Domain::Implicit(d) => implicit_distance(d, x)?,
    })
}

/// Estimated `γ(T(D, r))` on a grid of radii from one common sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeCurve {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// True when all radii share one sample set (nested indicators).
    pub common_samples: bool,
}

impl TubeCurve {
    /// Noise-free curve from an exact volume function, with `se := 1`.
    pub fn analytic<F: Fn(f64) -> f64>(radii: &[f64], volume: F) -> Self {
        Self {
            radii: radii.to_vec(),
            volumes: radii.iter().map(|&r| volume(r)).collect(),
            std_errors: vec![1.0; radii.len()],
            n_samples: 0,
            seed: 0,
            common_samples: false,
        }
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(GkfError::InvalidArgument("empty radius list".into()));
    }
    if radii.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(GkfError::InvalidArgument("radii must be finite and nonnegative".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GkfError::InvalidArgument("radii must be strictly increasing".into()));
    }
    Ok(())
}

/// Gaussian tube volumes at every radius from `n_samples` shared samples.
pub fn mc_tube_curve(domain: &Domain, radii: &[f64], n_samples: usize, seed: u64) -> Result<TubeCurve> {
    domain.validate()?;
    check_radii(radii)?;
    if n_samples == 0 {
        return Err(GkfError::InvalidArgument("n_samples must be positive".into()));
    }
    let k = domain.dim();
    let r_max = *radii.last().expect("nonempty");
    let counts = par_blocks(
        n_samples,
        seed,
        |rng, count| -> Result<Vec<u64>> {
            let mut c = vec![0u64; radii.len()];
            let mut x = vec![0.0; k];
            for _ in 0..count {
                for xi in x.iter_mut() {
                    *xi = rng.sample(StandardNormal);
                }
                let d = distance_to_domain(domain, &x)?;
                if d > r_max {
                    continue;
                }
                // radii are increasing: first index with d ≤ r_i onwards
                let first = radii.partition_point(|&r| r < d);
                for ci in &mut c[first..] {
                    *ci += 1;
                }
            }
            Ok(c)
        },
        |a, b| match (a, b) {
            (Ok(mut a), Ok(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            }
            (Err(e), _) | (_, Err(e)) => Err(e),
        },
    )
    .expect("at least one block")?;
    let n = n_samples as f64;
    let volumes: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let std_errors = volumes.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    Ok(TubeCurve { radii: radii.to_vec(), volumes, std_errors, n_samples, seed, common_samples: true })
}

/// Single-radius tube volume with its binomial standard error.
pub fn mc_tube_volume(domain: &Domain, r: f64, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    let c = mc_tube_curve(domain, &[r], n_samples, seed)?;
    Ok((c.volumes[0], c.std_errors[0]))
}

/// `n` Chebyshev–Lobatto radii on `[0, r_max]`, increasing.
pub fn chebyshev_radii(n: usize, r_max: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| 0.5 * r_max * (1.0 - (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    /// Polynomial degree above the requested order.
    pub guard_degrees: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { guard_degrees: 2 }
    }
}

/// Fitted `M̂_0..M̂_J` with their covariance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientFit {
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    /// Condition number of the column-equilibrated weighted design.
    pub condition: f64,
}

fn chebyshev_row(x: f64, degree: usize) -> Vec<f64> {
    let mut t = vec![1.0; degree + 1];
    if degree >= 1 {
        t[1] = x;
    }
    for n in 2..=degree {
        t[n] = 2.0 * x * t[n - 1] - t[n - 2];
    }
    t
}

/// `T_n^{(k)}(−1) = (−1)^{n+k} Π_{i<k} (n² − i²)/(2i + 1)`.
fn chebyshev_derivative_at_minus_one(n: usize, k: usize) -> f64 {
    let mut p = 1.0;
    for i in 0..k {
        p *= (n * n) as f64 - (i * i) as f64;
        p /= (2 * i + 1) as f64;
    }
    if (n + k) % 2 == 0 {
        p
    } else {
        -p
    }
}

/// Weighted least squares of the curve on a Chebyshev basis over
/// `[0, r_max]` of degree `J + guard`, returning the derivatives at `r = 0`
/// (the coefficients of `r^j / j!`). Weights are `1/se²`, or uniform if any
/// standard error is zero. The coefficient covariance is the sandwich
/// `G Σ Gᵀ` with `Σ` the nested-indicator covariance for common-sample
/// curves and `diag(se²)` otherwise.
pub fn fit_tube_coefficients(curve: &TubeCurve, order: usize, options: FitOptions) -> Result<CoefficientFit> {
    check_radii(&curve.radii)?;
    let m = curve.radii.len();
    if curve.volumes.len() != m || curve.std_errors.len() != m {
        return Err(GkfError::InvalidArgument("curve arrays have mismatched lengths".into()));
    }
    let degree = order + options.guard_degrees;
    if m < 2 * (order + 2) || m <= degree {
        return Err(GkfError::InvalidArgument(format!(
            "{m} radii are too few for order {order} with degree {degree}"
        )));
    }
    let r_max = curve.radii[m - 1];
    if !(r_max > 0.0) {
        return Err(GkfError::InvalidArgument("largest radius must be positive".into()));
    }
    let uniform = curve.std_errors.iter().any(|s| !(*s > 0.0));
    let sqrt_w: Vec<f64> = curve.std_errors.iter().map(|s| if uniform { 1.0 } else { 1.0 / s }).collect();

    let mut b = DMatrix::zeros(m, degree + 1);
    for (i, &r) in curve.radii.iter().enumerate() {
        let row = chebyshev_row(2.0 * r / r_max - 1.0, degree);
        for (j, t) in row.iter().enumerate() {
            b[(i, j)] = sqrt_w[i] * t;
        }
    }
    let col_norms: Vec<f64> = (0..=degree).map(|j| b.column(j).norm()).collect();
    let mut eq = b.clone();
    for (j, nj) in col_norms.iter().enumerate() {
        eq.column_mut(j).scale_mut(1.0 / nj);
    }
    let sv = eq.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= 1e10) {
        return Err(GkfError::FitUnstable { condition });
    }
    let pinv = eq.pseudo_inverse(0.0).map_err(|e| GkfError::InvalidArgument(e.to_string()))?;
    // c = D⁻¹ pinv(B D⁻¹) W^{1/2} y
    let mut g = pinv;
    for (j, nj) in col_norms.iter().enumerate() {
        g.row_mut(j).scale_mut(1.0 / nj);
    }
    for (i, w) in sqrt_w.iter().enumerate() {
        g.column_mut(i).scale_mut(*w);
    }
    // centering keeps the solve exact for flat curves; T_0 ≡ 1 absorbs the shift
    let offset = curve.volumes[0];
    let y = DVector::from_iterator(m, curve.volumes.iter().map(|v| v - offset));
    let mut c = &g * &y;
    // iterative refinement against the unweighted design
    let mut raw = DMatrix::zeros(m, degree + 1);
    for (i, &r) in curve.radii.iter().enumerate() {
        for (j, t) in chebyshev_row(2.0 * r / r_max - 1.0, degree).into_iter().enumerate() {
            raw[(i, j)] = t;
        }
    }
    for _ in 0..2 {
        let res = &y - &raw * &c;
        c += &g * res;
    }

    let mut a = DMatrix::zeros(order + 1, degree + 1);
    for k in 0..=order {
        let scale = (2.0 / r_max).powi(k as i32);
        for n in 0..=degree {
            a[(k, n)] = chebyshev_derivative_at_minus_one(n, k) * scale;
        }
    }
    c[0] += offset;
    let coeffs = &a * &c;

    let mut sigma = DMatrix::zeros(m, m);
    let n = curve.n_samples as f64;
    for i in 0..m {
        for j in 0..m {
            sigma[(i, j)] = if curve.common_samples && n > 0.0 {
                let (pi, pj) = (curve.volumes[i], curve.volumes[j]);
                (pi.min(pj) - pi * pj) / n
            } else if i == j {
                curve.std_errors[i] * curve.std_errors[i]
            } else {
                0.0
            };
        }
    }
    let ag = &a * &g;
    let cov = &ag * sigma * ag.transpose();
    let covariance: Vec<Vec<f64>> = (0..=order).map(|i| (0..=order).map(|j| cov[(i, j)]).collect()).collect();
    let std_errors = (0..=order).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    Ok(CoefficientFit { order, coefficients: coeffs.iter().copied().collect(), covariance, std_errors, condition })
}

/// Sample passed to coarea weights. `hess` is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoareaPoint {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoareaEstimate {
    pub value: f64,
    pub se: f64,
    pub in_window: usize,
}

type Weight<'a> = &'a (dyn Fn(&CoareaPoint) -> f64 + Sync);

/// Several window estimators `(1/2ε) E[1{|F − u| < ε} ‖∇F‖ w̃]` on one
/// sample set. Returns `(estimate, se)` per weight and the window count.
pub fn coarea_mc_multi(
    map: &dyn SmoothMap,
    level: f64,
    weights: &[Weight<'_>],
    epsilon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<(f64, f64)>, usize)> {
    if !(epsilon > 0.0) {
        return Err(GkfError::InvalidArgument("window half-width must be positive".into()));
    }
    if n_samples < 2 {
        return Err(GkfError::InvalidArgument("need at least two samples".into()));
    }
    let k = map.dim();
    let nw = weights.len();
    let (sums, inside) = par_blocks(
        n_samples,
        seed,
        |rng, count| {
            let mut s = vec![0.0; 2 * nw];
            let mut inside = 0usize;
            let mut x = vec![0.0; k];
            for _ in 0..count {
                for xi in x.iter_mut() {
                    *xi = rng.sample(StandardNormal);
                }
                let value = map.value(&x);
                if (value - level).abs() >= epsilon {
                    continue;
                }
                inside += 1;
                let mut grad = vec![0.0; k];
                let mut hess = vec![0.0; k * k];
                map.gradient(&x, &mut grad);
                map.hessian(&x, &mut hess);
                let grad_norm = norm(&grad);
                let p = CoareaPoint { x: x.clone(), value, grad, hess, grad_norm };
                for (i, w) in weights.iter().enumerate() {
                    let y = grad_norm * w(&p) / (2.0 * epsilon);
                    s[2 * i] += y;
                    s[2 * i + 1] += y * y;
                }
            }
            (s, inside)
        },
        |(mut a, ia), (b, ib)| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            (a, ia + ib)
        },
    )
    .expect("at least one block");
    if inside == 0 {
        return Err(GkfError::WindowTooNarrow);
    }
    let n = n_samples as f64;
    let out = (0..nw)
        .map(|i| {
            let mean = sums[2 * i] / n;
            let var = (sums[2 * i + 1] / n - mean * mean).max(0.0) * n / (n - 1.0);
            (mean, (var / n).sqrt())
        })
        .collect();
    Ok((out, inside))
}

/// Window estimator of `∫_{F=u} w̃ (2π)^{−k/2} e^{−‖x‖²/2} dH_{k−1}`.
pub fn coarea_mc(
    map: &dyn SmoothMap,
    level: f64,
    weight: &(dyn Fn(&CoareaPoint) -> f64 + Sync),
    epsilon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CoareaEstimate> {
    let (est, inside) = coarea_mc_multi(map, level, &[weight], epsilon, n_samples, seed)?;
    Ok(CoareaEstimate { value: est[0].0, se: est[0].1, in_window: inside })
}

/// Taylor polynomial `Σ_j M_j r^j / j!` of a coefficient vector.
pub fn tube_polynomial(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().enumerate().map(|(j, m)| m * r.powi(j as i32) / factorial(j)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmf::{gmf_chi, gmf_half_space, LinearMap, SquaredNorm};
    use crate::special::{chi_density, norm_pdf, norm_sf};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use std::sync::Arc;

    fn half(u: f64) -> Domain {
        Domain::HalfSpace { direction: vec![1.0, 0.0], level: u }
    }

    #[test]
    fn distance_examples() {
        assert!((distance_to_domain(&half(1.0), &[0.4, 3.0]).unwrap() - 0.6).abs() < 1e-15);
        let ball = Domain::BallComplement { k: 2, radius: 2.0 };
        assert_eq!(distance_to_domain(&ball, &[0.0, 0.0]).unwrap(), 2.0);
        let q = Cone2::new([1.0, 0.0], [0.0, 1.0], [0.0, 0.0]).unwrap();
        assert!((cone_distance(&q, &[-3.0, -4.0]) - 5.0).abs() < 1e-15);
        assert_eq!(cone_distance(&q, &[1.0, 2.0]), 0.0);
        assert!((cone_distance(&q, &[-2.0, 5.0]) - 2.0).abs() < 1e-15);
        assert!(distance_to_domain(&ball, &[0.0]).is_err());
    }

    #[test]
    fn f_region_distance_matches_projection() {
        let map = Arc::new(crate::gmf::FRatio { k1: 2, k2: 2 });
        let imp = ImplicitDomain { map, level: 1.5, critical_radius_hint: 0.1 };
        let pts = [[0.3, -0.2, 1.1, 0.7], [0.6, 0.3, -0.8, 0.9], [1.0, 0.2, 0.9, -0.6]];
        for p in pts {
            let a = f_region_distance(2, 2, 1.5, &p);
            let b = implicit_distance(&imp, &p).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn implicit_projection_matches_ball() {
        let imp = ImplicitDomain { map: Arc::new(SquaredNorm { k: 3 }), level: 4.0, critical_radius_hint: 2.0 };
        for p in [[0.3, -0.2, 1.1], [1.5, 0.5, -0.2], [0.01, 0.0, 0.02]] {
            let exact = (2.0 - norm(&p)).max(0.0);
            assert!((implicit_distance(&imp, &p).unwrap() - exact).abs() < 1e-9);
        }
        assert_eq!(implicit_distance(&imp, &[3.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn projection_failure_is_reported() {
        // the center of a ball has no gradient to follow
        let imp = ImplicitDomain { map: Arc::new(SquaredNorm { k: 2 }), level: 1.0, critical_radius_hint: 1.0 };
        assert!(matches!(implicit_distance(&imp, &[0.0, 0.0]), Err(GkfError::ProjectionFailure { .. })));
    }

    #[test]
    fn tube_volume_examples() {
        let (v, se) = mc_tube_volume(&half(1.0), 0.3, 400_000, 3).unwrap();
        assert!((v - norm_sf(0.7)).abs() < 4.0 * se);
        let ball = Domain::BallComplement { k: 2, radius: 2.0 };
        let (v, se) = mc_tube_volume(&ball, 0.5, 400_000, 4).unwrap();
        assert!((v - (-1.5f64 * 1.5 / 2.0).exp()).abs() < 4.0 * se);
        let (v, se) = mc_tube_volume(&ball, 0.0, 400_000, 5).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 4.0 * se);
    }

    #[test]
    fn curve_is_monotone_and_deterministic() {
        let radii = chebyshev_radii(16, 0.25);
        let d = Domain::BallComplement { k: 2, radius: 2.0 };
        let a = mc_tube_curve(&d, &radii, 200_000, 9).unwrap();
        assert!(a.volumes.windows(2).all(|w| w[0] <= w[1]));
        let b = mc_tube_curve(&d, &radii, 200_000, 9).unwrap();
        assert_eq!(a, b);
        assert!(mc_tube_curve(&d, &[0.2, 0.1], 10, 1).is_err());
    }

    #[test]
    fn fit_analytic_half_space() {
        let radii = chebyshev_radii(20, 0.25);
        let curve = TubeCurve::analytic(&radii, |r| norm_sf(1.0 - r));
        let fit = fit_tube_coefficients(&curve, 4, FitOptions { guard_degrees: 6 }).unwrap();
        let exact = gmf_half_space(1.0, 4);
        for j in 0..=4 {
            let err = (fit.coefficients[j] - exact.get(j)).abs();
            // M_3 vanishes at u = 1
            let err = if exact.get(j) == 0.0 { err } else { err / exact.get(j).abs() };
            // one ulp of input noise moves M̂_4 by ~1e-8
            let tol = if j < 4 { 1e-8 } else { 1e-6 };
            assert!(err < tol, "j={j} err={err:e}");
        }
    }

    #[test]
    fn fit_constant_curve() {
        let radii = chebyshev_radii(12, 0.25);
        let curve = TubeCurve::analytic(&radii, |_| 1.0);
        let fit = fit_tube_coefficients(&curve, 3, FitOptions::default()).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        for j in 1..=3 {
            assert!(fit.coefficients[j].abs() < 1e-12);
        }
    }

    #[test]
    fn fit_rejects_short_curves() {
        let curve = TubeCurve::analytic(&[0.1], |r| r);
        assert!(fit_tube_coefficients(&curve, 1, FitOptions::default()).is_err());
    }

    #[test]
    fn fit_mc_ball_complement() {
        let radii = chebyshev_radii(16, 0.25);
        let d = Domain::BallComplement { k: 2, radius: 2.0 };
        let curve = mc_tube_curve(&d, &radii, 2_000_000, 21).unwrap();
        let fit = fit_tube_coefficients(&curve, 2, FitOptions::default()).unwrap();
        let exact = gmf_chi(2, 2.0, 2).unwrap();
        for j in 0..=2 {
            let z = (fit.coefficients[j] - exact.get(j)) / fit.std_errors[j];
            assert!(z.abs() < 4.0, "j={j} z={z}");
        }
    }

    #[test]
    fn coarea_examples() {
        let lin = LinearMap { z: vec![1.0, 0.0] };
        let est = coarea_mc(&lin, 0.5, &|_p: &CoareaPoint| 1.0, 0.01, 2_000_000, 5).unwrap();
        assert!((est.value - norm_pdf(0.5)).abs() < 4.0 * est.se);
        let sq = SquaredNorm { k: 2 };
        let est = coarea_mc(&sq, 4.0, &|_p: &CoareaPoint| 1.0, 0.04, 2_000_000, 6).unwrap();
        // E[‖∇F‖ | F = 4] φ_F(4) = 4 · e^{−2}/2 = f_2(2)
        assert!((est.value - chi_density(2, 2.0)).abs() < 4.0 * est.se);
        let est = coarea_mc(&sq, 4.0, &|_p: &CoareaPoint| 0.0, 0.04, 10_000, 6).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(matches!(
            coarea_mc(&sq, 1e6, &|_p: &CoareaPoint| 1.0, 1e-3, 1000, 1),
            Err(GkfError::WindowTooNarrow)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cone_distance_is_zero_inside_and_positive_outside(
            t in 0.2f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0, px in -5.0f64..5.0, py in -5.0f64..5.0
        ) {
            let c = Cone2::new([1.0, 0.0], [t.cos(), t.sin()], [a, b]).unwrap();
            let d = cone_distance(&c, &[px, py]);
            prop_assert!(d >= 0.0);
            // moving toward the apex never increases the distance by more than the step
            let q = [0.5 * (px + a), 0.5 * (py + b)];
            let step = 0.5 * ((px - a).powi(2) + (py - b).powi(2)).sqrt();
            prop_assert!(cone_distance(&c, &q) <= d + step + 1e-12);
        }

        #[test]
        fn f_region_distance_is_lipschitz(
            x in proptest::collection::vec(-3.0f64..3.0, 4), dx in proptest::collection::vec(-0.1f64..0.1, 4)
        ) {
            let y: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let step = norm(&dx);
            let (d1, d2) = (f_region_distance(2, 2, 1.0, &x), f_region_distance(2, 2, 1.0, &y));
            prop_assert!((d1 - d2).abs() <= step + 1e-12);
        }
    }
}
