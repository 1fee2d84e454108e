//! Gaussian Minkowski functionals: the coefficients `M_j` of `r^j / j!` in the
//! standard Gaussian volume of the tube `T(D, r)`.
//!
//! Closed forms cover half-spaces, (noncentral) ball complements, the F-ratio
//! region and planar cones. [`gmf_generic_eq34`] evaluates the boundary
//! integral form from quadrature nodes, and [`gmf_m1_m2_coarea`] estimates the
//! first two functionals of an implicit domain by Monte Carlo.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{GkfError, Result};
use crate::numeric;
use crate::special::{
    binomial, chi_density_derivative, chi_sf, factorial, hermite_all, incomplete_beta, incomplete_beta_reg,
    mills_ratio, norm_pdf, norm_sf, poisson_weights, INV_SQRT_2PI,
};
use crate::tube::{coarea_mc_multi, CoareaPoint};

/// A smooth scalar map on `R^k` with gradient and Hessian.
pub trait SmoothMap: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    /// Row-major `k×k` Hessian.
    fn hessian(&self, x: &[f64], h: &mut [f64]);
    fn describe(&self) -> String;
}

/// `F(x) = ⟨x, z⟩`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub z: Vec<f64>,
}

impl SmoothMap for LinearMap {
    fn dim(&self) -> usize {
        self.z.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.z).map(|(a, b)| a * b).sum()
    }
    fn gradient(&self, _x: &[f64], g: &mut [f64]) {
        g.copy_from_slice(&self.z);
    }
    fn hessian(&self, _x: &[f64], h: &mut [f64]) {
        h.fill(0.0);
    }
    fn describe(&self) -> String {
        format!("linear{:?}", self.z)
    }
}

/// `F(x) = ‖x‖²` on `R^k`.
#[derive(Debug, Clone)]
pub struct SquaredNorm {
    pub k: usize,
}

impl SmoothMap for SquaredNorm {
    fn dim(&self) -> usize {
        self.k
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|a| a * a).sum()
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi = 2.0 * xi;
        }
    }
    fn hessian(&self, _x: &[f64], h: &mut [f64]) {
        h.fill(0.0);
        for i in 0..self.k {
            h[i * self.k + i] = 2.0;
        }
    }
    fn describe(&self) -> String {
        format!("sum-of-squares(k={})", self.k)
    }
}

/// `F(x) = (U/k1) / (V/k2)` with `U` the squared norm of the first `k1`
/// coordinates and `V` that of the last `k2`.
#[derive(Debug, Clone)]
pub struct FRatio {
    pub k1: usize,
    pub k2: usize,
}

impl FRatio {
    fn uv(&self, x: &[f64]) -> (f64, f64) {
        let u = x[..self.k1].iter().map(|a| a * a).sum();
        let v = x[self.k1..].iter().map(|a| a * a).sum();
        (u, v)
    }
}

impl SmoothMap for FRatio {
    fn dim(&self) -> usize {
        self.k1 + self.k2
    }
    fn value(&self, x: &[f64]) -> f64 {
        let (u, v) = self.uv(x);
        self.k2 as f64 * u / (self.k1 as f64 * v)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        let (u, v) = self.uv(x);
        let c = self.k2 as f64 / self.k1 as f64;
        for i in 0..self.k1 {
            g[i] = c * 2.0 * x[i] / v;
        }
        for i in self.k1..self.dim() {
            g[i] = -c * u * 2.0 * x[i] / (v * v);
        }
    }
    fn hessian(&self, x: &[f64], h: &mut [f64]) {
        let (u, v) = self.uv(x);
        let c = self.k2 as f64 / self.k1 as f64;
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let a = i < self.k1;
                let b = j < self.k1;
                let d = if i == j { 1.0 } else { 0.0 };
                h[i * n + j] = match (a, b) {
                    (true, true) => c * 2.0 * d / v,
                    (true, false) | (false, true) => -c * 4.0 * x[i] * x[j] / (v * v),
                    (false, false) => c * u * (-2.0 * d / (v * v) + 8.0 * x[i] * x[j] / (v * v * v)),
                };
            }
        }
    }
    fn describe(&self) -> String {
        format!("F-ratio(k1={}, k2={})", self.k1, self.k2)
    }
}

/// The superlevel set `{F ≥ u}` of a smooth map.
#[derive(Clone)]
pub struct ImplicitDomain {
    pub map: Arc<dyn SmoothMap>,
    pub level: f64,
    pub critical_radius_hint: f64,
}

impl fmt::Debug for ImplicitDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitDomain")
            .field("map", &self.map.describe())
            .field("level", &self.level)
            .field("critical_radius_hint", &self.critical_radius_hint)
            .finish()
    }
}

/// `C(v1, v2, w) = {w + a1 v1 + a2 v2 : a1, a2 ≥ 0}` in `R²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cone2 {
    pub v1: [f64; 2],
    pub v2: [f64; 2],
    pub apex: [f64; 2],
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl Cone2 {
    pub fn new(v1: [f64; 2], v2: [f64; 2], apex: [f64; 2]) -> Result<Self> {
        for v in [v1, v2] {
            let n = dot2(v, v).sqrt();
            if (n - 1.0).abs() > 1e-12 {
                return Err(GkfError::InvalidArgument(format!("cone edge {v:?} is not a unit vector")));
            }
        }
        if (v1[0] * v2[1] - v1[1] * v2[0]).abs() < 1e-12 {
            return Err(GkfError::DegenerateCone);
        }
        Ok(Self { v1, v2, apex })
    }

    /// Opening angle `θ = arccos⟨v1, v2⟩`.
    pub fn theta(&self) -> f64 {
        dot2(self.v1, self.v2).clamp(-1.0, 1.0).acos()
    }

    /// Unit normal to `v1` on the side of `v2`.
    pub fn v1_perp(&self) -> [f64; 2] {
        let p = [-self.v1[1], self.v1[0]];
        if dot2(p, self.v2) > 0.0 {
            p
        } else {
            [-p[0], -p[1]]
        }
    }

    /// Unit normal to `v2` on the side of `v1`.
    pub fn v2_perp(&self) -> [f64; 2] {
        let p = [-self.v2[1], self.v2[0]];
        if dot2(p, self.v1) > 0.0 {
            p
        } else {
            [-p[0], -p[1]]
        }
    }
}

/// Regions of Gaussian space whose tube geometry is known.
#[derive(Debug, Clone)]
pub enum Domain {
    /// `{x : ⟨x, direction⟩ ≥ level}` with a unit direction.
    HalfSpace { direction: Vec<f64>, level: f64 },
    /// `{x ∈ R^k : ‖x‖ ≥ radius}`.
    BallComplement { k: usize, radius: f64 },
    /// `{x : ‖x − center‖ ≥ radius}`.
    NoncentralBallComplement { center: Vec<f64>, radius: f64 },
    /// `{F_{k1,k2} ≥ level}` in `R^{k1+k2}`.
    FRegion { k1: usize, k2: usize, level: f64 },
    Cone2(Cone2),
    Implicit(ImplicitDomain),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::HalfSpace { direction, .. } => direction.len(),
            Domain::BallComplement { k, .. } => *k,
            Domain::NoncentralBallComplement { center, .. } => center.len(),
            Domain::FRegion { k1, k2, .. } => k1 + k2,
            Domain::Cone2(_) => 2,
            Domain::Implicit(d) => d.map.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::HalfSpace { direction, .. } => {
                let n = direction.iter().map(|a| a * a).sum::<f64>().sqrt();
                if direction.is_empty() || (n - 1.0).abs() > 1e-12 {
                    return Err(GkfError::InvalidArgument("half-space direction must be a unit vector".into()));
                }
            }
            Domain::BallComplement { k, radius } => {
                if *k == 0 || !(*radius > 0.0) {
                    return Err(GkfError::InvalidArgument("ball complement needs k ≥ 1 and radius > 0".into()));
                }
            }
            Domain::NoncentralBallComplement { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return Err(GkfError::InvalidArgument("ball complement needs k ≥ 1 and radius > 0".into()));
                }
            }
            Domain::FRegion { k1, k2, level } => {
                if *k1 == 0 || *k2 == 0 || !(*level > 0.0) {
                    return Err(GkfError::InvalidArgument("F region needs k1, k2 ≥ 1 and level > 0".into()));
                }
            }
            Domain::Cone2(c) => {
                Cone2::new(c.v1, c.v2, c.apex)?;
            }
            Domain::Implicit(d) => {
                if !(d.critical_radius_hint > 0.0) {
                    return Err(GkfError::InvalidArgument("critical radius hint must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Critical radius (reach) of the domain; `∞` for convex domains.
    pub fn critical_radius(&self) -> f64 {
        match self {
            Domain::HalfSpace { .. } | Domain::Cone2(_) => f64::INFINITY,
            Domain::BallComplement { radius, .. } | Domain::NoncentralBallComplement { radius, .. } => *radius,
            // the boundary is a cone through the origin
            Domain::FRegion { .. } => 0.0,
            Domain::Implicit(d) => d.critical_radius_hint,
        }
    }
}

/// Coefficients `M_0..M_J` of `r^j / j!` in `γ(T(D, r))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmfSeries {
    pub coeffs: Vec<f64>,
    /// Number of series terms used, for series-based domains.
    pub series_terms: Option<usize>,
}

impl GmfSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs, series_terms: None }
    }

    /// Maximal order `J`.
    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn get(&self, j: usize) -> f64 {
        self.coeffs[j]
    }
}

/// Half-space `{⟨x, z⟩ ≥ u}`: `M_0 = 1 − Φ(u)`, `M_j = φ(u) H_{j−1}(u)`.
pub fn gmf_half_space(u: f64, order: usize) -> GmfSeries {
    let h = hermite_all(order, u);
    let phi = norm_pdf(u);
    let mut c = vec![norm_sf(u)];
    for j in 1..=order {
        c.push(phi * h[j - 1]);
    }
    GmfSeries::new(c)
}

/// Ball complement `{‖x‖ ≥ x}` in `R^k`: `M_0 = P(χ_k ≥ x)` and
/// `M_j = (−1)^{j−1} f_k^{(j−1)}(x)`.
pub fn gmf_chi(k: usize, x: f64, order: usize) -> Result<GmfSeries> {
    if k == 0 || !(x > 0.0) {
        return Err(GkfError::InvalidArgument(format!("gmf_chi needs k ≥ 1 and x > 0, got k={k}, x={x}")));
    }
    let mut c = vec![chi_sf(k, x)];
    for j in 1..=order {
        let sign = if (j - 1) % 2 == 0 { 1.0 } else { -1.0 };
        c.push(sign * chi_density_derivative(k, j, x)?);
    }
    Ok(GmfSeries::new(c))
}

/// Noncentral ball complement `{‖x − μ‖ ≥ x}` with `α = ‖μ‖²`: the central
/// coefficients for `k + 2i` mixed with Poisson(α/2) weights.
pub fn gmf_noncentral_chi(k: usize, alpha: f64, x: f64, order: usize, tol: f64) -> Result<GmfSeries> {
    if k == 0 || !(x > 0.0) {
        return Err(GkfError::InvalidArgument(format!("gmf_noncentral_chi needs k ≥ 1 and x > 0, got k={k}, x={x}")));
    }
    let w = poisson_weights(alpha / 2.0, tol)?;
    let mut c = vec![0.0; order + 1];
    for (i, wi) in w.iter().enumerate() {
        let s = gmf_chi(k + 2 * i, x, order)?;
        for (cj, sj) in c.iter_mut().zip(&s.coeffs) {
            *cj += wi * sj;
        }
    }
    Ok(GmfSeries { coeffs: c, series_terms: Some(w.len()) })
}

fn f_pole_check(k1: usize, k2: usize, j: usize) -> Result<()> {
    let big_k = (k1 + k2) as i64;
    let d = big_k - j as i64;
    if d <= 0 && d % 2 == 0 {
        return Err(GkfError::OrderOutOfRange {
            order: j,
            reason: format!("Γ((k1+k2−j)/2) has a pole for k1+k2={big_k}"),
        });
    }
    Ok(())
}

/// Upper tail of the F_{k1,k2} distribution, `I_{k2/(k1u+k2)}(k2/2, k1/2)`.
pub fn f_tail(k1: usize, k2: usize, u: f64) -> Result<f64> {
    let (a, b) = (k1 as f64, k2 as f64);
    incomplete_beta_reg(b / 2.0, a / 2.0, b / (a * u + b))
}

/// F-ratio region `{F_{k1,k2} ≥ u}` by the closed EC-density double sum.
pub fn gmf_f_field(k1: usize, k2: usize, u: f64, order: usize) -> Result<GmfSeries> {
    if k1 == 0 || k2 == 0 || !(u > 0.0) {
        return Err(GkfError::InvalidArgument("gmf_f_field needs k1, k2 ≥ 1 and u > 0".into()));
    }
    let g = k1 as f64 * u / k2 as f64;
    let big_k = (k1 + k2) as f64;
    let mut c = vec![f_tail(k1, k2, u)?];
    for j in 1..=order {
        f_pole_check(k1, k2, j)?;
        let jf = j as f64;
        let h = (big_k - jf) / 2.0;
        let pre = gamma(h) / (f64::powf(2.0, (jf - 2.0) / 2.0) * gamma(k1 as f64 / 2.0) * gamma(k2 as f64 / 2.0))
            * g.powf((k1 as f64 - jf) / 2.0)
            * (1.0 + g).powf(-(big_k - 2.0) / 2.0);
        let mut sum = 0.0;
        for l in 0..=(j - 1) / 2 {
            let ratio = gamma(h + l as f64) / (gamma(h) * factorial(l));
            for i in 0..=(j - 1 - 2 * l) {
                let sign = if (i + l) % 2 == 0 { 1.0 } else { -1.0 };
                sum += ratio
                    * sign
                    * g.powi((i + l) as i32)
                    * binomial(k1 as i64 - 1, (j - 1 - 2 * l - i) as i64)
                    * binomial(k2 as i64 - 1, i as i64);
            }
        }
        let sign = if (j - 1) % 2 == 0 { 1.0 } else { -1.0 };
        c.push(pre * sign * factorial(j - 1) * sum);
    }
    Ok(GmfSeries::new(c))
}

/// Surface integral `(2π)^{−K/2} ∫_{∂D_u} (1/m!) Tr(S^m) e^{−‖x‖²/2} dH_{K−1}` over
/// the boundary of the F-ratio region, in closed form.
pub fn f_field_surface_integral(k1: usize, k2: usize, u: f64, m: usize) -> Result<f64> {
    let g = k1 as f64 * u / k2 as f64;
    let big_k = (k1 + k2) as f64;
    let mf = m as f64;
    let arg = (big_k - mf - 1.0) / 2.0;
    if arg <= 0.0 && arg.fract() == 0.0 {
        return Err(GkfError::OrderOutOfRange { order: m + 1, reason: "Γ pole in the surface integral".into() });
    }
    let pre = gamma(arg) / (f64::powf(2.0, (mf - 1.0) / 2.0) * gamma(k1 as f64 / 2.0) * gamma(k2 as f64 / 2.0))
        * g.powf((k1 as f64 - 1.0 - mf) / 2.0)
        * (1.0 + g).powf(-(big_k - 2.0) / 2.0);
    let mut sum = 0.0;
    for i in 0..=m {
        let sign = if (m - i) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * g.powi(i as i32) * binomial(k1 as i64 - 1, (m - i) as i64) * binomial(k2 as i64 - 1, i as i64);
    }
    Ok(pre * sum)
}

/// F-ratio region assembled from the surface integrals:
/// `M_j = (j−1)! Σ_l (−1)^l/(l! 2^l) · S_{j−2l−1}`.
pub fn gmf_f_field_surface(k1: usize, k2: usize, u: f64, order: usize) -> Result<GmfSeries> {
    if k1 == 0 || k2 == 0 || !(u > 0.0) {
        return Err(GkfError::InvalidArgument("gmf_f_field_surface needs k1, k2 ≥ 1 and u > 0".into()));
    }
    let mut c = vec![f_tail(k1, k2, u)?];
    for j in 1..=order {
        f_pole_check(k1, k2, j)?;
        let mut s = 0.0;
        for l in 0..=(j - 1) / 2 {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            s += sign / (factorial(l) * f64::powi(2.0, l as i32)) * f_field_surface_integral(k1, k2, u, j - 2 * l - 1)?;
        }
        c.push(factorial(j - 1) * s);
    }
    Ok(GmfSeries::new(c))
}

/// `K_{j,l}(θ) = (j−1) ∫_0^{π−θ} sin^{j−2−l} t cos^l t dt` by adaptive quadrature.
pub fn k_jl(j: usize, l: usize, theta: f64) -> Result<f64> {
    if j < 2 || l > j - 2 {
        return Err(GkfError::InvalidArgument(format!("K_(j,l) needs j ≥ 2 and l ≤ j−2, got j={j}, l={l}")));
    }
    if !(theta > 0.0 && theta < PI) {
        return Err(GkfError::InvalidArgument(format!("cone angle {theta} outside (0, π)")));
    }
    let p = (j - 2 - l) as i32;
    let q = numeric::integrate(|t: f64| t.sin().powi(p) * t.cos().powi(l as i32), 0.0, PI - theta, 1e-15, 1e-12)?;
    Ok((j - 1) as f64 * q.value)
}

/// Comparison of the quadrature value of `K_{j,l}` with two readings of the
/// printed incomplete-beta branch formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KjlDiagnostic {
    pub quadrature: f64,
    /// Branch formula with incomplete-beta argument `√(sin θ)`, as printed.
    pub printed_sqrt_sin: f64,
    /// Branch formula with argument `sin² θ`.
    pub sin_squared: f64,
    pub printed_matches: bool,
    pub sin_squared_matches: bool,
}

fn kjl_branch(j: usize, l: usize, theta: f64, arg: f64) -> Result<f64> {
    let a = (j - 1 - l) as f64 / 2.0;
    let b = (l + 1) as f64 / 2.0;
    let half = (j - 1) as f64 / 2.0;
    let ib = incomplete_beta(a, b, arg.clamp(0.0, 1.0))?;
    if theta >= FRAC_PI_2 {
        Ok(half * ib)
    } else {
        let bb = incomplete_beta(a, b, 1.0)?;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * half * (bb - ib) + half * bb)
    }
}

pub fn k_jl_diagnostic(j: usize, l: usize, theta: f64) -> Result<KjlDiagnostic> {
    let quadrature = k_jl(j, l, theta)?;
    let printed_sqrt_sin = kjl_branch(j, l, theta, theta.sin().sqrt())?;
    let sin_squared = kjl_branch(j, l, theta, theta.sin().powi(2))?;
    let tol = 1e-8 * quadrature.abs().max(1.0);
    Ok(KjlDiagnostic {
        quadrature,
        printed_sqrt_sin,
        sin_squared,
        printed_matches: (printed_sqrt_sin - quadrature).abs() < tol,
        sin_squared_matches: (sin_squared - quadrature).abs() < tol,
    })
}

/// Gaussian measure of the cone, by a polar integral about the apex with the
/// radial part done in closed form.
pub fn cone_gaussian_measure(cone: &Cone2) -> Result<f64> {
    let w = cone.apex;
    let w2 = dot2(w, w);
    let e0 = (-0.5 * w2).exp();
    let v1 = cone.v1;
    let p1 = cone.v1_perp();
    let sqrt_2pi = (2.0 * PI).sqrt();
    let radial = |phi: f64| {
        let dir = [phi.cos() * v1[0] + phi.sin() * p1[0], phi.cos() * v1[1] + phi.sin() * p1[1]];
        let b = dot2(w, dir);
        // ∫_0^∞ t e^{−‖w + t·dir‖²/2} dt
        if b >= 0.0 {
            e0 * (1.0 - b * mills_ratio(b))
        } else {
            e0 - b * sqrt_2pi * norm_sf(b) * (-0.5 * (w2 - b * b)).exp()
        }
    };
    let q = numeric::integrate(radial, 0.0, cone.theta(), 1e-15, 1e-12)?;
    Ok(q.value / (2.0 * PI))
}

/// Planar cone: two half-plane edge terms plus the apex term
/// `(1/2π) Σ_l C(j−2, l) K_{j,l}(θ) H_{j−2−l}(⟨v1,w⟩) H_l(⟨v1⊥,w⟩) e^{−‖w‖²/2}`.
pub fn gmf_cone2(cone: &Cone2, order: usize) -> Result<GmfSeries> {
    let cone = Cone2::new(cone.v1, cone.v2, cone.apex)?;
    let w = cone.apex;
    let theta = cone.theta();
    let (p1, p2) = (cone.v1_perp(), cone.v2_perp());
    let (a1, b1) = (dot2(p1, w), dot2(cone.v1, w));
    let (a2, b2) = (dot2(p2, w), dot2(cone.v2, w));
    let h_a1 = hermite_all(order, a1);
    let h_a2 = hermite_all(order, a2);
    let h_b1 = hermite_all(order, b1);
    let apex_weight = (-0.5 * dot2(w, w)).exp() / (2.0 * PI);
    let mut c = vec![cone_gaussian_measure(&cone)?];
    for j in 1..=order {
        let mut m = norm_sf(b1) * INV_SQRT_2PI * h_a1[j - 1] * (-0.5 * a1 * a1).exp()
            + norm_sf(b2) * INV_SQRT_2PI * h_a2[j - 1] * (-0.5 * a2 * a2).exp();
        if j >= 2 {
            let mut s = 0.0;
            for l in 0..=j - 2 {
                s += binomial((j - 2) as i64, l as i64) * k_jl(j, l, theta)? * h_b1[j - 2 - l] * h_a1[l];
            }
            m += apex_weight * s;
        }
        c.push(m);
    }
    Ok(GmfSeries::new(c))
}

/// Cone of the conjunction `min(z1, z2) ≥ u` with `z2 = ρ y1 + √(1−ρ²) y2`.
/// The apex solves `⟨v_i⊥, w⟩ = u`: `w = (u, u(1−ρ)/√(1−ρ²))`.
pub fn conjunction_cone_params(u: f64, rho: f64) -> Result<Cone2> {
    if !(rho.abs() < 1.0) {
        return Err(GkfError::InvalidArgument(format!("correlation must satisfy |ρ| < 1, got {rho}")));
    }
    let s = (1.0 - rho * rho).sqrt();
    Cone2::new([0.0, 1.0], [s, -rho], [u, u * (1.0 - rho) / s])
}

/// Same cone edges with the apex `w = (u, u/√(1+ρ))` as printed in the
/// source derivation. Kept for diagnostics; it violates `⟨v2⊥, w⟩ = u` unless
/// `ρ = 0`.
pub fn conjunction_cone_params_printed(u: f64, rho: f64) -> Result<Cone2> {
    if !(rho.abs() < 1.0) {
        return Err(GkfError::InvalidArgument(format!("correlation must satisfy |ρ| < 1, got {rho}")));
    }
    let s = (1.0 - rho * rho).sqrt();
    Cone2::new([0.0, 1.0], [s, -rho], [u, u / (1.0 + rho).sqrt()])
}

/// One boundary quadrature node: position, outward unit normal and the
/// curvature-measure weights of orders `1..` localized at the node.
///
/// Order 1 is the surface element `dH`; order `j` is `e_{j−1}(κ) dH` with `κ`
/// the principal curvatures of `−∇²F/‖∇F‖` on the level set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNode {
    pub position: Vec<f64>,
    pub normal: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub k: usize,
    pub nodes: Vec<BoundaryNode>,
}

impl BoundaryData {
    /// Boundary of `{x_1 ≥ u}` in `R²`, truncated to `|x_2| ≤ half_width` with
    /// `n` midpoint nodes.
    pub fn half_plane(u: f64, half_width: f64, n: usize) -> Self {
        let h = 2.0 * half_width / n as f64;
        let nodes = (0..n)
            .map(|i| BoundaryNode {
                position: vec![u, -half_width + (i as f64 + 0.5) * h],
                normal: vec![-1.0, 0.0],
                weights: vec![h, 0.0],
            })
            .collect();
        Self { k: 2, nodes }
    }

    /// Boundary circle of `{‖x‖ ≥ radius}` in `R²` with `n` equispaced nodes.
    pub fn circle_complement(radius: f64, n: usize) -> Self {
        let h = 2.0 * PI * radius / n as f64;
        let nodes = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                let (s, c) = t.sin_cos();
                BoundaryNode {
                    position: vec![radius * c, radius * s],
                    normal: vec![-c, -s],
                    weights: vec![h, -h / radius],
                }
            })
            .collect();
        Self { k: 2, nodes }
    }

    /// Boundary sphere of `{‖x‖ ≥ radius}` in `R³` on an `n_theta × n_phi`
    /// Gauss–Legendre-in-cos(θ) by uniform-in-φ grid.
    pub fn sphere_complement(radius: f64, n_theta: usize, n_phi: usize) -> Self {
        let (nodes_ct, weights_ct) = gauss_legendre(n_theta);
        let mut nodes = Vec::new();
        let dphi = 2.0 * PI / n_phi as f64;
        for (ct, wct) in nodes_ct.iter().zip(&weights_ct) {
            let st = (1.0 - ct * ct).sqrt();
            for i in 0..n_phi {
                let phi = i as f64 * dphi;
                let dir = [st * phi.cos(), st * phi.sin(), *ct];
                let da = radius * radius * wct * dphi;
                let kappa = -1.0 / radius;
                nodes.push(BoundaryNode {
                    position: dir.iter().map(|d| radius * d).collect(),
                    normal: dir.iter().map(|d| -d).collect(),
                    weights: vec![da, 2.0 * kappa * da, kappa * kappa * da],
                });
            }
        }
        Self { k: 3, nodes }
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let dp = {
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    n as f64 * (z * q1 - q0) / (z * z - 1.0)
                };
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// Boundary-integral form of the functionals of orders `1..=J`:
/// `M_l = (2π)^{−k/2} Σ_{m<l} (−1)^m (l−1)!/m! Σ_p H_m(⟨p, ν_p⟩) e^{−‖p‖²/2} w_{l−m}(p)`,
/// with weights of order above `k` taken as zero. `M_0` is supplied.
pub fn gmf_generic_eq34(boundary: &BoundaryData, m0: f64, order: usize) -> Result<GmfSeries> {
    let k = boundary.k;
    let need = order.min(k);
    for node in &boundary.nodes {
        if node.weights.len() < need {
            return Err(GkfError::IncompleteBoundaryData { order: node.weights.len() + 1 });
        }
    }
    let norm = (2.0 * PI).powf(-(k as f64) / 2.0);
    let mut c = vec![m0];
    for l in 1..=order {
        let mut s = 0.0;
        for node in &boundary.nodes {
            let pn: f64 = node.position.iter().zip(&node.normal).map(|(a, b)| a * b).sum();
            let p2: f64 = node.position.iter().map(|a| a * a).sum();
            let g = (-0.5 * p2).exp();
            let h = hermite_all(l, pn);
            for m in 0..l {
                let ord = l - m;
                if ord > k {
                    continue;
                }
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * factorial(l - 1) / factorial(m) * h[m] * g * node.weights[ord - 1];
            }
        }
        c.push(norm * s);
    }
    Ok(GmfSeries::new(c))
}

/// Closed-form functionals of a catalog domain up to `order`.
pub fn gmf_of(domain: &Domain, order: usize, tol: f64) -> Result<GmfSeries> {
    domain.validate()?;
    match domain {
        Domain::HalfSpace { level, .. } => Ok(gmf_half_space(*level, order)),
        Domain::BallComplement { k, radius } => gmf_chi(*k, *radius, order),
        Domain::NoncentralBallComplement { center, radius } => {
            let alpha = center.iter().map(|a| a * a).sum();
            gmf_noncentral_chi(center.len(), alpha, *radius, order, tol)
        }
        Domain::FRegion { k1, k2, level } => gmf_f_field(*k1, *k2, *level, order),
        Domain::Cone2(c) => gmf_cone2(c, order),
        Domain::Implicit(_) => Err(GkfError::InvalidArgument(
            "implicit domains have no closed form; use the coarea estimators".into(),
        )),
    }
}

/// Monte Carlo estimates of `M_1` and `M_2` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoareaMoments {
    pub m1: f64,
    pub m1_se: f64,
    pub m2: f64,
    pub m2_se: f64,
    pub in_window: usize,
}

/// Coarea estimates `M_1 = E[‖∇F‖ | F = u] φ_F(u)` and
/// `M_2 = E[−LF + ∇²F(∇F,∇F)/‖∇F‖² | F = u] φ_F(u)` with
/// `LF = ΔF − ⟨x, ∇F⟩`, using the window `|F − u| < ε`. The window bias is
/// `O(ε²)`; with `richardson` the estimates at `ε` and `2ε` (same samples)
/// are combined as `(4 M(ε) − M(2ε)) / 3`.
pub fn gmf_m1_m2_coarea(
    domain: &ImplicitDomain,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
    richardson: bool,
) -> Result<CoareaMoments> {
    let weights: [&(dyn Fn(&CoareaPoint) -> f64 + Sync); 2] = [&|_p: &CoareaPoint| 1.0, &m2_weight];
    let run = |eps: f64| coarea_mc_multi(domain.map.as_ref(), domain.level, &weights, eps, n_samples, seed);
    let (est, inside) = run(epsilon)?;
    if !richardson {
        return Ok(CoareaMoments { m1: est[0].0, m1_se: est[0].1, m2: est[1].0, m2_se: est[1].1, in_window: inside });
    }
    let (wide, _) = run(2.0 * epsilon)?;
    // conservative SE: treats the two window estimates as independent
    let comb = |a: (f64, f64), b: (f64, f64)| {
        ((4.0 * a.0 - b.0) / 3.0, ((16.0 * a.1 * a.1 + b.1 * b.1).sqrt()) / 3.0)
    };
    let (m1, m1_se) = comb(est[0], wide[0]);
    let (m2, m2_se) = comb(est[1], wide[1]);
    Ok(CoareaMoments { m1, m1_se, m2, m2_se, in_window: inside })
}

/// Weight turning the coarea window average into `M_2`.
pub fn m2_weight(p: &CoareaPoint) -> f64 {
    let k = p.x.len();
    let lap: f64 = (0..k).map(|i| p.hess[i * k + i]).sum();
    let xg: f64 = p.x.iter().zip(&p.grad).map(|(a, b)| a * b).sum();
    let mut hgg = 0.0;
    for i in 0..k {
        for j in 0..k {
            hgg += p.hess[i * k + j] * p.grad[i] * p.grad[j];
        }
    }
    let g2 = p.grad_norm * p.grad_norm;
    (-(lap - xg) + hgg / g2) / p.grad_norm
}

/// Exact `φ_F(u)` for `F = ‖x‖²` (the χ²_k density), used in tests and docs.
pub fn chi2_density(k: usize, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    // chain rule from the χ density: f_{χ²}(u) = f_χ(√u) / (2√u)
    crate::special::chi_density(k, u.sqrt()) / (2.0 * u.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::richardson_derivative;
    use crate::special::{noncentral_chi_density, noncentral_chi_sf};

    #[test]
    fn half_space_examples() {
        let g = gmf_half_space(0.0, 4);
        assert_eq!(g.get(0), 0.5);
        assert_eq!(g.get(2), 0.0);
        let g = gmf_half_space(1.0, 2);
        assert!((g.get(1) - 0.241_970_724_519_143_37).abs() < 1e-15);
    }

    #[test]
    fn half_space_level_shift() {
        for &u in &[0.0, 1.0, 2.0] {
            let g = gmf_half_space(u, 6);
            for j in 1..=5 {
                let d = richardson_derivative(|v| gmf_half_space(v, 6).get(j), u, 1, 1e-4, 3);
                assert!((g.get(j + 1) + d).abs() < 1e-6, "u={u} j={j}");
            }
        }
    }

    #[test]
    fn chi_examples() {
        for &x in &[0.5f64, 1.0, 2.0, 3.0] {
            let g = gmf_chi(2, x, 3).unwrap();
            assert!((g.get(1) - x * (-0.5 * x * x).exp()).abs() < 1e-15);
            let g1 = gmf_chi(1, x, 1).unwrap();
            assert!((g1.get(1) - 2.0 * norm_pdf(x)).abs() < 1e-15);
        }
        let g = gmf_chi(3, 1.5, 2).unwrap();
        let fd = richardson_derivative(|t| chi_density_derivative(3, 1, t).unwrap(), 1.5, 1, 1e-3, 4);
        assert!((g.get(2) + fd).abs() < 1e-9);
        assert!(gmf_chi(2, 0.0, 2).is_err());
    }

    #[test]
    fn chi_level_shift_in_radius() {
        for k in 1..=4usize {
            for &x in &[0.8, 1.5, 2.5] {
                let g = gmf_chi(k, x, 5).unwrap();
                for j in 0..=4 {
                    let d = richardson_derivative(|t| gmf_chi(k, t, 5).unwrap().get(j), x, 1, 1e-3, 4);
                    assert!((g.get(j + 1) + d).abs() < 1e-5, "k={k} x={x} j={j}");
                }
            }
        }
    }

    #[test]
    fn noncentral_examples() {
        let a = gmf_noncentral_chi(3, 0.0, 1.2, 4, 1e-12).unwrap();
        let b = gmf_chi(3, 1.2, 4).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        let g = gmf_noncentral_chi(2, 1.0, 2.0, 3, 1e-12).unwrap();
        let f = noncentral_chi_density(2, 1.0, 2.0, 1e-12).unwrap().value;
        assert!((g.get(1) - f).abs() < 1e-14);
        let fd = richardson_derivative(|t| noncentral_chi_density(2, 1.0, t, 1e-12).unwrap().value, 2.0, 1, 1e-3, 4);
        assert!((g.get(2) + fd).abs() < 1e-5);
        let sf = noncentral_chi_sf(2, 1.0, 2.0, 1e-12).unwrap().value;
        assert!((g.get(0) - sf).abs() < 1e-15);
        assert!(g.series_terms.unwrap() > 1);
    }

    #[test]
    fn noncentral_level_shift() {
        for &x in &[1.0, 2.0, 3.0] {
            let g = gmf_noncentral_chi(3, 2.5, x, 4, 1e-12).unwrap();
            for j in 0..=3 {
                let d = richardson_derivative(
                    |t| gmf_noncentral_chi(3, 2.5, t, 4, 1e-12).unwrap().get(j),
                    x,
                    1,
                    1e-3,
                    4,
                );
                assert!((g.get(j + 1) + d).abs() < 1e-5, "x={x} j={j}");
            }
        }
    }

    #[test]
    fn f_field_first_order_closed_form() {
        for &(k1, k2, u) in &[(2usize, 2usize, 1.0f64), (3, 5, 0.7), (1, 4, 2.5), (4, 4, 3.0)] {
            let (a, b, big) = (k1 as f64, k2 as f64, (k1 + k2) as f64);
            let g = a * u / b;
            let exact = gamma((big - 1.0) / 2.0) / (f64::powf(2.0, -0.5) * gamma(a / 2.0) * gamma(b / 2.0))
                * g.powf((a - 1.0) / 2.0)
                * (1.0 + g).powf(-(big - 2.0) / 2.0);
            let m = gmf_f_field(k1, k2, u, 1).unwrap();
            assert!((m.get(1) - exact).abs() < 1e-13 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn f_field_two_routes_agree() {
        for &(k1, k2) in &[(2usize, 2usize), (3, 4), (1, 5), (5, 2), (6, 6)] {
            for &u in &[0.5, 1.0, 2.0, 4.0] {
                let order = (k1 + k2 - 1).min(5);
                let a = gmf_f_field(k1, k2, u, order).unwrap();
                let b = gmf_f_field_surface(k1, k2, u, order).unwrap();
                for j in 0..=order {
                    assert!((a.get(j) - b.get(j)).abs() < 1e-12 * a.get(j).abs().max(1.0), "{k1},{k2},{u},{j}");
                }
            }
        }
    }

    #[test]
    fn f_field_special_values() {
        let m = gmf_f_field(2, 2, 1.0, 3).unwrap();
        assert!((m.get(0) - 0.5).abs() < 1e-14);
        assert!((m.get(1) - 0.626_657_068_657_750_1).abs() < 1e-14);
        assert!(m.get(2).abs() < 1e-15);
        assert!(matches!(gmf_f_field(2, 2, 1.0, 4), Err(GkfError::OrderOutOfRange { order: 4, .. })));
    }

    #[test]
    fn f_tail_against_statrs() {
        use statrs::distribution::{ContinuousCDF, FisherSnedecor};
        for &(k1, k2, u) in &[(2usize, 2usize, 1.0f64), (3, 7, 2.2), (1, 1, 0.3)] {
            let d = FisherSnedecor::new(k1 as f64, k2 as f64).unwrap();
            assert!((f_tail(k1, k2, u).unwrap() - d.sf(u)).abs() < 1e-12);
        }
    }

    #[test]
    fn kjl_examples() {
        for &t in &[0.3, 1.0, 2.5] {
            assert!((k_jl(2, 0, t).unwrap() - (PI - t)).abs() < 1e-12);
        }
        assert!((k_jl(3, 1, FRAC_PI_2).unwrap() - 2.0).abs() < 1e-12);
        assert!((k_jl(3, 0, FRAC_PI_2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kjl_printed_branch_diagnostic() {
        let mut printed_ok = 0;
        let mut total = 0;
        for j in 2..=6 {
            for l in 0..=j - 2 {
                for &t in &[0.4, 1.2, 1.9, 2.8] {
                    let d = k_jl_diagnostic(j, l, t).unwrap();
                    assert!(d.sin_squared_matches, "j={j} l={l} θ={t}: {d:?}");
                    total += 1;
                    printed_ok += d.printed_matches as usize;
                }
            }
        }
        assert!(printed_ok < total);
    }

    #[test]
    fn cone_examples() {
        let q = Cone2::new([1.0, 0.0], [0.0, 1.0], [0.0, 0.0]).unwrap();
        let g = gmf_cone2(&q, 3).unwrap();
        assert!((g.get(0) - 0.25).abs() < 1e-12);
        assert!((g.get(1) - 2.0 * 0.5 * INV_SQRT_2PI).abs() < 1e-15);
        for &t in &[0.3f64, 1.0, 2.0, 3.0] {
            let c = Cone2::new([1.0, 0.0], [t.cos(), t.sin()], [0.0, 0.0]).unwrap();
            assert!((cone_gaussian_measure(&c).unwrap() - t / (2.0 * PI)).abs() < 1e-12);
        }
        assert!(matches!(Cone2::new([1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]), Err(GkfError::DegenerateCone)));
    }

    #[test]
    fn cone_measure_matches_bivariate_normal() {
        // quadrant {x ≥ a, y ≥ b}
        for &(a, b) in &[(0.5, -0.3), (1.0, 2.0), (-1.5, -2.0)] {
            let c = Cone2::new([1.0, 0.0], [0.0, 1.0], [a, b]).unwrap();
            let exact = norm_sf(a) * norm_sf(b);
            assert!((cone_gaussian_measure(&c).unwrap() - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn quadrant_cone_first_order() {
        let (a, b) = (0.7, -0.4);
        let c = Cone2::new([1.0, 0.0], [0.0, 1.0], [a, b]).unwrap();
        let g = gmf_cone2(&c, 2).unwrap();
        assert!((g.get(1) - (norm_sf(a) * norm_pdf(b) + norm_sf(b) * norm_pdf(a))).abs() < 1e-14);
    }

    #[test]
    fn conjunction_params() {
        let c = conjunction_cone_params(1.3, 0.0).unwrap();
        assert!((c.apex[0] - 1.3).abs() < 1e-15 && (c.apex[1] - 1.3).abs() < 1e-15);
        assert!((c.theta() - FRAC_PI_2).abs() < 1e-15);
        for &rho in &[-0.9, -0.5, 0.2, 0.5, 0.8] {
            for &u in &[-1.0, 0.5, 2.0] {
                let c = conjunction_cone_params(u, rho).unwrap();
                assert!((dot2(c.v1_perp(), c.apex) - u).abs() < 1e-12);
                assert!((dot2(c.v2_perp(), c.apex) - u).abs() < 1e-12);
                let p = c.v2_perp();
                assert!((p[0] - rho).abs() < 1e-15 && (p[1] - (1.0 - rho * rho).sqrt()).abs() < 1e-15);
            }
        }
        assert!(conjunction_cone_params(1.0, 1.0).is_err());
        let printed = conjunction_cone_params_printed(1.0, 0.0).unwrap();
        assert_eq!(printed, conjunction_cone_params(1.0, 0.0).unwrap());
    }

    #[test]
    fn cone_continuity() {
        // θ → 0: the cone collapses to a ray and all mass vanishes
        let w = [0.3, -0.2];
        let mut last = f64::INFINITY;
        for &t in &[0.1f64, 1e-2, 1e-3, 1e-4] {
            let c = Cone2::new([1.0, 0.0], [t.cos(), t.sin()], w).unwrap();
            let m0 = cone_gaussian_measure(&c).unwrap();
            assert!(m0 < last);
            last = m0;
        }
        assert!(last < 1e-4);
        // θ → π: the cone tends to the half-plane {y ≥ w_y}
        let t = PI - 1e-7;
        let c = Cone2::new([1.0, 0.0], [t.cos(), t.sin()], w).unwrap();
        let g = gmf_cone2(&c, 4).unwrap();
        let h = gmf_half_space(w[1], 4);
        for j in 0..=4 {
            assert!((g.get(j) - h.get(j)).abs() < 1e-5, "j={j}: {} vs {}", g.get(j), h.get(j));
        }
    }

    #[test]
    fn eq34_half_plane_and_circle() {
        let b = BoundaryData::half_plane(0.8, 12.0, 4000);
        let g = gmf_generic_eq34(&b, norm_sf(0.8), 5).unwrap();
        let h = gmf_half_space(0.8, 5);
        for j in 1..=5 {
            assert!((g.get(j) - h.get(j)).abs() < 1e-6, "j={j}");
        }
        for &x in &[0.7, 2.0] {
            let b = BoundaryData::circle_complement(x, 256);
            let g = gmf_generic_eq34(&b, chi_sf(2, x), 5).unwrap();
            let h = gmf_chi(2, x, 5).unwrap();
            for j in 1..=5 {
                assert!((g.get(j) - h.get(j)).abs() < 1e-6, "x={x} j={j}");
            }
        }
        let empty = BoundaryData { k: 2, nodes: vec![] };
        let g = gmf_generic_eq34(&empty, 0.3, 3).unwrap();
        assert_eq!(g.coeffs, vec![0.3, 0.0, 0.0, 0.0]);
        let mut bad = BoundaryData::circle_complement(1.0, 8);
        bad.nodes[0].weights.truncate(1);
        assert!(matches!(gmf_generic_eq34(&bad, 0.0, 3), Err(GkfError::IncompleteBoundaryData { order: 2 })));
    }

    #[test]
    fn eq34_sphere() {
        let b = BoundaryData::sphere_complement(1.3, 40, 80);
        let g = gmf_generic_eq34(&b, chi_sf(3, 1.3), 5).unwrap();
        let h = gmf_chi(3, 1.3, 5).unwrap();
        for j in 1..=5 {
            assert!((g.get(j) - h.get(j)).abs() < 1e-5, "j={j}: {} vs {}", g.get(j), h.get(j));
        }
    }

    #[test]
    fn domain_dispatch() {
        let d = Domain::BallComplement { k: 2, radius: 2.0 };
        assert_eq!(gmf_of(&d, 3, 1e-12).unwrap(), gmf_chi(2, 2.0, 3).unwrap());
        // χ² presentation of the same excursion set
        let u: f64 = 4.0;
        let d2 = Domain::BallComplement { k: 2, radius: u.sqrt() };
        assert_eq!(gmf_of(&d2, 3, 1e-12).unwrap(), gmf_of(&d, 3, 1e-12).unwrap());
        let bad = Domain::HalfSpace { direction: vec![1.0, 1.0], level: 0.0 };
        assert!(gmf_of(&bad, 2, 1e-12).is_err());
    }

    #[test]
    fn f_ratio_derivatives_match_finite_differences() {
        let f = FRatio { k1: 2, k2: 3 };
        let x = [0.7, -1.1, 0.4, 0.9, -0.3];
        let mut g = vec![0.0; 5];
        let mut h = vec![0.0; 25];
        f.gradient(&x, &mut g);
        f.hessian(&x, &mut h);
        for i in 0..5 {
            let gi = richardson_derivative(
                |t| {
                    let mut y = x;
                    y[i] = t;
                    f.value(&y)
                },
                x[i],
                1,
                1e-3,
                4,
            );
            assert!((gi - g[i]).abs() < 1e-8);
            for j in 0..5 {
                let hij = richardson_derivative(
                    |t| {
                        let mut y = x;
                        y[j] = t;
                        let mut gg = vec![0.0; 5];
                        f.gradient(&y, &mut gg);
                        gg[i]
                    },
                    x[j],
                    1,
                    1e-3,
                    4,
                );
                assert!((hij - h[i * 5 + j]).abs() < 1e-7, "{i},{j}");
            }
        }
    }
}
