//! The combination rule `E[χ(M ∩ y⁻¹D)] = Σ_j L_j(M) (2π)^{−j/2} M_j(D)`.
//!
//! This is the only place the `(2π)^{−j/2}` factor is applied.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{GkfError, Result};
use crate::gmf::{conjunction_cone_params, gmf_of, Domain, GmfSeries};
use crate::lkc::LkcVector;

/// Series truncation tolerance for noncentral families.
pub const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GkfResult {
    pub expected_chi: f64,
    /// `L_j (2π)^{−j/2} M_j`.
    pub terms: Vec<f64>,
    pub truncation_order: usize,
}

pub fn expected_euler_char(lkc: &LkcVector, gmf: &GmfSeries) -> Result<GkfResult> {
    let n = lkc.order();
    if gmf.order() < n {
        return Err(GkfError::InsufficientOrder { have: gmf.order(), need: n });
    }
    let terms: Vec<f64> =
        (0..=n).map(|j| lkc.values[j] * (2.0 * PI).powf(-(j as f64) / 2.0) * gmf.coeffs[j]).collect();
    Ok(GkfResult { expected_chi: terms.iter().sum(), terms, truncation_order: n })
}

/// Catalog of Gaussian-related fields `F(y_1, …, y_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Family {
    Gaussian,
    /// `‖y‖` with `k` components; the level is the radius.
    Chi { k: usize },
    /// `‖y‖²`; the level `u` maps to radius `√u`.
    ChiSquared { k: usize },
    /// `‖y + μ‖²` with `α = ‖μ‖²`.
    NoncentralChiSquared { k: usize, alpha: f64 },
    F { k1: usize, k2: usize },
    /// `min(y_1, ρ y_1 + √(1−ρ²) y_2)`.
    Conjunction { rho: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Chi { .. } => "chi",
            Family::ChiSquared { .. } => "chi2",
            Family::NoncentralChiSquared { .. } => "noncentral-chi2",
            Family::F { .. } => "f",
            Family::Conjunction { .. } => "conjunction",
        }
    }

    /// Parameters as `key=value` pairs separated by `;`.
    pub fn params(&self) -> String {
        match self {
            Family::Gaussian => String::new(),
            Family::Chi { k } | Family::ChiSquared { k } => format!("k={k}"),
            Family::NoncentralChiSquared { k, alpha } => format!("k={k};alpha={alpha}"),
            Family::F { k1, k2 } => format!("k1={k1};k2={k2}"),
            Family::Conjunction { rho } => format!("rho={rho}"),
        }
    }

    /// Number of component fields.
    pub fn components(&self) -> usize {
        match self {
            Family::Gaussian => 1,
            Family::Chi { k } | Family::ChiSquared { k } | Family::NoncentralChiSquared { k, .. } => *k,
            Family::F { k1, k2 } => k1 + k2,
            Family::Conjunction { .. } => 2,
        }
    }

    /// The excursion set `{F ≥ u}` as a domain in `R^k`.
    pub fn domain(&self, u: f64) -> Result<Domain> {
        let positive = |what: &str| {
            if u > 0.0 {
                Ok(())
            } else {
                Err(GkfError::InvalidArgument(format!("{what} level must be positive, got {u}")))
            }
        };
        Ok(match *self {
            Family::Gaussian => Domain::HalfSpace { direction: vec![1.0], level: u },
            Family::Chi { k } => {
                positive("chi")?;
                Domain::BallComplement { k, radius: u }
            }
            Family::ChiSquared { k } => {
                positive("chi2")?;
                Domain::BallComplement { k, radius: u.sqrt() }
            }
            Family::NoncentralChiSquared { k, alpha } => {
                positive("noncentral chi2")?;
                if !(alpha >= 0.0) {
                    return Err(GkfError::InvalidArgument(format!("noncentrality must be ≥ 0, got {alpha}")));
                }
                let mut center = vec![0.0; k.max(1)];
                center[0] = -alpha.sqrt();
                Domain::NoncentralBallComplement { center, radius: u.sqrt() }
            }
            Family::F { k1, k2 } => {
                positive("F")?;
                Domain::FRegion { k1, k2, level: u }
            }
            Family::Conjunction { rho } => Domain::Cone2(conjunction_cone_params(u, rho)?),
        })
    }

    pub fn gmf(&self, u: f64, order: usize) -> Result<GmfSeries> {
        gmf_of(&self.domain(u)?, order, SERIES_TOL)
    }
}

/// `ρ̃_j(F, u) = (2π)^{−j/2} M_j(F⁻¹[u, ∞))`.
pub fn ec_density(family: &Family, j: usize, u: f64) -> Result<f64> {
    let g = family.gmf(u, j)?;
    Ok((2.0 * PI).powf(-(j as f64) / 2.0) * g.coeffs[j])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailApprox {
    /// Approximation of `P[sup f ≥ u]`, clamped to `[0, 1]`.
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

/// `P[sup f ≥ u] ≈ E[χ]`, clamped to `[0, 1]` with a flag.
pub fn sup_tail_approx(lkc: &LkcVector, gmf: &GmfSeries) -> Result<TailApprox> {
    let raw = expected_euler_char(lkc, gmf)?.expected_chi;
    let value = raw.clamp(0.0, 1.0);
    Ok(TailApprox { value, raw, clamped: value != raw })
}
