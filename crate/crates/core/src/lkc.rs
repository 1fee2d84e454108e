//! Lipschitz–Killing curvatures of flat parameter spaces under the metric
//! `μ₂·(flat)`, and the Lebesgue Steiner formula for boxes.
//!
//! Convention: `vol(Tube(M, r)) = Σ_j L_j(M) ω_{n−j} r^{n−j}` for `M ⊂ R^n`.
//! Gaussian Minkowski functionals use the `r^j/j!` convention instead; the two
//! meet only through [`lkc_to_minkowski`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GkfError, Result};
use crate::special::{factorial, unit_ball_volume};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ParamSpace {
    Interval { length: f64 },
    /// Up to three side lengths.
    Box { sides: Vec<f64> },
    FlatTorus2 { side: f64 },
    /// Round sphere; analytic use only, the simulator is flat.
    Sphere2 { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LkcVector {
    pub values: Vec<f64>,
    pub mu2: f64,
}

impl LkcVector {
    pub fn order(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// Zero-dimensional parameter space (a point).
    pub fn point() -> Self {
        Self { values: vec![1.0], mu2: 1.0 }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(GkfError::InvalidArgument(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Elementary symmetric polynomials `e_0..e_n` of `xs`.
pub fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; xs.len() + 1];
    e[0] = 1.0;
    for (i, &x) in xs.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

fn scaled(values: Vec<f64>, mu2: f64) -> LkcVector {
    let values = values.into_iter().enumerate().map(|(j, l)| l * mu2.powf(j as f64 / 2.0)).collect();
    LkcVector { values, mu2 }
}

/// `L_j = e_j(sides) μ₂^{j/2}`.
pub fn lkc_box(sides: &[f64], mu2: f64) -> Result<LkcVector> {
    if sides.is_empty() || sides.len() > 3 {
        return Err(GkfError::InvalidArgument(format!("box needs 1 to 3 sides, got {}", sides.len())));
    }
    for &s in sides {
        check_positive("side length", s)?;
    }
    check_positive("mu2", mu2)?;
    Ok(scaled(elementary_symmetric(sides), mu2))
}

pub fn lkc_interval(length: f64, mu2: f64) -> Result<LkcVector> {
    lkc_box(&[length], mu2)
}

/// `(0, 0, T² μ₂)`.
pub fn lkc_flat_torus2(side: f64, mu2: f64) -> Result<LkcVector> {
    check_positive("torus side", side)?;
    check_positive("mu2", mu2)?;
    Ok(scaled(vec![0.0, 0.0, side * side], mu2))
}

/// `(2, 0, 4π r² μ₂)`.
pub fn lkc_sphere2(radius: f64, mu2: f64) -> Result<LkcVector> {
    check_positive("sphere radius", radius)?;
    check_positive("mu2", mu2)?;
    Ok(scaled(vec![2.0, 0.0, 4.0 * std::f64::consts::PI * radius * radius], mu2))
}

pub fn lkc(space: &ParamSpace, mu2: f64) -> Result<LkcVector> {
    match space {
        ParamSpace::Interval { length } => lkc_interval(*length, mu2),
        ParamSpace::Box { sides } => lkc_box(sides, mu2),
        ParamSpace::FlatTorus2 { side } => lkc_flat_torus2(*side, mu2),
        ParamSpace::Sphere2 { radius } => lkc_sphere2(*radius, mu2),
    }
}

/// Lebesgue volume of the `r`-tube around a box: `Σ_j e_{n−j}(sides) ω_j r^j`.
pub fn steiner_tube_volume_box(sides: &[f64], r: f64) -> Result<f64> {
    if sides.is_empty() || sides.len() > 3 {
        return Err(GkfError::InvalidArgument(format!("box needs 1 to 3 sides, got {}", sides.len())));
    }
    if !(r >= 0.0) {
        return Err(GkfError::InvalidArgument(format!("radius must be nonnegative, got {r}")));
    }
    let e = elementary_symmetric(sides);
    let n = sides.len();
    Ok((0..=n).map(|j| e[n - j] * unit_ball_volume(j) * r.powi(j as i32)).sum())
}

/// Minkowski-functional presentation of an LKC vector in `R^n`:
/// entry `i` is `M_i = i!·L_{n−i}·ω_i`, so the Steiner volume is `Σ M_i r^i/i!`.
pub fn lkc_to_minkowski(lkc: &LkcVector) -> Vec<f64> {
    let n = lkc.order();
    (0..=n).map(|i| factorial(i) * lkc.values[n - i] * unit_ball_volume(i)).collect()
}

/// Inverse of [`lkc_to_minkowski`] with `μ₂ = 1`.
pub fn minkowski_to_lkc(m: &[f64]) -> LkcVector {
    let n = m.len() - 1;
    let values = (0..=n).map(|j| m[n - j] / (factorial(n - j) * unit_ball_volume(n - j))).collect();
    LkcVector { values, mu2: 1.0 }
}

/// Recovers `L_0..L_n` of a box from a least-squares polynomial fit of degree
/// `n` to its Steiner tube volumes at `points` radii on `[0, r_max]`.
pub fn lkc_box_from_steiner_fit(sides: &[f64], r_max: f64, points: usize) -> Result<LkcVector> {
    let n = sides.len();
    if points <= n {
        return Err(GkfError::InvalidArgument("need more radii than the polynomial degree".into()));
    }
    check_positive("r_max", r_max)?;
    let mut a = DMatrix::zeros(points, n + 1);
    let mut y = DVector::zeros(points);
    for i in 0..points {
        let s = i as f64 / (points - 1) as f64;
        for j in 0..=n {
            a[(i, j)] = s.powi(j as i32);
        }
        y[i] = steiner_tube_volume_box(sides, s * r_max)?;
    }
    let c = a.svd(true, true).solve(&y, 0.0).map_err(|e| GkfError::InvalidArgument(e.to_string()))?;
    // coefficient of s^i is M_i r_max^i / i!, and M_i/i! = L_{n−i} ω_i
    let values = (0..=n).map(|j| c[n - j] / (r_max.powi((n - j) as i32) * unit_ball_volume(n - j))).collect();
    Ok(LkcVector { values, mu2: 1.0 })
}
