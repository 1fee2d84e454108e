//! Stationary unit-variance Gaussian fields on square grids by spectral
//! synthesis, derived fields `F(y_1, …, y_k)`, `μ₂` estimation and excursion
//! masks.
//!
//! The squared-exponential covariance `C(h) = exp(−‖h‖²/(2s²))` is separable,
//! so the discrete spectrum of the wrapped covariance on an `N×N` torus is the
//! outer product of two 1-D spectra. One complex FFT yields two independent
//! fields, from its real and imaginary parts.

use std::io::{self, Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

pub use crate::euler::{Mask, Topology};
use crate::error::{GkfError, Result};
use crate::rng::stream;

/// Squared-exponential covariance with scale `s` (in the same units as the
/// grid spacing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralModel {
    pub scale: f64,
}

impl SpectralModel {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(GkfError::InvalidArgument(format!("covariance scale must be positive, got {scale}")));
        }
        Ok(Self { scale })
    }

    pub fn covariance(&self, h: f64) -> f64 {
        (-0.5 * h * h / (self.scale * self.scale)).exp()
    }

    /// `μ₂ = −C''(0) = 1/s²`.
    pub fn mu2(&self) -> f64 {
        1.0 / (self.scale * self.scale)
    }

    /// Expected nearest-neighbour estimate `2(1 − C(Δ)) / Δ²`.
    pub fn mu2_nearest_neighbour(&self, spacing: f64) -> f64 {
        -2.0 * (-0.5 * spacing * spacing / (self.scale * self.scale)).exp_m1() / (spacing * spacing)
    }

    /// Expected central-difference estimate `(1 − C(2Δ)) / (2Δ²)`.
    pub fn mu2_central_difference(&self, spacing: f64) -> f64 {
        -(-2.0 * spacing * spacing / (self.scale * self.scale)).exp_m1() / (2.0 * spacing * spacing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub n: usize,
    pub spacing: f64,
    pub topology: Topology,
    /// Row-major `n×n`.
    pub values: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"GKFG";

impl FieldGrid {
    pub fn new(n: usize, spacing: f64, topology: Topology, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(GkfError::InvalidArgument(format!("expected {} values, got {}", n * n, values.len())));
        }
        if !(spacing > 0.0) {
            return Err(GkfError::InvalidArgument("grid spacing must be positive".into()));
        }
        Ok(Self { n, spacing, topology, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    /// Soft checks on a synthesized field: the sample mean within
    /// `5/√(n²/τ)` of 0 and the sample variance within `1 ± 5/√(n²/τ)`, with
    /// `τ = 2π s²/Δ²` the effective correlation area in cells. Returns
    /// warnings instead of failing.
    pub fn soft_check(&self, model: &SpectralModel) -> Vec<String> {
        let tau = 2.0 * std::f64::consts::PI * (model.scale / self.spacing).powi(2);
        let band = 5.0 / ((self.n * self.n) as f64 / tau).sqrt();
        let mut out = Vec::new();
        if self.values.iter().any(|v| !v.is_finite()) {
            out.push("field has non-finite values".to_string());
        }
        let (m, v) = (self.mean(), self.variance());
        if m.abs() >= band {
            out.push(format!("sample mean {m:.4} outside ±{band:.4}"));
        }
        if (v - 1.0).abs() >= band {
            out.push(format!("sample variance {v:.4} outside 1 ± {band:.4}"));
        }
        out
    }

    /// Binary layout: `GKFG`, `n` as u64, spacing as f64, topology byte
    /// (0 torus, 1 rectangle), then row-major f64 values, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.spacing.to_le_bytes())?;
        w.write_all(&[match self.topology {
            Topology::Torus => 0u8,
            Topology::Rectangle => 1u8,
        }])?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a field grid"));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let spacing = f64::from_le_bytes(b8);
        let mut t = [0u8; 1];
        r.read_exact(&mut t)?;
        let topology = match t[0] {
            0 => Topology::Torus,
            1 => Topology::Rectangle,
            _ => return Err(bad("unknown topology tag")),
        };
        let count = n.checked_mul(n).ok_or_else(|| bad("grid size overflows"))?;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        FieldGrid::new(n, spacing, topology, values).map_err(|e| bad(&e.to_string()))
    }

    /// CSV: a `# gkf-kit v1` line, a comment line with the header fields, then
    /// one line of comma-separated values per grid row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# gkf-kit v1")?;
        writeln!(w, "# n={} spacing={} topology={}", self.n, self.spacing, topology_name(self.topology))?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{}", self.get(i, j))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn topology_name(t: Topology) -> &'static str {
    match t {
        Topology::Torus => "torus",
        Topology::Rectangle => "rectangle",
    }
}

/// Spectrum of the wrapped 1-D covariance on `m` points, clipped at zero.
fn spectrum_1d(model: &SpectralModel, m: usize, spacing: f64) -> Vec<f64> {
    let mut c = vec![Complex::new(0.0, 0.0); m];
    let wraps = (8.0 * model.scale / (m as f64 * spacing)).ceil() as i64 + 1;
    for (h, ch) in c.iter_mut().enumerate() {
        let mut s = 0.0;
        for w in -wraps..=wraps {
            s += model.covariance((h as f64 + (w * m as i64) as f64) * spacing);
        }
        ch.re = s;
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut c);
    c.iter().map(|z| z.re.max(0.0)).collect()
}

fn torus_size(model: &SpectralModel, n: usize, spacing: f64, topology: Topology) -> usize {
    match topology {
        Topology::Torus => n,
        Topology::Rectangle => n + (6.0 * model.scale / spacing).ceil() as usize,
    }
}

fn fft_2d(data: &mut [Complex<f64>], m: usize) {
    let fft = FftPlanner::new().plan_fft_forward(m);
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
}

/// Two independent fields from stream `id` of `seed`.
pub fn synthesize_pair(
    model: &SpectralModel,
    n: usize,
    spacing: f64,
    topology: Topology,
    seed: u64,
    id: u64,
) -> Result<(FieldGrid, FieldGrid)> {
    if n < 2 {
        return Err(GkfError::InvalidArgument("grid size must be at least 2".into()));
    }
    if !(spacing > 0.0) {
        return Err(GkfError::InvalidArgument("grid spacing must be positive".into()));
    }
    if model.scale < 2.0 * spacing {
        return Err(GkfError::UnderResolved { scale: model.scale, spacing });
    }
    let m = torus_size(model, n, spacing, topology);
    let lam = spectrum_1d(model, m, spacing);
    let total: f64 = lam.iter().sum::<f64>().powi(2);
    // mean of the 2-D spectrum is 1 after scaling, so Σλ/m² = 1
    let norm = (m * m) as f64 / total;
    let mut rng = stream(seed, id);
    let mut data = vec![Complex::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            let amp = (lam[i] * lam[j] * norm).sqrt() / m as f64;
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            data[i * m + j] = Complex::new(amp * a, amp * b);
        }
    }
    fft_2d(&mut data, m);
    let crop = |part: fn(&Complex<f64>) -> f64| {
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                v.push(part(&data[i * m + j]));
            }
        }
        FieldGrid::new(n, spacing, topology, v)
    };
    Ok((crop(|z| z.re)?, crop(|z| z.im)?))
}

pub fn synthesize_field(model: &SpectralModel, n: usize, spacing: f64, topology: Topology, seed: u64) -> Result<FieldGrid> {
    Ok(synthesize_pair(model, n, spacing, topology, seed, 0)?.0)
}

/// `count` independent fields; fields `2p` and `2p+1` share stream `first_stream + p`.
pub fn synthesize_fields(
    model: &SpectralModel,
    n: usize,
    spacing: f64,
    topology: Topology,
    seed: u64,
    first_stream: u64,
    count: usize,
) -> Result<Vec<FieldGrid>> {
    let mut out = Vec::with_capacity(count);
    let mut id = first_stream;
    while out.len() < count {
        let (a, b) = synthesize_pair(model, n, spacing, topology, seed, id)?;
        out.push(a);
        if out.len() < count {
            out.push(b);
        }
        id += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mu2Estimate {
    pub mu2: f64,
    /// Standard error over fields; absent for a single field.
    pub se: Option<f64>,
}

/// Finite-difference estimator of `μ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mu2Method {
    /// `((f_{i+1} − f_{i−1}) / 2Δ)²`; expectation `(1 − C(2Δ)) / (2Δ²)`.
    CentralDifference,
    /// `((f_{i+1} − f_i) / Δ)²`; expectation `2(1 − C(Δ)) / Δ²`.
    NearestNeighbour,
}

/// Mean squared central difference per field, both axes.
pub fn mu2_field(f: &FieldGrid) -> f64 {
    mu2_field_with(f, Mu2Method::CentralDifference)
}

pub fn mu2_field_with(f: &FieldGrid, method: Mu2Method) -> f64 {
    let n = f.n as isize;
    let (back, fwd, h) = match method {
        Mu2Method::CentralDifference => (1isize, 1isize, 2.0 * f.spacing),
        Mu2Method::NearestNeighbour => (0, 1, f.spacing),
    };
    let at = |i: isize, j: isize| -> Option<f64> {
        match f.topology {
            Topology::Torus => Some(f.get(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize)),
            Topology::Rectangle => {
                if i < 0 || j < 0 || i >= n || j >= n {
                    None
                } else {
                    Some(f.get(i as usize, j as usize))
                }
            }
        }
    };
    let mut s = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if let (Some(a), Some(b)) = (at(i + fwd, j), at(i - back, j)) {
                s += (a - b) * (a - b);
                count += 1;
            }
            if let (Some(a), Some(b)) = (at(i, j + fwd), at(i, j - back)) {
                s += (a - b) * (a - b);
                count += 1;
            }
        }
    }
    s / (count as f64 * h * h)
}

pub fn mu2_empirical(fields: &[FieldGrid]) -> Result<Mu2Estimate> {
    if fields.is_empty() {
        return Err(GkfError::InvalidArgument("need at least one field".into()));
    }
    let per: Vec<f64> = fields.iter().map(mu2_field).collect();
    let m = per.len() as f64;
    let mean = per.iter().sum::<f64>() / m;
    let se = if per.len() > 1 {
        let var = per.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        Some((var / m).sqrt())
    } else {
        None
    };
    Ok(Mu2Estimate { mu2: mean, se })
}

/// Pointwise maps from component fields to a derived field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FieldMap {
    Linear(Vec<f64>),
    SumSquares,
    /// `‖y‖`.
    Norm,
    /// `Σ (y_i + μ_i)²`.
    ShiftedSumSquares(Vec<f64>),
    FRatio { k1: usize, k2: usize },
    /// `min(y_1, ρ y_1 + √(1−ρ²) y_2)`.
    Conjunction { rho: f64 },
}

impl FieldMap {
    pub fn arity(&self) -> Option<usize> {
        match self {
            FieldMap::Linear(z) => Some(z.len()),
            FieldMap::SumSquares | FieldMap::Norm => None,
            FieldMap::ShiftedSumSquares(mu) => Some(mu.len()),
            FieldMap::FRatio { k1, k2 } => Some(k1 + k2),
            FieldMap::Conjunction { .. } => Some(2),
        }
    }

    pub fn apply(&self, y: &[f64]) -> f64 {
        match self {
            FieldMap::Linear(z) => y.iter().zip(z).map(|(a, b)| a * b).sum(),
            FieldMap::SumSquares => y.iter().map(|a| a * a).sum(),
            FieldMap::Norm => y.iter().map(|a| a * a).sum::<f64>().sqrt(),
            FieldMap::ShiftedSumSquares(mu) => y.iter().zip(mu).map(|(a, b)| (a + b) * (a + b)).sum(),
            FieldMap::FRatio { k1, k2 } => {
                let u: f64 = y[..*k1].iter().map(|a| a * a).sum();
                let v: f64 = y[*k1..].iter().map(|a| a * a).sum();
                (u / *k1 as f64) / (v / *k2 as f64)
            }
            FieldMap::Conjunction { rho } => y[0].min(rho * y[0] + (1.0 - rho * rho).sqrt() * y[1]),
        }
    }
}

pub fn derived_field(map: &FieldMap, components: &[FieldGrid]) -> Result<FieldGrid> {
    let first = components.first().ok_or_else(|| GkfError::InvalidArgument("no component fields".into()))?;
    if let Some(k) = map.arity() {
        if k != components.len() {
            return Err(GkfError::InvalidArgument(format!("map takes {k} components, got {}", components.len())));
        }
    }
    if let FieldMap::Conjunction { rho } = map {
        if !(rho.abs() < 1.0) {
            return Err(GkfError::InvalidArgument(format!("correlation must satisfy |ρ| < 1, got {rho}")));
        }
    }
    for c in components {
        if c.n != first.n || c.topology != first.topology || c.spacing != first.spacing {
            return Err(GkfError::InvalidArgument("component fields differ in shape or topology".into()));
        }
    }
    let mut y = vec![0.0; components.len()];
    let values = (0..first.values.len())
        .map(|p| {
            for (yi, c) in y.iter_mut().zip(components) {
                *yi = c.values[p];
            }
            map.apply(&y)
        })
        .collect();
    FieldGrid::new(first.n, first.spacing, first.topology, values)
}

pub fn excursion_mask(field: &FieldGrid, u: f64) -> Mask {
    Mask::new(field.n, field.n, field.values.iter().map(|&v| v >= u).collect())
}
