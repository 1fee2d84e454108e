//! Adaptive Gauss–Kronrod quadrature and Richardson-extrapolated finite
//! differences.

use std::collections::BinaryHeap;

use crate::error::{GkfError, Result};

// 15-point Kronrod nodes on [-1, 1] (non-negative half) and weights, with the
// embedded 7-point Gauss weights at the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol·|I|)`. Returns
/// [`GkfError::Quadrature`] if the subdivision budget runs out first.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Quadrature> {
    let q = integrate_best_effort(&f, a, b, abs_tol, rel_tol);
    if q.abs_error <= abs_tol.max(rel_tol * q.value.abs()) {
        Ok(q)
    } else {
        Err(GkfError::Quadrature { error: q.abs_error })
    }
}

/// Same as [`integrate`] but returns whatever was reached.
pub fn integrate_best_effort<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, abs_error: 0.0, intervals: 0 };
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_INTERVALS {
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2 });
    }
    total = heap.iter().map(|q| q.value).sum();
    err = heap.iter().map(|q| q.error).sum();
    Quadrature { value: total, abs_error: err, intervals: heap.len() }
}

fn binomial_u(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Central difference of order `n` with spacing `h`:
/// `Σ_k (−1)^k C(n,k) f(x + (n/2 − k)h) / h^n`.
pub fn central_difference<F: Fn(f64) -> f64>(f: &F, x: f64, n: usize, h: f64) -> f64 {
    let half = n as f64 / 2.0;
    let mut s = 0.0;
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * binomial_u(n, k) * f(x + (half - k as f64) * h);
    }
    s / h.powi(n as i32)
}

/// Order-`n` derivative by central differences at `h, h/2, …, h/2^(levels−1)`
/// followed by Richardson extrapolation in `h²`.
pub fn richardson_derivative<F: Fn(f64) -> f64>(f: F, x: f64, n: usize, h: f64, levels: usize) -> f64 {
    let levels = levels.max(1);
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for i in 0..levels {
        let hi = h / f64::powi(2.0, i as i32);
        let mut row = vec![central_difference(&f, x, n, hi)];
        for m in 1..=i {
            let p = f64::powi(4.0, m as i32);
            let prev = row[m - 1];
            row.push(prev + (prev - table[i - 1][m - 1]) / (p - 1.0));
        }
        table.push(row);
    }
    table[levels - 1][levels - 1]
}

/// First derivative with the default step 1e−3 and four Richardson levels.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    richardson_derivative(f, x, 1, 1e-3, 4)
}
