//! Double forms `Λ^{p,q}(V)` over `V = R^dim` with the double-wedge product,
//! traces, interior products and contractions, plus Monte Carlo checks of the
//! Gaussian moment formula `E[W^k] = Σ_j k!/((k−2j)! j! 2^j) μ^{k−2j} C^j` and of
//! the conditional expectation formula along a unit vector.
//!
//! A grade `(p, q)` component is stored densely over pairs of strictly
//! increasing multi-indices, encoded as bitmasks. Indices are 0-based. The
//! basis element `e^I ⊗ e^J` evaluates on vectors as
//! `det[X_a(i_b)] · det[Y_a(j_b)]`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GkfError, Result};
use crate::rng::par_blocks;
use crate::special::factorial;

pub const MAX_DIM: usize = 8;

/// Bitmasks of all `p`-subsets of `{0..dim}` in lexicographic order of their
/// sorted index lists.
pub fn subsets(dim: usize, p: usize) -> Vec<u32> {
    fn rec(start: usize, dim: usize, left: usize, mask: u32, out: &mut Vec<u32>) {
        if left == 0 {
            out.push(mask);
            return;
        }
        for i in start..dim {
            if dim - i < left {
                break;
            }
            rec(i + 1, dim, left - 1, mask | (1 << i), out);
        }
    }
    let mut out = Vec::new();
    if p <= dim {
        rec(0, dim, p, 0, &mut out);
    }
    out
}

fn mask_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

fn position_table(dim: usize) -> Vec<usize> {
    let mut pos = vec![usize::MAX; 1 << dim];
    for p in 0..=dim {
        for (i, m) in subsets(dim, p).into_iter().enumerate() {
            pos[m as usize] = i;
        }
    }
    pos
}

// Sign of e^A ∧ e^B relative to e^{A∪B}; zero if A and B overlap.
fn merge_sign(a: u32, b: u32) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        inversions += (a >> (j + 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |c, i| c * (n - i) / (i + 1))
}

fn det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        1.0
    } else {
        m.determinant()
    }
}

/// A graded element of `Λ^{*,*}(R^dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleForm {
    dim: usize,
    grades: BTreeMap<(usize, usize), Vec<f64>>,
}

impl DoubleForm {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "dimension must be in 1..={MAX_DIM}");
        Self { dim, grades: BTreeMap::new() }
    }

    pub fn scalar(dim: usize, c: f64) -> Self {
        let mut f = Self::zero(dim);
        f.grades.insert((0, 0), vec![c]);
        f
    }

    /// `e^{I} ⊗ e^{J}` for index lists `I`, `J` (any order; sign follows the
    /// permutation to increasing order).
    pub fn basis(dim: usize, first: &[usize], second: &[usize]) -> Self {
        let mut f = Self::zero(dim);
        let (ma, sa) = sorted_mask(first);
        let (mb, sb) = sorted_mask(second);
        if sa != 0.0 && sb != 0.0 {
            f.add_coeff(ma, mb, sa * sb);
        }
        f
    }

    /// The metric `I = Σ_i e^i ⊗ e^i`.
    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        Self::from_matrix(dim, &m)
    }

    /// Grade-(1,1) form `Σ_{ij} m[i·dim + j] e^i ⊗ e^j`.
    pub fn from_matrix(dim: usize, m: &[f64]) -> Self {
        assert_eq!(m.len(), dim * dim);
        let mut f = Self::zero(dim);
        f.grades.insert((1, 1), m.to_vec());
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Grade pairs with stored coefficients.
    pub fn grades(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.grades.keys().copied()
    }

    /// Coefficient array for grade `(p, q)`, row-major over (first, second)
    /// subsets in [`subsets`] order.
    pub fn component(&self, p: usize, q: usize) -> Option<&[f64]> {
        self.grades.get(&(p, q)).map(|v| v.as_slice())
    }

    /// Coefficient of `e^I ⊗ e^J` for increasing-index masks.
    pub fn coeff(&self, first: u32, second: u32) -> f64 {
        let p = first.count_ones() as usize;
        let q = second.count_ones() as usize;
        match self.grades.get(&(p, q)) {
            None => 0.0,
            Some(v) => {
                let pos = position_table(self.dim);
                v[pos[first as usize] * binom(self.dim, q) + pos[second as usize]]
            }
        }
    }

    fn add_coeff_with(&mut self, pos: &[usize], first: u32, second: u32, c: f64) {
        let p = first.count_ones() as usize;
        let q = second.count_ones() as usize;
        let (np, nq) = (binom(self.dim, p), binom(self.dim, q));
        let v = self.grades.entry((p, q)).or_insert_with(|| vec![0.0; np * nq]);
        v[pos[first as usize] * nq + pos[second as usize]] += c;
    }

    pub fn add_coeff(&mut self, first: u32, second: u32, c: f64) {
        let pos = position_table(self.dim);
        self.add_coeff_with(&pos, first, second, c);
    }

    /// Iterates over `(first mask, second mask, coefficient)` of nonzero terms.
    pub fn terms(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        for (&(p, q), v) in &self.grades {
            let sp = subsets(self.dim, p);
            let sq = subsets(self.dim, q);
            for (a, &ma) in sp.iter().enumerate() {
                for (b, &mb) in sq.iter().enumerate() {
                    let c = v[a * sq.len() + b];
                    if c != 0.0 {
                        out.push((ma, mb, c));
                    }
                }
            }
        }
        out
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(GkfError::InvalidArgument(format!(
                "double forms over different dimensions ({} vs {})",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (k, v) in &other.grades {
            let e = out.grades.entry(*k).or_insert_with(|| vec![0.0; v.len()]);
            for (x, y) in e.iter_mut().zip(v) {
                *x += y;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.grades.values_mut() {
            for x in v.iter_mut() {
                *x *= c;
            }
        }
        out
    }

    /// Double-wedge product `(α⊗β)·(γ⊗δ) = (α∧γ)⊗(β∧δ)`.
    pub fn double_wedge(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let pos = position_table(self.dim);
        let mut out = Self::zero(self.dim);
        let rhs = other.terms();
        for (a1, b1, c1) in self.terms() {
            for &(a2, b2, c2) in &rhs {
                let s = merge_sign(a1, a2) * merge_sign(b1, b2);
                if s != 0.0 {
                    out.add_coeff_with(&pos, a1 | a2, b1 | b2, s * c1 * c2);
                }
            }
        }
        Ok(out)
    }

    /// `self^k` under the double-wedge product (`self^0 = 1`).
    pub fn power(&self, k: usize) -> Self {
        let mut out = Self::scalar(self.dim, 1.0);
        for _ in 0..k {
            out = out.double_wedge(self).expect("same dimension");
        }
        out
    }

    /// `Tr = Σ_p Σ_I a_{I,I}` over square grades.
    pub fn trace_full(&self) -> f64 {
        let mut t = 0.0;
        for (&(p, q), v) in &self.grades {
            if p == q {
                let n = binom(self.dim, p);
                t += (0..n).map(|i| v[i * n + i]).sum::<f64>();
            }
        }
        t
    }

    /// Evaluates the grade-(p, q) component on `p` first-slot and `q`
    /// second-slot vectors.
    pub fn evaluate(&self, xs: &[&[f64]], ys: &[&[f64]]) -> f64 {
        let (p, q) = (xs.len(), ys.len());
        let Some(v) = self.grades.get(&(p, q)) else { return 0.0 };
        let sp = subsets(self.dim, p);
        let sq = subsets(self.dim, q);
        let minors = |vs: &[&[f64]], set: &[u32]| -> Vec<f64> {
            set.iter()
                .map(|&m| {
                    let idx = mask_indices(m);
                    det(&DMatrix::from_fn(vs.len(), vs.len(), |a, b| vs[a][idx[b]]))
                })
                .collect()
        };
        let dx = minors(xs, &sp);
        let dy = minors(ys, &sq);
        let mut s = 0.0;
        for (a, x) in dx.iter().enumerate() {
            for (b, y) in dy.iter().enumerate() {
                s += v[a * sq.len() + b] * x * y;
            }
        }
        s
    }

    fn interior(&self, v: &[f64], first_slot: bool) -> Self {
        assert_eq!(v.len(), self.dim);
        let pos = position_table(self.dim);
        let mut out = Self::zero(self.dim);
        for (a, b, c) in self.terms() {
            let m = if first_slot { a } else { b };
            let mut rest = m;
            let mut place = 0;
            while rest != 0 {
                let i = rest.trailing_zeros();
                rest &= rest - 1;
                let sign = if place % 2 == 0 { 1.0 } else { -1.0 };
                let reduced = m & !(1 << i);
                let w = sign * v[i as usize] * c;
                if w != 0.0 {
                    if first_slot {
                        out.add_coeff_with(&pos, reduced, b, w);
                    } else {
                        out.add_coeff_with(&pos, a, reduced, w);
                    }
                }
                place += 1;
            }
        }
        out
    }

    /// Interior product `η_v` in the first slot.
    pub fn eta(&self, v: &[f64]) -> Self {
        self.interior(v, true)
    }

    /// Interior product `η'_v` in the second slot.
    pub fn eta_prime(&self, v: &[f64]) -> Self {
        self.interior(v, false)
    }

    /// Contraction `C_L = Σ_i η_{v_i} η'_{v_i}` over an orthonormal basis of `L`.
    pub fn contract(&self, basis: &[Vec<f64>]) -> Self {
        let mut out = Self::zero(self.dim);
        for v in basis {
            out = out.add(&self.eta(v).eta_prime(v)).expect("same dimension");
        }
        out
    }

    /// `Tr^L(α|_L)` for the grade-(k, k) part: `Σ_S α(v_S; v_S)` over
    /// `k`-subsets `S` of the orthonormal basis of `L`.
    pub fn restricted_trace(&self, basis: &[Vec<f64>], k: usize) -> f64 {
        subsets(basis.len(), k)
            .into_iter()
            .map(|m| {
                let vs: Vec<&[f64]> = mask_indices(m).iter().map(|&i| basis[i].as_slice()).collect();
                self.evaluate(&vs, &vs)
            })
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.add(&other.scale(-1.0)).map(|d| d.terms().iter().fold(0.0f64, |m, t| m.max(t.2.abs()))).unwrap_or(f64::INFINITY)
    }
}

fn sorted_mask(idx: &[usize]) -> (u32, f64) {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    let mut m = 0u32;
    for w in &v {
        if m & (1 << w) != 0 {
            return (0, 0.0);
        }
        m |= 1 << w;
    }
    (m, sign)
}

/// Orthonormalizes `vectors`, dropping any whose residual norm is below 1e−10.
pub fn gram_schmidt(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &out {
                let d: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
                for (x, y) in w.iter_mut().zip(u) {
                    *x -= d * y;
                }
            }
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-10 {
            out.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Orthonormal basis of `v^⊥` in `R^dim`.
pub fn orthogonal_complement(v: &[f64]) -> Vec<Vec<f64>> {
    let dim = v.len();
    let mut vs = vec![v.to_vec()];
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        vs.push(e);
    }
    gram_schmidt(&vs).into_iter().skip(1).collect()
}

/// Gaussian law on grade-(1,1) double forms: `W = μ + ξ` where the flattened
/// coefficient vector `vec(ξ)` (index `i·dim + j`) has covariance `Σ`.
#[derive(Debug, Clone)]
pub struct GaussianDoubleFormModel {
    dim: usize,
    mean: DoubleForm,
    sigma: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianDoubleFormModel {
    /// Builds the model from the mean and the `dim²×dim²` coefficient
    /// covariance. Eigenvalues down to −1e−10 (relative) are clipped to 0.
    pub fn from_coefficient_covariance(mean: DoubleForm, sigma: DMatrix<f64>) -> Result<Self> {
        let dim = mean.dim();
        if mean.grades().any(|g| g != (1, 1)) {
            return Err(GkfError::InvalidModel("mean must be of grade (1,1)".into()));
        }
        let n = dim * dim;
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(GkfError::InvalidModel(format!("covariance must be {n}×{n}")));
        }
        let asym = (&sigma - sigma.transpose()).abs().max();
        let scale = sigma.abs().max().max(1.0);
        if asym > 1e-12 * scale {
            return Err(GkfError::InvalidModel("coefficient covariance is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(sigma.clone());
        let min = eig.eigenvalues.min();
        if min < -1e-10 * scale {
            return Err(GkfError::InvalidModel(format!("coefficient covariance has eigenvalue {min:.3e} < 0")));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Self { dim, mean, sigma, factor })
    }

    /// Builds the model from `μ` and `C = E[(W − μ)²]`, using the canonical
    /// coefficient covariance `Σ_{(i,j),(k,l)} = C((i,k),(j,l))/4`. `C` does
    /// not determine `Σ` uniquely and the canonical choice need not be
    /// positive semidefinite; that case is reported as an invalid model.
    pub fn new(mean: DoubleForm, cov: DoubleForm) -> Result<Self> {
        let dim = mean.dim();
        if cov.dim() != dim {
            return Err(GkfError::InvalidModel("mean and covariance dimensions differ".into()));
        }
        if cov.grades().any(|g| g != (2, 2)) {
            return Err(GkfError::InvalidModel("covariance must be of grade (2,2)".into()));
        }
        let n = dim * dim;
        let mut sigma = DMatrix::zeros(n, n);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        let (ma, sa) = sorted_mask(&[i, k]);
                        let (mb, sb) = sorted_mask(&[j, l]);
                        if sa != 0.0 && sb != 0.0 {
                            sigma[(i * dim + j, k * dim + l)] = sa * sb * cov.coeff(ma, mb) / 4.0;
                        }
                    }
                }
            }
        }
        Self::from_coefficient_covariance(mean, sigma)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &DoubleForm {
        &self.mean
    }

    pub fn coefficient_covariance(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// `C = E[(W − μ)²]`, with coefficient `2(Σ_{ac,bd} − Σ_{ad,bc})` on
    /// `(e^a∧e^b) ⊗ (e^c∧e^d)`.
    pub fn cov(&self) -> DoubleForm {
        let d = self.dim;
        let mut c = DoubleForm::zero(d);
        for ab in subsets(d, 2) {
            let [a, b] = [mask_indices(ab)[0], mask_indices(ab)[1]];
            for cd in subsets(d, 2) {
                let [cc, dd] = [mask_indices(cd)[0], mask_indices(cd)[1]];
                let v = 2.0 * (self.sigma[(a * d + cc, b * d + dd)] - self.sigma[(a * d + dd, b * d + cc)]);
                if v != 0.0 {
                    c.add_coeff(ab, cd, v);
                }
            }
        }
        c
    }

    /// A random model: standard normal mean entries and `Σ = A Aᵀ / dim²`.
    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        let n = dim * dim;
        let mean: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = &a * a.transpose() / n as f64;
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        Self::from_coefficient_covariance(DoubleForm::from_matrix(dim, &mean), sigma).expect("A Aᵀ is PSD")
    }

    fn sample(&self, rng: &mut impl Rng, z: &mut [f64], w: &mut [f64]) {
        let mean = self.mean.component(1, 1).expect("grade (1,1) mean");
        for x in z.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let n = self.dim * self.dim;
        for i in 0..n {
            let mut s = mean[i];
            for j in 0..n {
                s += self.factor[(i, j)] * z[j];
            }
            w[i] = s;
        }
    }
}

/// Closed-form `E[W^k] = Σ_j k!/((k−2j)! j! 2^j) μ^{k−2j} C^j`.
pub fn lemma21_rhs(model: &GaussianDoubleFormModel, k: usize) -> DoubleForm {
    let c = model.cov();
    let mut out = DoubleForm::zero(model.dim);
    for j in 0..=k / 2 {
        let coef = factorial(k) / (factorial(k - 2 * j) * factorial(j) * f64::powi(2.0, j as i32));
        let term = model.mean.power(k - 2 * j).double_wedge(&c.power(j)).expect("same dimension");
        out = out.add(&term.scale(coef)).expect("same dimension");
    }
    out
}

/// Monte Carlo estimate of `E[W^k]` and per-coefficient standard errors.
///
/// `W^k` is evaluated as `k!·det(W[I, J])` on each pair of `k`-subsets, which
/// does not use the double-wedge code.
pub fn lemma21_mc(model: &GaussianDoubleFormModel, k: usize, n_samples: usize, seed: u64) -> (DoubleForm, DoubleForm) {
    let d = model.dim;
    let mut mean_form = DoubleForm::zero(d);
    let mut se_form = DoubleForm::zero(d);
    if k > d || n_samples == 0 {
        return (mean_form, se_form);
    }
    let sets = subsets(d, k);
    let idx: Vec<Vec<usize>> = sets.iter().map(|&m| mask_indices(m)).collect();
    let m = sets.len();
    let kf = factorial(k);
    let (sum, sum2) = par_blocks(
        n_samples,
        seed,
        |rng, count| {
            let mut s = vec![0.0; m * m];
            let mut s2 = vec![0.0; m * m];
            let mut z = vec![0.0; d * d];
            let mut w = vec![0.0; d * d];
            for _ in 0..count {
                model.sample(rng, &mut z, &mut w);
                for (a, ia) in idx.iter().enumerate() {
                    for (b, ib) in idx.iter().enumerate() {
                        let v = kf * det(&DMatrix::from_fn(k, k, |r, c| w[ia[r] * d + ib[c]]));
                        s[a * m + b] += v;
                        s2[a * m + b] += v * v;
                    }
                }
            }
            (s, s2)
        },
        |(mut a, mut a2), (b, b2)| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            for (x, y) in a2.iter_mut().zip(&b2) {
                *x += y;
            }
            (a, a2)
        },
    )
    .expect("at least one block");
    let n = n_samples as f64;
    for a in 0..m {
        for b in 0..m {
            let mu = sum[a * m + b] / n;
            let var = ((sum2[a * m + b] / n - mu * mu) * n / (n - 1.0).max(1.0)).max(0.0);
            mean_form.add_coeff(sets[a], sets[b], mu);
            se_form.add_coeff(sets[a], sets[b], (var / n).sqrt());
        }
    }
    (mean_form, se_form)
}

/// Result of the conditional-expectation check along a unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cor23Result {
    pub mc_value: f64,
    pub rhs_value: f64,
    pub se: f64,
}

/// Compares `E[α(X_1..X_k; X_1..X_k)]`, `X_i = c_i v0 + Y_i` with `Y_i`
/// standard Gaussian on `v0^⊥`, against
/// `k!·Tr^{v0⊥}(α|_{v0⊥}) + (Σ c_l²)·η_{v0} η'_{v0} C_{v0⊥}^{k−1} α`.
pub fn cor23_check(alpha: &DoubleForm, v0: &[f64], c: &[f64], n_samples: usize, seed: u64) -> Result<Cor23Result> {
    let dim = alpha.dim();
    let k = c.len();
    if v0.len() != dim {
        return Err(GkfError::InvalidArgument("v0 has the wrong dimension".into()));
    }
    let norm = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(GkfError::InvalidArgument(format!("v0 must be a unit vector, has norm {norm}")));
    }
    if k == 0 || k > dim || alpha.grades().any(|g| g != (k, k)) {
        return Err(GkfError::InvalidArgument(format!("alpha must be of grade ({k},{k}) with k ≤ dim")));
    }
    let perp = orthogonal_complement(v0);
    let mut contracted = alpha.clone();
    for _ in 0..k - 1 {
        contracted = contracted.contract(&perp);
    }
    let annihilated = contracted.eta(v0).eta_prime(v0);
    let c2: f64 = c.iter().map(|x| x * x).sum();
    let rhs = factorial(k) * alpha.restricted_trace(&perp, k) + c2 * annihilated.coeff(0, 0);

    let (s, s2) = par_blocks(
        n_samples,
        seed,
        |rng, count| {
            let mut s = 0.0;
            let mut s2 = 0.0;
            let mut xs = vec![vec![0.0; dim]; k];
            for _ in 0..count {
                for (i, x) in xs.iter_mut().enumerate() {
                    let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let proj: f64 = z.iter().zip(v0).map(|(a, b)| a * b).sum();
                    for t in 0..dim {
                        x[t] = c[i] * v0[t] + z[t] - proj * v0[t];
                    }
                }
                let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
                let v = alpha.evaluate(&refs, &refs);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    )
    .unwrap_or((0.0, 0.0));
    let n = n_samples as f64;
    let mc = s / n;
    let var = ((s2 / n - mc * mc) * n / (n - 1.0).max(1.0)).max(0.0);
    Ok(Cor23Result { mc_value: mc, rhs_value: rhs, se: (var / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assume, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(i: usize, j: usize, dim: usize) -> DoubleForm {
        DoubleForm::basis(dim, &[i], &[j])
    }

    #[test]
    fn wedge_examples() {
        let a = e(0, 0, 2).double_wedge(&e(1, 1, 2)).unwrap();
        assert_eq!(a, DoubleForm::basis(2, &[0, 1], &[0, 1]));
        let i2 = DoubleForm::identity(2).power(2);
        assert_eq!(i2, DoubleForm::basis(2, &[0, 1], &[0, 1]).scale(2.0));
        assert!(e(0, 0, 2).double_wedge(&e(0, 0, 3)).is_err());
    }

    #[test]
    fn traces() {
        assert_eq!(e(0, 0, 3).trace_full(), 1.0);
        for n in 1..=5 {
            assert_eq!(DoubleForm::identity(n).trace_full(), n as f64);
            assert_eq!(DoubleForm::identity(n).power(2).trace_full(), (n * (n - 1)) as f64);
        }
    }

    #[test]
    fn power_is_k_factorial_minor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m: Vec<f64> = (0..9).map(|_| rng.sample(StandardNormal)).collect();
        let w = DoubleForm::from_matrix(3, &m);
        let w2 = w.power(2);
        // coefficient on (01, 12) = 2(x_01 x_12 − x_02 x_11)
        let c = w2.coeff(0b011, 0b110);
        assert!((c - 2.0 * (m[1] * m[5] - m[2] * m[4])).abs() < 1e-12);
        let w3 = w.power(3);
        let d = DMatrix::from_row_slice(3, 3, &m).determinant();
        assert!((w3.coeff(0b111, 0b111) - 6.0 * d).abs() < 1e-11);
    }

    #[test]
    fn lemma21_rhs_low_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = GaussianDoubleFormModel::random(3, &mut rng);
        assert!(lemma21_rhs(&model, 1).max_abs_diff(model.mean()) < 1e-14);
        let mu = model.mean().clone();
        let c = model.cov();
        let k2 = mu.power(2).add(&c).unwrap();
        assert!(lemma21_rhs(&model, 2).max_abs_diff(&k2) < 1e-12);
        let k3 = mu.power(3).add(&mu.double_wedge(&c).unwrap().scale(3.0)).unwrap();
        assert!(lemma21_rhs(&model, 3).max_abs_diff(&k3) < 1e-12);
    }

    fn identity_noise_model() -> GaussianDoubleFormModel {
        // W = I + ξ I
        let v = DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 1.0]);
        GaussianDoubleFormModel::from_coefficient_covariance(DoubleForm::identity(2), &v * v.transpose()).unwrap()
    }

    #[test]
    fn identity_noise_has_cov_i_squared() {
        let m = identity_noise_model();
        assert!(m.cov().max_abs_diff(&DoubleForm::identity(2).power(2)) < 1e-15);
        // the canonical reconstruction from C = I² is not PSD
        let r = GaussianDoubleFormModel::new(DoubleForm::identity(2), DoubleForm::identity(2).power(2));
        assert!(matches!(r, Err(GkfError::InvalidModel(_))));
    }

    fn within(mc: &DoubleForm, se: &DoubleForm, rhs: &DoubleForm, z: f64) -> bool {
        let diff = mc.add(&rhs.scale(-1.0)).unwrap();
        diff.terms().iter().all(|&(a, b, d)| d.abs() <= z * se.coeff(a, b) + 1e-12)
    }

    #[test]
    fn lemma21_mc_examples() {
        let m = identity_noise_model();
        let (mc, se) = lemma21_mc(&m, 2, 200_000, 1);
        assert!(within(&mc, &se, &lemma21_rhs(&m, 2), 4.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = GaussianDoubleFormModel::random(3, &mut rng);
        let (mc, se) = lemma21_mc(&model, 1, 100_000, 2);
        assert!(within(&mc, &se, model.mean(), 4.0));
        let (mc, se) = lemma21_mc(&model, 3, 200_000, 3);
        assert!(within(&mc, &se, &lemma21_rhs(&model, 3), 4.0));
    }

    #[test]
    fn cor23_examples() {
        let r = cor23_check(&e(0, 0, 2), &[1.0, 0.0], &[1.7], 1000, 1).unwrap();
        assert!((r.rhs_value - 1.7 * 1.7).abs() < 1e-14);
        assert!((r.mc_value - r.rhs_value).abs() < 1e-12);
        let r = cor23_check(&e(1, 1, 2), &[1.0, 0.0], &[0.4], 100_000, 2).unwrap();
        assert!((r.rhs_value - 1.0).abs() < 1e-14);
        assert!((r.mc_value - r.rhs_value).abs() <= 4.0 * r.se);
        let i2 = DoubleForm::identity(3).power(2);
        let r = cor23_check(&i2, &[1.0, 0.0, 0.0], &[0.0, 0.0], 100_000, 3).unwrap();
        assert!((r.rhs_value - 4.0).abs() < 1e-13);
        assert!((r.mc_value - r.rhs_value).abs() <= 4.0 * r.se);
        // with c: 4 + 4(c1² + c2²)
        let r = cor23_check(&i2, &[1.0, 0.0, 0.0], &[0.5, -1.0], 10, 3).unwrap();
        assert!((r.rhs_value - (4.0 + 4.0 * 1.25)).abs() < 1e-12);
        assert!(cor23_check(&i2, &[1.0, 1.0, 0.0], &[0.0, 0.0], 10, 3).is_err());
    }

    fn random_form(dim: usize, p: usize, q: usize, vals: &[f64]) -> DoubleForm {
        let mut f = DoubleForm::zero(dim);
        let mut it = vals.iter().cycle();
        for a in subsets(dim, p) {
            for b in subsets(dim, q) {
                f.add_coeff(a, b, *it.next().unwrap());
            }
        }
        f
    }

    fn close(a: &DoubleForm, b: &DoubleForm) -> bool {
        let scale = a.terms().iter().chain(b.terms().iter()).fold(1.0f64, |m, t| m.max(t.2.abs()));
        a.max_abs_diff(b) <= 1e-12 * scale
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn interior_sign_rules(dim in 1usize..=4, p in 0usize..=4, q in 0usize..=4,
                               vals in proptest::collection::vec(-2.0f64..2.0, 36),
                               v1 in proptest::collection::vec(-2.0f64..2.0, 4),
                               v2 in proptest::collection::vec(-2.0f64..2.0, 4)) {
            prop_assume!(p <= dim && q <= dim);
            let a = random_form(dim, p, q, &vals);
            let (v1, v2) = (&v1[..dim], &v2[..dim]);
            prop_assert!(close(&a.eta(v2).eta(v1), &a.eta(v1).eta(v2).scale(-1.0)));
            prop_assert!(close(&a.eta(v2).eta_prime(v1), &a.eta_prime(v1).eta(v2)));
        }

        #[test]
        fn wedge_associative_and_bilinear(dim in 1usize..=4, g in proptest::collection::vec(0usize..=2, 6),
                                          vals in proptest::collection::vec(-2.0f64..2.0, 36), s in -3.0f64..3.0) {
            prop_assume!(g.iter().all(|&x| x <= dim));
            let a = random_form(dim, g[0], g[1], &vals);
            let b = random_form(dim, g[2], g[3], &vals[7..]);
            let c = random_form(dim, g[4], g[5], &vals[13..]);
            let left = a.double_wedge(&b).unwrap().double_wedge(&c).unwrap();
            let right = a.double_wedge(&b.double_wedge(&c).unwrap()).unwrap();
            prop_assert!(close(&left, &right));
            let lin = a.double_wedge(&b.scale(s).add(&c).unwrap()).unwrap();
            let sep = a.double_wedge(&b).unwrap().scale(s).add(&a.double_wedge(&c).unwrap()).unwrap();
            prop_assert!(close(&lin, &sep));
        }

        #[test]
        fn grade_one_forms_commute(dim in 1usize..=4, vals in proptest::collection::vec(-2.0f64..2.0, 36)) {
            let a = random_form(dim, 1, 1, &vals);
            let b = random_form(dim, 1, 1, &vals[5..]);
            prop_assert!(close(&a.double_wedge(&b).unwrap(), &b.double_wedge(&a).unwrap()));
        }

        #[test]
        fn contraction_power_is_restricted_trace(dim in 1usize..=4, k in 1usize..=3, l in 1usize..=4,
                                                 vals in proptest::collection::vec(-2.0f64..2.0, 36),
                                                 raw in proptest::collection::vec(-1.0f64..1.0, 16)) {
            prop_assume!(k <= dim && l <= dim);
            let a = random_form(dim, k, k, &vals);
            let vs: Vec<Vec<f64>> = raw.chunks(4).take(l).map(|c| c[..dim].to_vec()).collect();
            let basis = gram_schmidt(&vs);
            prop_assume!(basis.len() >= 1);
            let mut ck = a.clone();
            for _ in 0..k {
                ck = ck.contract(&basis);
            }
            let lhs = ck.coeff(0, 0);
            let rhs = factorial(k) * a.restricted_trace(&basis, k);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }
    }
}
