//! Acceptance checks and the end-to-end simulation experiment.
//!
//! Each criterion returns a [`CriterionReport`] with one detail line per
//! comparison. The test suite and the `selftest` command both call
//! [`run_criterion`].

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::double_forms::{cor23_check, lemma21_mc, lemma21_rhs, subsets, DoubleForm, GaussianDoubleFormModel};
use crate::error::{GkfError, Result};
use crate::euler::{euler_char_2d, euler_oracle, Mask, Topology};
use crate::field::{derived_field, excursion_mask, mu2_field_with, synthesize_pair, FieldGrid, FieldMap, Mu2Method, SpectralModel};
use crate::gkf::{expected_euler_char, Family};
use crate::gmf::{
    conjunction_cone_params, conjunction_cone_params_printed, gmf_chi, gmf_cone2, gmf_f_field, gmf_f_field_surface,
    gmf_half_space, gmf_m1_m2_coarea, gmf_noncentral_chi, Domain, FRatio, ImplicitDomain,
};
use crate::lkc::{lkc_box, lkc_box_from_steiner_fit, lkc_flat_torus2, LkcVector};
use crate::numeric::richardson_derivative;
use crate::rng::stream;
use crate::special::{chi_density, noncentral_chi_sf, norm_sf};
use crate::tube::{chebyshev_radii, fit_tube_coefficients, mc_tube_curve, FitOptions, TubeCurve};

/// Criteria cheap enough for `selftest`.
pub const FAST: &[usize] = &[1, 2, 11, 12];
pub const ALL: &[usize] = &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: &'static str,
    pub pass: bool,
    pub details: Vec<String>,
    pub seconds: f64,
}

struct Checks {
    pass: bool,
    lines: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { pass: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("note {line}"));
    }

    fn error(&mut self, e: GkfError) {
        self.check(false, format!("error: {e}"));
    }

    fn z(&mut self, what: &str, estimate: f64, se: f64, exact: f64, limit: f64) {
        let z = (estimate - exact) / se;
        self.check(z.abs() <= limit, format!("{what}: estimate {estimate:.6e} ± {se:.2e}, exact {exact:.6e}, z = {z:+.2}"));
    }
}

pub fn title(id: usize) -> &'static str {
    match id {
        1 => "half-space tube fit is exact",
        2 => "chi GMF equals density derivatives",
        3 => "chi-squared tube oracle",
        4 => "noncentral chi-squared",
        5 => "F field closed forms and coarea",
        6 => "conjunction cone",
        7 => "Gaussian field end to end",
        8 => "chi-squared field end to end",
        9 => "Gaussian double-form moments",
        10 => "conditional double-form trace",
        11 => "lattice Euler characteristic",
        12 => "Steiner fit recovers LKCs",
        _ => "unknown criterion",
    }
}

pub fn run_criterion(id: usize) -> CriterionReport {
    let start = Instant::now();
    let (budget, checks) = match id {
        1 => (1.0, criterion_1()),
        2 => (1.0, criterion_2()),
        3 => (60.0, criterion_3()),
        4 => (f64::INFINITY, criterion_4()),
        5 => (f64::INFINITY, criterion_5()),
        6 => (f64::INFINITY, criterion_6()),
        7 => (600.0, criterion_7()),
        8 => (600.0, criterion_8()),
        9 => (120.0, criterion_9()),
        10 => (60.0, criterion_10()),
        11 => (f64::INFINITY, criterion_11()),
        12 => (f64::INFINITY, criterion_12()),
        _ => {
            let mut c = Checks::new();
            c.check(false, format!("no criterion {id}"));
            (f64::INFINITY, c)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let mut checks = checks;
    if budget.is_finite() {
        checks.check(seconds < budget, format!("runtime {seconds:.2} s (budget {budget} s)"));
    }
    CriterionReport { id, title: title(id), pass: checks.pass, details: checks.lines, seconds }
}

fn fit_mc(domain: &Domain, order: usize, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let curve = mc_tube_curve(domain, &chebyshev_radii(16, 0.25), n, seed)?;
    let fit = fit_tube_coefficients(&curve, order, FitOptions::default())?;
    Ok((fit.coefficients, fit.std_errors))
}

fn criterion_1() -> Checks {
    let mut c = Checks::new();
    let radii = chebyshev_radii(20, 0.25);
    for &u in &[0.0, 1.0, 2.0] {
        let curve = TubeCurve::analytic(&radii, |r| norm_sf(u - r));
        let fit = match fit_tube_coefficients(&curve, 4, FitOptions { guard_degrees: 6 }) {
            Ok(f) => f,
            Err(e) => {
                c.error(e);
                continue;
            }
        };
        let exact = gmf_half_space(u, 4);
        for j in 0..=4 {
            let (a, b) = (fit.coefficients[j], exact.get(j));
            // exact zeros (H_{j−1}(u) = 0) take an absolute error
            let (err, kind) = if b == 0.0 { ((a - b).abs(), "abs") } else { ((a - b).abs() / b.abs(), "rel") };
            c.check(err < 1e-8, format!("u={u} M_{j}: fit {a:.15e} exact {b:.15e} {kind} err {err:.2e}"));
        }
    }
    c
}

fn criterion_2() -> Checks {
    let mut c = Checks::new();
    for k in [2usize, 3] {
        for &x in &[1.0, 1.5, 2.0] {
            let g = match gmf_chi(k, x, 3) {
                Ok(g) => g,
                Err(e) => {
                    c.error(e);
                    continue;
                }
            };
            for j in 1..=3usize {
                let d = if j == 1 {
                    chi_density(k, x)
                } else {
                    richardson_derivative(|t| chi_density(k, t), x, j - 1, 0.05, 5)
                };
                // γ(T(D, r)) = P(χ_k ≥ x − r), so M_j = (−1)^{j−1} f_k^{(j−1)}(x)
                let fd = if (j - 1) % 2 == 0 { d } else { -d };
                let err = (g.get(j) - fd).abs();
                c.check(err < 1e-6, format!("k={k} x={x} M_{j}: closed {:.12e} fd {fd:.12e} err {err:.2e}", g.get(j)));
            }
        }
    }
    c
}

fn criterion_3() -> Checks {
    let mut c = Checks::new();
    let domain = Domain::BallComplement { k: 2, radius: 2.0 };
    let exact = gmf_chi(2, 2.0, 2).expect("valid parameters");
    match fit_mc(&domain, 2, 10_000_000, 3003) {
        Ok((m, se)) => {
            for j in 1..=2 {
                c.z(&format!("M_{j}"), m[j], se[j], exact.get(j), 3.0);
            }
        }
        Err(e) => c.error(e),
    }
    c
}

fn criterion_4() -> Checks {
    let mut c = Checks::new();
    let (k, alpha, x) = (2usize, 1.0, 2.0);
    let g = match gmf_noncentral_chi(k, alpha, x, 2, 1e-12) {
        Ok(g) => g,
        Err(e) => {
            c.error(e);
            return c;
        }
    };
    let sf = |t: f64| noncentral_chi_sf(k, alpha, t, 1e-12).map(|s| s.value).unwrap_or(f64::NAN);
    for j in 1..=2usize {
        let d = richardson_derivative(sf, x, j, 0.05, 5);
        let fd = if j % 2 == 0 { d } else { -d };
        let err = (g.get(j) - fd).abs();
        c.check(err < 1e-5, format!("M_{j}: closed {:.10e} fd {fd:.10e} err {err:.2e}", g.get(j)));
    }
    let domain = Domain::NoncentralBallComplement { center: vec![-alpha.sqrt(), 0.0], radius: x };
    match fit_mc(&domain, 2, 10_000_000, 4004) {
        Ok((m, se)) => {
            for j in 1..=2 {
                c.z(&format!("tube M_{j}"), m[j], se[j], g.get(j), 3.0);
            }
        }
        Err(e) => c.error(e),
    }
    c
}

fn criterion_5() -> Checks {
    let mut c = Checks::new();
    let (a, b) = match (gmf_f_field(2, 2, 1.0, 2), gmf_f_field_surface(2, 2, 1.0, 2)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            c.error(e);
            return c;
        }
    };
    for j in 1..=2 {
        let err = (a.get(j) - b.get(j)).abs();
        c.check(err < 1e-10, format!("M_{j}: closed {:.14e} surface {:.14e} diff {err:.2e}", a.get(j), b.get(j)));
    }
    let domain = ImplicitDomain { map: Arc::new(FRatio { k1: 2, k2: 2 }), level: 1.0, critical_radius_hint: 0.0 };
    match gmf_m1_m2_coarea(&domain, 0.01, 10_000_000, 5005, false) {
        Ok(m) => {
            c.z("coarea M_1", m.m1, m.m1_se, a.get(1), 3.0);
            c.z("coarea M_2", m.m2, m.m2_se, a.get(2), 3.0);
            c.note(format!("{} samples in the window", m.in_window));
        }
        Err(e) => c.error(e),
    }
    c
}

fn criterion_6() -> Checks {
    let mut c = Checks::new();
    let mut seed = 6000;
    for &rho in &[-0.5, 0.0, 0.5] {
        for &u in &[1.0, 2.0] {
            seed += 1;
            let run = || -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
                let cone = conjunction_cone_params(u, rho)?;
                let exact = gmf_cone2(&cone, 2)?;
                let printed = gmf_cone2(&conjunction_cone_params_printed(u, rho)?, 2)?;
                let (m, se) = fit_mc(&Domain::Cone2(cone), 2, 10_000_000, seed)?;
                Ok((m, se, exact.coeffs, printed.coeffs))
            };
            match run() {
                Ok((m, se, exact, printed)) => {
                    for j in 0..=2 {
                        c.z(&format!("rho={rho} u={u} M_{j}"), m[j], se[j], exact[j], 3.0);
                        let zp = (m[j] - printed[j]) / se[j];
                        c.note(format!("rho={rho} u={u} M_{j} printed apex {:.6e} z = {zp:+.2}", printed[j]));
                    }
                }
                Err(e) => c.error(e),
            }
        }
    }
    c
}

/// Settings of an end-to-end experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub family: Family,
    pub scale: f64,
    pub n: usize,
    pub spacing: f64,
    pub topology: Topology,
    pub levels: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub mu2_source: Mu2Source,
}

/// Which `μ₂` enters the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mu2Source {
    /// Empirical, central differences.
    CentralDifference,
    /// Empirical, nearest-neighbour differences.
    NearestNeighbour,
    /// `1/s²`.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub u: f64,
    pub predicted: f64,
    pub mean_chi: f64,
    pub se: f64,
    pub z: f64,
    pub chis: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    /// Central-difference estimate and its SE over replicates.
    pub mu2_empirical: f64,
    pub mu2_se: f64,
    pub mu2_nearest: f64,
    pub mu2_nearest_se: f64,
    pub mu2_analytic: f64,
    pub mu2_used: f64,
    /// Component fields failing the soft mean/variance checks.
    pub soft_check_warnings: usize,
    pub lkc: LkcVector,
    pub levels: Vec<LevelResult>,
}

pub fn field_map(family: &Family) -> FieldMap {
    match *family {
        Family::Gaussian => FieldMap::Linear(vec![1.0]),
        Family::Chi { .. } => FieldMap::Norm,
        Family::ChiSquared { .. } => FieldMap::SumSquares,
        Family::NoncentralChiSquared { k, alpha } => {
            // ‖y + μ‖² ≥ u is the complement of the ball centred at −μ
            let mut mu = vec![0.0; k];
            mu[0] = alpha.sqrt();
            FieldMap::ShiftedSumSquares(mu)
        }
        Family::F { k1, k2 } => FieldMap::FRatio { k1, k2 },
        Family::Conjunction { rho } => FieldMap::Conjunction { rho },
    }
}

/// Side length entering the LKCs: `nΔ` on the torus, `(n − 1)Δ` for the
/// rectangle spanned by the sample sites.
pub fn parameter_side(n: usize, spacing: f64, topology: Topology) -> f64 {
    match topology {
        Topology::Torus => n as f64 * spacing,
        Topology::Rectangle => (n - 1) as f64 * spacing,
    }
}

/// Replicate `r` uses fields `r·k .. r·k + k − 1`; field `i` is half `i mod 2`
/// of the pair on stream `i / 2`.
fn replicate_components(cfg: &SimulationConfig, model: &SpectralModel, r: usize) -> Result<Vec<FieldGrid>> {
    let k = cfg.family.components();
    let first = r * k;
    let mut out = Vec::with_capacity(k);
    let mut cache: Option<(usize, (FieldGrid, FieldGrid))> = None;
    for i in first..first + k {
        let pair = i / 2;
        if cache.as_ref().map(|(p, _)| *p) != Some(pair) {
            cache = Some((pair, synthesize_pair(model, cfg.n, cfg.spacing, cfg.topology, cfg.seed, pair as u64)?));
        }
        let (_, (a, b)) = cache.as_ref().expect("filled above");
        out.push(if i % 2 == 0 { a.clone() } else { b.clone() });
    }
    Ok(out)
}

pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationReport> {
    if cfg.replicates == 0 {
        return Err(GkfError::InvalidArgument("replicates must be positive".into()));
    }
    if cfg.levels.is_empty() {
        return Err(GkfError::InvalidArgument("no levels given".into()));
    }
    let model = SpectralModel::new(cfg.scale)?;
    let map = field_map(&cfg.family);
    let per: Vec<(f64, f64, Vec<i64>, usize)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64, Vec<i64>, usize)> {
            let comps = replicate_components(cfg, &model, r)?;
            let warnings = comps.iter().filter(|c| !c.soft_check(&model).is_empty()).count();
            let k = comps.len() as f64;
            let cd = comps.iter().map(|c| mu2_field_with(c, Mu2Method::CentralDifference)).sum::<f64>() / k;
            let nn = comps.iter().map(|c| mu2_field_with(c, Mu2Method::NearestNeighbour)).sum::<f64>() / k;
            let f = derived_field(&map, &comps)?;
            let chis = cfg.levels.iter().map(|&u| euler_char_2d(&excursion_mask(&f, u), cfg.topology)).collect();
            Ok((cd, nn, chis, warnings))
        })
        .collect::<Result<_>>()?;
    let m = cfg.replicates as f64;
    let mean_se = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let mean = v.iter().sum::<f64>() / m;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        (mean, (var / m).sqrt())
    };
    let (mu2_hat, mu2_se) = mean_se(&mut per.iter().map(|p| p.0));
    let (mu2_nearest, mu2_nearest_se) = mean_se(&mut per.iter().map(|p| p.1));
    let mu2 = match cfg.mu2_source {
        Mu2Source::CentralDifference => mu2_hat,
        Mu2Source::NearestNeighbour => mu2_nearest,
        Mu2Source::Analytic => model.mu2(),
    };
    let lkc = grid_lkc(cfg.n, cfg.spacing, cfg.topology, mu2)?;
    let mut levels = Vec::with_capacity(cfg.levels.len());
    for (li, &u) in cfg.levels.iter().enumerate() {
        let predicted = expected_euler_char(&lkc, &cfg.family.gmf(u, 2)?)?.expected_chi;
        let chis: Vec<i64> = per.iter().map(|p| p.2[li]).collect();
        let (mean_chi, se) = mean_se(&mut chis.iter().map(|&x| x as f64));
        let z = if se > 0.0 {
            (mean_chi - predicted) / se
        } else if mean_chi == predicted {
            0.0
        } else {
            f64::INFINITY
        };
        levels.push(LevelResult { u, predicted, mean_chi, se, z, chis });
    }
    Ok(SimulationReport {
        mu2_empirical: mu2_hat,
        mu2_se,
        mu2_nearest,
        mu2_nearest_se,
        mu2_analytic: model.mu2(),
        mu2_used: mu2,
        soft_check_warnings: per.iter().map(|p| p.3).sum(),
        lkc,
        levels,
    })
}

/// LKCs of the parameter space sampled by an `n×n` grid.
pub fn grid_lkc(n: usize, spacing: f64, topology: Topology, mu2: f64) -> Result<LkcVector> {
    let side = parameter_side(n, spacing, topology);
    match topology {
        Topology::Torus => lkc_flat_torus2(side, mu2),
        Topology::Rectangle => lkc_box(&[side, side], mu2),
    }
}

fn e2e_config(family: Family, topology: Topology, levels: &[f64], seed: u64) -> SimulationConfig {
    SimulationConfig {
        family,
        scale: 8.0,
        n: 256,
        spacing: 1.0,
        topology,
        levels: levels.to_vec(),
        replicates: 2000,
        seed,
        mu2_source: Mu2Source::CentralDifference,
    }
}

fn report_levels(c: &mut Checks, label: &str, cfg: &SimulationConfig, r: &SimulationReport) {
    c.note(format!(
        "{label}: mu2 central {:.6e} ± {:.1e}, nearest-neighbour {:.6e} ± {:.1e}, analytic {:.6e}",
        r.mu2_empirical, r.mu2_se, r.mu2_nearest, r.mu2_nearest_se, r.mu2_analytic
    ));
    for l in &r.levels {
        c.z(&format!("{label} u={} mean chi", l.u), l.mean_chi, l.se, l.predicted, 3.0);
    }
    // diagnostic only: the nearest-neighbour estimate tracks the lattice
    for l in &r.levels {
        let alt = grid_lkc(cfg.n, cfg.spacing, cfg.topology, r.mu2_nearest)
            .and_then(|lkc| expected_euler_char(&lkc, &cfg.family.gmf(l.u, 2)?))
            .map(|g| g.expected_chi);
        if let Ok(alt) = alt {
            c.note(format!("{label} u={} with nearest-neighbour mu2: prediction {alt:.4} z = {:+.2}", l.u, (l.mean_chi - alt) / l.se));
        }
    }
}

fn criterion_7() -> Checks {
    let mut c = Checks::new();
    let cfg = e2e_config(Family::Gaussian, Topology::Torus, &[1.5, 2.0, 2.5], 7007);
    match simulate(&cfg) {
        Ok(r) => {
            report_levels(&mut c, "torus", &cfg, &r);
            // closed form T² μ̂₂ (2π)^{−3/2} u e^{−u²/2}
            for l in &r.levels {
                let t2 = parameter_side(256, 1.0, Topology::Torus).powi(2);
                let closed = t2 * r.mu2_empirical * (2.0 * std::f64::consts::PI).powf(-1.5) * l.u * (-0.5 * l.u * l.u).exp();
                let err = (closed - l.predicted).abs() / closed;
                c.check(err < 1e-12, format!("torus u={} prediction matches the closed form ({err:.1e})", l.u));
            }
            let l = &r.levels[1];
            let rel = (l.mean_chi - l.predicted).abs() / l.predicted;
            c.check(rel < 0.05, format!("torus u=2 relative error {:.2}%", 100.0 * rel));
        }
        Err(e) => c.error(e),
    }
    let cfg = e2e_config(Family::Gaussian, Topology::Rectangle, &[2.0], 7008);
    match simulate(&cfg) {
        Ok(r) => report_levels(&mut c, "rectangle", &cfg, &r),
        Err(e) => c.error(e),
    }
    c
}

fn criterion_8() -> Checks {
    let mut c = Checks::new();
    let cfg = e2e_config(Family::ChiSquared { k: 2 }, Topology::Torus, &[4.0, 6.0], 8008);
    match simulate(&cfg) {
        Ok(r) => {
            report_levels(&mut c, "torus chi2_2", &cfg, &r);
            for l in &r.levels {
                let m2 = gmf_chi(2, l.u.sqrt(), 2).expect("valid parameters").get(2);
                let closed = r.lkc.values[2] / (2.0 * std::f64::consts::PI) * m2;
                c.check((closed - l.predicted).abs() <= 1e-12 * closed.abs(), format!("u={} prediction is L_2 M_2 / 2π", l.u));
            }
        }
        Err(e) => c.error(e),
    }
    c
}

fn criterion_9() -> Checks {
    let mut c = Checks::new();
    let mut rng = stream(9009, 0);
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let dim = rng.random_range(1..=3usize);
        let k = rng.random_range(1..=dim);
        let model = GaussianDoubleFormModel::random(dim, &mut rng);
        let rhs = lemma21_rhs(&model, k);
        let (mc, se) = lemma21_mc(&model, k, 1_000_000, 9100 + case);
        let mut case_worst: f64 = 0.0;
        let mut ok = true;
        for a in subsets(dim, k) {
            for b in subsets(dim, k) {
                let (m, s, r) = (mc.coeff(a, b), se.coeff(a, b), rhs.coeff(a, b));
                let z = if s > 0.0 { (m - r) / s } else if m == r { 0.0 } else { f64::INFINITY };
                case_worst = case_worst.max(z.abs());
                ok &= z.abs() <= 4.0;
            }
        }
        worst = worst.max(case_worst);
        c.check(ok, format!("case {case}: dim={dim} k={k} max |z| = {case_worst:.2}"));
    }
    c.note(format!("max |z| over all coefficients {worst:.2}"));
    c
}

fn random_form(dim: usize, k: usize, rng: &mut impl Rng) -> DoubleForm {
    let mut f = DoubleForm::zero(dim);
    for a in subsets(dim, k) {
        for b in subsets(dim, k) {
            f.add_coeff(a, b, rng.random_range(-1.0..1.0));
        }
    }
    f
}

fn criterion_10() -> Checks {
    let mut c = Checks::new();
    let mut rng = stream(10010, 0);
    for case in 0..20u64 {
        let k = rng.random_range(1..=2usize);
        let alpha = random_form(3, k, &mut rng);
        let mut v0: Vec<f64> = (0..3).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let norm = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
        v0.iter_mut().for_each(|x| *x /= norm);
        let coef: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        match cor23_check(&alpha, &v0, &coef, 1_000_000, 10100 + case) {
            Ok(r) => {
                let dev = (r.mc_value - r.rhs_value).abs();
                c.check(
                    dev <= 4.0 * r.se,
                    format!("case {case}: k={k} mc {:.6} rhs {:.6} |diff| {dev:.2e} ({:.2} SE)", r.mc_value, r.rhs_value, dev / r.se),
                );
            }
            Err(e) => c.error(e),
        }
    }
    c
}

fn criterion_11() -> Checks {
    let mut c = Checks::new();
    let mut rng = stream(11011, 0);
    for topology in [Topology::Torus, Topology::Rectangle] {
        let mut failures = 0;
        for _ in 0..1000 {
            let p = rng.random_range(0.2..0.8);
            let cells = (0..256).map(|_| rng.random_bool(p)).collect();
            let mask = Mask::new(16, 16, cells);
            if euler_char_2d(&mask, topology) != euler_oracle(&mask, topology) {
                failures += 1;
            }
        }
        c.check(failures == 0, format!("{topology:?}: {failures} mismatches in 1000 masks"));
    }
    c
}

fn criterion_12() -> Checks {
    let mut c = Checks::new();
    for sides in [vec![1.0, 1.0], vec![1.0, 1.0, 1.0]] {
        match (lkc_box_from_steiner_fit(&sides, 0.2, 12), lkc_box(&sides, 1.0)) {
            (Ok(fit), Ok(exact)) => {
                let err = fit.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                c.check(err < 1e-10, format!("{}-cube: L = {:?}, max error {err:.2e}", sides.len(), fit.values));
            }
            (Err(e), _) | (_, Err(e)) => c.error(e),
        }
    }
    c
}
