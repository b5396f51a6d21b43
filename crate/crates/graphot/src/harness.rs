//! Experiment driver: kernel-moment constant checks, the convergence study
//! comparing discrete transport distances on geometric graphs against the
//! rescaled continuum Wasserstein distance, complete-graph diameter growth,
//! and eigenvalue stability across graph sizes.

use serde::{Deserialize, Serialize};

use crate::continuum::{
    estimate_delta_n, f_map, heat_smooth, wasserstein2, AtomicMeasure, PartitionMap,
};
use crate::discrete::{complete_graph_diameter, solve_wn, DiscreteDensity};
use crate::error::{GraphotError, Result};
use crate::graph::{build_graph, smallest_nontrivial_eigenvalue, GeometricGraph};
use crate::interp::{parse_theta, InterpolationFn};
use crate::quadrature::gauss_legendre;

/// Gauss-Legendre nodes and weights mapped from `[-1, 1]` to `[a, b]`.
fn gl_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}
use crate::torus::{sample_uniform, TorusPoint};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `alpha_d * sigma_eta`: unit-ball volume times the `(d+1)`-th radial
/// moment `1/(d+2)` of the indicator kernel. The ball volume follows the
/// two-step recursion `alpha_d = alpha_{d-2} * 2 pi / d`.
pub fn alpha_sigma(d: usize) -> f64 {
    let mut alpha = [1.0f64, 2.0f64]; // alpha_0, alpha_1
    let mut vol = alpha[d % 2];
    let mut k = d % 2;
    while k < d {
        k += 2;
        vol = alpha[k % 2] * 2.0 * std::f64::consts::PI / k as f64;
        alpha[k % 2] = vol;
    }
    vol / (d + 2) as f64
}

/// Outcome of the numerical second-moment check of the graph kernel.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub d: usize,
    pub eps: f64,
    pub expected: f64,
    /// Integral values for each probe direction/base-point combination.
    pub values: Vec<f64>,
    pub worst_rel_error: f64,
    /// Largest disagreement between base points for the same direction.
    pub x_spread: f64,
}

/// Integrates `((y - x) . u / eps)^2 w_eps(x, y)` over the torus for probe
/// unit vectors `u` and base points `x`, and compares against
/// `alpha_sigma(d)`. The quadrature is polar: Gauss-Legendre in the radius
/// (polynomial-exact) and trapezoid/Gauss-Legendre on the sphere (exact for
/// degree-2 spherical harmonics), so the only error left is roundoff.
pub fn kernel_moment_check(d: usize, eps: f64, quad_points: usize) -> Result<MomentReport> {
    if !(1..=3).contains(&d) {
        return Err(GraphotError::InvalidParameter(format!(
            "kernel moment check supports d in 1..=3, got {d}"
        )));
    }
    if eps <= 0.0 || eps >= 0.5 {
        return Err(GraphotError::InvalidParameter(format!(
            "eps must lie in (0, 0.5), got {eps}"
        )));
    }
    let q = quad_points.max(8);
    // directions on the sphere with quadrature weights summing to the
    // sphere's surface measure
    let sphere: Vec<(Vec<f64>, f64)> = match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let two_pi = 2.0 * std::f64::consts::PI;
            (0..q)
                .map(|k| {
                    let phi = two_pi * k as f64 / q as f64;
                    (vec![phi.cos(), phi.sin()], two_pi / q as f64)
                })
                .collect()
        }
        _ => {
            let two_pi = 2.0 * std::f64::consts::PI;
            let (ct, wt) = gl_on(q, -1.0, 1.0);
            let mut out = Vec::new();
            for (c, w) in ct.iter().zip(&wt) {
                let st = (1.0 - c * c).max(0.0).sqrt();
                for k in 0..q {
                    let phi = two_pi * k as f64 / q as f64;
                    out.push((
                        vec![st * phi.cos(), st * phi.sin(), *c],
                        w * two_pi / q as f64,
                    ));
                }
            }
            out
        }
    };
    let (radii, rweights) = gl_on(q, 0.0, eps);

    // probe directions: first axis, plus an orthogonal vector for d >= 2
    let mut probes: Vec<Vec<f64>> = vec![{
        let mut u = vec![0.0; d];
        u[0] = 1.0;
        u
    }];
    if d >= 2 {
        let mut u = vec![0.0; d];
        let inv = 1.0 / 2.0f64.sqrt();
        u[0] = inv;
        u[1] = -inv;
        probes.push(u);
    }
    let bases: Vec<Vec<f64>> = vec![vec![0.3; d], vec![0.77; d]];

    let expected = alpha_sigma(d);
    let mut values = Vec::new();
    let mut per_probe: Vec<Vec<f64>> = Vec::new();
    for u in &probes {
        let mut probe_values = Vec::new();
        for x in &bases {
            let mut acc = 0.0;
            for (omega, ws) in &sphere {
                for (&r, &wr) in radii.iter().zip(&rweights) {
                    // evaluate through the torus wrap so the check really
                    // uses the periodic geometry, not just the offset z
                    let mut dot = 0.0;
                    for a in 0..d {
                        let y = (x[a] + r * omega[a]).rem_euclid(1.0);
                        dot += crate::torus::wrap_diff(y, x[a]) * u[a];
                    }
                    let jac = r.powi(d as i32 - 1);
                    acc += ws * wr * (dot / eps).powi(2) * eps.powi(-(d as i32)) * jac;
                }
            }
            values.push(acc);
            probe_values.push(acc);
        }
        per_probe.push(probe_values);
    }
    let worst_rel_error = values
        .iter()
        .map(|v| (v - expected).abs() / expected)
        .fold(0.0f64, f64::max);
    let x_spread = per_probe
        .iter()
        .map(|pv| {
            pv.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - pv.iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max);
    Ok(MomentReport {
        d,
        eps,
        expected,
        values,
        worst_rel_error,
        x_spread,
    })
}

/// Neighborhood radius rule `eps_n = c * n^{-beta}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsRule {
    pub c: f64,
    pub beta: f64,
}

/// Configuration of a convergence or eigenvalue experiment; the JSON config
/// file mirrors these field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n_list: Vec<usize>,
    pub eps_rule: EpsRule,
    pub theta: String,
    pub s: f64,
    pub t_steps: usize,
    pub pairs: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Requires `beta` in `(0, 1/d)` so the partition radius shrinks faster
    /// than the graph radius as `n` grows.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(GraphotError::InvalidParameter("dimension 0".into()));
        }
        if self.n_list.is_empty() {
            return Err(GraphotError::InvalidParameter("empty n_list".into()));
        }
        if self.eps_rule.c <= 0.0 {
            return Err(GraphotError::InvalidParameter(
                "eps rule constant must be positive".into(),
            ));
        }
        let beta = self.eps_rule.beta;
        if beta <= 0.0 || beta >= 1.0 / self.d as f64 {
            return Err(GraphotError::InvalidParameter(format!(
                "beta = {beta} outside (0, 1/{})",
                self.d
            )));
        }
        if self.s <= 0.0 {
            return Err(GraphotError::InvalidParameter(
                "heat parameter must be positive".into(),
            ));
        }
        if self.t_steps < 2 {
            return Err(GraphotError::InvalidParameter(
                "need at least 2 time steps".into(),
            ));
        }
        parse_theta(&self.theta)?;
        Ok(())
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eps_for(&self, n: usize) -> f64 {
        self.eps_rule.c * (n as f64).powf(-self.eps_rule.beta)
    }
}

/// One measured pair in the convergence experiment. Every row carries the
/// full provenance tuple needed to reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct DistortionRow {
    pub n: usize,
    pub pair: usize,
    pub seed: u64,
    pub eps: f64,
    pub t_steps: usize,
    pub theta: String,
    pub s: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Exact transport distance between the raw atomic measures, before
    /// heat smoothing; recorded for provenance only.
    pub w_raw: f64,
    /// Reference distance between the heat-smoothed measures, the
    /// continuum counterpart of what the graph metric actually sees.
    pub w_continuum: f64,
    pub w_discrete: f64,
    /// `w_discrete * sqrt(alpha_d sigma) / w_continuum`; NaN when the
    /// continuum distance vanishes.
    pub ratio: f64,
    /// `|w_discrete - w_continuum / sqrt(alpha_d sigma)|`.
    pub scaled_abs_error: f64,
}

/// Per-n aggregate of the convergence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct DistortionSummary {
    pub n: usize,
    pub eps_n: f64,
    pub delta_n: f64,
    pub lambda_n: f64,
    pub diam_est: f64,
    /// Max `scaled_abs_error` over converged rows.
    pub sup_distortion: f64,
    /// Mean of `ratio` over converged rows with nonzero continuum distance.
    pub mean_ratio: f64,
    pub pairs: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub rows: Vec<DistortionRow>,
    pub summaries: Vec<DistortionSummary>,
    pub failed_total: usize,
    pub rows_total: usize,
}

impl DistortionReport {
    /// Fraction of attempted pairs whose solve did not converge.
    pub fn failure_fraction(&self) -> f64 {
        if self.rows_total == 0 {
            0.0
        } else {
            self.failed_total as f64 / self.rows_total as f64
        }
    }

    pub fn rows_to_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(std::fs::File::create(path)?);
        w.write_record([
            "n",
            "pair",
            "seed",
            "eps",
            "t_steps",
            "theta",
            "s",
            "iterations",
            "converged",
            "w_raw",
            "w_continuum",
            "w_discrete",
            "ratio",
            "scaled_abs_error",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.pair.to_string(),
                r.seed.to_string(),
                format!("{:.17}", r.eps),
                r.t_steps.to_string(),
                r.theta.clone(),
                format!("{:.17}", r.s),
                r.iterations.to_string(),
                r.converged.to_string(),
                format!("{:.17}", r.w_raw),
                format!("{:.17}", r.w_continuum),
                format!("{:.17}", r.w_discrete),
                format!("{:.17}", r.ratio),
                format!("{:.17}", r.scaled_abs_error),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summaries_to_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summaries)?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Smallest grid resolution `kappa` with `kappa^d` a multiple of `n` and at
/// least `target` points per cloud point.
fn pick_kappa(n: usize, d: usize, target: usize) -> Result<usize> {
    let want = (n * target) as f64;
    let mut kappa = want.powf(1.0 / d as f64).ceil() as usize;
    for _ in 0..64 * n {
        if kappa.pow(d as u32) % n == 0 {
            return Ok(kappa);
        }
        kappa += 1;
    }
    Err(GraphotError::InvalidParameter(format!(
        "no balanced grid resolution found for n = {n}, d = {d}"
    )))
}

/// Random mixture of at most `max_atoms` point masses.
/// Grid resolution for the continuum reference distance: the finest grid
/// whose atom count (`kappa^d`) stays small enough for the exact transport
/// solver to stay fast, so the reference error is a fixed small offset
/// independent of the graph size under study.
fn reference_kappa(d: usize) -> usize {
    match d {
        1 => 256,
        2 => 16,
        _ => 7,
    }
}

fn random_mixture(d: usize, max_atoms: usize, rng: &mut ChaCha8Rng) -> Result<AtomicMeasure> {
    let k = rng.gen_range(1..=max_atoms);
    let atoms: Vec<TorusPoint> = (0..k)
        .map(|_| TorusPoint::new((0..d).map(|_| rng.gen::<f64>()).collect()))
        .collect::<Result<_>>()?;
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let tot: f64 = raw.iter().sum();
    AtomicMeasure::new(atoms, raw.iter().map(|x| x / tot).collect())
}

struct Level {
    n: usize,
    eps: f64,
    graph: GeometricGraph,
    partition: PartitionMap,
    delta_n: f64,
    lambda_n: f64,
}

fn prepare_level(cfg: &ExperimentConfig, n: usize) -> Result<Level> {
    // derive a per-level cloud seed so levels are independent streams
    let cloud_seed = cfg.seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(n as u64);
    let cloud = sample_uniform(n, cfg.d, cloud_seed)?;
    let eps = cfg.eps_for(n);
    let graph = build_graph(&cloud, eps)?;
    graph.require_connected()?;
    let kappa = pick_kappa(n, cfg.d, 16)?;
    let (delta_n, partition) = estimate_delta_n(&cloud, kappa.pow(cfg.d as u32))?;
    let (lambda_n, _) = smallest_nontrivial_eigenvalue(&graph, 1e-6)?;
    Ok(Level {
        n,
        eps,
        graph,
        partition,
        delta_n,
        lambda_n,
    })
}

/// Runs the full distortion experiment: per graph size, smooth-and-project
/// random Dirac mixtures onto the graph, solve the discrete transport
/// problem, and compare against the exact continuum distance rescaled by
/// `1/sqrt(alpha_d sigma)`.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<DistortionReport> {
    cfg.validate()?;
    let theta = parse_theta(&cfg.theta)?;
    let scale = alpha_sigma(cfg.d).sqrt();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut failed_total = 0usize;
    for &n in &cfg.n_list {
        let level = prepare_level(cfg, n)?;
        let diam_est = diameter_estimate(&level.graph, &theta, cfg.t_steps)?;
        let mut sup_distortion = 0.0f64;
        let mut ratio_sum = 0.0f64;
        let mut ratio_count = 0usize;
        let mut failed = 0usize;
        for pair in 0..cfg.pairs {
            let pair_seed = cfg
                .seed
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add((n as u64) << 20)
                .wrapping_add(pair as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
            let mu = random_mixture(cfg.d, 5, &mut rng)?;
            let nu = random_mixture(cfg.d, 5, &mut rng)?;
            let w_raw = wasserstein2(&mu, &nu, 1e-9)?;
            // the graph metric sees the heat-smoothed measures, so the
            // continuum reference is the distance between those; the
            // smoothing bias relative to the raw pair stays in w_raw
            let kappa_ref = reference_kappa(cfg.d);
            let hm = heat_smooth(&mu, cfg.s, kappa_ref, None)?.to_atomic()?;
            let hn = heat_smooth(&nu, cfg.s, kappa_ref, None)?.to_atomic()?;
            let w_cont = wasserstein2(&hm, &hn, 1e-9)?;
            let rho0 = f_map(&mu, cfg.s, &level.partition)?;
            let rho1 = f_map(&nu, cfg.s, &level.partition)?;
            let rep = solve_wn(&level.graph, &theta, &rho0, &rho1, cfg.t_steps, 1e-6)?;
            let w_disc = rep.distance_upper;
            let ratio = if w_cont > 1e-12 {
                w_disc * scale / w_cont
            } else {
                f64::NAN
            };
            let err = (w_disc - w_cont / scale).abs();
            if rep.converged {
                sup_distortion = sup_distortion.max(err);
                if ratio.is_finite() {
                    ratio_sum += ratio;
                    ratio_count += 1;
                }
            } else {
                failed += 1;
            }
            rows.push(DistortionRow {
                n,
                pair,
                seed: pair_seed,
                w_raw,
                eps: level.eps,
                t_steps: cfg.t_steps,
                theta: cfg.theta.clone(),
                s: cfg.s,
                iterations: rep.iterations,
                converged: rep.converged,
                w_continuum: w_cont,
                w_discrete: w_disc,
                ratio,
                scaled_abs_error: err,
            });
        }
        failed_total += failed;
        summaries.push(DistortionSummary {
            n: level.n,
            eps_n: level.eps,
            delta_n: level.delta_n,
            lambda_n: level.lambda_n,
            diam_est,
            sup_distortion,
            mean_ratio: if ratio_count > 0 {
                ratio_sum / ratio_count as f64
            } else {
                f64::NAN
            },
            pairs: cfg.pairs,
            failed,
        });
    }
    Ok(DistortionReport {
        rows_total: rows.len(),
        rows,
        summaries,
        failed_total,
    })
}

/// Observed-diameter proxy: the distance from a point mass to the uniform
/// density, the farthest pair on complete graphs and a good stand-in here.
fn diameter_estimate(
    g: &GeometricGraph,
    theta: &InterpolationFn,
    t_steps: usize,
) -> Result<f64> {
    let n = g.n();
    let dirac = DiscreteDensity::dirac(n, 0);
    let uniform = DiscreteDensity::uniform(n);
    let rep = solve_wn(g, theta, &dirac, &uniform, t_steps, 1e-6)?;
    Ok(rep.distance_upper)
}

/// One row of the complete-graph diameter study.
#[derive(Debug, Clone, Serialize)]
pub struct DiameterRow {
    pub n: usize,
    pub estimate: f64,
    pub fit: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiameterTable {
    pub theta: String,
    /// Least-squares coefficient of `a * sqrt(log N)`.
    pub coefficient: f64,
    pub rows: Vec<DiameterRow>,
}

/// Complete-graph diameter across `N`, with a least-squares fit of
/// `a * sqrt(log N)` and per-row relative residuals.
pub fn run_diameter_study(n_list: &[usize], theta: &InterpolationFn) -> Result<DiameterTable> {
    if n_list.iter().any(|&n| n < 2) {
        return Err(GraphotError::InvalidParameter(
            "diameter study needs N >= 2".into(),
        ));
    }
    let estimates: Vec<f64> = n_list
        .iter()
        .map(|&n| complete_graph_diameter(n, theta, 1e-6))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln().sqrt()).collect();
    let num: f64 = xs.iter().zip(&estimates).map(|(x, y)| x * y).sum();
    let den: f64 = xs.iter().map(|x| x * x).sum();
    let a = num / den;
    let rows = n_list
        .iter()
        .zip(&xs)
        .zip(&estimates)
        .map(|((&n, &x), &y)| {
            let fit = a * x;
            DiameterRow {
                n,
                estimate: y,
                fit,
                residual: if y.abs() > 0.0 { (y - fit).abs() / y } else { 0.0 },
            }
        })
        .collect();
    Ok(DiameterTable {
        theta: theta.name().to_string(),
        coefficient: a,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenRow {
    pub n: usize,
    pub eps: f64,
    pub lambda: f64,
    pub seed: u64,
}

/// Smallest nontrivial Laplacian eigenvalue across the configured sizes.
pub fn run_eigen_study(cfg: &ExperimentConfig) -> Result<Vec<EigenRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let cloud_seed = cfg.seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(n as u64);
        let cloud = sample_uniform(n, cfg.d, cloud_seed)?;
        let eps = cfg.eps_for(n);
        let graph = build_graph(&cloud, eps)?;
        let (lambda, _) = smallest_nontrivial_eigenvalue(&graph, 1e-8)?;
        rows.push(EigenRow {
            n,
            eps,
            lambda,
            seed: cloud_seed,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volume_moments() {
        assert!((alpha_sigma(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((alpha_sigma(2) - std::f64::consts::PI / 4.0).abs() < 1e-15);
        assert!((alpha_sigma(3) - 4.0 * std::f64::consts::PI / 15.0).abs() < 1e-14);
    }

    #[test]
    fn moment_check_matches_constant() {
        let r1 = kernel_moment_check(1, 0.1, 24).unwrap();
        assert!(r1.worst_rel_error < 1e-6, "{}", r1.worst_rel_error);
        let r2 = kernel_moment_check(2, 0.2, 24).unwrap();
        assert!(r2.worst_rel_error < 1e-5, "{}", r2.worst_rel_error);
        assert!(r2.x_spread < 1e-12, "{}", r2.x_spread);
        let r3 = kernel_moment_check(3, 0.2, 16).unwrap();
        assert!(r3.worst_rel_error < 1e-5, "{}", r3.worst_rel_error);
    }

    #[test]
    fn config_validation_rejects_bad_beta() {
        let mut cfg = ExperimentConfig {
            d: 2,
            n_list: vec![50],
            eps_rule: EpsRule { c: 0.8, beta: 0.25 },
            theta: "logarithmic".into(),
            s: 0.02,
            t_steps: 16,
            pairs: 1,
            seed: 1,
        };
        assert!(cfg.validate().is_ok());
        cfg.eps_rule.beta = 0.6; // >= 1/d
        assert!(cfg.validate().is_err());
        cfg.eps_rule.beta = -0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn balanced_grid_resolution() {
        assert_eq!(pick_kappa(100, 1, 16).unwrap(), 1600);
        let k = pick_kappa(100, 2, 16).unwrap();
        assert!(k * k >= 1600);
        assert_eq!((k * k) % 100, 0);
        let k = pick_kappa(50, 2, 16).unwrap();
        assert_eq!((k * k) % 50, 0);
    }

    #[test]
    fn diameter_fit_anchors_on_two_points() {
        let theta = parse_theta("arithmetic").unwrap();
        let table = run_diameter_study(&[2, 4], &theta).unwrap();
        // the N = 2 row reproduces the closed-form two-point distance
        let oracle = crate::discrete::two_point_oracle(&theta, 1e-10).unwrap();
        let row = &table.rows[0];
        assert!(
            (row.estimate - oracle).abs() < 0.02 * oracle,
            "{} vs {oracle}",
            row.estimate
        );
        assert!(table.coefficient > 0.0);
    }

    #[test]
    fn convergence_smoke_run_is_reproducible() {
        let cfg = ExperimentConfig {
            d: 1,
            n_list: vec![24],
            eps_rule: EpsRule { c: 0.8, beta: 1.0 / 3.0 - 1e-9 },
            theta: "logarithmic".into(),
            s: 0.05,
            t_steps: 8,
            pairs: 2,
            seed: 7,
        };
        let a = run_convergence(&cfg).unwrap();
        let b = run_convergence(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.summaries.len(), 1);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.w_discrete, y.w_discrete);
            assert_eq!(x.w_continuum, y.w_continuum);
        }
        let s = &a.summaries[0];
        assert!(s.lambda_n > 0.0);
        assert!(s.delta_n > 0.0);
        assert!(s.diam_est > 0.0);
        for r in &a.rows {
            assert!(s.sup_distortion >= r.scaled_abs_error - 1e-15 || !r.converged);
        }
    }

    #[test]
    fn convergence_with_no_pairs_keeps_infrastructure() {
        let cfg = ExperimentConfig {
            d: 1,
            n_list: vec![20],
            eps_rule: EpsRule { c: 0.9, beta: 0.3 },
            theta: "arithmetic".into(),
            s: 0.05,
            t_steps: 8,
            pairs: 0,
            seed: 3,
        };
        let rep = run_convergence(&cfg).unwrap();
        assert!(rep.rows.is_empty());
        let s = &rep.summaries[0];
        assert!(s.delta_n > 0.0 && s.lambda_n > 0.0 && s.eps_n > 0.0 && s.diam_est > 0.0);
    }

    #[test]
    fn eigen_study_is_deterministic() {
        let cfg = ExperimentConfig {
            d: 1,
            n_list: vec![30, 60],
            eps_rule: EpsRule { c: 0.9, beta: 0.3 },
            theta: "arithmetic".into(),
            s: 0.05,
            t_steps: 8,
            pairs: 0,
            seed: 5,
        };
        let a = run_eigen_study(&cfg).unwrap();
        let b = run_eigen_study(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lambda, y.lambda);
            assert!(x.lambda > 0.0);
        }
    }
}
