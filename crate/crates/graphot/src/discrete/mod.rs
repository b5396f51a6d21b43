//! The discrete Benamou–Brenier problem on a graph: the action functional
//!
//! ```text
//! A(rho, V) = (1/n^2) sum_{i,j} V(x_i,x_j)^2 / theta(rho_i, rho_j) * w(i,j)
//! ```
//!
//! (for geometric graphs `w = eps^{-d} eta`, recovering the
//! `1/(n^2 eps^d)` normalization), the discrete continuity equation
//! `(rho_{k+1} - rho_k)/dt + div V_k = 0` on a uniform time grid, and the
//! distance `W_n = inf sqrt(integral of A dt)` over continuity paths.
//!
//! Conventions: `0^2/0 = 0`; nonzero flux over vanishing `theta` makes the
//! action `+inf`. Densities are taken w.r.t. the empirical measure, i.e.
//! `(1/n) sum rho = 1` and `rho == 1` is the uniform measure.

mod complete;
mod solver;

pub use complete::{complete_graph, complete_graph_diameter, entropy_hnf, two_point_oracle};
pub use solver::{solve_wn, solve_wn_opts, SolveOptions};

use crate::error::{GraphotError, Result};
use crate::graph::{divergence, EdgeField, GeometricGraph};
use crate::interp::InterpolationFn;
use serde::{Deserialize, Serialize};

/// A probability density w.r.t. the empirical measure: nonnegative with
/// `(1/n) sum values = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDensity {
    values: Vec<f64>,
}

impl DiscreteDensity {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(GraphotError::InvalidParameter(
                "density needs at least one node".into(),
            ));
        }
        if values.iter().any(|&v| v < -1e-9 || !v.is_finite()) {
            return Err(GraphotError::InvalidParameter(
                "density values must be nonnegative".into(),
            ));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if (mean - 1.0).abs() > 1e-9 {
            return Err(GraphotError::InvalidParameter(format!(
                "density mean must be 1, got {mean}"
            )));
        }
        // clamp the tolerated tiny negatives
        let values = values.into_iter().map(|v| v.max(0.0)).collect();
        Ok(Self { values })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
        }
    }

    /// All mass on node `i`: value `n` there, zero elsewhere.
    pub fn dirac(n: usize, i: usize) -> Self {
        let mut values = vec![0.0; n];
        values[i] = n as f64;
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(1-a) rho + a`, the mixture with the uniform density.
    pub fn mix_uniform(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| (1.0 - a) * v + a).collect(),
        }
    }
}

/// A time-discrete solution of the continuity equation: `T+1` density slices
/// on the uniform grid `t_k = k/T` and `T` antisymmetric interval fluxes.
#[derive(Debug, Clone)]
pub struct TransportPath {
    pub densities: Vec<DiscreteDensity>,
    pub fluxes: Vec<EdgeField>,
}

impl TransportPath {
    pub fn t_steps(&self) -> usize {
        self.fluxes.len()
    }
}

/// Solver output: `distance_upper = sqrt(action)` is a certified upper bound
/// on `W_n` (up to the reported feasibility residual); `gap_estimate` is the
/// recent-improvement stagnation proxy on the distance scale.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub distance_upper: f64,
    pub action: f64,
    pub feas_residual: f64,
    pub gap_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub t_steps: usize,
    pub theta: String,
    pub path: TransportPath,
    /// Objective value after every accepted iteration (non-increasing).
    pub objective_history: Vec<f64>,
}

/// The action `A(rho, V)`; `+inf` when nonzero flux meets vanishing `theta`.
pub fn action(
    g: &GeometricGraph,
    theta: &InterpolationFn,
    rho: &DiscreteDensity,
    v: &EdgeField,
) -> Result<f64> {
    if rho.len() != g.n() {
        return Err(GraphotError::SizeMismatch {
            context: "action density",
            expected: g.n(),
            got: rho.len(),
        });
    }
    if v.len() != g.edge_count() {
        return Err(GraphotError::SizeMismatch {
            context: "action flux support",
            expected: g.edge_count(),
            got: v.len(),
        });
    }
    let n = g.n() as f64;
    let r = rho.values();
    let mut acc = 0.0;
    for (e, edge) in g.edges().iter().enumerate() {
        let vf = v.value(e, 1.0);
        let vb = v.value(e, -1.0);
        let sq = vf * vf + vb * vb;
        if sq == 0.0 {
            continue; // 0^2 / theta := 0, including 0/0
        }
        let th = theta.eval(r[edge.i as usize], r[edge.j as usize])?;
        if th <= 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += sq * edge.w / th;
    }
    Ok(acc / (n * n))
}

/// Max over nodes and intervals of `|(rho_{k+1}-rho_k)/dt + div V_k|`.
pub fn continuity_residual(g: &GeometricGraph, path: &TransportPath) -> Result<f64> {
    let t = path.t_steps();
    if path.densities.len() != t + 1 {
        return Err(GraphotError::SizeMismatch {
            context: "path density slices",
            expected: t + 1,
            got: path.densities.len(),
        });
    }
    let dt = 1.0 / t as f64;
    let mut worst: f64 = 0.0;
    for k in 0..t {
        let div = divergence(g, &path.fluxes[k])?;
        let a = path.densities[k].values();
        let b = path.densities[k + 1].values();
        for i in 0..g.n() {
            worst = worst.max(((b[i] - a[i]) / dt + div[i]).abs());
        }
    }
    Ok(worst)
}

/// Linear-interpolation start: `rho_k = (1-t_k) rho0 + t_k rho1` with the
/// constant minimal-Dirichlet flux `V = D^T phi`, where `phi` solves the
/// weighted Laplacian system on the mean-zero subspace so that the
/// continuity residual is at solver precision (≤ 1e-10). The action is
/// finite whenever both endpoints are strictly positive.
pub fn initial_path(
    g: &GeometricGraph,
    _theta: &InterpolationFn,
    rho0: &DiscreteDensity,
    rho1: &DiscreteDensity,
    t_steps: usize,
) -> Result<TransportPath> {
    g.require_connected()?;
    if rho0.len() != g.n() || rho1.len() != g.n() {
        return Err(GraphotError::SizeMismatch {
            context: "initial_path endpoints",
            expected: g.n(),
            got: rho0.len().max(rho1.len()),
        });
    }
    if t_steps == 0 {
        return Err(GraphotError::InvalidParameter(
            "time grid needs at least one interval".into(),
        ));
    }
    // div v = rho0 - rho1 makes every interval of the linear path feasible
    let rhs: Vec<f64> = rho0
        .values()
        .iter()
        .zip(rho1.values())
        .map(|(a, b)| a - b)
        .collect();
    let v = solver::potential_flux(g, &rhs, 1e-13)?;
    let mut densities = Vec::with_capacity(t_steps + 1);
    for k in 0..=t_steps {
        let t = k as f64 / t_steps as f64;
        let vals: Vec<f64> = rho0
            .values()
            .iter()
            .zip(rho1.values())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        densities.push(DiscreteDensity::new(vals)?);
    }
    let fluxes = (0..t_steps)
        .map(|_| EdgeField::antisymmetric(v.clone()))
        .collect();
    Ok(TransportPath { densities, fluxes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::torus::sample_uniform;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_density(n: usize, seed: u64) -> DiscreteDensity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..2.0)).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        vals.iter_mut().for_each(|v| *v /= mean);
        DiscreteDensity::new(vals).unwrap()
    }

    #[test]
    fn zero_flux_zero_action() {
        let cloud = sample_uniform(30, 1, 1).unwrap();
        let g = build_graph(&cloud, 0.25).unwrap();
        let rho = DiscreteDensity::dirac(30, 3); // zeros meet zero flux: 0/0 = 0
        let v = EdgeField::zero(&g);
        let a = action(&g, &InterpolationFn::Logarithmic, &rho, &v).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn uniform_density_action_is_weighted_flux_norm() {
        let cloud = sample_uniform(30, 1, 2).unwrap();
        let g = build_graph(&cloud, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = EdgeField::antisymmetric(vals.clone());
        let a = action(&g, &InterpolationFn::Arithmetic, &DiscreteDensity::uniform(30), &v)
            .unwrap();
        // theta(1,1) = 1, so the action is (1/(n^2 eps^d)) sum over ordered pairs of V^2 eta
        let n = 30.0f64;
        let expected: f64 = g
            .edges()
            .iter()
            .zip(&vals)
            .map(|(e, v)| 2.0 * v * v * e.w)
            .sum::<f64>()
            / (n * n);
        assert!((a - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn infinite_action_sentinel() {
        let cloud = sample_uniform(30, 1, 3).unwrap();
        let g = build_graph(&cloud, 0.25).unwrap();
        let rho = DiscreteDensity::dirac(30, 0);
        let mut vals = vec![0.0; g.edge_count()];
        // find an edge whose both endpoints have zero density
        let e = g
            .edges()
            .iter()
            .position(|e| e.i != 0 && e.j != 0)
            .unwrap();
        vals[e] = 1.0;
        let v = EdgeField::antisymmetric(vals);
        let a = action(&g, &InterpolationFn::Logarithmic, &rho, &v).unwrap();
        assert!(a.is_infinite());
    }

    #[test]
    fn action_scaling_toward_uniform() {
        // A((1-a) rho + a, (1-a) V) <= (1-a) A(rho, V)
        let cloud = sample_uniform(30, 1, 4).unwrap();
        let g = build_graph(&cloud, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..50 {
            let rho = random_density(30, 100 + trial);
            let vals: Vec<f64> =
                (0..g.edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = EdgeField::antisymmetric(vals.clone());
            for theta in [InterpolationFn::Arithmetic, InterpolationFn::Logarithmic] {
                let base = action(&g, &theta, &rho, &v).unwrap();
                for a in [0.1, 0.3, 0.5, 0.9] {
                    let mixed = rho.mix_uniform(a);
                    let scaled =
                        EdgeField::antisymmetric(vals.iter().map(|x| (1.0 - a) * x).collect());
                    let lhs = action(&g, &theta, &mixed, &scaled).unwrap();
                    assert!(lhs <= (1.0 - a) * base + 1e-12);
                }
            }
        }
    }

    #[test]
    fn initial_path_contract() {
        let cloud = sample_uniform(40, 1, 7).unwrap();
        let g = build_graph(&cloud, 0.25).unwrap();
        let rho0 = random_density(40, 8);
        let rho1 = random_density(40, 9);
        let theta = InterpolationFn::Logarithmic;
        let path = initial_path(&g, &theta, &rho0, &rho1, 16).unwrap();
        assert!(continuity_residual(&g, &path).unwrap() <= 1e-10);
        // constant mass at every slice
        for rho in &path.densities {
            let mean = rho.values().iter().sum::<f64>() / 40.0;
            assert!((mean - 1.0).abs() < 1e-12);
        }
        // strictly positive endpoints give a finite total action
        for k in 0..path.t_steps() {
            let a = action(&g, &theta, &path.densities[k], &path.fluxes[k]).unwrap();
            assert!(a.is_finite());
        }
    }

    #[test]
    fn initial_path_identical_endpoints() {
        let cloud = sample_uniform(30, 1, 10).unwrap();
        let g = build_graph(&cloud, 0.25).unwrap();
        let rho = random_density(30, 11);
        let path =
            initial_path(&g, &InterpolationFn::Arithmetic, &rho, &rho, 8).unwrap();
        for k in 0..8 {
            let a = action(&g, &InterpolationFn::Arithmetic, &path.densities[k], &path.fluxes[k])
                .unwrap();
            assert!(a.abs() < 1e-20);
        }
    }

    #[test]
    fn corrupted_flux_shows_in_residual() {
        let cloud = sample_uniform(30, 1, 12).unwrap();
        let g = build_graph(&cloud, 0.25).unwrap();
        let rho0 = random_density(30, 13);
        let rho1 = random_density(30, 14);
        let mut path =
            initial_path(&g, &InterpolationFn::Arithmetic, &rho0, &rho1, 8).unwrap();
        let mut vals = path.fluxes[3].forward().to_vec();
        let bump = 0.37;
        vals[0] += bump;
        path.fluxes[3] = EdgeField::antisymmetric(vals);
        // one perturbed antisymmetric edge value changes div at its endpoints
        // by 2 * w * bump / (n eps)
        let e = g.edges()[0];
        let expected = 2.0 * e.w * bump / (30.0 * g.eps());
        let r = continuity_residual(&g, &path).unwrap();
        assert!((r - expected).abs() < 1e-9, "{r} vs {expected}");
    }

    #[test]
    fn density_validation() {
        assert!(DiscreteDensity::new(vec![2.0, 0.5]).is_err()); // mean 1.25
        assert!(DiscreteDensity::new(vec![-0.5, 2.5]).is_err());
        assert!(DiscreteDensity::new(vec![1.5, 0.5]).is_ok());
        let d = DiscreteDensity::dirac(4, 2);
        assert_eq!(d.values(), &[0.0, 0.0, 4.0, 0.0]);
    }
}
