//! The complete graph `K_N` as an abstract transport space: constant weight
//! `w == 1/2` on every pair, uniform node measure, `eps = 1`. This covers
//! the symmetric two-point space (`N = 2`), the diameter growth study
//! `diam(P(K_N)) <~ sqrt(log N)`, and the entropy functional `H_{N,f}`.
//!
//! The weight convention matches the Markov-chain transport metric for the
//! kernel `Q(x, y) = 1/N`: with node measure `gamma = 1/N`, the chain's
//! edge coefficient `Q/2` equals `w * gamma` exactly when `w = 1/2`. Using
//! `w = 1/N` instead would inflate every distance by `sqrt(N/2)` under this
//! crate's action normalization and destroy the `sqrt(log N)` diameter
//! growth; at `N = 2` the two conventions coincide.

use super::{solver, DiscreteDensity};
use crate::error::{GraphotError, Result};
use crate::graph::GeometricGraph;
use crate::interp::InterpolationFn;
use crate::torus::regular_grid;

/// `K_N` with `w(i,j) = 1/2` for all pairs (diagonal included but inert),
/// `eps = 1`. Node positions are a placeholder 1-D grid; only the weights
/// matter for the abstract calculus.
pub fn complete_graph(n: usize) -> Result<GeometricGraph> {
    if n < 2 {
        return Err(GraphotError::InvalidParameter(
            "complete graph needs n >= 2".into(),
        ));
    }
    let cloud = regular_grid(n, 1)?;
    let w = 0.5;
    let mut weights = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            weights.push((i, j, w));
        }
    }
    GeometricGraph::from_weights(cloud, 1.0, weights, w)
}

/// Exact Dirac-to-Dirac distance on the symmetric two-point space
/// (`K_2`: weight 1/2, node measure 1/2 each, `eps = 1`).
///
/// Derivation from the action definition on this graph: write the density
/// path as `rho(t) = (1 + gamma, 1 - gamma)` with `gamma: -1 -> 1` and the
/// single antisymmetric flux value `v`. Then `div v = (2 w / (n eps)) v =
/// v/2` at node 1, so the continuity equation gives `v = -2 gamma'`, and the
/// action is `A = (2 w / n^2) v^2 / theta = gamma'^2 / theta(1+gamma,
/// 1-gamma)`. Minimizing `\int_0^1 A dt` over reparametrizations
/// (Cauchy–Schwarz) yields
///
/// ```text
/// W = \int_{-1}^{1} dgamma / sqrt(theta(1+gamma, 1-gamma)) = sqrt(2) C_theta ,
/// ```
///
/// the last equality by `gamma = 2t - 1` and homogeneity. Cross-validated
/// against `solve_wn` at `T in {64, 128}` in the test suite.
pub fn two_point_oracle(theta: &InterpolationFn, quad_tol: f64) -> Result<f64> {
    match theta.c_theta(quad_tol) {
        Ok(c) => Ok(std::f64::consts::SQRT_2 * c),
        Err(GraphotError::CThetaInfinite) => Err(GraphotError::DistanceInfinite(
            "C_theta diverges, so the two-point distance is infinite".into(),
        )),
        Err(e) => Err(e),
    }
}

/// Upper estimate of `diam(P(K_N))`: by symmetry it suffices to solve one
/// Dirac-to-uniform and one Dirac-to-Dirac problem and take the larger value.
pub fn complete_graph_diameter(n: usize, theta: &InterpolationFn, tol: f64) -> Result<f64> {
    let g = complete_graph(n)?;
    let dirac0 = DiscreteDensity::dirac(n, 0);
    let dirac1 = DiscreteDensity::dirac(n, 1);
    let uniform = DiscreteDensity::uniform(n);
    let t_steps = 32;
    let du = solver::solve_wn(&g, theta, &dirac0, &uniform, t_steps, tol)?;
    let dd = solver::solve_wn(&g, theta, &dirac0, &dirac1, t_steps, tol)?;
    Ok(du.distance_upper.max(dd.distance_upper))
}

/// The entropy `H_{N,f}(rho) = (1/N) sum f(rho(x))` with `f(r) = r log r`
/// (and `f(0) = 0`).
pub fn entropy_hnf(rho: &DiscreteDensity) -> f64 {
    let n = rho.len() as f64;
    rho.values()
        .iter()
        .map(|&r| if r > 0.0 { r * r.ln() } else { 0.0 })
        .sum::<f64>()
        / n
}
