//! Heat smoothing of atomic measures with the wrapped Gaussian kernel, and
//! its composition with the cell projection onto discrete densities.

use crate::continuum::partition::{qn_project, PartitionMap};
use crate::continuum::{AtomicMeasure, GridDensity};
use crate::discrete::DiscreteDensity;
use crate::error::{GraphotError, Result};

/// Lattice truncation radius: beyond `K` the wrapped-sum terms fall below
/// `exp(-(K - 1/2)^2 / 4s)`, so `K = ceil(0.5 + sqrt(4 s ln 1e16)) + 1`
/// keeps the omitted tail under 1e-12 of the kernel mass for any `s`.
fn auto_truncation(s: f64) -> usize {
    (0.5 + (4.0 * s * 1e16f64.ln()).sqrt()).ceil() as usize + 1
}

/// Smooths an atomic measure by the heat semigroup at time `s`, evaluated on
/// the `kappa^d` quadrature grid. The wrapped Gaussian factorizes over axes,
/// so the kernel is assembled from one-dimensional wrapped sums truncated at
/// `k_trunc` lattice shifts (chosen automatically when `None`). The grid
/// mean is renormalized to exactly 1 after quadrature.
pub fn heat_smooth(
    mu: &AtomicMeasure,
    s: f64,
    kappa: usize,
    k_trunc: Option<usize>,
) -> Result<GridDensity> {
    if s <= 0.0 {
        return Err(GraphotError::InvalidParameter(format!(
            "heat parameter must be positive, got {s}"
        )));
    }
    if kappa == 0 {
        return Err(GraphotError::InvalidParameter("grid resolution 0".into()));
    }
    let d = mu.dim();
    let k_max = k_trunc.unwrap_or_else(|| auto_truncation(s)) as i64;
    let m = kappa.pow(d as u32);
    let norm_1d = 1.0 / (4.0 * std::f64::consts::PI * s).sqrt();
    let wrapped = |u: f64| -> f64 {
        let mut acc = 0.0;
        for k in -k_max..=k_max {
            let v = u + k as f64;
            acc += (-v * v / (4.0 * s)).exp();
        }
        norm_1d * acc
    };
    let mut values = vec![0.0f64; m];
    // per-atom, per-axis 1-D kernel rows against the grid coordinates
    let coords: Vec<f64> = (0..kappa).map(|k| (k as f64 + 0.5) / kappa as f64).collect();
    for (atom, &mass) in mu.atoms().iter().zip(mu.masses()) {
        let rows: Vec<Vec<f64>> = atom
            .coords()
            .iter()
            .map(|&a| coords.iter().map(|&c| wrapped(c - a)).collect())
            .collect();
        for (g, v) in values.iter_mut().enumerate() {
            let mut prod = mass;
            let mut rest = g;
            // row-major with the last axis fastest
            for axis in (0..d).rev() {
                prod *= rows[axis][rest % kappa];
                rest /= kappa;
            }
            *v += prod;
        }
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    values.iter_mut().for_each(|v| *v /= mean);
    GridDensity::new(kappa, d, values)
}

/// Maps an atomic measure to a discrete density on the cloud underlying the
/// partition: heat smoothing at time `s` followed by the cell projection.
pub fn f_map(mu: &AtomicMeasure, s: f64, part: &PartitionMap) -> Result<DiscreteDensity> {
    let rho = heat_smooth(mu, s, part.kappa(), None)?;
    qn_project(&rho, part)
}
