//! Continuum-side reference stack: exact Wasserstein distances between
//! atomic measures under the squared torus cost, bottleneck (infinity)
//! matchings, heat smoothing with the wrapped Gaussian kernel, and the
//! projection maps between continuum measures and discrete densities.

mod heat;
mod partition;
mod transport;

pub use heat::{f_map, heat_smooth};
pub use partition::{estimate_delta_n, pn_project, qn_project, qn_project_atomic, PartitionMap};
pub use transport::{bottleneck_dinf, wasserstein2, BottleneckMatching};

use std::fs::File;
use std::path::Path;

use crate::error::{GraphotError, Result};
use crate::torus::{regular_grid, TorusPoint};

/// Finitely supported probability measure on the torus.
#[derive(Debug, Clone)]
pub struct AtomicMeasure {
    atoms: Vec<TorusPoint>,
    masses: Vec<f64>,
}

impl AtomicMeasure {
    /// Masses must be nonnegative and sum to 1 within `1e-12`.
    pub fn new(atoms: Vec<TorusPoint>, masses: Vec<f64>) -> Result<Self> {
        if atoms.len() != masses.len() {
            return Err(GraphotError::SizeMismatch {
                context: "atomic measure".into(),
                expected: atoms.len(),
                got: masses.len(),
            });
        }
        if atoms.is_empty() {
            return Err(GraphotError::InvalidParameter(
                "atomic measure needs at least one atom".into(),
            ));
        }
        let dim = atoms[0].dim();
        if let Some(bad) = atoms.iter().find(|a| a.dim() != dim) {
            return Err(GraphotError::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        if masses.iter().any(|&m| m < 0.0) {
            return Err(GraphotError::InvalidParameter(
                "atom masses must be nonnegative".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GraphotError::UnbalancedMasses {
                lhs: total,
                rhs: 1.0,
            });
        }
        Ok(Self { atoms, masses })
    }

    /// Point mass at `x`.
    pub fn dirac(x: TorusPoint) -> Self {
        Self {
            atoms: vec![x],
            masses: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[TorusPoint] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    /// CSV with header `x0,..,x{d-1},mass`, one atom per row.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        header.push("mass".into());
        w.write_record(&header)?;
        for (a, m) in self.atoms.iter().zip(&self.masses) {
            let mut row: Vec<String> = a.coords().iter().map(|c| format!("{c:.17}")).collect();
            row.push(format!("{m:.17}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(File::open(path)?);
        let d = r.headers()?.len().saturating_sub(1);
        if d == 0 {
            return Err(GraphotError::InvalidParameter(
                "measure CSV needs coordinate columns and a mass column".into(),
            ));
        }
        let mut atoms = Vec::new();
        let mut masses = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| GraphotError::InvalidParameter(format!("bad float: {e}")))
                })
                .collect::<Result<_>>()?;
            atoms.push(TorusPoint::new(vals[..d].to_vec())?);
            masses.push(vals[d]);
        }
        Self::new(atoms, masses)
    }
}

/// Density on the regular `kappa^d` grid quadrature: nonnegative values
/// averaging to 1, so the represented measure has total mass 1.
#[derive(Debug, Clone)]
pub struct GridDensity {
    kappa: usize,
    dim: usize,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(kappa: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        let m = kappa.pow(dim as u32);
        if values.len() != m {
            return Err(GraphotError::SizeMismatch {
                context: "grid density".into(),
                expected: m,
                got: values.len(),
            });
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(GraphotError::InvalidParameter(
                "grid density must be nonnegative".into(),
            ));
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        if (mean - 1.0).abs() > 1e-12 {
            return Err(GraphotError::InvalidParameter(format!(
                "grid density mean must be 1, got {mean}"
            )));
        }
        Ok(Self { kappa, dim, values })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One atom per grid cell at the cell center, mass `value / kappa^d`.
    pub fn to_atomic(&self) -> Result<AtomicMeasure> {
        let grid = regular_grid(self.kappa, self.dim)?;
        // renormalize away quadrature roundoff so the mass invariant is exact
        let total: f64 = self.values.iter().sum();
        let masses: Vec<f64> = self.values.iter().map(|v| v / total).collect();
        AtomicMeasure::new(grid.points().to_vec(), masses)
    }

    /// Row-major CSV with a `kappa,d` header line, one value per row.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .from_writer(File::create(path)?);
        w.write_record(["kappa", "d"])?;
        w.write_record([self.kappa.to_string(), self.dim.to_string()])?;
        for v in &self.values {
            w.write_record([format!("{v:.17}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(File::open(path)?);
        let mut rows = r.records();
        let shape = rows
            .next()
            .ok_or_else(|| GraphotError::InvalidParameter("empty grid CSV".into()))??;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| GraphotError::InvalidParameter(format!("bad grid shape: {e}")))
        };
        let kappa = parse(&shape[0])?;
        let dim = parse(&shape[1])?;
        let mut values = Vec::new();
        for rec in rows {
            let rec = rec?;
            values.push(rec[0].trim().parse::<f64>().map_err(|e| {
                GraphotError::InvalidParameter(format!("bad grid value: {e}"))
            })?);
        }
        Self::new(kappa, dim, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_measure_validation() {
        let p = TorusPoint::new(vec![0.2]).unwrap();
        let q = TorusPoint::new(vec![0.7]).unwrap();
        assert!(AtomicMeasure::new(vec![p.clone(), q.clone()], vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            AtomicMeasure::new(vec![p.clone(), q.clone()], vec![0.5, 0.6]),
            Err(GraphotError::UnbalancedMasses { .. })
        ));
        assert!(AtomicMeasure::new(vec![p, q], vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn grid_density_validation_and_atomic_mass() {
        let vals = vec![2.0, 0.0, 1.0, 1.0];
        let g = GridDensity::new(4, 1, vals).unwrap();
        let mu = g.to_atomic().unwrap();
        assert!((mu.masses().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((mu.masses()[0] - 0.5).abs() < 1e-15);
        assert!(GridDensity::new(4, 1, vec![1.0; 3]).is_err());
        assert!(GridDensity::new(2, 1, vec![1.5, 1.5]).is_err());
    }

    #[test]
    fn measure_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mu.csv");
        let mu = AtomicMeasure::new(
            vec![
                TorusPoint::new(vec![0.1, 0.9]).unwrap(),
                TorusPoint::new(vec![0.4, 0.2]).unwrap(),
            ],
            vec![0.25, 0.75],
        )
        .unwrap();
        mu.to_csv(&p).unwrap();
        let back = AtomicMeasure::from_csv(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back.masses()[1] - 0.75).abs() < 1e-15);
        assert_eq!(back.atoms()[0].coords(), mu.atoms()[0].coords());
    }

    #[test]
    fn grid_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rho.csv");
        let g = GridDensity::new(3, 1, vec![0.5, 1.5, 1.0]).unwrap();
        g.to_csv(&p).unwrap();
        let back = GridDensity::from_csv(&p).unwrap();
        assert_eq!(back.kappa(), 3);
        assert_eq!(back.dim(), 1);
        assert_eq!(back.values(), g.values());
    }
}
