//! Points and point clouds on the flat torus `T^d = R^d / Z^d` with unit side
//! length. The geodesic distance reduces per coordinate to the representative
//! in `[-1/2, 1/2]`.

use crate::error::{GraphotError, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// A point on the flat torus; coordinates are kept in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Wraps arbitrary real coordinates into the fundamental domain.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(GraphotError::InvalidParameter(
                "torus point needs at least one coordinate".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GraphotError::InvalidParameter(
                "torus point coordinates must be finite".into(),
            ));
        }
        let coords = coords
            .into_iter()
            .map(|c| {
                let r = c.rem_euclid(1.0);
                if r >= 1.0 {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Shortest signed representative of `a - b` on the circle, in `[-1/2, 1/2]`.
pub fn wrap_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(1.0);
    if d > 0.5 {
        d -= 1.0;
    }
    d
}

/// Geodesic distance on the unit torus.
pub fn torus_distance(a: &TorusPoint, b: &TorusPoint) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GraphotError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let mut acc = 0.0;
    for (x, y) in a.coords.iter().zip(&b.coords) {
        let d = wrap_diff(*x, *y);
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// A finite cloud of torus points, all of the same dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    points: Vec<TorusPoint>,
    /// Seed the cloud was sampled from, when applicable.
    pub seed: Option<u64>,
}

impl PointCloud {
    pub fn new(points: Vec<TorusPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(GraphotError::InvalidParameter(
                "point cloud must be non-empty".into(),
            ));
        }
        let dim = points[0].dim();
        for p in &points {
            if p.dim() != dim {
                return Err(GraphotError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        Ok(Self {
            dim,
            points,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &TorusPoint {
        &self.points[i]
    }

    /// Writes `x0,...,x{d-1}` rows, one per point.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        w.write_record(&header)?;
        for p in &self.points {
            w.write_record(p.coords().iter().map(|c| format!("{c:.17}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let coords: std::result::Result<Vec<f64>, _> =
                rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            let coords = coords.map_err(|e| {
                GraphotError::InvalidParameter(format!("bad CSV coordinate: {e}"))
            })?;
            points.push(TorusPoint::new(coords)?);
        }
        Self::new(points)
    }

    pub fn to_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn from_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let cloud: PointCloud = serde_json::from_reader(f)?;
        // re-validate after deserialization
        let mut out = Self::new(cloud.points)?;
        out.seed = cloud.seed;
        Ok(out)
    }
}

/// `n` i.i.d. uniform points on `T^d`, deterministic in `seed`.
pub fn sample_uniform(n: usize, dim: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 || dim == 0 {
        return Err(GraphotError::InvalidParameter(
            "sample_uniform needs n >= 1 and dim >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let coords: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        points.push(TorusPoint::new(coords)?);
    }
    let mut cloud = PointCloud::new(points)?;
    cloud.seed = Some(seed);
    Ok(cloud)
}

/// The regular `kappa^d` grid with spacing `1/kappa`, offset so cells are
/// centered: coordinates `(k + 1/2) / kappa`. Row-major order, last axis
/// fastest.
pub fn regular_grid(kappa: usize, dim: usize) -> Result<PointCloud> {
    if kappa == 0 || dim == 0 {
        return Err(GraphotError::InvalidParameter(
            "regular_grid needs kappa >= 1 and dim >= 1".into(),
        ));
    }
    let total = kappa.pow(dim as u32);
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    loop {
        let coords: Vec<f64> = idx.iter().map(|&k| (k as f64 + 0.5) / kappa as f64).collect();
        points.push(TorusPoint::new(coords)?);
        // increment multi-index, last axis fastest
        let mut axis = dim;
        loop {
            if axis == 0 {
                return PointCloud::new(points);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < kappa {
                break;
            }
            idx[axis] = 0;
        }
    }
}
