//! Balanced assignment of a fine quadrature grid to a point cloud: the
//! bottleneck-optimal partition into equal-mass cells, the induced estimate
//! of the infinity-transport distance between the cloud's empirical measure
//! and the uniform measure, and the projection maps between grid densities
//! and discrete densities built on those cells.

use crate::continuum::{AtomicMeasure, GridDensity};
use crate::discrete::DiscreteDensity;
use crate::error::{GraphotError, Result};
use crate::torus::{regular_grid, torus_distance, PointCloud, TorusPoint};

/// Balanced partition of the `kappa^d` quadrature grid into `n` cells of
/// exactly `M/n` grid points each, one cell per cloud point.
#[derive(Debug, Clone)]
pub struct PartitionMap {
    kappa: usize,
    dim: usize,
    n: usize,
    /// `owners[g]` is the cloud point owning grid point `g` (row-major).
    owners: Vec<u32>,
    /// Maximal distance from a grid point to its owner.
    cell_radius: f64,
}

impl PartitionMap {
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_points(&self) -> usize {
        self.owners.len()
    }

    pub fn owner(&self, g: usize) -> usize {
        self.owners[g] as usize
    }

    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    /// Half-diagonal of one quadrature cell: the distance estimate below
    /// which the grid cannot resolve the true infinity-transport value.
    pub fn grid_spacing(&self) -> f64 {
        (self.dim as f64).sqrt() / (2.0 * self.kappa as f64)
    }

    /// Grid points owned by cloud point `i`, in grid order.
    pub fn cell(&self, i: usize) -> Vec<usize> {
        self.owners
            .iter()
            .enumerate()
            .filter(|(_, &o)| o as usize == i)
            .map(|(g, _)| g)
            .collect()
    }
}

/// Estimates the infinity-transport distance between the uniform measure and
/// the cloud's empirical measure by a balanced bottleneck assignment of an
/// `M`-point regular grid (`M` a multiple of `n` and a perfect `d`-th
/// power). The returned distance is exact for the grid quadrature; the true
/// value differs by at most the grid spacing reported in the partition.
pub fn estimate_delta_n(cloud: &PointCloud, m_points: usize) -> Result<(f64, PartitionMap)> {
    let n = cloud.len();
    let d = cloud.dim();
    if n == 0 {
        return Err(GraphotError::InvalidParameter("empty cloud".into()));
    }
    if m_points % n != 0 {
        return Err(GraphotError::InvalidParameter(format!(
            "grid size {m_points} must be a multiple of n = {n}"
        )));
    }
    let kappa = (m_points as f64).powf(1.0 / d as f64).round() as usize;
    if kappa.pow(d as u32) != m_points {
        return Err(GraphotError::InvalidParameter(format!(
            "grid size {m_points} is not a perfect power for dimension {d}"
        )));
    }
    let grid = regular_grid(kappa, d)?;
    let cap = m_points / n;
    let mut dist = vec![0.0f64; m_points * n];
    for g in 0..m_points {
        for i in 0..n {
            dist[g * n + i] = torus_distance(grid.point(g), cloud.point(i))?;
        }
    }
    let mut levels = dist.clone();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if balanced_assignment(m_points, n, cap, &dist, levels[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let delta = levels[lo];
    let owners = balanced_assignment(m_points, n, cap, &dist, delta).ok_or_else(|| {
        GraphotError::NoConvergence("balanced assignment threshold search failed".into())
    })?;
    let cell_radius = owners
        .iter()
        .enumerate()
        .map(|(g, &i)| dist[g * n + i as usize])
        .fold(0.0f64, f64::max);
    Ok((
        delta,
        PartitionMap {
            kappa,
            dim: d,
            n,
            owners,
            cell_radius,
        },
    ))
}

/// Feasibility test and assignment extraction for one threshold: Dinic
/// max-flow on source -> grid (capacity 1) -> cloud (distance within
/// threshold) -> sink (capacity M/n). Returns the owner per grid point when
/// the flow saturates all grid points.
fn balanced_assignment(
    m: usize,
    n: usize,
    cap: usize,
    dist: &[f64],
    threshold: f64,
) -> Option<Vec<u32>> {
    let thr = threshold + 1e-15;
    let nv = m + n + 2;
    let source = 0usize;
    let sink = nv - 1;
    let grid_node = |g: usize| 1 + g;
    let cloud_node = |i: usize| 1 + m + i;

    // adjacency as edge list with paired reverse edges
    let mut head: Vec<Vec<usize>> = vec![Vec::new(); nv];
    let mut to: Vec<usize> = Vec::new();
    let mut cap_e: Vec<i64> = Vec::new();
    let add_edge = |head: &mut Vec<Vec<usize>>,
                        to: &mut Vec<usize>,
                        cap_e: &mut Vec<i64>,
                        u: usize,
                        v: usize,
                        c: i64| {
        head[u].push(to.len());
        to.push(v);
        cap_e.push(c);
        head[v].push(to.len());
        to.push(u);
        cap_e.push(0);
    };
    for g in 0..m {
        add_edge(&mut head, &mut to, &mut cap_e, source, grid_node(g), 1);
    }
    for g in 0..m {
        for i in 0..n {
            if dist[g * n + i] <= thr {
                add_edge(&mut head, &mut to, &mut cap_e, grid_node(g), cloud_node(i), 1);
            }
        }
    }
    for i in 0..n {
        add_edge(&mut head, &mut to, &mut cap_e, cloud_node(i), sink, cap as i64);
    }

    let mut flow = 0i64;
    loop {
        // BFS level graph
        let mut level = vec![usize::MAX; nv];
        level[source] = 0;
        let mut queue = vec![source];
        let mut qi = 0;
        while qi < queue.len() {
            let u = queue[qi];
            qi += 1;
            for &e in &head[u] {
                if cap_e[e] > 0 && level[to[e]] == usize::MAX {
                    level[to[e]] = level[u] + 1;
                    queue.push(to[e]);
                }
            }
        }
        if level[sink] == usize::MAX {
            break;
        }
        // iterative DFS blocking flow with per-node arc cursors
        let mut cursor = vec![0usize; nv];
        loop {
            // find one augmenting path in the level graph
            let mut path: Vec<usize> = Vec::new();
            let mut u = source;
            let found = loop {
                if u == sink {
                    break true;
                }
                let mut advanced = false;
                while cursor[u] < head[u].len() {
                    let e = head[u][cursor[u]];
                    if cap_e[e] > 0 && level[to[e]] == level[u] + 1 {
                        path.push(e);
                        u = to[e];
                        advanced = true;
                        break;
                    }
                    cursor[u] += 1;
                }
                if advanced {
                    continue;
                }
                if u == source {
                    break false;
                }
                // retreat: dead end, prune this vertex from the level graph
                level[u] = usize::MAX;
                let e = path.pop().unwrap();
                u = to[e ^ 1];
                cursor[u] += 1;
            };
            if !found {
                break;
            }
            let push = path.iter().map(|&e| cap_e[e]).min().unwrap();
            for &e in &path {
                cap_e[e] -= push;
                cap_e[e ^ 1] += push;
            }
            flow += push;
        }
        if flow == m as i64 {
            break;
        }
    }
    if flow != m as i64 {
        return None;
    }
    // read the assignment off the saturated grid -> cloud edges
    let mut owners = vec![u32::MAX; m];
    for g in 0..m {
        for &e in &head[grid_node(g)] {
            let v = to[e];
            // forward edges have even index; spent capacity marks the match
            if e % 2 == 0 && v >= 1 + m && v < 1 + m + n && cap_e[e] == 0 {
                owners[g] = (v - 1 - m) as u32;
                break;
            }
        }
    }
    if owners.iter().any(|&o| o == u32::MAX) {
        return None;
    }
    Some(owners)
}

/// Piecewise-constant extension of a discrete density over the partition
/// cells: the grid value at `g` is the density at the owning cloud point.
pub fn pn_project(rho_n: &DiscreteDensity, part: &PartitionMap) -> Result<GridDensity> {
    if rho_n.values().len() != part.n() {
        return Err(GraphotError::SizeMismatch {
            context: "pn_project",
            expected: part.n(),
            got: rho_n.values().len(),
        });
    }
    let values: Vec<f64> = part
        .owners
        .iter()
        .map(|&o| rho_n.values()[o as usize])
        .collect();
    GridDensity::new(part.kappa(), part.dim(), values)
}

/// Discrete density from a grid density: cell masses rescaled by `n`
/// (density relative to the empirical measure).
pub fn qn_project(rho: &GridDensity, part: &PartitionMap) -> Result<DiscreteDensity> {
    if rho.kappa() != part.kappa() || rho.dim() != part.dim() {
        return Err(GraphotError::SizeMismatch {
            context: "qn_project grid",
            expected: part.grid_points(),
            got: rho.values().len(),
        });
    }
    let n = part.n();
    let scale = n as f64 / part.grid_points() as f64;
    let mut out = vec![0.0f64; n];
    for (g, &o) in part.owners.iter().enumerate() {
        out[o as usize] += scale * rho.values()[g];
    }
    DiscreteDensity::new(out)
}

/// Discrete density from an atomic measure: each atom contributes its mass
/// to the cell whose quadrature point is nearest to the atom.
pub fn qn_project_atomic(mu: &AtomicMeasure, part: &PartitionMap) -> Result<DiscreteDensity> {
    if mu.dim() != part.dim() {
        return Err(GraphotError::DimensionMismatch {
            expected: part.dim(),
            got: mu.dim(),
        });
    }
    let n = part.n();
    let mut out = vec![0.0f64; n];
    for (a, &mass) in mu.atoms().iter().zip(mu.masses()) {
        let g = nearest_grid_index(a, part.kappa());
        out[part.owner(g)] += n as f64 * mass;
    }
    DiscreteDensity::new(out)
}

/// Row-major index (last axis fastest) of the grid point nearest to `x`;
/// grid points sit at `(k + 0.5) / kappa` per axis.
fn nearest_grid_index(x: &TorusPoint, kappa: usize) -> usize {
    let mut idx = 0usize;
    for &c in x.coords() {
        let k = (c * kappa as f64 - 0.5).round().rem_euclid(kappa as f64) as usize % kappa;
        idx = idx * kappa + k;
    }
    idx
}
