//! The ε-neighborhood geometric graph over a torus point cloud and its
//! discrete calculus:
//!
//! ```text
//! grad u (x_i, x_j) = (u(x_j) - u(x_i)) / eps
//! div V (x_i)       = 1/(n eps) sum_j (V(x_i,x_j) - V(x_j,x_i)) w(i,j)
//! Lap               = -div o grad
//! ```
//!
//! with `w(i,j) = eps^{-d} eta(|x_i - x_j|/eps)` for the indicator kernel.
//! Inner products use the empirical measures: `<u,v> = (1/n) sum u v` on
//! nodes and `<U,V> = (1/n^2) sum U V w` on ordered pairs. Abstract graphs
//! (explicit symmetric weights, e.g. complete graphs with `w = 1/N`) go
//! through [`GeometricGraph::from_weights`] and share the same formulas.

use crate::error::{GraphotError, Result};
use crate::torus::{torus_distance, PointCloud};
use std::path::Path;

pub type NodeFunction = Vec<f64>;

/// One undirected edge, oriented `i < j` internally.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub w: f64,
}

#[derive(Debug, Clone)]
pub struct GeometricGraph {
    cloud: PointCloud,
    eps: f64,
    edges: Vec<Edge>,
    /// CSR adjacency: for node i, entries `(neighbor, edge index, +1/-1)`
    /// where the sign says whether i is the tail of the stored orientation.
    adj_offsets: Vec<usize>,
    adj: Vec<(u32, u32, f64)>,
    /// Weight carried by the inert self-pairs (i,i).
    diag_weight: f64,
}

/// A function on ordered node pairs supported on the edge set. `forward[e]`
/// is the value on `(i,j)` with `i < j`; `backward[e]` the value on `(j,i)`.
/// Antisymmetric fields store only `forward` (backward is implied `-forward`).
#[derive(Debug, Clone)]
pub struct EdgeField {
    forward: Vec<f64>,
    backward: Option<Vec<f64>>,
}

impl EdgeField {
    pub fn antisymmetric(forward: Vec<f64>) -> Self {
        EdgeField {
            forward,
            backward: None,
        }
    }

    pub fn general(forward: Vec<f64>, backward: Vec<f64>) -> Self {
        assert_eq!(forward.len(), backward.len());
        EdgeField {
            forward,
            backward: Some(backward),
        }
    }

    pub fn zero(g: &GeometricGraph) -> Self {
        EdgeField::antisymmetric(vec![0.0; g.edge_count()])
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.backward.is_none()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Value on the ordered pair running along (`+1`) or against (`-1`) the
    /// stored orientation of edge `e`.
    pub fn value(&self, e: usize, sign: f64) -> f64 {
        match &self.backward {
            None => sign * self.forward[e],
            Some(b) => {
                if sign > 0.0 {
                    self.forward[e]
                } else {
                    b[e]
                }
            }
        }
    }

    pub fn forward(&self) -> &[f64] {
        &self.forward
    }

    /// The antisymmetric part ½(V(i,j) − V(j,i)) as a compact field.
    pub fn antisymmetric_part(&self) -> EdgeField {
        match &self.backward {
            None => self.clone(),
            Some(b) => EdgeField::antisymmetric(
                self.forward
                    .iter()
                    .zip(b)
                    .map(|(f, b)| 0.5 * (f - b))
                    .collect(),
            ),
        }
    }
}

/// Builds the ε-neighborhood graph with indicator-kernel weights `eps^{-d}`.
/// Neighbor search uses a cell list with bucket side ≥ eps; small domains
/// fall back to the all-pairs scan.
pub fn build_graph(cloud: &PointCloud, eps: f64) -> Result<GeometricGraph> {
    if eps <= 0.0 || !eps.is_finite() {
        return Err(GraphotError::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let d = cloud.dim();
    let n = cloud.len();
    let weight = eps.powi(-(d as i32));
    let cells_per_axis = (1.0 / eps).floor().max(1.0) as usize;
    let mut pairs: Vec<(u32, u32)> = Vec::new();

    if cells_per_axis < 4 || n < 64 {
        for i in 0..n {
            for j in (i + 1)..n {
                if torus_distance(cloud.point(i), cloud.point(j))? <= eps {
                    pairs.push((i as u32, j as u32));
                }
            }
        }
    } else {
        let c = cells_per_axis;
        let cell_of = |idx: usize| -> usize {
            let mut acc = 0usize;
            for &x in cloud.point(idx).coords() {
                let k = ((x * c as f64) as usize).min(c - 1);
                acc = acc * c + k;
            }
            acc
        };
        let total_cells = c.pow(d as u32);
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); total_cells];
        for i in 0..n {
            buckets[cell_of(i)].push(i as u32);
        }
        // periodic 3^d neighborhood of each cell, deduplicated
        let mut neighbor_cells = vec![0usize; 0];
        let mut offsets = vec![0i64; d];
        for cell in 0..total_cells {
            neighbor_cells.clear();
            // decode multi-index
            let mut rem = cell;
            let mut mi = vec![0usize; d];
            for axis in (0..d).rev() {
                mi[axis] = rem % c;
                rem /= c;
            }
            offsets.iter_mut().for_each(|o| *o = -1);
            loop {
                let mut acc = 0usize;
                for axis in 0..d {
                    let k = (mi[axis] as i64 + offsets[axis]).rem_euclid(c as i64) as usize;
                    acc = acc * c + k;
                }
                neighbor_cells.push(acc);
                let mut axis = d;
                loop {
                    if axis == 0 {
                        break;
                    }
                    axis -= 1;
                    offsets[axis] += 1;
                    if offsets[axis] <= 1 {
                        break;
                    }
                    offsets[axis] = -1;
                    if axis == 0 {
                        break;
                    }
                }
                if offsets.iter().all(|&o| o == -1) {
                    break;
                }
            }
            neighbor_cells.sort_unstable();
            neighbor_cells.dedup();
            for &i in &buckets[cell] {
                for &nc in &neighbor_cells {
                    for &j in &buckets[nc] {
                        if j <= i {
                            continue;
                        }
                        if torus_distance(cloud.point(i as usize), cloud.point(j as usize))?
                            <= eps
                        {
                            pairs.push((i, j));
                        }
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
    }

    let edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(i, j)| Edge { i, j, w: weight })
        .collect();
    Ok(GeometricGraph::assemble(
        cloud.clone(),
        eps,
        edges,
        weight,
    ))
}

impl GeometricGraph {
    fn assemble(cloud: PointCloud, eps: f64, mut edges: Vec<Edge>, diag_weight: f64) -> Self {
        edges.sort_unstable_by_key(|e| (e.i, e.j));
        let n = cloud.len();
        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.i as usize] += 1;
            degree[e.j as usize] += 1;
        }
        let mut adj_offsets = vec![0usize; n + 1];
        for i in 0..n {
            adj_offsets[i + 1] = adj_offsets[i] + degree[i];
        }
        let mut cursor = adj_offsets.clone();
        let mut adj = vec![(0u32, 0u32, 0.0f64); adj_offsets[n]];
        for (idx, e) in edges.iter().enumerate() {
            adj[cursor[e.i as usize]] = (e.j, idx as u32, 1.0);
            cursor[e.i as usize] += 1;
            adj[cursor[e.j as usize]] = (e.i, idx as u32, -1.0);
            cursor[e.j as usize] += 1;
        }
        GeometricGraph {
            cloud,
            eps,
            edges,
            adj_offsets,
            adj,
            diag_weight,
        }
    }

    /// Abstract-graph constructor: explicit symmetric weights over ordered
    /// pairs `(i, j)` with `i < j`, with `eps` stored as provided. Used for
    /// complete graphs `(X, w ≡ 1/N, γ uniform, eps = 1)`.
    pub fn from_weights(
        cloud: PointCloud,
        eps: f64,
        weights: Vec<(usize, usize, f64)>,
        diag_weight: f64,
    ) -> Result<Self> {
        if eps <= 0.0 {
            return Err(GraphotError::InvalidParameter(
                "eps must be positive".into(),
            ));
        }
        let n = cloud.len();
        let mut edges = Vec::with_capacity(weights.len());
        for (i, j, w) in weights {
            if i >= n || j >= n || i >= j {
                return Err(GraphotError::InvalidParameter(format!(
                    "bad weight entry ({i},{j}); need i < j < n"
                )));
            }
            if w <= 0.0 {
                continue;
            }
            edges.push(Edge {
                i: i as u32,
                j: j as u32,
                w,
            });
        }
        Ok(Self::assemble(cloud, eps, edges, diag_weight))
    }

    pub fn n(&self) -> usize {
        self.cloud.len()
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(u32, u32, f64)] {
        &self.adj[self.adj_offsets[i]..self.adj_offsets[i + 1]]
    }

    /// Weight of the ordered pair `(i,j)`; self-pairs carry the stored
    /// diagonal weight but never contribute to the calculus.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag_weight;
        }
        self.neighbors(i)
            .iter()
            .find(|(nb, _, _)| *nb as usize == j)
            .map(|&(_, e, _)| self.edges[e as usize].w)
            .unwrap_or(0.0)
    }

    /// Connected components as sorted node lists (smallest first by size).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &(nb, _, _) in self.neighbors(v) {
                    let nb = nb as usize;
                    if comp[nb] == usize::MAX {
                        comp[nb] = count;
                        stack.push(nb);
                    }
                }
            }
            count += 1;
        }
        let mut groups = vec![Vec::new(); count];
        for (v, &c) in comp.iter().enumerate() {
            groups[c].push(v);
        }
        groups.sort_by_key(|g| g.len());
        groups
    }

    /// Errors with the smallest component when the graph is disconnected.
    pub fn require_connected(&self) -> Result<()> {
        let comps = self.components();
        if comps.len() > 1 {
            let smallest = &comps[0];
            return Err(GraphotError::Disconnected {
                component: smallest.iter().take(24).copied().collect(),
                size: smallest.len(),
                n: self.n(),
            });
        }
        Ok(())
    }

    /// Edge list CSV `i,j,weight`.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["i", "j", "weight"])?;
        for e in &self.edges {
            w.write_record([e.i.to_string(), e.j.to_string(), format!("{:.17}", e.w)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_len(g: &GeometricGraph, len: usize, context: &'static str) -> Result<()> {
    if len != g.n() {
        return Err(GraphotError::SizeMismatch {
            context,
            expected: g.n(),
            got: len,
        });
    }
    Ok(())
}

fn check_support(g: &GeometricGraph, v: &EdgeField) -> Result<()> {
    if v.len() != g.edge_count() {
        return Err(GraphotError::SizeMismatch {
            context: "edge field support",
            expected: g.edge_count(),
            got: v.len(),
        });
    }
    Ok(())
}

/// `grad u (i,j) = (u(j) - u(i))/eps`, antisymmetric by construction.
pub fn gradient(g: &GeometricGraph, u: &NodeFunction) -> Result<EdgeField> {
    check_len(g, u.len(), "gradient input")?;
    let inv_eps = 1.0 / g.eps();
    let forward = g
        .edges
        .iter()
        .map(|e| (u[e.j as usize] - u[e.i as usize]) * inv_eps)
        .collect();
    Ok(EdgeField::antisymmetric(forward))
}

/// `div V (i) = 1/(n eps) sum_j (V(i,j) - V(j,i)) w(i,j)`.
pub fn divergence(g: &GeometricGraph, v: &EdgeField) -> Result<NodeFunction> {
    check_support(g, v)?;
    let n = g.n() as f64;
    let scale = 1.0 / (n * g.eps());
    let mut out = vec![0.0; g.n()];
    for (e, edge) in g.edges.iter().enumerate() {
        let anti = v.value(e, 1.0) - v.value(e, -1.0); // V(i,j) - V(j,i)
        out[edge.i as usize] += anti * edge.w * scale;
        out[edge.j as usize] -= anti * edge.w * scale;
    }
    Ok(out)
}

/// `Lap u = -div(grad u)`; positive semidefinite, kernel contains constants.
pub fn laplacian_apply(g: &GeometricGraph, u: &NodeFunction) -> Result<NodeFunction> {
    let mut out = divergence(g, &gradient(g, u)?)?;
    out.iter_mut().for_each(|x| *x = -*x);
    Ok(out)
}

/// `<u, v> = (1/n) sum u v` on node functions.
pub fn inner_node(g: &GeometricGraph, u: &NodeFunction, v: &NodeFunction) -> f64 {
    let n = g.n() as f64;
    u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / n
}

/// `<U, V> = (1/n^2) sum over ordered pairs of U V w` on edge fields.
pub fn inner_edge(g: &GeometricGraph, u: &EdgeField, v: &EdgeField) -> f64 {
    let n = g.n() as f64;
    let mut acc = 0.0;
    for (e, edge) in g.edges.iter().enumerate() {
        acc += (u.value(e, 1.0) * v.value(e, 1.0) + u.value(e, -1.0) * v.value(e, -1.0))
            * edge.w;
    }
    acc / (n * n)
}

/// Dirichlet energy `D(u) = <grad u, grad u>`.
pub fn dirichlet_energy(g: &GeometricGraph, u: &NodeFunction) -> Result<f64> {
    let grad = gradient(g, u)?;
    Ok(inner_edge(g, &grad, &grad))
}

fn norm_node(g: &GeometricGraph, u: &NodeFunction) -> f64 {
    inner_node(g, u, u).sqrt()
}

fn project_mean_zero(u: &mut NodeFunction) {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter_mut().for_each(|x| *x -= mean);
}

/// Smallest nontrivial Laplacian eigenvalue by Lanczos iteration with full
/// reorthogonalization, restricted to the mean-zero subspace (the kernel of
/// the Laplacian on a connected graph is spanned by constants). Returns the
/// eigenpair `(lambda, f)` with `f` mean-zero and unit `L^2(nu_n)` norm;
/// the residual satisfies `||Lap f - lambda f|| <= tol * lambda`.
pub fn smallest_nontrivial_eigenvalue(
    g: &GeometricGraph,
    tol: f64,
) -> Result<(f64, NodeFunction)> {
    g.require_connected()?;
    let n = g.n();
    if n < 2 {
        return Err(GraphotError::InvalidParameter(
            "eigenvalue needs n >= 2".into(),
        ));
    }
    // deterministic pseudo-random start, mean-zero
    let mut q = (0..n)
        .map(|i| ((i as f64 + 1.0) * 12.9898).sin() * 43758.5453 % 1.0)
        .collect::<Vec<f64>>();
    project_mean_zero(&mut q);

    let max_restarts = 40;
    let m = (n - 1).min(120);
    for _ in 0..max_restarts {
        // Lanczos in the Euclidean inner product (the matrix of Lap is
        // symmetric there since gamma is uniform)
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut alphas = Vec::with_capacity(m);
        let mut betas = Vec::new();
        let nrm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(GraphotError::NoConvergence(
                "Lanczos start vector vanished".into(),
            ));
        }
        q.iter_mut().for_each(|x| *x /= nrm);
        basis.push(q.clone());
        for k in 0..m {
            let mut w = laplacian_apply(g, &basis[k])?;
            project_mean_zero(&mut w);
            let alpha: f64 = w.iter().zip(&basis[k]).map(|(a, b)| a * b).sum();
            alphas.push(alpha);
            for (wi, bi) in w.iter_mut().zip(&basis[k]) {
                *wi -= alpha * bi;
            }
            if k > 0 {
                let beta_prev: f64 = betas[k - 1];
                for (wi, bi) in w.iter_mut().zip(&basis[k - 1]) {
                    *wi -= beta_prev * bi;
                }
            }
            // full reorthogonalization
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(a, x)| a * x).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
            // re-project: the alpha/beta subtractions re-inject the constant
            // mode at roundoff level and the recurrence amplifies it
            project_mean_zero(&mut w);
            let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            // Krylov exhaustion is relative to the operator scale: dividing
            // by a noise-level beta would inject a spurious direction
            let scale = alphas.iter().fold(1e-300f64, |a, &b| a.max(b.abs()));
            if beta <= 1e-10 * scale || k == m - 1 {
                break;
            }
            betas.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }
        let k = alphas.len();
        let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k && i < betas.len() {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(t);
        let (mut best, mut best_val) = (0, f64::INFINITY);
        for i in 0..k {
            if eig.eigenvalues[i] < best_val {
                best_val = eig.eigenvalues[i];
                best = i;
            }
        }
        let y = eig.eigenvectors.column(best);
        let mut f = vec![0.0; n];
        for (c, b) in y.iter().zip(&basis) {
            for (fi, bi) in f.iter_mut().zip(b) {
                *fi += c * bi;
            }
        }
        project_mean_zero(&mut f);
        let fn_norm = norm_node(g, &f);
        f.iter_mut().for_each(|x| *x /= fn_norm);
        let lambda = best_val;
        let lap_f = laplacian_apply(g, &f)?;
        let resid: f64 = lap_f
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - lambda * b) * (a - lambda * b))
            .sum::<f64>()
            .sqrt()
            / (g.n() as f64).sqrt();
        if lambda > 0.0 && resid <= tol * lambda {
            return Ok((lambda, f));
        }
        q = f; // restart from the current Ritz vector
    }
    Err(GraphotError::NoConvergence(
        "Lanczos failed to reach the eigenresidual tolerance".into(),
    ))
}
