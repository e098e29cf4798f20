//! Fixed-radius near-neighbor search via a cell list and construction of the
//! detection graph.
//!
//! Edges are stored as ordered (dst, src) pairs so that per-destination
//! capping is expressible; the underlying relation is symmetric.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

/// A directed edge: the source vertex's state feeds the destination's update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub dst: usize,
    pub src: usize,
}

/// Spatial hash of point indices into cubic cells of side `cell_size`.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub cell_size: f64,
    pub origin: [f64; 3],
    pub cells: HashMap<[i64; 3], Vec<usize>>,
}

/// Fixed-radius graph over a (downsampled) point cloud.
#[derive(Debug, Clone)]
pub struct Graph {
    pub vertices: PointCloud,
    pub edges: Vec<Edge>,
    pub radius: f64,
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

impl CellGrid {
    fn cell_of(&self, p: [f64; 3]) -> [i64; 3] {
        [
            ((p[0] - self.origin[0]) / self.cell_size).floor() as i64,
            ((p[1] - self.origin[1]) / self.cell_size).floor() as i64,
            ((p[2] - self.origin[2]) / self.cell_size).floor() as i64,
        ]
    }
}

/// Bin every point of `cloud` into a cell grid with the given cell size.
/// The origin is the per-axis minimum (zero for an empty cloud).
pub fn build_cell_list(cloud: &PointCloud, cell_size: f64) -> Result<CellGrid> {
    if cell_size <= 0.0 {
        return Err(Error::argument("cell_size must be positive"));
    }
    let mut origin = [0.0; 3];
    if !cloud.is_empty() {
        for k in 0..3 {
            origin[k] = cloud
                .points
                .iter()
                .map(|p| p.position[k])
                .fold(f64::INFINITY, f64::min);
        }
    }
    let mut grid = CellGrid {
        cell_size,
        origin,
        cells: HashMap::new(),
    };
    for (i, p) in cloud.points.iter().enumerate() {
        let key = grid.cell_of(p.position);
        grid.cells.entry(key).or_default().push(i);
    }
    Ok(grid)
}

/// All indices j with ||x_j - x_query|| < r, the query index included,
/// sorted ascending. Scans only the 27 cells around the query, so r must not
/// exceed the grid's cell size.
pub fn radius_neighbors(
    grid: &CellGrid,
    cloud: &PointCloud,
    query_index: usize,
    r: f64,
) -> Result<Vec<usize>> {
    if r > grid.cell_size {
        return Err(Error::argument(format!(
            "radius {r} exceeds cell size {}; one-ring scan would miss neighbors",
            grid.cell_size
        )));
    }
    if query_index >= cloud.len() {
        return Err(Error::argument("query_index out of range"));
    }
    let q = cloud.position(query_index);
    let cell = grid.cell_of(q);
    let r2 = r * r;
    let mut out = Vec::new();
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                let key = [cell[0] + dx, cell[1] + dy, cell[2] + dz];
                if let Some(members) = grid.cells.get(&key) {
                    for &j in members {
                        if dist2(cloud.position(j), q) < r2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Like `radius_neighbors` but for an arbitrary query position that need not
/// be a member of the cloud.
pub fn radius_neighbors_at(
    grid: &CellGrid,
    cloud: &PointCloud,
    position: [f64; 3],
    r: f64,
) -> Result<Vec<usize>> {
    if r > grid.cell_size {
        return Err(Error::argument(format!(
            "radius {r} exceeds cell size {}; one-ring scan would miss neighbors",
            grid.cell_size
        )));
    }
    let cell = grid.cell_of(position);
    let r2 = r * r;
    let mut out = Vec::new();
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                let key = [cell[0] + dx, cell[1] + dy, cell[2] + dz];
                if let Some(members) = grid.cells.get(&key) {
                    for &j in members {
                        if dist2(cloud.position(j), position) < r2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Build the fixed-radius graph: edges connect every ordered pair of
/// vertices strictly closer than `r`. Self-loops only when `include_self`.
/// Edges come out sorted by (dst, src).
pub fn build_graph(cloud: &PointCloud, r: f64, include_self: bool) -> Result<Graph> {
    if r <= 0.0 {
        return Err(Error::argument("radius must be positive"));
    }
    let grid = build_cell_list(cloud, r)?;
    let mut edges = Vec::new();
    for dst in 0..cloud.len() {
        for src in radius_neighbors(&grid, cloud, dst, r)? {
            if src != dst || include_self {
                edges.push(Edge { dst, src });
            }
        }
    }
    edges.sort_unstable();
    Ok(Graph {
        vertices: cloud.clone(),
        edges,
        radius: r,
    })
}

/// Reference O(N^2) construction, used by the `graph --oracle` CLI check.
pub fn build_graph_brute_force(cloud: &PointCloud, r: f64, include_self: bool) -> Result<Graph> {
    if r <= 0.0 {
        return Err(Error::argument("radius must be positive"));
    }
    let r2 = r * r;
    let mut edges = Vec::new();
    for dst in 0..cloud.len() {
        for src in 0..cloud.len() {
            if (src != dst || include_self)
                && dist2(cloud.position(dst), cloud.position(src)) < r2
            {
                edges.push(Edge { dst, src });
            }
        }
    }
    edges.sort_unstable();
    Ok(Graph {
        vertices: cloud.clone(),
        edges,
        radius: r,
    })
}

/// Cap the in-degree of every destination vertex by a seeded uniform sample
/// without replacement. Edge order (dst, src) is preserved among survivors.
pub fn cap_edges(graph: &Graph, max_in_per_vertex: usize, seed: u64) -> Result<Graph> {
    if max_in_per_vertex == 0 {
        return Err(Error::argument("max_in_per_vertex must be >= 1"));
    }
    let n = graph.vertices.len();
    let mut by_dst: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, edge) in graph.edges.iter().enumerate() {
        by_dst[edge.dst].push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<usize> = Vec::with_capacity(graph.edges.len());
    for ids in &mut by_dst {
        if ids.len() > max_in_per_vertex {
            // partial Fisher-Yates: the first max_in entries become the sample
            for i in 0..max_in_per_vertex {
                let j = rng.random_range(i..ids.len());
                ids.swap(i, j);
            }
            ids.truncate(max_in_per_vertex);
            ids.sort_unstable();
        }
        kept.extend_from_slice(ids);
    }
    kept.sort_unstable();
    Ok(Graph {
        vertices: graph.vertices.clone(),
        edges: kept.iter().map(|&e| graph.edges[e]).collect(),
        radius: graph.radius,
    })
}

impl Graph {
    /// In-degree (incoming edge count) per vertex.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.vertices.len()];
        for e in &self.edges {
            deg[e.dst] += 1;
        }
        deg
    }

    /// Debug dump: header `N E r`, then one `dst src` pair per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{} {} {}",
            self.vertices.len(),
            self.edges.len(),
            self.radius
        )
        .unwrap();
        for e in &self.edges {
            writeln!(out, "{} {}", e.dst, e.src).unwrap();
        }
        out
    }
}
