//! Point cloud ingestion, cropping and downsampling.
//!
//! Coordinate convention throughout the crate: sensor frame with x forward,
//! y left, z up (velodyne convention).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A single LiDAR return: 3D position in meters plus reflectance in [0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub position: [f64; 3],
    pub intensity: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Point {
            position: [x, y, z],
            intensity,
        }
    }
}

/// An ordered list of points. Order only matters as an identity for
/// index-based references (graph edges, kept-index lists).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        self.points[i].position
    }
}

/// Result of voxel downsampling: the kept points plus their indices in the
/// source cloud, one per occupied voxel, in ascending source order.
#[derive(Debug, Clone)]
pub struct VoxelDownsampleResult {
    pub cloud: PointCloud,
    pub kept_indices: Vec<usize>,
}

/// Which point represents an occupied voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxelMode {
    /// Seeded uniform choice among the voxel's points (vertex jitter).
    Random,
    /// The point nearest the voxel center, ties broken by lowest index.
    CentroidNearest,
}

const KITTI_RECORD_BYTES: usize = 16;

/// Parse a KITTI velodyne `.bin` payload: four little-endian f32 per point
/// (x, y, z, intensity), no header.
pub fn parse_kitti_bin(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.len() % KITTI_RECORD_BYTES != 0 {
        return Err(Error::format(format!(
            "kitti bin length {} is not a multiple of {} (at byte offset {})",
            bytes.len(),
            KITTI_RECORD_BYTES,
            bytes.len() - bytes.len() % KITTI_RECORD_BYTES
        )));
    }
    let mut points = Vec::with_capacity(bytes.len() / KITTI_RECORD_BYTES);
    for (rec, chunk) in bytes.chunks_exact(KITTI_RECORD_BYTES).enumerate() {
        let mut vals = [0.0f64; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            let raw: [u8; 4] = chunk[4 * k..4 * k + 4].try_into().unwrap();
            let f = f32::from_le_bytes(raw);
            if !f.is_finite() {
                return Err(Error::format(format!(
                    "non-finite value in kitti bin record {rec}"
                )));
            }
            *v = f as f64;
        }
        points.push(Point::new(vals[0], vals[1], vals[2], vals[3]));
    }
    Ok(PointCloud::new(points))
}

/// Keep points inside an angular frustum looking down +x: forward range above
/// `min_range`, horizontal angle within `half_angle_h`, elevation within
/// `half_angle_v`. Order preserved.
pub fn frustum_crop(
    cloud: &PointCloud,
    half_angle_h: f64,
    half_angle_v: f64,
    min_range: f64,
) -> Result<PointCloud> {
    if !(half_angle_h > 0.0 && half_angle_h <= std::f64::consts::PI) {
        return Err(Error::argument("half_angle_h must be in (0, pi]"));
    }
    if !(half_angle_v > 0.0 && half_angle_v <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::argument("half_angle_v must be in (0, pi/2]"));
    }
    if min_range < 0.0 {
        return Err(Error::argument("min_range must be >= 0"));
    }
    let points = cloud
        .points
        .iter()
        .filter(|p| {
            let [x, y, z] = p.position;
            let horiz = (x * x + y * y).sqrt();
            x > min_range
                && y.atan2(x).abs() <= half_angle_h
                && z.atan2(horiz).abs() <= half_angle_v
        })
        .copied()
        .collect();
    Ok(PointCloud::new(points))
}

fn voxel_key(p: [f64; 3], voxel_size: f64) -> [i64; 3] {
    [
        (p[0] / voxel_size).floor() as i64,
        (p[1] / voxel_size).floor() as i64,
        (p[2] / voxel_size).floor() as i64,
    ]
}

/// Downsample to one point per occupied voxel. Binning is by
/// floor(position / voxel_size) per axis; the representative is chosen per
/// `mode`. Deterministic given (mode, seed).
pub fn voxel_downsample(
    cloud: &PointCloud,
    voxel_size: f64,
    mode: VoxelMode,
    seed: u64,
) -> Result<VoxelDownsampleResult> {
    if voxel_size <= 0.0 {
        return Err(Error::argument("voxel_size must be positive"));
    }
    let mut bins: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        bins.entry(voxel_key(p.position, voxel_size))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<usize> = Vec::with_capacity(bins.len());
    for (key, members) in &bins {
        let chosen = match mode {
            VoxelMode::Random => members[rng.random_range(0..members.len())],
            VoxelMode::CentroidNearest => {
                let center = [
                    (key[0] as f64 + 0.5) * voxel_size,
                    (key[1] as f64 + 0.5) * voxel_size,
                    (key[2] as f64 + 0.5) * voxel_size,
                ];
                let mut best = members[0];
                let mut best_d = f64::INFINITY;
                for &m in members {
                    let p = cloud.points[m].position;
                    let d = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum::<f64>();
                    if d < best_d {
                        best_d = d;
                        best = m;
                    }
                }
                best
            }
        };
        kept.push(chosen);
    }
    kept.sort_unstable();
    let points = kept.iter().map(|&i| cloud.points[i]).collect();
    Ok(VoxelDownsampleResult {
        cloud: PointCloud::new(points),
        kept_indices: kept,
    })
}

fn elevation(p: [f64; 3]) -> f64 {
    p[2].atan2((p[0] * p[0] + p[1] * p[1]).sqrt())
}

fn nearest_center(v: f64, centers: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, &ctr) in centers.iter().enumerate() {
        let d = (v - ctr).abs();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Seeded Lloyd k-means over scalar values. Centers initialize to distinct
/// random data points; empty clusters are re-seeded each iteration to the
/// points farthest from their assigned center (distinct per empty cluster).
fn kmeans_1d(values: &[f64], k: usize, iters: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..values.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    // prefer distinct values so duplicate-valued data cannot start two
    // centers on top of each other
    let mut centers: Vec<f64> = Vec::with_capacity(k);
    for &i in &order {
        if centers.len() == k {
            break;
        }
        if !centers.contains(&values[i]) {
            centers.push(values[i]);
        }
    }
    for &i in &order {
        if centers.len() == k {
            break;
        }
        centers.push(values[i]);
    }
    let mut assign = vec![0usize; values.len()];
    for _ in 0..iters {
        for (i, &v) in values.iter().enumerate() {
            assign[i] = nearest_center(v, &centers);
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (i, &v) in values.iter().enumerate() {
            sums[assign[i]] += v;
            counts[assign[i]] += 1;
        }
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
        if !empties.is_empty() {
            // hand each empty cluster a distinct far-out point
            let mut by_dist: Vec<usize> = (0..values.len()).collect();
            by_dist.sort_by(|&a, &b| {
                let da = (values[a] - centers[assign[a]]).abs();
                let db = (values[b] - centers[assign[b]]).abs();
                db.partial_cmp(&da).unwrap()
            });
            let mut used: Vec<f64> = Vec::new();
            let mut src = by_dist.iter();
            for &c in &empties {
                for &i in src.by_ref() {
                    if !used.iter().any(|&u| u == values[i]) {
                        centers[c] = values[i];
                        used.push(values[i]);
                        break;
                    }
                }
            }
        }
    }
    for (i, &v) in values.iter().enumerate() {
        assign[i] = nearest_center(v, &centers);
    }
    (centers, assign)
}

/// Emulate a lower-resolution LiDAR by clustering per-point elevation angles
/// into `source_lines` scan lines and keeping every
/// (source_lines / target_lines)-th line, starting from the lowest-angle
/// cluster after sorting by center.
pub fn scanline_downsample(
    cloud: &PointCloud,
    source_lines: usize,
    target_lines: usize,
    kmeans_iters: usize,
    seed: u64,
) -> Result<PointCloud> {
    if target_lines == 0 || source_lines % target_lines != 0 {
        return Err(Error::argument(
            "target_lines must divide source_lines",
        ));
    }
    if cloud.len() < source_lines {
        return Err(Error::argument(format!(
            "cloud has {} points, fewer than {} scan lines",
            cloud.len(),
            source_lines
        )));
    }
    let elevations: Vec<f64> = cloud.points.iter().map(|p| elevation(p.position)).collect();
    let (centers, assign) = kmeans_1d(&elevations, source_lines, kmeans_iters, seed);

    // order clusters by center angle; keep every skip-th line
    let mut order: Vec<usize> = (0..source_lines).collect();
    order.sort_by(|&a, &b| centers[a].partial_cmp(&centers[b]).unwrap());
    let skip = source_lines / target_lines;
    let mut keep = vec![false; source_lines];
    for (rank, &cluster) in order.iter().enumerate() {
        if rank % skip == 0 {
            keep[cluster] = true;
        }
    }
    let points = cloud
        .points
        .iter()
        .zip(&assign)
        .filter(|(_, &a)| keep[a])
        .map(|(p, _)| *p)
        .collect();
    Ok(PointCloud::new(points))
}

/// Parse the plain-text interchange format: one `x y z intensity` line per
/// point, space separated decimals. Blank lines and `#` comments skipped.
pub fn parse_text(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::format(format!(
                "line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 4];
        for (k, f) in fields.iter().enumerate() {
            vals[k] = f.parse().map_err(|_| {
                Error::format(format!("line {}: bad number {f:?}", lineno + 1))
            })?;
        }
        points.push(Point::new(vals[0], vals[1], vals[2], vals[3]));
    }
    Ok(PointCloud::new(points))
}

/// Serialize to the plain-text interchange format.
pub fn to_text(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in &cloud.points {
        let [x, y, z] = p.position;
        writeln!(out, "{x} {y} {z} {}", p.intensity).unwrap();
    }
    out
}
