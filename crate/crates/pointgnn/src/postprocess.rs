//! Non-maximum suppression with box merging and scoring.
//!
//! Clusters are grown greedily from the highest-scoring remaining box; every
//! remaining box whose BEV IoU with the seed exceeds the threshold joins the
//! cluster (the seed itself included, since IoU(seed, seed) = 1). Merge
//! modes replace the seed with the component-wise median of the cluster;
//! score modes replace the seed score with (o+1)·Σ IoU(m, b_k)·d_k where o
//! is the occlusion factor of the output box.

use crate::boxes::{bev_iou, normalize_yaw, occlusion_factor, Box3D};
use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmsMode {
    MergeScore,
    MergeOnly,
    ScoreOnly,
    Standard,
}

impl NmsMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "merge+score" | "merge_score" => Ok(NmsMode::MergeScore),
            "merge" | "merge_only" => Ok(NmsMode::MergeOnly),
            "score" | "score_only" => Ok(NmsMode::ScoreOnly),
            "standard" => Ok(NmsMode::Standard),
            other => Err(Error::argument(format!("unknown NMS mode '{other}'"))),
        }
    }

    pub fn merges(self) -> bool {
        matches!(self, NmsMode::MergeScore | NmsMode::MergeOnly)
    }

    pub fn rescores(self) -> bool {
        matches!(self, NmsMode::MergeScore | NmsMode::ScoreOnly)
    }
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Component-wise median box: x, y, z, l, h, w each via the scalar median;
/// yaw via the ordinary median of the yaws normalized into [-pi/4, 3pi/4).
pub fn median_box(cluster: &[Box3D]) -> Result<Box3D> {
    if cluster.is_empty() {
        return Err(Error::argument("median of an empty cluster"));
    }
    let comp = |f: &dyn Fn(&Box3D) -> f64| median_of(cluster.iter().map(f).collect());
    Ok(Box3D::new(
        [
            comp(&|b| b.center[0]),
            comp(&|b| b.center[1]),
            comp(&|b| b.center[2]),
        ],
        [
            comp(&|b| b.size[0]),
            comp(&|b| b.size[1]),
            comp(&|b| b.size[2]),
        ],
        comp(&|b| normalize_yaw(b.yaw)),
    ))
}

/// Greedy clustering NMS. Returns the output boxes, their scores, and the
/// input index of each cluster's seed, in cluster-creation order (descending
/// seed score). `points` is the cloud used for the occlusion factor.
pub fn merge_score_nms(
    boxes: &[Box3D],
    scores: &[f64],
    threshold: f64,
    points: &PointCloud,
    mode: NmsMode,
) -> Result<(Vec<Box3D>, Vec<f64>, Vec<usize>)> {
    if boxes.len() != scores.len() {
        return Err(Error::argument("boxes and scores differ in length"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::argument("NMS threshold must lie in [0, 1]"));
    }
    let mut alive: Vec<usize> = (0..boxes.len()).collect();
    let mut out_boxes = Vec::new();
    let mut out_scores = Vec::new();
    let mut out_seeds = Vec::new();
    while !alive.is_empty() {
        // argmax score, ties to the lowest index
        let seed = *alive
            .iter()
            .max_by(|&&a, &&b| {
                scores[a]
                    .partial_cmp(&scores[b])
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap();
        let mut members = Vec::new();
        alive.retain(|&j| {
            if bev_iou(&boxes[seed], &boxes[j]) > threshold {
                members.push(j);
                false
            } else {
                true
            }
        });
        let cluster: Vec<Box3D> = members.iter().map(|&j| boxes[j]).collect();
        let merged = if mode.merges() {
            median_box(&cluster)?
        } else {
            boxes[seed]
        };
        let score = if mode.rescores() {
            let o = occlusion_factor(&merged, points);
            (o + 1.0)
                * members
                    .iter()
                    .map(|&j| bev_iou(&merged, &boxes[j]) * scores[j])
                    .sum::<f64>()
        } else {
            members
                .iter()
                .map(|&j| scores[j])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        out_boxes.push(merged);
        out_scores.push(score);
        out_seeds.push(seed);
    }
    Ok((out_boxes, out_scores, out_seeds))
}
