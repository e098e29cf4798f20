//! Greedy detection/ground-truth matching and interpolated Average
//! Precision.

use crate::boxes::Box3D;
use crate::error::{Error, Result};

/// A detection to score: class index, box, confidence.
#[derive(Debug, Clone)]
pub struct EvalDetection {
    pub class: usize,
    pub bbox: Box3D,
    pub score: f64,
}

/// A ground-truth box: class index plus geometry.
#[derive(Debug, Clone)]
pub struct EvalGroundTruth {
    pub class: usize,
    pub bbox: Box3D,
}

/// Matching outcome of one scene (or one pooled set): per-detection
/// (score, matched) pairs plus the ground-truth count.
#[derive(Debug, Clone, Default)]
pub struct EvalRecord {
    pub detections: Vec<(f64, bool)>,
    pub num_gt: usize,
}

impl EvalRecord {
    pub fn merge(&mut self, other: &EvalRecord) {
        self.detections.extend_from_slice(&other.detections);
        self.num_gt += other.num_gt;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApProtocol {
    /// 40 recall samples at 1/40 .. 40/40 (current KITTI practice).
    Interp40,
    /// 11 recall samples at 0, 0.1, .., 1.0.
    Interp11,
}

/// Greedy matching: detections in descending score (ties by lowest index)
/// each claim the highest-IoU unmatched ground truth of the same class with
/// IoU >= threshold.
pub fn match_detections(
    dets: &[EvalDetection],
    gts: &[EvalGroundTruth],
    iou_fn: &dyn Fn(&Box3D, &Box3D) -> f64,
    threshold: f64,
) -> Result<EvalRecord> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::argument("IoU threshold must lie in (0, 1]"));
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut gt_taken = vec![false; gts.len()];
    let mut results = vec![(0.0, false); dets.len()];
    for &di in &order {
        let det = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt_taken[gi] || gt.class != det.class {
                continue;
            }
            let iou = iou_fn(&det.bbox, &gt.bbox);
            if iou >= threshold && best.map_or(true, |(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            gt_taken[gi] = true;
            results[di] = (det.score, true);
        } else {
            results[di] = (det.score, false);
        }
    }
    Ok(EvalRecord {
        detections: results,
        num_gt: gts.len(),
    })
}

/// Interpolated AP over the pooled score sweep: precision is monotonized
/// right-to-left, then averaged at the protocol's recall samples.
pub fn average_precision(record: &EvalRecord, protocol: ApProtocol) -> Result<f64> {
    if record.num_gt == 0 {
        return Err(Error::argument("AP undefined with zero ground truths"));
    }
    let mut dets = record.detections.clone();
    dets.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut recalls = Vec::with_capacity(dets.len());
    let mut precisions = Vec::with_capacity(dets.len());
    let mut tp = 0usize;
    for (rank, (_, matched)) in dets.iter().enumerate() {
        if *matched {
            tp += 1;
        }
        recalls.push(tp as f64 / record.num_gt as f64);
        precisions.push(tp as f64 / (rank + 1) as f64);
    }
    // right-to-left running max makes precision non-increasing in recall
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        precisions[i] = precisions[i].max(precisions[i + 1]);
    }
    let precision_at = |recall: f64| -> f64 {
        // first sweep position reaching the recall sample
        for (r, p) in recalls.iter().zip(&precisions) {
            if *r >= recall - 1e-12 {
                return *p;
            }
        }
        0.0
    };
    let samples: Vec<f64> = match protocol {
        ApProtocol::Interp40 => (1..=40).map(|i| i as f64 / 40.0).collect(),
        ApProtocol::Interp11 => (0..=10).map(|i| i as f64 / 10.0).collect(),
    };
    Ok(samples.iter().map(|&r| precision_at(r)).sum::<f64>() / samples.len() as f64)
}

/// One row of the evaluation report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub class: String,
    pub iou_threshold: f64,
    pub ap: f64,
    pub num_gt: usize,
    pub num_det: usize,
}

pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("class,iou_threshold,ap,num_gt,num_det\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.class, r.iou_threshold, r.ap, r.num_gt, r.num_det
        ));
    }
    out
}
