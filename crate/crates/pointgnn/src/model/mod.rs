//! The detection network: initial vertex-state embedding, T GNN iterations
//! with an auto-registration offset, classification/localization heads, the
//! training losses, and the full point-cloud-to-detections pipeline.

mod class_spec;
mod loss;
mod network;
mod params;

pub use class_spec::{ClassKind, ClassSpec};
pub use loss::{
    classification_loss, huber, localization_loss, loss_and_gradients, regularization_loss,
    total_loss, LossParts, LossWeights,
};
pub use network::{
    backward_full, decode_detections, forward_with_cache, gnn_iteration,
    gnn_iteration_with_cache, init_vertex_state, init_vertex_state_with_cache, predict,
    predict_with_cache, Detection, ForwardCache, HeadCache, InitCache, IterCache, RawPrediction,
    VertexStates,
};
pub use params::{IterParams, ModelDims, PointGnnParams};

use crate::error::Result;
use crate::pointcloud::{voxel_downsample, PointCloud, VoxelMode};
use crate::postprocess::{merge_score_nms, NmsMode};

/// Everything `forward_full` needs besides the parameters.
#[derive(Debug, Clone)]
pub struct InferenceConfig {
    pub radius: f64,
    pub r0: f64,
    pub voxel_size: f64,
    pub voxel_mode: VoxelMode,
    pub voxel_seed: u64,
    pub nms_threshold: f64,
    pub nms_mode: NmsMode,
}

/// Run the whole pipeline on a raw cloud: downsample, build the graph, embed
/// initial states, iterate the GNN, predict, decode per-vertex boxes and
/// merge them with NMS. Returns the merged detections, best score first per
/// class group.
pub fn forward_full(
    params: &PointGnnParams,
    spec: &ClassSpec,
    raw: &PointCloud,
    config: &InferenceConfig,
) -> Result<Vec<Detection>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    let down = voxel_downsample(raw, config.voxel_size, config.voxel_mode, config.voxel_seed)?;
    let vertices = down.cloud;
    let graph = crate::graph::build_graph(&vertices, config.radius, false)?;
    let mut states = init_vertex_state(raw, &vertices, config.r0, &params.embed_point, &params.embed_post)?;
    for iter in &params.iterations {
        states = gnn_iteration(&graph, &states, iter, params.auto_registration)?;
    }
    let pred = predict(&states, params, spec)?;
    let raw_dets = decode_detections(&pred, &vertices, spec);

    // NMS runs per object class independently
    let mut merged = Vec::new();
    for &class in &spec.localized_classes() {
        let class_dets: Vec<&Detection> = raw_dets.iter().filter(|d| d.class == class).collect();
        if class_dets.is_empty() {
            continue;
        }
        let boxes: Vec<crate::boxes::Box3D> = class_dets.iter().map(|d| d.bbox).collect();
        let scores: Vec<f64> = class_dets.iter().map(|d| d.score).collect();
        let (m, z, seeds) = merge_score_nms(
            &boxes,
            &scores,
            config.nms_threshold,
            &vertices,
            config.nms_mode,
        )?;
        for ((b, s), seed) in m.into_iter().zip(z).zip(seeds) {
            merged.push(Detection {
                class,
                bbox: b,
                score: s,
                vertex: class_dets[seed].vertex,
            });
        }
    }
    Ok(merged)
}
