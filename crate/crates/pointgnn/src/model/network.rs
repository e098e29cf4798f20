use crate::boxes::{decode_box, Box3D, EncodedBox};
use crate::error::{Error, Result};
use crate::graph::{build_cell_list, radius_neighbors_at, Edge, Graph};
use crate::model::class_spec::ClassSpec;
use crate::model::params::{IterParams, PointGnnParams};
use crate::nn::{max_aggregate, max_aggregate_backward, GroupIndex, MlpCache, MlpParams, Tensor2};
use crate::pointcloud::PointCloud;

/// Per-vertex state vectors after iteration `iteration` (0 = initial
/// embedding).
#[derive(Debug, Clone)]
pub struct VertexStates {
    pub states: Tensor2,
    pub iteration: usize,
}

/// Per-vertex class probabilities plus one encoded box per localized class.
#[derive(Debug, Clone)]
pub struct RawPrediction {
    pub probs: Tensor2,
    pub logits: Tensor2,
    /// One (n x 7) tensor per localized class, aligned with
    /// `ClassSpec::localized_classes()`.
    pub loc: Vec<Tensor2>,
}

/// A decoded per-vertex or merged detection.
#[derive(Debug, Clone)]
pub struct Detection {
    pub class: usize,
    pub bbox: Box3D,
    pub score: f64,
    pub vertex: usize,
}

/// Activation record of the initial embedding.
#[derive(Debug, Clone)]
pub struct InitCache {
    pub groups: GroupIndex,
    pub point_cache: MlpCache,
    pub argmax: Vec<usize>,
    pub post_cache: MlpCache,
    pub row_count: usize,
}

/// Activation record of one GNN iteration.
#[derive(Debug, Clone)]
pub struct IterCache {
    pub h_cache: Option<MlpCache>,
    pub f_cache: MlpCache,
    pub argmax: Vec<usize>,
    pub g_cache: MlpCache,
    pub edges: Vec<Edge>,
}

/// Activation record of the heads.
#[derive(Debug, Clone)]
pub struct HeadCache {
    pub cls_cache: MlpCache,
    pub loc_caches: Vec<MlpCache>,
}

/// Everything needed for an exact backward pass through the whole network.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub init: InitCache,
    pub iters: Vec<IterCache>,
    pub states: Vec<VertexStates>,
    pub heads: HeadCache,
    pub prediction: RawPrediction,
}

/// Gather raw points within r0 of each vertex, embed [relative position,
/// intensity] per raw point, max-aggregate per vertex, refine with the post
/// MLP. Vertices without raw neighbors embed the zero aggregate.
pub fn init_vertex_state_with_cache(
    raw: &PointCloud,
    vertices: &PointCloud,
    r0: f64,
    embed_point: &MlpParams,
    embed_post: &MlpParams,
) -> Result<(VertexStates, InitCache)> {
    if r0 <= 0.0 {
        return Err(Error::argument("r0 must be positive"));
    }
    let grid = build_cell_list(raw, r0)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut group_of: Vec<usize> = Vec::new();
    for (vi, v) in vertices.points.iter().enumerate() {
        if raw.is_empty() {
            continue;
        }
        for ri in radius_neighbors_at(&grid, raw, v.position, r0)? {
            let p = &raw.points[ri];
            rows.push(vec![
                p.position[0] - v.position[0],
                p.position[1] - v.position[1],
                p.position[2] - v.position[2],
                p.intensity,
            ]);
            group_of.push(vi);
        }
    }
    let row_count = rows.len();
    let features = if row_count == 0 {
        Tensor2::zeros(0, 4)
    } else {
        Tensor2::from_rows(&rows)?
    };
    let (embedded, point_cache) = embed_point.forward(&features)?;
    let groups = GroupIndex::new(group_of, vertices.len())?;
    let (pooled, argmax) = max_aggregate(&embedded, &groups)?;
    let (states, post_cache) = embed_post.forward(&pooled)?;
    Ok((
        VertexStates {
            states,
            iteration: 0,
        },
        InitCache {
            groups,
            point_cache,
            argmax,
            post_cache,
            row_count,
        },
    ))
}

pub fn init_vertex_state(
    raw: &PointCloud,
    vertices: &PointCloud,
    r0: f64,
    embed_point: &MlpParams,
    embed_post: &MlpParams,
) -> Result<VertexStates> {
    init_vertex_state_with_cache(raw, vertices, r0, embed_point, embed_post).map(|(s, _)| s)
}

/// One GNN iteration:
///   offset_i = MLP_h(s_i)            (zero when auto-registration is off)
///   e_e      = MLP_f([x_src - x_dst + offset_dst, s_src])  per edge
///   s'_i     = MLP_g(max over incoming e) + s_i
/// Vertices without incoming edges update through MLP_g(0) + s_i.
pub fn gnn_iteration_with_cache(
    graph: &Graph,
    states: &VertexStates,
    params: &IterParams,
    auto_registration: bool,
) -> Result<(VertexStates, IterCache)> {
    let n = graph.vertices.len();
    if states.states.rows != n {
        return Err(Error::argument("state row count != vertex count"));
    }
    let k = states.states.cols;
    let (offsets, h_cache) = if auto_registration {
        let (o, c) = params.mlp_h.forward(&states.states)?;
        (Some(o), Some(c))
    } else {
        (None, None)
    };
    let mut f_input = Tensor2::zeros(graph.edges.len(), 3 + k);
    for (e, edge) in graph.edges.iter().enumerate() {
        let xd = graph.vertices.position(edge.dst);
        let xs = graph.vertices.position(edge.src);
        let row = f_input.row_mut(e);
        for a in 0..3 {
            row[a] = xs[a] - xd[a];
            if let Some(o) = &offsets {
                row[a] += o.get(edge.dst, a);
            }
        }
        row[3..].copy_from_slice(states.states.row(edge.src));
    }
    let (edge_feats, f_cache) = params.mlp_f.forward(&f_input)?;
    let groups = GroupIndex::new(graph.edges.iter().map(|e| e.dst).collect(), n)?;
    let (pooled, argmax) = max_aggregate(&edge_feats, &groups)?;
    let (g_out, g_cache) = params.mlp_g.forward(&pooled)?;
    let mut next = g_out;
    next.add_assign(&states.states);
    Ok((
        VertexStates {
            states: next,
            iteration: states.iteration + 1,
        },
        IterCache {
            h_cache,
            f_cache,
            argmax,
            g_cache,
            edges: graph.edges.clone(),
        },
    ))
}

pub fn gnn_iteration(
    graph: &Graph,
    states: &VertexStates,
    params: &IterParams,
    auto_registration: bool,
) -> Result<VertexStates> {
    gnn_iteration_with_cache(graph, states, params, auto_registration).map(|(s, _)| s)
}

fn softmax_rows(logits: &Tensor2) -> Tensor2 {
    let mut probs = logits.clone();
    for i in 0..probs.rows {
        let row = probs.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    probs
}

/// Classification and localization heads on the final states.
pub fn predict_with_cache(
    states: &VertexStates,
    params: &PointGnnParams,
    spec: &ClassSpec,
) -> Result<(RawPrediction, HeadCache)> {
    let (logits, cls_cache) = params.head_cls.forward(&states.states)?;
    if logits.cols != spec.num_classes() {
        return Err(Error::argument("head width != class count"));
    }
    let probs = softmax_rows(&logits);
    let mut loc = Vec::with_capacity(params.head_loc.len());
    let mut loc_caches = Vec::with_capacity(params.head_loc.len());
    for head in &params.head_loc {
        let (out, cache) = head.forward(&states.states)?;
        loc.push(out);
        loc_caches.push(cache);
    }
    Ok((
        RawPrediction { probs, logits, loc },
        HeadCache {
            cls_cache,
            loc_caches,
        },
    ))
}

pub fn predict(
    states: &VertexStates,
    params: &PointGnnParams,
    spec: &ClassSpec,
) -> Result<RawPrediction> {
    predict_with_cache(states, params, spec).map(|(p, _)| p)
}

/// Full forward pass with all caches retained, for training.
pub fn forward_with_cache(
    params: &PointGnnParams,
    spec: &ClassSpec,
    raw: &PointCloud,
    graph: &Graph,
    r0: f64,
) -> Result<ForwardCache> {
    let (s0, init) = init_vertex_state_with_cache(
        raw,
        &graph.vertices,
        r0,
        &params.embed_point,
        &params.embed_post,
    )?;
    let mut states = vec![s0];
    let mut iters = Vec::with_capacity(params.iterations.len());
    for it in &params.iterations {
        let (s, cache) =
            gnn_iteration_with_cache(graph, states.last().unwrap(), it, params.auto_registration)?;
        states.push(s);
        iters.push(cache);
    }
    let (prediction, heads) = predict_with_cache(states.last().unwrap(), params, spec)?;
    Ok(ForwardCache {
        init,
        iters,
        states,
        heads,
        prediction,
    })
}

/// Backward pass: gradients of a scalar loss given its gradients w.r.t. the
/// class logits and the per-class localization outputs.
pub fn backward_full(
    params: &PointGnnParams,
    cache: &ForwardCache,
    grad_logits: &Tensor2,
    grad_loc: &[Tensor2],
) -> Result<PointGnnParams> {
    let mut grads = params.zeros_like();
    // heads
    let (cls_grads, mut grad_states) =
        params.head_cls.backward(&cache.heads.cls_cache, grad_logits)?;
    grads.head_cls = cls_grads;
    for (c, head) in params.head_loc.iter().enumerate() {
        let (hg, gs) = head.backward(&cache.heads.loc_caches[c], &grad_loc[c])?;
        grads.head_loc[c] = hg;
        grad_states.add_assign(&gs);
    }
    // GNN iterations in reverse
    for (t, it) in params.iterations.iter().enumerate().rev() {
        let icache = &cache.iters[t];
        let (g_grads, grad_pooled) = it.mlp_g.backward(&icache.g_cache, &grad_states)?;
        grads.iterations[t].mlp_g = g_grads;
        let grad_edge_feats =
            max_aggregate_backward(&icache.argmax, &grad_pooled, icache.edges.len())?;
        let (f_grads, grad_f_input) = it.mlp_f.backward(&icache.f_cache, &grad_edge_feats)?;
        grads.iterations[t].mlp_f = f_grads;
        // residual path
        let mut grad_prev = grad_states.clone();
        let k = grad_prev.cols;
        let mut grad_offsets = Tensor2::zeros(grad_prev.rows, 3);
        for (e, edge) in icache.edges.iter().enumerate() {
            let row = grad_f_input.row(e);
            for a in 0..3 {
                grad_offsets.data[edge.dst * 3 + a] += row[a];
            }
            let dst_row = grad_prev.row_mut(edge.src);
            for a in 0..k {
                dst_row[a] += row[3 + a];
            }
        }
        if params.auto_registration {
            let h_cache = icache.h_cache.as_ref().expect("h cache present");
            let (h_grads, gs) = it.mlp_h.backward(h_cache, &grad_offsets)?;
            grads.iterations[t].mlp_h = h_grads;
            grad_prev.add_assign(&gs);
        }
        grad_states = grad_prev;
    }
    // initial embedding
    let (post_grads, grad_pooled) = params
        .embed_post
        .backward(&cache.init.post_cache, &grad_states)?;
    grads.embed_post = post_grads;
    let grad_rows =
        max_aggregate_backward(&cache.init.argmax, &grad_pooled, cache.init.row_count)?;
    let (point_grads, _) = params
        .embed_point
        .backward(&cache.init.point_cache, &grad_rows)?;
    grads.embed_point = point_grads;
    Ok(grads)
}

/// Decode one detection per vertex whose argmax class is localized; the
/// score is that class's probability. Background/DoNotCare vertices emit
/// nothing.
pub fn decode_detections(
    pred: &RawPrediction,
    vertices: &PointCloud,
    spec: &ClassSpec,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for v in 0..pred.probs.rows {
        let row = pred.probs.row(v);
        let (class, &score) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let Some(slot) = spec.localized_slot(class) else {
            continue;
        };
        let constants = spec.constants(class).unwrap();
        let enc = EncodedBox::from_array(pred.loc[slot].row(v).try_into().unwrap());
        let bbox = decode_box(&enc, vertices.position(v), &constants);
        out.push(Detection {
            class,
            bbox,
            score,
            vertex: v,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::model::params::ModelDims;
    use crate::pointcloud::Point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_cloud(n: usize, extent: f64, r: &mut ChaCha8Rng) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Point::new(
                        r.random_range(0.0..extent),
                        r.random_range(0.0..extent),
                        r.random_range(0.0..extent),
                        r.random_range(0.0..1.0),
                    )
                })
                .collect(),
        )
    }

    fn toy_params(seed: u64, auto_reg: bool) -> (PointGnnParams, ClassSpec) {
        let spec = ClassSpec::car();
        let params = PointGnnParams::init(&ModelDims::toy(), &spec, auto_reg, &mut rng(seed));
        (params, spec)
    }

    #[test]
    fn init_state_zero_params_zero_states() {
        let mut r = rng(1);
        let raw = random_cloud(50, 5.0, &mut r);
        let vertices = random_cloud(10, 5.0, &mut r);
        let embed_point = MlpParams::zeros(&[4, 8]);
        let embed_post = MlpParams::zeros(&[8, 6]);
        let states = init_vertex_state(&raw, &vertices, 1.0, &embed_point, &embed_post).unwrap();
        assert_eq!(states.states.rows, 10);
        assert!(states.states.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_state_coincident_vertex_relative_zero() {
        // a vertex sitting exactly on the single raw point embeds
        // [(0,0,0), intensity]
        let raw = PointCloud::new(vec![Point::new(2.0, 3.0, 1.0, 0.7)]);
        let vertices = raw.clone();
        let mut r = rng(2);
        let embed_point = MlpParams::init(&[4, 8, 6], &mut r);
        let embed_post = MlpParams::init(&[6, 5], &mut r);
        let states =
            init_vertex_state(&raw, &vertices, 1.0, &embed_point, &embed_post).unwrap();
        let feat = Tensor2::from_rows(&[vec![0.0, 0.0, 0.0, 0.7]]).unwrap();
        let (e, _) = embed_point.forward(&feat).unwrap();
        let (expect, _) = embed_post.forward(&e).unwrap();
        assert_eq!(states.states.data, expect.data);
    }

    #[test]
    fn init_state_matches_gather_oracle() {
        let mut r = rng(3);
        let raw = random_cloud(200, 8.0, &mut r);
        let vertices = random_cloud(20, 8.0, &mut r);
        let embed_point = MlpParams::init(&[4, 8, 6], &mut r);
        let embed_post = MlpParams::init(&[6, 5], &mut r);
        let r0 = 1.5;
        let states =
            init_vertex_state(&raw, &vertices, r0, &embed_point, &embed_post).unwrap();
        for (vi, v) in vertices.points.iter().enumerate() {
            // brute-force gather-embed-max
            let mut pooled = vec![f64::NEG_INFINITY; 6];
            let mut any = false;
            for p in &raw.points {
                let d2: f64 = (0..3)
                    .map(|a| (p.position[a] - v.position[a]).powi(2))
                    .sum();
                if d2 < r0 * r0 {
                    any = true;
                    let feat = Tensor2::from_rows(&[vec![
                        p.position[0] - v.position[0],
                        p.position[1] - v.position[1],
                        p.position[2] - v.position[2],
                        p.intensity,
                    ]])
                    .unwrap();
                    let (e, _) = embed_point.forward(&feat).unwrap();
                    for (m, &val) in pooled.iter_mut().zip(e.row(0)) {
                        *m = m.max(val);
                    }
                }
            }
            if !any {
                pooled = vec![0.0; 6];
            }
            let (expect, _) = embed_post
                .forward(&Tensor2::from_rows(&[pooled]).unwrap())
                .unwrap();
            for (a, b) in states.states.row(vi).iter().zip(expect.row(0)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn iteration_zero_offset_head_matches_no_registration() {
        let mut r = rng(4);
        let cloud = random_cloud(20, 6.0, &mut r);
        let graph = build_graph(&cloud, 3.0, false).unwrap();
        let (params, _) = toy_params(5, true);
        let it = &params.iterations[0];
        let states = VertexStates {
            states: Tensor2::from_vec(
                20,
                64,
                (0..20 * 64).map(|_| r.random_range(-1.0..1.0)).collect(),
            )
            .unwrap(),
            iteration: 0,
        };
        // mlp_h final layer is zero-initialized, so offsets vanish
        let with = gnn_iteration(&graph, &states, it, true).unwrap();
        let without = gnn_iteration(&graph, &states, it, false).unwrap();
        assert_eq!(with.states.data, without.states.data);
    }

    #[test]
    fn iteration_zero_g_is_residual_identity() {
        let mut r = rng(6);
        let cloud = random_cloud(15, 6.0, &mut r);
        let graph = build_graph(&cloud, 3.0, false).unwrap();
        let (mut params, _) = toy_params(7, true);
        params.iterations[0].mlp_g.zero_final_layer();
        let states = VertexStates {
            states: Tensor2::from_vec(
                15,
                64,
                (0..15 * 64).map(|_| r.random_range(-1.0..1.0)).collect(),
            )
            .unwrap(),
            iteration: 0,
        };
        let next = gnn_iteration(&graph, &states, &params.iterations[0], true).unwrap();
        assert_eq!(next.states.data, states.states.data);
    }

    #[test]
    fn iteration_matches_per_edge_oracle() {
        let mut r = rng(8);
        let cloud = random_cloud(20, 6.0, &mut r);
        let graph = build_graph(&cloud, 3.5, false).unwrap();
        let (mut params, _) = toy_params(9, true);
        // give the offset head real weights so auto-registration is active
        params.iterations[0].mlp_h =
            MlpParams::init(&[64, 64, 3], &mut r);
        let it = &params.iterations[0];
        let states = VertexStates {
            states: Tensor2::from_vec(
                20,
                64,
                (0..20 * 64).map(|_| r.random_range(-1.0..1.0)).collect(),
            )
            .unwrap(),
            iteration: 0,
        };
        let fast = gnn_iteration(&graph, &states, it, true).unwrap();
        // straight-line oracle, one edge at a time
        let (offsets, _) = it.mlp_h.forward(&states.states).unwrap();
        for i in 0..20 {
            let mut pooled = vec![f64::NEG_INFINITY; it.mlp_f.output_dim()];
            let mut any = false;
            for edge in &graph.edges {
                if edge.dst != i {
                    continue;
                }
                any = true;
                let xd = cloud.position(edge.dst);
                let xs = cloud.position(edge.src);
                let mut input = vec![0.0; 3 + 64];
                for a in 0..3 {
                    input[a] = xs[a] - xd[a] + offsets.get(i, a);
                }
                input[3..].copy_from_slice(states.states.row(edge.src));
                let (e, _) = it
                    .mlp_f
                    .forward(&Tensor2::from_rows(&[input]).unwrap())
                    .unwrap();
                for (m, &v) in pooled.iter_mut().zip(e.row(0)) {
                    *m = m.max(v);
                }
            }
            if !any {
                pooled = vec![0.0; it.mlp_f.output_dim()];
            }
            let (g, _) = it
                .mlp_g
                .forward(&Tensor2::from_rows(&[pooled]).unwrap())
                .unwrap();
            for (a, (&gv, &sv)) in g.row(0).iter().zip(states.states.row(i)).enumerate() {
                let expect = gv + sv;
                assert!(
                    (fast.states.get(i, a) - expect).abs() < 1e-12,
                    "vertex {i} component {a}"
                );
            }
        }
    }

    #[test]
    fn predict_uniform_for_zero_heads() {
        let (mut params, spec) = toy_params(10, true);
        params.head_cls = MlpParams::zeros(&[64, 64, 4]);
        params.head_loc = vec![MlpParams::zeros(&[64, 64, 7]); 2];
        let states = VertexStates {
            states: Tensor2::from_vec(5, 64, vec![0.3; 5 * 64]).unwrap(),
            iteration: 2,
        };
        let pred = predict(&states, &params, &spec).unwrap();
        for i in 0..5 {
            for &p in pred.probs.row(i) {
                assert!((p - 0.25).abs() < 1e-12);
            }
            assert!(pred.loc.iter().all(|l| l.row(i).iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn predict_probabilities_normalized() {
        let mut r = rng(11);
        let (params, spec) = toy_params(12, true);
        let states = VertexStates {
            states: Tensor2::from_vec(
                8,
                64,
                (0..8 * 64).map(|_| r.random_range(-2.0..2.0)).collect(),
            )
            .unwrap(),
            iteration: 2,
        };
        let pred = predict(&states, &params, &spec).unwrap();
        for i in 0..8 {
            let sum: f64 = pred.probs.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(pred.probs.row(i).iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn gnn_translation_invariance() {
        // fixed vertex and edge set, global shift: states must be unchanged
        let mut r = rng(13);
        let raw = random_cloud(100, 8.0, &mut r);
        let vres =
            crate::pointcloud::voxel_downsample(&raw, 0.8, crate::pointcloud::VoxelMode::CentroidNearest, 0)
                .unwrap();
        let (params, spec) = toy_params(14, true);
        let graph = build_graph(&vres.cloud, 3.0, false).unwrap();
        let run = |shift: [f64; 3]| {
            let move_cloud = |c: &PointCloud| {
                PointCloud::new(
                    c.points
                        .iter()
                        .map(|p| {
                            Point::new(
                                p.position[0] + shift[0],
                                p.position[1] + shift[1],
                                p.position[2] + shift[2],
                                p.intensity,
                            )
                        })
                        .collect(),
                )
            };
            let raw_m = move_cloud(&raw);
            let verts_m = move_cloud(&vres.cloud);
            let graph_m = Graph {
                vertices: verts_m.clone(),
                edges: graph.edges.clone(),
                radius: graph.radius,
            };
            let mut s =
                init_vertex_state(&raw_m, &verts_m, 1.0, &params.embed_point, &params.embed_post)
                    .unwrap();
            for it in &params.iterations {
                s = gnn_iteration(&graph_m, &s, it, true).unwrap();
            }
            predict(&s, &params, &spec).unwrap()
        };
        let base = run([0.0; 3]);
        let moved = run([57.0, -23.0, 4.5]);
        for (a, b) in base.probs.data.iter().zip(&moved.probs.data) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-9), "{a} vs {b}");
        }
        for (la, lb) in base.loc.iter().zip(&moved.loc) {
            for (a, b) in la.data.iter().zip(&lb.data) {
                assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-9));
            }
        }
    }

    #[test]
    fn vertex_permutation_equivariance() {
        let mut r = rng(15);
        let cloud = random_cloud(25, 8.0, &mut r);
        let raw = random_cloud(150, 8.0, &mut r);
        let (params, spec) = toy_params(16, true);
        let graph = build_graph(&cloud, 3.0, false).unwrap();
        let forward = |raw: &PointCloud, graph: &Graph| {
            let mut s = init_vertex_state(
                raw,
                &graph.vertices,
                1.0,
                &params.embed_point,
                &params.embed_post,
            )
            .unwrap();
            for it in &params.iterations {
                s = gnn_iteration(graph, &s, it, true).unwrap();
            }
            predict(&s, &params, &spec).unwrap()
        };
        let base = forward(&raw, &graph);
        // permute vertices and relabel edges
        let n = cloud.len();
        let perm: Vec<usize> = (0..n).rev().collect(); // new index -> old index
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let permuted_cloud =
            PointCloud::new(perm.iter().map(|&o| cloud.points[o]).collect());
        let mut edges: Vec<Edge> = graph
            .edges
            .iter()
            .map(|e| Edge {
                dst: inv[e.dst],
                src: inv[e.src],
            })
            .collect();
        edges.sort_unstable();
        let pgraph = Graph {
            vertices: permuted_cloud,
            edges,
            radius: graph.radius,
        };
        let permuted = forward(&raw, &pgraph);
        for new in 0..n {
            let old = perm[new];
            for c in 0..spec.num_classes() {
                assert!((permuted.probs.get(new, c) - base.probs.get(old, c)).abs() < 1e-9);
            }
            for slot in 0..base.loc.len() {
                for c in 0..7 {
                    assert!(
                        (permuted.loc[slot].get(new, c) - base.loc[slot].get(old, c)).abs()
                            < 1e-9
                    );
                }
            }
        }
    }
}
