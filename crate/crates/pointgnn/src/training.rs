//! Scene augmentation, synthetic-scene generation, and the SGD training
//! loop.
//!
//! Coordinates: x forward, y left, z up; boxes sit on the ground plane z=0.

use crate::boxes::{assign_vertex_labels, bev_iou, point_in_box, Box3D};
use crate::error::{Error, Result};
use crate::graph::{build_graph, cap_edges};
use crate::model::{
    forward_with_cache, loss_and_gradients, ClassSpec, LossParts, LossWeights, PointGnnParams,
};
use crate::pointcloud::{voxel_downsample, Point, PointCloud, VoxelMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One training example: a raw cloud plus oriented ground-truth boxes with
/// their base class names.
#[derive(Debug, Clone)]
pub struct Scene {
    pub cloud: PointCloud,
    pub gt_boxes: Vec<(Box3D, String)>,
}

#[derive(Debug, Clone, Copy)]
pub struct AugmentConfig {
    pub rotate: bool,
    pub flip: bool,
    pub box_shift: bool,
}

impl AugmentConfig {
    pub fn all() -> Self {
        AugmentConfig {
            rotate: true,
            flip: true,
            box_shift: true,
        }
    }

    pub fn none() -> Self {
        AugmentConfig {
            rotate: false,
            flip: false,
            box_shift: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub weights: LossWeights,
    pub initial_lr: f64,
    pub decay_rate: f64,
    pub decay_interval: usize,
    pub total_steps: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub edge_cap: usize,
    pub radius: f64,
    pub r0: f64,
    pub voxel_size: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::argument("batch_size must be positive"));
        }
        if self.initial_lr <= 0.0 {
            return Err(Error::argument("initial learning rate must be positive"));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::argument("decay rate must lie in (0, 1]"));
        }
        if self.decay_interval == 0 {
            return Err(Error::argument("decay interval must be positive"));
        }
        if self.radius <= 0.0 || self.r0 <= 0.0 || self.voxel_size <= 0.0 {
            return Err(Error::argument("radius, r0 and voxel_size must be positive"));
        }
        Ok(())
    }
}

/// One loss-curve row.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub step: usize,
    pub parts: LossParts,
    pub lr: f64,
}

pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("step,l_cls,l_loc,l_reg,total,lr\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.step,
            p.parts.classification,
            p.parts.localization,
            p.parts.regularization,
            p.parts.total,
            p.lr
        ));
    }
    out
}

/// Rotate every point and box about the z axis through the origin.
pub fn rotate_scene(scene: &mut Scene, dtheta: f64) {
    let (c, s) = (dtheta.cos(), dtheta.sin());
    let rot = |p: [f64; 3]| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
    for p in &mut scene.cloud.points {
        p.position = rot(p.position);
    }
    for (b, _) in &mut scene.gt_boxes {
        b.center = rot(b.center);
        b.yaw += dtheta;
    }
}

/// Mirror the scene across the x-z plane: y -> -y, yaw -> -yaw.
pub fn flip_scene(scene: &mut Scene) {
    for p in &mut scene.cloud.points {
        p.position[1] = -p.position[1];
    }
    for (b, _) in &mut scene.gt_boxes {
        b.center[1] = -b.center[1];
        b.yaw = -b.yaw;
    }
}

fn inflated(b: &Box3D, factor: f64) -> Box3D {
    Box3D::new(
        b.center,
        [b.size[0] * factor, b.size[1] * factor, b.size[2] * factor],
        b.yaw,
    )
}

fn translated(b: &Box3D, d: [f64; 3]) -> Box3D {
    Box3D::new(
        [b.center[0] + d[0], b.center[1] + d[1], b.center[2] + d[2]],
        b.size,
        b.yaw,
    )
}

/// Per-box horizontal shift: each box and the points within its
/// 110%-inflated hull move together by (dx, dy) ~ N(0, 3 m) with z frozen.
/// A draw is rejected when the moved box overlaps another box in BEV or the
/// destination hull already contains background points; after 10 rejections
/// the box stays put. Returns how many boxes were left unshifted.
pub fn shift_boxes(scene: &mut Scene, rng: &mut ChaCha8Rng) -> usize {
    let normal = Normal::new(0.0, 3.0).expect("valid sigma");
    let mut skipped = 0;
    for bi in 0..scene.gt_boxes.len() {
        let hull = inflated(&scene.gt_boxes[bi].0, 1.1);
        let member: Vec<bool> = scene
            .cloud
            .points
            .iter()
            .map(|p| point_in_box(p.position, &hull))
            .collect();
        let mut placed = false;
        for _ in 0..10 {
            let d = [normal.sample(rng), normal.sample(rng), 0.0];
            let moved = translated(&scene.gt_boxes[bi].0, d);
            let collides = scene
                .gt_boxes
                .iter()
                .enumerate()
                .any(|(j, (other, _))| j != bi && bev_iou(&moved, other) > 0.0);
            if collides {
                continue;
            }
            let dest_hull = translated(&hull, d);
            let occupied = scene
                .cloud
                .points
                .iter()
                .zip(&member)
                .any(|(p, &m)| !m && point_in_box(p.position, &dest_hull));
            if occupied {
                continue;
            }
            scene.gt_boxes[bi].0 = moved;
            for (p, &m) in scene.cloud.points.iter_mut().zip(&member) {
                if m {
                    p.position[0] += d[0];
                    p.position[1] += d[1];
                }
            }
            placed = true;
            break;
        }
        if !placed {
            skipped += 1;
        }
    }
    skipped
}

/// Global yaw rotation ~ N(0, pi/8), mirror with probability 0.5, then
/// per-box horizontal shifts. With every toggle off this is the identity.
pub fn augment_scene(scene: &Scene, config: &AugmentConfig, rng: &mut ChaCha8Rng) -> Scene {
    let mut out = scene.clone();
    if config.rotate {
        let normal = Normal::new(0.0, std::f64::consts::PI / 8.0).expect("valid sigma");
        rotate_scene(&mut out, normal.sample(rng));
    }
    if config.flip && rng.random_range(0.0..1.0) < 0.5 {
        flip_scene(&mut out);
    }
    if config.box_shift {
        shift_boxes(&mut out, rng);
    }
    out
}

/// Knobs for synthetic-scene generation.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    /// (base class name, median l, h, w) choices for sampled boxes.
    pub classes: Vec<(String, [f64; 3])>,
    pub min_boxes: usize,
    pub max_boxes: usize,
    /// Horizontal placement range: x in [x_min, x_max], y in [-y_max, y_max].
    pub x_range: (f64, f64),
    pub y_max: f64,
    /// Sample points per square meter of visible face area.
    pub face_density: f64,
    pub noise_sigma: f64,
    pub clutter_points: usize,
}

impl SceneSpec {
    pub fn toy_cars() -> Self {
        SceneSpec {
            classes: vec![("Car".into(), [3.88, 1.5, 1.63])],
            min_boxes: 2,
            max_boxes: 5,
            x_range: (6.0, 30.0),
            y_max: 12.0,
            face_density: 12.0,
            noise_sigma: 0.02,
            clutter_points: 60,
        }
    }
}

/// Sample a point uniformly on a parallelogram face and push it outward with
/// Gaussian noise.
fn sample_face(
    center: [f64; 3],
    u_axis: [f64; 3],
    u_half: f64,
    v_axis: [f64; 3],
    v_half: f64,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> [f64; 3] {
    let a = rng.random_range(-u_half..=u_half);
    let b = rng.random_range(-v_half..=v_half);
    let mut p = [0.0; 3];
    for i in 0..3 {
        p[i] = center[i] + a * u_axis[i] + b * v_axis[i];
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("valid sigma");
        for c in p.iter_mut() {
            *c += normal.sample(rng);
        }
    }
    p
}

/// Build a scene: K boxes with sizes within ±20% of the class medians,
/// random yaw, non-overlapping ground placements; points sampled on the
/// sensor-facing side faces and the top face; uniform ground clutter kept
/// outside every inflated box; intensities uniform in [0, 1).
pub fn generate_synthetic_scene(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<Scene> {
    if spec.classes.is_empty() && spec.max_boxes > 0 {
        return Err(Error::generation("no classes to sample boxes from"));
    }
    if spec.min_boxes > spec.max_boxes {
        return Err(Error::generation("min_boxes exceeds max_boxes"));
    }
    let k = if spec.max_boxes == 0 {
        0
    } else {
        rng.random_range(spec.min_boxes..=spec.max_boxes)
    };
    let mut gt_boxes: Vec<(Box3D, String)> = Vec::with_capacity(k);
    for _ in 0..k {
        let (name, median) = &spec.classes[rng.random_range(0..spec.classes.len())];
        let size = [
            median[0] * rng.random_range(0.8..=1.2),
            median[1] * rng.random_range(0.8..=1.2),
            median[2] * rng.random_range(0.8..=1.2),
        ];
        let mut placed = false;
        for _ in 0..100 {
            let center = [
                rng.random_range(spec.x_range.0..=spec.x_range.1),
                rng.random_range(-spec.y_max..=spec.y_max),
                size[1] / 2.0,
            ];
            let candidate = Box3D::new(center, size, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
            if gt_boxes
                .iter()
                .all(|(b, _)| bev_iou(&inflated(&candidate, 1.3), &inflated(b, 1.3)) == 0.0)
            {
                gt_boxes.push((candidate, name.clone()));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::generation("could not place a box without overlap"));
        }
    }

    let mut points = Vec::new();
    for (b, _) in &gt_boxes {
        let (v_l, v_w, v_h) = b.axes();
        let (l, h, w) = (b.size[0], b.size[1], b.size[2]);
        // side faces whose outward normal points back at the sensor (origin)
        let sides = [
            (v_l, l / 2.0, v_w, w / 2.0), // +l face normal v_l
            (v_w, w / 2.0, v_l, l / 2.0), // +w face normal v_w
        ];
        for (normal_axis, half, u_axis, u_half) in sides {
            for sign in [1.0, -1.0] {
                let face_center = [
                    b.center[0] + sign * half * normal_axis[0],
                    b.center[1] + sign * half * normal_axis[1],
                    b.center[2] + sign * half * normal_axis[2],
                ];
                let outward = [
                    sign * normal_axis[0],
                    sign * normal_axis[1],
                    sign * normal_axis[2],
                ];
                // visible iff the outward normal opposes the view ray
                let dot: f64 = (0..3).map(|i| outward[i] * face_center[i]).sum();
                if dot >= 0.0 {
                    continue;
                }
                let area = 2.0 * u_half * h;
                let n = (area * spec.face_density).ceil() as usize;
                for _ in 0..n {
                    let p = sample_face(
                        face_center,
                        u_axis,
                        u_half,
                        v_h,
                        h / 2.0,
                        spec.noise_sigma,
                        rng,
                    );
                    points.push(Point::new(p[0], p[1], p[2], rng.random_range(0.0..1.0)));
                }
            }
        }
        // top face
        let top_center = [
            b.center[0] + (h / 2.0) * v_h[0],
            b.center[1] + (h / 2.0) * v_h[1],
            b.center[2] + (h / 2.0) * v_h[2],
        ];
        let n = ((l * w) * spec.face_density).ceil() as usize;
        for _ in 0..n {
            let p = sample_face(top_center, v_l, l / 2.0, v_w, w / 2.0, spec.noise_sigma, rng);
            points.push(Point::new(p[0], p[1], p[2], rng.random_range(0.0..1.0)));
        }
    }

    let mut clutter = 0;
    let mut attempts = 0;
    while clutter < spec.clutter_points && attempts < spec.clutter_points * 50 {
        attempts += 1;
        let p = [
            rng.random_range(spec.x_range.0 - 3.0..=spec.x_range.1 + 3.0),
            rng.random_range(-spec.y_max - 3.0..=spec.y_max + 3.0),
            rng.random_range(0.0..=0.3),
        ];
        if gt_boxes
            .iter()
            .any(|(b, _)| point_in_box(p, &inflated(b, 1.1)))
        {
            continue;
        }
        points.push(Point::new(p[0], p[1], p[2], rng.random_range(0.0..1.0)));
        clutter += 1;
    }

    Ok(Scene {
        cloud: PointCloud::new(points),
        gt_boxes,
    })
}

/// Staircase decay: lr = initial * decay^floor(step / interval).
pub fn lr_schedule(step: usize, config: &TrainConfig) -> f64 {
    config.initial_lr * config.decay_rate.powi((step / config.decay_interval) as i32)
}

/// Plain SGD: params -= lr * grads. Rejects non-finite gradients with the
/// offending tensor's name.
pub fn sgd_step(params: &mut PointGnnParams, grads: &PointGnnParams, lr: f64) -> Result<()> {
    let mut bad: Option<String> = None;
    grads.visit_mlps(|name, m| {
        if bad.is_none() {
            let mut finite = true;
            m.for_each(&mut |v| finite &= v.is_finite());
            if !finite {
                bad = Some(name);
            }
        }
    });
    if let Some(name) = bad {
        return Err(Error::training(format!("non-finite gradient in {name}")));
    }
    params.add_scaled(grads, -lr);
    Ok(())
}

/// Final parameters plus the per-step loss curve.
pub struct TrainOutput {
    pub params: PointGnnParams,
    pub curve: Vec<CurvePoint>,
}

/// SGD training loop: per step, draw a batch of scenes, augment, jitter the
/// vertices with a random voxel downsample, build and cap the graph, run the
/// network, average the gradients and step. `on_step` fires after every
/// update (for checkpointing); the loop is single-threaded and
/// bit-reproducible for a fixed seed.
pub fn train(
    config: &TrainConfig,
    scenes: &[Scene],
    spec: &ClassSpec,
    mut params: PointGnnParams,
    mut on_step: impl FnMut(usize, &PointGnnParams, &CurvePoint) -> Result<()>,
) -> Result<TrainOutput> {
    config.validate()?;
    if scenes.is_empty() {
        return Err(Error::training("no training scenes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut curve = Vec::with_capacity(config.total_steps);
    for step in 0..config.total_steps {
        let lr = lr_schedule(step, config);
        let mut grad_sum = params.zeros_like();
        let mut cls = 0.0;
        let mut loc = 0.0;
        let mut reg = 0.0;
        let mut total = 0.0;
        let mut used = 0usize;
        for _ in 0..config.batch_size {
            let scene = &scenes[rng.random_range(0..scenes.len())];
            let scene = augment_scene(scene, &config.augment, &mut rng);
            if scene.cloud.is_empty() {
                continue;
            }
            let down = voxel_downsample(
                &scene.cloud,
                config.voxel_size,
                VoxelMode::Random,
                rng.random::<u64>(),
            )?;
            if down.cloud.is_empty() {
                continue;
            }
            let graph = build_graph(&down.cloud, config.radius, false)?;
            let graph = cap_edges(&graph, config.edge_cap, rng.random::<u64>())?;
            let labels = assign_vertex_labels(&down.cloud, &scene.gt_boxes, spec);
            let cache = forward_with_cache(&params, spec, &scene.cloud, &graph, config.r0)?;
            let (parts, grads) =
                loss_and_gradients(&params, spec, &cache, &labels, &config.weights)?;
            if !parts.total.is_finite() {
                return Err(Error::training(format!(
                    "non-finite loss at step {step}: {parts:?}"
                )));
            }
            grad_sum.add_scaled(&grads, 1.0);
            cls += parts.classification;
            loc += parts.localization;
            reg += parts.regularization;
            total += parts.total;
            used += 1;
        }
        if used == 0 {
            return Err(Error::training(format!("empty batch at step {step}")));
        }
        let scale = 1.0 / used as f64;
        let mut grads = params.zeros_like();
        grads.add_scaled(&grad_sum, scale);
        sgd_step(&mut params, &grads, lr)?;
        let point = CurvePoint {
            step,
            parts: LossParts {
                classification: cls * scale,
                localization: loc * scale,
                regularization: reg * scale,
                total: total * scale,
            },
            lr,
        };
        on_step(step, &params, &point)?;
        curve.push(point);
    }
    Ok(TrainOutput { params, curve })
}
