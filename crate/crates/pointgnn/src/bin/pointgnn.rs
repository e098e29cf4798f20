//! Command-line front end for the detection pipeline.

use clap::{Parser, Subcommand};
use pointgnn::boxes::{boxes_to_text, iou_3d, parse_boxes_text, Box3D};
use pointgnn::cli::{
    load_scene_dir, parse_config, parse_toggles, save_scene_dir, write_atomic, Preset, Toggles,
};
use pointgnn::error::Error;
use pointgnn::eval::{
    average_precision, match_detections, report_to_csv, ApProtocol, EvalDetection,
    EvalGroundTruth, EvalRecord, ReportRow,
};
use pointgnn::graph::{build_graph, build_graph_brute_force};
use pointgnn::model::{forward_full, InferenceConfig, PointGnnParams};
use pointgnn::nn::{grad_check, load_checkpoint, save_checkpoint};
use pointgnn::pointcloud::{self, scanline_downsample, PointCloud, VoxelMode};
use pointgnn::training::{
    curve_to_csv, generate_synthetic_scene, train, Scene, SceneSpec,
};
use pointgnn::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "pointgnn", about = "Point-cloud 3D object detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the fixed-radius graph of a cloud, report stats, optionally
    /// verify against the brute-force edge set or dump the edges.
    Graph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        radius: f64,
        #[arg(long)]
        self_loops: bool,
        /// Compare against the O(N^2) reference construction.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate synthetic training scenes into a directory.
    Synth {
        #[arg(long)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2)]
        min_boxes: usize,
        #[arg(long, default_value_t = 5)]
        max_boxes: usize,
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
        #[arg(long, default_value_t = 60)]
        clutter: usize,
    },
    /// Train a model on a scene directory.
    Train {
        #[arg(long, default_value = "toy")]
        preset: String,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Loss-curve CSV destination.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Overwrite the checkpoint every N steps while training.
        #[arg(long, default_value_t = 500)]
        checkpoint_every: usize,
    },
    /// Run the full pipeline on one cloud and write scored boxes.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "toy")]
        preset: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "merge+score")]
        nms: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score detection files against ground-truth files (file or directory
    /// pairs in the scene text format).
    Eval {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gts: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// AP protocol: 40 or 11 recall points.
        #[arg(long, default_value_t = 40)]
        protocol: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run inference + evaluation over a scene directory with ablation
    /// toggles (auto_reg=on/off, nms=<mode>, t=<iterations>).
    Ablate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "toy")]
        preset: String,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        toggle: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value_t = 40)]
        protocol: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Scan-line sparsity sweep: evaluate the model on clouds downsampled
    /// to fewer beams.
    Sparsity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "toy")]
        preset: String,
        #[arg(long)]
        scenes: PathBuf,
        /// Comma-separated target line counts.
        #[arg(long, default_value = "64,32,16,8")]
        lines: String,
        #[arg(long, default_value_t = 25)]
        kmeans_iters: usize,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value_t = 40)]
        protocol: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time graph construction and a full forward pass on random data.
    Bench {
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[arg(long, default_value_t = 4.0)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
    },
    /// Finite-difference check of the end-to-end training gradient.
    Gradcheck {
        #[arg(long, default_value_t = 500)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn emit(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn protocol_from(points: u32) -> Result<ApProtocol> {
    match points {
        40 => Ok(ApProtocol::Interp40),
        11 => Ok(ApProtocol::Interp11),
        other => Err(Error::argument(format!(
            "protocol must be 40 or 11, got {other}"
        ))),
    }
}

fn load_model(path: &Path) -> Result<PointGnnParams> {
    PointGnnParams::from_entries(&load_checkpoint(path)?)
}

fn load_preset(name: &str, config: &Option<PathBuf>) -> Result<Preset> {
    let mut preset = Preset::by_name(name)?;
    if let Some(path) = config {
        preset.apply_config(&parse_config(&std::fs::read_to_string(path)?)?)?;
    }
    Ok(preset)
}

/// Pool greedy matches over (detections, ground truths) pairs and compute
/// one AP row per base class name.
fn evaluate_pairs(
    pairs: &[(Vec<(String, Box3D, f64)>, Vec<(String, Box3D)>)],
    iou: f64,
    protocol: ApProtocol,
) -> Result<Vec<ReportRow>> {
    let mut names: Vec<String> = pairs
        .iter()
        .flat_map(|(d, g)| {
            d.iter()
                .map(|(n, _, _)| n.clone())
                .chain(g.iter().map(|(n, _)| n.clone()))
        })
        .collect();
    names.sort();
    names.dedup();
    let index_of = |n: &str| names.iter().position(|x| x == n).unwrap();
    let mut rows = Vec::new();
    for name in &names {
        let class = index_of(name);
        let mut record = EvalRecord::default();
        let mut num_det = 0usize;
        for (dets, gts) in pairs {
            let d: Vec<EvalDetection> = dets
                .iter()
                .filter(|(n, _, _)| n == name)
                .map(|(_, b, s)| EvalDetection {
                    class,
                    bbox: *b,
                    score: *s,
                })
                .collect();
            let g: Vec<EvalGroundTruth> = gts
                .iter()
                .filter(|(n, _)| n == name)
                .map(|(_, b)| EvalGroundTruth { class, bbox: *b })
                .collect();
            num_det += d.len();
            record.merge(&match_detections(&d, &g, &iou_3d, iou)?);
        }
        let ap = if record.num_gt == 0 {
            continue;
        } else {
            average_precision(&record, protocol)?
        };
        rows.push(ReportRow {
            class: name.clone(),
            iou_threshold: iou,
            ap,
            num_gt: record.num_gt,
            num_det,
        });
    }
    Ok(rows)
}

/// Run the pipeline over scenes and evaluate against their ground truths.
fn infer_and_evaluate(
    params: &PointGnnParams,
    preset: &Preset,
    scenes: &[Scene],
    config: &InferenceConfig,
    iou: f64,
    protocol: ApProtocol,
) -> Result<Vec<ReportRow>> {
    let mut pairs = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let dets = forward_full(params, &preset.spec, &scene.cloud, config)?;
        let det_rows: Vec<(String, Box3D, f64)> = dets
            .iter()
            .map(|d| {
                (
                    preset.spec.base_name(d.class).unwrap_or("unknown").to_string(),
                    d.bbox,
                    d.score,
                )
            })
            .collect();
        let gt_rows: Vec<(String, Box3D)> = scene
            .gt_boxes
            .iter()
            .map(|(b, n)| (n.clone(), *b))
            .collect();
        pairs.push((det_rows, gt_rows));
    }
    evaluate_pairs(&pairs, iou, protocol)
}

fn apply_toggles(params: &mut PointGnnParams, toggles: &Toggles) {
    if let Some(on) = toggles.auto_registration {
        params.auto_registration = on;
    }
    if let Some(t) = toggles.iterations {
        params.iterations.truncate(t);
    }
}

fn inference_config(preset: &Preset, nms_mode: pointgnn::postprocess::NmsMode, seed: u64) -> InferenceConfig {
    InferenceConfig {
        radius: preset.radius,
        r0: preset.r0,
        voxel_size: preset.voxel_infer,
        voxel_mode: VoxelMode::CentroidNearest,
        voxel_seed: seed,
        nms_threshold: preset.nms_threshold,
        nms_mode,
    }
}

fn cmd_graph(
    input: &Path,
    radius: f64,
    self_loops: bool,
    oracle: bool,
    output: &Option<PathBuf>,
) -> Result<()> {
    let cloud = pointcloud::parse_text(&std::fs::read_to_string(input)?)?;
    let start = Instant::now();
    let graph = build_graph(&cloud, radius, self_loops)?;
    let elapsed = start.elapsed();
    let degrees = graph.in_degrees();
    let mean = if degrees.is_empty() {
        0.0
    } else {
        degrees.iter().sum::<usize>() as f64 / degrees.len() as f64
    };
    println!(
        "vertices: {}\nedges: {}\nmean in-degree: {:.2}\nmax in-degree: {}\nbuild time: {:.3} ms",
        graph.vertices.len(),
        graph.edges.len(),
        mean,
        degrees.iter().max().copied().unwrap_or(0),
        elapsed.as_secs_f64() * 1e3
    );
    if oracle {
        let reference = build_graph_brute_force(&cloud, radius, self_loops)?;
        if graph.edges == reference.edges {
            println!("oracle: MATCH ({} edges)", graph.edges.len());
        } else {
            println!(
                "oracle: MISMATCH (fast {} edges, reference {})",
                graph.edges.len(),
                reference.edges.len()
            );
            return Err(Error::format("graph oracle mismatch"));
        }
    }
    if let Some(path) = output {
        write_atomic(path, graph.dump().as_bytes())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    scenes: usize,
    seed: u64,
    output: &Path,
    min_boxes: usize,
    max_boxes: usize,
    noise: f64,
    clutter: usize,
) -> Result<()> {
    let mut spec = SceneSpec::toy_cars();
    spec.min_boxes = min_boxes;
    spec.max_boxes = max_boxes;
    spec.noise_sigma = noise;
    spec.clutter_points = clutter;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generated: Result<Vec<Scene>> = (0..scenes)
        .map(|_| generate_synthetic_scene(&spec, &mut rng))
        .collect();
    let generated = generated?;
    save_scene_dir(output, &generated)?;
    println!("wrote {} scenes to {}", generated.len(), output.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    preset_name: &str,
    scenes_dir: &Path,
    output: &Path,
    config: &Option<PathBuf>,
    seed: Option<u64>,
    steps: Option<usize>,
    curve_path: &Option<PathBuf>,
    checkpoint_every: usize,
) -> Result<()> {
    let mut preset = load_preset(preset_name, config)?;
    if let Some(s) = seed {
        preset.train.seed = s;
    }
    if let Some(s) = steps {
        preset.train.total_steps = s;
    }
    let scenes: Vec<Scene> = load_scene_dir(scenes_dir)?
        .into_iter()
        .filter(|s| !s.gt_boxes.is_empty())
        .collect();
    if scenes.is_empty() {
        return Err(Error::format("every scene is object-free; nothing to train on"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(preset.train.seed);
    let params = PointGnnParams::init(&preset.dims, &preset.spec, true, &mut rng);
    let result = train(
        &preset.train,
        &scenes,
        &preset.spec,
        params,
        |step, params, point| {
            if checkpoint_every > 0 && (step + 1) % checkpoint_every == 0 {
                save_checkpoint(output, &params.to_entries())?;
            }
            if (step + 1) % 100 == 0 {
                eprintln!(
                    "step {}: total {:.4} (cls {:.4}, loc {:.4}) lr {}",
                    step, point.parts.total, point.parts.classification,
                    point.parts.localization, point.lr
                );
            }
            Ok(())
        },
    )?;
    save_checkpoint(output, &result.params.to_entries())?;
    if let Some(path) = curve_path {
        write_atomic(path, curve_to_csv(&result.curve).as_bytes())?;
    }
    let first = result.curve.first().map(|p| p.parts.total).unwrap_or(0.0);
    let last = result.curve.last().map(|p| p.parts.total).unwrap_or(0.0);
    println!(
        "trained {} steps: loss {:.4} -> {:.4}; model at {}",
        result.curve.len(),
        first,
        last,
        output.display()
    );
    Ok(())
}

fn cmd_infer(
    model: &Path,
    preset_name: &str,
    input: &Path,
    output: &Option<PathBuf>,
    nms: &str,
    seed: u64,
) -> Result<()> {
    let preset = Preset::by_name(preset_name)?;
    let params = load_model(model)?;
    let cloud = pointcloud::parse_text(&std::fs::read_to_string(input)?)?;
    let config = inference_config(&preset, pointgnn::postprocess::NmsMode::parse(nms)?, seed);
    let dets = forward_full(&params, &preset.spec, &cloud, &config)?;
    let rows: Vec<(String, Box3D, Option<f64>)> = dets
        .iter()
        .map(|d| {
            (
                preset.spec.base_name(d.class).unwrap_or("unknown").to_string(),
                d.bbox,
                Some(d.score),
            )
        })
        .collect();
    emit(output, &boxes_to_text(&rows))
}

fn read_box_file(path: &Path) -> Result<Vec<(String, Box3D, Option<f64>)>> {
    parse_boxes_text(&std::fs::read_to_string(path)?)
}

/// Collect (dets, gts) pairs from two files or two directories with
/// matching file names.
fn collect_eval_pairs(
    dets: &Path,
    gts: &Path,
) -> Result<Vec<(Vec<(String, Box3D, f64)>, Vec<(String, Box3D)>)>> {
    let to_dets = |rows: Vec<(String, Box3D, Option<f64>)>| -> Vec<(String, Box3D, f64)> {
        rows.into_iter()
            .map(|(n, b, s)| (n, b, s.unwrap_or(0.0)))
            .collect()
    };
    let to_gts = |rows: Vec<(String, Box3D, Option<f64>)>| -> Vec<(String, Box3D)> {
        rows.into_iter().map(|(n, b, _)| (n, b)).collect()
    };
    if dets.is_dir() != gts.is_dir() {
        return Err(Error::argument(
            "--dets and --gts must both be files or both be directories",
        ));
    }
    if !dets.is_dir() {
        return Ok(vec![(
            to_dets(read_box_file(dets)?),
            to_gts(read_box_file(gts)?),
        )]);
    }
    let mut names: Vec<String> = std::fs::read_dir(dets)?
        .map(|e| Ok(e?.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_>>()?;
    names.sort();
    let mut pairs = Vec::new();
    for name in names {
        let gt_path = gts.join(&name);
        if !gt_path.exists() {
            return Err(Error::format(format!(
                "no ground-truth file for {name} in {}",
                gts.display()
            )));
        }
        pairs.push((
            to_dets(read_box_file(&dets.join(&name))?),
            to_gts(read_box_file(&gt_path)?),
        ));
    }
    if pairs.is_empty() {
        return Err(Error::format("no detection files found"));
    }
    Ok(pairs)
}

fn cmd_eval(
    dets: &Path,
    gts: &Path,
    iou: f64,
    protocol: u32,
    output: &Option<PathBuf>,
) -> Result<()> {
    let pairs = collect_eval_pairs(dets, gts)?;
    let rows = evaluate_pairs(&pairs, iou, protocol_from(protocol)?)?;
    emit(output, &report_to_csv(&rows))
}

#[allow(clippy::too_many_arguments)]
fn cmd_ablate(
    model: &Path,
    preset_name: &str,
    scenes_dir: &Path,
    toggle: &[String],
    iou: f64,
    protocol: u32,
    seed: u64,
    output: &Option<PathBuf>,
) -> Result<()> {
    let preset = Preset::by_name(preset_name)?;
    let mut params = load_model(model)?;
    let toggles = parse_toggles(toggle)?;
    apply_toggles(&mut params, &toggles);
    let nms = toggles
        .nms_mode
        .unwrap_or(pointgnn::postprocess::NmsMode::MergeScore);
    let scenes = load_scene_dir(scenes_dir)?;
    let config = inference_config(&preset, nms, seed);
    let rows = infer_and_evaluate(
        &params,
        &preset,
        &scenes,
        &config,
        iou,
        protocol_from(protocol)?,
    )?;
    emit(output, &report_to_csv(&rows))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sparsity(
    model: &Path,
    preset_name: &str,
    scenes_dir: &Path,
    lines: &str,
    kmeans_iters: usize,
    iou: f64,
    protocol: u32,
    seed: u64,
    output: &Option<PathBuf>,
) -> Result<()> {
    let preset = Preset::by_name(preset_name)?;
    let params = load_model(model)?;
    let scenes = load_scene_dir(scenes_dir)?;
    let targets: Result<Vec<usize>> = lines
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::argument(format!("bad line count '{s}'")))
        })
        .collect();
    let config = inference_config(&preset, pointgnn::postprocess::NmsMode::MergeScore, seed);
    let mut out = String::from("lines,class,iou_threshold,ap,num_gt,num_det\n");
    for target in targets? {
        let sparse: Result<Vec<Scene>> = scenes
            .iter()
            .map(|s| {
                Ok(Scene {
                    cloud: scanline_downsample(&s.cloud, 64, target, kmeans_iters, seed)?,
                    gt_boxes: s.gt_boxes.clone(),
                })
            })
            .collect();
        let rows = infer_and_evaluate(
            &params,
            &preset,
            &sparse?,
            &config,
            iou,
            protocol_from(protocol)?,
        )?;
        for r in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                target, r.class, r.iou_threshold, r.ap, r.num_gt, r.num_det
            ));
        }
    }
    emit(output, &out)
}

fn cmd_bench(points: usize, radius: f64, seed: u64, repeat: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = PointCloud::new(
        (0..points)
            .map(|_| {
                pointgnn::pointcloud::Point::new(
                    rng.random_range(0.0..30.0),
                    rng.random_range(-15.0..15.0),
                    rng.random_range(0.0..3.0),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect(),
    );
    let preset = Preset::by_name("toy")?;
    let params = PointGnnParams::init(&preset.dims, &preset.spec, true, &mut rng);
    let config = inference_config(&preset, pointgnn::postprocess::NmsMode::MergeScore, seed);
    for run in 0..repeat.max(1) {
        let start = Instant::now();
        let graph = build_graph(&cloud, radius, false)?;
        let graph_ms = start.elapsed().as_secs_f64() * 1e3;
        let start = Instant::now();
        let dets = forward_full(&params, &preset.spec, &cloud, &config)?;
        let forward_ms = start.elapsed().as_secs_f64() * 1e3;
        println!(
            "run {run}: graph {} edges in {graph_ms:.2} ms; forward ({} detections) in {forward_ms:.2} ms",
            graph.edges.len(),
            dets.len()
        );
    }
    Ok(())
}

fn cmd_gradcheck(probes: usize, seed: u64, tolerance: f64) -> Result<()> {
    use pointgnn::boxes::assign_vertex_labels;
    use pointgnn::graph::build_graph;
    use pointgnn::model::{forward_with_cache, loss_and_gradients, LossWeights, ModelDims};
    use pointgnn::pointcloud::voxel_downsample;

    let preset = Preset::by_name("toy")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene_spec = SceneSpec::toy_cars();
    scene_spec.min_boxes = 1;
    scene_spec.max_boxes = 2;
    scene_spec.clutter_points = 20;
    let scene = generate_synthetic_scene(&scene_spec, &mut rng)?;
    let params = PointGnnParams::init(&ModelDims::toy(), &preset.spec, true, &mut rng);
    let down = voxel_downsample(&scene.cloud, 0.8, VoxelMode::CentroidNearest, 0)?;
    let graph = build_graph(&down.cloud, preset.radius, false)?;
    let labels = assign_vertex_labels(&down.cloud, &scene.gt_boxes, &preset.spec);
    // default gamma keeps the |w| kink error of the L1 term far below the
    // tolerance at weights smaller than the probe step
    let weights = LossWeights::default();
    let cache = forward_with_cache(&params, &preset.spec, &scene.cloud, &graph, preset.r0)?;
    let (parts, grads) = loss_and_gradients(&params, &preset.spec, &cache, &labels, &weights)?;
    let flat = params.flatten();
    let template = params.clone();
    let spec = preset.spec.clone();
    let cloud = scene.cloud.clone();
    let r0 = preset.r0;
    let f = move |x: &[f64]| -> f64 {
        let mut p = template.clone();
        p.assign_flat(x);
        let cache = forward_with_cache(&p, &spec, &cloud, &graph, r0).unwrap();
        let (parts, _) = loss_and_gradients(&p, &spec, &cache, &labels, &weights).unwrap();
        parts.total
    };
    let worst = grad_check(&f, &flat, &grads.flatten(), probes, 1e-5, seed ^ 0x5eed);
    println!(
        "loss {:.6}; max relative gradient error over {probes} probes: {worst:.3e}",
        parts.total
    );
    if worst < tolerance {
        println!("gradcheck: PASS (tolerance {tolerance:.1e})");
        Ok(())
    } else {
        Err(Error::training(format!(
            "gradient check failed: {worst:.3e} >= {tolerance:.1e}"
        )))
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Graph {
            input,
            radius,
            self_loops,
            oracle,
            output,
        } => cmd_graph(&input, radius, self_loops, oracle, &output),
        Command::Synth {
            scenes,
            seed,
            output,
            min_boxes,
            max_boxes,
            noise,
            clutter,
        } => cmd_synth(scenes, seed, &output, min_boxes, max_boxes, noise, clutter),
        Command::Train {
            preset,
            scenes,
            output,
            config,
            seed,
            steps,
            curve,
            checkpoint_every,
        } => cmd_train(
            &preset,
            &scenes,
            &output,
            &config,
            seed,
            steps,
            &curve,
            checkpoint_every,
        ),
        Command::Infer {
            model,
            preset,
            input,
            output,
            nms,
            seed,
        } => cmd_infer(&model, &preset, &input, &output, &nms, seed),
        Command::Eval {
            dets,
            gts,
            iou,
            protocol,
            output,
        } => cmd_eval(&dets, &gts, iou, protocol, &output),
        Command::Ablate {
            model,
            preset,
            scenes,
            toggle,
            iou,
            protocol,
            seed,
            output,
        } => cmd_ablate(
            &model, &preset, &scenes, &toggle, iou, protocol, seed, &output,
        ),
        Command::Sparsity {
            model,
            preset,
            scenes,
            lines,
            kmeans_iters,
            iou,
            protocol,
            seed,
            output,
        } => cmd_sparsity(
            &model,
            &preset,
            &scenes,
            &lines,
            kmeans_iters,
            iou,
            protocol,
            seed,
            &output,
        ),
        Command::Bench {
            points,
            radius,
            seed,
            repeat,
        } => cmd_bench(points, radius, seed, repeat),
        Command::Gradcheck {
            probes,
            seed,
            tolerance,
        } => cmd_gradcheck(probes, seed, tolerance),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests also arrive through this path
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e @ Error::Argument(_)) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
