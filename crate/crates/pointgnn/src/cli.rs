//! Shared plumbing for the command-line tool: atomic file output, the
//! plain-text key=value config format, named presets, and scene-directory
//! I/O.

use crate::boxes::{boxes_to_text, parse_boxes_text, Box3D};
use crate::error::{Error, Result};
use crate::model::{ClassSpec, LossWeights, ModelDims};
use crate::pointcloud::{self};
use crate::postprocess::NmsMode;
use crate::training::{AugmentConfig, Scene, TrainConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Write a file via a sibling temp file + rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Parse the plain-text config format: one `key = value` per line, `#`
/// comments, blank lines ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::format(format!(
                "config line {}: expected key=value, got '{line}'",
                ln + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::argument(format!("config key '{key}': bad value '{value}'")))
}

/// A named bundle of class spec, geometry radii, network dimensions and
/// training defaults.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub spec: ClassSpec,
    pub dims: ModelDims,
    pub radius: f64,
    pub r0: f64,
    pub voxel_train: f64,
    pub voxel_infer: f64,
    pub nms_threshold: f64,
    pub train: TrainConfig,
}

impl Preset {
    pub fn by_name(name: &str) -> Result<Preset> {
        match name {
            "car" => Ok(Preset {
                name: "car",
                spec: ClassSpec::car(),
                dims: ModelDims::car(),
                radius: 4.0,
                r0: 1.0,
                voxel_train: 0.8,
                voxel_infer: 0.4,
                nms_threshold: 0.01,
                train: TrainConfig {
                    batch_size: 4,
                    weights: Default::default(),
                    initial_lr: 0.125,
                    decay_rate: 0.1,
                    decay_interval: 400_000,
                    total_steps: 1_400_000,
                    seed: 0,
                    augment: AugmentConfig::all(),
                    edge_cap: 256,
                    radius: 4.0,
                    r0: 1.0,
                    voxel_size: 0.8,
                },
            }),
            "pedcyc" => Ok(Preset {
                name: "pedcyc",
                spec: ClassSpec::ped_cyc(),
                dims: ModelDims::ped_cyc(),
                radius: 1.6,
                r0: 0.4,
                voxel_train: 0.4,
                voxel_infer: 0.2,
                nms_threshold: 0.2,
                train: TrainConfig {
                    batch_size: 4,
                    weights: Default::default(),
                    initial_lr: 0.32,
                    decay_rate: 0.25,
                    decay_interval: 400_000,
                    total_steps: 1_000_000,
                    seed: 0,
                    augment: AugmentConfig::all(),
                    edge_cap: 256,
                    radius: 1.6,
                    r0: 0.4,
                    voxel_size: 0.4,
                },
            }),
            "toy" => Ok(Preset {
                name: "toy",
                spec: ClassSpec::car(),
                dims: ModelDims::toy(),
                radius: 4.0,
                r0: 1.0,
                voxel_train: 0.8,
                voxel_infer: 0.4,
                nms_threshold: 0.01,
                train: TrainConfig {
                    batch_size: 2,
                    // the classification term needs more weight at this
                    // scale or it stalls at the majority class
                    weights: LossWeights {
                        alpha: 2.0,
                        ..Default::default()
                    },
                    initial_lr: 0.03,
                    decay_rate: 0.5,
                    decay_interval: 1000,
                    total_steps: 3000,
                    seed: 0,
                    // the toy preset overfits its own training scenes on
                    // purpose; augmentation only slows that down
                    augment: AugmentConfig::none(),
                    edge_cap: 256,
                    radius: 4.0,
                    r0: 1.0,
                    voxel_size: 0.8,
                },
            }),
            other => Err(Error::argument(format!(
                "unknown preset '{other}' (expected car, pedcyc or toy)"
            ))),
        }
    }

    /// Apply key=value overrides to the training configuration. Unknown
    /// keys are rejected so typos do not pass silently.
    pub fn apply_config(&mut self, overrides: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in overrides {
            match key.as_str() {
                "batch_size" => self.train.batch_size = parse_value(key, value)?,
                "alpha" => self.train.weights.alpha = parse_value(key, value)?,
                "beta" => self.train.weights.beta = parse_value(key, value)?,
                "gamma" => self.train.weights.gamma = parse_value(key, value)?,
                "initial_lr" => self.train.initial_lr = parse_value(key, value)?,
                "decay_rate" => self.train.decay_rate = parse_value(key, value)?,
                "decay_interval" => self.train.decay_interval = parse_value(key, value)?,
                "total_steps" => self.train.total_steps = parse_value(key, value)?,
                "seed" => self.train.seed = parse_value(key, value)?,
                "edge_cap" => self.train.edge_cap = parse_value(key, value)?,
                "augment_rotate" => self.train.augment.rotate = parse_value(key, value)?,
                "augment_flip" => self.train.augment.flip = parse_value(key, value)?,
                "augment_shift" => self.train.augment.box_shift = parse_value(key, value)?,
                "radius" => {
                    self.radius = parse_value(key, value)?;
                    self.train.radius = self.radius;
                }
                "r0" => {
                    self.r0 = parse_value(key, value)?;
                    self.train.r0 = self.r0;
                }
                "voxel_train" => {
                    self.voxel_train = parse_value(key, value)?;
                    self.train.voxel_size = self.voxel_train;
                }
                "voxel_infer" => self.voxel_infer = parse_value(key, value)?,
                "nms_threshold" => self.nms_threshold = parse_value(key, value)?,
                other => {
                    return Err(Error::argument(format!("unknown config key '{other}'")));
                }
            }
        }
        Ok(())
    }
}

/// Ablation toggles parsed from repeated `--toggle k=v` flags.
#[derive(Debug, Clone)]
pub struct Toggles {
    pub auto_registration: Option<bool>,
    pub nms_mode: Option<NmsMode>,
    pub iterations: Option<usize>,
}

pub fn parse_toggles(raw: &[String]) -> Result<Toggles> {
    let mut t = Toggles {
        auto_registration: None,
        nms_mode: None,
        iterations: None,
    };
    for item in raw {
        let Some((key, value)) = item.split_once('=') else {
            return Err(Error::argument(format!(
                "toggle '{item}': expected key=value"
            )));
        };
        match key {
            "auto_reg" => {
                t.auto_registration = Some(match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    _ => return Err(Error::argument(format!("auto_reg: bad value '{value}'"))),
                })
            }
            "nms" => t.nms_mode = Some(NmsMode::parse(value)?),
            "t" | "iterations" => t.iterations = Some(parse_value(key, value)?),
            other => return Err(Error::argument(format!("unknown toggle '{other}'"))),
        }
    }
    Ok(t)
}

fn points_name(index: usize) -> String {
    format!("scene_{index:04}_points.txt")
}

fn boxes_name(index: usize) -> String {
    format!("scene_{index:04}_boxes.txt")
}

/// Write scenes as paired text files `scene_NNNN_points.txt` /
/// `scene_NNNN_boxes.txt`.
pub fn save_scene_dir(dir: &Path, scenes: &[Scene]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, scene) in scenes.iter().enumerate() {
        write_atomic(
            &dir.join(points_name(i)),
            pointcloud::to_text(&scene.cloud).as_bytes(),
        )?;
        let rows: Vec<(String, Box3D, Option<f64>)> = scene
            .gt_boxes
            .iter()
            .map(|(b, c)| (c.clone(), *b, None))
            .collect();
        write_atomic(&dir.join(boxes_name(i)), boxes_to_text(&rows).as_bytes())?;
    }
    Ok(())
}

/// Load every scene pair from a directory, ordered by index.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<Scene>> {
    let mut scenes = Vec::new();
    loop {
        let points_path = dir.join(points_name(scenes.len()));
        if !points_path.exists() {
            break;
        }
        let cloud = pointcloud::parse_text(&std::fs::read_to_string(&points_path)?)?;
        let boxes_path = dir.join(boxes_name(scenes.len()));
        let gt_boxes = if boxes_path.exists() {
            parse_boxes_text(&std::fs::read_to_string(&boxes_path)?)?
                .into_iter()
                .map(|(class, b, _)| (b, class))
                .collect()
        } else {
            Vec::new()
        };
        scenes.push(Scene { cloud, gt_boxes });
    }
    if scenes.is_empty() {
        return Err(Error::format(format!(
            "no scenes found in {} (expected {})",
            dir.display(),
            points_name(0)
        )));
    }
    Ok(scenes)
}
