use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::class_spec::ClassSpec;
use crate::nn::{MlpParams, Tensor2, TensorEntry};

/// Unit counts for every MLP in the network, listed output-layer last.
/// Input dimensions are implied: raw point features are 4-dimensional
/// (relative position + intensity), edge features are state + 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDims {
    pub embed_point: Vec<usize>,
    pub embed_post: Vec<usize>,
    pub mlp_h: Vec<usize>,
    pub mlp_f: Vec<usize>,
    pub mlp_g: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub loc_hidden: Vec<usize>,
    pub iterations: usize,
}

impl ModelDims {
    /// Car-scale network: state width 300, T = 3.
    pub fn car() -> Self {
        ModelDims {
            embed_point: vec![32, 64, 128, 300],
            embed_post: vec![300, 300],
            mlp_h: vec![64, 3],
            mlp_f: vec![300, 300],
            mlp_g: vec![300, 300],
            head_hidden: vec![64],
            loc_hidden: vec![64, 64],
            iterations: 3,
        }
    }

    /// Pedestrian/Cyclist-scale network: state width 256, T = 3.
    pub fn ped_cyc() -> Self {
        ModelDims {
            embed_point: vec![32, 64, 128, 256, 512],
            embed_post: vec![256, 256],
            mlp_h: vec![64, 3],
            mlp_f: vec![256, 256],
            mlp_g: vec![256, 256],
            head_hidden: vec![64],
            loc_hidden: vec![64, 64],
            iterations: 3,
        }
    }

    /// Desk-scale network: layer structure preserved, widths shrunk to a
    /// 64-wide state, T = 2.
    pub fn toy() -> Self {
        ModelDims {
            embed_point: vec![32, 64],
            embed_post: vec![64, 64],
            mlp_h: vec![64, 3],
            mlp_f: vec![64, 64],
            mlp_g: vec![64, 64],
            head_hidden: vec![64],
            loc_hidden: vec![64, 64],
            iterations: 2,
        }
    }

    pub fn state_dim(&self) -> usize {
        *self.embed_post.last().unwrap()
    }
}

/// MLPs of one GNN iteration; every iteration owns a distinct set.
#[derive(Debug, Clone, PartialEq)]
pub struct IterParams {
    pub mlp_h: MlpParams,
    pub mlp_f: MlpParams,
    pub mlp_g: MlpParams,
}

/// All parameters of the detection network. The same structure holds
/// gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGnnParams {
    pub embed_point: MlpParams,
    pub embed_post: MlpParams,
    pub iterations: Vec<IterParams>,
    pub head_cls: MlpParams,
    /// One localization head per localized class, aligned with
    /// `ClassSpec::localized_classes()`.
    pub head_loc: Vec<MlpParams>,
    pub auto_registration: bool,
}

impl PointGnnParams {
    /// Seeded initialization. The final layer of every offset MLP starts at
    /// exactly zero, so the first training step sees no auto-registration.
    pub fn init(dims: &ModelDims, spec: &ClassSpec, auto_registration: bool, rng: &mut ChaCha8Rng) -> Self {
        let state = dims.state_dim();
        let chain = |input: usize, units: &[usize]| {
            let mut d = vec![input];
            d.extend_from_slice(units);
            d
        };
        let embed_point = MlpParams::init(&chain(4, &dims.embed_point), rng);
        let embed_post = MlpParams::init(
            &chain(*dims.embed_point.last().unwrap(), &dims.embed_post),
            rng,
        );
        let mut iterations = Vec::with_capacity(dims.iterations);
        for _ in 0..dims.iterations {
            let mut mlp_h = MlpParams::init(&chain(state, &dims.mlp_h), rng);
            mlp_h.zero_final_layer();
            let mlp_f = MlpParams::init(&chain(state + 3, &dims.mlp_f), rng);
            let mut g_dims = chain(*dims.mlp_f.last().unwrap(), &dims.mlp_g);
            *g_dims.last_mut().unwrap() = state; // residual addition
            let mlp_g = MlpParams::init(&g_dims, rng);
            iterations.push(IterParams { mlp_h, mlp_f, mlp_g });
        }
        let mut cls_dims = chain(state, &dims.head_hidden);
        cls_dims.push(spec.num_classes());
        let head_cls = MlpParams::init(&cls_dims, rng);
        let mut loc_dims = chain(state, &dims.loc_hidden);
        loc_dims.push(7);
        let head_loc = spec
            .localized_classes()
            .iter()
            .map(|_| MlpParams::init(&loc_dims, rng))
            .collect();
        PointGnnParams {
            embed_point,
            embed_post,
            iterations,
            head_cls,
            head_loc,
            auto_registration,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.embed_post.output_dim()
    }

    pub fn zeros_like(&self) -> Self {
        PointGnnParams {
            embed_point: self.embed_point.zeros_like(),
            embed_post: self.embed_post.zeros_like(),
            iterations: self
                .iterations
                .iter()
                .map(|it| IterParams {
                    mlp_h: it.mlp_h.zeros_like(),
                    mlp_f: it.mlp_f.zeros_like(),
                    mlp_g: it.mlp_g.zeros_like(),
                })
                .collect(),
            head_cls: self.head_cls.zeros_like(),
            head_loc: self.head_loc.iter().map(MlpParams::zeros_like).collect(),
            auto_registration: self.auto_registration,
        }
    }

    /// Visit every constituent MLP with its name prefix, in a fixed order.
    pub fn visit_mlps(&self, mut f: impl FnMut(String, &MlpParams)) {
        f("embed_point".into(), &self.embed_point);
        f("embed_post".into(), &self.embed_post);
        for (t, it) in self.iterations.iter().enumerate() {
            f(format!("iter{t}.mlp_h"), &it.mlp_h);
            f(format!("iter{t}.mlp_f"), &it.mlp_f);
            f(format!("iter{t}.mlp_g"), &it.mlp_g);
        }
        f("head_cls".into(), &self.head_cls);
        for (c, loc) in self.head_loc.iter().enumerate() {
            f(format!("head_loc{c}"), loc);
        }
    }

    fn visit_mlps_mut(&mut self, mut f: impl FnMut(String, &mut MlpParams)) {
        f("embed_point".into(), &mut self.embed_point);
        f("embed_post".into(), &mut self.embed_post);
        for (t, it) in self.iterations.iter_mut().enumerate() {
            f(format!("iter{t}.mlp_h"), &mut it.mlp_h);
            f(format!("iter{t}.mlp_f"), &mut it.mlp_f);
            f(format!("iter{t}.mlp_g"), &mut it.mlp_g);
        }
        f("head_cls".into(), &mut self.head_cls);
        for (c, loc) in self.head_loc.iter_mut().enumerate() {
            f(format!("head_loc{c}"), loc);
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_mlps(|_, m| n += m.param_count());
        n
    }

    /// All parameters as one flat vector (fixed order).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_mlps(|_, m| m.for_each(&mut |v| out.push(v)));
        out
    }

    /// Overwrite every parameter from a flat vector in `flatten` order.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut i = 0;
        self.visit_mlps_mut(|_, m| {
            m.for_each_mut(&mut |v| {
                *v = flat[i];
                i += 1;
            })
        });
        assert_eq!(i, flat.len(), "flat vector length mismatch");
    }

    /// self += factor * other over every parameter.
    pub fn add_scaled(&mut self, other: &PointGnnParams, factor: f64) {
        self.embed_point.add_scaled(&other.embed_point, factor);
        self.embed_post.add_scaled(&other.embed_post, factor);
        for (a, b) in self.iterations.iter_mut().zip(&other.iterations) {
            a.mlp_h.add_scaled(&b.mlp_h, factor);
            a.mlp_f.add_scaled(&b.mlp_f, factor);
            a.mlp_g.add_scaled(&b.mlp_g, factor);
        }
        self.head_cls.add_scaled(&other.head_cls, factor);
        for (a, b) in self.head_loc.iter_mut().zip(&other.head_loc) {
            a.add_scaled(b, factor);
        }
    }

    /// grads += factor * sign(w) over every weight matrix; biases excluded.
    pub fn add_l1_subgradient(&self, grads: &mut PointGnnParams, factor: f64) {
        self.embed_point.add_l1_subgradient(&mut grads.embed_point, factor);
        self.embed_post.add_l1_subgradient(&mut grads.embed_post, factor);
        for (a, b) in self.iterations.iter().zip(&mut grads.iterations) {
            a.mlp_h.add_l1_subgradient(&mut b.mlp_h, factor);
            a.mlp_f.add_l1_subgradient(&mut b.mlp_f, factor);
            a.mlp_g.add_l1_subgradient(&mut b.mlp_g, factor);
        }
        self.head_cls.add_l1_subgradient(&mut grads.head_cls, factor);
        for (a, b) in self.head_loc.iter().zip(&mut grads.head_loc) {
            a.add_l1_subgradient(b, factor);
        }
    }

    /// Sum of |w| over every weight matrix; biases excluded.
    pub fn weight_abs_sum(&self) -> f64 {
        let mut total = 0.0;
        self.visit_mlps(|_, m| total += m.weight_abs_sum());
        total
    }

    /// Named tensors for the checkpoint container.
    pub fn to_entries(&self) -> Vec<TensorEntry> {
        let mut entries = Vec::new();
        self.visit_mlps(|prefix, m| {
            for (l, layer) in m.layers.iter().enumerate() {
                entries.push((
                    format!("{prefix}.l{l}.weight"),
                    vec![layer.weight.rows, layer.weight.cols],
                    layer.weight.data.clone(),
                ));
                entries.push((
                    format!("{prefix}.l{l}.bias"),
                    vec![layer.bias.len()],
                    layer.bias.clone(),
                ));
            }
        });
        entries.push((
            "meta.auto_registration".into(),
            vec![1],
            vec![if self.auto_registration { 1.0 } else { 0.0 }],
        ));
        entries
    }

    /// Rebuild parameters purely from checkpoint entries; the network
    /// structure is recovered from the tensor names and shapes, the
    /// auto-registration flag from the `meta.auto_registration` scalar
    /// (assumed on when absent).
    pub fn from_entries(entries: &[TensorEntry]) -> Result<Self> {
        use std::collections::HashMap;
        let map: HashMap<&str, &TensorEntry> =
            entries.iter().map(|e| (e.0.as_str(), e)).collect();
        let mlp_from = |prefix: &str| -> Result<MlpParams> {
            let mut layers = Vec::new();
            loop {
                let l = layers.len();
                let (Some(w), Some(b)) = (
                    map.get(format!("{prefix}.l{l}.weight").as_str()),
                    map.get(format!("{prefix}.l{l}.bias").as_str()),
                ) else {
                    break;
                };
                if w.1.len() != 2 || b.1.len() != 1 || w.1[1] != b.1[0] {
                    return Err(Error::format(format!(
                        "tensor {prefix}.l{l}: inconsistent shapes"
                    )));
                }
                layers.push(crate::nn::DenseLayer {
                    weight: Tensor2::from_vec(w.1[0], w.1[1], w.2.clone())?,
                    bias: b.2.clone(),
                });
            }
            if layers.is_empty() {
                return Err(Error::format(format!("checkpoint lacks MLP '{prefix}'")));
            }
            Ok(MlpParams { layers })
        };
        let mut iterations = Vec::new();
        while map.contains_key(format!("iter{}.mlp_f.l0.weight", iterations.len()).as_str()) {
            let t = iterations.len();
            iterations.push(IterParams {
                mlp_h: mlp_from(&format!("iter{t}.mlp_h"))?,
                mlp_f: mlp_from(&format!("iter{t}.mlp_f"))?,
                mlp_g: mlp_from(&format!("iter{t}.mlp_g"))?,
            });
        }
        let mut head_loc = Vec::new();
        while map.contains_key(format!("head_loc{}.l0.weight", head_loc.len()).as_str()) {
            head_loc.push(mlp_from(&format!("head_loc{}", head_loc.len()))?);
        }
        let auto_registration = map
            .get("meta.auto_registration")
            .map_or(true, |e| e.2.first().copied().unwrap_or(1.0) != 0.0);
        Ok(PointGnnParams {
            embed_point: mlp_from("embed_point")?,
            embed_post: mlp_from("embed_post")?,
            iterations,
            head_cls: mlp_from("head_cls")?,
            head_loc,
            auto_registration,
        })
    }

    /// Load parameters from checkpoint entries into a structurally matching
    /// instance (dims must agree).
    pub fn load_entries(&mut self, entries: &[TensorEntry]) -> Result<()> {
        use std::collections::HashMap;
        let map: HashMap<&str, &TensorEntry> =
            entries.iter().map(|e| (e.0.as_str(), e)).collect();
        let mut err = None;
        self.visit_mlps_mut(|prefix, m| {
            for (l, layer) in m.layers.iter_mut().enumerate() {
                for (suffix, dims, data) in [
                    (
                        "weight",
                        vec![layer.weight.rows, layer.weight.cols],
                        &mut layer.weight.data,
                    ),
                    ("bias", vec![layer.bias.len()], &mut layer.bias),
                ] {
                    let name = format!("{prefix}.l{l}.{suffix}");
                    match map.get(name.as_str()) {
                        Some((_, d, payload)) if *d == dims => {
                            data.copy_from_slice(payload);
                        }
                        Some(_) => {
                            err.get_or_insert(format!("tensor {name}: dimension mismatch"));
                        }
                        None => {
                            err.get_or_insert(format!("tensor {name} missing from checkpoint"));
                        }
                    }
                }
            }
        });
        match err {
            Some(e) => Err(Error::format(e)),
            None => Ok(()),
        }
    }
}
