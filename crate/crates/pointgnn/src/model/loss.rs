use crate::boxes::VertexLabel;
use crate::error::{Error, Result};
use crate::model::class_spec::ClassSpec;
use crate::model::network::{backward_full, ForwardCache};
use crate::model::params::PointGnnParams;
use crate::nn::Tensor2;

const PROB_FLOOR: f64 = 1e-12;
const HUBER_DELTA: f64 = 1.0;

/// Loss weighting. Defaults: 0.1 classification, 10 localization, 5e-7 L1.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.1,
            beta: 10.0,
            gamma: 5e-7,
        }
    }
}

/// The three loss terms plus their weighted sum.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub classification: f64,
    pub localization: f64,
    pub regularization: f64,
    pub total: f64,
}

/// Quadratic within `delta` of zero, linear outside.
pub fn huber(residual: f64, delta: f64) -> f64 {
    let a = residual.abs();
    if a <= delta {
        0.5 * residual * residual
    } else {
        delta * (a - 0.5 * delta)
    }
}

fn huber_grad(residual: f64, delta: f64) -> f64 {
    residual.clamp(-delta, delta)
}

/// Average negative log probability of each vertex's label class.
/// Don't-care vertices contribute zero but still count toward the average.
pub fn classification_loss(
    probs: &Tensor2,
    labels: &[VertexLabel],
    spec: &ClassSpec,
) -> Result<f64> {
    if probs.rows != labels.len() {
        return Err(Error::argument("probability rows != label count"));
    }
    if labels.is_empty() {
        return Err(Error::argument("classification loss of zero vertices"));
    }
    let mut sum = 0.0;
    for (i, label) in labels.iter().enumerate() {
        if label.class == spec.do_not_care {
            continue;
        }
        let p = probs.get(i, label.class).max(PROB_FLOOR);
        sum -= p.ln();
    }
    Ok(sum / labels.len() as f64)
}

/// Average Huber loss over the 7 encoded-box components of every vertex
/// inside a ground-truth box. Zero when no vertex is inside a box.
pub fn localization_loss(
    loc: &[Tensor2],
    labels: &[VertexLabel],
    spec: &ClassSpec,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, label) in labels.iter().enumerate() {
        let Some((target, _)) = &label.target else {
            continue;
        };
        let slot = spec
            .localized_slot(label.class)
            .ok_or_else(|| Error::argument("localization target on non-localized class"))?;
        if loc[slot].rows != labels.len() {
            return Err(Error::argument("localization rows != label count"));
        }
        let t = target.to_array();
        for (d, &pred) in loc[slot].row(i).iter().enumerate() {
            sum += huber(pred - t[d], HUBER_DELTA);
        }
        count += 1;
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(sum / count as f64)
}

/// Sum of absolute weight values; biases excluded.
pub fn regularization_loss(params: &PointGnnParams) -> f64 {
    params.weight_abs_sum()
}

pub fn total_loss(classification: f64, localization: f64, regularization: f64, w: &LossWeights) -> LossParts {
    LossParts {
        classification,
        localization,
        regularization,
        total: w.alpha * classification + w.beta * localization + w.gamma * regularization,
    }
}

/// Compute the weighted loss of one forward pass and the exact gradient of
/// its total w.r.t. every parameter.
pub fn loss_and_gradients(
    params: &PointGnnParams,
    spec: &ClassSpec,
    cache: &ForwardCache,
    labels: &[VertexLabel],
    weights: &LossWeights,
) -> Result<(LossParts, PointGnnParams)> {
    let pred = &cache.prediction;
    let l_cls = classification_loss(&pred.probs, labels, spec)?;
    let l_loc = localization_loss(&pred.loc, labels, spec)?;
    let l_reg = regularization_loss(params);
    let parts = total_loss(l_cls, l_loc, l_reg, weights);

    let n = labels.len() as f64;
    // softmax cross-entropy: d total / d logit = alpha/N * (p - onehot)
    let mut grad_logits = Tensor2::zeros(pred.logits.rows, pred.logits.cols);
    for (i, label) in labels.iter().enumerate() {
        if label.class == spec.do_not_care {
            continue;
        }
        let scale = weights.alpha / n;
        let probs = pred.probs.row(i);
        let row = grad_logits.row_mut(i);
        for (c, &p) in probs.iter().enumerate() {
            row[c] = scale * (p - if c == label.class { 1.0 } else { 0.0 });
        }
    }

    let m = labels.iter().filter(|l| l.target.is_some()).count();
    let mut grad_loc: Vec<Tensor2> = pred
        .loc
        .iter()
        .map(|l| Tensor2::zeros(l.rows, l.cols))
        .collect();
    if m > 0 {
        let scale = weights.beta / m as f64;
        for (i, label) in labels.iter().enumerate() {
            let Some((target, _)) = &label.target else {
                continue;
            };
            let slot = spec.localized_slot(label.class).unwrap();
            let t = target.to_array();
            let preds = pred.loc[slot].row(i).to_vec();
            let row = grad_loc[slot].row_mut(i);
            for (d, &p) in preds.iter().enumerate() {
                row[d] = scale * huber_grad(p - t[d], HUBER_DELTA);
            }
        }
    }

    let mut grads = backward_full(params, cache, &grad_logits, &grad_loc)?;
    params.add_l1_subgradient(&mut grads, weights.gamma);
    Ok((parts, grads))
}
