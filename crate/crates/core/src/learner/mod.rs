//! Multinomial logistic regression trained by full-batch gradient descent.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

const STD_FLOOR: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

/// Row-major feature matrix with labels and optional per-row weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    dim: usize,
    n_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    weights: Option<Vec<f64>>,
}

impl LabeledDataset {
    pub fn new(
        dim: usize,
        n_classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 || n_classes == 0 {
            return invalid("dataset needs dim >= 1 and n_classes >= 1");
        }
        if features.len() != labels.len() * dim {
            return invalid(format!(
                "feature length {} is not rows {} x dim {}",
                features.len(),
                labels.len(),
                dim
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return invalid(format!("label {bad} outside [0, {n_classes})"));
        }
        if let Some(w) = &weights {
            if w.len() != labels.len() {
                return invalid("weight count differs from row count");
            }
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return invalid("weights must be finite and nonnegative");
            }
        }
        Ok(LabeledDataset { dim, n_classes, features, labels, weights })
    }

    pub fn empty(dim: usize, n_classes: usize) -> Self {
        LabeledDataset { dim, n_classes, features: Vec::new(), labels: Vec::new(), weights: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Appends a row, switching to explicit weights when `weight != 1`.
    pub fn push(&mut self, features: &[f64], label: usize, weight: f64) -> Result<()> {
        if features.len() != self.dim {
            return invalid(format!("row has dim {}, expected {}", features.len(), self.dim));
        }
        if label >= self.n_classes {
            return invalid(format!("label {label} outside [0, {})", self.n_classes));
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return invalid("weights must be finite and nonnegative");
        }
        if weight != 1.0 && self.weights.is_none() {
            self.weights = Some(vec![1.0; self.labels.len()]);
        }
        if let Some(w) = &mut self.weights {
            w.push(weight);
        }
        self.features.extend_from_slice(features);
        self.labels.push(label);
        Ok(())
    }

    /// Weighted majority label; ties go to the lowest class.
    pub fn majority_class(&self) -> Option<usize> {
        if self.is_empty() {
            return None;
        }
        let mut mass = vec![0.0; self.n_classes];
        for i in 0..self.len() {
            mass[self.labels[i]] += self.weight(i);
        }
        Some(argmax(&mass))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub max_iter: usize,
    /// `λ = 1/C`.
    pub l2_strength: f64,
    pub standardize: bool,
    pub gradient_tol: f64,
    /// Class count; 0 means "take it from the training data".
    pub n_classes: usize,
    /// Prediction of the model trained on an empty set.
    pub empty_class: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            max_iter: 200,
            l2_strength: 1.0,
            standardize: true,
            gradient_tol: 1e-6,
            n_classes: 0,
            empty_class: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return invalid("max_iter must be >= 1");
        }
        if !(self.l2_strength >= 0.0) {
            return invalid("l2_strength must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub n_classes: usize,
    pub dim: usize,
    pub mean: Vec<f64>,
    pub inv_scale: Vec<f64>,
    /// `n_classes x dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Constant { class: usize, n_classes: usize },
    Linear(LinearModel),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            Model::Constant { class, .. } => *class,
            Model::Linear(m) => {
                let mut z = vec![0.0; m.n_classes];
                m.logits(x, &mut z);
                argmax(&z)
            }
        }
    }

    pub fn weight_norm(&self) -> f64 {
        match self {
            Model::Constant { .. } => 0.0,
            Model::Linear(m) => m.weights.iter().map(|w| w * w).sum::<f64>().sqrt(),
        }
    }
}

impl LinearModel {
    fn logits(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let w = &self.weights[c * self.dim..(c + 1) * self.dim];
            let mut acc = self.bias[c];
            for j in 0..self.dim {
                acc += w[j] * (x[j] - self.mean[j]) * self.inv_scale[j];
            }
            *o = acc;
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of validation rows predicted correctly.
pub fn accuracy(model: &Model, valset: &LabeledDataset) -> f64 {
    if valset.is_empty() {
        return 0.0;
    }
    let correct = (0..valset.len())
        .filter(|&i| model.predict(valset.row(i)) == valset.label(i))
        .count();
    correct as f64 / valset.len() as f64
}

/// Trains the model. Rows are put in a canonical order first so that the
/// result does not depend on the input row order.
pub fn train(data: &LabeledDataset, cfg: &LearnerConfig) -> Result<Model> {
    cfg.validate()?;
    let n_classes = if cfg.n_classes == 0 { data.n_classes } else { cfg.n_classes };
    if n_classes < data.n_classes {
        return invalid("learner n_classes below dataset n_classes");
    }
    let rows: Vec<usize> = canonical_order(data)
        .into_iter()
        .filter(|&i| data.weight(i) > 0.0)
        .collect();
    if rows.is_empty() {
        return Ok(Model::Constant { class: cfg.empty_class, n_classes });
    }
    let first = data.label(rows[0]);
    if rows.iter().all(|&i| data.label(i) == first) {
        return Ok(Model::Constant { class: first, n_classes });
    }
    if data.features.iter().any(|x| !x.is_finite()) {
        return invalid("non-finite feature value in training data");
    }

    let problem = Problem::new(data, &rows, n_classes, cfg);
    let (params, iterations) = problem.minimize(cfg);
    let d = problem.dim;
    let mut weights = vec![0.0; n_classes * d];
    let mut bias = vec![0.0; n_classes];
    for c in 0..n_classes {
        weights[c * d..(c + 1) * d].copy_from_slice(&params[c * (d + 1)..c * (d + 1) + d]);
        bias[c] = params[c * (d + 1) + d];
    }
    Ok(Model::Linear(LinearModel {
        n_classes,
        dim: d,
        mean: problem.mean,
        inv_scale: problem.inv_scale,
        weights,
        bias,
        iterations,
    }))
}

fn canonical_order(data: &LabeledDataset) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| {
        data.label(a)
            .cmp(&data.label(b))
            .then_with(|| cmp_rows(data.row(a), data.row(b)))
            .then_with(|| data.weight(a).total_cmp(&data.weight(b)))
    });
    idx
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Standardized design matrix with an appended bias column.
struct Problem {
    n: usize,
    dim: usize,
    n_classes: usize,
    x: Vec<f64>,
    y: Vec<usize>,
    w: Vec<f64>,
    total_weight: f64,
    lambda: f64,
    mean: Vec<f64>,
    inv_scale: Vec<f64>,
}

impl Problem {
    fn new(data: &LabeledDataset, rows: &[usize], n_classes: usize, cfg: &LearnerConfig) -> Self {
        let d = data.dim;
        let w: Vec<f64> = rows.iter().map(|&i| data.weight(i)).collect();
        let total_weight: f64 = w.iter().sum();
        let mut mean = vec![0.0; d];
        let mut inv_scale = vec![1.0; d];
        if cfg.standardize {
            for (k, &i) in rows.iter().enumerate() {
                for (m, &v) in mean.iter_mut().zip(data.row(i)) {
                    *m += w[k] * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= total_weight);
            let mut var = vec![0.0; d];
            for (k, &i) in rows.iter().enumerate() {
                for j in 0..d {
                    let dv = data.row(i)[j] - mean[j];
                    var[j] += w[k] * dv * dv;
                }
            }
            for j in 0..d {
                inv_scale[j] = 1.0 / (var[j] / total_weight).sqrt().max(STD_FLOOR);
            }
        }
        let stride = d + 1;
        let mut x = vec![0.0; rows.len() * stride];
        for (k, &i) in rows.iter().enumerate() {
            let r = data.row(i);
            for j in 0..d {
                x[k * stride + j] = (r[j] - mean[j]) * inv_scale[j];
            }
            x[k * stride + d] = 1.0;
        }
        Problem {
            n: rows.len(),
            dim: d,
            n_classes,
            x,
            y: rows.iter().map(|&i| data.label(i)).collect(),
            w,
            total_weight,
            lambda: cfg.l2_strength,
            mean,
            inv_scale,
        }
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        let stride = self.dim + 1;
        let mut s = 0.0;
        for c in 0..self.n_classes {
            for v in &params[c * stride..c * stride + self.dim] {
                s += v * v;
            }
        }
        0.5 * self.lambda * s / self.total_weight
    }

    /// Objective, optionally accumulating the gradient into `grad`.
    fn evaluate(&self, params: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let stride = self.dim + 1;
        let c_n = self.n_classes;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut z = vec![0.0; c_n];
        let mut loss = 0.0;
        for i in 0..self.n {
            let xi = &self.x[i * stride..(i + 1) * stride];
            for c in 0..c_n {
                let p = &params[c * stride..(c + 1) * stride];
                z[c] = xi.iter().zip(p).map(|(a, b)| a * b).sum();
            }
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let yi = self.y[i];
            let zy = z[yi] - zmax;
            let mut se = 0.0;
            for v in z.iter_mut() {
                *v = (*v - zmax).exp();
                se += *v;
            }
            let wi = self.w[i];
            loss += wi * (se.ln() - zy);
            if let Some(g) = grad.as_deref_mut() {
                for c in 0..c_n {
                    let r = wi * (z[c] / se - if c == yi { 1.0 } else { 0.0 });
                    if r != 0.0 {
                        let gc = &mut g[c * stride..(c + 1) * stride];
                        for (gv, xv) in gc.iter_mut().zip(xi) {
                            *gv += r * xv;
                        }
                    }
                }
            }
        }
        let inv_w = 1.0 / self.total_weight;
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v *= inv_w);
            for c in 0..c_n {
                for j in 0..self.dim {
                    g[c * stride + j] += self.lambda * params[c * stride + j] * inv_w;
                }
            }
        }
        loss * inv_w + self.penalty(params)
    }

    fn minimize(&self, cfg: &LearnerConfig) -> (Vec<f64>, usize) {
        let len = self.n_classes * (self.dim + 1);
        let mut params = vec![0.0; len];
        let mut grad = vec![0.0; len];
        let mut trial = vec![0.0; len];
        let mut step: f64 = 1.0;
        let mut f = self.evaluate(&params, Some(&mut grad));
        let mut iterations = 0;
        for _ in 0..cfg.max_iter {
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax < cfg.gradient_tol {
                break;
            }
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            step = (step * 2.0).min(1e3);
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                for k in 0..len {
                    trial[k] = params[k] - step * grad[k];
                }
                let ft = self.evaluate(&trial, None);
                if ft <= f - ARMIJO * step * g2 {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            std::mem::swap(&mut params, &mut trial);
            f = self.evaluate(&params, Some(&mut grad));
            iterations += 1;
        }
        (params, iterations)
    }
}
