//! Small dense ReLU classifier with explicit per-example gradients.
//!
//! The network is a plain multilayer perceptron over `f64` slices: hidden
//! layers apply ReLU, the final layer emits logits, and the loss is mean
//! cross-entropy against label-smoothed targets. Everything is written
//! for reproducibility rather than speed: forward and backward passes
//! accumulate in a fixed left-to-right order, so a batch gradient is
//! bitwise the mean of the per-example gradients, and two runs from the
//! same seed agree exactly.
//!
//! The module also carries the synthetic-data side of the benchmark:
//! Gaussian blob generation, label-noise injection, gradient-direction
//! parameter perturbation, and accuracy evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_len, DifferentiableModel};
use crate::rng::RandomSource;
use crate::vector::norm2;

/// Architecture and loss settings for [`MlpModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Layer widths from input to output, e.g. `[2, 32, 32, 3]`. At least
    /// two entries; the last is the class count (≥ 2).
    pub layers: Vec<usize>,
    /// Label-smoothing mass in `[0, 0.5)`: targets are
    /// `(1 − ls)·onehot + ls/C` over all `C` classes.
    pub label_smoothing: f64,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::invalid("need at least input and output layers"));
        }
        if self.layers.iter().any(|&w| w == 0) {
            return Err(Error::invalid("layer widths must be >= 1"));
        }
        if *self.layers.last().unwrap() < 2 {
            return Err(Error::invalid("output layer needs >= 2 classes"));
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return Err(Error::invalid(format!(
                "label_smoothing must be in [0, 0.5), got {}",
                self.label_smoothing
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.layers.last().unwrap()
    }

    /// Total parameter count: per layer, a row-major `fan_in × fan_out`
    /// weight block followed by `fan_out` biases.
    pub fn param_len(&self) -> usize {
        self.layers
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }
}

/// One labelled input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub y: usize,
}

/// A labelled dataset with a fixed class count.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub points: Vec<DataPoint>,
    pub n_classes: usize,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The classifier itself; parameters live outside as flat slices.
#[derive(Debug, Clone)]
pub struct MlpModel {
    spec: MlpSpec,
}

impl MlpModel {
    pub fn new(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        Ok(MlpModel { spec })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    /// Fan-averaged uniform weight init (limit `√(6/(fan_in+fan_out))`),
    /// weights drawn row-major layer by layer, biases zero (no draws).
    pub fn init_params(&self, rng: &mut RandomSource) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.spec.param_len());
        for w in self.spec.layers.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.uniform_in(-limit, limit));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        params
    }

    /// Logits for one input (no softmax).
    pub fn logits(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.spec.param_len(), params)?;
        check_len(self.spec.input_dim(), x)?;
        let n_layers = self.spec.layers.len();
        let mut a: Vec<f64> = x.to_vec();
        let mut offset = 0;
        for l in 0..n_layers - 1 {
            let (m, n) = (self.spec.layers[l], self.spec.layers[l + 1]);
            let w = &params[offset..offset + m * n];
            let b = &params[offset + m * n..offset + (m + 1) * n];
            let mut z = b.to_vec();
            for (i, &ai) in a.iter().enumerate() {
                for j in 0..n {
                    z[j] += ai * w[i * n + j];
                }
            }
            if l + 2 < n_layers {
                for v in &mut z {
                    *v = relu(*v);
                }
            }
            a = z;
            offset += (m + 1) * n;
        }
        Ok(a)
    }

    /// Predicted class: argmax of the logits, ties broken toward the
    /// lowest index.
    pub fn predict(&self, params: &[f64], x: &[f64]) -> Result<usize> {
        let z = self.logits(params, x)?;
        let mut best = 0;
        for (j, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = j;
            }
        }
        Ok(best)
    }

    /// Smoothed target distribution for label `y`.
    fn targets(&self, y: usize) -> Result<Vec<f64>> {
        let c = self.spec.n_classes();
        if y >= c {
            return Err(Error::invalid(format!("label {y} out of range for {c} classes")));
        }
        let ls = self.spec.label_smoothing;
        let mut t = vec![ls / c as f64; c];
        t[y] += 1.0 - ls;
        Ok(t)
    }

    /// Loss and parameter gradient for a single example.
    fn example_loss_grad(&self, params: &[f64], p: &DataPoint) -> Result<(f64, Vec<f64>)> {
        check_len(self.spec.input_dim(), &p.x)?;
        let n_layers = self.spec.layers.len();

        // Forward, keeping pre-activations and activations per layer.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
        acts.push(p.x.to_vec());
        let mut offset = 0;
        for l in 0..n_layers - 1 {
            let (m, n) = (self.spec.layers[l], self.spec.layers[l + 1]);
            let w = &params[offset..offset + m * n];
            let b = &params[offset + m * n..offset + (m + 1) * n];
            let a_prev = &acts[l];
            let mut z = b.to_vec();
            for (i, &ai) in a_prev.iter().enumerate() {
                for j in 0..n {
                    z[j] += ai * w[i * n + j];
                }
            }
            if l + 2 < n_layers {
                acts.push(z.iter().map(|&v| relu(v)).collect());
            }
            pres.push(z);
            offset += (m + 1) * n;
        }

        // Softmax cross-entropy against smoothed targets.
        let logits = pres.last().unwrap();
        let t = self.targets(p.y)?;
        let z_max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = z_max + logits.iter().map(|&z| (z - z_max).exp()).sum::<f64>().ln();
        let mut loss = 0.0;
        for (tj, &zj) in t.iter().zip(logits) {
            loss += tj * (lse - zj);
        }
        let mut delta: Vec<f64> = logits
            .iter()
            .zip(&t)
            .map(|(&zj, tj)| (zj - lse).exp() - tj)
            .collect();

        // Backward: fill the gradient layer by layer from the top.
        let mut grad = vec![0.0; params.len()];
        for l in (0..n_layers - 1).rev() {
            let (m, n) = (self.spec.layers[l], self.spec.layers[l + 1]);
            offset -= (m + 1) * n;
            let w = &params[offset..offset + m * n];
            let a_prev = &acts[l];
            for (i, &ai) in a_prev.iter().enumerate() {
                for (j, &dj) in delta.iter().enumerate() {
                    grad[offset + i * n + j] = ai * dj;
                }
            }
            for (j, &dj) in delta.iter().enumerate() {
                grad[offset + m * n + j] = dj;
            }
            if l > 0 {
                let pre = &pres[l - 1];
                let mut next = vec![0.0; m];
                for i in 0..m {
                    let mut acc = 0.0;
                    for (j, &dj) in delta.iter().enumerate() {
                        acc += w[i * n + j] * dj;
                    }
                    next[i] = if pre[i] > 0.0 { acc } else { 0.0 };
                }
                delta = next;
            }
        }
        Ok((loss, grad))
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

impl DifferentiableModel for MlpModel {
    type Example = DataPoint;

    fn param_len(&self) -> usize {
        self.spec.param_len()
    }

    fn loss(&self, params: &[f64], batch: &[DataPoint]) -> Result<f64> {
        Ok(self.loss_and_grad(params, batch)?.0)
    }

    fn grad(&self, params: &[f64], batch: &[DataPoint]) -> Result<Vec<f64>> {
        Ok(self.loss_and_grad(params, batch)?.1)
    }

    /// Single pass computing both outputs; `loss` and `grad` delegate
    /// here so all three entry points agree bitwise.
    fn loss_and_grad(&self, params: &[f64], batch: &[DataPoint]) -> Result<(f64, Vec<f64>)> {
        check_len(self.spec.param_len(), params)?;
        if batch.is_empty() {
            return Err(Error::invalid("batch must be non-empty"));
        }
        let mut loss_sum = 0.0;
        let mut grad_sum = vec![0.0; params.len()];
        for p in batch {
            let (l, g) = self.example_loss_grad(params, p)?;
            loss_sum += l;
            for (s, gi) in grad_sum.iter_mut().zip(&g) {
                *s += gi;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        for s in &mut grad_sum {
            *s *= inv;
        }
        Ok((loss_sum * inv, grad_sum))
    }

    fn has_per_example_grads(&self) -> bool {
        true
    }

    fn per_example_score_grads(&self, params: &[f64], batch: &[DataPoint]) -> Result<Vec<Vec<f64>>> {
        check_len(self.spec.param_len(), params)?;
        if batch.is_empty() {
            return Err(Error::invalid("batch must be non-empty"));
        }
        batch
            .iter()
            .map(|p| Ok(self.example_loss_grad(params, p)?.1))
            .collect()
    }
}

/// Draws `n` points in `dim` dimensions from `n_classes` Gaussian blobs
/// whose centers sit on the unit circle in the first two coordinates
/// (`(cos 2πc/C, sin 2πc/C, 0, …)`). Class labels are assigned
/// round-robin and shuffled, so counts are balanced to within one.
pub fn gen_blobs(
    n: usize,
    n_classes: usize,
    dim: usize,
    spread: f64,
    rng: &mut RandomSource,
) -> Result<SyntheticDataset> {
    if n == 0 {
        return Err(Error::invalid("need at least one point"));
    }
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if dim < 2 {
        return Err(Error::invalid("need at least two input dimensions"));
    }
    if !(spread >= 0.0) {
        return Err(Error::invalid(format!("spread must be >= 0, got {spread}")));
    }
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| {
            let angle = 2.0 * std::f64::consts::PI * c as f64 / n_classes as f64;
            let mut center = vec![0.0; dim];
            center[0] = angle.cos();
            center[1] = angle.sin();
            center
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    rng.shuffle(&mut labels);
    let points = labels
        .into_iter()
        .map(|y| {
            let x = centers[y]
                .iter()
                .map(|&c| c + spread * rng.standard_normal())
                .collect();
            DataPoint { x, y }
        })
        .collect();
    Ok(SyntheticDataset { points, n_classes })
}

/// Returns a copy of `data` with `round(rate·n)` labels reassigned, each
/// to a class drawn uniformly from the other classes (so every corrupted
/// label actually changes). The flipped positions are distinct.
pub fn inject_label_noise(
    data: &SyntheticDataset,
    rate: f64,
    rng: &mut RandomSource,
) -> Result<(SyntheticDataset, usize)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!("noise rate must be in [0, 1], got {rate}")));
    }
    if data.n_classes < 2 {
        return Err(Error::invalid("need at least two classes to corrupt labels"));
    }
    let k = (rate * data.len() as f64).round() as usize;
    let mut out = data.clone();
    let chosen = rng.distinct_indices(data.len(), k);
    for idx in chosen {
        let old = out.points[idx].y;
        let r = rng.below(data.n_classes - 1);
        out.points[idx].y = if r >= old { r + 1 } else { r };
    }
    Ok((out, k))
}

/// Moves the parameters distance `alpha` along the normalized ascent
/// direction of the loss on `data` (the direction that most increases
/// the loss to first order). Returns the parameters unchanged when the
/// gradient vanishes or `alpha` is zero.
pub fn adversarial_perturb(
    model: &MlpModel,
    params: &[f64],
    data: &[DataPoint],
    alpha: f64,
) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let g = model.grad(params, data)?;
    let gn = norm2(&g);
    if gn == 0.0 || alpha == 0.0 {
        return Ok(params.to_vec());
    }
    Ok(params
        .iter()
        .zip(&g)
        .map(|(p, gi)| p + alpha * gi / gn)
        .collect())
}

/// Fraction of `data` classified correctly (argmax with lowest-index
/// tie-break).
pub fn evaluate(model: &MlpModel, params: &[f64], data: &[DataPoint]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let mut correct = 0usize;
    for p in data {
        if model.predict(params, &p.x)? == p.y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
