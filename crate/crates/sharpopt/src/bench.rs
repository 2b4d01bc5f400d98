//! Classifier benchmark: trains the MLP under each optimizer variant and
//! measures robustness to label noise and to parameter perturbation.
//!
//! The protocol is deliberately rigid so runs are comparable and exactly
//! reproducible:
//!
//! - training data is regenerated per seed (`1000 + seed`), label noise
//!   is injected with its own stream (`2000 + seed`), and one shared
//!   clean test set (seed 990001) scores every run;
//! - every variant sees identical data, batching, and schedules — only
//!   the probe rule differs;
//! - the learning rate follows a cosine decay over the full step budget.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{
    adversarial_perturb, evaluate, gen_blobs, inject_label_noise, MlpModel, MlpSpec,
    SyntheticDataset,
};
use crate::model::DifferentiableModel;
use crate::optim::{cosine_lr, FisherMode, OptimConfig, Optimizer, Variant};
use crate::rng::RandomSource;
use crate::vector::norm2;

/// Offset added to a training seed to derive its data-generation stream.
pub const DATA_SEED_BASE: u64 = 1000;
/// Offset added to a training seed to derive its label-noise stream.
pub const NOISE_SEED_BASE: u64 = 2000;
/// Seed of the single clean test set shared by every run.
pub const TEST_SEED: u64 = 990_001;

/// One optimizer entry in the benchmark roster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub variant: Variant,
    pub gamma: f64,
    #[serde(default)]
    pub eta: f64,
}

/// Full benchmark protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub dim: usize,
    pub spread: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub label_smoothing: f64,
    /// Hidden-layer widths; input and output widths come from `dim` and
    /// `n_classes`.
    pub hidden: Vec<usize>,
    /// Label-corruption fractions for the noise experiment.
    pub noise_rates: Vec<f64>,
    /// Perturbation radii for the perturbation experiment, as multiples
    /// of the trained parameter norm.
    pub alpha_multipliers: Vec<f64>,
    pub runs: Vec<RunSpec>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seeds: vec![0, 1, 2, 3, 4],
            n_train: 300,
            n_test: 1500,
            n_classes: 3,
            dim: 2,
            spread: 0.3,
            epochs: 60,
            batch_size: 32,
            base_lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            label_smoothing: 0.1,
            hidden: vec![32, 32],
            noise_rates: vec![0.0, 0.2, 0.4],
            alpha_multipliers: vec![0.01, 0.05, 0.1, 0.5, 1.0, 2.0],
            runs: vec![
                RunSpec { variant: Variant::Sgd, gamma: 0.0, eta: 0.0 },
                RunSpec { variant: Variant::Sam, gamma: 0.05, eta: 0.0 },
                RunSpec { variant: Variant::Asam, gamma: 0.5, eta: 0.0 },
                RunSpec { variant: Variant::Fsam, gamma: 0.1, eta: 1.0 },
            ],
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("need at least one seed"));
        }
        if self.runs.is_empty() {
            return Err(Error::invalid("need at least one optimizer run"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("epochs and batch_size must be >= 1"));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::invalid("dataset sizes must be >= 1"));
        }
        for r in &self.noise_rates {
            if !(0.0..=1.0).contains(r) {
                return Err(Error::invalid(format!("noise rate {r} outside [0, 1]")));
            }
        }
        for a in &self.alpha_multipliers {
            if !(*a >= 0.0) {
                return Err(Error::invalid(format!("alpha multiplier {a} must be >= 0")));
            }
        }
        self.model_spec().validate()?;
        for run in &self.runs {
            self.optim_config(run).validate()?;
        }
        Ok(())
    }

    pub fn model_spec(&self) -> MlpSpec {
        let mut layers = Vec::with_capacity(self.hidden.len() + 2);
        layers.push(self.dim);
        layers.extend_from_slice(&self.hidden);
        layers.push(self.n_classes);
        MlpSpec {
            layers,
            label_smoothing: self.label_smoothing,
        }
    }

    fn optim_config(&self, run: &RunSpec) -> OptimConfig {
        OptimConfig {
            variant: run.variant,
            gamma: run.gamma,
            eta: run.eta,
            lr: self.base_lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            fisher_mode: FisherMode::GradientMagnitude,
        }
    }

    fn train_data(&self, seed: u64) -> Result<SyntheticDataset> {
        let mut rng = RandomSource::new(DATA_SEED_BASE + seed);
        gen_blobs(self.n_train, self.n_classes, self.dim, self.spread, &mut rng)
    }

    pub fn test_data(&self) -> Result<SyntheticDataset> {
        let mut rng = RandomSource::new(TEST_SEED);
        gen_blobs(self.n_test, self.n_classes, self.dim, self.spread, &mut rng)
    }
}

/// Trained parameters plus end-of-training diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Vec<f64>,
    /// Mean loss over the full training set at the final parameters.
    pub final_loss: f64,
}

/// Trains the model on `data` from the given seed: seeded init, per-epoch
/// reshuffled mini-batches (final short batch included), cosine-decayed
/// learning rate over the whole step budget.
pub fn train(
    model: &MlpModel,
    cfg: &BenchConfig,
    run: &RunSpec,
    data: &SyntheticDataset,
    seed: u64,
) -> Result<TrainOutcome> {
    let mut rng = RandomSource::new(seed);
    let mut params = model.init_params(&mut rng);
    let mut opt = Optimizer::new(cfg.optim_config(run), params.len())?;

    let n = data.len();
    let n_batches = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * n_batches;
    let mut step_idx = 0usize;
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| data.points[i].clone()).collect();
            let lr = cosine_lr(cfg.base_lr, step_idx, total_steps)?;
            let (next, _) = opt.step(model, &params, &batch, lr)?;
            params = next;
            step_idx += 1;
        }
    }
    let final_loss = model.loss(&params, &data.points)?;
    Ok(TrainOutcome { params, final_loss })
}

/// One benchmark measurement. Noise-experiment rows carry `alpha = 0`;
/// perturbation-experiment rows carry `noise_rate = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRecord {
    pub variant: Variant,
    pub gamma: f64,
    pub eta: f64,
    pub seed: u64,
    pub noise_rate: f64,
    pub alpha: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub loss: f64,
}

/// Label-noise experiment: for every (run, noise rate, seed) triple,
/// corrupt that fraction of training labels, train, and score on the
/// shared clean test set. `train_acc` is measured on the corrupted
/// training labels, so it also tracks memorization.
pub fn run_noise_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let model = MlpModel::new(cfg.model_spec())?;
    let test = cfg.test_data()?;
    let mut records = Vec::new();
    for run in &cfg.runs {
        for &rate in &cfg.noise_rates {
            for &seed in &cfg.seeds {
                let clean = cfg.train_data(seed)?;
                let mut noise_rng = RandomSource::new(NOISE_SEED_BASE + seed);
                let (noisy, _) = inject_label_noise(&clean, rate, &mut noise_rng)?;
                let out = train(&model, cfg, run, &noisy, seed)?;
                records.push(BenchRecord {
                    variant: run.variant,
                    gamma: run.gamma,
                    eta: run.eta,
                    seed,
                    noise_rate: rate,
                    alpha: 0.0,
                    train_acc: evaluate(&model, &out.params, &noisy.points)?,
                    test_acc: evaluate(&model, &out.params, &test.points)?,
                    loss: out.final_loss,
                });
            }
        }
    }
    Ok(records)
}

/// Parameter-perturbation experiment: train on clean data once per
/// (run, seed), then push the parameters distance `multiplier·‖θ‖` along
/// the training-loss ascent direction and score the perturbed model.
pub fn run_perturbation_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let model = MlpModel::new(cfg.model_spec())?;
    let test = cfg.test_data()?;
    let mut records = Vec::new();
    for run in &cfg.runs {
        for &seed in &cfg.seeds {
            let data = cfg.train_data(seed)?;
            let out = train(&model, cfg, run, &data, seed)?;
            let scale = norm2(&out.params);
            for &mult in &cfg.alpha_multipliers {
                let moved = adversarial_perturb(&model, &out.params, &data.points, mult * scale)?;
                records.push(BenchRecord {
                    variant: run.variant,
                    gamma: run.gamma,
                    eta: run.eta,
                    seed,
                    noise_rate: 0.0,
                    alpha: mult,
                    train_acc: evaluate(&model, &moved, &data.points)?,
                    test_acc: evaluate(&model, &moved, &test.points)?,
                    loss: model.loss(&moved, &data.points)?,
                });
            }
        }
    }
    Ok(records)
}

/// Writes benchmark rows as CSV with header
/// `variant,gamma,eta,seed,noise_rate,alpha,train_acc,test_acc,loss`.
pub fn write_bench_csv<W: std::io::Write>(out: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)
            .map_err(|e| Error::numeric("csv write", e.to_string()))?;
    }
    w.flush().map_err(|e| Error::numeric("csv flush", e.to_string()))?;
    Ok(())
}

/// Reads rows written by [`write_bench_csv`].
pub fn read_bench_csv<R: std::io::Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::numeric("csv read", e.to_string())))
        .collect()
}

/// Median wall-clock seconds per optimizer step for each configuration,
/// over `steps` consecutive steps on the same model and batch.
pub fn measure_step_times(
    model: &MlpModel,
    base_params: &[f64],
    batch: &[<MlpModel as DifferentiableModel>::Example],
    configs: &[OptimConfig],
    steps: usize,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::invalid("need at least one timed step"));
    }
    let mut medians = Vec::with_capacity(configs.len());
    for cfg in configs {
        let mut opt = Optimizer::new(*cfg, base_params.len())?;
        let mut params = base_params.to_vec();
        let mut times = Vec::with_capacity(steps);
        for _ in 0..steps {
            let start = Instant::now();
            let (next, _) = opt.step(model, &params, batch, cfg.lr)?;
            times.push(start.elapsed().as_secs_f64());
            params = next;
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = steps / 2;
        let median = if steps % 2 == 1 {
            times[mid]
        } else {
            0.5 * (times[mid - 1] + times[mid])
        };
        medians.push(median);
    }
    Ok(medians)
}
