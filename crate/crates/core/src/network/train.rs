use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use super::layer::ExecMode;
use super::loss::{loss_mod, softmax_cross_entropy, LossConfig};
use super::model::{Model, ModelGrads};
use crate::error::{Error, Result};
use crate::surrogate::TauSchedule;

/// Level above which `g(T)` counts as pushed to the clamp.
pub const HIGH_G_LEVEL: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainPath {
    /// Surrogate gradients, 1-bit evaluation.
    OneBit,
    /// Exact float transforms for both training and evaluation.
    Float,
}

impl TrainPath {
    pub fn name(&self) -> &'static str {
        match self {
            TrainPath::OneBit => "onebit",
            TrainPath::Float => "float",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "onebit" => Ok(TrainPath::OneBit),
            "float" => Ok(TrainPath::Float),
            other => Err(Error::Parse(format!("unknown training path '{other}'"))),
        }
    }

    fn train_exec(&self, tau: f64) -> ExecMode {
        match self {
            TrainPath::OneBit => ExecMode::Surrogate { tau },
            TrainPath::Float => ExecMode::Float,
        }
    }

    fn eval_exec(&self) -> ExecMode {
        match self {
            TrainPath::OneBit => ExecMode::Bitplane1Bit,
            TrainPath::Float => ExecMode::Float,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate for the head.
    pub lr: f64,
    /// Learning rate for the thresholds.
    pub lr_threshold: f64,
    pub path: TrainPath,
    pub schedule: TauSchedule,
    pub loss: LossConfig,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::domain("batch size must be positive"));
        }
        for (name, v) in [("lr", self.lr), ("lr_threshold", self.lr_threshold)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Metrics after one epoch; epoch 0 is the untrained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Regularized loss over the whole dataset on the training path.
    pub loss: f64,
    /// Accuracy on the evaluation path.
    pub accuracy: f64,
    pub tau: f64,
    pub mean_g: f64,
    /// Fraction of thresholds with `g(T) > 0.8`.
    pub frac_high_t: f64,
    /// Mean per-row early-termination cycles of each layer's forward transform.
    pub mean_cycles: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainReport {
    pub fn last(&self) -> &EpochMetrics {
        self.epochs.last().expect("report always holds the initial epoch")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy,tau,mean_g,frac_t_above_0_8,mean_cycles\n");
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.epoch, e.loss, e.accuracy, e.tau, e.mean_g, e.frac_high_t, e.mean_cycles
            )
            .unwrap();
        }
        out
    }
}

fn all_thresholds(model: &Model) -> (f64, f64) {
    let ts = model.thresholds();
    let n: usize = ts.iter().map(|t| t.len()).sum();
    let g_sum: f64 = ts.iter().map(|t| t.mean_g() * t.len() as f64).sum();
    let high: f64 = ts.iter().map(|t| t.fraction_above(HIGH_G_LEVEL) * t.len() as f64).sum();
    (g_sum / n as f64, high / n as f64)
}

/// Accuracy of `model` on `ds` under `exec`.
pub fn accuracy(model: &Model, ds: &Dataset, exec: ExecMode) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::domain("cannot evaluate on an empty dataset"));
    }
    let mut correct = 0usize;
    for (x, &y) in ds.features.iter().zip(&ds.labels) {
        if model.predict(x, exec)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// Mean early-termination cycles across rows, samples and layers, feeding
/// each layer the 1-bit output of the previous one.
pub fn mean_cycles(model: &Model, ds: &Dataset) -> Result<f64> {
    let mut total = 0u64;
    let mut rows = 0u64;
    for x in &ds.features {
        let mut h = x.clone();
        for l in &model.layers {
            for trace in l.early_termination(&h)? {
                total += trace.rows.iter().map(|r| r.cycles_used as u64).sum::<u64>();
                rows += trace.rows.len() as u64;
            }
            h = l.forward(&h, ExecMode::Bitplane1Bit)?;
        }
    }
    Ok(total as f64 / rows as f64)
}

fn metrics(model: &Model, ds: &Dataset, cfg: &TrainConfig, epoch: usize, tau: f64) -> Result<EpochMetrics> {
    let exec = cfg.path.train_exec(tau);
    let mut acc_loss = 0.0;
    for (x, &y) in ds.features.iter().zip(&ds.labels) {
        acc_loss += softmax_cross_entropy(&model.logits(x, exec)?, y).0;
    }
    acc_loss /= ds.len() as f64;
    let (mean_g, frac_high_t) = all_thresholds(model);
    Ok(EpochMetrics {
        epoch,
        loss: loss_mod(acc_loss, &model.thresholds(), &cfg.loss),
        accuracy: accuracy(model, ds, cfg.path.eval_exec())?,
        tau,
        mean_g,
        frac_high_t,
        mean_cycles: mean_cycles(model, ds)?,
    })
}

/// Minibatch SGD on the head and every threshold.
///
/// The batch-mean cross-entropy gradient comes from the training path
/// (surrogate or float); the threshold regularizer gradient is added per
/// threshold, and thresholds are clamped to `±T_max` after every step. `τ`
/// follows `cfg.schedule` in optimizer steps. Fully deterministic per seed.
pub fn train(model: &mut Model, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    if ds.is_empty() {
        return Err(Error::domain("training dataset is empty"));
    }
    if ds.dim != model.input_dim() {
        return Err(Error::size(format!(
            "dataset dimension {} does not match model input {}",
            ds.dim,
            model.input_dim()
        )));
    }
    if ds.num_classes > model.head.classes {
        return Err(Error::size("dataset has more classes than the head"));
    }
    cfg.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut step = 0u64;
    let mut report = vec![metrics(model, ds, cfg, 0, cfg.schedule.tau_at(0))?];

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let exec = cfg.path.train_exec(cfg.schedule.tau_at(step));
            let mut grads = ModelGrads::zeros(model);
            for &i in batch {
                let (logits, cache) = model.forward_cached(&ds.features[i], exec)?;
                let (_, g_logits) = softmax_cross_entropy(&logits, ds.labels[i]);
                grads.accumulate(&model.backward(&cache, &g_logits)?);
            }
            grads.scale(1.0 / batch.len() as f64);

            for (w, g) in model.head.weights.iter_mut().zip(&grads.head_weights) {
                *w -= cfg.lr * g;
            }
            for (b, g) in model.head.bias.iter_mut().zip(&grads.head_bias) {
                *b -= cfg.lr * g;
            }
            for (layer, g_t) in model.layers.iter_mut().zip(&grads.thresholds) {
                let total: Vec<f64> = layer
                    .thresholds
                    .values()
                    .iter()
                    .zip(g_t)
                    .map(|(&t, &g)| g + cfg.loss.penalty_grad(t))
                    .collect();
                layer.thresholds.step(&total, cfg.lr_threshold)?;
            }
            step += 1;
        }
        report.push(metrics(model, ds, cfg, epoch, cfg.schedule.tau_at(step))?);
    }
    Ok(TrainReport { epochs: report })
}
