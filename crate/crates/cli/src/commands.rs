use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bwht_core::crossbar::{failure_csv, failure_grid, ArrayShape};
use bwht_core::earlyterm::{run_cycle_study, CycleStudy, ThresholdDistribution};
use bwht_core::hadamard::{build_walsh, bwht_forward, bwht_inverse, bwht_plan, RowOrder};
use bwht_core::network::{
    make_toy_dataset, train, LossConfig, Model, RegularizerDirection, TrainConfig, TrainPath,
};
use bwht_core::surrogate::TauSchedule;
use clap::Args;

use crate::config::{EarlytermSection, SweepSection, TrainSection, TransformSection};
use crate::error::CliError;

/// Options every command accepts.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Input vector, one value per line, optional `value` header.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Logical vector length; defaults to the input length.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Power-of-two block size; defaults to one block covering `dim`.
    #[arg(long)]
    pub block_size: Option<usize>,
    /// forward, inverse or roundtrip.
    #[arg(long)]
    pub direction: Option<String>,
    /// natural or sequency.
    #[arg(long)]
    pub order: Option<String>,
    /// Also write the block transform matrix as CSV.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub sigma_ant: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sm: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub bits: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EarlytermArgs {
    /// uniform, bimodal_near_tmax or zero.
    #[arg(long)]
    pub distribution: Option<String>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Centre of the bimodal `g` distribution.
    #[arg(long)]
    pub center: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Checkpoint path; defaults to the CSV path with a `.ckpt` extension.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub samples_per_class: Option<usize>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_threshold: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// sparsity_intent or as_written.
    #[arg(long)]
    pub direction: Option<String>,
    /// onebit or float.
    #[arg(long)]
    pub path: Option<String>,
    #[arg(long)]
    pub tau_0: Option<f64>,
    #[arg(long)]
    pub tau_growth: Option<f64>,
    /// Optimizer steps between tau increases; defaults to one epoch.
    #[arg(long)]
    pub tau_step: Option<u64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_order(s: &str) -> Result<RowOrder, CliError> {
    match s {
        "natural" => Ok(RowOrder::Natural),
        "sequency" => Ok(RowOrder::Sequency),
        other => Err(usage(format!("unknown row order '{other}'"))),
    }
}

/// Reads one value per line. Blank lines are skipped and a leading `value`
/// header is allowed.
pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line == "value") {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| usage(format!("{}:{}: '{line}' is not a number", path.display(), n + 1)))?;
        if !v.is_finite() {
            return Err(usage(format!("{}:{}: value must be finite", path.display(), n + 1)));
        }
        values.push(v);
    }
    Ok(values)
}

fn value_csv(values: &[f64]) -> String {
    let mut out = String::from("value\n");
    for v in values {
        writeln!(out, "{v}").unwrap();
    }
    out
}

pub fn transform(args: TransformArgs, cfg: TransformSection, common: Common) -> Result<(), CliError> {
    let input = args
        .input
        .or(cfg.input)
        .ok_or_else(|| usage("transform needs --input"))?;
    let direction = args.direction.or(cfg.direction).unwrap_or_else(|| "forward".into());
    let order = parse_order(&args.order.or(cfg.order).unwrap_or_else(|| "natural".into()))?;
    let x = read_vector(&input)?;
    let dim = args.dim.or(cfg.dim).unwrap_or(x.len());
    if dim == 0 {
        return Err(usage("transform needs a non-empty vector"));
    }
    let block = args.block_size.or(cfg.block_size).unwrap_or(dim.next_power_of_two());
    let plan = bwht_plan(dim, block)?.with_order(order);

    let y = match direction.as_str() {
        "forward" | "roundtrip" => {
            if x.len() != dim {
                return Err(usage(format!("input has {} values, expected {dim}", x.len())));
            }
            let y = bwht_forward(&plan, &x)?;
            if direction == "roundtrip" {
                bwht_inverse(&plan, &y)?
            } else {
                y
            }
        }
        "inverse" => {
            if x.len() != plan.padded_len() {
                return Err(usage(format!(
                    "inverse input has {} values, expected {} for dim {dim}",
                    x.len(),
                    plan.padded_len()
                )));
            }
            bwht_inverse(&plan, &x)?
        }
        other => return Err(usage(format!("unknown direction '{other}'"))),
    };

    if let Some(path) = args.matrix_out.or(cfg.matrix_out) {
        let m = build_walsh(block.trailing_zeros(), order)?;
        emit(Some(&path), &m.to_csv())?;
    }
    emit(common.out.or(cfg.out).as_deref(), &value_csv(&y))
}

pub fn sweep_ant(args: SweepArgs, cfg: SweepSection, common: Common) -> Result<(), CliError> {
    let sigmas = args
        .sigma_ant
        .or(cfg.sigma_ant)
        .unwrap_or_else(|| vec![0.0, 0.01, 0.02, 0.05, 0.1]);
    let margins = args.sm.or(cfg.sm).unwrap_or_else(|| vec![0.0, 0.05, 0.1, 0.2, 0.4]);
    if sigmas.is_empty() || margins.is_empty() {
        return Err(usage("sigma_ant and sm grids must be non-empty"));
    }
    let shape = ArrayShape {
        rows: args.rows.or(cfg.rows).unwrap_or(16),
        cols: args.cols.or(cfg.cols).unwrap_or(16),
        num_bits: args.bits.or(cfg.bits).unwrap_or(8),
    };
    let trials = args.trials.or(cfg.trials).unwrap_or(10_000);
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let points = failure_grid(&shape, &sigmas, &margins, trials, seed)?;
    emit(common.out.or(cfg.out).as_deref(), &failure_csv(&points))
}

pub fn earlyterm(args: EarlytermArgs, cfg: EarlytermSection, common: Common) -> Result<(), CliError> {
    let name = args
        .distribution
        .or(cfg.distribution)
        .unwrap_or_else(|| "bimodal_near_tmax".into());
    let center = args.center.or(cfg.center);
    let spread = args.spread.or(cfg.spread);
    let distribution = match name.as_str() {
        "uniform" => ThresholdDistribution::Uniform,
        "zero" => ThresholdDistribution::Zero,
        "bimodal_near_tmax" => match ThresholdDistribution::bimodal_default() {
            ThresholdDistribution::BimodalNearTmax { center: c, spread: s } => ThresholdDistribution::BimodalNearTmax {
                center: center.unwrap_or(c),
                spread: spread.unwrap_or(s),
            },
            other => other,
        },
        other => return Err(usage(format!("unknown threshold distribution '{other}'"))),
    };
    let study = CycleStudy::new(
        args.bits.or(cfg.bits).unwrap_or(8),
        args.cols.or(cfg.cols).unwrap_or(16),
        args.trials.or(cfg.trials).unwrap_or(10_000),
        distribution,
        common.seed.or(cfg.seed).unwrap_or(0),
    );
    let hist = run_cycle_study(&study)?;
    emit(common.out.or(cfg.out).as_deref(), &hist.to_csv())
}

pub fn train_cmd(args: TrainArgs, cfg: TrainSection, common: Common) -> Result<(), CliError> {
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let classes = args.classes.or(cfg.classes).unwrap_or(2);
    let dim = args.dim.or(cfg.dim).unwrap_or(16);
    let samples = args.samples_per_class.or(cfg.samples_per_class).unwrap_or(50);
    let block = args.block_size.or(cfg.block_size).unwrap_or(16);
    let bits = args.bits.or(cfg.bits).unwrap_or(4);
    let x_max = args.x_max.or(cfg.x_max).unwrap_or(1.0);
    let t_max = args.t_max.or(cfg.t_max).unwrap_or(1.0);
    let batch_size = args.batch_size.or(cfg.batch_size).unwrap_or(16);
    if batch_size == 0 {
        return Err(usage("batch_size must be positive"));
    }
    let direction = RegularizerDirection::parse(
        &args.direction.or(cfg.direction).unwrap_or_else(|| "sparsity_intent".into()),
    )?;
    let path = TrainPath::parse(&args.path.or(cfg.path).unwrap_or_else(|| "onebit".into()))?;
    let steps_per_epoch = (classes * samples).div_ceil(batch_size).max(1) as u64;
    let schedule = TauSchedule::new(
        args.tau_0.or(cfg.tau_0).unwrap_or(1.0),
        args.tau_growth.or(cfg.tau_growth).unwrap_or(2.0),
        args.tau_step.or(cfg.tau_step).unwrap_or(steps_per_epoch),
        args.tau_max.or(cfg.tau_max).unwrap_or(1e4),
    )?;
    let config = TrainConfig {
        epochs: args.epochs.or(cfg.epochs).unwrap_or(30),
        batch_size,
        lr: args.lr.or(cfg.lr).unwrap_or(0.1),
        lr_threshold: args.lr_threshold.or(cfg.lr_threshold).unwrap_or(0.05),
        path,
        schedule,
        loss: LossConfig::new(args.lambda.or(cfg.lambda).unwrap_or(0.02), t_max, direction)?,
        seed: seed.wrapping_add(2),
    };

    let ds = make_toy_dataset(classes, dim, samples, seed)?;
    let mut model = Model::single_layer(dim, classes, block, bits, x_max, t_max, seed.wrapping_add(1))?;
    let report = train(&mut model, &ds, &config)?;

    let out = common.out.or(cfg.out);
    let checkpoint = args
        .checkpoint
        .or(cfg.checkpoint)
        .or_else(|| out.as_ref().map(|p| p.with_extension("ckpt")));
    emit(out.as_deref(), &report.to_csv())?;
    if let Some(p) = checkpoint {
        emit(Some(&p), &model.to_checkpoint())?;
    }
    Ok(())
}
