//! Predictive early termination of bit-serial rows.
//!
//! Rows are evaluated MSB first. After each bitplane the running output
//! `y = Σ O_b · 2^(b−1)` is bracketed by the values reachable from the
//! planes still to come, `y ± (2^r − 1)` with `r` remaining planes. When the
//! whole bracket lies inside the soft-threshold dead zone `[−T, T]`, the
//! post-activation output is known to be zero and the row stops.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::crossbar::{decide, planes_msb_first, CrossbarConfig, NoiseModel};
use crate::error::{Error, Result};
use crate::fixedpoint::{full_scale, BitplaneMatrix, MAX_BITS};

/// Running output and bounds of one row after an MSB-first prefix of planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunningBounds {
    num_bits: u32,
    processed: u32,
    value: i64,
}

impl RunningBounds {
    pub fn new(num_bits: u32) -> Result<Self> {
        if num_bits == 0 || num_bits > MAX_BITS {
            return Err(Error::domain(format!("bit width {num_bits} out of range")));
        }
        Ok(Self {
            num_bits,
            processed: 0,
            value: 0,
        })
    }

    pub fn num_bits(&self) -> u32 {
        self.num_bits
    }

    /// Running output `y_b`.
    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn processed(&self) -> u32 {
        self.processed
    }

    pub fn remaining(&self) -> u32 {
        self.num_bits - self.processed
    }

    /// Plane indices consumed so far, MSB first.
    pub fn processed_planes(&self) -> Vec<u32> {
        (self.num_bits - self.processed + 1..=self.num_bits).rev().collect()
    }

    /// The plane expected next, if any remain.
    pub fn next_plane(&self) -> Option<u32> {
        (self.remaining() > 0).then(|| self.remaining())
    }

    fn slack(&self) -> i64 {
        (1i64 << self.remaining()) - 1
    }

    pub fn upper(&self) -> i64 {
        self.value + self.slack()
    }

    pub fn lower(&self) -> i64 {
        self.value - self.slack()
    }

    pub fn width(&self) -> i64 {
        self.upper() - self.lower()
    }
}

/// Folds the decision of plane `b` into the running bounds.
pub fn update_bounds(rb: &RunningBounds, plane: u32, decision: i8) -> Result<RunningBounds> {
    if plane == 0 || plane > rb.num_bits {
        return Err(Error::Index(format!(
            "plane {plane} outside 1..={}",
            rb.num_bits
        )));
    }
    if decision != 1 && decision != -1 {
        return Err(Error::domain(format!("decision {decision} is not ±1")));
    }
    if plane > rb.remaining() {
        return Err(Error::State(format!("plane {plane} already processed")));
    }
    if plane != rb.remaining() {
        return Err(Error::State(format!(
            "planes are consumed MSB first; expected {}, got {plane}",
            rb.remaining()
        )));
    }
    Ok(RunningBounds {
        num_bits: rb.num_bits,
        processed: rb.processed + 1,
        value: rb.value + decision as i64 * (1i64 << (plane - 1)),
    })
}

/// True iff `[y_LB, y_UB] ⊆ [−T, T]`.
pub fn should_terminate(rb: &RunningBounds, threshold: u64) -> bool {
    let t = threshold.min(i64::MAX as u64) as i64;
    rb.upper() <= t && rb.lower() >= -t
}

/// Converts a real-valued threshold to output-code units, rounding toward
/// zero so that `|y| ≤ units` implies `|y · x_max/(2^B − 1)| ≤ |t|`.
pub fn threshold_to_units(t: f64, num_bits: u32, x_max: f64) -> u64 {
    let units = (t.abs() * full_scale(num_bits) as f64 / x_max).floor();
    if units.is_finite() {
        units as u64
    } else {
        u64::MAX
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalValue {
    /// Full 1-bit transform output.
    Value(i64),
    /// Terminated: the post-activation output is zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowTrace {
    pub cycles_used: u32,
    pub terminated_early: bool,
    pub final_value: FinalValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminationTrace {
    pub num_bits: u32,
    pub rows: Vec<RowTrace>,
}

impl TerminationTrace {
    /// Cycles for a lockstep array, which cannot retire rows independently.
    pub fn array_cycles(&self) -> u32 {
        self.rows.iter().map(|r| r.cycles_used).max().unwrap_or(0)
    }

    pub fn mean_row_cycles(&self) -> f64 {
        let total: u64 = self.rows.iter().map(|r| r.cycles_used as u64).sum();
        total as f64 / self.rows.len() as f64
    }
}

/// The 1-bit transform with per-row early termination.
///
/// Terminated rows report `0` in the output vector. Since complete outputs
/// are odd, a zero always identifies a terminated row.
pub fn f0_with_early_term(
    cfg: &CrossbarConfig,
    bp: &BitplaneMatrix,
    thresholds: &[u64],
    noise: Option<&NoiseModel>,
) -> Result<(Vec<i64>, TerminationTrace)> {
    if thresholds.len() != cfg.rows() {
        return Err(Error::size(format!(
            "{} thresholds for {} rows",
            thresholds.len(),
            cfg.rows()
        )));
    }
    if bp.num_elems() != cfg.cols() {
        return Err(Error::size(format!(
            "input has {} elements, crossbar has {} columns",
            bp.num_elems(),
            cfg.cols()
        )));
    }
    let planes = planes_msb_first(bp);
    let num_bits = bp.num_bits();
    let mut outputs = Vec::with_capacity(cfg.rows());
    let mut rows = Vec::with_capacity(cfg.rows());
    for (i, &t) in thresholds.iter().enumerate() {
        let mut stream = noise.map(|n| n.row_stream(i, cfg.cols()));
        let mut rb = RunningBounds::new(num_bits)?;
        let mut trace = None;
        for plane in &planes {
            let rec = decide(i, cfg.row(i), plane, stream.as_mut())?;
            rb = update_bounds(&rb, plane.index, rec.decision)?;
            if rb.remaining() > 0 && should_terminate(&rb, t) {
                trace = Some(RowTrace {
                    cycles_used: rb.processed(),
                    terminated_early: true,
                    final_value: FinalValue::Zero,
                });
                break;
            }
        }
        let trace = trace.unwrap_or(RowTrace {
            cycles_used: num_bits,
            terminated_early: false,
            final_value: FinalValue::Value(rb.value()),
        });
        outputs.push(match trace.final_value {
            FinalValue::Value(v) => v,
            FinalValue::Zero => 0,
        });
        rows.push(trace);
    }
    Ok((outputs, TerminationTrace { num_bits, rows }))
}

/// Distribution of per-row cycle counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleHistogram {
    pub num_bits: u32,
    /// `counts[c - 1]` rows finished after `c` cycles.
    pub counts: Vec<u64>,
}

impl CycleHistogram {
    pub fn from_cycles(num_bits: u32, cycles: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut counts = vec![0u64; num_bits as usize];
        for c in cycles {
            if c == 0 || c > num_bits {
                return Err(Error::domain(format!("cycle count {c} outside 1..={num_bits}")));
            }
            counts[(c - 1) as usize] += 1;
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::domain("cycle histogram needs at least one row"));
        }
        Ok(Self { num_bits, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        let weighted: u64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &n)| (i as u64 + 1) * n)
            .sum();
        weighted as f64 / self.total() as f64
    }

    /// `cycles,count` rows for 1..=B followed by a `mean,<value>` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycles,count\n");
        for (i, n) in self.counts.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, n).unwrap();
        }
        writeln!(out, "mean,{}", self.mean()).unwrap();
        out
    }
}

/// Histogram of per-row cycles across a set of traces.
pub fn cycle_histogram(traces: &[TerminationTrace]) -> Result<CycleHistogram> {
    let first = traces
        .first()
        .ok_or_else(|| Error::domain("no traces to summarize"))?;
    if traces.iter().any(|t| t.num_bits != first.num_bits) {
        return Err(Error::domain("traces mix different bit widths"));
    }
    CycleHistogram::from_cycles(
        first.num_bits,
        traces.iter().flat_map(|t| t.rows.iter().map(|r| r.cycles_used)),
    )
}

/// How per-row thresholds are drawn in a cycle study. `g = |T| / T_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdDistribution {
    /// `T = 0` everywhere; nothing can terminate.
    Zero,
    /// `g ~ U[0, 1)`.
    Uniform,
    /// `g ~ N(center, spread²)` clamped to `[0, 1]`. A center above 1 models
    /// a trained population whose regularizer pushes thresholds into the
    /// `±T_max` clamp.
    BimodalNearTmax { center: f64, spread: f64 },
}

impl ThresholdDistribution {
    pub fn bimodal_default() -> Self {
        ThresholdDistribution::BimodalNearTmax {
            center: 1.1,
            spread: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        if let ThresholdDistribution::BimodalNearTmax { center, spread } = *self {
            if !(center.is_finite() && spread.is_finite() && spread >= 0.0) {
                return Err(Error::domain("bimodal threshold parameters must be finite, spread >= 0"));
            }
        }
        Ok(())
    }

    fn sample_g<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ThresholdDistribution::Zero => 0.0,
            ThresholdDistribution::Uniform => rng.random::<f64>(),
            ThresholdDistribution::BimodalNearTmax { center, spread } => {
                let g = Normal::new(center, spread).expect("validated").sample(rng);
                g.clamp(0.0, 1.0)
            }
        }
    }
}

/// Random-instance early-termination study (noiseless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleStudy {
    pub num_bits: u32,
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    pub distribution: ThresholdDistribution,
    /// `T_max` in output-code units; usually `2^B − 1`.
    pub t_max: u64,
    pub seed: u64,
}

impl CycleStudy {
    pub fn new(num_bits: u32, cols: usize, trials: usize, distribution: ThresholdDistribution, seed: u64) -> Self {
        Self {
            num_bits,
            rows: 1,
            cols,
            trials,
            distribution,
            t_max: full_scale(num_bits.min(MAX_BITS)) as u64,
            seed,
        }
    }
}

/// Runs `trials` random instances. Trial `t` draws its weights, inputs
/// (uniform codes with uniform signs) and thresholds from stream `t` of the
/// seeded generator.
pub fn run_cycle_study(study: &CycleStudy) -> Result<CycleHistogram> {
    if study.trials == 0 || study.rows == 0 || study.cols == 0 {
        return Err(Error::domain("cycle study needs trials, rows and columns"));
    }
    if study.num_bits == 0 || study.num_bits > MAX_BITS {
        return Err(Error::domain(format!("bit width {} out of range", study.num_bits)));
    }
    study.distribution.validate()?;
    let fs = full_scale(study.num_bits);
    let mut cycles = Vec::with_capacity(study.trials * study.rows);
    for t in 0..study.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(study.seed);
        rng.set_stream(t as u64);
        let cfg = CrossbarConfig::random(study.rows, study.cols, &mut rng);
        let signs = (0..study.cols)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        let codes = (0..study.cols).map(|_| rng.random_range(0..=fs)).collect();
        let bp = BitplaneMatrix::from_codes(signs, codes, study.num_bits, 1.0)?;
        let thresholds: Vec<u64> = (0..study.rows)
            .map(|_| (study.distribution.sample_g(&mut rng) * study.t_max as f64).floor() as u64)
            .collect();
        let (_, trace) = f0_with_early_term(&cfg, &bp, &thresholds, None)?;
        cycles.extend(trace.rows.iter().map(|r| r.cycles_used));
    }
    CycleHistogram::from_cycles(study.num_bits, cycles)
}
