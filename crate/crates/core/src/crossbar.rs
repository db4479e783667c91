//! Digital twin of the ±1 crossbar.
//!
//! Each bitplane of a quantized input produces one signed product sum (PSUM)
//! per row. A 1-bit comparator replaces the ADC: `+1` for a positive PSUM,
//! `−1` otherwise. Row outputs are reassembled as `Σ_b O_b · 2^(b−1)`.
//!
//! Analog non-idealities are modelled as Gaussian noise on each PSUM with
//! standard deviation `L_I · σ_ANT`, where `L_I` is the number of columns.

use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fixedpoint::{full_scale, signed_plane, BitplaneMatrix, SignedBitplane};
use crate::hadamard::WalshMatrix;

/// ±1 weights mapped onto the array, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossbarConfig {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl CrossbarConfig {
    pub fn new(rows: usize, cols: usize, entries: Vec<i8>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::size("crossbar needs at least one column"));
        }
        if entries.len() != rows * cols {
            return Err(Error::size(format!(
                "{} entries for a {rows}x{cols} array",
                entries.len()
            )));
        }
        if let Some(v) = entries.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::domain(format!("crossbar entry {v} is not ±1")));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_matrix(m: &WalshMatrix) -> Self {
        Self {
            rows: m.size(),
            cols: m.size(),
            entries: m.entries().to_vec(),
        }
    }

    /// Uniform random ±1 entries.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let entries = (0..rows * cols)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Mapped input length `L_I`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    fn check_input(&self, bp: &BitplaneMatrix) -> Result<()> {
        if bp.num_elems() != self.cols {
            return Err(Error::size(format!(
                "input has {} elements, crossbar has {} columns",
                bp.num_elems(),
                self.cols
            )));
        }
        Ok(())
    }
}

/// PSUM perturbation and safety margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Per-unit-length PSUM noise standard deviation.
    pub sigma_ant: f64,
    /// Normalized PSUM band inside which decision flips are tolerated.
    pub safety_margin: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma_ant: f64, safety_margin: f64, seed: u64) -> Result<Self> {
        if !(sigma_ant.is_finite() && sigma_ant >= 0.0) {
            return Err(Error::domain(format!("sigma_ant {sigma_ant} must be finite and >= 0")));
        }
        if !(safety_margin.is_finite() && safety_margin >= 0.0) {
            return Err(Error::domain(format!(
                "safety margin {safety_margin} must be finite and >= 0"
            )));
        }
        Ok(Self {
            sigma_ant,
            safety_margin,
            seed,
        })
    }

    /// Same parameters with a seed derived from `(seed, salt)`, for giving
    /// separate crossbar invocations independent noise.
    pub fn reseeded(&self, salt: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(salt);
        Self {
            seed: rng.next_u64(),
            ..*self
        }
    }

    /// Noise source for one row of an array with `cols` columns. Draws are
    /// consumed MSB-first, one per bitplane.
    pub fn row_stream(&self, row: usize, cols: usize) -> RowNoise {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(row as u64);
        RowNoise {
            rng,
            std_dev: cols as f64 * self.sigma_ant,
        }
    }
}

/// Per-row Gaussian noise stream.
#[derive(Debug, Clone)]
pub struct RowNoise {
    rng: ChaCha8Rng,
    std_dev: f64,
}

impl RowNoise {
    pub fn sample(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.std_dev * z
    }
}

/// One comparator evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsumRecord {
    pub row: usize,
    pub plane: u32,
    pub exact_psum: i64,
    pub noisy_psum: f64,
    pub decision: i8,
}

/// Exact signed product sum of one bitplane against one ±1 row.
pub fn psum_row(row: &[i8], plane: &SignedBitplane) -> Result<i64> {
    if row.len() != plane.len() {
        return Err(Error::size(format!(
            "row length {} does not match plane length {}",
            row.len(),
            plane.len()
        )));
    }
    Ok((0..row.len())
        .map(|j| row[j] as i64 * plane.value(j) as i64)
        .sum())
}

/// 1-bit comparator: `+1` iff the PSUM is strictly positive.
pub fn comparator(psum: f64) -> i8 {
    if psum > 0.0 {
        1
    } else {
        -1
    }
}

/// Evaluates one (row, bitplane) decision, drawing noise if a stream is given.
pub fn decide(
    row_index: usize,
    row: &[i8],
    plane: &SignedBitplane,
    noise: Option<&mut RowNoise>,
) -> Result<PsumRecord> {
    let exact_psum = psum_row(row, plane)?;
    let noisy_psum = match noise {
        Some(n) => exact_psum as f64 + n.sample(),
        None => exact_psum as f64,
    };
    Ok(PsumRecord {
        row: row_index,
        plane: plane.index,
        exact_psum,
        noisy_psum,
        decision: comparator(noisy_psum),
    })
}

/// All signed planes of `bp`, MSB first.
pub(crate) fn planes_msb_first(bp: &BitplaneMatrix) -> Vec<SignedBitplane> {
    (1..=bp.num_bits())
        .rev()
        .map(|b| signed_plane(bp, b).expect("plane index in range"))
        .collect()
}

/// Every comparator decision of the 1-bit transform, row-major, MSB first
/// within a row.
pub fn f0_records(
    cfg: &CrossbarConfig,
    bp: &BitplaneMatrix,
    noise: Option<&NoiseModel>,
) -> Result<Vec<PsumRecord>> {
    cfg.check_input(bp)?;
    let planes = planes_msb_first(bp);
    let mut out = Vec::with_capacity(cfg.rows * planes.len());
    for i in 0..cfg.rows {
        let mut stream = noise.map(|n| n.row_stream(i, cfg.cols));
        for plane in &planes {
            out.push(decide(i, cfg.row(i), plane, stream.as_mut())?);
        }
    }
    Ok(out)
}

/// The ADC-free approximate transform: per row,
/// `y_i = Σ_b comparator(PSUM_ib + ε_ib) · 2^(b−1)`.
///
/// Outputs are odd integers in `[−(2^B − 1), 2^B − 1]`.
pub fn f0_apply(
    cfg: &CrossbarConfig,
    bp: &BitplaneMatrix,
    noise: Option<&NoiseModel>,
) -> Result<Vec<i64>> {
    let records = f0_records(cfg, bp, noise)?;
    let mut out = vec![0i64; cfg.rows];
    for r in records {
        out[r.row] += r.decision as i64 * (1i64 << (r.plane - 1));
    }
    Ok(out)
}

/// True integer product `Σ_j sign_j · code_j · B_ij` with no per-plane
/// quantization.
pub fn exact_oracle(cfg: &CrossbarConfig, bp: &BitplaneMatrix) -> Result<Vec<i64>> {
    cfg.check_input(bp)?;
    let x = bp.signed_codes();
    Ok((0..cfg.rows)
        .map(|i| cfg.row(i).iter().zip(&x).map(|(&w, &v)| w as i64 * v).sum())
        .collect())
}

/// Dimensions of the random arrays used in Monte Carlo failure trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayShape {
    pub rows: usize,
    pub cols: usize,
    pub num_bits: u32,
}

impl ArrayShape {
    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::size("array shape needs rows and columns"));
        }
        if self.num_bits == 0 || self.num_bits > crate::fixedpoint::MAX_BITS {
            return Err(Error::domain(format!("bit width {} out of range", self.num_bits)));
        }
        Ok(())
    }
}

/// Failure rate at one (σ_ANT, SM) grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailurePoint {
    pub sigma_ant: f64,
    pub safety_margin: f64,
    pub trials: usize,
    pub failures: u64,
    pub decisions: u64,
}

impl FailurePoint {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.decisions as f64
    }
}

/// Random trial `t`: weights, inputs and standard-normal noise draws, all from
/// the stream `(seed, t)`.
struct Trial {
    psums: Vec<i64>,
    normals: Vec<f64>,
}

fn draw_trial(shape: &ArrayShape, seed: u64, t: usize) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let cfg = CrossbarConfig::random(shape.rows, shape.cols, &mut rng);
    let fs = full_scale(shape.num_bits);
    let signs: Vec<i8> = (0..shape.cols)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    let codes: Vec<u32> = (0..shape.cols).map(|_| rng.random_range(0..=fs)).collect();
    let bp = BitplaneMatrix::from_codes(signs, codes, shape.num_bits, 1.0)
        .expect("random codes are in range");
    let planes = planes_msb_first(&bp);
    let mut psums = Vec::with_capacity(shape.rows * planes.len());
    for i in 0..shape.rows {
        for p in &planes {
            psums.push(psum_row(cfg.row(i), p).expect("shapes agree"));
        }
    }
    let normals = (0..psums.len()).map(|_| rng.sample(StandardNormal)).collect();
    Trial { psums, normals }
}

/// Monte Carlo failure statistics over a σ_ANT × SM grid.
///
/// Every grid point sees the same random trials (seeded from `seed` and the
/// trial index), so the rates are directly comparable across the grid. A
/// decision fails when its noisy comparator output differs from the
/// noiseless one while `|PSUM| ≥ L_I · SM`. Points are returned sorted by
/// `(σ_ANT, SM)`.
pub fn failure_grid(
    shape: &ArrayShape,
    sigmas: &[f64],
    margins: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<FailurePoint>> {
    shape.validate()?;
    if trials == 0 {
        return Err(Error::domain("failure statistics need at least one trial"));
    }
    if sigmas.is_empty() || margins.is_empty() {
        return Err(Error::domain("empty sigma_ant or safety-margin grid"));
    }
    let mut grid = Vec::with_capacity(sigmas.len() * margins.len());
    for &s in sigmas {
        for &m in margins {
            let nm = NoiseModel::new(s, m, seed)?;
            grid.push((nm.sigma_ant, nm.safety_margin));
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
    grid.dedup();

    let l_i = shape.cols as f64;
    let mut failures = vec![0u64; grid.len()];
    let mut decisions = 0u64;
    for t in 0..trials {
        let trial = draw_trial(shape, seed, t);
        decisions += trial.psums.len() as u64;
        for (k, &(sigma, sm)) in grid.iter().enumerate() {
            let std_dev = l_i * sigma;
            let margin = l_i * sm;
            failures[k] += trial
                .psums
                .iter()
                .zip(&trial.normals)
                .filter(|&(&p, &z)| {
                    let clean = comparator(p as f64);
                    let noisy = comparator(p as f64 + std_dev * z);
                    clean != noisy && (p.abs() as f64) >= margin
                })
                .count() as u64;
        }
    }
    Ok(grid
        .into_iter()
        .zip(failures)
        .map(|((sigma_ant, safety_margin), failures)| FailurePoint {
            sigma_ant,
            safety_margin,
            trials,
            failures,
            decisions,
        })
        .collect())
}

/// Failure fraction for a single noise model; deterministic per seed.
pub fn failure_stats(shape: &ArrayShape, noise: &NoiseModel, trials: usize) -> Result<f64> {
    let points = failure_grid(
        shape,
        &[noise.sigma_ant],
        &[noise.safety_margin],
        trials,
        noise.seed,
    )?;
    Ok(points[0].failure_rate())
}

/// CSV with header `sigma_ant,sm,trials,failure_rate`.
pub fn failure_csv(points: &[FailurePoint]) -> String {
    let mut out = String::from("sigma_ant,sm,trials,failure_rate\n");
    for p in points {
        writeln!(
            out,
            "{},{},{},{}",
            p.sigma_ant,
            p.safety_margin,
            p.trials,
            p.failure_rate()
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::quantize;

    fn plane(bits: Vec<u8>, signs: Vec<i8>) -> SignedBitplane {
        SignedBitplane {
            index: 1,
            bits,
            signs,
        }
    }

    #[test]
    fn psum_examples() {
        assert_eq!(psum_row(&[1, -1], &plane(vec![1, 1], vec![1, 1])).unwrap(), 0);
        assert_eq!(psum_row(&[1, -1, 1], &plane(vec![0; 3], vec![1, -1, 1])).unwrap(), 0);
        let signs = vec![1, -1, -1, 1];
        assert_eq!(psum_row(&signs, &plane(vec![1; 4], signs.clone())).unwrap(), 4);
        assert!(matches!(
            psum_row(&[1], &plane(vec![1, 1], vec![1, 1])),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn comparator_examples() {
        assert_eq!(comparator(3.0), 1);
        assert_eq!(comparator(0.0), -1);
        assert_eq!(comparator(-0.0), -1);
        assert_eq!(comparator(-0.2), -1);
    }

    #[test]
    fn f0_hand_example() {
        let cfg = CrossbarConfig::new(1, 2, vec![1, 1]).unwrap();
        let bp = BitplaneMatrix::from_codes(vec![1, 1], vec![3, 1], 2, 1.0).unwrap();
        assert_eq!(f0_apply(&cfg, &bp, None).unwrap(), vec![3]);
        assert_eq!(exact_oracle(&cfg, &bp).unwrap(), vec![4]);
    }

    #[test]
    fn f0_zero_input() {
        let cfg = CrossbarConfig::new(2, 3, vec![1, -1, 1, -1, -1, 1]).unwrap();
        for bits in 1..=8 {
            let bp = quantize(&[0.0; 3], bits, 1.0).unwrap();
            let y = f0_apply(&cfg, &bp, None).unwrap();
            assert_eq!(y, vec![-(full_scale(bits) as i64); 2]);
            assert_eq!(exact_oracle(&cfg, &bp).unwrap(), vec![0, 0]);
        }
    }

    #[test]
    fn zero_sigma_matches_noiseless() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = CrossbarConfig::random(8, 8, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bp = quantize(&x, 6, 1.0).unwrap();
        let nm = NoiseModel::new(0.0, 0.0, 99).unwrap();
        assert_eq!(
            f0_apply(&cfg, &bp, Some(&nm)).unwrap(),
            f0_apply(&cfg, &bp, None).unwrap()
        );
    }

    #[test]
    fn dimension_mismatch() {
        let cfg = CrossbarConfig::new(1, 2, vec![1, 1]).unwrap();
        let bp = quantize(&[0.1, 0.2, 0.3], 3, 1.0).unwrap();
        assert!(matches!(f0_apply(&cfg, &bp, None), Err(Error::Size(_))));
        assert!(matches!(exact_oracle(&cfg, &bp), Err(Error::Size(_))));
        assert!(matches!(CrossbarConfig::new(1, 2, vec![1, 0]), Err(Error::Domain(_))));
        assert!(matches!(CrossbarConfig::new(1, 2, vec![1]), Err(Error::Size(_))));
    }

    #[test]
    fn single_column_full_scale_is_exact() {
        for bits in 1..=8 {
            let fs = full_scale(bits);
            for sign in [1i8, -1] {
                for w in [1i8, -1] {
                    let cfg = CrossbarConfig::new(1, 1, vec![w]).unwrap();
                    let bp = BitplaneMatrix::from_codes(vec![sign], vec![fs], bits, 1.0).unwrap();
                    assert_eq!(f0_apply(&cfg, &bp, None).unwrap(), exact_oracle(&cfg, &bp).unwrap());
                }
            }
        }
    }

    #[test]
    fn noisy_outputs_stay_odd_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200u64 {
            let bits = rng.random_range(1..=8);
            let cols = rng.random_range(1..=16);
            let cfg = CrossbarConfig::random(4, cols, &mut rng);
            let x: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
            let bp = quantize(&x, bits, 1.0).unwrap();
            let nm = NoiseModel::new(0.3, 0.0, trial).unwrap();
            for y in f0_apply(&cfg, &bp, Some(&nm)).unwrap() {
                assert_eq!(y.rem_euclid(2), 1);
                assert!(y.abs() <= full_scale(bits) as i64);
            }
        }
    }

    #[test]
    fn failure_examples() {
        let shape = ArrayShape {
            rows: 8,
            cols: 16,
            num_bits: 4,
        };
        let quiet = NoiseModel::new(0.0, 0.0, 1).unwrap();
        assert_eq!(failure_stats(&shape, &quiet, 200).unwrap(), 0.0);
        let wide = NoiseModel::new(0.5, 1.01, 1).unwrap();
        assert_eq!(failure_stats(&shape, &wide, 200).unwrap(), 0.0);
        let noisy = NoiseModel::new(0.5, 0.0, 1).unwrap();
        let a = failure_stats(&shape, &noisy, 200).unwrap();
        let b = failure_stats(&shape, &noisy, 200).unwrap();
        assert!(a > 0.0);
        assert_eq!(a, b);
        assert!(matches!(failure_stats(&shape, &noisy, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn failure_csv_layout() {
        let shape = ArrayShape {
            rows: 2,
            cols: 4,
            num_bits: 2,
        };
        let pts = failure_grid(&shape, &[0.1, 0.0], &[0.0], 10, 3).unwrap();
        assert_eq!(pts[0].sigma_ant, 0.0);
        let csv = failure_csv(&pts);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("sigma_ant,sm,trials,failure_rate"));
        assert_eq!(lines.next(), Some("0,0,10,0"));
    }
}
