use crate::activation::{soft_threshold, soft_threshold_grad, ThresholdVector};
use crate::crossbar::{exact_oracle, f0_apply, CrossbarConfig, NoiseModel};
use crate::earlyterm::{f0_with_early_term, threshold_to_units, TerminationTrace};
use crate::error::{Error, Result};
use crate::fixedpoint::{code_step, quantize};
use crate::hadamard::{build_hadamard, bwht_plan, fwht_in_place, BwhtPlan};
use crate::surrogate::{f0_surrogate, SurrogateConfig, SurrogateOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerMode {
    /// Zero-pad the input up to `target_dim` before transforming.
    Expand,
    /// Transform the input as is and keep the first `target_dim` outputs.
    Project,
}

impl LayerMode {
    pub fn name(&self) -> &'static str {
        match self {
            LayerMode::Expand => "expand",
            LayerMode::Project => "project",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "expand" => Ok(LayerMode::Expand),
            "project" => Ok(LayerMode::Project),
            other => Err(Error::Parse(format!("unknown layer mode '{other}'"))),
        }
    }
}

/// How a layer evaluates its two transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExecMode {
    /// Exact real-valued transforms.
    Float,
    /// Quantized input, exact integer forward product, exact inverse.
    BitplaneExact,
    /// Quantized bit-serial transforms with 1-bit comparators, both directions.
    Bitplane1Bit,
    /// Smooth surrogate of [`ExecMode::Bitplane1Bit`], differentiable.
    Surrogate { tau: f64 },
}

/// Transform → soft threshold → inverse transform, with channel
/// expansion or projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BwhtLayer {
    pub plan: BwhtPlan,
    pub thresholds: ThresholdVector,
    pub mode: LayerMode,
    pub input_dim: usize,
    pub target_dim: usize,
    pub num_bits: u32,
    pub x_max: f64,
    block: CrossbarConfig,
}

/// Per-block intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
struct BlockCache {
    pre_activation: Vec<f64>,
    forward: Option<SurrogateOutput>,
    inverse: Option<SurrogateOutput>,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    exec: ExecMode,
    blocks: Vec<BlockCache>,
}

impl BwhtLayer {
    pub fn new(
        mode: LayerMode,
        input_dim: usize,
        target_dim: usize,
        block_size: usize,
        num_bits: u32,
        x_max: f64,
        t_max: f64,
    ) -> Result<Self> {
        if input_dim == 0 || target_dim == 0 {
            return Err(Error::domain("layer dimensions must be positive"));
        }
        let plan_dim = match mode {
            LayerMode::Expand => {
                if target_dim < input_dim {
                    return Err(Error::size(format!(
                        "expand layer target {target_dim} is smaller than input {input_dim}"
                    )));
                }
                target_dim
            }
            LayerMode::Project => input_dim,
        };
        let plan = bwht_plan(plan_dim, block_size)?;
        if mode == LayerMode::Project && target_dim > plan.padded_len() {
            return Err(Error::size(format!(
                "project layer target {target_dim} exceeds transformed size {}",
                plan.padded_len()
            )));
        }
        // Validate the codec once here so the hot paths can unwrap.
        quantize(&[0.0], num_bits, x_max)?;
        let thresholds = ThresholdVector::zeros(plan.padded_len(), t_max)?;
        let block = CrossbarConfig::from_matrix(&build_hadamard(block_size.trailing_zeros())?);
        Ok(Self {
            plan,
            thresholds,
            mode,
            input_dim,
            target_dim,
            num_bits,
            x_max,
            block,
        })
    }

    pub fn with_thresholds(mut self, thresholds: ThresholdVector) -> Result<Self> {
        if thresholds.len() != self.plan.padded_len() {
            return Err(Error::size(format!(
                "{} thresholds for {} channels",
                thresholds.len(),
                self.plan.padded_len()
            )));
        }
        self.thresholds = thresholds;
        Ok(self)
    }

    pub fn block_size(&self) -> usize {
        self.plan.block_size
    }

    /// Number of transformed channels.
    pub fn channels(&self) -> usize {
        self.plan.padded_len()
    }

    pub fn output_dim(&self) -> usize {
        self.target_dim
    }

    /// Real value of one output-code unit of the 1-bit transform.
    fn code_scale(&self) -> f64 {
        code_step(self.num_bits, self.x_max)
    }

    fn padded_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::size(format!(
                "layer input has {} values, expected {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut v = x.to_vec();
        v.resize(self.plan.padded_len(), 0.0);
        Ok(v)
    }

    fn one_bit(&self, v: &[f64], noise: Option<&NoiseModel>) -> Result<Vec<f64>> {
        let bp = quantize(v, self.num_bits, self.x_max)?;
        let s = self.code_scale();
        Ok(f0_apply(&self.block, &bp, noise)?
            .into_iter()
            .map(|y| y as f64 * s)
            .collect())
    }

    fn surrogate(&self, v: &[f64], tau: f64) -> Result<SurrogateOutput> {
        let cfg = SurrogateConfig::new(tau, self.num_bits, self.x_max)?;
        let mut out = f0_surrogate(&cfg, v, &self.block)?;
        let s = self.code_scale();
        out.values.iter_mut().for_each(|y| *y *= s);
        out.jacobian.iter_mut().for_each(|y| *y *= s);
        Ok(out)
    }

    fn run(&self, x: &[f64], exec: ExecMode, noise: Option<&NoiseModel>) -> Result<(Vec<f64>, LayerCache)> {
        let padded = self.padded_input(x)?;
        let m = self.plan.block_size;
        let t = self.thresholds.values();
        let mut out = Vec::with_capacity(padded.len());
        let mut blocks = Vec::with_capacity(self.plan.num_blocks);
        for (k, xb) in padded.chunks_exact(m).enumerate() {
            let block_noise = noise.map(|n| n.reseeded(2 * k as u64));
            let (pre, fwd) = match exec {
                ExecMode::Float => {
                    let mut c = xb.to_vec();
                    fwht_in_place(&mut c);
                    (c, None)
                }
                ExecMode::BitplaneExact => {
                    let bp = quantize(xb, self.num_bits, self.x_max)?;
                    let s = self.code_scale();
                    let c = exact_oracle(&self.block, &bp)?
                        .into_iter()
                        .map(|y| y as f64 * s)
                        .collect();
                    (c, None)
                }
                ExecMode::Bitplane1Bit => (self.one_bit(xb, block_noise.as_ref())?, None),
                ExecMode::Surrogate { tau } => {
                    let o = self.surrogate(xb, tau)?;
                    (o.values.clone(), Some(o))
                }
            };
            let tb = &t[k * m..(k + 1) * m];
            let act: Vec<f64> = pre.iter().zip(tb).map(|(&c, &t)| soft_threshold(c, t)).collect();
            let (u, inv) = match exec {
                ExecMode::Float | ExecMode::BitplaneExact => {
                    let mut u = act;
                    fwht_in_place(&mut u);
                    let scale = 1.0 / m as f64;
                    u.iter_mut().for_each(|v| *v *= scale);
                    (u, None)
                }
                ExecMode::Bitplane1Bit => {
                    let inv_noise = noise.map(|n| n.reseeded(2 * k as u64 + 1));
                    (self.one_bit(&act, inv_noise.as_ref())?, None)
                }
                ExecMode::Surrogate { tau } => {
                    let o = self.surrogate(&act, tau)?;
                    (o.values.clone(), Some(o))
                }
            };
            out.extend(u);
            blocks.push(BlockCache {
                pre_activation: pre,
                forward: fwd,
                inverse: inv,
            });
        }
        out.truncate(self.target_dim);
        Ok((out, LayerCache { exec, blocks }))
    }

    pub fn forward(&self, x: &[f64], exec: ExecMode) -> Result<Vec<f64>> {
        self.run(x, exec, None).map(|(y, _)| y)
    }

    /// 1-bit execution with PSUM noise. Each block's forward and inverse
    /// crossbar passes draw from their own derived noise streams.
    pub fn forward_noisy(&self, x: &[f64], noise: &NoiseModel) -> Result<Vec<f64>> {
        self.run(x, ExecMode::Bitplane1Bit, Some(noise)).map(|(y, _)| y)
    }

    /// Forward pass that keeps what [`Self::backward`] needs. Only the float
    /// and surrogate paths are differentiable.
    pub fn forward_cached(&self, x: &[f64], exec: ExecMode) -> Result<(Vec<f64>, LayerCache)> {
        match exec {
            ExecMode::Float | ExecMode::Surrogate { .. } => self.run(x, exec, None),
            _ => Err(Error::domain("only float and surrogate execution are differentiable")),
        }
    }

    /// Returns `(∂L/∂x, ∂L/∂T)` given `∂L/∂y`.
    pub fn backward(&self, cache: &LayerCache, grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if grad_out.len() != self.target_dim {
            return Err(Error::size(format!(
                "output gradient has {} values, expected {}",
                grad_out.len(),
                self.target_dim
            )));
        }
        let m = self.plan.block_size;
        let mut g_u = grad_out.to_vec();
        g_u.resize(self.plan.padded_len(), 0.0);
        let t = self.thresholds.values();
        let mut g_x = Vec::with_capacity(self.plan.padded_len());
        let mut g_t = Vec::with_capacity(self.plan.padded_len());
        for (k, (gb, bc)) in g_u.chunks_exact(m).zip(&cache.blocks).enumerate() {
            let g_act = match (&cache.exec, &bc.inverse) {
                (ExecMode::Surrogate { .. }, Some(inv)) => inv.vjp(gb),
                _ => {
                    let mut v = gb.to_vec();
                    fwht_in_place(&mut v);
                    let scale = 1.0 / m as f64;
                    v.iter_mut().for_each(|g| *g *= scale);
                    v
                }
            };
            let mut g_pre = Vec::with_capacity(m);
            for (j, &ga) in g_act.iter().enumerate() {
                let (dx, dt) = soft_threshold_grad(bc.pre_activation[j], t[k * m + j]);
                g_pre.push(ga * dx);
                g_t.push(ga * dt);
            }
            let g_in = match (&cache.exec, &bc.forward) {
                (ExecMode::Surrogate { .. }, Some(fwd)) => fwd.vjp(&g_pre),
                _ => {
                    fwht_in_place(&mut g_pre);
                    g_pre
                }
            };
            g_x.extend(g_in);
        }
        g_x.truncate(self.input_dim);
        Ok((g_x, g_t))
    }

    /// Noiseless early-termination trace of the forward transform, one
    /// trace per block, using this layer's thresholds in output-code units.
    pub fn early_termination(&self, x: &[f64]) -> Result<Vec<TerminationTrace>> {
        let padded = self.padded_input(x)?;
        let m = self.plan.block_size;
        let units: Vec<u64> = self
            .thresholds
            .values()
            .iter()
            .map(|&t| threshold_to_units(t, self.num_bits, self.x_max))
            .collect();
        padded
            .chunks_exact(m)
            .zip(units.chunks_exact(m))
            .map(|(xb, tb)| {
                let bp = quantize(xb, self.num_bits, self.x_max)?;
                f0_with_early_term(&self.block, &bp, tb, None).map(|(_, trace)| trace)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layer(mode: LayerMode, input: usize, target: usize) -> BwhtLayer {
        BwhtLayer::new(mode, input, target, 8, 4, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_threshold_float_is_identity() {
        let l = layer(LayerMode::Expand, 11, 13);
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.1 - 0.4).collect();
        let y = l.forward(&x, ExecMode::Float).unwrap();
        assert_eq!(y.len(), 13);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(y[11..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn huge_threshold_zeroes_output() {
        let l = layer(LayerMode::Project, 16, 5);
        let l = l.clone().with_thresholds(ThresholdVector::new(vec![1e6; 16], 1e6).unwrap()).unwrap();
        let y = l.forward(&[0.3; 16], ExecMode::Float).unwrap();
        assert_eq!(y, vec![0.0; 5]);
    }

    #[test]
    fn chain_shape() {
        let up = layer(LayerMode::Expand, 10, 24);
        let down = layer(LayerMode::Project, 24, 10);
        let x = vec![0.25; 10];
        for exec in [ExecMode::Float, ExecMode::BitplaneExact, ExecMode::Bitplane1Bit, ExecMode::Surrogate { tau: 4.0 }] {
            let y = down.forward(&up.forward(&x, exec).unwrap(), exec).unwrap();
            assert_eq!(y.len(), 10);
        }
    }

    #[test]
    fn invalid_shapes() {
        assert!(BwhtLayer::new(LayerMode::Expand, 10, 8, 8, 4, 1.0, 1.0).is_err());
        assert!(BwhtLayer::new(LayerMode::Project, 10, 17, 8, 4, 1.0, 1.0).is_err());
        assert!(BwhtLayer::new(LayerMode::Project, 10, 16, 8, 4, 1.0, 1.0).is_ok());
        let l = layer(LayerMode::Expand, 4, 8);
        assert!(matches!(l.forward(&[0.0; 5], ExecMode::Float), Err(Error::Size(_))));
    }

    fn loss_of(l: &BwhtLayer, x: &[f64], w: &[f64], exec: ExecMode) -> f64 {
        l.forward(x, exec).unwrap().iter().zip(w).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn float_backward_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t: Vec<f64> = (0..16).map(|_| rng.random_range(-0.5..0.5)).collect();
        let l = layer(LayerMode::Project, 12, 9)
            .with_thresholds(ThresholdVector::new(t, 1.0).unwrap())
            .unwrap();
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, cache) = l.forward_cached(&x, ExecMode::Float).unwrap();
        let (gx, gt) = l.backward(&cache, &w).unwrap();
        let h = 1e-6;
        for j in 0..12 {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fd = (loss_of(&l, &xp, &w, ExecMode::Float) - loss_of(&l, &xm, &w, ExecMode::Float)) / (2.0 * h);
            assert!((fd - gx[j]).abs() < 1e-6, "x{j}: {fd} vs {}", gx[j]);
        }
        for k in 0..16 {
            let bump = |d: f64| {
                let mut tv = l.thresholds.values().to_vec();
                tv[k] += d;
                let l2 = l.clone().with_thresholds(ThresholdVector::new(tv, 1.0).unwrap()).unwrap();
                loss_of(&l2, &x, &w, ExecMode::Float)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            assert!((fd - gt[k]).abs() < 1e-6, "T{k}: {fd} vs {}", gt[k]);
        }
    }

    #[test]
    fn surrogate_backward_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t: Vec<f64> = (0..8).map(|_| rng.random_range(-0.3..0.3)).collect();
        let l = BwhtLayer::new(LayerMode::Expand, 6, 8, 8, 3, 1.0, 1.0)
            .unwrap()
            .with_thresholds(ThresholdVector::new(t, 1.0).unwrap())
            .unwrap();
        let exec = ExecMode::Surrogate { tau: 2.0 };
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..0.9) * if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, cache) = l.forward_cached(&x, exec).unwrap();
        let (gx, _) = l.backward(&cache, &w).unwrap();
        let h = 1e-6;
        for j in 0..6 {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fd = (loss_of(&l, &xp, &w, exec) - loss_of(&l, &xm, &w, exec)) / (2.0 * h);
            assert!((fd - gx[j]).abs() <= 1e-4 * fd.abs().max(1e-3), "x{j}: {fd} vs {}", gx[j]);
        }
    }

    #[test]
    fn early_termination_matches_one_bit_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l = BwhtLayer::new(LayerMode::Expand, 16, 16, 16, 4, 1.0, 1.0)
            .unwrap()
            .with_thresholds(ThresholdVector::new(t.clone(), 1.0).unwrap())
            .unwrap();
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let traces = l.early_termination(&x).unwrap();
        let bp = quantize(&x, 4, 1.0).unwrap();
        let full = f0_apply(&l.block, &bp, None).unwrap();
        for (i, row) in traces[0].rows.iter().enumerate() {
            if row.terminated_early {
                assert_eq!(soft_threshold(full[i] as f64 * l.code_scale(), t[i]), 0.0);
            }
        }
    }
}
