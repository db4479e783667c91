//! Smooth surrogates for the comparator and for bit extraction, and the
//! differentiable stand-in for the 1-bit transform used during training.
//!
//! `sign(x) ≈ tanh(τx)` and bit `b` of a `B`-bit code is approximated by
//! `logistic(−τ · sin(2π · 2^(B−b) · x / x_max))`. Both sharpen as `τ` grows,
//! so training anneals `τ` upward.

use std::f64::consts::PI;

use crate::crossbar::CrossbarConfig;
use crate::error::{Error, Result};
use crate::fixedpoint::{full_scale, MAX_BITS};

/// Geometric annealing `τ(t) = min(τ₀ · growth^⌊t / step_every⌋, τ_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSchedule {
    pub tau_0: f64,
    pub growth: f64,
    /// Training steps between increases.
    pub step_every: u64,
    pub tau_max: f64,
}

impl TauSchedule {
    pub fn new(tau_0: f64, growth: f64, step_every: u64, tau_max: f64) -> Result<Self> {
        if !(tau_0.is_finite() && tau_0 > 0.0) {
            return Err(Error::domain(format!("tau_0 {tau_0} must be positive")));
        }
        if !(growth.is_finite() && growth > 1.0) {
            return Err(Error::domain(format!("tau growth {growth} must exceed 1")));
        }
        if step_every == 0 {
            return Err(Error::domain("tau step interval must be positive"));
        }
        if !(tau_max.is_finite() && tau_max > 0.0) {
            return Err(Error::domain(format!("tau_max {tau_max} must be positive")));
        }
        Ok(Self {
            tau_0,
            growth,
            step_every,
            tau_max,
        })
    }

    /// Defaults: start at 1, double every `step_every` steps, cap at 10⁴.
    pub fn with_step(step_every: u64) -> Result<Self> {
        Self::new(1.0, 2.0, step_every, 1e4)
    }

    pub fn tau_at(&self, step: u64) -> f64 {
        let k = (step / self.step_every) as f64;
        (self.tau_0 * self.growth.powf(k)).min(self.tau_max)
    }
}

/// Surrogate sharpness and the codec it mirrors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub tau: f64,
    /// `b_max`, the codec bit width.
    pub num_bits: u32,
    pub x_max: f64,
}

impl SurrogateConfig {
    pub fn new(tau: f64, num_bits: u32, x_max: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::domain(format!("tau {tau} must be positive")));
        }
        if num_bits == 0 || num_bits > MAX_BITS {
            return Err(Error::domain(format!("bit width {num_bits} out of range")));
        }
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::domain(format!("x_max {x_max} must be positive")));
        }
        Ok(Self { tau, num_bits, x_max })
    }
}

pub fn sign_surrogate(x: f64, tau: f64) -> f64 {
    (tau * x).tanh()
}

pub fn sign_surrogate_grad(x: f64, tau: f64) -> f64 {
    let t = (tau * x).tanh();
    tau * (1.0 - t * t)
}

/// `1 / (1 + e^(−u))` without overflowing for large `|u|`.
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn bit_phase(b: u32, cfg: &SurrogateConfig) -> f64 {
    2.0 * PI * (1u64 << (cfg.num_bits - b)) as f64 / cfg.x_max
}

/// Smooth bit `b` (1 = LSB) of the magnitude `x`, in `(0, 1)`.
pub fn bit_surrogate(x: f64, b: u32, cfg: &SurrogateConfig) -> f64 {
    logistic(-cfg.tau * (bit_phase(b, cfg) * x).sin())
}

/// `∂/∂x` of [`bit_surrogate`].
pub fn bit_surrogate_grad(x: f64, b: u32, cfg: &SurrogateConfig) -> f64 {
    let w = bit_phase(b, cfg);
    let s = logistic(-cfg.tau * (w * x).sin());
    -s * (1.0 - s) * cfg.tau * w * (w * x).cos()
}

/// Surrogate transform output with its Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateOutput {
    pub values: Vec<f64>,
    /// Row-major `rows × cols`, `∂y_i/∂x_j`.
    pub jacobian: Vec<f64>,
    pub cols: usize,
}

impl SurrogateOutput {
    /// `Jᵀ · upstream`.
    pub fn vjp(&self, upstream: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &g) in upstream.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &self.jacobian[i * self.cols..(i + 1) * self.cols];
            for (o, &j) in out.iter_mut().zip(row) {
                *o += g * j;
            }
        }
        out
    }
}

/// Differentiable stand-in for the 1-bit transform.
///
/// Each element contributes `tanh(τx) · bit_b(|x|)` to plane `b`'s product
/// sum, and each product sum passes through `tanh(τ(PSUM − ½))`. The half
/// offsets align the surrogates with the hard path: the magnitude is fed at
/// the centre of its code step under the rounding codec, and a zero PSUM
/// resolves to `−1` in the limit as the comparator does.
pub fn f0_surrogate(cfg: &SurrogateConfig, x: &[f64], matrix: &CrossbarConfig) -> Result<SurrogateOutput> {
    if x.len() != matrix.cols() {
        return Err(Error::size(format!(
            "input has {} elements, crossbar has {} columns",
            x.len(),
            matrix.cols()
        )));
    }
    let n = x.len();
    let bits = cfg.num_bits;
    let fs = full_scale(bits) as f64;
    let levels = (1u64 << bits) as f64;
    // Magnitude → bit-surrogate argument, placing code c at c + 1/2 steps.
    let du_da = fs / levels;
    let offset = 0.5 * cfg.x_max / levels;

    // Per element and plane: signed bit value and its derivative in x.
    let mut p = vec![0.0; n * bits as usize];
    let mut dp = vec![0.0; n * bits as usize];
    for (j, &xj) in x.iter().enumerate() {
        let s = sign_surrogate(xj, cfg.tau);
        let ds = sign_surrogate_grad(xj, cfg.tau);
        let (a, da_dx) = if xj.abs() >= cfg.x_max {
            (cfg.x_max, 0.0)
        } else if xj > 0.0 {
            (xj, 1.0)
        } else if xj < 0.0 {
            (-xj, -1.0)
        } else {
            (0.0, 0.0)
        };
        let u = a * du_da + offset;
        for b in 1..=bits {
            let beta = bit_surrogate(u, b, cfg);
            let dbeta = bit_surrogate_grad(u, b, cfg);
            let k = j * bits as usize + (b - 1) as usize;
            p[k] = s * beta;
            dp[k] = ds * beta + s * dbeta * du_da * da_dx;
        }
    }

    let mut values = vec![0.0; matrix.rows()];
    let mut jacobian = vec![0.0; matrix.rows() * n];
    for i in 0..matrix.rows() {
        let row = matrix.row(i);
        for b in 1..=bits {
            let bi = (b - 1) as usize;
            let psum: f64 = (0..n).map(|j| row[j] as f64 * p[j * bits as usize + bi]).sum();
            let weight = (1u64 << (b - 1)) as f64;
            let o = sign_surrogate(psum - 0.5, cfg.tau);
            values[i] += o * weight;
            let d_o = sign_surrogate_grad(psum - 0.5, cfg.tau) * weight;
            if d_o == 0.0 {
                continue;
            }
            for j in 0..n {
                jacobian[i * n + j] += d_o * row[j] as f64 * dp[j * bits as usize + bi];
            }
        }
    }
    Ok(SurrogateOutput {
        values,
        jacobian,
        cols: n,
    })
}
