//! Soft-thresholding activation with trainable per-channel thresholds.
//!
//! The dead-zone half-width is `|T|`, so a threshold trained to a negative
//! value behaves like its magnitude.

use crate::error::{Error, Result};

/// `S_T(x)`: shrinks `x` toward zero by `|T|`, zeroing `|x| ≤ |T|`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    let t = t.abs();
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(∂S/∂x, ∂S/∂T)`. The dead-zone subgradient `(0, 0)` is used on the
/// boundary `|x| = |T|`.
pub fn soft_threshold_grad(x: f64, t: f64) -> (f64, f64) {
    if x.abs() > t.abs() {
        (1.0, -sign(x) * sign(t))
    } else {
        (0.0, 0.0)
    }
}

/// Per-channel thresholds, kept inside `[−T_max, T_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector {
    values: Vec<f64>,
    t_max: f64,
}

impl ThresholdVector {
    pub fn new(values: Vec<f64>, t_max: f64) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::domain(format!("T_max {t_max} must be positive and finite")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("thresholds must be finite"));
        }
        let mut tv = Self { values, t_max };
        tv.clamp();
        Ok(tv)
    }

    pub fn zeros(len: usize, t_max: f64) -> Result<Self> {
        Self::new(vec![0.0; len], t_max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `g(T) = |T / T_max|`.
    pub fn g(&self, i: usize) -> f64 {
        (self.values[i] / self.t_max).abs()
    }

    pub fn mean_g(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (0..self.len()).map(|i| self.g(i)).sum::<f64>() / self.len() as f64
    }

    /// Fraction of channels with `g(T) > level`.
    pub fn fraction_above(&self, level: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (0..self.len()).filter(|&i| self.g(i) > level).count() as f64 / self.len() as f64
    }

    fn clamp(&mut self) {
        let t_max = self.t_max;
        for v in &mut self.values {
            *v = v.clamp(-t_max, t_max);
        }
    }

    /// Gradient step followed by the clamp.
    pub fn step(&mut self, grad: &[f64], lr: f64) -> Result<()> {
        if grad.len() != self.values.len() {
            return Err(Error::size(format!(
                "{} gradients for {} thresholds",
                grad.len(),
                self.values.len()
            )));
        }
        for (v, g) in self.values.iter_mut().zip(grad) {
            *v -= lr * g;
        }
        self.clamp();
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.values.len() {
            return Err(Error::size(format!(
                "{} inputs for {} thresholds",
                x.len(),
                self.values.len()
            )));
        }
        Ok(x.iter().zip(&self.values).map(|(&x, &t)| soft_threshold(x, t)).collect())
    }
}
