use crate::activation::ThresholdVector;
use crate::error::{Error, Result};

/// Lower clamp on `g(T)` keeping `ln g` finite.
pub const G_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerDirection {
    /// `L_acc − λ Σ ln(g^(−3/2) e^(−g/2))`, minimized by `g → 0`.
    AsWritten,
    /// The negated penalty, minimized by `g → 1` (`|T| → T_max`).
    SparsityIntent,
}

impl RegularizerDirection {
    pub fn name(&self) -> &'static str {
        match self {
            RegularizerDirection::AsWritten => "as_written",
            RegularizerDirection::SparsityIntent => "sparsity_intent",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "as_written" => Ok(RegularizerDirection::AsWritten),
            "sparsity_intent" => Ok(RegularizerDirection::SparsityIntent),
            other => Err(Error::Parse(format!("unknown regularizer direction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub t_max: f64,
    pub direction: RegularizerDirection,
}

impl LossConfig {
    pub fn new(lambda: f64, t_max: f64, direction: RegularizerDirection) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::domain(format!("lambda {lambda} must be finite and >= 0")));
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::domain(format!("T_max {t_max} must be positive")));
        }
        Ok(Self {
            lambda,
            t_max,
            direction,
        })
    }

    fn g(&self, t: f64) -> f64 {
        (t / self.t_max).abs().clamp(G_EPS, 1.0)
    }

    /// Penalty contribution of one threshold.
    pub fn penalty(&self, t: f64) -> f64 {
        let v = self.lambda * log_factor(self.g(t));
        match self.direction {
            RegularizerDirection::AsWritten => -v,
            RegularizerDirection::SparsityIntent => v,
        }
    }

    /// `∂ penalty / ∂T`. Below the `g` clamp the slope at `G_EPS` is kept so
    /// small thresholds are still pushed outward.
    pub fn penalty_grad(&self, t: f64) -> f64 {
        let sign = if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        };
        let g = self.g(t);
        // d/dg of ln(g^(-3/2) e^(-g/2))
        let d_log = -1.5 / g - 0.5;
        let d = self.lambda * d_log * sign / self.t_max;
        match self.direction {
            RegularizerDirection::AsWritten => -d,
            RegularizerDirection::SparsityIntent => d,
        }
    }
}

/// `ln(√(1/g³) · exp(−g/2)) = −(3/2) ln g − g/2`.
pub fn log_factor(g: f64) -> f64 {
    -1.5 * g.ln() - 0.5 * g
}

/// Regularized loss, summing the penalty over every threshold.
pub fn loss_mod(acc_loss: f64, thresholds: &[&ThresholdVector], cfg: &LossConfig) -> f64 {
    let penalty: f64 = thresholds
        .iter()
        .flat_map(|tv| tv.values().iter())
        .map(|&t| cfg.penalty(t))
        .sum();
    acc_loss + penalty
}

/// Softmax cross-entropy and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(values: Vec<f64>) -> ThresholdVector {
        ThresholdVector::new(values, 1.0).unwrap()
    }

    #[test]
    fn lambda_zero_is_accuracy_loss() {
        let cfg = LossConfig::new(0.0, 1.0, RegularizerDirection::SparsityIntent).unwrap();
        assert_eq!(loss_mod(1.25, &[&tv(vec![0.3, -0.9])], &cfg), 1.25);
    }

    #[test]
    fn log_factor_at_full_scale() {
        assert_eq!(log_factor(1.0), -0.5);
        let t = tv(vec![1.0]);
        let written = LossConfig::new(2.0, 1.0, RegularizerDirection::AsWritten).unwrap();
        let intent = LossConfig::new(2.0, 1.0, RegularizerDirection::SparsityIntent).unwrap();
        assert!((loss_mod(0.0, &[&t], &written) - 1.0).abs() < 1e-15);
        assert!((loss_mod(0.0, &[&t], &intent) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn intent_penalty_decreases_in_g() {
        let cfg = LossConfig::new(1.0, 1.0, RegularizerDirection::SparsityIntent).unwrap();
        let mut prev = f64::INFINITY;
        for i in 1..=1000 {
            let g = i as f64 / 1000.0;
            let p = cfg.penalty(g);
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn penalty_grad_matches_differences() {
        for dir in [RegularizerDirection::AsWritten, RegularizerDirection::SparsityIntent] {
            let cfg = LossConfig::new(0.7, 2.0, dir).unwrap();
            for t in [-1.5, -0.2, 0.05, 0.9, 1.7] {
                let h = 1e-6;
                let fd = (cfg.penalty(t + h) - cfg.penalty(t - h)) / (2.0 * h);
                let an = cfg.penalty_grad(t);
                assert!((fd - an).abs() <= 1e-5 * an.abs(), "t={t} fd={fd} an={an}");
            }
        }
    }

    #[test]
    fn cross_entropy() {
        let (l, g) = softmax_cross_entropy(&[0.0, 0.0], 1);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g, vec![0.5, -0.5]);
        let (l, _) = softmax_cross_entropy(&[1000.0, -1000.0], 0);
        assert!(l.abs() < 1e-12);
    }
}
