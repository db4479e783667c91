use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{BwhtLayer, ExecMode, LayerCache, LayerMode};
use crate::activation::ThresholdVector;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "bwht-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Dense classification head `logits = W h + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub classes: usize,
    pub dim: usize,
    /// Row-major `classes × dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearHead {
    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let w = &self.weights[c * self.dim..(c + 1) * self.dim];
                w.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() + self.bias[c]
            })
            .collect()
    }
}

/// Stack of BWHT layers followed by a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layers: Vec<BwhtLayer>,
    pub head: LinearHead,
}

/// Everything [`Model::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ModelCache {
    layer_caches: Vec<LayerCache>,
    features: Vec<f64>,
}

/// Gradients for every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub thresholds: Vec<Vec<f64>>,
    pub head_weights: Vec<f64>,
    pub head_bias: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros(model: &Model) -> Self {
        Self {
            thresholds: model.layers.iter().map(|l| vec![0.0; l.channels()]).collect(),
            head_weights: vec![0.0; model.head.weights.len()],
            head_bias: vec![0.0; model.head.bias.len()],
        }
    }

    pub(crate) fn accumulate(&mut self, other: &ModelGrads) {
        for (a, b) in self.thresholds.iter_mut().zip(&other.thresholds) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.head_weights.iter_mut().zip(&other.head_weights).for_each(|(x, y)| *x += y);
        self.head_bias.iter_mut().zip(&other.head_bias).for_each(|(x, y)| *x += y);
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.thresholds.iter_mut().flatten().for_each(|g| *g *= s);
        self.head_weights.iter_mut().for_each(|g| *g *= s);
        self.head_bias.iter_mut().for_each(|g| *g *= s);
    }
}

impl Model {
    pub fn new(layers: Vec<BwhtLayer>, classes: usize, seed: u64) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::domain("model needs at least one layer"));
        };
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim {
                return Err(Error::size(format!(
                    "layer output {} feeds layer input {}",
                    pair[0].output_dim(),
                    pair[1].input_dim
                )));
            }
        }
        if classes < 2 {
            return Err(Error::domain("classifier needs at least two classes"));
        }
        let dim = last.output_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = layers;
        // Thresholds start in a narrow band around zero: ±0.1·T_max.
        for l in &mut layers {
            let t_max = l.thresholds.t_max();
            let init = (0..l.channels())
                .map(|_| rng.random_range(-0.1 * t_max..=0.1 * t_max))
                .collect();
            l.thresholds = ThresholdVector::new(init, t_max)?;
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let weights = (0..classes * dim).map(|_| rng.random_range(-bound..bound)).collect();
        Ok(Self {
            layers,
            head: LinearHead {
                classes,
                dim,
                weights,
                bias: vec![0.0; classes],
            },
        })
    }

    /// One expanding BWHT layer over `dim` inputs plus a head.
    #[allow(clippy::too_many_arguments)]
    pub fn single_layer(
        dim: usize,
        classes: usize,
        block_size: usize,
        num_bits: u32,
        x_max: f64,
        t_max: f64,
        seed: u64,
    ) -> Result<Self> {
        let layer = BwhtLayer::new(LayerMode::Expand, dim, dim, block_size, num_bits, x_max, t_max)?;
        Self::new(vec![layer], classes, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn thresholds(&self) -> Vec<&ThresholdVector> {
        self.layers.iter().map(|l| &l.thresholds).collect()
    }

    pub fn features(&self, x: &[f64], exec: ExecMode) -> Result<Vec<f64>> {
        let mut h = x.to_vec();
        for l in &self.layers {
            h = l.forward(&h, exec)?;
        }
        Ok(h)
    }

    pub fn logits(&self, x: &[f64], exec: ExecMode) -> Result<Vec<f64>> {
        Ok(self.head.logits(&self.features(x, exec)?))
    }

    pub fn predict(&self, x: &[f64], exec: ExecMode) -> Result<usize> {
        let z = self.logits(x, exec)?;
        Ok((0..z.len()).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap_or(0))
    }

    pub fn forward_cached(&self, x: &[f64], exec: ExecMode) -> Result<(Vec<f64>, ModelCache)> {
        let mut h = x.to_vec();
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (out, cache) = l.forward_cached(&h, exec)?;
            layer_caches.push(cache);
            h = out;
        }
        let logits = self.head.logits(&h);
        Ok((
            logits,
            ModelCache {
                layer_caches,
                features: h,
            },
        ))
    }

    /// Backpropagates `∂L/∂logits` through the head and every layer.
    pub fn backward(&self, cache: &ModelCache, grad_logits: &[f64]) -> Result<ModelGrads> {
        let dim = self.head.dim;
        let mut grads = ModelGrads::zeros(self);
        let mut g_h = vec![0.0; dim];
        for (c, &g) in grad_logits.iter().enumerate() {
            grads.head_bias[c] = g;
            let w = &self.head.weights[c * dim..(c + 1) * dim];
            let gw = &mut grads.head_weights[c * dim..(c + 1) * dim];
            for (j, gh) in g_h.iter_mut().enumerate() {
                gw[j] = g * cache.features[j];
                *gh += g * w[j];
            }
        }
        for (k, l) in self.layers.iter().enumerate().rev() {
            let (g_x, g_t) = l.backward(&cache.layer_caches[k], &g_h)?;
            grads.thresholds[k] = g_t;
            g_h = g_x;
        }
        Ok(grads)
    }

    /// Flat, versioned text record of layer shapes, thresholds and head.
    pub fn to_checkpoint(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
        for l in &self.layers {
            writeln!(
                out,
                "layer {} {} {} {} {} {} {}",
                l.mode.name(),
                l.input_dim,
                l.target_dim,
                l.block_size(),
                l.num_bits,
                l.x_max,
                l.thresholds.t_max()
            )
            .unwrap();
            writeln!(out, "thresholds {}", join(l.thresholds.values())).unwrap();
        }
        writeln!(out, "head {} {}", self.head.classes, self.head.dim).unwrap();
        writeln!(out, "weights {}", join(&self.head.weights)).unwrap();
        writeln!(out, "bias {}", join(&self.head.bias)).unwrap();
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let perr = |m: &str| Error::Parse(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| perr("empty checkpoint"))?;
        if header.trim() != format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}") {
            return Err(perr("unsupported checkpoint header"));
        }
        fn nums<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
            if s.trim().is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|v| v.trim().parse().map_err(|_| Error::Parse(format!("bad number '{v}'"))))
                .collect()
        }
        fn field<T: std::str::FromStr>(v: Option<&str>) -> Result<T> {
            v.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse("bad or missing field".into()))
        }
        let mut layers = Vec::new();
        let mut head = None;
        while let Some(line) = lines.next() {
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            match tag {
                "layer" => {
                    let mut f = rest.split_whitespace();
                    let mode = LayerMode::parse(f.next().unwrap_or(""))?;
                    let input_dim: usize = field(f.next())?;
                    let target_dim: usize = field(f.next())?;
                    let block: usize = field(f.next())?;
                    let bits: u32 = field(f.next())?;
                    let x_max: f64 = field(f.next())?;
                    let t_max: f64 = field(f.next())?;
                    let tline = lines.next().ok_or_else(|| perr("missing thresholds"))?;
                    let values = tline
                        .strip_prefix("thresholds ")
                        .ok_or_else(|| perr("expected thresholds line"))?;
                    let layer = BwhtLayer::new(mode, input_dim, target_dim, block, bits, x_max, t_max)?
                        .with_thresholds(ThresholdVector::new(nums(values)?, t_max)?)?;
                    layers.push(layer);
                }
                "head" => {
                    let mut f = rest.split_whitespace();
                    let classes: usize = field(f.next())?;
                    let dim: usize = field(f.next())?;
                    let w = lines
                        .next()
                        .and_then(|l| l.strip_prefix("weights "))
                        .ok_or_else(|| perr("expected weights line"))?;
                    let b = lines
                        .next()
                        .and_then(|l| l.strip_prefix("bias "))
                        .ok_or_else(|| perr("expected bias line"))?;
                    let weights: Vec<f64> = nums(w)?;
                    let bias: Vec<f64> = nums(b)?;
                    if weights.len() != classes * dim || bias.len() != classes {
                        return Err(Error::size("head parameter count mismatch"));
                    }
                    head = Some(LinearHead {
                        classes,
                        dim,
                        weights,
                        bias,
                    });
                }
                other => return Err(Error::Parse(format!("unknown record '{other}'"))),
            }
        }
        let head = head.ok_or_else(|| perr("missing head"))?;
        match layers.last() {
            Some(l) if l.output_dim() == head.dim => Ok(Self { layers, head }),
            Some(_) => Err(Error::size("head dimension does not match last layer")),
            None => Err(perr("checkpoint has no layers")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::loss::softmax_cross_entropy;

    #[test]
    fn checkpoint_round_trip() {
        let l1 = BwhtLayer::new(LayerMode::Expand, 6, 12, 8, 4, 1.0, 0.5).unwrap();
        let l2 = BwhtLayer::new(LayerMode::Project, 12, 5, 4, 4, 1.0, 0.5).unwrap();
        let m = Model::new(vec![l1, l2], 3, 9).unwrap();
        let text = m.to_checkpoint();
        assert!(text.starts_with("bwht-checkpoint 1\n"));
        let back = Model::from_checkpoint(&text).unwrap();
        assert_eq!(back, m);
        assert!(Model::from_checkpoint("bwht-checkpoint 2\n").is_err());
        assert!(Model::from_checkpoint(&text.replace("head 3 5", "head 3 4")).is_err());
    }

    #[test]
    fn layer_chain_must_match() {
        let l1 = BwhtLayer::new(LayerMode::Expand, 6, 12, 8, 4, 1.0, 0.5).unwrap();
        let l2 = BwhtLayer::new(LayerMode::Project, 10, 5, 4, 4, 1.0, 0.5).unwrap();
        assert!(matches!(Model::new(vec![l1, l2], 3, 1), Err(Error::Size(_))));
        assert!(Model::new(vec![], 3, 1).is_err());
    }

    #[test]
    fn head_gradients_match_differences() {
        let m = Model::single_layer(8, 3, 8, 4, 1.0, 1.0, 5).unwrap();
        let x = vec![0.3, -0.2, 0.5, 0.1, -0.7, 0.0, 0.2, 0.4];
        let (logits, cache) = m.forward_cached(&x, ExecMode::Float).unwrap();
        let (_, gl) = softmax_cross_entropy(&logits, 1);
        let grads = m.backward(&cache, &gl).unwrap();
        let h = 1e-6;
        for k in [0, 7, 13, 23] {
            let eval = |d: f64| {
                let mut m2 = m.clone();
                m2.head.weights[k] += d;
                softmax_cross_entropy(&m2.logits(&x, ExecMode::Float).unwrap(), 1).0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - grads.head_weights[k]).abs() < 1e-7);
        }
    }
}
