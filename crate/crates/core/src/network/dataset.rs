use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Minimum training accuracy a least-squares linear probe must reach on a
/// generated toy set.
pub const PROBE_ACCURACY: f64 = 0.95;

const MEAN_RANGE: f64 = 0.5;
const CLUSTER_STD: f64 = 0.12;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub num_classes: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(dim: usize, num_classes: usize, features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::size(format!(
                "{} samples but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::size(format!("every sample must have {dim} features")));
        }
        if labels.iter().any(|&l| l >= num_classes) {
            return Err(Error::domain("label out of range"));
        }
        Ok(Self {
            dim,
            num_classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Gaussian clusters, one per class, with means drawn uniformly from
/// `[−0.5, 0.5]^dim`. Generation fails unless a least-squares linear probe
/// separates the clusters with at least [`PROBE_ACCURACY`].
pub fn make_toy_dataset(num_classes: usize, dim: usize, samples_per_class: usize, seed: u64) -> Result<Dataset> {
    if num_classes < 2 {
        return Err(Error::domain("toy dataset needs at least two classes"));
    }
    if dim < num_classes {
        return Err(Error::domain(format!(
            "dimension {dim} is smaller than the class count {num_classes}"
        )));
    }
    if samples_per_class == 0 {
        return Err(Error::domain("samples_per_class must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..dim).map(|_| rng.random_range(-MEAN_RANGE..MEAN_RANGE)).collect())
        .collect();
    let noise = Normal::new(0.0, CLUSTER_STD).expect("valid std");
    let mut features = Vec::with_capacity(num_classes * samples_per_class);
    let mut labels = Vec::with_capacity(num_classes * samples_per_class);
    for _ in 0..samples_per_class {
        for (c, mean) in means.iter().enumerate() {
            features.push(mean.iter().map(|&m| m + noise.sample(&mut rng)).collect());
            labels.push(c);
        }
    }
    let ds = Dataset::new(dim, num_classes, features, labels)?;
    let acc = linear_probe_accuracy(&ds);
    if acc < PROBE_ACCURACY {
        return Err(Error::domain(format!(
            "generated clusters are not linearly separable (probe accuracy {acc:.3})"
        )));
    }
    Ok(ds)
}

/// Training accuracy of a ridge-regularized least-squares probe onto
/// one-hot targets.
pub fn linear_probe_accuracy(ds: &Dataset) -> f64 {
    let n = ds.len();
    let d = ds.dim + 1;
    let x = DMatrix::from_fn(n, d, |i, j| if j < ds.dim { ds.features[i][j] } else { 1.0 });
    let y = DMatrix::from_fn(n, ds.num_classes, |i, c| if ds.labels[i] == c { 1.0 } else { 0.0 });
    let gram = x.transpose() * &x + DMatrix::identity(d, d) * 1e-8;
    let rhs = x.transpose() * &y;
    let Some(w) = gram.cholesky().map(|c| c.solve(&rhs)) else {
        return 0.0;
    };
    let scores = &x * w;
    let correct = (0..n)
        .filter(|&i| {
            let row = scores.row(i);
            let best = (0..ds.num_classes)
                .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                .expect("at least two classes");
            best == ds.labels[i]
        })
        .count();
    correct as f64 / n as f64
}
