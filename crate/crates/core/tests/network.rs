use bwht_core::activation::ThresholdVector;
use bwht_core::crossbar::CrossbarConfig;
use bwht_core::fixedpoint::code_step;
use bwht_core::network::{
    make_toy_dataset, train, BwhtLayer, ExecMode, LayerMode, LossConfig, Model, RegularizerDirection, TrainConfig,
    TrainPath,
};
use bwht_core::surrogate::{f0_surrogate, SurrogateConfig, TauSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn surrogate_jacobian_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-6;
    for _ in 0..20 {
        let n = rng.random_range(1..=8);
        let bits = rng.random_range(1..=4);
        let cfg = SurrogateConfig::new(10.0, bits, 1.0).unwrap();
        let matrix = CrossbarConfig::random(rng.random_range(1..=4), n, &mut rng);
        // Away from the |x| kinks at 0 and x_max.
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let a = rng.random_range(0.01..0.95);
                if rng.random::<bool>() { a } else { -a }
            })
            .collect();
        let out = f0_surrogate(&cfg, &x, &matrix).unwrap();
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let yp = f0_surrogate(&cfg, &xp, &matrix).unwrap().values;
            let ym = f0_surrogate(&cfg, &xm, &matrix).unwrap().values;
            for i in 0..matrix.rows() {
                let fd = (yp[i] - ym[i]) / (2.0 * h);
                let an = out.jacobian[i * n + j];
                assert!((fd - an).abs() <= 1e-3 * an.abs().max(1e-3), "fd={fd} an={an}");
            }
        }
    }
}

#[test]
fn exact_bitplane_error_within_codec_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bits = 6;
    let x_max = 1.0;
    let q = code_step(bits, x_max);
    for (mode, input, target, block) in [
        (LayerMode::Expand, 12, 16, 8),
        (LayerMode::Expand, 20, 20, 16),
        (LayerMode::Project, 32, 10, 16),
    ] {
        let layer = BwhtLayer::new(mode, input, target, block, bits, x_max, 1.0).unwrap();
        let t: Vec<f64> = (0..layer.channels()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let layer = layer.with_thresholds(ThresholdVector::new(t, 1.0).unwrap()).unwrap();
        let bound = (input as f64).sqrt() * q / 2.0 + 1e-12;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..input).map(|_| rng.random_range(-x_max..x_max)).collect();
            let a = layer.forward(&x, ExecMode::Float).unwrap();
            let b = layer.forward(&x, ExecMode::BitplaneExact).unwrap();
            let diff = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            assert!(diff <= bound, "diff {diff} bound {bound}");
        }
    }
}

fn train_config(lambda: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 4,
        batch_size: 16,
        lr: 0.1,
        lr_threshold: 0.05,
        path: TrainPath::OneBit,
        schedule: TauSchedule::with_step(7).unwrap(),
        loss: LossConfig::new(lambda, 1.0, RegularizerDirection::SparsityIntent).unwrap(),
        seed,
    }
}

#[test]
fn training_is_deterministic() {
    let ds = make_toy_dataset(3, 16, 20, 4).unwrap();
    let run = || {
        let mut m = Model::single_layer(16, 3, 16, 4, 1.0, 1.0, 9).unwrap();
        let r = train(&mut m, &ds, &train_config(0.02, 9)).unwrap();
        (r.to_csv(), m.to_checkpoint())
    };
    assert_eq!(run(), run());
}

#[test]
fn isolated_penalty_descent_raises_g() {
    let cfg = LossConfig::new(0.1, 1.0, RegularizerDirection::SparsityIntent).unwrap();
    let mut tv = ThresholdVector::new(vec![0.05, -0.3, 0.0001, -0.9, 0.6], 1.0).unwrap();
    let mut prev = tv.mean_g();
    for _ in 0..2000 {
        let grad: Vec<f64> = tv.values().iter().map(|&t| cfg.penalty_grad(t)).collect();
        tv.step(&grad, 0.01).unwrap();
        let g = tv.mean_g();
        if prev < 1.0 {
            assert!(g > prev);
        } else {
            assert_eq!(g, 1.0);
        }
        prev = g;
    }
    assert_eq!(prev, 1.0);
}

#[test]
fn expand_then_project_keeps_length() {
    let up = BwhtLayer::new(LayerMode::Expand, 10, 24, 8, 4, 1.0, 1.0).unwrap();
    let down = BwhtLayer::new(LayerMode::Project, 24, 10, 8, 4, 1.0, 1.0).unwrap();
    let m = Model::new(vec![up, down], 2, 1).unwrap();
    let x = vec![0.1; 10];
    for exec in [ExecMode::Float, ExecMode::BitplaneExact, ExecMode::Bitplane1Bit, ExecMode::Surrogate { tau: 4.0 }] {
        assert_eq!(m.features(&x, exec).unwrap().len(), 10);
    }
}
