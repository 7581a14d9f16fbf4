//! GP predictions against a dense nalgebra solve of the same equations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use rte::gp::{GaussianProcess, GpConfig, GpInput, KernelConfig, Outcome, OutcomeModel};

const NOISE: f64 = 0.01;

fn prior(x: &GpInput) -> f64 {
    (2.0 * x[0]).sin() + 0.5 * x[1] * x[1]
}

fn dense_predict(kernel: &KernelConfig, xs: &[GpInput], ys: &[f64], x: &GpInput) -> (f64, f64) {
    common::dense_gp_predict(kernel, NOISE, prior, xs, ys, x)
}

fn random_input(rng: &mut ChaCha8Rng) -> GpInput {
    [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
}

#[test]
fn matches_dense_solve_on_random_datasets() {
    let kernel = KernelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = 1 + (case * 199) / 99;
        let xs: Vec<GpInput> = (0..n).map(|_| random_input(&mut rng)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| prior(x) + 0.3 * x[0] * x[1] + rng.random_range(-0.1..0.1))
            .collect();
        let mut gp = GaussianProcess::new(kernel, NOISE, prior).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            gp.update(*x, *y).unwrap();
        }
        for _ in 0..5 {
            let q = random_input(&mut rng);
            let (m, v) = gp.predict(&q);
            let (om, ov) = dense_predict(&kernel, &xs, &ys, &q);
            worst = worst.max((m - om).abs()).max((v - ov.max(0.0)).abs());
            assert!((m - om).abs() < 1e-8, "case {case} (n = {n}): mean {m} vs {om}");
            assert!((v - ov.max(0.0)).abs() < 1e-8, "case {case} (n = {n}): var {v} vs {ov}");
            assert!(v <= kernel.sigma_se_sq);
        }
    }
    eprintln!("worst deviation from dense solve: {worst:e}");
}

#[test]
fn empty_model_returns_prior_exactly() {
    let gp = GaussianProcess::new(KernelConfig::default(), NOISE, prior).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let q = random_input(&mut rng);
        assert_eq!(gp.predict(&q), (prior(&q), 0.5));
    }
    let model = OutcomeModel::new(GpConfig::default()).unwrap();
    let p = Outcome::new(12.5, -3.25, 0.5, -0.75);
    assert_eq!(model.predict(&[0.3, -0.2], &p).mean, p);
    assert_eq!(model.predict_mean(&[0.3, -0.2], &p), p);
}

#[test]
fn outcome_model_matches_four_scalar_gps() {
    let cfg = GpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut model = OutcomeModel::new(cfg).unwrap();
    let mut data: Vec<(GpInput, Outcome, Outcome)> = Vec::new();
    for _ in 0..40 {
        let x = random_input(&mut rng);
        let pr = Outcome::new(100.0 * x[0], 100.0 * x[1], x[0].cos(), x[1].sin());
        let ob = Outcome::new(pr.dx * 0.7, pr.dy - 10.0, pr.cos_dt * 0.9, pr.sin_dt + 0.1);
        model.update(x, &pr, &ob).unwrap();
        data.push((x, pr, ob));
    }
    assert_eq!(model.dataset_sizes(), [40; 4]);
    let scales = [100.0, 100.0, 1.0, 1.0];
    let xs: Vec<GpInput> = data.iter().map(|d| d.0).collect();
    for _ in 0..20 {
        let q = random_input(&mut rng);
        let qp = Outcome::new(100.0 * q[0], 100.0 * q[1], q[0].cos(), q[1].sin());
        let pred = model.predict(&q, &qp);
        for d in 0..4 {
            // residual GP in normalized units with a zero prior
            let resid: Vec<f64> = data
                .iter()
                .map(|(_, p, o)| (o.to_array()[d] - p.to_array()[d]) / scales[d])
                .collect();
            let mut gp = GaussianProcess::new(cfg.kernel, cfg.noise_sq, |_: &GpInput| 0.0).unwrap();
            for (x, r) in xs.iter().zip(&resid) {
                gp.update(*x, *r).unwrap();
            }
            let (m, v) = gp.predict(&q);
            let want = qp.to_array()[d] + scales[d] * m;
            assert!((pred.mean.to_array()[d] - want).abs() < 1e-9 * scales[d]);
            assert!((pred.variance[d] - v * scales[d] * scales[d]).abs() < 1e-9 * scales[d] * scales[d]);
        }
    }
}
