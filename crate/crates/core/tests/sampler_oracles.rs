//! End-to-end sampler runs checked against independent references.

use gestalt_core::rng::{fill_standard_normal, seeded, standard_normal};
use gestalt_core::sampler::{
    dropout_covariance, moments, run_sampler, Design, DropoutMode, Ensemble, SamplerConfig, Prior,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

mod common;
use common::{quadrature_moments, two_d_problem};

#[test]
fn quadrature_reference_is_resolved() {
    // a Gaussian likelihood-free case: the grid must return the prior itself
    let prior = Prior::new(DVector::from_vec(vec![0.5, -1.0]), DVector::from_vec(vec![1.0, 0.5])).unwrap();
    let (m, c) = quadrature_moments(&Design::empty(2), &prior);
    assert!((m - &prior.mean).amax() < 1e-9);
    assert!((c - DMatrix::from_diagonal(&prior.variance)).amax() < 1e-9);
}

#[test]
fn two_dimensional_posterior_matches_quadrature() {
    let design = two_d_problem();
    let prior = Prior::isotropic(DVector::zeros(2), 1.0).unwrap();
    let (qm, qc) = quadrature_moments(&design, &prior);
    let cfg = SamplerConfig {
        ensemble_size: 256,
        dropout_rate: 0.0,
        step_size: 0.05,
        tolerance: 1e-5,
        max_steps: 2000,
        seed: 11,
        ..Default::default()
    };
    let run = run_sampler(&design, &prior, &cfg).unwrap();
    let m = moments(&run.ensemble).unwrap();
    let mean_err = (&m.mean - &qm).norm() / qm.norm();
    let cov_err = (&m.covariance - &qc).norm() / qc.norm();
    assert!(run.converged);
    assert!(mean_err < 0.05, "mean error {mean_err}");
    assert!(cov_err < 0.10, "covariance error {cov_err}");
}

#[test]
fn no_data_returns_to_prior() {
    let prior = Prior::new(DVector::from_vec(vec![1.0, -2.0, 0.5]), DVector::from_vec(vec![1.0, 0.5, 2.0])).unwrap();
    let cfg = SamplerConfig {
        ensemble_size: 256,
        dropout_rate: 0.0,
        step_size: 0.01,
        tolerance: 1e-6,
        max_steps: 5000,
        seed: 4,
        ..Default::default()
    };
    let run = run_sampler(&Design::empty(3), &prior, &cfg).unwrap();
    let m = moments(&run.ensemble).unwrap();
    let p = DMatrix::from_diagonal(&prior.variance);
    assert!((&m.mean - &prior.mean).norm() < 1e-2 * prior.mean.norm() + 1e-2);
    assert!((&m.covariance - &p).norm() / p.norm() < 0.05);
}

#[test]
fn no_data_bias_shrinks_with_step_size() {
    let prior = Prior::isotropic(DVector::zeros(2), 1.0).unwrap();
    let bias = |dt: f64| {
        let cfg = SamplerConfig {
            ensemble_size: 256,
            dropout_rate: 0.0,
            step_size: dt,
            tolerance: 1e-9,
            max_steps: 20_000,
            seed: 5,
            ..Default::default()
        };
        let run = run_sampler(&Design::empty(2), &prior, &cfg).unwrap();
        let c = moments(&run.ensemble).unwrap().covariance;
        (c - DMatrix::identity(2, 2)).norm()
    };
    let (b1, b2) = (bias(0.1), bias(0.05));
    assert!(b2 < 0.65 * b1, "bias {b1} -> {b2}");
}

#[test]
fn reflected_data_gives_centered_first_coordinate() {
    // each point (ψ₁, ψ₂, t) is paired with (−ψ₁, ψ₂, t): with a centered
    // prior the posterior is invariant under θ₁ ↦ −θ₁
    let mut rng = seeded(8);
    let n = 12;
    let mut psi = DMatrix::zeros(2, 2 * n);
    let mut t = DVector::zeros(2 * n);
    for i in 0..n {
        let v = [standard_normal(&mut rng), standard_normal(&mut rng)];
        let label = (rng.random::<f64>() < 0.5) as u8 as f64;
        psi[(0, 2 * i)] = v[0];
        psi[(1, 2 * i)] = v[1];
        psi[(0, 2 * i + 1)] = -v[0];
        psi[(1, 2 * i + 1)] = v[1];
        t[2 * i] = label;
        t[2 * i + 1] = label;
    }
    let design = Design::new(psi, t).unwrap();
    let prior = Prior::isotropic(DVector::zeros(2), 1.0).unwrap();
    let cfg = SamplerConfig { ensemble_size: 128, seed: 6, ..Default::default() };
    let run = run_sampler(&design, &prior, &cfg).unwrap();
    assert!(run.converged);
    let m = moments(&run.ensemble).unwrap();
    let se = (m.covariance[(0, 0)] / 128.0).sqrt();
    assert!(m.mean[0].abs() < 3.0 * se, "mean {} se {se}", m.mean[0]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dropout_covariance_is_symmetric_psd(seed in any::<u64>(), d in 1usize..8, j in 2usize..12, rho in 0.0f64..0.9) {
        let mut data = vec![0.0; d * j];
        fill_standard_normal(&mut seeded(seed), &mut data);
        let m = moments(&Ensemble::new(DMatrix::from_vec(d, j, data))).unwrap();
        for mode in [DropoutMode::Expected, DropoutMode::Random] {
            let p = dropout_covariance(&m, rho, mode, &mut seeded(seed ^ 1)).covariance;
            prop_assert_eq!(&p, &p.transpose());
            prop_assert!(p.clone().symmetric_eigenvalues().min() >= -1e-10);
        }
    }

    #[test]
    fn deviations_sum_to_zero(seed in any::<u64>(), d in 1usize..6, j in 2usize..10) {
        let mut data = vec![0.0; d * j];
        fill_standard_normal(&mut seeded(seed), &mut data);
        let m = moments(&Ensemble::new(DMatrix::from_vec(d, j, data))).unwrap();
        let sum = m.deviations.column_sum();
        prop_assert!(sum.amax() <= 1e-10 * m.deviations.norm().max(1.0));
        prop_assert!(m.covariance.clone().symmetric_eigenvalues().min() >= -1e-10);
    }

    #[test]
    fn sampler_particles_stay_finite(seed in any::<u64>(), scale in 0.1f64..50.0, dt in 0.05f64..5.0) {
        let mut data = vec![0.0; 3 * 15];
        fill_standard_normal(&mut seeded(seed), &mut data);
        let psi = DMatrix::from_vec(3, 15, data) * scale;
        let t = DVector::from_fn(15, |i, _| (i % 2) as f64);
        let design = Design::new(psi, t).unwrap();
        let prior = Prior::isotropic(DVector::zeros(3), 1.0).unwrap();
        let cfg = SamplerConfig { ensemble_size: 8, step_size: dt, max_steps: 30, seed, ..Default::default() };
        let run = run_sampler(&design, &prior, &cfg).unwrap();
        prop_assert!(run.ensemble.is_finite());
    }
}
