//! Invariants over randomized inputs.

use gestalt_core::corpus::{
    default_lexicon, emit_training_pairs, generate_corpus, parse_constituents, EventConfig, EventModel, ProbeMode, Role,
};
use gestalt_core::experiments::{model_analysis, records_from_csv, records_to_csv, ActivationRecord, Condition, UnitClass};
use gestalt_core::network::{forward, NetworkParams, TrainConfig};
use gestalt_core::rng::{fill_standard_normal, seeded};
use gestalt_core::sampler::{
    ensemble_predictions, homotopy_half_step, moments, prior_half_step, run_sampler, Design, Ensemble, HomotopyForm,
    Prior, SamplerConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut data = vec![0.0; rows * cols];
    fill_standard_normal(&mut seeded(seed), &mut data);
    DMatrix::from_vec(rows, cols, data)
}

fn design(d: usize, n: usize, seed: u64) -> Design {
    let psi = gaussian(d, n, seed);
    let t = DVector::from_fn(n, |i, _| f64::from(psi[(0, i)] > 0.3));
    Design::new(psi, t).unwrap()
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn sentences_parse_back_to_their_frames(seed in any::<u64>()) {
        let lex = default_lexicon();
        let model = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        let corpus = generate_corpus(&lex, &model, seed, 50, ProbeMode::Role).unwrap();
        let k = lex.inventory().len();
        for s in &corpus.sentences {
            let tokens: Vec<_> = s.constituents.iter().map(|c| c.tokens.clone()).collect();
            prop_assert_eq!(parse_constituents(&lex, &tokens).unwrap(), s.frame);
            for pair in emit_training_pairs(&lex, s, ProbeMode::Role) {
                prop_assert_eq!(pair.target.len(), k);
                prop_assert!(pair.probe.iter().any(|&x| x > 0.0));
                prop_assert!(pair.target.iter().all(|&x| x == 0.0 || x == 1.0));
            }
        }
        let again = generate_corpus(&lex, &model, seed, 50, ProbeMode::Role).unwrap();
        prop_assert_eq!(again.sentences, corpus.sentences);
    }

    #[test]
    fn forward_is_pure_and_bounded(seed in any::<u64>(), words in 1usize..6) {
        let lex = default_lexicon();
        let shape = TrainConfig { gestalt_width: 8, hidden_width: 6, ..TrainConfig::default() }
            .shape(lex.len(), lex.inventory().len());
        let params = NetworkParams::init(shape, &mut seeded(seed));
        let prefix: Vec<Vec<f64>> = (0..words)
            .map(|w| (0..lex.len()).map(|i| f64::from((i * 31 + w * 7 + seed as usize % 13) % lex.len() == 0)).collect())
            .collect();
        let probe = gestalt_core::corpus::role_probe(&lex, Role::Agent);
        let (a, _) = forward(&params, &prefix, &probe).unwrap();
        let (b, _) = forward(&params, &prefix, &probe).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|&y| y > 0.0 && y < 1.0));
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn zero_covariance_homotopy_step_is_identity(seed in any::<u64>(), d in 1usize..6, j in 2usize..10, dt in 0.01f64..5.0) {
        let e = Ensemble::new(gaussian(d, j, seed));
        let m = moments(&e).unwrap();
        let next = homotopy_half_step(&e, &design(d, 9, seed ^ 1), &m, &DMatrix::zeros(d, d), dt, HomotopyForm::Consistent).unwrap();
        prop_assert_eq!(next, e);
    }

    #[test]
    fn collapsed_ensemble_at_prior_mean_is_fixed(seed in any::<u64>(), d in 1usize..6, j in 2usize..10, dt in 0.01f64..2.0) {
        let mean = gaussian(d, 1, seed).column(0).into_owned();
        let prior = Prior::new(mean.clone(), DVector::from_element(d, 0.7)).unwrap();
        let e = Ensemble::new(DMatrix::from_fn(d, j, |i, _| mean[i]));
        let m = moments(&e).unwrap();
        let next = prior_half_step(&e, &m, &m.covariance, &prior, dt).unwrap();
        // the ensemble mean of identical columns is exact only up to rounding
        let drift = (&next.particles - &e.particles).amax();
        prop_assert!(drift <= 1e-14 * (1.0 + mean.amax()), "drift {drift}");
    }

    #[test]
    fn ensemble_predictions_are_probabilities(seed in any::<u64>(), d in 1usize..6, j in 2usize..10, scale in 0.1f64..30.0) {
        let e = Ensemble::new(gaussian(d, j, seed) * scale);
        let (mean, sd) = ensemble_predictions(&design(d, 7, seed ^ 2), &e);
        prop_assert!(mean.iter().all(|&p| (0.0..=1.0).contains(&p)));
        prop_assert!(sd.iter().all(|&s| s >= 0.0));
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn sampler_runs_are_reproducible(seed in any::<u64>(), d in 2usize..5, rho in 0.0f64..0.6) {
        let design = design(d, 20, seed);
        let prior = Prior::isotropic(DVector::zeros(d), 1.0).unwrap();
        let config = SamplerConfig { ensemble_size: 16, dropout_rate: rho, max_steps: 20, seed, ..SamplerConfig::default() };
        let a = run_sampler(&design, &prior, &config).unwrap();
        let b = run_sampler(&design, &prior, &config).unwrap();
        prop_assert_eq!(a.ensemble, b.ensemble);
        prop_assert_eq!(a.log, b.log);
    }
}

fn record_strategy() -> impl Strategy<Value = ActivationRecord> {
    (
        0usize..4,
        1usize..9,
        any::<bool>(),
        1usize..5,
        0usize..3,
        0usize..176,
        0usize..4,
        prop::sample::select(vec![0.01, 1.0, 5.0]),
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..0.5),
    )
        .prop_map(|(run, item, reversal, position, probe, unit, class, prior_scale, (mle, bayes_mean, bayes_sd))| {
            ActivationRecord {
                run,
                item,
                condition: if reversal { Condition::Reversal } else { Condition::Congruent },
                position,
                probe: [Role::Agent, Role::Action, Role::Patient][probe],
                unit,
                unit_label: format!("unit-{unit}"),
                unit_class: [UnitClass::PlausibleAgent, UnitClass::SyntacticAgent, UnitClass::Action, UnitClass::NonRelevant][class],
                prior_scale,
                mle,
                bayes_mean,
                bayes_sd,
            }
        })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn tables_are_reproducible_from_persisted_records(records in prop::collection::vec(record_strategy(), 0..200)) {
        let back = records_from_csv(&records_to_csv(&records), "records.csv").unwrap();
        prop_assert_eq!(&back, &records);
        let a = model_analysis(&records, 1.0);
        let b = model_analysis(&back, 1.0);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
