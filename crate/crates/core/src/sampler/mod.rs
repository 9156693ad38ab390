//! Dropout deterministic ensemble sampler for Bayesian logistic regression.
//!
//! A cloud of `J` parameter vectors is transported from the prior towards
//! the posterior by an interacting particle ODE whose drift uses only the
//! ensemble mean and covariance. Dropout on the ensemble deviations keeps
//! the covariance well conditioned when `J` is smaller than the dimension.

pub mod dropout;
pub mod ensemble;
pub mod io;
pub mod logistic;
pub mod run;
pub mod steps;

pub use dropout::{dropout_covariance, masked_covariance, DropoutCovariance, DropoutMode};
pub use ensemble::{ensemble_expectation, moments, Ensemble, Moments};
pub use io::{read_ensemble, write_ensemble, EnsembleHeader};
pub use logistic::{ensemble_predictions, gradient, hessian, neg_log_posterior, probabilities, Design};
pub use run::{initial_ensemble, run_sampler, write_convergence_log, SamplerConfig, SamplerRun, StepRecord};
pub use steps::{homotopy_half_step, ips_rhs, prior_half_step, stopping_metric, HomotopyForm, MatrixNorm, Prior};
