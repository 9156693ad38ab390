//! Independent sampler runs per output unit and the resulting predictive.

use nalgebra::{DVector, DVectorView};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::DesignBundle;
use crate::error::{Error, Result};
use crate::network::{sigmoid, NetworkParams};
use crate::rng::derive_seed;
use crate::sampler::{run_sampler, Ensemble, Prior, SamplerConfig, StepRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct UnitFit {
    pub unit: usize,
    pub seed: u64,
    /// `θ_MLE[k]`, the prior mean.
    pub prior_mean: DVector<f64>,
    pub ensemble: Ensemble,
    pub steps: usize,
    pub final_metric: f64,
    pub converged: bool,
    /// Targets were constant over the design.
    pub degenerate: bool,
    pub log: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadProvenance {
    pub checkpoint_sha256: String,
    pub design_sha256: String,
    pub design_size: usize,
    pub master_seed: u64,
    /// `P_prior = prior_scale · I`.
    pub prior_scale: f64,
    pub config: SamplerConfig,
}

/// Posterior ensembles for a set of output units, sorted by unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorHead {
    pub provenance: HeadProvenance,
    pub fits: Vec<UnitFit>,
}

/// Successful fits plus the units that failed.
#[derive(Debug)]
pub struct HeadFit {
    pub head: PosteriorHead,
    pub failures: Vec<Error>,
}

impl HeadFit {
    pub fn into_result(self) -> Result<PosteriorHead> {
        match self.failures.into_iter().next() {
            Some(e) => Err(e),
            None => Ok(self.head),
        }
    }
}

/// Runs one sampler per unit in `units` with `m_prior = θ_MLE[k]` and
/// `P_prior = prior_scale · I`. Unit `k` is seeded with
/// `derive_seed(master_seed, k)`, so results do not depend on scheduling.
pub fn fit_head(
    bundle: &DesignBundle,
    params: &NetworkParams,
    units: &[usize],
    config: &SamplerConfig,
    prior_scale: f64,
    master_seed: u64,
    checkpoint_sha256: &str,
) -> HeadFit {
    let provenance = HeadProvenance {
        checkpoint_sha256: checkpoint_sha256.to_string(),
        design_sha256: bundle.digest(),
        design_size: bundle.len(),
        master_seed,
        prior_scale,
        config: config.clone(),
    };
    let mut units = units.to_vec();
    units.sort_unstable();
    units.dedup();
    let results: Vec<Result<UnitFit>> = units
        .par_iter()
        .map(|&k| fit_unit(bundle, params, k, config, prior_scale, master_seed).map_err(|e| Error::Unit { unit: k, source: Box::new(e) }))
        .collect();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => {
                log::error!("{e}");
                failures.push(e);
            }
        }
    }
    HeadFit {
        head: PosteriorHead { provenance, fits },
        failures,
    }
}

fn fit_unit(
    bundle: &DesignBundle,
    params: &NetworkParams,
    k: usize,
    config: &SamplerConfig,
    prior_scale: f64,
    master_seed: u64,
) -> Result<UnitFit> {
    if params.theta.nrows() != bundle.outputs() || params.theta.ncols() != bundle.dim() {
        return Err(Error::Shape(format!(
            "output layer {:?} does not match design ({} units, dim {})",
            params.theta.shape(),
            bundle.outputs(),
            bundle.dim()
        )));
    }
    let design = bundle.unit_design(k)?;
    let degenerate = bundle.is_degenerate(k);
    if degenerate {
        log::info!("unit {k}: targets are constant over the design");
    }
    let prior = Prior::isotropic(params.theta.row(k).transpose(), prior_scale)?;
    let seed = derive_seed(master_seed, k as u64);
    let cfg = SamplerConfig { seed, ..config.clone() };
    let run = run_sampler(&design, &prior, &cfg)?;
    if !run.converged {
        log::warn!("unit {k}: no convergence after {} steps (metric {:.3e})", run.steps, run.final_metric);
    }
    Ok(UnitFit {
        unit: k,
        seed,
        prior_mean: prior.mean,
        ensemble: run.ensemble,
        steps: run.steps,
        final_metric: run.final_metric,
        converged: run.converged,
        degenerate,
        log: run.log,
    })
}

impl PosteriorHead {
    pub fn fit(&self, unit: usize) -> Option<&UnitFit> {
        self.fits
            .binary_search_by_key(&unit, |f| f.unit)
            .ok()
            .map(|i| &self.fits[i])
    }

    pub fn units(&self) -> Vec<usize> {
        self.fits.iter().map(|f| f.unit).collect()
    }

    /// `(1/J) Σ_j σ(⟨θ^j, ψ⟩)`.
    pub fn predict(&self, psi: &DVector<f64>, unit: usize) -> Result<f64> {
        Ok(self.predict_with_spread(psi, unit)?.0)
    }

    /// Predictive mean and the standard deviation of `σ(⟨θ^j, ψ⟩)` over
    /// particles (divisor `J − 1`).
    pub fn predict_with_spread(&self, psi: &DVector<f64>, unit: usize) -> Result<(f64, f64)> {
        let fit = self
            .fit(unit)
            .ok_or_else(|| Error::Config(format!("unit {unit} was not fitted")))?;
        if psi.len() != fit.ensemble.dim() {
            return Err(Error::Shape(format!(
                "feature vector has {} entries, head dim {}",
                psi.len(),
                fit.ensemble.dim()
            )));
        }
        Ok(particle_predictive(&fit.ensemble, psi.as_view()))
    }

    /// Median over fitted units of the median particle spread of `σ` on
    /// `probes`.
    pub fn median_spread(&self, probes: &[DVector<f64>]) -> Result<f64> {
        let mut spreads = Vec::with_capacity(self.fits.len());
        for f in &self.fits {
            let mut s: Vec<f64> = probes
                .iter()
                .map(|p| particle_predictive(&f.ensemble, p.as_view()).1)
                .collect();
            s.sort_by(f64::total_cmp);
            spreads.push(median_sorted(&s));
        }
        spreads.sort_by(f64::total_cmp);
        Ok(median_sorted(&spreads))
    }
}

fn median_sorted(s: &[f64]) -> f64 {
    match s.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => s[n / 2],
        n => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

fn particle_predictive(ensemble: &Ensemble, psi: DVectorView<f64>) -> (f64, f64) {
    let ys: Vec<f64> = ensemble
        .particles
        .tr_mul(&psi)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();
    let j = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / j;
    let sd = if ys.len() > 1 {
        (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (j - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::design::PairRef;
    use crate::network::{predict_mle, NetworkShape};
    use crate::rng::seeded;
    use crate::sampler::SamplerConfig;
    use nalgebra::DMatrix;

    fn head_with(particles: DMatrix<f64>) -> PosteriorHead {
        PosteriorHead {
            provenance: HeadProvenance {
                checkpoint_sha256: String::new(),
                design_sha256: String::new(),
                design_size: 0,
                master_seed: 0,
                prior_scale: 1.0,
                config: SamplerConfig::default(),
            },
            fits: vec![UnitFit {
                unit: 3,
                seed: 0,
                prior_mean: DVector::zeros(particles.nrows()),
                ensemble: Ensemble::new(particles),
                steps: 0,
                final_metric: 0.0,
                converged: true,
                degenerate: false,
                log: vec![],
            }],
        }
    }

    #[test]
    fn identical_particles_give_plain_sigmoid() {
        let theta = [0.4, -1.2, 0.3];
        let head = head_with(DMatrix::from_fn(3, 5, |i, _| theta[i]));
        let psi = DVector::from_vec(vec![1.0, 0.5, 1.0]);
        let (m, sd) = head.predict_with_spread(&psi, 3).unwrap();
        assert!((m - sigmoid(0.4 - 0.6 + 0.3)).abs() < 1e-15);
        assert!(sd < 1e-15);
    }

    #[test]
    fn opposite_logits_average_to_half() {
        let head = head_with(DMatrix::from_row_slice(2, 2, &[1.3, -1.3, 0.0, 0.0]));
        let psi = DVector::from_vec(vec![2.0, 1.0]);
        assert_eq!(head.predict(&psi, 3).unwrap(), 0.5);
        assert!(head.predict(&psi, 4).is_err());
        assert!(head.predict(&DVector::zeros(3), 3).is_err());
    }

    #[test]
    fn single_mle_particle_matches_predict_mle() {
        let shape = NetworkShape { inputs: 4, gestalt: 3, hidden: 2, outputs: 5 };
        let params = NetworkParams::init(shape, &mut seeded(1));
        let head = head_with(DMatrix::from_iterator(3, 1, params.theta.row(3).iter().copied()));
        let psi = DVector::from_vec(vec![0.2, 0.9, 1.0]);
        assert_eq!(head.predict(&psi, 3).unwrap(), predict_mle(&params, &psi, 3));
    }

    fn toy_bundle(all_zero_unit: usize) -> (DesignBundle, NetworkParams) {
        let shape = NetworkShape { inputs: 4, gestalt: 3, hidden: 2, outputs: 3 };
        let mut params = NetworkParams::init(shape, &mut seeded(4));
        params.theta.fill(0.0);
        let n = 200;
        let mut rng = seeded(8);
        let mut psi = DMatrix::zeros(3, n);
        let mut targets = DMatrix::zeros(3, n);
        for c in 0..n {
            let h = [rand::Rng::random::<f64>(&mut rng), rand::Rng::random::<f64>(&mut rng)];
            psi[(0, c)] = h[0];
            psi[(1, c)] = h[1];
            psi[(2, c)] = 1.0;
            for k in 0..3 {
                if k != all_zero_unit {
                    targets[(k, c)] = f64::from(h[k % 2] > 0.5);
                }
            }
        }
        let bundle = DesignBundle {
            psi,
            targets,
            roles: vec![crate::corpus::Role::Agent; n],
            sources: vec![PairRef { example: 0, prefix: 0, query: 0 }; n],
        };
        (bundle, params)
    }

    #[test]
    fn all_zero_unit_predicts_below_half() {
        let (bundle, params) = toy_bundle(1);
        assert!(bundle.is_degenerate(1));
        let cfg = SamplerConfig { ensemble_size: 32, ..Default::default() };
        let head = fit_head(&bundle, &params, &[1], &cfg, 1.0, 5, "x").into_result().unwrap();
        let below = (0..bundle.len())
            .filter(|&c| head.predict(&bundle.psi.column(c).into_owned(), 1).unwrap() < 0.5)
            .count();
        assert!(below as f64 >= 0.99 * bundle.len() as f64);
    }

    #[test]
    fn fits_are_reproducible_and_order_free() {
        let (bundle, params) = toy_bundle(1);
        let cfg = SamplerConfig { ensemble_size: 16, ..Default::default() };
        let a = fit_head(&bundle, &params, &[0, 2, 1], &cfg, 1.0, 5, "x").into_result().unwrap();
        let b = fit_head(&bundle, &params, &[2, 1, 0, 2], &cfg, 1.0, 5, "x").into_result().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.units(), vec![0, 1, 2]);
        let single = fit_head(&bundle, &params, &[2], &cfg, 1.0, 5, "x").into_result().unwrap();
        assert_eq!(single.fits[0], a.fits[2]);
    }

    #[test]
    fn bad_unit_reported_with_index() {
        let (bundle, params) = toy_bundle(1);
        let fit = fit_head(&bundle, &params, &[0, 7], &SamplerConfig { ensemble_size: 8, ..Default::default() }, 1.0, 1, "x");
        assert_eq!(fit.head.units(), vec![0]);
        assert!(matches!(fit.failures.as_slice(), [Error::Unit { unit: 7, .. }]));
    }
}
