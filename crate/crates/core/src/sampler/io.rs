//! Ensemble files.
//!
//! ```text
//! magic      8 bytes  "SGENS001"
//! header_len u32 LE
//! header     JSON (dim, size, step, final metric, config, prior)
//! particles  f64 LE, row-major D×J
//! ```

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ensemble::Ensemble;
use super::run::{SamplerConfig, SamplerRun};
use super::steps::Prior;
use crate::error::{Error, Result};
use crate::network::checkpoint::{read_framed, read_matrix_rows, write_framed, write_matrix_rows};

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"SGENS001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub dim: usize,
    pub size: usize,
    pub step: usize,
    pub final_metric: f64,
    pub converged: bool,
    pub config: SamplerConfig,
    pub prior_mean: Vec<f64>,
    pub prior_variance: Vec<f64>,
}

impl EnsembleHeader {
    pub fn new(run: &SamplerRun, config: &SamplerConfig, prior: &Prior) -> Self {
        Self {
            dim: run.ensemble.dim(),
            size: run.ensemble.size(),
            step: run.steps,
            final_metric: run.final_metric,
            converged: run.converged,
            config: config.clone(),
            prior_mean: prior.mean.iter().copied().collect(),
            prior_variance: prior.variance.iter().copied().collect(),
        }
    }

    pub fn prior(&self) -> Result<Prior> {
        Prior::new(
            DVector::from_vec(self.prior_mean.clone()),
            DVector::from_vec(self.prior_variance.clone()),
        )
    }
}

pub fn write_ensemble(path: impl AsRef<Path>, header: &EnsembleHeader, ensemble: &Ensemble) -> Result<()> {
    if (header.dim, header.size) != (ensemble.dim(), ensemble.size()) {
        return Err(Error::Shape("ensemble header does not match particles".into()));
    }
    let mut payload = Vec::with_capacity(8 * header.dim * header.size);
    write_matrix_rows(&mut payload, &ensemble.particles);
    write_framed(path.as_ref(), ENSEMBLE_MAGIC, header, &payload)
}

pub fn read_ensemble(path: impl AsRef<Path>) -> Result<(Ensemble, EnsembleHeader)> {
    let path = path.as_ref();
    let (header, payload): (EnsembleHeader, _) = read_framed(path, ENSEMBLE_MAGIC)?;
    if payload.len() != 8 * header.dim * header.size {
        return Err(Error::parse(
            path.display().to_string(),
            0,
            format!("expected {} particle bytes, found {}", 8 * header.dim * header.size, payload.len()),
        ));
    }
    let ensemble = Ensemble {
        particles: read_matrix_rows(&payload, header.dim, header.size),
        step: header.step,
    };
    if !ensemble.is_finite() {
        return Err(Error::parse(path.display().to_string(), 0, "non-finite particle"));
    }
    Ok((ensemble, header))
}
