use nalgebra::{DMatrix, DVector};

use super::params::NetworkParams;
use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations produced while reading a prefix and answering one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardState {
    /// Gestalt after each constituent.
    pub gestalt: Vec<DVector<f64>>,
    /// Second hidden layer for the probe.
    pub hidden: DVector<f64>,
}

/// The frozen penultimate map `ψ(x) = [h; 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    w_in: DMatrix<f64>,
    w_rec: DMatrix<f64>,
    b_g: DVector<f64>,
    w_gh: DMatrix<f64>,
    w_probe: DMatrix<f64>,
    b_h: DVector<f64>,
}

pub fn extract_feature_map(params: &NetworkParams) -> FeatureMap {
    FeatureMap {
        w_in: params.w_in.clone(),
        w_rec: params.w_rec.clone(),
        b_g: params.b_g.clone(),
        w_gh: params.w_gh.clone(),
        w_probe: params.w_probe.clone(),
        b_h: params.b_h.clone(),
    }
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn probe_dim(&self) -> usize {
        self.w_probe.ncols()
    }

    /// `d + 1`.
    pub fn dim(&self) -> usize {
        self.w_gh.nrows() + 1
    }

    fn check(&self, prefix: &[Vec<f64>], probe: &[f64]) -> Result<()> {
        if prefix.is_empty() {
            return Err(Error::Shape("empty input prefix".into()));
        }
        if let Some(x) = prefix.iter().find(|x| x.len() != self.input_dim()) {
            return Err(Error::Shape(format!(
                "input vector has {} entries, expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        if probe.len() != self.probe_dim() {
            return Err(Error::Shape(format!(
                "probe has {} entries, expected {}",
                probe.len(),
                self.probe_dim()
            )));
        }
        Ok(())
    }

    /// One recurrent update from `prev` with dense input `x`.
    pub fn step(&self, prev: &DVector<f64>, x: &[f64]) -> DVector<f64> {
        let mut pre = self.b_g.clone();
        pre.gemv(1.0, &self.w_rec, prev, 1.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                pre.axpy(xj, &self.w_in.column(j), 1.0);
            }
        }
        pre.map(sigmoid)
    }

    /// Same as [`Self::step`] for a binary input given by its active units.
    pub fn step_sparse(&self, prev: &DVector<f64>, active: &[usize]) -> DVector<f64> {
        let mut pre = self.b_g.clone();
        pre.gemv(1.0, &self.w_rec, prev, 1.0);
        for &j in active {
            pre += self.w_in.column(j);
        }
        pre.map(sigmoid)
    }

    /// Gestalt after each constituent, starting from the zero state.
    pub fn gestalts(&self, prefix: &[Vec<f64>]) -> Vec<DVector<f64>> {
        let mut g = DVector::zeros(self.w_rec.nrows());
        prefix
            .iter()
            .map(|x| {
                g = self.step(&g, x);
                g.clone()
            })
            .collect()
    }

    pub fn gestalts_sparse(&self, steps: &[Vec<usize>]) -> Vec<DVector<f64>> {
        let mut g = DVector::zeros(self.w_rec.nrows());
        steps
            .iter()
            .map(|x| {
                g = self.step_sparse(&g, x);
                g.clone()
            })
            .collect()
    }

    pub fn hidden(&self, gestalt: &DVector<f64>, probe: &[f64]) -> DVector<f64> {
        let mut pre = self.b_h.clone();
        pre.gemv(1.0, &self.w_gh, gestalt, 1.0);
        for (j, &pj) in probe.iter().enumerate() {
            if pj != 0.0 {
                pre.axpy(pj, &self.w_probe.column(j), 1.0);
            }
        }
        pre.map(sigmoid)
    }

    pub fn hidden_sparse(&self, gestalt: &DVector<f64>, probe: &[usize]) -> DVector<f64> {
        let mut pre = self.b_h.clone();
        pre.gemv(1.0, &self.w_gh, gestalt, 1.0);
        for &j in probe {
            pre += self.w_probe.column(j);
        }
        pre.map(sigmoid)
    }

    /// Appends the constant bias unit.
    pub fn augment(hidden: &DVector<f64>) -> DVector<f64> {
        let d = hidden.len();
        DVector::from_fn(d + 1, |i, _| if i < d { hidden[i] } else { 1.0 })
    }

    pub fn psi(&self, prefix: &[Vec<f64>], probe: &[f64]) -> Result<DVector<f64>> {
        self.check(prefix, probe)?;
        let g = self.gestalts(prefix).pop().expect("nonempty prefix");
        Ok(Self::augment(&self.hidden(&g, probe)))
    }

    pub fn psi_from_gestalt(&self, gestalt: &DVector<f64>, probe: &[usize]) -> DVector<f64> {
        Self::augment(&self.hidden_sparse(gestalt, probe))
    }
}

/// Output probabilities `σ(θ ψ)` for one prefix and probe.
pub fn forward(
    params: &NetworkParams,
    prefix: &[Vec<f64>],
    probe: &[f64],
) -> Result<(Vec<f64>, ForwardState)> {
    let map = extract_feature_map(params);
    map.check(prefix, probe)?;
    let gestalt = map.gestalts(prefix);
    let hidden = map.hidden(gestalt.last().expect("nonempty prefix"), probe);
    let y = output_probabilities(&params.theta, &FeatureMap::augment(&hidden));
    Ok((y, ForwardState { gestalt, hidden }))
}

pub fn output_probabilities(theta: &DMatrix<f64>, psi: &DVector<f64>) -> Vec<f64> {
    (theta * psi).iter().map(|&z| sigmoid(z)).collect()
}

/// `σ(⟨θ_k, ψ⟩)`.
pub fn predict_mle(params: &NetworkParams, psi: &DVector<f64>, unit: usize) -> f64 {
    sigmoid(params.theta.row(unit).transpose().dot(psi))
}

/// Binary cross-entropy summed over entries; probabilities are clamped to
/// `[floor, 1 - floor]`.
pub fn cross_entropy(outputs: &[f64], targets: &[f64], floor: f64) -> Result<f64> {
    if outputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} outputs vs {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    let mut clamped = 0usize;
    let loss = outputs
        .iter()
        .zip(targets)
        .map(|(&y, &t)| {
            let yc = y.clamp(floor, 1.0 - floor);
            if yc != y {
                clamped += 1;
            }
            -(t * yc.ln() + (1.0 - t) * (1.0 - yc).ln())
        })
        .sum();
    if clamped > 0 {
        log::debug!("cross-entropy clamped {clamped} probabilities to {floor:e}");
    }
    Ok(loss)
}
