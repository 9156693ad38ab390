//! Dropout covariance `P̂ = Θ̂Θ̂ᵀ / ((1−ρ)(J−1))`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ensemble::{symmetrize, Moments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropoutMode {
    /// Mask expectation: `(1−ρ)P + ρ·diag(P)`. Deterministic.
    #[default]
    Expected,
    /// A fresh Bernoulli mask on the deviations at every stage.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutCovariance {
    /// Masked deviations `Θ̂`; absent in expected mode.
    pub masked: Option<DMatrix<f64>>,
    pub covariance: DMatrix<f64>,
}

/// Zeroes each deviation entry independently with probability `rho`.
pub fn mask_deviations<R: Rng + ?Sized>(deviations: &DMatrix<f64>, rho: f64, rng: &mut R) -> DMatrix<f64> {
    if rho == 0.0 {
        return deviations.clone();
    }
    deviations.map(|x| if rng.random::<f64>() < rho { 0.0 } else { x })
}

/// Covariance of already-masked deviations.
pub fn masked_covariance(masked: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let j = masked.ncols();
    let mut p = masked * masked.transpose() / ((1.0 - rho) * (j - 1) as f64);
    symmetrize(&mut p);
    p
}

pub fn dropout_covariance<R: Rng + ?Sized>(
    moments: &Moments,
    rho: f64,
    mode: DropoutMode,
    rng: &mut R,
) -> DropoutCovariance {
    assert!((0.0..1.0).contains(&rho), "dropout rate must lie in [0, 1)");
    if rho == 0.0 {
        return DropoutCovariance {
            masked: Some(moments.deviations.clone()),
            covariance: moments.covariance.clone(),
        };
    }
    match mode {
        DropoutMode::Random => {
            let masked = mask_deviations(&moments.deviations, rho, rng);
            let covariance = masked_covariance(&masked, rho);
            DropoutCovariance {
                masked: Some(masked),
                covariance,
            }
        }
        DropoutMode::Expected => {
            let mut covariance = &moments.covariance * (1.0 - rho);
            for i in 0..covariance.nrows() {
                covariance[(i, i)] = moments.covariance[(i, i)];
            }
            DropoutCovariance {
                masked: None,
                covariance,
            }
        }
    }
}
