//! Trotter-split time stepping of the interacting particle system
//!
//! ```text
//! dθ/dτ = −½ P Ψ (μ[R] Ψᵀ(θ − m) + 2(μ[y] − t))
//!         −½ P P_prior⁻¹ (θ + m − 2 m_prior) + ½ (θ − m)
//! ```
//!
//! The data part is advanced first (homotopy half-step), the prior part
//! second. Both halves are linearly implicit in the covariance-weighted
//! terms so that large steps stay bounded.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ensemble::{Ensemble, Moments};
use super::logistic::{ensemble_predictions, weighted_gram, Design};
use crate::error::{Error, Result};

/// Systems worse conditioned than this are reported as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Gaussian prior with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub mean: DVector<f64>,
    /// Diagonal of `P_prior`.
    pub variance: DVector<f64>,
}

impl Prior {
    pub fn new(mean: DVector<f64>, variance: DVector<f64>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::Shape(format!(
                "prior mean has {} entries, variance {}",
                mean.len(),
                variance.len()
            )));
        }
        if variance.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("prior variances must be positive".into()));
        }
        Ok(Self { mean, variance })
    }

    /// `N(mean, scale·I)`.
    pub fn isotropic(mean: DVector<f64>, scale: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, DVector::from_element(n, scale))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomotopyForm {
    /// `θ − (Δτ/2)(I + Δτ P̂ H)⁻¹ P̂ [H(θ − m) + 2Ψ(μ[y] − t)]` with
    /// `H = Ψ μ[R] Ψᵀ`; reduces to the ODE as `Δτ → 0`.
    #[default]
    Consistent,
    /// `θ − (Δτ/2) P̂ Ψ (M Ψᵀ(θ − m) + 2(μ[y] − t))` with
    /// `M = (Δτ Ψᵀ P̂ Ψ + μ[R])⁻¹`, solved in observation space.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixNorm {
    #[default]
    Frobenius,
    Spectral,
}

impl MatrixNorm {
    pub fn of(self, a: &DMatrix<f64>) -> f64 {
        match self {
            MatrixNorm::Frobenius => a.norm(),
            MatrixNorm::Spectral => {
                if a.is_empty() {
                    0.0
                } else {
                    a.singular_values().max()
                }
            }
        }
    }
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Solves `a x = b` by LU, reporting the 1-norm condition number when the
/// system is (numerically) singular.
pub fn solve_checked(a: DMatrix<f64>, b: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let norm_a = one_norm(&a);
    let lu = a.lu();
    let inverse = lu.try_inverse();
    let condition = inverse
        .as_ref()
        .map_or(f64::INFINITY, |inv| norm_a * one_norm(inv));
    if !(condition.is_finite() && condition < MAX_CONDITION) {
        return Err(Error::Singular { context, condition });
    }
    lu.solve(b).ok_or(Error::Singular { context, condition })
}

/// Columns `θ^j − m` as a fresh matrix.
fn centered(particles: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut d = particles.clone();
    for mut c in d.column_iter_mut() {
        c -= mean;
    }
    d
}

fn check_dims(ensemble: &Ensemble, design: &Design, p_hat: &DMatrix<f64>) -> Result<()> {
    let d = ensemble.dim();
    if design.dim() != d || p_hat.shape() != (d, d) {
        return Err(Error::Shape(format!(
            "ensemble dim {d}, design dim {}, covariance {:?}",
            design.dim(),
            p_hat.shape()
        )));
    }
    Ok(())
}

/// Data half-step `s → s + 1/2`.
pub fn homotopy_half_step(
    ensemble: &Ensemble,
    design: &Design,
    moments: &Moments,
    p_hat: &DMatrix<f64>,
    dt: f64,
    form: HomotopyForm,
) -> Result<Ensemble> {
    check_dims(ensemble, design, p_hat)?;
    if dt == 0.0 || design.is_empty() {
        return Ok(ensemble.clone());
    }
    let (mean_y, mean_r) = ensemble_predictions(design, ensemble);
    let residual = &mean_y - &design.targets;
    let dev = centered(&ensemble.particles, &moments.mean);
    let update = match form {
        HomotopyForm::Consistent => {
            let h = weighted_gram(&design.psi, &mean_r);
            let g = &design.psi * residual * 2.0;
            let mut rhs = &h * &dev;
            for mut c in rhs.column_iter_mut() {
                c += &g;
            }
            let rhs = p_hat * rhs;
            let a = DMatrix::identity(ensemble.dim(), ensemble.dim()) + p_hat * &h * dt;
            solve_checked(a, &rhs, "homotopy half-step")?
        }
        HomotopyForm::Literal => {
            let p_psi = p_hat * &design.psi;
            let mut a = design.psi.tr_mul(&p_psi) * dt;
            for (i, r) in mean_r.iter().enumerate() {
                a[(i, i)] += r;
            }
            let mut v = solve_checked(a, &design.psi.tr_mul(&dev), "homotopy half-step")?;
            let two_res = residual * 2.0;
            for mut c in v.column_iter_mut() {
                c += &two_res;
            }
            p_psi * v
        }
    };
    let mut next = ensemble.clone();
    next.particles -= update * (dt / 2.0);
    if !next.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite particle after homotopy half-step {}",
            ensemble.step
        )));
    }
    Ok(next)
}

/// Prior half-step `s + 1/2 → s + 1`.
pub fn prior_half_step(
    ensemble: &Ensemble,
    moments: &Moments,
    p_hat: &DMatrix<f64>,
    prior: &Prior,
    dt: f64,
) -> Result<Ensemble> {
    let d = ensemble.dim();
    if prior.dim() != d || p_hat.shape() != (d, d) {
        return Err(Error::Shape(format!(
            "ensemble dim {d}, prior dim {}, covariance {:?}",
            prior.dim(),
            p_hat.shape()
        )));
    }
    if dt == 0.0 {
        return Ok(ensemble.clone());
    }
    let mut a = p_hat * dt;
    for i in 0..d {
        a[(i, i)] += prior.variance[i];
    }
    let shift = &moments.mean - &prior.mean * 2.0;
    let mut rhs = ensemble.particles.clone();
    for mut c in rhs.column_iter_mut() {
        c += &shift;
    }
    let x = match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => solve_checked(a, &rhs, "prior half-step")?,
    };
    let pull = p_hat * x;
    let dev = centered(&ensemble.particles, &moments.mean);
    let mut next = ensemble.clone();
    next.particles += (dev - pull) * (dt / 2.0);
    if !next.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite particle after prior half-step {}",
            ensemble.step
        )));
    }
    Ok(next)
}

/// Right-hand side of the particle ODE, using the undropped covariance.
pub fn ips_rhs(ensemble: &Ensemble, design: &Design, prior: &Prior) -> Result<DMatrix<f64>> {
    let m = super::ensemble::moments(ensemble)?;
    check_dims(ensemble, design, &m.covariance)?;
    let dev = centered(&ensemble.particles, &m.mean);
    let mut data = DMatrix::zeros(ensemble.dim(), ensemble.size());
    if !design.is_empty() {
        let (mean_y, mean_r) = ensemble_predictions(design, ensemble);
        let mut inner = design.psi.tr_mul(&dev);
        for mut c in inner.column_iter_mut() {
            c.component_mul_assign(&mean_r);
            c += (&mean_y - &design.targets) * 2.0;
        }
        data = &m.covariance * (&design.psi * inner);
    }
    let mut prior_term = ensemble.particles.clone();
    let shift = &m.mean - &prior.mean * 2.0;
    for mut c in prior_term.column_iter_mut() {
        c += &shift;
        c.component_div_assign(&prior.variance);
    }
    let prior_term = &m.covariance * prior_term;
    Ok((dev - data - prior_term) * 0.5)
}

/// `‖next − prev‖ / ‖prev‖`; zero when `prev` vanishes.
pub fn stopping_metric(prev: &DMatrix<f64>, next: &DMatrix<f64>, norm: MatrixNorm) -> f64 {
    let denom = norm.of(prev);
    if denom == 0.0 {
        return 0.0;
    }
    norm.of(&(next - prev)) / denom
}
