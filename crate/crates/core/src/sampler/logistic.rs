//! Binary logistic regression on a fixed design.

use nalgebra::{DMatrix, DVector};

use super::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::network::sigmoid;

/// Feature columns `Ψ = (ψ^1, …, ψ^N)` with 0/1 targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub psi: DMatrix<f64>,
    pub targets: DVector<f64>,
}

impl Design {
    pub fn new(psi: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if psi.ncols() != targets.len() {
            return Err(Error::Shape(format!(
                "design has {} columns but {} targets",
                psi.ncols(),
                targets.len()
            )));
        }
        if targets.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::Shape("targets must be 0 or 1".into()));
        }
        Ok(Self { psi, targets })
    }

    /// No observations.
    pub fn empty(dim: usize) -> Self {
        Self {
            psi: DMatrix::zeros(dim, 0),
            targets: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }

    pub fn len(&self) -> usize {
        self.psi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.ncols() == 0
    }
}

/// `y(θ)`: class-1 probabilities for every column.
pub fn probabilities(design: &Design, theta: &DVector<f64>) -> DVector<f64> {
    design.psi.tr_mul(theta).map(sigmoid)
}

/// Gradient of the negative log-likelihood, `Ψ(y − t)`.
pub fn gradient(design: &Design, theta: &DVector<f64>) -> DVector<f64> {
    &design.psi * (probabilities(design, theta) - &design.targets)
}

/// Hessian of the negative log-likelihood, `Ψ R Ψᵀ`.
pub fn hessian(design: &Design, theta: &DVector<f64>) -> DMatrix<f64> {
    let r = probabilities(design, theta).map(|y| y * (1.0 - y));
    weighted_gram(&design.psi, &r)
}

/// `Ψ diag(w) Ψᵀ`.
pub fn weighted_gram(psi: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = psi.clone();
    for (mut c, &wi) in scaled.column_iter_mut().zip(w.iter()) {
        c *= wi;
    }
    let mut g = &scaled * psi.transpose();
    super::ensemble::symmetrize(&mut g);
    g
}

/// Negative log-likelihood plus the Gaussian prior term (up to a constant).
pub fn neg_log_posterior(design: &Design, theta: &DVector<f64>, prior_mean: &DVector<f64>, prior_var: &DVector<f64>) -> f64 {
    let z = design.psi.tr_mul(theta);
    let nll: f64 = z
        .iter()
        .zip(design.targets.iter())
        .map(|(&z, &t)| softplus(z) - t * z)
        .sum();
    let prior: f64 = theta
        .iter()
        .zip(prior_mean.iter())
        .zip(prior_var.iter())
        .map(|((x, m), v)| (x - m).powi(2) / v)
        .sum();
    nll + 0.5 * prior
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Ensemble averages `μ[y]` and `μ[R]` (the diagonal of R) over the columns.
pub fn ensemble_predictions(design: &Design, ensemble: &Ensemble) -> (DVector<f64>, DVector<f64>) {
    let n = design.len();
    let j = ensemble.size() as f64;
    let z = design.psi.tr_mul(&ensemble.particles);
    let mut mean_y = DVector::zeros(n);
    let mut mean_r = DVector::zeros(n);
    for col in z.column_iter() {
        for (i, &zi) in col.iter().enumerate() {
            let y = sigmoid(zi);
            mean_y[i] += y;
            mean_r[i] += y * (1.0 - y);
        }
    }
    (mean_y / j, mean_r / j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_standard_normal, seeded};
    use crate::sampler::ensemble::ensemble_expectation;

    fn toy(d: usize, n: usize, seed: u64) -> Design {
        let mut rng = seeded(seed);
        let mut data = vec![0.0; d * n];
        fill_standard_normal(&mut rng, &mut data);
        let psi = DMatrix::from_vec(d, n, data);
        let targets = DVector::from_fn(n, |i, _| (i % 3 == 0) as u8 as f64);
        Design::new(psi, targets).unwrap()
    }

    #[test]
    fn gradient_and_hessian_match_loops() {
        let d = toy(4, 9, 1);
        let theta = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1]);
        let g = gradient(&d, &theta);
        let h = hessian(&d, &theta);
        for a in 0..4 {
            let mut ga = 0.0;
            for n in 0..9 {
                let y = sigmoid((0..4).map(|k| theta[k] * d.psi[(k, n)]).sum());
                ga += d.psi[(a, n)] * (y - d.targets[n]);
            }
            assert!((g[a] - ga).abs() < 1e-10);
            for b in 0..4 {
                let mut hab = 0.0;
                for n in 0..9 {
                    let y = sigmoid((0..4).map(|k| theta[k] * d.psi[(k, n)]).sum());
                    hab += d.psi[(a, n)] * y * (1.0 - y) * d.psi[(b, n)];
                }
                assert!((h[(a, b)] - hab).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradient_is_derivative_of_loss() {
        let d = toy(3, 12, 2);
        let zero = DVector::zeros(3);
        let inf = DVector::from_element(3, f64::INFINITY);
        let theta = DVector::from_vec(vec![0.4, -0.7, 0.2]);
        let g = gradient(&d, &theta);
        let h = hessian(&d, &theta);
        let eps = 1e-6;
        for a in 0..3 {
            let mut p = theta.clone();
            let mut m = theta.clone();
            p[a] += eps;
            m[a] -= eps;
            let fd = (neg_log_posterior(&d, &p, &zero, &inf) - neg_log_posterior(&d, &m, &zero, &inf)) / (2.0 * eps);
            assert!((fd - g[a]).abs() < 1e-7);
            let fdg = (gradient(&d, &p) - gradient(&d, &m)) / (2.0 * eps);
            assert!((fdg - h.column(a)).amax() < 1e-7);
        }
    }

    #[test]
    fn ensemble_means_match_particle_loop() {
        let d = toy(2, 5, 3);
        let e = Ensemble::new(DMatrix::from_row_slice(2, 3, &[0.1, -0.4, 1.2, 0.7, 0.0, -0.3]));
        let (my, mr) = ensemble_predictions(&d, &e);
        let direct_y = ensemble_expectation(&e, |t| probabilities(&d, &t.into_owned()));
        let direct_r = ensemble_expectation(&e, |t| probabilities(&d, &t.into_owned()).map(|y| y * (1.0 - y)));
        assert!((my - direct_y).amax() < 1e-15);
        assert!((mr.clone() - direct_r).amax() < 1e-15);
        assert!(mr.iter().all(|&r| r > 0.0 && r <= 0.25));
    }

    #[test]
    fn mismatched_targets_rejected() {
        assert!(Design::new(DMatrix::zeros(2, 3), DVector::zeros(2)).is_err());
        assert!(Design::new(DMatrix::zeros(2, 1), DVector::from_element(1, 0.5)).is_err());
    }
}
