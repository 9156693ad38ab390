use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// `J` particles as the columns of a `D×J` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub particles: DMatrix<f64>,
    /// Completed time steps.
    pub step: usize,
}

impl Ensemble {
    pub fn new(particles: DMatrix<f64>) -> Self {
        Self { particles, step: 0 }
    }

    pub fn dim(&self) -> usize {
        self.particles.nrows()
    }

    pub fn size(&self) -> usize {
        self.particles.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.particles.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    /// Columns `θ^j − m`; they sum to zero.
    pub deviations: DMatrix<f64>,
    /// `ΘΘᵀ/(J−1)`.
    pub covariance: DMatrix<f64>,
}

pub fn moments(ensemble: &Ensemble) -> Result<Moments> {
    let j = ensemble.size();
    if j < 2 {
        return Err(Error::Shape(format!("ensemble needs at least 2 particles, has {j}")));
    }
    let mean = ensemble.particles.column_mean();
    let mut deviations = ensemble.particles.clone();
    for mut c in deviations.column_iter_mut() {
        c -= &mean;
    }
    let mut covariance = &deviations * deviations.transpose() / (j - 1) as f64;
    symmetrize(&mut covariance);
    Ok(Moments {
        mean,
        deviations,
        covariance,
    })
}

/// Replaces `a` by `(a + aᵀ)/2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for k in (i + 1)..n {
            let v = 0.5 * (a[(i, k)] + a[(k, i)]);
            a[(i, k)] = v;
            a[(k, i)] = v;
        }
    }
}

/// Arithmetic mean of `g` over the particles.
pub fn ensemble_expectation<F>(ensemble: &Ensemble, g: F) -> DVector<f64>
where
    F: Fn(DVectorView<f64>) -> DVector<f64>,
{
    let mut cols = ensemble.particles.column_iter();
    let first = g(cols.next().expect("ensemble has particles").into());
    let sum = cols.fold(first, |acc, c| acc + g(c.into()));
    sum / ensemble.size() as f64
}
