//! Descriptive statistics and Student t-tests (two-sided).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("{label}: need at least 2 values, got {n}")]
    TooFew { label: String, n: usize },
    #[error("{label}: zero variance")]
    ZeroVariance { label: String },
    #[error("samples differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("{label}: non-finite value")]
    NonFinite { label: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub values: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub n: usize,
    pub mean: f64,
    /// Unbiased standard deviation; `None` for a single value.
    pub sd: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t: f64,
    pub df: usize,
    pub p: f64,
}

/// Mean and unbiased spread. Empty input gives a NaN mean.
pub fn describe(values: &[f64]) -> Description {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let (sd, stderr) = if n >= 2 {
        // second pass with the rounding correction term
        let (ss, c) = values.iter().fold((0.0, 0.0), |(ss, c), &x| {
            let d = x - mean;
            (ss + d * d, c + d)
        });
        let var = (ss - c * c / n as f64) / (n - 1) as f64;
        let sd = var.max(0.0).sqrt();
        (Some(sd), Some(sd / (n as f64).sqrt()))
    } else {
        (None, None)
    };
    Description { n, mean, sd, stderr }
}

/// Two-sided tail probability `P(|T| >= |t|)` for Student's t with `df`
/// degrees of freedom, `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn t_cdf_complement(t: f64, df: f64) -> f64 {
    assert!(df >= 1.0, "degrees of freedom must be >= 1");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    statrs::function::beta::beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn check(sample: &Sample) -> Result<(), StatsError> {
    if sample.values.len() < 2 {
        return Err(StatsError::TooFew {
            label: sample.label.clone(),
            n: sample.values.len(),
        });
    }
    if sample.values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite {
            label: sample.label.clone(),
        });
    }
    Ok(())
}

/// t-test of the sample mean against `null_mean`.
///
/// A spread indistinguishable from rounding error counts as zero variance.
pub fn one_sample_t(sample: &Sample, null_mean: f64) -> Result<TestResult, StatsError> {
    check(sample)?;
    let d = describe(&sample.values);
    let sd = d.sd.expect("n >= 2");
    let scale = sample.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sd <= 64.0 * f64::EPSILON * scale || sd == 0.0 {
        return Err(StatsError::ZeroVariance {
            label: sample.label.clone(),
        });
    }
    let n = sample.values.len();
    let t = (d.mean - null_mean) / (sd / (n as f64).sqrt());
    let df = n - 1;
    Ok(TestResult {
        t,
        df,
        p: t_cdf_complement(t, df as f64),
    })
}

/// One-sample test on the differences `a - b`.
pub fn paired_t(a: &Sample, b: &Sample) -> Result<TestResult, StatsError> {
    if a.values.len() != b.values.len() {
        return Err(StatsError::LengthMismatch {
            a: a.values.len(),
            b: b.values.len(),
        });
    }
    let diff = Sample::new(
        format!("{} - {}", a.label, b.label),
        a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
    );
    one_sample_t(&diff, 0.0)
}
