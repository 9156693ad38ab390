//! Reference computations shared by the integration tests.

#![allow(dead_code)]

use gestalt_core::rng::{seeded, standard_normal};
use gestalt_core::sampler::{Design, Prior};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn log_sigmoid(z: f64) -> f64 {
    if z > 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// 20 points `ψ = (x, 1)` drawn from a logistic model with `θ = (1.5, −0.5)`.
pub fn two_d_problem() -> Design {
    let mut rng = seeded(2024);
    let n = 20;
    let mut psi = DMatrix::zeros(2, n);
    let mut t = DVector::zeros(n);
    for i in 0..n {
        let x = standard_normal(&mut rng);
        psi[(0, i)] = x;
        psi[(1, i)] = 1.0;
        t[i] = (rng.random::<f64>() < sigmoid(1.5 * x - 0.5)) as u8 as f64;
    }
    Design::new(psi, t).unwrap()
}

/// Posterior mean and covariance by midpoint quadrature on a dense grid.
pub fn quadrature_moments(design: &Design, prior: &Prior) -> (DVector<f64>, DMatrix<f64>) {
    let (lo, hi, n) = (-8.0, 8.0, 801);
    let h = (hi - lo) / n as f64;
    let log_post = |a: f64, b: f64| {
        let mut s = 0.0;
        for i in 0..design.len() {
            let z = a * design.psi[(0, i)] + b * design.psi[(1, i)];
            s += if design.targets[i] == 1.0 { log_sigmoid(z) } else { log_sigmoid(-z) };
        }
        s - 0.5 * (a - prior.mean[0]).powi(2) / prior.variance[0] - 0.5 * (b - prior.mean[1]).powi(2) / prior.variance[1]
    };
    let mut grid = Vec::with_capacity(n * n);
    let mut max = f64::NEG_INFINITY;
    for i in 0..n {
        for k in 0..n {
            let (a, b) = (lo + (i as f64 + 0.5) * h, lo + (k as f64 + 0.5) * h);
            let l = log_post(a, b);
            max = max.max(l);
            grid.push((a, b, l));
        }
    }
    let mut z = 0.0;
    let mut m = DVector::zeros(2);
    for &(a, b, l) in &grid {
        let w = (l - max).exp();
        z += w;
        m[0] += w * a;
        m[1] += w * b;
    }
    m /= z;
    let mut c = DMatrix::zeros(2, 2);
    for &(a, b, l) in &grid {
        let w = (l - max).exp() / z;
        let d = [a - m[0], b - m[1]];
        for i in 0..2 {
            for k in 0..2 {
                c[(i, k)] += w * d[i] * d[k];
            }
        }
    }
    (m, c)
}

/// Two-sided Student tail `P(|T| ≥ |t|)` by adaptive Simpson quadrature of
/// the density under `x = tan(u)`; independent of the incomplete beta.
pub fn quad_tail(t: f64, df: f64) -> f64 {
    let f = |u: f64| {
        let x = u.tan();
        let c = u.cos();
        (1.0 + x * x / df).powf(-(df + 1.0) / 2.0) / (c * c)
    };
    let half = std::f64::consts::FRAC_PI_2;
    let total = adaptive(&f, 0.0, half, 1e-14);
    let tail = adaptive(&f, t.abs().atan(), half, 1e-14);
    tail / total
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1) + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let eval = |x: f64| if x >= std::f64::consts::FRAC_PI_2 { 0.0 } else { f(x) };
    let (fa, fb) = (eval(a), eval(b));
    let (m, fm, whole) = simpson(&eval, a, fa, b, fb);
    rec(&eval, a, fa, b, fb, whole, m, fm, tol, 50)
}
