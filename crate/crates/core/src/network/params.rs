use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkShape {
    /// Input (constituent) units.
    pub inputs: usize,
    pub gestalt: usize,
    /// Second hidden layer width `d`; the feature map has `d + 1` entries.
    pub hidden: usize,
    /// Output units; the probe layer has the same width.
    pub outputs: usize,
}

impl NetworkShape {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            gestalt: 100,
            hidden: 100,
            outputs,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.hidden + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.gestalt == 0 || self.hidden == 0 || self.outputs == 0 {
            return Err(Error::Config(format!("all layer widths must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// All weights of the network. `theta` holds the output layer, one row per
/// output feature, with the bias in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub w_in: DMatrix<f64>,
    pub w_rec: DMatrix<f64>,
    pub b_g: DVector<f64>,
    pub w_gh: DMatrix<f64>,
    pub w_probe: DMatrix<f64>,
    pub b_h: DVector<f64>,
    pub theta: DMatrix<f64>,
}

pub const TENSOR_NAMES: [&str; 7] = ["w_in", "w_rec", "b_g", "w_gh", "w_probe", "b_h", "theta"];

impl NetworkParams {
    pub fn zeros(shape: NetworkShape) -> Self {
        let NetworkShape {
            inputs: v,
            gestalt: g,
            hidden: h,
            outputs: k,
        } = shape;
        Self {
            w_in: DMatrix::zeros(g, v),
            w_rec: DMatrix::zeros(g, g),
            b_g: DVector::zeros(g),
            w_gh: DMatrix::zeros(h, g),
            w_probe: DMatrix::zeros(h, k),
            b_h: DVector::zeros(h),
            theta: DMatrix::zeros(k, h + 1),
        }
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` for weights and biases.
    pub fn init<R: Rng + ?Sized>(shape: NetworkShape, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        let fan_g = (shape.inputs + shape.gestalt) as f64;
        let fan_h = (shape.gestalt + shape.outputs) as f64;
        let fan_o = shape.hidden as f64;
        let mut fill = |xs: &mut [f64], fan: f64| {
            let a = 1.0 / fan.sqrt();
            xs.iter_mut().for_each(|x| *x = rng.random_range(-a..a));
        };
        fill(p.w_in.as_mut_slice(), fan_g);
        fill(p.w_rec.as_mut_slice(), fan_g);
        fill(p.b_g.as_mut_slice(), fan_g);
        fill(p.w_gh.as_mut_slice(), fan_h);
        fill(p.w_probe.as_mut_slice(), fan_h);
        fill(p.b_h.as_mut_slice(), fan_h);
        fill(p.theta.as_mut_slice(), fan_o);
        p
    }

    pub fn shape(&self) -> NetworkShape {
        NetworkShape {
            inputs: self.w_in.ncols(),
            gestalt: self.w_rec.nrows(),
            hidden: self.w_gh.nrows(),
            outputs: self.theta.nrows(),
        }
    }

    /// Checks that all tensors agree with `self.shape()`.
    pub fn validate(&self) -> Result<()> {
        let s = self.shape();
        let expect = [
            (s.gestalt, s.inputs),
            (s.gestalt, s.gestalt),
            (s.gestalt, 1),
            (s.hidden, s.gestalt),
            (s.hidden, s.outputs),
            (s.hidden, 1),
            (s.outputs, s.hidden + 1),
        ];
        for ((name, dims), want) in TENSOR_NAMES.iter().zip(self.dims()).zip(expect) {
            if dims != want {
                return Err(Error::Shape(format!("{name} is {dims:?}, expected {want:?}")));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> [(usize, usize); 7] {
        [
            self.w_in.shape(),
            self.w_rec.shape(),
            self.b_g.shape(),
            self.w_gh.shape(),
            self.w_probe.shape(),
            self.b_h.shape(),
            self.theta.shape(),
        ]
    }

    /// Column-major storage of each tensor, in [`TENSOR_NAMES`] order.
    pub fn slices(&self) -> [&[f64]; 7] {
        [
            self.w_in.as_slice(),
            self.w_rec.as_slice(),
            self.b_g.as_slice(),
            self.w_gh.as_slice(),
            self.w_probe.as_slice(),
            self.b_h.as_slice(),
            self.theta.as_slice(),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 7] {
        [
            self.w_in.as_mut_slice(),
            self.w_rec.as_mut_slice(),
            self.b_g.as_mut_slice(),
            self.w_gh.as_mut_slice(),
            self.w_probe.as_mut_slice(),
            self.b_h.as_mut_slice(),
            self.theta.as_mut_slice(),
        ]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    /// Entry `index` of the concatenation of [`Self::slices`].
    pub fn get_flat(&self, mut index: usize) -> f64 {
        for s in self.slices() {
            if index < s.len() {
                return s[index];
            }
            index -= s.len();
        }
        panic!("flat index out of range")
    }

    pub fn set_flat(&mut self, mut index: usize, value: f64) {
        for s in self.slices_mut() {
            if index < s.len() {
                s[index] = value;
                return;
            }
            index -= s.len();
        }
        panic!("flat index out of range")
    }

    /// The output-layer weights of unit `k` as a vector of length `d + 1`.
    pub fn output_row(&self, k: usize) -> DVector<f64> {
        self.theta.row(k).transpose()
    }
}
