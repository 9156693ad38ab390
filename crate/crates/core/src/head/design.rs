//! Shared design matrix for the last-layer regression.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;

use crate::corpus::Role;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::network::{Example, FeatureMap};
use crate::rng::{derive_seed, seeded};
use crate::sampler::Design;

/// Default number of training pairs in the design.
pub const DEFAULT_DESIGN_SIZE: usize = 4096;

/// Origin of one design column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairRef {
    pub example: usize,
    pub prefix: usize,
    pub query: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignBundle {
    /// `(d+1)×N`; the last row is all ones.
    pub psi: DMatrix<f64>,
    /// `K×N` 0/1 targets; row `k` is `t_k`.
    pub targets: DMatrix<f64>,
    /// Probe role of each column.
    pub roles: Vec<Role>,
    pub sources: Vec<PairRef>,
}

impl DesignBundle {
    pub fn len(&self) -> usize {
        self.psi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.targets.nrows()
    }

    /// Binary problem for output unit `k`.
    pub fn unit_design(&self, k: usize) -> Result<Design> {
        if k >= self.outputs() {
            return Err(Error::Shape(format!("unit {k} out of range ({} outputs)", self.outputs())));
        }
        Design::new(self.psi.clone(), self.targets.row(k).transpose())
    }

    /// Whether `t_k` is constant over the design.
    pub fn is_degenerate(&self, k: usize) -> bool {
        let row = self.targets.row(k);
        row.iter().all(|&t| t == row[0])
    }

    /// SHA-256 over the little-endian bytes of `Ψ` and the targets.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::with_capacity(8 * (self.psi.len() + self.targets.len()));
        for x in self.psi.iter().chain(self.targets.iter()) {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        sha256_hex(&bytes)
    }
}

/// Stratified subsample of `size` training pairs, an equal share (±1) per
/// probe role, with features from the frozen map.
pub fn build_design(
    examples: &[Example],
    map: &FeatureMap,
    outputs: usize,
    size: usize,
    seed: u64,
) -> Result<DesignBundle> {
    if examples.is_empty() {
        return Err(Error::Config("cannot build a design from an empty corpus".into()));
    }
    let mut pools: Vec<Vec<PairRef>> = vec![Vec::new(); Role::ALL.len()];
    for (e, ex) in examples.iter().enumerate() {
        for prefix in 0..ex.steps.len() {
            for (q, query) in ex.queries.iter().enumerate() {
                pools[query.role.index()].push(PairRef { example: e, prefix, query: q });
            }
        }
    }
    let available: usize = pools.iter().map(Vec::len).sum();
    if size > available {
        return Err(Error::Config(format!(
            "design size {size} exceeds the {available} available pairs"
        )));
    }

    let strata = pools.len();
    let mut chosen = Vec::with_capacity(size);
    for (r, pool) in pools.iter().enumerate() {
        let quota = size / strata + usize::from(r < size % strata);
        if quota > pool.len() {
            return Err(Error::Config(format!(
                "role {} has {} pairs, needs {quota}",
                Role::ALL[r],
                pool.len()
            )));
        }
        let mut rng = seeded(derive_seed(seed, r as u64));
        let mut picked: Vec<PairRef> = sample(&mut rng, pool.len(), quota)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort();
        chosen.extend(picked);
    }

    let dim = map.dim();
    let mut psi = DMatrix::zeros(dim, size);
    let mut targets = DMatrix::zeros(outputs, size);
    let mut roles = Vec::with_capacity(size);
    let mut cached: Option<(usize, Vec<DVector<f64>>)> = None;
    for (c, r) in chosen.iter().enumerate() {
        let ex = &examples[r.example];
        if cached.as_ref().map(|(e, _)| *e) != Some(r.example) {
            cached = Some((r.example, map.gestalts_sparse(&ex.steps)));
        }
        let gestalts = &cached.as_ref().expect("filled above").1;
        let query = &ex.queries[r.query];
        psi.set_column(c, &map.psi_from_gestalt(&gestalts[r.prefix], &query.probe));
        for &k in &query.target {
            targets[(k, c)] = 1.0;
        }
        roles.push(query.role);
    }
    Ok(DesignBundle {
        psi,
        targets,
        roles,
        sources: chosen,
    })
}
