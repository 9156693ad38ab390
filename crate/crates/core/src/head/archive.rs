//! On-disk head archive.
//!
//! ```text
//! <dir>/manifest.json            provenance and per-unit summary
//! <dir>/convergence_summary.csv  unit,label,steps,final_metric,converged,degenerate
//! <dir>/unit_<k>.ens             ensemble file
//! <dir>/unit_<k>.log.csv         convergence log
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::{HeadProvenance, PosteriorHead, UnitFit};
use crate::error::{Error, Result};
use crate::sampler::{read_ensemble, write_convergence_log, write_ensemble, EnsembleHeader, Prior, SamplerRun};

pub const ARCHIVE_FORMAT: &str = "gestalt-head/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitEntry {
    pub unit: usize,
    pub label: String,
    pub file: String,
    pub seed: u64,
    pub steps: usize,
    pub final_metric: f64,
    pub converged: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadManifest {
    pub format: String,
    pub provenance: HeadProvenance,
    pub units: Vec<UnitEntry>,
}

fn unit_file(k: usize) -> String {
    format!("unit_{k:03}.ens")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the archive; `labels[k]` names output unit `k`.
pub fn write_head_archive(dir: impl AsRef<Path>, head: &PosteriorHead, labels: &[String]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(head.fits.len());
    let mut summary = String::from("unit,label,steps,final_metric,converged,degenerate\n");
    for f in &head.fits {
        let label = labels.get(f.unit).cloned().unwrap_or_default();
        let file = unit_file(f.unit);
        let prior = Prior::isotropic(f.prior_mean.clone(), head.provenance.prior_scale)?;
        let run = SamplerRun {
            ensemble: f.ensemble.clone(),
            steps: f.steps,
            final_metric: f.final_metric,
            converged: f.converged,
            log: Vec::new(),
        };
        let mut header = EnsembleHeader::new(&run, &head.provenance.config, &prior);
        header.config.seed = f.seed;
        write_ensemble(dir.join(&file), &header, &f.ensemble)?;
        write_convergence_log(dir.join(format!("unit_{:03}.log.csv", f.unit)), &f.log)?;
        summary.push_str(&format!(
            "{},{},{},{:e},{},{}\n",
            f.unit, label, f.steps, f.final_metric, f.converged, f.degenerate
        ));
        entries.push(UnitEntry {
            unit: f.unit,
            label,
            file,
            seed: f.seed,
            steps: f.steps,
            final_metric: f.final_metric,
            converged: f.converged,
            degenerate: f.degenerate,
        });
    }
    let manifest = HeadManifest {
        format: ARCHIVE_FORMAT.to_string(),
        provenance: head.provenance.clone(),
        units: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&dir.join("manifest.json"), &(json + "\n"))?;
    write_text(&dir.join("convergence_summary.csv"), &summary)
}

/// Reads an archive back. Convergence logs are not reloaded.
pub fn read_head_archive(dir: impl AsRef<Path>) -> Result<PosteriorHead> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: HeadManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
    if manifest.format != ARCHIVE_FORMAT {
        return Err(Error::parse(path.display().to_string(), 0, format!("unknown format {}", manifest.format)));
    }
    let mut fits = Vec::with_capacity(manifest.units.len());
    for u in &manifest.units {
        let (ensemble, header) = read_ensemble(dir.join(&u.file))?;
        if header.step != u.steps {
            return Err(Error::parse(u.file.clone(), 0, "step count disagrees with manifest"));
        }
        fits.push(UnitFit {
            unit: u.unit,
            seed: u.seed,
            prior_mean: header.prior()?.mean,
            ensemble,
            steps: u.steps,
            final_metric: u.final_metric,
            converged: u.converged,
            degenerate: u.degenerate,
            log: Vec::new(),
        });
    }
    fits.sort_by_key(|f| f.unit);
    Ok(PosteriorHead {
        provenance: manifest.provenance,
        fits,
    })
}
