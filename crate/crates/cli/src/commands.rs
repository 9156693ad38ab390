//! One function per subcommand. Each writes its artifacts plus a manifest
//! holding the full configuration, the seeds and hashes of inputs and
//! outputs, which is enough to rerun it bit-identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gestalt_core::corpus::{generate_corpus, read_corpus, write_corpus, Corpus, Lexicon, ProbeMode};
use gestalt_core::digest::{json_sha256, sha256_hex};
use gestalt_core::experiments::report::{FileEntry, ReportManifest, TOOL_VERSION};
use gestalt_core::experiments::{
    emit_reports, model_analysis, read_records, run_conditions, write_atomic, AnalysisTable,
    ExperimentConfig, RunSummary,
};
use gestalt_core::head::{build_design, fit_head, write_head_archive, HeadFit};
use gestalt_core::network::{
    examples_from_sentences, extract_feature_map, read_checkpoint, train_mle, write_checkpoint, TrainConfig,
};
use gestalt_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
struct CommandManifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    master_seed: u64,
    config_sha256: String,
    seeds: BTreeMap<&'a str, u64>,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    config: &'a RunConfig,
}

fn file_entry(path: &Path, root: &Path) -> Result<FileEntry> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileEntry {
        name: path.strip_prefix(root).unwrap_or(path).display().to_string(),
        sha256: sha256_hex(bytes),
    })
}

fn write_manifest(
    path: &Path,
    command: &str,
    config: &RunConfig,
    seeds: BTreeMap<&str, u64>,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<()> {
    let root = &config.paths.out_dir;
    let manifest = CommandManifest {
        command,
        tool_version: TOOL_VERSION,
        master_seed: config.master_seed,
        config_sha256: json_sha256(config),
        seeds,
        inputs: inputs.iter().map(|p| file_entry(p, root)).collect::<Result<_>>()?,
        outputs: outputs.iter().map(|p| file_entry(p, root)).collect::<Result<_>>()?,
        config,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))? + "\n";
    write_atomic(path, json)
}

/// Runs `write` against a sibling temporary path and renames on success,
/// so `path` never holds a partial file.
fn via_temp(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("partial");
    match write(&tmp) {
        Ok(()) => std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e)),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn corpus_path(config: &RunConfig) -> PathBuf {
    config.paths.out_dir.join("corpus.jsonl")
}

pub fn checkpoint_path(config: &RunConfig) -> PathBuf {
    config.paths.out_dir.join("model.ckpt")
}

pub fn head_dir(config: &RunConfig) -> PathBuf {
    config.paths.out_dir.join("head")
}

fn exp(config: &RunConfig) -> ExperimentConfig {
    config.experiment_config(vec![config.head.prior_scale])
}

pub fn gen_corpus(config: &RunConfig) -> Result<()> {
    let lex = config.lexicon()?;
    let model = config.event_model(&lex)?;
    let seed = exp(config).corpus_seed();
    let corpus = generate_corpus(&lex, &model, seed, config.corpus.size, ProbeMode::Role)?;
    create_dir(&config.paths.out_dir)?;
    let path = corpus_path(config);
    via_temp(&path, |tmp| write_corpus(tmp, &lex, &corpus))?;

    let mut lengths: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &corpus.sentences {
        *lengths.entry(s.len()).or_default() += 1;
    }
    println!("wrote {} sentences to {}", corpus.len(), path.display());
    println!("constituents  sentences");
    for (len, n) in &lengths {
        println!("{len:>12}  {n:>9}");
    }
    write_manifest(
        &config.paths.out_dir.join("corpus.manifest.json"),
        "gen-corpus",
        config,
        BTreeMap::from([("corpus", seed)]),
        &[],
        &[path],
    )
}

fn load_corpus(config: &RunConfig, lex: &Lexicon) -> Result<(Corpus, PathBuf)> {
    let path = corpus_path(config);
    if !path.is_file() {
        return Err(Error::Config(format!("{} not found; run gen-corpus first", path.display())));
    }
    Ok((read_corpus(&path, lex)?, path))
}

pub fn train(config: &RunConfig) -> Result<()> {
    let lex = config.lexicon()?;
    let (corpus, corpus_file) = load_corpus(config, &lex)?;
    let examples = examples_from_sentences(&lex, &corpus.sentences, ProbeMode::Role);
    let train = TrainConfig {
        seed: exp(config).train_seed(0),
        ..config.train.clone()
    };
    let (params, log) = train_mle(&examples, lex.len(), lex.inventory().len(), &train)?;
    let ckpt = checkpoint_path(config);
    via_temp(&ckpt, |tmp| write_checkpoint(tmp, &params, train.seed, &json_sha256(&train)))?;
    let log_path = config.paths.out_dir.join("training.csv");
    via_temp(&log_path, |tmp| log.write_csv(tmp))?;
    let best = log.best();
    println!(
        "trained {} epochs (best {}, early stop {}); held-out loss {:.5}, accuracy {:.4}",
        log.epochs.len(),
        log.best_epoch,
        log.stopped_early,
        best.test_loss,
        best.test_acc
    );
    write_manifest(
        &config.paths.out_dir.join("model.manifest.json"),
        "train",
        config,
        BTreeMap::from([("train", train.seed)]),
        &[corpus_file],
        &[ckpt, log_path],
    )
}

pub fn fit_bayes(config: &RunConfig) -> Result<()> {
    let lex = config.lexicon()?;
    let (corpus, corpus_file) = load_corpus(config, &lex)?;
    let ckpt = checkpoint_path(config);
    let (params, _) = read_checkpoint(&ckpt)?;
    let examples = examples_from_sentences(&lex, &corpus.sentences, ProbeMode::Role);
    let e = exp(config);
    let map = extract_feature_map(&params);
    let bundle = build_design(&examples, &map, lex.inventory().len(), config.head.design_size, e.design_seed(0))?;
    let units: Vec<usize> = match &config.head.units {
        Some(u) => u.clone(),
        None => (0..lex.inventory().len()).collect(),
    };
    let ckpt_hash = sha256_hex(std::fs::read(&ckpt).map_err(|err| Error::io(&ckpt, err))?);
    log::info!("fitting {} output units at prior scale {}", units.len(), config.head.prior_scale);
    let HeadFit { head, failures } =
        fit_head(&bundle, &params, &units, &config.sampler, config.head.prior_scale, e.head_seed(0), &ckpt_hash);

    // successful units are persisted even when others failed
    let dir = head_dir(config);
    let staging = config.paths.out_dir.join("head.partial");
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|err| Error::io(&staging, err))?;
    }
    write_head_archive(&staging, &head, lex.inventory().labels())?;
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|err| Error::io(&dir, err))?;
    }
    std::fs::rename(&staging, &dir).map_err(|err| Error::io(&dir, err))?;

    let steps: Vec<usize> = head.fits.iter().map(|f| f.steps).collect();
    println!(
        "fitted {} units at P_prior = {}·I: steps min {} / mean {:.1} / max {} (limit {}), {} converged, {} degenerate",
        head.fits.len(),
        config.head.prior_scale,
        steps.iter().min().copied().unwrap_or(0),
        steps.iter().sum::<usize>() as f64 / steps.len().max(1) as f64,
        steps.iter().max().copied().unwrap_or(0),
        config.sampler.max_steps,
        head.fits.iter().filter(|f| f.converged).count(),
        head.fits.iter().filter(|f| f.degenerate).count()
    );
    write_manifest(
        &config.paths.out_dir.join("head.manifest.json"),
        "fit-bayes",
        config,
        BTreeMap::from([("design", e.design_seed(0)), ("head", e.head_seed(0))]),
        &[corpus_file, ckpt],
        &[dir.join("manifest.json"), dir.join("convergence_summary.csv")],
    )?;
    match failures.into_iter().next() {
        Some(first) => {
            eprintln!("{} of {} units failed; the archive holds the rest", units.len() - head.fits.len(), units.len());
            Err(first)
        }
        None => Ok(()),
    }
}

fn print_summary(t: &AnalysisTable) {
    let fmt = |r: &std::result::Result<gestalt_core::stats::TestResult, gestalt_core::stats::StatsError>| match r {
        Ok(x) => format!("t {:>8.3}  p {:.3e}", x.t, x.p),
        Err(e) => format!("{e}"),
    };
    println!("model analysis at prior scale {}:", t.prior_scale);
    for r in &t.rows {
        println!(
            "  {:<31} {:<7}  MLE vs 0: {}  Bayes vs 0: {}  paired: {}",
            r.class.label(),
            r.class.probe(),
            fmt(&r.mle_vs_zero),
            fmt(&r.bayes_vs_zero),
            fmt(&r.paired)
        );
    }
}

const RUNS_FILE: &str = "runs.json";

/// Full experiment into `<out>/<name>`: per-run checkpoints and heads,
/// records, tables, figures and manifests.
pub fn evaluate(config: &RunConfig, name: &str, prior_scales: Vec<f64>) -> Result<()> {
    let lex = config.lexicon()?;
    let model = config.event_model(&lex)?;
    let items = config.items(&lex, &model)?;
    let e = config.experiment_config(prior_scales);
    let out = run_conditions(&lex, &model, &items, &e)?;
    for (r, err) in &out.failures {
        eprintln!("run {r} failed and is excluded: {err}");
    }
    let dir = config.paths.out_dir.join(name);
    for run in &out.runs {
        let rd = dir.join("runs").join(format!("run_{:02}", run.summary.run));
        create_dir(&rd)?;
        write_checkpoint(rd.join("model.ckpt"), &run.params, e.train_seed(run.summary.run), &json_sha256(&e.train))?;
        run.training.write_csv(rd.join("training.csv"))?;
        for head in &run.heads {
            write_head_archive(rd.join(format!("head_scale_{}", head.provenance.prior_scale)), head, lex.inventory().labels())?;
        }
    }
    let records = out.records();
    let summaries = out.summaries();
    let written = emit_reports(&dir, &records, &summaries, &items, &e)?;
    let runs_json = serde_json::to_string_pretty(&summaries).map_err(|err| Error::Config(err.to_string()))? + "\n";
    write_atomic(dir.join(RUNS_FILE), runs_json)?;
    print_summary(&model_analysis(&records, e.main_scale)?);
    println!("wrote {} report files to {}", written.len(), dir.display());
    let seeds: BTreeMap<&str, u64> = BTreeMap::from([("corpus", e.corpus_seed())]);
    let mut outputs = written;
    outputs.push(dir.join(RUNS_FILE));
    write_manifest(&dir.join("command.json"), name, config, seeds, &[], &outputs)
}

/// Rebuilds tables and figures from a directory written by `eval`.
pub fn report(config: &RunConfig, input: &Path) -> Result<()> {
    let manifest_path = input.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: ReportManifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(manifest_path.display().to_string(), e.line(), e.to_string()))?;
    let records = read_records(input.join("records.csv"))?;
    let runs_path = input.join(RUNS_FILE);
    let text = std::fs::read_to_string(&runs_path).map_err(|e| Error::io(&runs_path, e))?;
    let summaries: Vec<RunSummary> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(runs_path.display().to_string(), e.line(), e.to_string()))?;
    let lex = config.lexicon()?;
    let model = config.event_model(&lex)?;
    let items = config.items(&lex, &model)?;
    let written = emit_reports(input, &records, &summaries, &items, &manifest.config)?;
    print_summary(&model_analysis(&records, manifest.config.main_scale)?);
    println!("rewrote {} report files in {}", written.len(), input.display());
    Ok(())
}
