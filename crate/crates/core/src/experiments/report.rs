//! Report files: analysis tables as CSV, per-item bar charts as SVG and a
//! manifest of seeds and hashes. Output bytes depend only on the inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analysis::{item_analysis, model_analysis, prior_sweep, AnalysisTable, WordClass};
use super::items::{headline, TestItem, UnitClass};
use super::pipeline::{ExperimentConfig, RunSummary};
use super::records::{records_to_csv, ActivationRecord, Condition, PROBES};
use crate::corpus::Role;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::stats::{describe, StatsError, TestResult};

pub const REPORT_FORMAT: &str = "gestalt-report/1";
pub const TOOL_VERSION: &str = concat!("gestalt-core ", env!("CARGO_PKG_VERSION"));

pub const MLE_COLOR: &str = "#1f5fbf";
pub const BAYES_COLOR: &str = "#c8282d";

/// Writes through a sibling temporary file so a failed write leaves no
/// partial output at `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn fmt_p(r: &std::result::Result<TestResult, StatsError>) -> String {
    match r {
        Ok(t) => format!("{:.6e}", t.p),
        Err(_) => "NA".into(),
    }
}

fn fmt_t(r: &std::result::Result<TestResult, StatsError>) -> String {
    match r {
        Ok(t) => format!("{:.6}", t.t),
        Err(_) => "NA".into(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn row_key(class: WordClass) -> String {
    format!("{},{}", csv_field(class.label()), class.probe())
}

/// Tests against zero: `word_class,role_probe,mle_p_value,bayes_p_value`.
pub fn one_sample_csv(table: &AnalysisTable) -> String {
    let mut s = String::from("word_class,role_probe,mle_p_value,bayes_p_value\n");
    for r in &table.rows {
        let _ = writeln!(s, "{},{},{}", row_key(r.class), fmt_p(&r.mle_vs_zero), fmt_p(&r.bayes_vs_zero));
    }
    s
}

/// Paired Bayesian-minus-MLE tests: `word_class,role_probe,statistic,p_value`.
pub fn paired_csv(table: &AnalysisTable) -> String {
    let mut s = String::from("word_class,role_probe,statistic,p_value\n");
    for r in &table.rows {
        let _ = writeln!(s, "{},{},{}", row_key(r.class), fmt_t(&r.paired), fmt_p(&r.paired));
    }
    s
}

/// Column name for a prior scale: `0.01 → p_001`, `5 → p_5`.
pub fn scale_column(scale: f64) -> String {
    format!("p_{}", format!("{scale}").replace('.', ""))
}

/// Paired p-values per prior scale.
pub fn sweep_csv(tables: &[AnalysisTable]) -> String {
    let mut s = String::from("word_class,role_probe");
    for t in tables {
        s.push(',');
        s.push_str(&scale_column(t.prior_scale));
    }
    s.push('\n');
    for class in WordClass::ALL {
        s.push_str(&row_key(class));
        for t in tables {
            s.push(',');
            s.push_str(&fmt_p(&t.row(class).paired));
        }
        s.push('\n');
    }
    s
}

/// Every cell with descriptives, test statistics and the reason for a
/// missing test.
pub fn statistics_csv(tables: &[AnalysisTable]) -> String {
    let mut s = String::from("analysis,prior_scale,word_class,role_probe,test,n,mean,sd,statistic,df,p_value,error\n");
    for t in tables {
        for r in &t.rows {
            let cells = [
                ("mle_vs_zero", &r.mle, &r.mle_vs_zero),
                ("bayes_vs_zero", &r.bayes, &r.bayes_vs_zero),
                ("paired", &r.bayes, &r.paired),
            ];
            for (name, d, test) in cells {
                let sd = d.sd.map_or("NA".into(), |v| format!("{v:.6e}"));
                let (stat, df, p, err) = match test {
                    Ok(x) => (format!("{:.6}", x.t), x.df.to_string(), format!("{:.6e}", x.p), String::new()),
                    Err(e) => ("NA".into(), "NA".into(), "NA".into(), csv_field(&e.to_string())),
                };
                let _ = writeln!(
                    s,
                    "{},{},{},{name},{},{:.6e},{sd},{stat},{df},{p},{err}",
                    t.kind.as_str(),
                    t.prior_scale,
                    row_key(r.class),
                    d.n,
                    d.mean
                );
            }
        }
    }
    s
}

/// Sampler steps and ensemble spread per run and prior scale.
pub fn sweep_summary_csv(summaries: &[RunSummary]) -> String {
    let mut s = String::from("run,prior_scale,units,mean_steps,max_steps,converged,median_spread\n");
    for r in summaries {
        for c in &r.scales {
            let _ = writeln!(
                s,
                "{},{},{},{:.4},{},{},{:.6e}",
                r.run, c.prior_scale, c.units, c.mean_steps, c.max_steps, c.converged, c.median_spread
            );
        }
    }
    s
}

pub fn training_summary_csv(summaries: &[RunSummary]) -> String {
    let mut s = String::from("run,seed,best_epoch,epochs,held_out_accuracy\n");
    for r in summaries {
        let _ = writeln!(s, "{},{},{},{},{:.6}", r.run, r.seed, r.best_epoch, r.epochs, r.held_out_accuracy);
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Mean and sd over runs of one (position, probe, unit) cell.
type Bars = BTreeMap<(usize, Role, usize), ((f64, f64), (f64, f64))>;

fn bars(records: &[ActivationRecord], item: usize, condition: Condition, scale: f64) -> Bars {
    let mut vals: BTreeMap<(usize, Role, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if r.item == item && r.condition == condition && r.prior_scale == scale {
            let e = vals.entry((r.position, r.probe, r.unit)).or_default();
            e.0.push(r.mle);
            e.1.push(r.bayes_mean);
        }
    }
    vals.into_iter()
        .map(|(k, (m, b))| {
            let (dm, db) = (describe(&m), describe(&b));
            (k, ((dm.mean, dm.sd.unwrap_or(0.0)), (db.mean, db.sd.unwrap_or(0.0))))
        })
        .collect()
}

/// Grouped bar chart: one panel per word position (rows) and role probe
/// (columns); MLE and Bayesian bars per tracked unit with sd whiskers over
/// runs.
pub fn item_figure(item: &TestItem, condition: Condition, records: &[ActivationRecord], scale: f64) -> String {
    let units: Vec<(usize, UnitClass)> = item
        .tracked
        .iter()
        .copied()
        .filter(|(_, c)| *c != UnitClass::NonRelevant)
        .collect();
    let labels: BTreeMap<usize, &str> = records
        .iter()
        .filter(|r| r.item == item.id)
        .map(|r| (r.unit, r.unit_label.as_str()))
        .collect();
    let data = bars(records, item.id, condition, scale);
    let sentence = condition.sentence(item);
    let words = sentence.texts();

    let (bar, gap, pad) = (14.0, 10.0, 36.0);
    let panel_w = units.len() as f64 * (2.0 * bar + gap) + gap;
    let panel_h = 120.0;
    let (left, top, row_gap, col_gap) = (150.0, 56.0, 48.0, 24.0);
    let width = left + PROBES.len() as f64 * (panel_w + col_gap) + pad;
    let height = top + words.len() as f64 * (panel_h + row_gap) + pad;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" font-size="15" font-weight="bold" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(&headline(sentence))
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="30" width="10" height="10" fill="{MLE_COLOR}"/><text x="{:.0}" y="39">MLE</text><rect x="{:.0}" y="30" width="10" height="10" fill="{BAYES_COLOR}"/><text x="{:.0}" y="39">Bayesian (prior scale {scale})</text>"#,
        left + 14.0,
        left + 60.0,
        left + 74.0
    );
    for (c, probe) in PROBES.iter().enumerate() {
        let x0 = left + c as f64 * (panel_w + col_gap);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{} probe</text>"#,
            x0 + panel_w / 2.0,
            top - 2.0,
            probe
        );
    }
    for (w, word) in words.iter().enumerate() {
        let y0 = top + 8.0 + w as f64 * (panel_h + row_gap);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">after "{}"</text>"#,
            left - 12.0,
            y0 + panel_h / 2.0,
            escape(word)
        );
        for (c, probe) in PROBES.iter().enumerate() {
            let x0 = left + c as f64 * (panel_w + col_gap);
            let base = y0 + panel_h;
            let _ = writeln!(
                s,
                r##"<rect x="{x0:.1}" y="{y0:.1}" width="{panel_w:.1}" height="{panel_h:.1}" fill="none" stroke="#999"/>"##
            );
            for (tick, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
                let y = base - tick * panel_h;
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#999"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="9">{label}</text>"##,
                    x0 - 3.0,
                    x0 - 5.0,
                    y + 3.0
                );
            }
            for (u, &(unit, _)) in units.iter().enumerate() {
                let gx = x0 + gap + u as f64 * (2.0 * bar + gap);
                if let Some(&(mle, bayes)) = data.get(&(w + 1, *probe, unit)) {
                    for (i, ((mean, sd), color)) in [(mle, MLE_COLOR), (bayes, BAYES_COLOR)].into_iter().enumerate() {
                        let x = gx + i as f64 * bar;
                        let h = mean.clamp(0.0, 1.0) * panel_h;
                        let _ = writeln!(
                            s,
                            r#"<rect x="{x:.1}" y="{:.1}" width="{bar:.1}" height="{h:.1}" fill="{color}"/>"#,
                            base - h
                        );
                        let hi = base - (mean + sd).clamp(0.0, 1.0) * panel_h;
                        let lo = base - (mean - sd).clamp(0.0, 1.0) * panel_h;
                        let cx = x + bar / 2.0;
                        let _ = writeln!(
                            s,
                            r#"<path d="M{cx:.1} {hi:.1}V{lo:.1}M{:.1} {hi:.1}H{:.1}M{:.1} {lo:.1}H{:.1}" stroke="black"/>"#,
                            cx - 3.0,
                            cx + 3.0,
                            cx - 3.0,
                            cx + 3.0
                        );
                    }
                }
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{}</text>"#,
                    gx + bar,
                    base + 12.0,
                    escape(labels.get(&unit).copied().unwrap_or("?"))
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub format: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub run_seeds: Vec<(usize, u64)>,
    pub records_sha256: String,
    pub files: Vec<FileEntry>,
}

/// Tables, figures and manifest for `records`; returns the written paths.
pub fn emit_reports(
    out_dir: impl AsRef<Path>,
    records: &[ActivationRecord],
    summaries: &[RunSummary],
    items: &[TestItem],
    config: &ExperimentConfig,
) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir.join("figures")).map_err(|e| Error::io(dir, e))?;

    let scales: Vec<f64> = config
        .prior_scales
        .iter()
        .copied()
        .filter(|s| records.iter().any(|r| r.prior_scale == *s))
        .collect();
    let model = model_analysis(records, config.main_scale)?;
    let item = item_analysis(records, config.main_scale)?;
    let sweep = prior_sweep(records, &scales)?;
    let mut all = vec![model.clone(), item.clone()];
    all.extend(sweep.iter().cloned());

    let records_csv = records_to_csv(records);
    let mut files: Vec<(String, String)> = vec![
        ("records.csv".into(), records_csv.clone()),
        ("model_one_sample.csv".into(), one_sample_csv(&model)),
        ("model_paired.csv".into(), paired_csv(&model)),
        ("item_one_sample.csv".into(), one_sample_csv(&item)),
        ("item_paired.csv".into(), paired_csv(&item)),
        ("prior_sweep.csv".into(), sweep_csv(&sweep)),
        ("statistics.csv".into(), statistics_csv(&all)),
        ("sweep_summary.csv".into(), sweep_summary_csv(summaries)),
        ("training_summary.csv".into(), training_summary_csv(summaries)),
    ];
    for it in items {
        for c in Condition::ALL {
            files.push((
                format!("figures/item{}_{}.svg", it.id, c.as_str()),
                item_figure(it, c, records, config.main_scale),
            ));
        }
    }

    let mut written = Vec::with_capacity(files.len() + 1);
    let mut entries = Vec::with_capacity(files.len());
    for (name, body) in &files {
        let path = dir.join(name);
        write_atomic(&path, body)?;
        entries.push(FileEntry {
            name: name.clone(),
            sha256: sha256_hex(body),
        });
        written.push(path);
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = ReportManifest {
        format: REPORT_FORMAT.into(),
        tool_version: TOOL_VERSION.into(),
        master_seed: config.master_seed,
        config_sha256: config.digest(),
        config: config.clone(),
        run_seeds: summaries.iter().map(|r| (r.run, r.seed)).collect(),
        records_sha256: sha256_hex(&records_csv),
        files: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))? + "\n";
    let path = dir.join("manifest.json");
    write_atomic(&path, json)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_lexicon, EventConfig, EventModel};
    use crate::experiments::items::{build_items, parse_items, DEFAULT_ITEMS};
    use crate::experiments::pipeline::ScaleSummary;

    fn items() -> Vec<TestItem> {
        let lex = default_lexicon();
        let model = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        build_items(&lex, &model, &parse_items(DEFAULT_ITEMS).unwrap()).unwrap()
    }

    /// Records for every item, word, probe and unit with values varying by
    /// run so that no cell is degenerate.
    fn records(items: &[TestItem], runs: usize, scales: &[f64]) -> Vec<ActivationRecord> {
        let mut out = Vec::new();
        for run in 0..runs {
            for &scale in scales {
                for it in items {
                    for c in Condition::ALL {
                        for pos in 1..=4 {
                            for probe in PROBES {
                                for &(unit, class) in &it.tracked {
                                    let base = 0.01 * ((run * 7 + it.id * 3 + pos + unit) % 11) as f64;
                                    out.push(ActivationRecord {
                                        run,
                                        item: it.id,
                                        condition: c,
                                        position: pos,
                                        probe,
                                        unit,
                                        unit_label: format!("u{unit}"),
                                        unit_class: class,
                                        prior_scale: scale,
                                        mle: base,
                                        bayes_mean: base + 0.001 * (run as f64 + scale),
                                        bayes_sd: 0.01,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn summaries(runs: usize) -> Vec<RunSummary> {
        (0..runs)
            .map(|run| RunSummary {
                run,
                seed: 100 + run as u64,
                best_epoch: 3,
                epochs: 8,
                held_out_accuracy: 0.99,
                scales: vec![ScaleSummary {
                    prior_scale: 1.0,
                    units: 17,
                    mean_steps: 30.5,
                    max_steps: 33,
                    converged: 17,
                    median_spread: 1e-3,
                }],
            })
            .collect()
    }

    #[test]
    fn table_schemas() {
        let it = items();
        let recs = records(&it, 4, &[0.01, 1.0, 5.0]);
        let t = model_analysis(&recs, 1.0).unwrap();
        let csv = one_sample_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        for l in &lines {
            assert_eq!(l.split(',').count(), 4, "{l}");
        }
        assert!(lines[1].starts_with("Syntactically indicated agents,agent,"));
        assert!(lines[2].starts_with("Semantically plausible agents,patient,"));
        assert!(lines[3].starts_with("All non-relevant patients,agent,"));
        assert_eq!(paired_csv(&t).lines().next().unwrap(), "word_class,role_probe,statistic,p_value");
        let sweep = prior_sweep(&recs, &[0.01, 1.0, 5.0]).unwrap();
        assert_eq!(sweep_csv(&sweep).lines().next().unwrap(), "word_class,role_probe,p_001,p_1,p_5");
    }

    #[test]
    fn degenerate_cells_are_na() {
        let it = items();
        let mut recs = records(&it, 3, &[1.0]);
        for r in &mut recs {
            r.mle = 0.0;
            r.bayes_mean = 0.0;
        }
        let t = model_analysis(&recs, 1.0).unwrap();
        for line in one_sample_csv(&t).lines().skip(1) {
            assert!(line.ends_with("NA,NA"));
        }
        assert!(statistics_csv(&[t]).contains("zero variance"));
    }

    #[test]
    fn figure_has_both_series() {
        let it = items();
        let recs = records(&it, 3, &[1.0]);
        let svg = item_figure(&it[0], Condition::Congruent, &recs, 1.0);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("During dinner, woman eats pizza"));
        assert!(svg.contains(&format!("fill=\"{MLE_COLOR}\"")));
        assert!(svg.contains(&format!("fill=\"{BAYES_COLOR}\"")));
        // 4 words x 3 probes x 3 units x 2 series
        assert_eq!(svg.matches("stroke=\"black\"").count(), 72);
    }

    #[test]
    fn reports_are_byte_identical() {
        let it = items();
        let recs = records(&it, 3, &[0.01, 1.0, 5.0]);
        let sums = summaries(3);
        let config = ExperimentConfig::default();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = emit_reports(a.path(), &recs, &sums, &it, &config).unwrap();
        emit_reports(b.path(), &recs, &sums, &it, &config).unwrap();
        assert_eq!(fa.len(), 9 + 16 + 1);
        for p in &fa {
            let rel = p.strip_prefix(a.path()).unwrap();
            assert_eq!(std::fs::read(p).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{rel:?}");
        }
        let leftovers = std::fs::read_dir(a.path()).unwrap().filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp")
        });
        assert_eq!(leftovers.count(), 0);
    }

    #[test]
    fn scale_columns() {
        assert_eq!(scale_column(0.01), "p_001");
        assert_eq!(scale_column(1.0), "p_1");
        assert_eq!(scale_column(5.0), "p_5");
    }
}
