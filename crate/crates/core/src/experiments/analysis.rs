//! Model and item analyses of the reversal-anomaly activations.
//!
//! Every cell is a pure function of the activation records: the activation
//! after the final word of the reversal sentence, averaged over the units of
//! the word class, then over items (model analysis) or runs (item analysis).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::items::UnitClass;
use super::records::{ActivationRecord, Condition};
use crate::corpus::Role;
use crate::error::{Error, Result};
use crate::stats::{describe, one_sample_t, paired_t, Description, Sample, StatsError, TestResult};

/// Significance level for the tests against zero.
pub const ALPHA_ONE_SAMPLE: f64 = 0.05;
/// Significance level for the paired and prior-sweep tests.
pub const ALPHA_PAIRED: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WordClass {
    /// The reversed patient, now in subject position, probed as agent.
    SyntacticAgents,
    /// The reversed agent, now in object position, probed as patient.
    PlausibleAgents,
    /// Patients the action never takes, probed as agent.
    NonRelevantPatients,
}

impl WordClass {
    pub const ALL: [WordClass; 3] = [
        WordClass::SyntacticAgents,
        WordClass::PlausibleAgents,
        WordClass::NonRelevantPatients,
    ];

    pub fn label(self) -> &'static str {
        match self {
            WordClass::SyntacticAgents => "Syntactically indicated agents",
            WordClass::PlausibleAgents => "Semantically plausible agents",
            WordClass::NonRelevantPatients => "All non-relevant patients",
        }
    }

    pub fn probe(self) -> Role {
        match self {
            WordClass::SyntacticAgents | WordClass::NonRelevantPatients => Role::Agent,
            WordClass::PlausibleAgents => Role::Patient,
        }
    }

    pub fn unit_class(self) -> UnitClass {
        match self {
            WordClass::SyntacticAgents => UnitClass::SyntacticAgent,
            WordClass::PlausibleAgents => UnitClass::PlausibleAgent,
            WordClass::NonRelevantPatients => UnitClass::NonRelevant,
        }
    }

    /// Expected sign of the Bayesian-minus-MLE difference.
    pub fn expected_sign(self) -> f64 {
        match self {
            WordClass::NonRelevantPatients => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalysisKind {
    /// Items averaged within each run; `n` = runs.
    Model,
    /// Runs averaged for each item; `n` = items.
    Item,
}

impl AnalysisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnalysisKind::Model => "model",
            AnalysisKind::Item => "item",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub class: WordClass,
    pub mle: Description,
    pub bayes: Description,
    pub mle_vs_zero: std::result::Result<TestResult, StatsError>,
    pub bayes_vs_zero: std::result::Result<TestResult, StatsError>,
    /// Bayesian minus MLE.
    pub paired: std::result::Result<TestResult, StatsError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisTable {
    pub kind: AnalysisKind,
    pub prior_scale: f64,
    /// In [`WordClass::ALL`] order.
    pub rows: Vec<AnalysisRow>,
}

impl AnalysisTable {
    pub fn row(&self, class: WordClass) -> &AnalysisRow {
        self.rows.iter().find(|r| r.class == class).expect("every class has a row")
    }
}

/// `(run, item) → (mle, bayes)` for one word class, final word of the
/// reversal sentence.
pub fn cell_values(
    records: &[ActivationRecord],
    prior_scale: f64,
    class: WordClass,
) -> BTreeMap<(usize, usize), (f64, f64)> {
    let mut last: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records {
        if r.condition == Condition::Reversal {
            let e = last.entry(r.item).or_insert(0);
            *e = (*e).max(r.position);
        }
    }
    let mut sums: BTreeMap<(usize, usize), (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        if r.condition == Condition::Reversal
            && r.prior_scale == prior_scale
            && r.probe == class.probe()
            && r.unit_class == class.unit_class()
            && Some(&r.position) == last.get(&r.item)
        {
            let e = sums.entry((r.run, r.item)).or_insert((0.0, 0.0, 0));
            e.0 += r.mle;
            e.1 += r.bayes_mean;
            e.2 += 1;
        }
    }
    sums.into_iter()
        .map(|(k, (m, b, n))| (k, (m / n as f64, b / n as f64)))
        .collect()
}

fn aggregate(cells: &BTreeMap<(usize, usize), (f64, f64)>, kind: AnalysisKind) -> (Vec<f64>, Vec<f64>) {
    let mut groups: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for (&(run, item), &(m, b)) in cells {
        let key = match kind {
            AnalysisKind::Model => run,
            AnalysisKind::Item => item,
        };
        let e = groups.entry(key).or_insert((0.0, 0.0, 0));
        e.0 += m;
        e.1 += b;
        e.2 += 1;
    }
    groups
        .values()
        .map(|&(m, b, n)| (m / n as f64, b / n as f64))
        .unzip()
}

/// One table at one prior scale.
pub fn analyse(records: &[ActivationRecord], prior_scale: f64, kind: AnalysisKind) -> Result<AnalysisTable> {
    let mut rows = Vec::with_capacity(3);
    for class in WordClass::ALL {
        let cells = cell_values(records, prior_scale, class);
        if cells.is_empty() {
            return Err(Error::Config(format!(
                "no reversal records for {} at prior scale {prior_scale}",
                class.label()
            )));
        }
        let (mle, bayes) = aggregate(&cells, kind);
        let label = format!("{} ({})", class.label(), class.probe());
        let ms = Sample::new(format!("{label} MLE"), mle);
        let bs = Sample::new(format!("{label} Bayes"), bayes);
        rows.push(AnalysisRow {
            class,
            mle: describe(&ms.values),
            bayes: describe(&bs.values),
            mle_vs_zero: one_sample_t(&ms, 0.0),
            bayes_vs_zero: one_sample_t(&bs, 0.0),
            paired: paired_t(&bs, &ms),
        });
    }
    Ok(AnalysisTable {
        kind,
        prior_scale,
        rows,
    })
}

pub fn model_analysis(records: &[ActivationRecord], prior_scale: f64) -> Result<AnalysisTable> {
    analyse(records, prior_scale, AnalysisKind::Model)
}

pub fn item_analysis(records: &[ActivationRecord], prior_scale: f64) -> Result<AnalysisTable> {
    analyse(records, prior_scale, AnalysisKind::Item)
}

/// Model analysis at each prior scale.
pub fn prior_sweep(records: &[ActivationRecord], scales: &[f64]) -> Result<Vec<AnalysisTable>> {
    scales.iter().map(|&s| model_analysis(records, s)).collect()
}

fn p_of(r: &std::result::Result<TestResult, StatsError>) -> Option<f64> {
    r.as_ref().ok().map(|t| t.p)
}

/// Tests against zero: MLE never significant; Bayesian significant for the
/// reversed words only.
pub fn one_sample_pattern(table: &AnalysisTable) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    for row in &table.rows {
        let name = row.class.label();
        let mle_ok = p_of(&row.mle_vs_zero).is_some_and(|p| p > ALPHA_ONE_SAMPLE);
        out.push((format!("{name}: MLE p > {ALPHA_ONE_SAMPLE}"), mle_ok));
        let (want_sig, relation) = match row.class {
            WordClass::NonRelevantPatients => (false, ">"),
            _ => (true, "<"),
        };
        let bayes_ok = p_of(&row.bayes_vs_zero).is_some_and(|p| (p < ALPHA_ONE_SAMPLE) == want_sig);
        out.push((format!("{name}: Bayes p {relation} {ALPHA_ONE_SAMPLE}"), bayes_ok));
    }
    out
}

/// Paired Bayesian-minus-MLE t signs are (+, +, −).
pub fn paired_sign_pattern(table: &AnalysisTable) -> Vec<(String, bool)> {
    table
        .rows
        .iter()
        .map(|row| {
            let sign = if row.class.expected_sign() > 0.0 { '+' } else { '-' };
            let ok = row
                .paired
                .as_ref()
                .is_ok_and(|t| t.t * row.class.expected_sign() > 0.0);
            (format!("{}: paired t {sign}", row.class.label()), ok)
        })
        .collect()
}

/// Paired tests significant at [`ALPHA_PAIRED`] on every row, or on none.
pub fn paired_significance(table: &AnalysisTable, significant: bool) -> Vec<(String, bool)> {
    let relation = if significant { "<" } else { ">" };
    table
        .rows
        .iter()
        .map(|row| {
            let ok = p_of(&row.paired).is_some_and(|p| (p < ALPHA_PAIRED) == significant);
            (
                format!("{} at scale {}: paired p {relation} {ALPHA_PAIRED}", row.class.label(), table.prior_scale),
                ok,
            )
        })
        .collect()
}
