//! Per-word activation records and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use super::items::{TestItem, UnitClass};
use crate::corpus::{Lexicon, Role, Sentence};
use crate::error::{Error, Result};
use crate::head::PosteriorHead;
use crate::network::{predict_mle, FeatureMap, NetworkParams};

/// Role probes queried after each word.
pub const PROBES: [Role; 3] = [Role::Agent, Role::Action, Role::Patient];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Congruent,
    Reversal,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Congruent, Condition::Reversal];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Congruent => "congruent",
            Condition::Reversal => "reversal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn sentence(self, item: &TestItem) -> &Sentence {
        match self {
            Condition::Congruent => &item.congruent,
            Condition::Reversal => &item.reversal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub run: usize,
    pub item: usize,
    pub condition: Condition,
    /// 1-based word position; the activation after that word.
    pub position: usize,
    pub probe: Role,
    pub unit: usize,
    pub unit_label: String,
    pub unit_class: UnitClass,
    pub prior_scale: f64,
    pub mle: f64,
    pub bayes_mean: f64,
    /// Spread of the per-particle probabilities.
    pub bayes_sd: f64,
}

/// Probe input units for `role`.
fn probe_units(lexicon: &Lexicon, role: Role) -> Result<Vec<usize>> {
    lexicon
        .role_unit(role)
        .map(|f| vec![f.0])
        .ok_or_else(|| Error::Config(format!("lexicon has no probe unit for {role}")))
}

/// Feature vectors `ψ` after each word of `sentence`, one row per probe.
pub fn sentence_features(lexicon: &Lexicon, map: &FeatureMap, sentence: &Sentence) -> Result<Vec<Vec<DVector<f64>>>> {
    let steps: Vec<Vec<usize>> = sentence
        .constituents
        .iter()
        .map(|c| c.tokens.iter().map(|t| t.0).collect())
        .collect();
    let gestalts = map.gestalts_sparse(&steps);
    let probes = PROBES.iter().map(|&r| probe_units(lexicon, r)).collect::<Result<Vec<_>>>()?;
    Ok(gestalts
        .iter()
        .map(|g| probes.iter().map(|p| map.psi_from_gestalt(g, p)).collect())
        .collect())
}

/// Records for one trained model and one fitted head, in a fixed order:
/// item, condition, position, probe, unit.
pub fn collect_records(
    run: usize,
    lexicon: &Lexicon,
    params: &NetworkParams,
    map: &FeatureMap,
    head: &PosteriorHead,
    items: &[TestItem],
) -> Result<Vec<ActivationRecord>> {
    let labels = lexicon.inventory().labels();
    let mut out = Vec::new();
    for item in items {
        for condition in Condition::ALL {
            let features = sentence_features(lexicon, map, condition.sentence(item))?;
            for (w, per_probe) in features.iter().enumerate() {
                for (probe, psi) in PROBES.iter().zip(per_probe) {
                    for &(unit, class) in &item.tracked {
                        let (bayes_mean, bayes_sd) = head.predict_with_spread(psi, unit)?;
                        out.push(ActivationRecord {
                            run,
                            item: item.id,
                            condition,
                            position: w + 1,
                            probe: *probe,
                            unit,
                            unit_label: labels[unit].clone(),
                            unit_class: class,
                            prior_scale: head.provenance.prior_scale,
                            mle: predict_mle(params, psi, unit),
                            bayes_mean,
                            bayes_sd,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

pub const RECORDS_HEADER: &str =
    "run,item,condition,position,probe,unit,unit_label,unit_class,prior_scale,mle,bayes_mean,bayes_sd";

/// Floats use the shortest representation that round-trips.
pub fn records_to_csv(records: &[ActivationRecord]) -> String {
    let mut s = String::with_capacity(96 * (records.len() + 1));
    s.push_str(RECORDS_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:?},{:?},{:?},{:?}",
            r.run,
            r.item,
            r.condition.as_str(),
            r.position,
            r.probe.as_str(),
            r.unit,
            r.unit_label,
            r.unit_class.as_str(),
            r.prior_scale,
            r.mle,
            r.bayes_mean,
            r.bayes_sd
        );
    }
    s
}

pub fn records_from_csv(text: &str, origin: &str) -> Result<Vec<ActivationRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == RECORDS_HEADER => {}
        _ => return Err(Error::parse(origin, 1, "missing records header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::parse(origin, line_no, format!("expected 12 fields, got {}", f.len())));
        }
        let bad = |what: &str| Error::parse(origin, line_no, format!("bad {what}"));
        let int = |s: &str, what: &str| s.parse::<usize>().map_err(|_| bad(what));
        let real = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        out.push(ActivationRecord {
            run: int(f[0], "run")?,
            item: int(f[1], "item")?,
            condition: Condition::parse(f[2]).ok_or_else(|| bad("condition"))?,
            position: int(f[3], "position")?,
            probe: Role::parse(f[4]).ok_or_else(|| bad("probe"))?,
            unit: int(f[5], "unit")?,
            unit_label: f[6].to_string(),
            unit_class: UnitClass::parse(f[7]).ok_or_else(|| bad("unit class"))?,
            prior_scale: real(f[8], "prior scale")?,
            mle: real(f[9], "mle")?,
            bayes_mean: real(f[10], "bayes mean")?,
            bayes_sd: real(f[11], "bayes sd")?,
        });
    }
    Ok(out)
}

pub fn write_records(path: impl AsRef<Path>, records: &[ActivationRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, records_to_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ActivationRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    records_from_csv(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_lexicon, EventConfig, EventModel};
    use crate::experiments::items::{build_items, parse_items, tracked_units, DEFAULT_ITEMS};
    use crate::head::{HeadProvenance, UnitFit};
    use crate::network::{extract_feature_map, NetworkShape};
    use crate::rng::seeded;
    use crate::sampler::{Ensemble, SamplerConfig};
    use nalgebra::DMatrix;

    fn fixture() -> (Lexicon, NetworkParams, Vec<TestItem>, PosteriorHead) {
        let lex = default_lexicon();
        let model = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        let items = build_items(&lex, &model, &parse_items(DEFAULT_ITEMS).unwrap()).unwrap();
        let shape = NetworkShape { inputs: lex.len(), gestalt: 5, hidden: 4, outputs: lex.inventory().len() };
        let params = NetworkParams::init(shape, &mut seeded(3));
        let fits = tracked_units(&items)
            .into_iter()
            .map(|unit| {
                let row: Vec<f64> = params.theta.row(unit).iter().copied().collect();
                let mut particles = DMatrix::from_fn(5, 3, |i, _| row[i]);
                particles[(0, 0)] += 0.5;
                particles[(0, 2)] -= 0.5;
                UnitFit {
                    unit,
                    seed: 0,
                    prior_mean: DVector::from_vec(row),
                    ensemble: Ensemble { particles, step: 1 },
                    steps: 1,
                    final_metric: 0.0,
                    converged: true,
                    degenerate: false,
                    log: vec![],
                }
            })
            .collect();
        let head = PosteriorHead {
            provenance: HeadProvenance {
                checkpoint_sha256: String::new(),
                design_sha256: String::new(),
                design_size: 0,
                master_seed: 0,
                prior_scale: 1.0,
                config: SamplerConfig::default(),
            },
            fits,
        };
        (lex, params, items, head)
    }

    #[test]
    fn cardinality_and_bounds() {
        let (lex, params, items, head) = fixture();
        let map = extract_feature_map(&params);
        let recs = collect_records(0, &lex, &params, &map, &head, &items).unwrap();
        let expected: usize = items.iter().map(|i| 2 * i.congruent.len() * 3 * i.tracked.len()).sum();
        assert_eq!(recs.len(), expected);
        // 4-word items: one record per run, item, word, probe and condition for each tracked unit
        let woman = items[0].units_of(UnitClass::PlausibleAgent).next().unwrap();
        let n = recs.iter().filter(|r| r.item == 1 && r.unit == woman).count();
        assert_eq!(n, 4 * 3 * 2);
        for r in &recs {
            assert!((0.0..=1.0).contains(&r.mle) && (0.0..=1.0).contains(&r.bayes_mean));
            assert!(r.bayes_sd >= 0.0);
        }
    }

    #[test]
    fn mle_matches_forward_pass() {
        let (lex, params, items, head) = fixture();
        let map = extract_feature_map(&params);
        let recs = collect_records(0, &lex, &params, &map, &head, &items[..1]).unwrap();
        let r = recs
            .iter()
            .find(|r| r.condition == Condition::Reversal && r.position == 4 && r.probe == Role::Patient)
            .unwrap();
        let inputs: Vec<Vec<f64>> = (0..4).map(|w| items[0].reversal.input_vector(&lex, w)).collect();
        let probe = crate::corpus::role_probe(&lex, Role::Patient);
        let psi = map.psi(&inputs, &probe).unwrap();
        assert!((r.mle - predict_mle(&params, &psi, r.unit)).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let (lex, params, items, head) = fixture();
        let map = extract_feature_map(&params);
        let recs = collect_records(3, &lex, &params, &map, &head, &items[..2]).unwrap();
        let text = records_to_csv(&recs);
        assert_eq!(records_from_csv(&text, "t").unwrap(), recs);
        assert_eq!(records_to_csv(&records_from_csv(&text, "t").unwrap()), text);
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        let head = format!("{RECORDS_HEADER}\n");
        assert!(records_from_csv("", "t").is_err());
        assert!(records_from_csv(&(head.clone() + "1,2,3\n"), "t").is_err());
        let row = "0,1,sideways,1,agent,3,woman,action,1.0,0.5,0.5,0.0\n";
        assert!(records_from_csv(&(head + row), "t").is_err());
    }
}
