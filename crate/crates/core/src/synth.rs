//! Synthetic lab-event corpora with a known set of informative items.
//!
//! Every patient is alive or dead at a fixed rate. Planted items are present
//! for most patients and draw both their values and their test counts from
//! disjoint class-conditional ranges. All other items are sparse noise whose
//! values and counts ignore the class.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ingest::{LabCatalog, LabEvent, LabItem, OutcomeRecord, Outcomes};
use crate::rng::{stream, stream_rng};

pub const EVENTS_FILE: &str = "labevents.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const ITEMS_FILE: &str = "labitems.csv";
pub const PLANTED_FILE: &str = "planted.txt";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid corpus configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub patients: usize,
    pub items: usize,
    pub informative: usize,
    pub dead_fraction: f64,
    /// Presence probability of each planted item.
    pub planted_presence: f64,
    /// Share of noise-item events reported as text without a numeric value.
    pub text_fraction: f64,
    pub first_item_id: u64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            patients: 3000,
            items: 700,
            informative: 10,
            dead_fraction: 0.3,
            planted_presence: 0.85,
            text_fraction: 0.02,
            first_item_id: 50001,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.patients == 0 || self.items == 0 {
            return bad("need at least one patient and one item".into());
        }
        if self.informative > self.items {
            return bad(format!("{} informative items exceed {} items", self.informative, self.items));
        }
        for (name, v) in [
            ("dead fraction", self.dead_fraction),
            ("planted presence", self.planted_presence),
            ("text fraction", self.text_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub events: Vec<LabEvent>,
    pub outcomes: Outcomes,
    pub catalog: LabCatalog,
    /// Planted item ids, ascending.
    pub planted: Vec<u64>,
}

enum ItemModel {
    Noise { presence: f64, value: Normal<f64>, max_count: u32 },
    Planted { alive: (f64, f64), dead: (f64, f64) },
}

fn two_decimals(x: f64) -> (String, f64) {
    let s = format!("{x:.2}");
    let v = s.parse().unwrap_or(x);
    (s, v)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::SYNTH);
    let item_ids: Vec<u64> = (0..cfg.items as u64).map(|i| cfg.first_item_id + i).collect();
    let mut planted_idx = sample(&mut rng, cfg.items, cfg.informative).into_vec();
    planted_idx.sort_unstable();

    let mut models = Vec::with_capacity(cfg.items);
    for i in 0..cfg.items {
        let mu: f64 = rng.random_range(1.0..200.0);
        if planted_idx.binary_search(&i).is_ok() {
            let width = mu * rng.random_range(0.2..0.5);
            let low = (mu - width, mu);
            let high = (mu + 0.1 * width, mu + width);
            let (alive, dead) = if rng.random_bool(0.5) { (low, high) } else { (high, low) };
            models.push(ItemModel::Planted { alive, dead });
        } else {
            let sd = mu * rng.random_range(0.05..0.3);
            models.push(ItemModel::Noise {
                presence: rng.random_range(0.01..0.2),
                value: Normal::new(mu, sd).expect("positive sd"),
                max_count: rng.random_range(1..=3),
            });
        }
    }

    let mut catalog = LabCatalog::default();
    for &id in &item_ids {
        catalog
            .insert(LabItem {
                item_id: id,
                test_name: format!("TEST {id}"),
                fluid: "BLOOD".into(),
                category: if id % 2 == 0 { "CHEMISTRY" } else { "HEMATOLOGY" }.into(),
                loinc_code: None,
                loinc_description: None,
            })
            .expect("item ids are distinct");
    }

    let epoch = NaiveDate::from_ymd_opt(2800, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut outcomes = Outcomes::new();
    let mut events = Vec::new();
    for p in 0..cfg.patients {
        let subject_id = p as u64 + 1;
        let died = rng.random_bool(cfg.dead_fraction);
        outcomes.insert(subject_id, OutcomeRecord { subject_id, died });
        let admitted = epoch + Duration::minutes(rng.random_range(0..3650 * 24 * 60));
        let mut patient_events = Vec::new();
        for (i, model) in models.iter().enumerate() {
            let (present, count) = match model {
                ItemModel::Noise { presence, max_count, .. } => {
                    (rng.random_bool(*presence), rng.random_range(1..=*max_count))
                }
                ItemModel::Planted { .. } => {
                    let count = if died { rng.random_range(3..=5) } else { rng.random_range(1..=2) };
                    (rng.random_bool(cfg.planted_presence), count)
                }
            };
            if !present {
                continue;
            }
            for _ in 0..count {
                let offset = rng.random_range(0..48 * 60);
                let (value, value_num) = match model {
                    ItemModel::Noise { value, .. } => {
                        if rng.random_bool(cfg.text_fraction) {
                            (Some("PENDING".to_string()), None)
                        } else {
                            let (s, v) = two_decimals(value.sample(&mut rng));
                            (Some(s), Some(v))
                        }
                    }
                    ItemModel::Planted { alive, dead } => {
                        let (lo, hi) = if died { *dead } else { *alive };
                        let (s, v) = two_decimals(rng.random_range(lo..hi));
                        (Some(s), Some(v))
                    }
                };
                patient_events.push(LabEvent {
                    subject_id,
                    hadm_id: Some(100_000 + subject_id),
                    icustay_id: Some(subject_id),
                    item_id: item_ids[i],
                    chart_time: admitted + Duration::minutes(offset),
                    value,
                    value_num,
                    flag: None,
                    value_uom: None,
                });
            }
        }
        patient_events.sort_by_key(|e| e.chart_time);
        events.extend(patient_events);
    }
    let planted = planted_idx.iter().map(|&i| item_ids[i]).collect();
    Ok(SynthCorpus { events, outcomes, catalog, planted })
}

#[derive(Debug, Clone)]
pub struct SynthFiles {
    pub events: PathBuf,
    pub outcomes: PathBuf,
    pub items: PathBuf,
    pub planted: PathBuf,
}

impl SynthFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            events: dir.join(EVENTS_FILE),
            outcomes: dir.join(OUTCOMES_FILE),
            items: dir.join(ITEMS_FILE),
            planted: dir.join(PLANTED_FILE),
        }
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

/// Writes the corpus as lab-event, outcome, catalog and planted-item files.
pub fn write_to_dir(corpus: &SynthCorpus, dir: &Path) -> Result<SynthFiles, SynthError> {
    std::fs::create_dir_all(dir)?;
    let files = SynthFiles::in_dir(dir);

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&files.events)?));
    w.write_record(["SUBJECT_ID", "HADM_ID", "ICUSTAY_ID", "ITEMID", "CHARTTIME", "VALUE", "VALUENUM", "FLAG", "VALUEUOM"])?;
    for e in &corpus.events {
        let value_num = match (&e.value, e.value_num) {
            (Some(s), Some(_)) => s.clone(),
            (_, v) => opt(&v),
        };
        w.write_record([
            e.subject_id.to_string(),
            opt(&e.hadm_id),
            opt(&e.icustay_id),
            e.item_id.to_string(),
            e.chart_time.format("%-m/%-d/%Y %H:%M").to_string(),
            opt(&e.value),
            value_num,
            opt(&e.flag),
            opt(&e.value_uom),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&files.outcomes)?));
    w.write_record(["SUBJECT_ID", "DIED"])?;
    for o in corpus.outcomes.values() {
        w.write_record([o.subject_id.to_string(), (o.died as u8).to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&files.items)?));
    w.write_record(["ITEMID", "TEST_NAME", "FLUID", "CATEGORY", "LOINC_CODE", "LOINC_DESCRIPTION"])?;
    for id in corpus.catalog.item_ids() {
        let item = corpus.catalog.get(id).expect("listed id");
        w.write_record([
            id.to_string(),
            item.test_name.clone(),
            item.fluid.clone(),
            item.category.clone(),
            opt(&item.loinc_code),
            opt(&item.loinc_description),
        ])?;
    }
    w.flush()?;

    let mut f = BufWriter::new(File::create(&files.planted)?);
    for id in &corpus.planted {
        writeln!(f, "{id}")?;
    }
    f.flush()?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AggregationMode;
    use crate::ingest::{build_feature_table, default_item_universe, load_outcomes, parse_labevents, parse_labitems};

    fn small() -> SynthConfig {
        SynthConfig { patients: 60, items: 25, informative: 3, seed: 7, ..Default::default() }
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig { informative: 30, ..small() }.validate().is_err());
        assert!(SynthConfig { dead_fraction: 1.5, ..small() }.validate().is_err());
        assert!(small().validate().is_ok());
    }

    #[test]
    fn deterministic_and_planted_count() {
        let a = generate(&small()).unwrap();
        assert_eq!(a, generate(&small()).unwrap());
        assert_eq!(a.planted.len(), 3);
        assert!(a.planted.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, generate(&SynthConfig { seed: 8, ..small() }).unwrap());
    }

    #[test]
    fn planted_items_separate_classes() {
        let c = generate(&small()).unwrap();
        let universe = default_item_universe(Some(&c.catalog), &c.events);
        for mode in [AggregationMode::Avg, AggregationMode::Count] {
            let t = build_feature_table(&c.events, &c.outcomes, mode, &universe).unwrap().table;
            for &item in &c.planted {
                let a = t.attribute_index(&item.to_string()).unwrap();
                let present = |class| {
                    t.rows().iter().filter(move |r| r.class == class && r.features[a] != 0.0).map(move |r| r.features[a])
                };
                use crate::dataset::Class::{Alive, Dead};
                let (amin, amax) = present(Alive).fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(v), h.max(v)));
                let (dmin, dmax) = present(Dead).fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(v), h.max(v)));
                assert!(amax < dmin || dmax < amin, "item {item} {mode}");
            }
        }
    }

    #[test]
    fn files_round_trip_through_ingest() {
        let c = generate(&small()).unwrap();
        let dir = std::env::temp_dir().join(format!("labmine-synth-{}", std::process::id()));
        let files = write_to_dir(&c, &dir).unwrap();
        let parsed = parse_labevents(File::open(&files.events).unwrap()).unwrap();
        assert_eq!(parsed.skipped, 0);
        assert_eq!(parsed.events, c.events);
        assert_eq!(load_outcomes(File::open(&files.outcomes).unwrap()).unwrap(), c.outcomes);
        assert_eq!(parse_labitems(File::open(&files.items).unwrap()).unwrap(), c.catalog);
        let planted: Vec<u64> =
            std::fs::read_to_string(&files.planted).unwrap().lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(planted, c.planted);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
