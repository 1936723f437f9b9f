//! Lab-event, lab-item and outcome parsing, and aggregation of events into
//! per-patient feature tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::ItemAggregate;
pub use crate::dataset::AggregationMode;
use crate::dataset::{Class, DatasetError, FeatureTable, Row};
use crate::par;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing header row")]
    MissingHeader,
    #[error("missing mandatory column {0}")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("duplicate item id {0}")]
    DuplicateItem(u64),
    #[error("duplicate outcome for subject {0}")]
    DuplicateSubject(u64),
    #[error("unknown item {0}")]
    UnknownItem(u64),
    #[error("events reference subjects without an outcome: {0:?}")]
    MissingOutcomes(Vec<u64>),
    #[error("item universe must be non-empty")]
    EmptyUniverse,
    #[error("item {0} appears twice in the item universe")]
    DuplicateUniverseItem(u64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// One lab measurement for one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabEvent {
    pub subject_id: u64,
    pub hadm_id: Option<u64>,
    pub icustay_id: Option<u64>,
    pub item_id: u64,
    pub chart_time: NaiveDateTime,
    pub value: Option<String>,
    pub value_num: Option<f64>,
    pub flag: Option<String>,
    pub value_uom: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedEvents {
    pub events: Vec<LabEvent>,
    /// Rows dropped because a field failed to parse.
    pub skipped: usize,
}

pub const EVENT_COLUMNS: [&str; 9] = [
    "SUBJECT_ID",
    "HADM_ID",
    "ICUSTAY_ID",
    "ITEMID",
    "CHARTTIME",
    "VALUE",
    "VALUENUM",
    "FLAG",
    "VALUEUOM",
];

const MANDATORY_EVENT_COLUMNS: [&str; 3] = ["SUBJECT_ID", "ITEMID", "CHARTTIME"];

/// Parses a chart time in `M/D/YYYY HH:MM[:SS]` or ISO-8601 form. Shifted
/// years far in the future are fine.
pub fn parse_chart_time(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    const NAIVE: [&str; 6] = [
        "%m/%d/%Y %H:%M",
        "%m/%d/%Y %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    for fmt in NAIVE {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    if let Ok(t) = DateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f%:z") {
        return Some(t.naive_utc());
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn header_index(headers: &csv::StringRecord) -> HashMap<String, usize> {
    headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().trim_start_matches('\u{feff}').to_ascii_uppercase(), i))
        .collect()
}

fn optional_text(s: Option<&str>) -> Option<String> {
    s.map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

fn positive_id(s: &str) -> Result<u64, String> {
    match s.trim().parse::<u64>() {
        Ok(0) => Err("id must be positive".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("bad integer {s:?}")),
    }
}

fn optional_id(s: Option<&str>) -> Result<Option<u64>, String> {
    match s.map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(v) => positive_id(v).map(Some),
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::Fields)
        .from_reader(input)
}

/// Column positions for the event layout; optional columns may be absent.
#[derive(Debug, Clone)]
pub struct EventColumns {
    idx: [Option<usize>; 9],
    width: usize,
}

impl EventColumns {
    pub fn from_header(headers: &csv::StringRecord) -> Result<Self, IngestError> {
        if headers.iter().all(|h| h.trim().is_empty()) {
            return Err(IngestError::MissingHeader);
        }
        let map = header_index(headers);
        let mut idx = [None; 9];
        for (slot, name) in idx.iter_mut().zip(EVENT_COLUMNS) {
            *slot = map.get(name).copied();
        }
        for name in MANDATORY_EVENT_COLUMNS {
            if !map.contains_key(name) {
                return Err(IngestError::MissingColumn(name));
            }
        }
        Ok(Self { idx, width: headers.len() })
    }

    /// Parses one record; `Err` carries the reason the row is malformed.
    pub fn parse(&self, rec: &csv::StringRecord) -> Result<LabEvent, String> {
        if rec.len() != self.width {
            return Err(format!("expected {} fields, found {}", self.width, rec.len()));
        }
        let get = |i: usize| self.idx[i].and_then(|j| rec.get(j));
        let subject_id = positive_id(get(0).unwrap_or(""))?;
        let hadm_id = optional_id(get(1))?;
        let icustay_id = optional_id(get(2))?;
        let item_id = positive_id(get(3).unwrap_or(""))?;
        let raw_time = get(4).unwrap_or("");
        let chart_time = parse_chart_time(raw_time).ok_or_else(|| format!("bad chart time {raw_time:?}"))?;
        let value = optional_text(get(5));
        let value_num = match get(6).map(str::trim).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => return Err(format!("bad numeric value {s:?}")),
            },
        };
        Ok(LabEvent {
            subject_id,
            hadm_id,
            icustay_id,
            item_id,
            chart_time,
            value,
            value_num,
            flag: optional_text(get(7)),
            value_uom: optional_text(get(8)),
        })
    }
}

/// Parses a lab-event file. Malformed rows are skipped and counted.
pub fn parse_labevents<R: Read>(input: R) -> Result<ParsedEvents, IngestError> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers()?.clone();
    let columns = EventColumns::from_header(&headers)?;
    let mut out = ParsedEvents::default();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                out.skipped += 1;
                continue;
            }
        };
        match columns.parse(&rec) {
            Ok(ev) => out.events.push(ev),
            Err(_) => out.skipped += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabItem {
    pub item_id: u64,
    pub test_name: String,
    pub fluid: String,
    pub category: String,
    pub loinc_code: Option<String>,
    pub loinc_description: Option<String>,
}

/// Lab-test catalog keyed by item id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabCatalog {
    items: BTreeMap<u64, LabItem>,
}

impl LabCatalog {
    pub fn get(&self, item_id: u64) -> Result<&LabItem, IngestError> {
        self.items.get(&item_id).ok_or(IngestError::UnknownItem(item_id))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Item ids in ascending order.
    pub fn item_ids(&self) -> Vec<u64> {
        self.items.keys().copied().collect()
    }

    pub fn insert(&mut self, item: LabItem) -> Result<(), IngestError> {
        if self.items.contains_key(&item.item_id) {
            return Err(IngestError::DuplicateItem(item.item_id));
        }
        self.items.insert(item.item_id, item);
        Ok(())
    }
}

pub fn parse_labitems<R: Read>(input: R) -> Result<LabCatalog, IngestError> {
    let mut rdr = csv_reader(input);
    let map = header_index(rdr.headers()?);
    if map.is_empty() {
        return Err(IngestError::MissingHeader);
    }
    let col = |name: &'static str| map.get(name).copied().ok_or(IngestError::MissingColumn(name));
    let item_col = col("ITEMID")?;
    let name_col = col("TEST_NAME")?;
    let fluid_col = col("FLUID")?;
    let cat_col = col("CATEGORY")?;
    let code_col = map.get("LOINC_CODE").copied();
    let desc_col = map.get("LOINC_DESCRIPTION").copied();
    let mut catalog = LabCatalog::default();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let item_id = positive_id(rec.get(item_col).unwrap_or(""))
            .map_err(|message| IngestError::BadRow { line, message })?;
        catalog.insert(LabItem {
            item_id,
            test_name: field(name_col),
            fluid: field(fluid_col),
            category: field(cat_col),
            loinc_code: optional_text(code_col.and_then(|i| rec.get(i))),
            loinc_description: optional_text(desc_col.and_then(|i| rec.get(i))),
        })?;
    }
    Ok(catalog)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub subject_id: u64,
    pub died: bool,
}

impl OutcomeRecord {
    pub fn class(&self) -> Class {
        Class::from_died(self.died)
    }
}

pub type Outcomes = BTreeMap<u64, OutcomeRecord>;

/// Parses a `SUBJECT_ID,DIED` file with `DIED` in {0, 1}.
pub fn load_outcomes<R: Read>(input: R) -> Result<Outcomes, IngestError> {
    let mut rdr = csv_reader(input);
    let map = header_index(rdr.headers()?);
    let subject_col = map.get("SUBJECT_ID").copied().ok_or(IngestError::MissingColumn("SUBJECT_ID"))?;
    let died_col = map.get("DIED").copied().ok_or(IngestError::MissingColumn("DIED"))?;
    let mut out = Outcomes::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let subject_id = positive_id(rec.get(subject_col).unwrap_or(""))
            .map_err(|message| IngestError::BadRow { line, message })?;
        let died = match rec.get(died_col).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => {
                return Err(IngestError::BadRow {
                    line,
                    message: format!("DIED must be 0 or 1, found {:?}", other.unwrap_or("")),
                })
            }
        };
        if out.insert(subject_id, OutcomeRecord { subject_id, died }).is_some() {
            return Err(IngestError::DuplicateSubject(subject_id));
        }
    }
    Ok(out)
}

/// Default attribute universe: every catalog item (ascending) when a catalog
/// is given, otherwise every item seen in the events (ascending).
pub fn default_item_universe(catalog: Option<&LabCatalog>, events: &[LabEvent]) -> Vec<u64> {
    match catalog {
        Some(c) if !c.is_empty() => c.item_ids(),
        _ => events.iter().map(|e| e.item_id).collect::<BTreeSet<_>>().into_iter().collect(),
    }
}

pub fn attribute_name(item_id: u64) -> String {
    item_id.to_string()
}

#[derive(Debug, Clone)]
pub struct BuiltTable {
    pub table: FeatureTable,
    /// Events whose item is outside the universe.
    pub skipped_events: usize,
}

/// Position of each item in the universe, validating it on the way.
pub(crate) fn universe_index(universe: &[u64]) -> Result<HashMap<u64, usize>, IngestError> {
    if universe.is_empty() {
        return Err(IngestError::EmptyUniverse);
    }
    let mut index = HashMap::with_capacity(universe.len());
    for (i, &item) in universe.iter().enumerate() {
        if index.insert(item, i).is_some() {
            return Err(IngestError::DuplicateUniverseItem(item));
        }
    }
    Ok(index)
}

/// Collapses lab events into one row per outcome subject (ascending id) and
/// one column per universe item. Cells without qualifying events are 0.
pub fn build_feature_table(
    events: &[LabEvent],
    outcomes: &Outcomes,
    mode: AggregationMode,
    item_universe: &[u64],
) -> Result<BuiltTable, IngestError> {
    let index = universe_index(item_universe)?;
    let missing: BTreeSet<u64> = events
        .iter()
        .map(|e| e.subject_id)
        .filter(|s| !outcomes.contains_key(s))
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingOutcomes(missing.into_iter().collect()));
    }

    let mut per_subject: BTreeMap<u64, Vec<(usize, Option<f64>)>> = BTreeMap::new();
    let mut skipped_events = 0;
    for e in events {
        match index.get(&e.item_id) {
            Some(&col) => per_subject.entry(e.subject_id).or_default().push((col, e.value_num)),
            None => skipped_events += 1,
        }
    }

    let subjects: Vec<&OutcomeRecord> = outcomes.values().collect();
    let width = item_universe.len();
    let rows = par::map_slice(&subjects, |rec| {
        let mut aggs = vec![ItemAggregate::default(); width];
        if let Some(list) = per_subject.get(&rec.subject_id) {
            for &(col, v) in list {
                aggs[col].push(v);
            }
        }
        Row {
            key: rec.subject_id,
            features: aggs.iter().map(|a| a.feature(mode)).collect(),
            class: rec.class(),
        }
    });
    let names = item_universe.iter().map(|&i| attribute_name(i)).collect();
    Ok(BuiltTable { table: FeatureTable::new(names, rows, mode)?, skipped_events })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "SUBJECT_ID,HADM_ID,ICUSTAY_ID,ITEMID,CHARTTIME,VALUE,VALUENUM,FLAG,VALUEUOM\n";

    fn events(body: &str) -> ParsedEvents {
        parse_labevents(format!("{HEADER}{body}").as_bytes()).unwrap()
    }

    #[test]
    fn parses_example_record() {
        let p = events("2,25967,3,50468,6/15/2806 21:48,0.1,0.1,abnormal,K/uL\n");
        assert_eq!(p.skipped, 0);
        let e = &p.events[0];
        assert_eq!(e.subject_id, 2);
        assert_eq!(e.hadm_id, Some(25967));
        assert_eq!(e.icustay_id, Some(3));
        assert_eq!(e.item_id, 50468);
        assert_eq!(e.value_num, Some(0.1));
        assert_eq!(e.flag.as_deref(), Some("abnormal"));
        assert_eq!(e.value_uom.as_deref(), Some("K/uL"));
        assert_eq!(e.chart_time.to_string(), "2806-06-15 21:48:00");
    }

    #[test]
    fn empty_file_with_header() {
        let p = events("");
        assert!(p.events.is_empty());
        assert_eq!(p.skipped, 0);
    }

    #[test]
    fn text_value_without_number() {
        let p = events("5,,,50060,2101-01-01T08:00:00,TR,,,\n");
        assert_eq!(p.skipped, 0);
        let e = &p.events[0];
        assert_eq!(e.value.as_deref(), Some("TR"));
        assert_eq!(e.value_num, None);
        assert_eq!(e.hadm_id, None);
        assert_eq!(e.flag, None);
    }

    #[test]
    fn malformed_rows_are_counted() {
        let p = events(
            "1,,,50060,1/1/2100 00:00,,abc,,\n\
             0,,,50060,1/1/2100 00:00,,1,,\n\
             1,,,50060,not a time,,1,,\n\
             1,,,50060,1/1/2100 00:00,,inf,,\n\
             1,,,50060\n\
             1,,,50060,1/1/2100 00:00,1,1,,\n",
        );
        assert_eq!(p.skipped, 5);
        assert_eq!(p.events.len(), 1);
    }

    #[test]
    fn missing_mandatory_column() {
        let err = parse_labevents("SUBJECT_ID,HADM_ID,CHARTTIME\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn("ITEMID")));
        let err = parse_labevents("".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::MissingHeader | IngestError::MissingColumn(_)));
    }

    #[test]
    fn chart_time_formats() {
        assert!(parse_chart_time("6/15/2806 21:48").is_some());
        assert!(parse_chart_time("2806-06-15T21:48:00").is_some());
        assert!(parse_chart_time("2806-06-15 21:48:00.5").is_some());
        assert!(parse_chart_time("2806-06-15T21:48:00+02:00").is_some());
        assert!(parse_chart_time("15/06/2806 21:48").is_none());
    }

    const ITEMS: &str = "ITEMID,TEST_NAME,FLUID,CATEGORY,LOINC_CODE,LOINC_DESCRIPTION\n";

    #[test]
    fn lab_items() {
        let cat = parse_labitems(
            format!("{ITEMS}50177,UREA N,BLOOD,CHEMISTRY,3094-0,Urea nitrogen [mass/volume] in serum or plasma\n").as_bytes(),
        )
        .unwrap();
        let item = cat.get(50177).unwrap();
        assert_eq!(item.test_name, "UREA N");
        assert_eq!(item.category, "CHEMISTRY");
        assert_eq!(item.loinc_code.as_deref(), Some("3094-0"));
        assert!(matches!(cat.get(1), Err(IngestError::UnknownItem(1))));
    }

    #[test]
    fn empty_catalog_and_duplicates() {
        let cat = parse_labitems(ITEMS.as_bytes()).unwrap();
        assert!(matches!(cat.get(50177), Err(IngestError::UnknownItem(_))));
        let err = parse_labitems(
            format!("{ITEMS}50090,CREAT,BLOOD,CHEMISTRY,,\n50090,CREAT,BLOOD,CHEMISTRY,,\n").as_bytes(),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::DuplicateItem(50090)));
    }

    #[test]
    fn extra_item_columns_ignored() {
        let cat = parse_labitems(
            "ITEMID,TEST_NAME,FLUID,CATEGORY,LOINC_CODE,LOINC_DESCRIPTION,EXTRA\n50090,CREAT,BLOOD,CHEMISTRY,2160-0,x,y\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(cat.get(50090).unwrap().test_name, "CREAT");
    }

    #[test]
    fn outcomes() {
        let o = load_outcomes("SUBJECT_ID,DIED\n1,1\n7,0\n".as_bytes()).unwrap();
        assert!(o[&1].died);
        assert!(!o[&7].died);
        let err = load_outcomes("SUBJECT_ID,DIED\n3,1\n3,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateSubject(3)));
        let err = load_outcomes("SUBJECT_ID,DIED\n3,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::BadRow { .. }));
    }

    fn ev(subject: u64, item: u64, v: Option<f64>) -> LabEvent {
        LabEvent {
            subject_id: subject,
            hadm_id: None,
            icustay_id: None,
            item_id: item,
            chart_time: parse_chart_time("1/1/2100 00:00").unwrap(),
            value: v.map(|x| x.to_string()).or(Some("TR".into())),
            value_num: v,
            flag: None,
            value_uom: None,
        }
    }

    fn outcomes_of(ids: &[(u64, bool)]) -> Outcomes {
        ids.iter().map(|&(s, d)| (s, OutcomeRecord { subject_id: s, died: d })).collect()
    }

    #[test]
    fn example_row_avg() {
        let evs = vec![ev(1, 100, Some(5.3)), ev(1, 200, Some(10.0))];
        let out = outcomes_of(&[(1, true)]);
        let built = build_feature_table(&evs, &out, AggregationMode::Avg, &[100, 200, 300]).unwrap();
        let row = &built.table.rows()[0];
        assert_eq!(row.key, 1);
        assert_eq!(row.features, vec![5.3, 10.0, 0.0]);
        assert_eq!(row.class, Class::Dead);
    }

    #[test]
    fn avg_and_count_cells() {
        let evs = vec![ev(1, 100, Some(0.1)), ev(1, 100, Some(0.3)), ev(1, 200, None)];
        let out = outcomes_of(&[(1, false), (2, true)]);
        let avg = build_feature_table(&evs, &out, AggregationMode::Avg, &[100, 200]).unwrap().table;
        let cnt = build_feature_table(&evs, &out, AggregationMode::Count, &[100, 200]).unwrap().table;
        assert_eq!(avg.rows()[0].features, vec![0.2, 0.0]);
        assert_eq!(cnt.rows()[0].features, vec![2.0, 1.0]);
        // patient without events
        assert_eq!(avg.rows()[1].features, vec![0.0, 0.0]);
        assert_eq!(avg.rows()[1].class, Class::Dead);
        assert_eq!(avg.n_rows(), 2);
    }

    #[test]
    fn build_errors_and_skips() {
        let evs = vec![ev(1, 100, Some(1.0)), ev(9, 100, Some(1.0)), ev(8, 100, None)];
        let out = outcomes_of(&[(1, false)]);
        match build_feature_table(&evs, &out, AggregationMode::Avg, &[100]) {
            Err(IngestError::MissingOutcomes(ids)) => assert_eq!(ids, vec![8, 9]),
            other => panic!("{other:?}"),
        }
        let evs = vec![ev(1, 100, Some(1.0)), ev(1, 555, Some(1.0))];
        let built = build_feature_table(&evs, &out, AggregationMode::Avg, &[100]).unwrap();
        assert_eq!(built.skipped_events, 1);
        assert!(matches!(
            build_feature_table(&evs, &out, AggregationMode::Avg, &[]),
            Err(IngestError::EmptyUniverse)
        ));
        assert!(matches!(
            build_feature_table(&evs, &out, AggregationMode::Avg, &[100, 100]),
            Err(IngestError::DuplicateUniverseItem(100))
        ));
    }

    #[test]
    fn universe_defaults() {
        let evs = vec![ev(1, 300, None), ev(1, 100, None), ev(2, 300, None)];
        assert_eq!(default_item_universe(None, &evs), vec![100, 300]);
        let mut cat = LabCatalog::default();
        for id in [5, 1, 3] {
            cat.insert(LabItem {
                item_id: id,
                test_name: String::new(),
                fluid: String::new(),
                category: String::new(),
                loinc_code: None,
                loinc_description: None,
            })
            .unwrap();
        }
        assert_eq!(default_item_universe(Some(&cat), &evs), vec![1, 3, 5]);
    }
}
