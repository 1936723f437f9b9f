//! Live-patient monitoring: running per-item aggregates, scoring after each
//! lab event and threshold warnings.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::ItemAggregate;
use crate::classifiers::{ClassifierError, Model};
use crate::dataset::AggregationMode;
use crate::ingest::LabEvent;
use crate::par;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("event for subject {found} applied to state of subject {expected}")]
    SubjectMismatch { expected: u64, found: u64 },
    #[error("model expects {model} features but the patient state aggregates {state}")]
    ModeMismatch { model: AggregationMode, state: AggregationMode },
    #[error("model attribute {0:?} is not a lab item id")]
    NonItemAttribute(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientState {
    pub subject_id: u64,
    pub mode: AggregationMode,
    items: HashMap<u64, ItemAggregate>,
    events: u64,
    /// Chart time of the most recently applied event.
    pub last_update: Option<NaiveDateTime>,
}

impl PatientState {
    pub fn new(subject_id: u64, mode: AggregationMode) -> Self {
        Self { subject_id, mode, items: HashMap::new(), events: 0, last_update: None }
    }

    pub fn ingest_event(&mut self, e: &LabEvent) -> Result<(), MonitorError> {
        if e.subject_id != self.subject_id {
            return Err(MonitorError::SubjectMismatch { expected: self.subject_id, found: e.subject_id });
        }
        self.items.entry(e.item_id).or_default().push(e.value_num);
        self.events += 1;
        self.last_update = Some(e.chart_time);
        Ok(())
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn item(&self, item_id: u64) -> Option<&ItemAggregate> {
        self.items.get(&item_id)
    }

    /// Feature row over `universe`, in universe order.
    pub fn feature_row(&self, universe: &[u64]) -> Vec<f64> {
        universe.iter().map(|i| self.items.get(i).map_or(0.0, |a| a.feature(self.mode))).collect()
    }
}

/// A model together with the item ids behind its attributes.
#[derive(Debug, Clone)]
pub struct Scorer<'m> {
    pub model: &'m Model,
    universe: Vec<u64>,
}

impl<'m> Scorer<'m> {
    pub fn new(model: &'m Model) -> Result<Self, MonitorError> {
        let universe = model
            .schema
            .attribute_names
            .iter()
            .map(|n| n.parse::<u64>().map_err(|_| MonitorError::NonItemAttribute(n.clone())))
            .collect::<Result<_, _>>()?;
        Ok(Self { model, universe })
    }

    pub fn universe(&self) -> &[u64] {
        &self.universe
    }

    /// Probability of the dead class for the state's current feature row.
    pub fn score(&self, state: &PatientState) -> Result<f64, MonitorError> {
        if state.mode != self.model.schema.mode {
            return Err(MonitorError::ModeMismatch { model: self.model.schema.mode, state: state.mode });
        }
        Ok(self.model.predict_proba(&state.feature_row(&self.universe))?[1])
    }
}

pub fn score(model: &Model, state: &PatientState) -> Result<f64, MonitorError> {
    Scorer::new(model)?.score(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningEvent {
    pub subject_id: u64,
    pub chart_time: Option<NaiveDateTime>,
    pub probability: f64,
    pub threshold: f64,
}

/// A warning when `probability` reaches `threshold`.
pub fn check_threshold(probability: f64, threshold: f64, state: &PatientState) -> Option<WarningEvent> {
    (probability >= threshold).then_some(WarningEvent {
        subject_id: state.subject_id,
        chart_time: state.last_update,
        probability,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suppression {
    /// Warn after every event at or above the threshold.
    None,
    /// Warn once per run of consecutive events at or above the threshold.
    #[default]
    Episode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientSummary {
    pub subject_id: u64,
    pub events: u64,
    pub final_probability: f64,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    /// In input event order.
    pub warnings: Vec<WarningEvent>,
    /// Ascending subject id.
    pub summaries: Vec<PatientSummary>,
    pub final_states: BTreeMap<u64, PatientState>,
}

#[derive(Debug, Clone)]
pub struct Monitor<'m> {
    scorer: Scorer<'m>,
    pub threshold: f64,
    pub suppression: Suppression,
}

impl<'m> Monitor<'m> {
    pub fn new(model: &'m Model, threshold: f64, suppression: Suppression) -> Result<Self, MonitorError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(MonitorError::InvalidThreshold(threshold));
        }
        Ok(Self { scorer: Scorer::new(model)?, threshold, suppression })
    }

    pub fn scorer(&self) -> &Scorer<'m> {
        &self.scorer
    }

    /// Replays events in the given order, scoring after each one. Patients
    /// are processed independently; each patient's events stay in order.
    pub fn replay(&self, events: &[LabEvent]) -> Result<ReplayOutput, MonitorError> {
        let mode = self.scorer.model.schema.mode;
        let mut by_subject: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, e) in events.iter().enumerate() {
            by_subject.entry(e.subject_id).or_default().push(i);
        }
        let groups: Vec<(u64, Vec<usize>)> = by_subject.into_iter().collect();
        let per_patient = par::try_map_range(groups.len(), |g| -> Result<_, MonitorError> {
            let (subject, idx) = &groups[g];
            let mut state = PatientState::new(*subject, mode);
            let mut warnings = Vec::new();
            let mut in_episode = false;
            let mut probability = self.scorer.score(&state)?;
            for &i in idx {
                state.ingest_event(&events[i])?;
                probability = self.scorer.score(&state)?;
                match check_threshold(probability, self.threshold, &state) {
                    Some(w) => {
                        if !(in_episode && self.suppression == Suppression::Episode) {
                            warnings.push((i, w));
                        }
                        in_episode = true;
                    }
                    None => in_episode = false,
                }
            }
            let summary = PatientSummary {
                subject_id: *subject,
                events: state.event_count(),
                final_probability: probability,
                warnings: warnings.len(),
            };
            Ok((state, warnings, summary))
        })?;
        let mut warnings = Vec::new();
        let mut summaries = Vec::new();
        let mut final_states = BTreeMap::new();
        for (state, w, s) in per_patient {
            warnings.extend(w);
            summaries.push(s);
            final_states.insert(state.subject_id, state);
        }
        warnings.sort_by_key(|(i, _)| *i);
        Ok(ReplayOutput { warnings: warnings.into_iter().map(|(_, w)| w).collect(), summaries, final_states })
    }
}

fn format_time(t: Option<NaiveDateTime>) -> String {
    t.map_or_else(String::new, |t| t.format("%Y-%m-%d %H:%M:%S").to_string())
}

/// Writes `SUBJECT_ID,CHARTTIME,PROBABILITY,THRESHOLD` lines.
pub fn write_warnings<W: Write>(mut out: W, warnings: &[WarningEvent]) -> Result<(), MonitorError> {
    writeln!(out, "SUBJECT_ID,CHARTTIME,PROBABILITY,THRESHOLD")?;
    for w in warnings {
        writeln!(out, "{},{},{},{}", w.subject_id, format_time(w.chart_time), w.probability, w.threshold)?;
    }
    Ok(())
}

/// Writes `SUBJECT_ID,EVENTS,FINAL_PROBABILITY,WARNINGS` lines.
pub fn write_summaries<W: Write>(mut out: W, summaries: &[PatientSummary]) -> Result<(), MonitorError> {
    writeln!(out, "SUBJECT_ID,EVENTS,FINAL_PROBABILITY,WARNINGS")?;
    for s in summaries {
        writeln!(out, "{},{},{},{}", s.subject_id, s.events, s.final_probability, s.warnings)?;
    }
    Ok(())
}
