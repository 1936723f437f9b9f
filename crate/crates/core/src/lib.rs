//! Mining clinical lab events for ICU deterioration prediction.
//!
//! The pipeline runs in stages that mirror how the data flows:
//!
//! - [`ingest`] parses lab-event, lab-item and outcome files and collapses
//!   events into per-patient feature tables (mean result or test count).
//! - [`dataset`] holds the table model, stratified folds, randomized splits
//!   and serialization.
//! - [`featsel`] ranks attributes by information gain over MDL-discretized
//!   values and selects ranked heads.
//! - [`classifiers`] implements the five learners behind one contract.
//! - [`eval`] provides confusion matrices, weighted metrics and the
//!   evaluation protocols with their reports.
//! - [`monitor`] replays a live patient's events against a trained model and
//!   emits threshold warnings.
//! - [`synth`] generates desk-scale synthetic corpora with planted signal.
//!
//! Independent work (attributes, folds, repeats, forest members, sweep
//! fractions) fans out through [`par`], which uses rayon when the `parallel`
//! feature is on and runs sequentially otherwise. Results are identical
//! either way.

pub mod aggregate;
pub mod classifiers;
pub mod dataset;
pub mod eval;
pub mod featsel;
pub mod ingest;
pub mod monitor;
pub mod par;
pub mod rng;
pub mod synth;
