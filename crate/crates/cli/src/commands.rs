use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use labmine::classifiers::{self, Algorithm, Kernel, ModelSpec};
use labmine::dataset::{read_table, write_table, FeatureTable, SplitPlan, TableFormat};
use labmine::eval::{self, report, HeadSelection, TrainSideEval};
use labmine::featsel::{self, RankedAttributes, SelectionMode};
use labmine::ingest::{self, LabCatalog};
use labmine::monitor::{self, Monitor, Suppression};
use labmine::synth::{self, SynthConfig};
use serde_json::{json, Value};

use crate::args::*;
use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Context shared by every subcommand.
pub struct Ctx<'a> {
    pub format: Format,
    pub data_dir: Option<&'a Path>,
    /// Run record written next to every artifact.
    pub run: Value,
}

impl Ctx<'_> {
    fn default_path(&self, flag: &Option<PathBuf>, file: &str, what: &str) -> Result<PathBuf> {
        match (flag, self.data_dir) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(d)) => Ok(d.join(file)),
            (None, None) => Err(usage(format!("missing --{what} (or set LABMINE_DATA_DIR)"))),
        }
    }

    fn optional_items(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.data_dir.map(|d| d.join(synth::ITEMS_FILE)).filter(|p| p.exists()))
    }

    /// Writes `body` to `path` plus a `<path>.run.json` record.
    fn write_artifact(&self, path: &Path, body: &[u8]) -> Result<()> {
        std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
        self.stamp(path)
    }

    fn stamp(&self, path: &Path) -> Result<()> {
        let mut name = path.as_os_str().to_owned();
        name.push(".run.json");
        let sidecar = PathBuf::from(name);
        let text = serde_json::to_string_pretty(&self.run)? + "\n";
        std::fs::write(&sidecar, text).with_context(|| format!("writing {}", sidecar.display()))
    }

    fn print(&self, text: &str) -> Result<()> {
        let mut out = io::stdout().lock();
        out.write_all(text.as_bytes())?;
        out.flush()?;
        Ok(())
    }

    /// JSON lines with the run record attached to each object.
    fn stamped_jsonl(&self, lines: &str) -> Result<String> {
        let mut out = String::new();
        for line in lines.lines().filter(|l| !l.trim().is_empty()) {
            let mut v: Value = serde_json::from_str(line)?;
            if let Some(obj) = v.as_object_mut() {
                obj.insert("run".into(), self.run.clone());
            }
            out.push_str(&v.to_string());
            out.push('\n');
        }
        Ok(out)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(anyhow::anyhow!("input file {} does not exist", path.display()))
    }
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) if !dir.is_dir() => Err(anyhow::anyhow!("output directory {} does not exist", dir.display())),
        _ => Ok(()),
    }
}

fn table_format(path: &Path) -> TableFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("arff") => TableFormat::Arff,
        _ => TableFormat::Delimited,
    }
}

enum Source {
    Table(PathBuf),
    Events { events: PathBuf, outcomes: PathBuf, items: Option<PathBuf> },
}

struct Loaded {
    table: FeatureTable,
    catalog: Option<LabCatalog>,
    skipped_rows: usize,
    skipped_events: usize,
}

fn resolve(ctx: &Ctx, input: &InputArgs) -> Result<Source> {
    let source = match &input.table {
        Some(t) => Source::Table(t.clone()),
        None => Source::Events {
            events: ctx.default_path(&input.events, synth::EVENTS_FILE, "events")?,
            outcomes: ctx.default_path(&input.outcomes, synth::OUTCOMES_FILE, "outcomes")?,
            items: ctx.optional_items(&input.items),
        },
    };
    match &source {
        Source::Table(t) => require_file(t)?,
        Source::Events { events, outcomes, items } => {
            require_file(events)?;
            require_file(outcomes)?;
            if let Some(i) = items {
                require_file(i)?;
            }
        }
    }
    Ok(source)
}

fn load(source: &Source, mode: Mode) -> Result<Loaded> {
    match source {
        Source::Table(path) => Ok(Loaded {
            table: read_table(open(path)?, table_format(path), mode.into())
                .with_context(|| format!("reading {}", path.display()))?,
            catalog: None,
            skipped_rows: 0,
            skipped_events: 0,
        }),
        Source::Events { events, outcomes, items } => {
            let parsed =
                ingest::parse_labevents(open(events)?).with_context(|| format!("reading {}", events.display()))?;
            let outcomes =
                ingest::load_outcomes(open(outcomes)?).with_context(|| format!("reading {}", outcomes.display()))?;
            let catalog = match items {
                Some(p) => Some(ingest::parse_labitems(open(p)?).with_context(|| format!("reading {}", p.display()))?),
                None => None,
            };
            let universe = ingest::default_item_universe(catalog.as_ref(), &parsed.events);
            let built = ingest::build_feature_table(&parsed.events, &outcomes, mode.into(), &universe)?;
            Ok(Loaded { table: built.table, catalog, skipped_rows: parsed.skipped, skipped_events: built.skipped_events })
        }
    }
}

/// Parses a learner name and applies the hyperparameter flags that concern it.
pub fn algorithm(name: &str, h: &HyperArgs) -> Result<Algorithm> {
    let mut a: Algorithm = name.parse().map_err(|e: classifiers::ClassifierError| usage(e.to_string()))?;
    match &mut a {
        Algorithm::ZeroR => {}
        Algorithm::NaiveBayes(p) => {
            if let Some(v) = h.variance_floor {
                p.variance_floor = v;
            }
        }
        Algorithm::DecisionTree(p) => {
            if let Some(v) = h.confidence {
                p.confidence = v;
            }
            if let Some(v) = h.min_leaf {
                p.min_leaf = v;
            }
            if h.unpruned {
                p.prune = false;
            }
        }
        Algorithm::RandomForest(p) => {
            if let Some(v) = h.trees {
                p.trees = v;
            }
            if h.features.is_some() {
                p.features = h.features;
            }
            if h.no_bootstrap {
                p.bootstrap = false;
            }
            if let Some(v) = h.min_leaf {
                p.min_leaf = v;
            }
        }
        Algorithm::SvmSmo(p) => {
            if let Some(v) = h.svm_c {
                p.c = v;
            }
            if let Some(v) = h.tol {
                p.tol = v;
            }
            match h.degree {
                Some(0) => return Err(usage("--degree must be at least 1")),
                Some(1) => p.kernel = Kernel::Linear,
                Some(d) => p.kernel = Kernel::Polynomial { degree: d },
                None => {}
            }
        }
    }
    a.validate().map_err(|e| usage(e.to_string()))?;
    Ok(a)
}

fn check_percent(p: u32) -> Result<()> {
    if p == 0 || p > 100 {
        return Err(usage(format!("--percent {p} outside 1..=100")));
    }
    Ok(())
}

pub fn ingest(ctx: &Ctx, a: &IngestArgs) -> Result<()> {
    let source = resolve(ctx, &a.input)?;
    require_parent(&a.out)?;
    let loaded = load(&source, a.input.mode)?;
    let mut buf = Vec::new();
    write_table(&loaded.table, &mut buf, table_format(&a.out))?;
    ctx.write_artifact(&a.out, &buf)?;
    let t = &loaded.table;
    match ctx.format {
        Format::Text => ctx.print(&format!(
            "{} patients x {} tests ({}) written to {}\nskipped {} malformed rows and {} events outside the test universe\n",
            t.n_rows(),
            t.n_attributes(),
            t.mode(),
            a.out.display(),
            loaded.skipped_rows,
            loaded.skipped_events
        )),
        Format::Structured => ctx.print(
            &(json!({
                "rows": t.n_rows(),
                "attributes": t.n_attributes(),
                "class_counts": t.class_counts(),
                "skipped_rows": loaded.skipped_rows,
                "skipped_events": loaded.skipped_events,
                "out": a.out,
                "run": ctx.run,
            })
            .to_string()
                + "\n"),
        ),
    }
}

pub fn rank(ctx: &Ctx, a: &RankArgs) -> Result<()> {
    let source = resolve(ctx, &a.input)?;
    if let Some(out) = &a.out {
        require_parent(out)?;
    }
    let loaded = load(&source, a.input.mode)?;
    let ranked = featsel::rank_all(&loaded.table)?;
    if let Some(out) = &a.out {
        let mut buf = Vec::new();
        ranked.write_csv(&mut buf)?;
        ctx.write_artifact(out, &buf)?;
    }
    let test_name = |name: &str| -> String {
        let id = name.parse::<u64>().ok();
        match (&loaded.catalog, id) {
            (Some(c), Some(id)) => c.get(id).map(|i| i.test_name.clone()).unwrap_or_default(),
            _ => String::new(),
        }
    };
    match ctx.format {
        Format::Text => {
            let rows: Vec<Vec<String>> = ranked
                .top(a.top.min(ranked.len()))
                .iter()
                .enumerate()
                .map(|(i, e)| vec![(i + 1).to_string(), e.name.clone(), format!("{:.6}", e.gain), test_name(&e.name)])
                .collect();
            ctx.print(&format!(
                "{} tests ranked by information gain ({})\n\n{}",
                ranked.len(),
                loaded.table.mode(),
                report::aligned(&["Rank", "Item", "Gain (bits)", "Test"], &rows)
            ))
        }
        Format::Structured => {
            let lines: String = ranked
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| json!({"rank": i + 1, "item": e.name, "gain": e.gain, "test": test_name(&e.name)}).to_string() + "\n")
                .collect();
            ctx.print(&ctx.stamped_jsonl(&lines)?)
        }
    }
}

fn ranking_for(table: &FeatureTable, path: &Option<PathBuf>) -> Result<RankedAttributes> {
    match path {
        Some(p) => RankedAttributes::read_csv(open(p)?).with_context(|| format!("reading {}", p.display())),
        None => Ok(featsel::rank_all(table)?),
    }
}

pub fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let algo = algorithm(&a.algo, &a.hyper)?;
    let source = resolve(ctx, &a.input)?;
    if let Some(r) = &a.ranking {
        require_file(r)?;
    }
    for p in a.out.iter().chain(&a.series) {
        require_parent(p)?;
    }
    let table = load(&source, a.input.mode)?.table;
    let ranked = ranking_for(&table, &a.ranking)?;
    let spec = ModelSpec::new(algo, a.seed);
    let result = eval::sweep(&spec, &table, &ranked, &a.percents, a.k, a.seed, a.selection.into());
    let report = match result {
        Err(eval::EvalError::InvalidFractions(m)) => return Err(usage(m)),
        r => r?,
    };
    let text = match ctx.format {
        Format::Text => report::sweep_text(&report),
        Format::Structured => ctx.stamped_jsonl(&report::sweep_jsonl(&report))?,
    };
    if let Some(out) = &a.out {
        ctx.write_artifact(out, text.as_bytes())?;
    }
    if let Some(series) = &a.series {
        ctx.write_artifact(series, report::sweep_series_csv(&report).as_bytes())?;
    }
    ctx.print(&text)
}

fn project_head(table: &FeatureTable, percent: u32) -> Result<FeatureTable> {
    if percent == 100 {
        return Ok(table.clone());
    }
    let ranked = featsel::rank_all(table)?;
    let keep: Vec<String> = ranked.top(featsel::head_count_percent(table.n_attributes(), percent)?).iter().map(|e| e.name.clone()).collect();
    let keep: Vec<&String> = table.attribute_names().iter().filter(|n| keep.contains(n)).collect();
    Ok(table.project_columns(&keep)?)
}

pub fn train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let algo = algorithm(&a.algo, &a.hyper)?;
    check_percent(a.percent)?;
    let source = resolve(ctx, &a.input)?;
    require_parent(&a.out)?;
    let table = project_head(&load(&source, a.input.mode)?.table, a.percent)?;
    let model = classifiers::train(&ModelSpec::new(algo, a.seed), &table)?;
    let mut buf = Vec::new();
    model.save(&mut buf)?;
    ctx.write_artifact(&a.out, &buf)?;
    match ctx.format {
        Format::Text => {
            let mut text = format!(
                "{} trained on {} patients x {} tests ({}), seed {}, saved to {}\n",
                model.spec.algorithm.display_name(),
                table.n_rows(),
                table.n_attributes(),
                table.mode(),
                a.seed,
                a.out.display()
            );
            if let (Some(tree), Some(rendered)) = (model.tree(), model.tree_text()) {
                text.push_str(&format!(
                    "\n{rendered}\nNumber of leaves: {}\nSize of the tree: {}\n",
                    tree.leaf_count(),
                    tree.node_count()
                ));
            }
            ctx.print(&text)
        }
        Format::Structured => ctx.print(
            &(json!({
                "algorithm": model.spec.algorithm.display_name(),
                "rows": table.n_rows(),
                "attributes": table.n_attributes(),
                "leaves": model.tree().map(|t| t.leaf_count()),
                "tree_size": model.tree().map(|t| t.node_count()),
                "out": a.out,
                "run": ctx.run,
            })
            .to_string()
                + "\n"),
        ),
    }
}

pub fn evaluate(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let algos = if a.algo.eq_ignore_ascii_case("all") {
        Algorithm::all_defaults()
    } else {
        vec![algorithm(&a.algo, &a.hyper)?]
    };
    check_percent(a.percent)?;
    if a.protocol == Protocol::Split && a.selection == Selection::PerFold && a.percent < 100 {
        return Err(usage("--selection per-fold applies to the cv protocol only"));
    }
    let plan = SplitPlan::new(a.train_fraction, a.repeats, a.seed).map_err(|e| usage(e.to_string()))?;
    let source = resolve(ctx, &a.input)?;
    if let Some(out) = &a.out {
        require_parent(out)?;
    }
    let table = load(&source, a.input.mode)?.table;
    let ranked = if a.percent < 100 && a.selection == Selection::FullTable { Some(featsel::rank_all(&table)?) } else { None };
    let empty = RankedAttributes { entries: Vec::new() };
    let text = match a.protocol {
        Protocol::Cv => {
            let selection = (a.percent < 100).then(|| HeadSelection {
                percent: a.percent,
                mode: SelectionMode::from(a.selection),
                ranked: ranked.as_ref().unwrap_or(&empty),
            });
            let mut rows = Vec::new();
            let mut results = Vec::new();
            for algo in algos {
                let name = algo.display_name().to_string();
                let cv = eval::cross_validate_with(&ModelSpec::new(algo, a.seed), &table, a.k, a.seed, selection)?;
                rows.push((name.clone(), cv.evaluation.metrics));
                results.push((name, cv));
            }
            match ctx.format {
                Format::Text if results.len() == 1 => report::cv_text(&results[0].0, &results[0].1),
                Format::Text => format!(
                    "{}-fold cross-validation, seed {}, {} patients x {} tests ({})\n\n{}",
                    a.k,
                    a.seed,
                    table.n_rows(),
                    table.n_attributes(),
                    table.mode(),
                    report::metrics_table(&rows)
                ),
                Format::Structured => {
                    let lines: String = results
                        .iter()
                        .map(|(name, cv)| {
                            let m = cv.evaluation.metrics;
                            json!({
                                "algorithm": name,
                                "accuracy": m.accuracy,
                                "weighted_precision": m.weighted_precision,
                                "weighted_recall": m.weighted_recall,
                                "weighted_f_measure": m.weighted_f_measure,
                                "confusion": cv.evaluation.confusion.counts,
                                "fold_sizes": cv.fold_sizes,
                                "percent": a.percent,
                            })
                            .to_string()
                                + "\n"
                        })
                        .collect();
                    ctx.stamped_jsonl(&lines)?
                }
            }
        }
        Protocol::Split => {
            let table = project_head(&table, a.percent)?;
            let side = match a.train_side {
                TrainSide::Cv => TrainSideEval::CrossValidation { k: a.k },
                TrainSide::Resub => TrainSideEval::Resubstitution,
            };
            let mut texts = Vec::new();
            let mut lines = String::new();
            let mut train_rows = Vec::new();
            let mut test_rows = Vec::new();
            for algo in algos {
                let name = algo.display_name().to_string();
                let r = eval::split_eval(&ModelSpec::new(algo, a.seed), &table, &plan, side)?;
                texts.push(report::split_text(&name, &r));
                train_rows.push((name.clone(), r.mean_train));
                test_rows.push((name.clone(), r.mean_test));
                let mut v = serde_json::to_value(&r)?;
                v["algorithm"] = json!(name);
                lines.push_str(&(v.to_string() + "\n"));
            }
            match ctx.format {
                Format::Text if texts.len() == 1 => texts.remove(0),
                Format::Text => format!(
                    "{} repeats of a {:.0}% randomized split, seed {}\n\nTraining side, mean\n{}\nTest side, mean\n{}",
                    a.repeats,
                    a.train_fraction * 100.0,
                    a.seed,
                    report::metrics_table(&train_rows),
                    report::metrics_table(&test_rows)
                ),
                Format::Structured => ctx.stamped_jsonl(&lines)?,
            }
        }
    };
    if let Some(out) = &a.out {
        ctx.write_artifact(out, text.as_bytes())?;
    }
    ctx.print(&text)
}

pub fn monitor(ctx: &Ctx, a: &MonitorArgs) -> Result<()> {
    if !(a.threshold > 0.0 && a.threshold <= 1.0) {
        return Err(usage(format!("--threshold {} outside (0, 1]", a.threshold)));
    }
    let events_path = ctx.default_path(&a.events, synth::EVENTS_FILE, "events")?;
    let from_stdin = events_path.as_os_str() == "-";
    require_file(&a.model)?;
    if !from_stdin {
        require_file(&events_path)?;
    }
    for p in a.out.iter().chain(&a.summary) {
        require_parent(p)?;
    }
    let model = classifiers::Model::load(open(&a.model)?).with_context(|| format!("reading {}", a.model.display()))?;
    let input: Box<dyn Read> = if from_stdin { Box::new(io::stdin().lock()) } else { Box::new(open(&events_path)?) };
    let parsed = ingest::parse_labevents(input).context("reading lab events")?;
    let suppression = match a.suppression {
        SuppressionArg::None => Suppression::None,
        SuppressionArg::Episode => Suppression::Episode,
    };
    let out = Monitor::new(&model, a.threshold, suppression)?.replay(&parsed.events)?;

    let warnings = match ctx.format {
        Format::Text => {
            let mut buf = Vec::new();
            monitor::write_warnings(&mut buf, &out.warnings)?;
            buf
        }
        Format::Structured => out.warnings.iter().map(|w| serde_json::to_string(w).map(|s| s + "\n")).collect::<Result<String, _>>()?.into_bytes(),
    };
    match &a.out {
        Some(p) => ctx.write_artifact(p, &warnings)?,
        None => {
            let mut stdout = BufWriter::new(io::stdout().lock());
            stdout.write_all(&warnings)?;
            stdout.flush()?;
        }
    }
    if let Some(p) = &a.summary {
        let mut buf = Vec::new();
        monitor::write_summaries(&mut buf, &out.summaries)?;
        ctx.write_artifact(p, &buf)?;
    }
    if parsed.skipped > 0 {
        eprintln!("skipped {} malformed event rows", parsed.skipped);
    }
    Ok(())
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let dir = match (&a.out, ctx.data_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.to_path_buf(),
        (None, None) => return Err(usage("missing --out (or set LABMINE_DATA_DIR)")),
    };
    let cfg = SynthConfig {
        patients: a.patients,
        items: a.items,
        informative: a.informative,
        dead_fraction: a.dead_fraction,
        seed: a.seed,
        ..SynthConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = synth::generate(&cfg)?;
    let files = synth::write_to_dir(&corpus, &dir)?;
    for f in [&files.events, &files.outcomes, &files.items, &files.planted] {
        ctx.stamp(f)?;
    }
    match ctx.format {
        Format::Text => ctx.print(&format!(
            "{} events for {} patients over {} tests written to {}\nplanted tests: {}\n",
            corpus.events.len(),
            corpus.outcomes.len(),
            a.items,
            dir.display(),
            corpus.planted.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
        )),
        Format::Structured => ctx.print(
            &(json!({
                "events": corpus.events.len(),
                "patients": corpus.outcomes.len(),
                "items": a.items,
                "planted": corpus.planted,
                "dir": dir,
                "run": ctx.run,
            })
            .to_string()
                + "\n"),
        ),
    }
}
