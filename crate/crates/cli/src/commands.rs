//! The pipeline verbs. Each reads and writes fixed locations under the
//! working directory (`paths.out`):
//!
//! ```text
//! synthetic.csv            synth
//! data/                    preprocess: train/val/test CSVs, stats, weights, report
//! graph/                   build-graph: hypergraph, node manifest, initial features
//! train/                   train: model.ckpt and the grid-search report
//! eval/                    evaluate: metrics per split
//! ablate/                  ablate: the variant comparison table
//! gradcheck.{json,txt}     gradcheck
//! ```

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hhgnn_core::builder::GraphBundle;
use hhgnn_core::data::{
    apply_normalizer, clean_labels, compute_loss_weights, fit_normalizer, load_instances, split,
    CleaningReport, CleaningRules, InstanceTable, LossWeights,
};
use hhgnn_core::metrics::{self, LabelColumns, MetricsReport};
use hhgnn_core::model::{
    check_model_gradients, evaluate_split, fit, load_checkpoint, save_checkpoint, Dataset,
    EpochLog, FitResult,
};
use hhgnn_core::{build_graph, make_variant, Error, Exec, Model, NodeType, Result, Variant};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Trial};
use crate::synth;

/// Max relative error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<SplitName> {
        [SplitName::Train, SplitName::Val, SplitName::Test]
            .into_iter()
            .find(|x| x.as_str() == s)
    }
}

#[derive(Debug)]
pub struct GradcheckFailed {
    pub max_rel_error: f64,
}

impl fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gradient check failed: max relative error {:.3e} >= {GRADCHECK_TOLERANCE:e}",
            self.max_rel_error
        )
    }
}

impl std::error::Error for GradcheckFailed {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub pipeline: u64,
    pub model: u64,
}

fn seeds(cfg: &ExperimentConfig) -> Seeds {
    Seeds {
        pipeline: cfg.seed,
        model: cfg.model_seed,
    }
}

pub fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.paths.out.join("data")
}

pub fn graph_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.paths.out.join("graph")
}

pub fn train_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.paths.out.join("train")
}

pub fn synthetic_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.paths.out.join("synthetic.csv")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    write_text(path, &text)
}

// ---------------------------------------------------------------- synth

#[derive(Clone, Debug, Serialize)]
pub struct SynthReport {
    pub spec: synth::SyntheticSpec,
    pub rows: usize,
    pub path: PathBuf,
}

pub fn synth(cfg: &ExperimentConfig) -> Result<SynthReport> {
    let table = synth::generate(&cfg.synth)?;
    create_dir(&cfg.paths.out)?;
    let path = synthetic_path(cfg);
    table.save(&path)?;
    let report = SynthReport {
        spec: cfg.synth.clone(),
        rows: table.len(),
        path,
    };
    write_json(&cfg.paths.out.join("synth_spec.json"), &report.spec)?;
    Ok(report)
}

// ----------------------------------------------------------- preprocess

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub seeds: Seeds,
    pub input_rows: usize,
    pub train_rows: usize,
    pub val_rows: usize,
    pub test_rows: usize,
    pub cleaning: CleaningReport,
    pub dropped_features: Vec<String>,
    pub inactive_classes: Vec<String>,
}

impl PreprocessReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "rows: {} in, split {}/{}/{}", self.input_rows, self.train_rows, self.val_rows, self.test_rows).unwrap();
        for r in self.cleaning.exclusive.iter().chain(&self.cleaning.forbidden) {
            writeln!(s, "rule {:<32} {} corrections", r.rule, r.corrections).unwrap();
        }
        writeln!(s, "rows modified by cleaning: {}", self.cleaning.rows_modified).unwrap();
        if !self.dropped_features.is_empty() {
            writeln!(s, "constant features dropped: {}", self.dropped_features.join(", ")).unwrap();
        }
        if !self.inactive_classes.is_empty() {
            writeln!(s, "classes without both positives and negatives in train: {}", self.inactive_classes.join(", ")).unwrap();
        }
        writeln!(s, "seeds: pipeline {} model {}", self.seeds.pipeline, self.seeds.model).unwrap();
        s
    }
}

pub fn input_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.paths.input.clone().unwrap_or_else(|| synthetic_path(cfg))
}

pub fn preprocess(cfg: &ExperimentConfig) -> Result<PreprocessReport> {
    let raw = load_instances(&input_path(cfg), None)?;
    let rules = match &cfg.paths.rules {
        Some(p) => CleaningRules::load(p)?,
        None => CleaningRules::phone_placement_exclusive(&raw.schema),
    };
    let (clean, cleaning) = clean_labels(&raw, &rules)?;
    let (train, val, test) = split(&clean, cfg.split, cfg.seed)?;
    let stats = fit_normalizer(&train)?;
    let train = apply_normalizer(&train, &stats)?;
    let val = apply_normalizer(&val, &stats)?;
    let test = apply_normalizer(&test, &stats)?;
    let weights = compute_loss_weights(&train);

    let dir = data_dir(cfg);
    create_dir(&dir)?;
    for (name, t) in [("train", &train), ("val", &val), ("test", &test)] {
        t.save(&dir.join(format!("{name}.csv")))?;
    }
    write_json(&dir.join("norm_stats.json"), &stats)?;
    write_json(&dir.join("loss_weights.json"), &weights)?;
    let report = PreprocessReport {
        seeds: seeds(cfg),
        input_rows: raw.len(),
        train_rows: train.len(),
        val_rows: val.len(),
        test_rows: test.len(),
        cleaning,
        dropped_features: stats.dropped.iter().map(|&i| stats.feature_names[i].clone()).collect(),
        inactive_classes: weights.inactive_classes().into_iter().map(String::from).collect(),
    };
    write_json(&dir.join("preprocess_report.json"), &report)?;
    write_text(&dir.join("preprocess_report.txt"), &report.to_text())?;
    Ok(report)
}

pub fn load_split(cfg: &ExperimentConfig, which: SplitName) -> Result<InstanceTable> {
    let dir = data_dir(cfg);
    let train = load_instances(&dir.join("train.csv"), None)?;
    if which == SplitName::Train {
        return Ok(train);
    }
    load_instances(&dir.join(format!("{}.csv", which.as_str())), Some(&train.schema))
}

// ---------------------------------------------------------- build-graph

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub seeds: Seeds,
    pub users: usize,
    pub phone_placements: usize,
    pub activities: usize,
    pub hyperedges: usize,
    pub max_edge_size: usize,
    pub instances_used: usize,
    pub instances_skipped: usize,
    pub absent_labels: Vec<String>,
}

impl GraphReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "nodes: {} users, {} placements, {} activities\nhyperedges: {} (largest has {} nodes)\ninstances: {} used, {} without a positive label\n",
            self.users,
            self.phone_placements,
            self.activities,
            self.hyperedges,
            self.max_edge_size,
            self.instances_used,
            self.instances_skipped
        );
        if !self.absent_labels.is_empty() {
            writeln!(s, "warning: never positive in train, no node: {}", self.absent_labels.join(", ")).unwrap();
        }
        s
    }
}

pub fn build(cfg: &ExperimentConfig) -> Result<GraphReport> {
    let train = load_split(cfg, SplitName::Train)?;
    let (bundle, built) = build_graph(&train, cfg.build_options())?;
    let dir = graph_dir(cfg);
    bundle.save(&dir)?;
    let count = |k: NodeType| bundle.graph.node_types().iter().filter(|&&t| t == k).count();
    let report = GraphReport {
        seeds: seeds(cfg),
        users: count(NodeType::User),
        phone_placements: count(NodeType::PhonePlacement),
        activities: count(NodeType::Activity),
        hyperedges: bundle.graph.num_edges(),
        max_edge_size: bundle.graph.edges().iter().map(Vec::len).max().unwrap_or(0),
        instances_used: built.instances_used,
        instances_skipped: built.instances_skipped,
        absent_labels: built.absent_labels,
    };
    write_json(&dir.join("build_report.json"), &report)?;
    write_text(&dir.join("build_report.txt"), &report.to_text())?;
    Ok(report)
}

// ---------------------------------------------------------------- train

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: Trial,
    /// `None` on success, otherwise why the trial was abandoned.
    pub failure: Option<String>,
    pub best_epoch: usize,
    pub best_val_mcc: f64,
    pub log: Vec<EpochLog>,
}

pub struct SearchOutcome {
    pub variant: Variant,
    pub trials: Vec<TrialRecord>,
    pub winner: usize,
    pub model: Model<f32>,
}

/// The data every training command needs, loaded once.
pub struct Prepared {
    pub bundle: GraphBundle,
    pub train: Dataset<f32>,
    pub val: Dataset<f32>,
    pub weights: LossWeights,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let bundle = GraphBundle::load(&graph_dir(cfg))?;
    let train = load_split(cfg, SplitName::Train)?;
    let val = load_split(cfg, SplitName::Val)?;
    Ok(Prepared {
        weights: compute_loss_weights(&train),
        train: Dataset::new(&train, &bundle)?,
        val: Dataset::new(&val, &bundle)?,
        bundle,
    })
}

/// Grid search for one variant. Trials are independent and may run in
/// parallel; the winner is the highest best-epoch validation MCC, ties going
/// to the lower trial index. A trial that produces non-finite values is
/// recorded and skipped.
pub fn search(cfg: &ExperimentConfig, variant: Variant, data: &Prepared) -> Result<SearchOutcome> {
    let trials = cfg.trials();
    let d_x = data.bundle.feature_dim();
    let results: Vec<Result<(Trial, Result<FitResult<f32>>)>> =
        hhgnn_core::par::map_ordered(trials, Exec::Auto, |t| {
            let model = make_variant(variant, &data.bundle, &cfg.model_config(&t, d_x), cfg.model_seed)?;
            let fitted = fit(model, &data.train, &data.val, &data.weights, &data.bundle, &cfg.train_options(&t));
            Ok((t, fitted))
        });
    let mut records = Vec::new();
    let mut best: Option<(usize, f64, Model<f32>)> = None;
    for r in results {
        let (trial, fitted) = r?;
        match fitted {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.best_val_mcc > b.1) {
                    best = Some((trial.index, f.best_val_mcc, f.model));
                }
                records.push(TrialRecord {
                    trial,
                    failure: None,
                    best_epoch: f.best_epoch,
                    best_val_mcc: f.best_val_mcc,
                    log: f.log,
                });
            }
            Err(e @ Error::NonFinite(_)) => {
                log::warn!("trial {} abandoned: {e}", trial.index);
                records.push(TrialRecord {
                    trial,
                    failure: Some(e.to_string()),
                    best_epoch: 0,
                    best_val_mcc: 0.0,
                    log: Vec::new(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let (winner, _, model) =
        best.ok_or_else(|| Error::NonFinite("every grid-search trial diverged".into()))?;
    Ok(SearchOutcome {
        variant,
        trials: records,
        winner,
        model,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seeds: Seeds,
    pub variant: Variant,
    pub winner: usize,
    pub trials: Vec<TrialRecord>,
    pub validation: MetricsReport,
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("variant: {}\n", self.variant.display_name());
        writeln!(s, "{:>5} {:>9} {:>6} {:>7} {:>7} {:>9} {:>6} {:>9}", "trial", "lr", "hidden", "blocks", "dropout", "wd", "epoch", "val MCC").unwrap();
        for r in &self.trials {
            let t = &r.trial;
            let tail = match &r.failure {
                Some(f) => format!("failed: {f}"),
                None => format!("{:>6} {:>9.4}", r.best_epoch, r.best_val_mcc),
            };
            writeln!(s, "{:>5} {:>9.2e} {:>6} {:>7} {:>7.2} {:>9.2e} {}", t.index, t.lr, t.hidden_dim, t.num_blocks, t.dropout_rate, t.weight_decay, tail).unwrap();
        }
        writeln!(s, "selected trial {}\n\nvalidation metrics\n{}", self.winner, self.validation.to_text()).unwrap();
        s
    }
}

pub fn train(cfg: &ExperimentConfig) -> Result<TrainReport> {
    let data = prepare(cfg)?;
    let outcome = search(cfg, cfg.train.variant, &data)?;
    let validation = evaluate_split(&outcome.model, &data.val, &data.weights, cfg.train.argmax_pp, Exec::Auto)?;
    let dir = train_dir(cfg);
    create_dir(&dir)?;
    save_checkpoint(&outcome.model, &dir.join("model.ckpt"))?;
    let report = TrainReport {
        seeds: seeds(cfg),
        variant: outcome.variant,
        winner: outcome.winner,
        trials: outcome.trials,
        validation,
    };
    write_json(&dir.join("train_report.json"), &report)?;
    write_text(&dir.join("train_report.txt"), &report.to_text())?;
    Ok(report)
}

// ------------------------------------------------------------- evaluate

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seeds: Seeds,
    pub split: SplitName,
    pub variant: Variant,
    pub headline: Vec<(String, f64)>,
    pub metrics: MetricsReport,
}

fn headline(m: &MetricsReport) -> Vec<(String, f64)> {
    m.headline().iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn evaluate(cfg: &ExperimentConfig, checkpoint: Option<&Path>, which: SplitName) -> Result<EvalReport> {
    let bundle = GraphBundle::load(&graph_dir(cfg))?;
    let default_ckpt = train_dir(cfg).join("model.ckpt");
    let model: Model<f32> = load_checkpoint(checkpoint.unwrap_or(&default_ckpt), &bundle)?;
    let weights = compute_loss_weights(&load_split(cfg, SplitName::Train)?);
    let data: Dataset<f32> = Dataset::new(&load_split(cfg, which)?, &bundle)?;
    let metrics = evaluate_split(&model, &data, &weights, cfg.train.argmax_pp, Exec::Auto)?;
    let report = EvalReport {
        seeds: seeds(cfg),
        split: which,
        variant: model.variant,
        headline: headline(&metrics),
        metrics,
    };
    let dir = cfg.paths.out.join("eval");
    create_dir(&dir)?;
    write_json(&dir.join(format!("metrics_{}.json", which.as_str())), &report)?;
    write_text(&dir.join(format!("metrics_{}.txt", which.as_str())), &report.metrics.to_text())?;
    Ok(report)
}

// --------------------------------------------------------------- ablate

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub selected_trial: usize,
    pub cells: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Seeds,
    pub split: SplitName,
    pub rows: Vec<AblationRow>,
    /// Every label predicted negative.
    pub trivial: AblationRow,
}

impl AblationReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "model", "PP MCC", "PP F1", "ACT MCC", "ACT F1", "MCC", "F1"
        );
        for r in self.rows.iter().chain([&self.trivial]) {
            write!(s, "{:<16}", r.variant).unwrap();
            for (_, v) in &r.cells {
                write!(s, " {v:>8.4}").unwrap();
            }
            s.push('\n');
        }
        writeln!(s, "({} split; the last row predicts every label negative)", self.split.as_str()).unwrap();
        s
    }
}

fn trivial_metrics(data: &Dataset<f32>, weights: &LossWeights) -> Result<MetricsReport> {
    let truth: Vec<Vec<_>> = (0..data.class_names.len())
        .map(|c| data.labels.iter().map(|l| l[c]).collect())
        .collect();
    let predicted = vec![vec![false; data.len()]; data.class_names.len()];
    metrics::evaluate(
        &LabelColumns {
            names: &data.class_names,
            num_pp: data.num_pp,
            active: &weights.active,
            truth: &truth,
            predicted: &predicted,
        },
        Exec::Auto,
    )
}

pub fn ablate(cfg: &ExperimentConfig) -> Result<AblationReport> {
    let data = prepare(cfg)?;
    let test: Dataset<f32> = Dataset::new(&load_split(cfg, SplitName::Test)?, &data.bundle)?;
    let rows = hhgnn_core::par::map_ordered(Variant::ALL.to_vec(), Exec::Auto, |v| {
        let started = Instant::now();
        let outcome = search(cfg, v, &data)?;
        let m = evaluate_split(&outcome.model, &test, &data.weights, cfg.train.argmax_pp, Exec::Auto)?;
        log::info!("{} trained in {:.1?}", v.display_name(), started.elapsed());
        Ok(AblationRow {
            variant: v.display_name().to_string(),
            selected_trial: outcome.winner,
            cells: headline(&m),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let report = AblationReport {
        seeds: seeds(cfg),
        split: SplitName::Test,
        rows,
        trivial: AblationRow {
            variant: "All negative".into(),
            selected_trial: 0,
            cells: headline(&trivial_metrics(&test, &data.weights)?),
        },
    };
    let dir = cfg.paths.out.join("ablate");
    create_dir(&dir)?;
    write_json(&dir.join("ablation.json"), &report)?;
    write_text(&dir.join("ablation.txt"), &report.to_text())?;
    Ok(report)
}

// ------------------------------------------------------------ gradcheck

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub variant: Variant,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub per_param: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSummary {
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub rows: Vec<GradcheckRow>,
}

impl GradcheckSummary {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            writeln!(s, "{:<12} max rel error {:.3e} (worst: {})", r.variant.name(), r.max_rel_error, r.worst_param).unwrap();
        }
        writeln!(s, "overall {:.3e}, tolerance {:e}: {}", self.max_rel_error, self.tolerance, if self.passed() { "ok" } else { "FAILED" }).unwrap();
        s
    }
}

/// Check every variant's gradients on the toy bundle. The summary is
/// computed even on failure; the caller decides how to report it.
pub fn gradcheck_all() -> Result<GradcheckSummary> {
    let rows = Variant::ALL
        .iter()
        .map(|&v| {
            let g = check_model_gradients(v)?;
            Ok(GradcheckRow {
                variant: v,
                max_rel_error: g.report.max_rel_error,
                worst_param: g.worst().0.to_string(),
                per_param: g.names.iter().cloned().zip(g.report.per_param.iter().copied()).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradcheckSummary {
        tolerance: GRADCHECK_TOLERANCE,
        max_rel_error: rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max),
        rows,
    })
}

pub fn gradcheck(cfg: &ExperimentConfig) -> anyhow::Result<GradcheckSummary> {
    let summary = gradcheck_all()?;
    create_dir(&cfg.paths.out)?;
    write_json(&cfg.paths.out.join("gradcheck.json"), &summary)?;
    write_text(&cfg.paths.out.join("gradcheck.txt"), &summary.to_text())?;
    if !summary.passed() {
        print!("{}", summary.to_text());
        return Err(GradcheckFailed {
            max_rel_error: summary.max_rel_error,
        }
        .into());
    }
    Ok(summary)
}

/// Process exit status for an error returned by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<GradcheckFailed>().is_some() {
        return 5;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Parse { .. }
            | Error::SchemaMismatch(_)
            | Error::InvalidConfig(_)
            | Error::TooFewRows(_)
            | Error::Checkpoint(_),
        ) => 2,
        Some(Error::EmptyGraph) => 3,
        Some(Error::NonFinite(_)) => 4,
        _ => 1,
    }
}
