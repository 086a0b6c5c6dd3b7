//! Stage-wise pipeline orchestration and the closed coverage loop.
//!
//! Each stage consumes the previous stage's files from the run directory and
//! emits its own, so the flow can be driven manually one stage at a time or
//! as a whole through [`cmd_closed_loop`]. The closed loop runs the full
//! pipeline per iteration into `iter_NNN/` subdirectories, terminates once
//! the best algorithm's coverage regain reaches the target, and otherwise
//! merges the optimized regressions' datasets into the training data and
//! repeats up to the iteration cap.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::builtin;
use crate::coverage::{CoverGroup, CoverGroupDef};
use crate::dataprep::{self, PreparedDataset, PrepReport};
use crate::duv::DuvKind;
use crate::error::{Error, Result};
use crate::ml::{self, AlgoKind, Hyperparams, ModelSet};
use crate::report::{self, MetricsEntry, MetricsReport};
use crate::runner::{self, Dataset, RegressionPlan, RegressionSummary};
use crate::stimulus::ConstraintSet;
use crate::synth::{self, Targets};

/// Coverage-regain threshold that ends the closed loop.
pub const REGAIN_TARGET: f64 = 99.0;

/// One run's configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub duv: DuvKind,
    pub covergroup_path: Option<PathBuf>,
    pub constraints_path: Option<PathBuf>,
    pub tests: Option<usize>,
    pub transactions: Option<usize>,
    pub seed: u64,
    pub algos: Vec<AlgoKind>,
    pub out_dir: PathBuf,
    pub max_iters: usize,
    pub only_missed: bool,
    pub margin: f64,
    pub hyperparams: Hyperparams,
}

impl RunConfig {
    pub fn new(duv: DuvKind, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            duv,
            covergroup_path: None,
            constraints_path: None,
            tests: None,
            transactions: None,
            seed: 1,
            algos: vec![AlgoKind::Linear],
            out_dir: out_dir.into(),
            max_iters: 5,
            only_missed: false,
            margin: synth::DEFAULT_MARGIN,
            hyperparams: Hyperparams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algos.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("loop cap must be at least 1".into()));
        }
        if self.tests == Some(0) || self.transactions == Some(0) {
            return Err(Error::Config("tests and transactions must be at least 1".into()));
        }
        Ok(())
    }

    fn effective_tests(&self) -> usize {
        self.tests.unwrap_or_else(|| builtin::default_tests(self.duv))
    }

    fn effective_transactions(&self) -> usize {
        self.transactions.unwrap_or(builtin::DEFAULT_TRANSACTIONS)
    }
}

/// File naming inside one run directory.
#[derive(Debug, Clone)]
pub struct OutPaths {
    pub dir: PathBuf,
}

impl OutPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn covergroup(&self) -> PathBuf {
        self.dir.join("covergroup.json")
    }
    pub fn original_plan(&self) -> PathBuf {
        self.dir.join("original_plan.json")
    }
    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.csv")
    }
    pub fn original_summary(&self) -> PathBuf {
        self.dir.join("original_summary.json")
    }
    pub fn dedup_dataset(&self) -> PathBuf {
        self.dir.join("dataset_dedup.csv")
    }
    pub fn prepared(&self) -> PathBuf {
        self.dir.join("prepared.json")
    }
    pub fn models(&self, algo: AlgoKind) -> PathBuf {
        self.dir.join(format!("models_{}.json", algo.tag()))
    }
    pub fn directives(&self, algo: AlgoKind) -> PathBuf {
        self.dir.join(format!("directives_{}.json", algo.tag()))
    }
    pub fn optimized_plan(&self, algo: AlgoKind) -> PathBuf {
        self.dir.join(format!("optimized_plan_{}.json", algo.tag()))
    }
    pub fn optimized_dataset(&self, algo: AlgoKind) -> PathBuf {
        self.dir.join(format!("optimized_dataset_{}.csv", algo.tag()))
    }
    pub fn optimized_summary(&self, algo: AlgoKind) -> PathBuf {
        self.dir.join(format!("optimized_summary_{}.json", algo.tag()))
    }
    pub fn curve_csv(&self, duv: DuvKind, label: &str) -> PathBuf {
        self.dir
            .join(format!("coverage_curve_{}_{label}.csv", duv.name()))
    }
    pub fn curve_svg(&self, duv: DuvKind, label: &str) -> PathBuf {
        self.dir
            .join(format!("coverage_curve_{}_{label}.svg", duv.name()))
    }
    pub fn report_json(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn report_csv(&self) -> PathBuf {
        self.dir.join("report.csv")
    }
    pub fn iter_dir(&self, iteration: usize) -> PathBuf {
        self.dir.join(format!("iter_{iteration:03}"))
    }
    pub fn loop_summary(&self) -> PathBuf {
        self.dir.join("loop_summary.json")
    }
}

fn read_text(path: &Path, upstream_stage: &str) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingStage {
            path: path.to_path_buf(),
            stage: upstream_stage.to_string(),
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("serialize {}: {e}", path.display())))?;
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: &str) -> Result<T> {
    let text = read_text(path, stage)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })
}

fn load_covergroup_def(cfg: &RunConfig) -> Result<CoverGroupDef> {
    match &cfg.covergroup_path {
        None => Ok(builtin::covergroup(cfg.duv)),
        Some(path) => CoverGroupDef::from_json(&read_text(path, "provide the covergroup file")?),
    }
}

fn load_constraints(cfg: &RunConfig) -> Result<ConstraintSet> {
    match &cfg.constraints_path {
        None => Ok(ConstraintSet::new()),
        Some(path) => ConstraintSet::from_json(&read_text(path, "provide the constraints file")?),
    }
}

fn read_plan(paths: &OutPaths) -> Result<RegressionPlan> {
    RegressionPlan::from_json(&read_text(&paths.original_plan(), "run-original")?)
}

fn read_group(paths: &OutPaths, duv: DuvKind) -> Result<CoverGroup> {
    let def = CoverGroupDef::from_json(&read_text(&paths.covergroup(), "run-original")?)?;
    def.resolve(&duv.field_specs())
}

fn run_and_write(
    plan: &RegressionPlan,
    group: &CoverGroup,
    paths: &OutPaths,
    dataset_path: &Path,
    summary_path: &Path,
    curve_label: &str,
) -> Result<RegressionSummary> {
    let (summary, dataset) = runner::run_regression(plan, group)?;
    runner::write_dataset(&dataset, dataset_path)?;
    write_json(summary_path, &summary)?;
    report::write_curve(
        &summary.coverage_curve,
        &format!("{} {curve_label}", plan.duv.name()),
        &paths.curve_csv(plan.duv, curve_label),
        &paths.curve_svg(plan.duv, curve_label),
    )?;
    Ok(summary)
}

/// Stage 1: run the original constrained-random regression and collect the
/// dataset. All configuration is validated before any artifact is written.
pub fn cmd_run_original(cfg: &RunConfig) -> Result<RegressionSummary> {
    cfg.validate()?;
    let specs = cfg.duv.field_specs();
    let def = load_covergroup_def(cfg)?;
    let group = def.resolve(&specs)?;
    let base = load_constraints(cfg)?;
    base.resolve(&specs)?;
    let plan = RegressionPlan::uniform(
        cfg.duv,
        &base,
        cfg.effective_tests(),
        cfg.effective_transactions(),
        cfg.seed,
    );
    plan.validate()?;

    let paths = OutPaths::new(&cfg.out_dir);
    fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    write_text(&paths.covergroup(), &def.to_json())?;
    write_text(&paths.original_plan(), &plan.to_json())?;
    run_and_write(
        &plan,
        &group,
        &paths,
        &paths.dataset(),
        &paths.original_summary(),
        "original",
    )
}

/// Stage 2: dedupe the dataset and select per-bin variables.
pub fn cmd_prepare(out_dir: &Path) -> Result<PrepReport> {
    let paths = OutPaths::new(out_dir);
    let plan = read_plan(&paths)?;
    let group = read_group(&paths, plan.duv)?;
    let specs = plan.duv.field_specs();
    let field_names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let field_kinds: Vec<_> = specs.iter().map(|s| s.kind()).collect();
    let dataset = runner::read_dataset(&paths.dataset(), &field_names, &field_kinds)?;
    let prepared = dataprep::prepare(&dataset, &group, &specs)?;
    runner::write_dataset(&prepared.dataset, &paths.dedup_dataset())?;
    let report = prepared.report(dataset.rows.len());
    write_json(&paths.prepared(), &report)?;
    Ok(report)
}

fn read_prepared(paths: &OutPaths, duv: DuvKind) -> Result<PreparedDataset> {
    let prep: PrepReport = read_json(&paths.prepared(), "prepare")?;
    let specs = duv.field_specs();
    let field_names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let field_kinds: Vec<_> = specs.iter().map(|s| s.kind()).collect();
    let dataset = runner::read_dataset(&paths.dedup_dataset(), &field_names, &field_kinds)?;
    Ok(PreparedDataset {
        dataset,
        bins: prep.bins,
    })
}

/// Stage 3: train one model per learnable bin for every requested algorithm.
pub fn cmd_train(out_dir: &Path, algos: &[AlgoKind], hp: &Hyperparams) -> Result<()> {
    let paths = OutPaths::new(out_dir);
    let plan = read_plan(&paths)?;
    let prepared = read_prepared(&paths, plan.duv)?;
    for &algo in algos {
        let set = ml::train_per_bin(&prepared, algo, hp)?;
        write_text(&paths.models(algo), &set.to_json())?;
    }
    Ok(())
}

/// Stage 4: synthesize directives and the optimized regression plan per
/// algorithm.
pub fn cmd_synthesize(
    out_dir: &Path,
    algos: &[AlgoKind],
    margin: f64,
    only_missed: bool,
) -> Result<()> {
    let paths = OutPaths::new(out_dir);
    let plan = read_plan(&paths)?;
    let group = read_group(&paths, plan.duv)?;
    let specs = plan.duv.field_specs();
    let targets = if only_missed {
        let summary: RegressionSummary = read_json(&paths.original_summary(), "run-original")?;
        Targets::Only(summary.merged_coverage.missed_bins())
    } else {
        Targets::All
    };
    for &algo in algos {
        let models = ModelSet::from_json(&read_text(&paths.models(algo), "train")?)?;
        let mut directives = Vec::with_capacity(group.bins.len());
        for bin in &group.bins {
            let model = models.model_for(&bin.name);
            directives.push(synth::predict_bin_constraint(
                model, bin, &specs, margin, algo,
            )?);
        }
        let set = synth::DirectiveSet {
            algorithm: algo,
            margin,
            directives: directives.clone(),
        };
        write_text(&paths.directives(algo), &set.to_json())?;
        let optimized = synth::emit_optimized_plan(&directives, &plan, &targets, algo)?;
        write_text(&paths.optimized_plan(algo), &optimized.to_json())?;
    }
    Ok(())
}

/// Stage 5: run each algorithm's optimized regression.
pub fn cmd_run_optimized(
    out_dir: &Path,
    algos: &[AlgoKind],
) -> Result<Vec<(AlgoKind, RegressionSummary)>> {
    let paths = OutPaths::new(out_dir);
    let base = read_plan(&paths)?;
    let group = read_group(&paths, base.duv)?;
    let mut out = Vec::with_capacity(algos.len());
    for &algo in algos {
        let plan =
            RegressionPlan::from_json(&read_text(&paths.optimized_plan(algo), "synthesize")?)?;
        let summary = run_and_write(
            &plan,
            &group,
            &paths,
            &paths.optimized_dataset(algo),
            &paths.optimized_summary(algo),
            algo.tag(),
        )?;
        out.push((algo, summary));
    }
    Ok(out)
}

/// Stage 6: compute the comparison metrics and write the report files.
/// Algorithms whose optimized plan ended up empty (possible under
/// `--only-missed` when nothing was missed) are skipped; with no entries at
/// all, no report files are written.
pub fn cmd_report(out_dir: &Path, algos: &[AlgoKind]) -> Result<MetricsReport> {
    let paths = OutPaths::new(out_dir);
    let plan = read_plan(&paths)?;
    let orig: RegressionSummary = read_json(&paths.original_summary(), "run-original")?;
    let mut entries = Vec::new();
    for &algo in algos {
        let opt: RegressionSummary = read_json(&paths.optimized_summary(algo), "run-optimized")?;
        if opt.n_test_runs == 0 {
            continue;
        }
        entries.push(MetricsEntry::compute(
            plan.duv.name(),
            algo,
            orig.n_test_runs,
            opt.n_test_runs,
            orig.wall_time_secs,
            opt.wall_time_secs,
            orig.coverage_pct,
            opt.coverage_pct,
        )?);
    }
    let report = MetricsReport { entries };
    if !report.entries.is_empty() {
        report.write(&paths.report_json(), &paths.report_csv())?;
    }
    Ok(report)
}

/// Run the five downstream stages for one iteration directory.
fn run_iteration_stages(cfg: &RunConfig, iter_dir: &Path) -> Result<MetricsReport> {
    cmd_prepare(iter_dir)?;
    cmd_train(iter_dir, &cfg.algos, &cfg.hyperparams)?;
    cmd_synthesize(iter_dir, &cfg.algos, cfg.margin, cfg.only_missed)?;
    cmd_run_optimized(iter_dir, &cfg.algos)?;
    cmd_report(iter_dir, &cfg.algos)
}

/// Best entry under the termination rule: highest regain, ties broken by
/// fewer optimized test runs, then by algorithm list order.
fn best_entry<'a>(report: &'a MetricsReport, algos: &[AlgoKind]) -> Option<&'a MetricsEntry> {
    let rank = |a: AlgoKind| algos.iter().position(|&x| x == a).unwrap_or(usize::MAX);
    report.entries.iter().min_by(|a, b| {
        b.coverage_regain
            .total_cmp(&a.coverage_regain)
            .then(a.n_opt.cmp(&b.n_opt))
            .then(rank(a.algorithm).cmp(&rank(b.algorithm)))
    })
}

/// Closed-loop outcome (`loop_summary.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub best_algorithm: Option<AlgoKind>,
    pub best_regain: Option<f64>,
}

fn copy_artifact(from: &Path, to: &Path) -> Result<()> {
    fs::copy(from, to)
        .map(|_| ())
        .map_err(|e| Error::io(from, e))
}

fn concat_datasets(base: &Dataset, extra: &[Dataset]) -> Result<Dataset> {
    let mut merged = base.clone();
    for ds in extra {
        if ds.field_names != base.field_names || ds.bin_names != base.bin_names {
            return Err(Error::Config(
                "cannot merge datasets with different schemas".into(),
            ));
        }
        merged.rows.extend(ds.rows.iter().cloned());
    }
    Ok(merged)
}

/// The closed loop: per iteration, run the whole pipeline under
/// `iter_NNN/`; stop once the best regain reaches [`REGAIN_TARGET`].
/// Iterations after the first retrain on the previous iteration's training
/// data concatenated with its optimized datasets (deduplication happens in
/// the prepare stage).
pub fn cmd_closed_loop(cfg: &RunConfig) -> Result<LoopOutcome> {
    cfg.validate()?;
    let base_paths = OutPaths::new(&cfg.out_dir);
    let mut outcome = LoopOutcome {
        converged: false,
        iterations: 0,
        best_algorithm: None,
        best_regain: None,
    };
    for iteration in 1..=cfg.max_iters {
        let iter_dir = base_paths.iter_dir(iteration);
        let iter_paths = OutPaths::new(&iter_dir);
        if iteration == 1 {
            let mut iter_cfg = cfg.clone();
            iter_cfg.out_dir = iter_dir.clone();
            cmd_run_original(&iter_cfg)?;
        } else {
            let prev = OutPaths::new(base_paths.iter_dir(iteration - 1));
            fs::create_dir_all(&iter_dir).map_err(|e| Error::io(&iter_dir, e))?;
            copy_artifact(&prev.covergroup(), &iter_paths.covergroup())?;
            copy_artifact(&prev.original_plan(), &iter_paths.original_plan())?;
            copy_artifact(&prev.original_summary(), &iter_paths.original_summary())?;
            let plan = read_plan(&iter_paths)?;
            let specs = plan.duv.field_specs();
            let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
            let kinds: Vec<_> = specs.iter().map(|s| s.kind()).collect();
            let training = runner::read_dataset(&prev.dataset(), &names, &kinds)?;
            let optimized: Vec<Dataset> = cfg
                .algos
                .iter()
                .map(|&a| runner::read_dataset(&prev.optimized_dataset(a), &names, &kinds))
                .collect::<Result<_>>()?;
            let merged = concat_datasets(&training, &optimized)?;
            runner::write_dataset(&merged, &iter_paths.dataset())?;
        }
        let report = run_iteration_stages(cfg, &iter_dir)?;
        outcome.iterations = iteration;
        if let Some(best) = best_entry(&report, &cfg.algos) {
            outcome.best_algorithm = Some(best.algorithm);
            outcome.best_regain = Some(best.coverage_regain);
            if best.coverage_regain >= REGAIN_TARGET {
                outcome.converged = true;
                write_json(&base_paths.loop_summary(), &outcome)?;
                return Ok(outcome);
            }
        }
    }
    write_json(&base_paths.loop_summary(), &outcome)?;
    Ok(outcome)
}
