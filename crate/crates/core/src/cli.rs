//! The `boasf` command line: run configuration, trace files and reports.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bandit::{self, Arm, BanditConfig, BanditError, BestResult, RoundReport, TraceSink, DEFAULT_UCB_C};
use crate::evaluator::{BudgetMode, EvaluationRecord, Objective, ResourceBudget, RewardScale};
use crate::space::{partition, SearchSpace, SubSpace};
use crate::tasks::{
    builtin_learners, generate, learner_by_name, CvSpec, Dataset, GeneratorKind, LearnerObjective, SyntheticFunction,
    SyntheticObjective,
};
use crate::tpe::TpeParams;

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TRACE_PATH: &str = "trace.jsonl";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn runtime_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    ModelSelection,
    Hpo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub rounds: usize,
    pub ucb_c: f64,
    pub partition_k: usize,
    /// Per-evaluation time limit in seconds; 120 in time mode and none in
    /// count mode when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout: Option<f64>,
    /// Defaults to the number of available cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            rounds: 3,
            ucb_c: DEFAULT_UCB_C,
            partition_k: 2,
            timeout: None,
            parallelism: None,
            output: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub filter: u64,
    pub sampling: u64,
    pub data: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learner: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<SyntheticFunction>,
    /// Overrides the synthetic objective's reward scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<RewardScale>,
    /// Overrides the target's space; parameter names must match.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<SearchSpace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorKind>,
    pub n: usize,
    pub noise_features: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            generator: None,
            n: 600,
            noise_features: 0,
            csv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub folds: usize,
    /// Defaults to `seeds.data`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for CvSection {
    fn default() -> Self {
        Self { folds: 3, seed: None }
    }
}

fn default_budget() -> ResourceBudget {
    ResourceBudget::count(200)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default = "default_budget")]
    pub budget: ResourceBudget,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub tpe: TpeParams,
    /// Model-selection arms; all built-in learners when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learners: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hpo: Option<HpoSection>,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub cv: CvSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all sections have defaults")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Field-level checks that do not need any data.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.run.rounds < 1 {
            return Err(config_err("run.rounds", "must be at least 1"));
        }
        if !(self.run.ucb_c > 0.0 && self.run.ucb_c.is_finite()) {
            return Err(config_err(
                "run.ucb_c",
                format!("must be positive, got {}", self.run.ucb_c),
            ));
        }
        if self.run.partition_k < 1 {
            return Err(config_err("run.partition_k", "must be at least 1"));
        }
        if let Some(t) = self.run.timeout {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_err("run.timeout", format!("must be positive, got {t}")));
            }
        }
        if self.run.parallelism == Some(0) {
            return Err(config_err("run.parallelism", "must be at least 1"));
        }
        self.budget.validate().map_err(|e| config_err("budget.amount", e))?;
        if self.budget.mode == BudgetMode::Count && self.budget.amount < self.run.rounds as f64 {
            return Err(config_err(
                "budget.amount",
                "a count budget needs at least one evaluation per round",
            ));
        }
        self.tpe.validate().map_err(|e| config_err("tpe", e))?;
        if self.cv.folds < 2 {
            return Err(config_err("cv.folds", "must be at least 2"));
        }
        if self.dataset.csv.is_some() && self.dataset.generator.is_some() {
            return Err(config_err("dataset", "give either `generator` or `csv`, not both"));
        }
        match self.run.mode {
            Mode::ModelSelection => {
                let names = self.learner_names();
                if names.is_empty() {
                    return Err(config_err("learners", "at least one learner is required"));
                }
                let mut seen = BTreeSet::new();
                for (i, name) in names.iter().enumerate() {
                    learner_by_name(name).map_err(|e| config_err(&format!("learners[{i}]"), e))?;
                    if !seen.insert(name) {
                        return Err(config_err(
                            &format!("learners[{i}]"),
                            format!("duplicate learner `{name}`"),
                        ));
                    }
                }
            }
            Mode::Hpo => {
                self.hpo_space()?;
                if let Some(scale) = self.hpo.as_ref().and_then(|h| h.scale) {
                    if !scale.is_valid() {
                        return Err(config_err("hpo.scale", "need finite lo < hi"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn learner_names(&self) -> Vec<String> {
        self.learners
            .clone()
            .unwrap_or_else(|| builtin_learners().iter().map(|l| l.name().to_owned()).collect())
    }

    /// The target's own space, if a target is configured.
    fn target_space(&self) -> Result<Option<SearchSpace>, CliError> {
        let Some(hpo) = &self.hpo else {
            return Ok(None);
        };
        match (&hpo.learner, &hpo.objective) {
            (Some(_), Some(_)) => Err(config_err("hpo", "give either `learner` or `objective`, not both")),
            (Some(name), None) => Ok(Some(
                learner_by_name(name).map_err(|e| config_err("hpo.learner", e))?.space(),
            )),
            (None, Some(f)) => {
                if let SyntheticFunction::Sphere { dim: 0 } = f {
                    return Err(config_err("hpo.objective.dim", "must be at least 1"));
                }
                Ok(Some(f.space()))
            }
            (None, None) => Ok(None),
        }
    }

    /// The space partitioned into arms in hpo mode.
    pub fn hpo_space(&self) -> Result<SearchSpace, CliError> {
        let target = self.target_space()?;
        let custom = self.hpo.as_ref().and_then(|h| h.space.clone());
        match (target, custom) {
            (Some(t), Some(c)) => {
                let names = |s: &SearchSpace| s.params().iter().map(|p| p.name.clone()).collect::<BTreeSet<_>>();
                if names(&t) != names(&c) {
                    return Err(config_err(
                        "hpo.space",
                        format!("parameter names must match the target's: {:?}", names(&t)),
                    ));
                }
                Ok(c)
            }
            (Some(t), None) => Ok(t),
            (None, Some(c)) => Ok(c),
            (None, None) => Err(config_err("hpo", "need a `learner`, an `objective` or a `space`")),
        }
    }

    fn cv_spec(&self) -> CvSpec {
        CvSpec {
            folds: self.cv.folds,
            seed: self.cv.seed.unwrap_or(self.seeds.data),
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset, CliError> {
        let data = match &self.dataset.csv {
            Some(path) => {
                Dataset::from_csv(path).map_err(|e| config_err("dataset.csv", format!("{}: {e}", path.display())))?
            }
            None => {
                if self.dataset.n < 2 {
                    return Err(config_err("dataset.n", "need at least 2 samples"));
                }
                generate(
                    self.dataset.generator.unwrap_or(GeneratorKind::Rings),
                    self.dataset.n,
                    self.dataset.noise_features,
                    self.seeds.data,
                )
            }
        };
        if self.cv.folds > data.len() {
            return Err(config_err(
                "cv.folds",
                format!("{} folds but the dataset has {} rows", self.cv.folds, data.len()),
            ));
        }
        Ok(data)
    }

    pub fn bandit_config(&self) -> BanditConfig {
        BanditConfig {
            budget: self.budget,
            rounds: self.run.rounds,
            ucb_c: self.run.ucb_c,
            filter_seed: self.seeds.filter,
            sampling_seed: self.seeds.sampling,
            timeout: self.run.timeout.or(self.budget.default_timeout()),
            parallelism: self.run.parallelism.unwrap_or_else(default_parallelism),
        }
    }

    /// The configuration echoed into trace headers. Worker count and output
    /// path do not affect results and are left out.
    pub fn provenance(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.run.parallelism = None;
        c.run.output = None;
        serde_json::to_value(c).expect("config serializes")
    }

    pub fn run_id(&self) -> String {
        let canonical = self.provenance().to_string();
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }

    /// Builds one arm per learner or one per sub-space.
    pub fn build_arms(&self) -> Result<Vec<Arm>, CliError> {
        match self.run.mode {
            Mode::ModelSelection => {
                let data = Arc::new(self.load_dataset()?);
                let cv = self.cv_spec();
                self.learner_names()
                    .iter()
                    .map(|name| {
                        let learner = learner_by_name(name).map_err(|e| config_err("learners", e))?;
                        let space = learner.space();
                        let objective: Arc<dyn Objective> = Arc::new(LearnerObjective::new(learner, data.clone(), cv));
                        Ok(Arm::new(name.clone(), objective, space, self.tpe))
                    })
                    .collect()
            }
            Mode::Hpo => {
                let hpo = self.hpo.clone().unwrap_or_default();
                let objective: Arc<dyn Objective> = match (&hpo.learner, hpo.objective) {
                    (Some(name), _) => {
                        let learner = learner_by_name(name).map_err(|e| config_err("hpo.learner", e))?;
                        Arc::new(LearnerObjective::new(
                            learner,
                            Arc::new(self.load_dataset()?),
                            self.cv_spec(),
                        ))
                    }
                    (None, Some(f)) => {
                        let mut o = SyntheticObjective::new(f);
                        if let Some(scale) = hpo.scale {
                            o.scale = scale;
                        }
                        Arc::new(o)
                    }
                    (None, None) => return Err(config_err("hpo", "`run` needs a `learner` or an `objective` target")),
                };
                let subspaces = self.subspaces()?;
                Ok(subspaces
                    .iter()
                    .map(|s| Arm::new(s.label(), objective.clone(), s.as_search_space(), self.tpe))
                    .collect())
            }
        }
    }

    pub fn subspaces(&self) -> Result<Vec<SubSpace>, CliError> {
        partition(&self.hpo_space()?, self.run.partition_k).map_err(|e| config_err("run.partition_k", e))
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

// ---------------------------------------------------------------------------
// trace

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventBody {
    Header {
        schema_version: u32,
        config: serde_json::Value,
    },
    Evaluation(EvaluationRecord),
    Round(RoundReport),
    Final {
        best: BestResult,
        consumed: f64,
        evaluations: usize,
    },
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub index: u64,
    pub run_id: String,
    #[serde(flatten)]
    pub body: EventBody,
}

/// Serializes events to a JSON Lines stream. The first write error is kept
/// and later writes are skipped.
pub struct TraceWriter<W: Write> {
    out: W,
    run_id: String,
    next: u64,
    error: Option<io::Error>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W, run_id: impl Into<String>) -> Self {
        Self {
            out,
            run_id: run_id.into(),
            next: 0,
            error: None,
        }
    }

    pub fn emit(&mut self, body: EventBody) {
        if self.error.is_some() {
            return;
        }
        let event = TraceEvent {
            index: self.next,
            run_id: self.run_id.clone(),
            body,
        };
        self.next += 1;
        let line = serde_json::to_string(&event).expect("trace events serialize");
        if let Err(e) = writeln!(self.out, "{line}") {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TraceSink for TraceWriter<W> {
    fn on_evaluation(&mut self, record: &EvaluationRecord) {
        self.emit(EventBody::Evaluation(record.clone()));
    }

    fn on_round(&mut self, report: &RoundReport) {
        self.emit(EventBody::Round(report.clone()));
    }
}

/// Runs the scheduler for `config` and streams the trace into `out`.
pub fn execute<W: Write>(config: &RunConfig, out: W) -> Result<(bandit::RunOutcome, W), CliError> {
    config.validate()?;
    let mut arms = config.build_arms()?;
    log::info!("{} arms", arms.len());
    let mut trace = TraceWriter::new(out, config.run_id());
    trace.emit(EventBody::Header {
        schema_version: TRACE_SCHEMA_VERSION,
        config: config.provenance(),
    });
    let result = bandit::run(&config.bandit_config(), &mut arms, &mut trace);
    let outcome = match result {
        Ok(o) => o,
        Err(e @ BanditError::NoSuccessfulEvaluation) => {
            trace
                .finish()
                .map_err(|io| runtime_err(format!("writing trace: {io}")))?;
            return Err(runtime_err(e));
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    trace.emit(EventBody::Final {
        best: outcome.best.clone(),
        consumed: outcome.consumed,
        evaluations: outcome.records.len(),
    });
    let out = trace.finish().map_err(|e| runtime_err(format!("writing trace: {e}")))?;
    Ok((outcome, out))
}

// ---------------------------------------------------------------------------
// reports

/// A parsed trace with its consistency checks done.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub events: Vec<TraceEvent>,
}

impl TraceSummary {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, CliError> {
        let mut events: Vec<TraceEvent> = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| runtime_err(format!("reading trace: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let event: TraceEvent =
                serde_json::from_str(&line).map_err(|e| runtime_err(format!("trace line {}: {e}", n + 1)))?;
            if let Some(prev) = events.last() {
                if event.index <= prev.index {
                    return Err(runtime_err(format!("trace line {}: event index not increasing", n + 1)));
                }
            }
            events.push(event);
        }
        if events.is_empty() {
            return Err(runtime_err("trace is empty"));
        }
        let summary = Self { events };
        summary.check_counts()?;
        Ok(summary)
    }

    pub fn evaluations(&self) -> impl Iterator<Item = &EvaluationRecord> {
        self.events.iter().filter_map(|e| match &e.body {
            EventBody::Evaluation(r) => Some(r),
            _ => None,
        })
    }

    pub fn rounds(&self) -> impl Iterator<Item = &RoundReport> {
        self.events.iter().filter_map(|e| match &e.body {
            EventBody::Round(r) => Some(r),
            _ => None,
        })
    }

    pub fn final_result(&self) -> Option<(&BestResult, f64, usize)> {
        self.events.iter().find_map(|e| match &e.body {
            EventBody::Final {
                best,
                consumed,
                evaluations,
            } => Some((best, *consumed, *evaluations)),
            _ => None,
        })
    }

    fn check_counts(&self) -> Result<(), CliError> {
        let finals = self
            .events
            .iter()
            .filter(|e| matches!(e.body, EventBody::Final { .. }))
            .count();
        if finals > 1 {
            return Err(runtime_err("trace has more than one final event"));
        }
        let records = self.evaluations().count();
        let reported: usize = self.rounds().flat_map(|r| &r.arms).map(|a| a.evaluations).sum();
        // a partial trace may end with evaluations of an unreported round
        if self.rounds().next().is_some() && reported > records {
            return Err(runtime_err(format!(
                "round reports count {reported} evaluations but the trace has {records}"
            )));
        }
        if let Some((_, _, n)) = self.final_result() {
            if n != records || reported != records {
                return Err(runtime_err(format!(
                    "final event counts {n} evaluations, rounds {reported}, trace {records}"
                )));
            }
        }
        Ok(())
    }

    /// `(cumulative cost, best reward so far)` after every evaluation from
    /// the first success on.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        best_so_far(self.evaluations().map(|r| (r.cost, r.reward())))
    }
}

/// Running maximum of rewards over `(cost, reward)` pairs in trace order.
pub fn best_so_far(points: impl IntoIterator<Item = (f64, Option<f64>)>) -> Vec<(f64, f64)> {
    let mut spent = 0.0;
    let mut best: Option<f64> = None;
    let mut out = Vec::new();
    for (cost, reward) in points {
        spent += cost;
        if let Some(r) = reward {
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
        if let Some(b) = best {
            out.push((spent, b));
        }
    }
    out
}

pub fn write_curve(path: &Path, curve: &[(f64, f64)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| runtime_err(format!("{}: {e}", path.display()));
    w.write_record(["cumulative_cost", "best_reward"]).map_err(io)?;
    for (cost, reward) in curve {
        w.write_record([cost.to_string(), reward.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| runtime_err(format!("{}: {e}", path.display())))
}

fn print_report(summary: &TraceSummary, out: &mut dyn Write) -> io::Result<()> {
    if let Some(EventBody::Header { config, .. }) = summary.events.first().map(|e| &e.body) {
        writeln!(out, "run {}", summary.events[0].run_id)?;
        if let Some(mode) = config.pointer("/run/mode").and_then(|m| m.as_str()) {
            writeln!(out, "mode {mode}")?;
        }
    }
    for round in summary.rounds() {
        writeln!(
            out,
            "round {}: budget {:.4}, {} arms, {} survivors{}",
            round.round,
            round.budget,
            round.arms.len(),
            round.survivors.len(),
            if round.filtered {
                ""
            } else {
                " (final round, no filtering)"
            }
        )?;
        for a in &round.arms {
            let ucb = a.ucb.map_or("-".to_owned(), |u| format!("{u:.4}"));
            let p = a.advance_probability.map_or("-".to_owned(), |p| format!("{p:.4}"));
            let mark = if round.survivors.contains(&a.arm) { "+" } else { "x" };
            writeln!(
                out,
                "  {mark} {:<40} alloc {:>9.3}  evals {:>4}  ok {:>4}  ucb {:>7}  p {:>7}",
                a.arm, a.allocated, a.evaluations, a.successes, ucb, p
            )?;
        }
    }
    match summary.final_result() {
        Some((best, consumed, n)) => {
            writeln!(out, "best arm: {}", best.arm)?;
            writeln!(out, "configuration: {}", best.config)?;
            writeln!(out, "reward: {} (raw {})", best.reward, best.raw_value)?;
            writeln!(out, "consumed {consumed} over {n} evaluations")?;
        }
        None => writeln!(out, "no final result (incomplete or failed run)")?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(
    name = "boasf",
    version,
    about = "Bandit-scheduled Bayesian optimization for model selection and hyperparameter search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the search and write a JSON Lines trace.
    Run(Overrides),
    /// List the sub-spaces an hpo run would use as arms.
    Partition(Overrides),
    /// Summarize a trace and write its best-so-far curve as CSV.
    Report(ReportArgs),
}

/// Flags shadow the matching values of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Total resources: evaluations or seconds, depending on the budget mode.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long, value_parser = parse_budget_mode)]
    pub budget_mode: Option<BudgetMode>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub ucb_c: Option<f64>,
    #[arg(long)]
    pub partition_k: Option<usize>,
    /// Sets both the filter and the sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-evaluation time limit in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Trace output path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

fn parse_budget_mode(s: &str) -> Result<BudgetMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| format!("expected `count` or `time`, got `{s}`"))
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.mode {
            c.run.mode = m;
        }
        if let Some(b) = self.budget {
            c.budget.amount = b;
        }
        if let Some(m) = self.budget_mode {
            c.budget.mode = m;
        }
        if let Some(r) = self.rounds {
            c.run.rounds = r;
        }
        if let Some(u) = self.ucb_c {
            c.run.ucb_c = u;
        }
        if let Some(k) = self.partition_k {
            c.run.partition_k = k;
        }
        if let Some(s) = self.seed {
            c.seeds.filter = s;
            c.seeds.sampling = s;
        }
        if let Some(t) = self.timeout {
            c.run.timeout = Some(t);
        }
        if let Some(o) = &self.output {
            c.run.output = Some(o.clone());
        }
        if let Some(p) = self.parallelism {
            c.run.parallelism = Some(p);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Trace written by `boasf run`.
    pub trace: PathBuf,
    /// CSV output; defaults to the trace path with a `.curve.csv` suffix.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn cmd_run(overrides: &Overrides, out: &mut dyn Write) -> Result<(), CliError> {
    let config = overrides.resolve()?;
    config.validate()?;
    let path = config
        .run
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_TRACE_PATH));
    let file = File::create(&path).map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
    let (outcome, _) = execute(&config, BufWriter::new(file))?;
    let best = &outcome.best;
    let mut report = || -> io::Result<()> {
        writeln!(out, "best arm: {}", best.arm)?;
        writeln!(out, "configuration: {}", best.config)?;
        writeln!(out, "reward: {}", best.reward)?;
        writeln!(out, "trace: {}", path.display())
    };
    report().map_err(runtime_err)
}

pub fn cmd_partition(overrides: &Overrides, out: &mut dyn Write) -> Result<(), CliError> {
    let config = overrides.resolve()?;
    if config.run.partition_k < 1 {
        return Err(config_err("run.partition_k", "must be at least 1"));
    }
    let subspaces = config.subspaces()?;
    let mut print = || -> io::Result<()> {
        for (i, s) in subspaces.iter().enumerate() {
            writeln!(out, "{:>4}  {s}  {}", i + 1, s.label())?;
        }
        writeln!(out, "{} sub-spaces", subspaces.len())
    };
    print().map_err(runtime_err)
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = File::open(&args.trace).map_err(|e| runtime_err(format!("{}: {e}", args.trace.display())))?;
    let summary = TraceSummary::parse(BufReader::new(file))?;
    print_report(&summary, out).map_err(runtime_err)?;
    let curve = summary.curve();
    if curve.is_empty() {
        return Err(runtime_err("trace has no successful evaluation"));
    }
    if let Some((best, _, _)) = summary.final_result() {
        let last = curve[curve.len() - 1].1;
        if last != best.reward {
            return Err(runtime_err(format!(
                "curve ends at {last} but the final result reports {}",
                best.reward
            )));
        }
    }
    let csv_path = args.csv.clone().unwrap_or_else(|| {
        let mut p = args.trace.clone().into_os_string();
        p.push(".curve.csv");
        PathBuf::from(p)
    });
    write_curve(&csv_path, &curve)?;
    writeln!(out, "curve: {} ({} points)", csv_path.display(), curve.len()).map_err(runtime_err)
}

/// Dispatches a parsed command line.
pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(o) => cmd_run(o, out),
        Command::Partition(o) => cmd_partition(o, out),
        Command::Report(r) => cmd_report(r, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> RunConfig {
        RunConfig::from_json(json).unwrap()
    }

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        assert_eq!(c.run.rounds, 3);
        assert_eq!(c.budget, ResourceBudget::count(200));
        c.validate().unwrap();
    }

    #[test]
    fn zero_rounds_names_the_field() {
        let c = parse(r#"{"run": {"rounds": 0}}"#);
        let err = c.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("run.rounds"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = RunConfig::from_json("{\n \"run\": {\"roundz\": 2}}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("roundz") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn field_errors() {
        for (json, field) in [
            (r#"{"learners": ["knn", "svm"]}"#, "learners[1]"),
            (r#"{"learners": ["knn", "knn"]}"#, "learners[1]"),
            (r#"{"budget": {"mode": "count", "amount": 2.5}}"#, "budget.amount"),
            (r#"{"run": {"ucb_c": -1}}"#, "run.ucb_c"),
            (r#"{"run": {"mode": "hpo"}}"#, "hpo"),
            (r#"{"run": {"mode": "hpo"}, "hpo": {"learner": "svm"}}"#, "hpo.learner"),
            (r#"{"cv": {"folds": 1}}"#, "cv.folds"),
            (r#"{"tpe": {"gamma": 2}}"#, "tpe"),
        ] {
            let err = parse(json).validate().unwrap_err();
            assert!(err.to_string().contains(field), "{json}: {err}");
        }
    }

    #[test]
    fn overrides_shadow_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"run": {"rounds": 5, "ucb_c": 1.5}, "seeds": {"filter": 1, "sampling": 2}}"#,
        )
        .unwrap();
        let o = Overrides {
            config: Some(path),
            rounds: Some(2),
            seed: Some(9),
            budget: Some(40.0),
            ..Default::default()
        };
        let c = o.resolve().unwrap();
        assert_eq!(c.run.rounds, 2);
        assert_eq!(c.run.ucb_c, 1.5);
        assert_eq!((c.seeds.filter, c.seeds.sampling), (9, 9));
        assert_eq!(c.budget.amount, 40.0);
    }

    #[test]
    fn provenance_ignores_workers_and_output() {
        let mut a = RunConfig::default();
        let mut b = RunConfig::default();
        a.run.parallelism = Some(1);
        b.run.parallelism = Some(4);
        b.run.output = Some("x.jsonl".into());
        assert_eq!(a.run_id(), b.run_id());
        b.seeds.sampling = 1;
        assert_ne!(a.run_id(), b.run_id());
        assert_eq!(a.run_id().len(), 16);
    }

    #[test]
    fn hpo_logistic_regression_has_eight_arms() {
        let c = parse(r#"{"run": {"mode": "hpo", "partition_k": 2}, "hpo": {"learner": "logistic_regression"}}"#);
        c.validate().unwrap();
        assert_eq!(c.subspaces().unwrap().len(), 8);
    }

    #[test]
    fn space_override_must_match_names() {
        let c = parse(
            r#"{"run": {"mode": "hpo"}, "hpo": {"objective": {"name": "branin"},
                "space": [{"name": "x1", "type": "continuous", "low": 0, "high": 1}]}}"#,
        );
        assert!(c.validate().unwrap_err().to_string().contains("hpo.space"));
    }

    #[test]
    fn curve_is_running_max() {
        let curve = best_so_far([(1.0, Some(0.3)), (1.0, Some(0.2)), (1.0, Some(0.5))]);
        assert_eq!(curve, [(1.0, 0.3), (2.0, 0.3), (3.0, 0.5)]);
        let curve = best_so_far([(1.0, None), (1.0, Some(0.2)), (1.0, None)]);
        assert_eq!(curve, [(2.0, 0.2), (3.0, 0.2)]);
    }

    #[test]
    fn empty_trace_fails() {
        let err = TraceSummary::parse(io::Cursor::new("")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn trace_round_trip() {
        let c = parse(
            r#"{"run": {"mode": "hpo", "rounds": 2, "parallelism": 1}, "budget": {"mode": "count", "amount": 16},
                "hpo": {"objective": {"name": "branin"}}}"#,
        );
        let (outcome, bytes) = execute(&c, Vec::new()).unwrap();
        let summary = TraceSummary::parse(io::Cursor::new(&bytes)).unwrap();
        assert!(matches!(summary.events[0].body, EventBody::Header { .. }));
        let records: Vec<EvaluationRecord> = summary.evaluations().cloned().collect();
        assert_eq!(records, outcome.records);
        assert_eq!(summary.rounds().cloned().collect::<Vec<_>>(), outcome.rounds);
        let (best, _, n) = summary.final_result().unwrap();
        assert_eq!(best, &outcome.best);
        assert_eq!(n, records.len());
        assert_eq!(summary.curve().last().unwrap().1, outcome.best.reward);
        assert!(summary.events.windows(2).all(|w| w[0].index < w[1].index));
    }
}
