//! Objective evaluation under resource accounting.
//!
//! An [`Objective`] produces a raw value for a configuration. The
//! [`Evaluator`] times it against a [`Clock`], enforces the per-evaluation
//! timeout, turns panics and errors into failure records, and maps raw
//! values into rewards in `[0, 1]` with the objective's declared
//! [`RewardScale`].

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::Arm;
use crate::space::Configuration;

/// Smallest cost charged for one evaluation in time mode, in seconds.
pub const MIN_TIME_COST: f64 = 1e-6;

/// Per-evaluation time limit applied in time mode unless overridden.
pub const DEFAULT_TIME_MODE_TIMEOUT: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetMode {
    /// Wall-clock seconds.
    #[serde(alias = "seconds")]
    Time,
    /// Number of evaluations.
    #[serde(alias = "evaluations")]
    Count,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("budget amount must be positive and finite, got {0}")]
    NonPositive(f64),
    #[error("count budgets must be whole numbers, got {0}")]
    Fractional(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceBudget {
    pub mode: BudgetMode,
    pub amount: f64,
}

impl ResourceBudget {
    pub fn count(n: u64) -> Self {
        Self {
            mode: BudgetMode::Count,
            amount: n as f64,
        }
    }

    pub fn seconds(s: f64) -> Self {
        Self {
            mode: BudgetMode::Time,
            amount: s,
        }
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        if !(self.amount > 0.0 && self.amount.is_finite()) {
            return Err(BudgetError::NonPositive(self.amount));
        }
        if self.mode == BudgetMode::Count && self.amount.fract() != 0.0 {
            return Err(BudgetError::Fractional(self.amount));
        }
        Ok(())
    }

    /// The per-evaluation limit used when none is configured: none in count
    /// mode.
    pub fn default_timeout(&self) -> Option<f64> {
        match self.mode {
            BudgetMode::Time => Some(DEFAULT_TIME_MODE_TIMEOUT),
            BudgetMode::Count => None,
        }
    }

    /// The per-round share `R / r`.
    pub fn per_round(&self, rounds: usize) -> f64 {
        self.amount / rounds as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Maximize,
    Minimize,
}

/// Declared raw-value bounds used to map raw values into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScale {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub orientation: Orientation,
}

impl RewardScale {
    pub const UNIT: RewardScale = RewardScale {
        lo: 0.0,
        hi: 1.0,
        orientation: Orientation::Maximize,
    };

    pub fn new(lo: f64, hi: f64, orientation: Orientation) -> Self {
        Self { lo, hi, orientation }
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        let x = ((raw - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        match self.orientation {
            Orientation::Maximize => x,
            Orientation::Minimize => 1.0 - x,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ObjectiveError(pub String);

impl ObjectiveError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

/// Something worth optimizing. Implementations are shared between workers
/// and must tolerate concurrent calls on distinct arms.
pub trait Objective: Send + Sync {
    /// Raw objective value. `seed` drives any randomness inside the call.
    fn evaluate(&self, config: &Configuration, seed: u64) -> Result<f64, ObjectiveError>;

    fn scale(&self) -> RewardScale;
}

impl<F> Objective for (F, RewardScale)
where
    F: Fn(&Configuration, u64) -> Result<f64, ObjectiveError> + Send + Sync,
{
    fn evaluate(&self, config: &Configuration, seed: u64) -> Result<f64, ObjectiveError> {
        (self.0)(config, seed)
    }

    fn scale(&self) -> RewardScale {
        self.1
    }
}

/// Time source in seconds.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;

    /// Simulated clocks only move when objectives advance them, so timeouts
    /// are checked after the call instead of preempting it.
    fn is_simulated(&self) -> bool {
        false
    }
}

#[derive(Debug)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Manually advanced clock for deterministic accounting tests.
#[derive(Debug, Default)]
pub struct SimulatedClock {
    now: Mutex<f64>,
}

impl SimulatedClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, seconds: f64) {
        *self.now.lock().expect("clock poisoned") += seconds;
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> f64 {
        *self.now.lock().expect("clock poisoned")
    }

    fn is_simulated(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Timeout,
    ObjectiveError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Success { raw_value: f64, reward: f64 },
    Failure { reason: FailureReason, message: String },
}

impl Outcome {
    pub fn reward(&self) -> Option<f64> {
        match self {
            Outcome::Success { reward, .. } => Some(*reward),
            Outcome::Failure { .. } => None,
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success { .. })
    }
}

/// One evaluation of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub arm: String,
    /// Per-arm sequence number, starting at 0.
    pub seq: u64,
    pub config: Configuration,
    #[serde(flatten)]
    pub outcome: Outcome,
    /// Resource units charged against the budget.
    pub cost: f64,
    /// Measured duration; omitted in count mode so traces stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl EvaluationRecord {
    pub fn reward(&self) -> Option<f64> {
        self.outcome.reward()
    }
}

/// Runs objectives and produces [`EvaluationRecord`]s.
#[derive(Clone)]
pub struct Evaluator {
    mode: BudgetMode,
    timeout: Option<f64>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Evaluator")
            .field("mode", &self.mode)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| (*s).to_owned())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "objective panicked".to_owned())
}

impl Evaluator {
    pub fn new(mode: BudgetMode, timeout: Option<f64>, clock: Arc<dyn Clock>) -> Self {
        Self { mode, timeout, clock }
    }

    pub fn mode(&self) -> BudgetMode {
        self.mode
    }

    pub fn timeout(&self) -> Option<f64> {
        self.timeout
    }

    /// Evaluates `config`; never fails, failures become records.
    pub fn evaluate(
        &self,
        arm: &str,
        seq: u64,
        objective: &Arc<dyn Objective>,
        config: Configuration,
        seed: u64,
    ) -> EvaluationRecord {
        let start = self.clock.now();
        let result = match self.timeout {
            Some(limit) if !self.clock.is_simulated() => Self::call_with_watchdog(objective, &config, seed, limit),
            _ => Self::call_inline(objective, &config, seed),
        };
        let elapsed = (self.clock.now() - start).max(0.0);

        let outcome = match result {
            Ok(_) if self.timeout.is_some_and(|t| elapsed > t) => Outcome::Failure {
                reason: FailureReason::Timeout,
                message: format!("evaluation took {elapsed:.3}s"),
            },
            Ok(raw) if !raw.is_finite() => Outcome::Failure {
                reason: FailureReason::ObjectiveError,
                message: format!("non-finite objective value {raw}"),
            },
            Ok(raw) => Outcome::Success {
                raw_value: raw,
                reward: objective.scale().normalize(raw),
            },
            Err(failure) => failure,
        };
        let (cost, wall_time) = match self.mode {
            BudgetMode::Count => (1.0, None),
            BudgetMode::Time => (elapsed.max(MIN_TIME_COST), Some(elapsed)),
        };
        EvaluationRecord {
            arm: arm.to_owned(),
            seq,
            config,
            outcome,
            cost,
            wall_time,
        }
    }

    fn call_inline(objective: &Arc<dyn Objective>, config: &Configuration, seed: u64) -> Result<f64, Outcome> {
        match catch_unwind(AssertUnwindSafe(|| objective.evaluate(config, seed))) {
            Ok(Ok(v)) => Ok(v),
            Ok(Err(e)) => Err(Outcome::Failure {
                reason: FailureReason::ObjectiveError,
                message: e.0,
            }),
            Err(payload) => Err(Outcome::Failure {
                reason: FailureReason::ObjectiveError,
                message: panic_message(payload),
            }),
        }
    }

    /// Runs the objective on a helper thread and stops waiting after
    /// `limit` seconds. A timed-out call is abandoned, not killed.
    fn call_with_watchdog(
        objective: &Arc<dyn Objective>,
        config: &Configuration,
        seed: u64,
        limit: f64,
    ) -> Result<f64, Outcome> {
        let (tx, rx) = mpsc::channel();
        let objective = Arc::clone(objective);
        let config = config.clone();
        std::thread::spawn(move || {
            let _ = tx.send(Self::call_inline(&objective, &config, seed));
        });
        match rx.recv_timeout(Duration::from_secs_f64(limit)) {
            Ok(result) => result,
            Err(RecvTimeoutError::Timeout) => Err(Outcome::Failure {
                reason: FailureReason::Timeout,
                message: format!("exceeded {limit}s limit"),
            }),
            Err(RecvTimeoutError::Disconnected) => Err(Outcome::Failure {
                reason: FailureReason::ObjectiveError,
                message: "evaluation thread died".to_owned(),
            }),
        }
    }
}

/// Spends `share` resource units on `arm`: suggest, evaluate, update, until
/// the share is used up. In count mode this is exactly `⌊share⌋`
/// evaluations; in time mode the last evaluation may run past the share.
pub fn run_arm_round(arm: &mut Arm, share: f64, evaluator: &Evaluator) -> Vec<EvaluationRecord> {
    let mut records = Vec::new();
    let step = |arm: &mut Arm| {
        let config = arm.suggest();
        let seed = arm.next_seed();
        let seq = arm.take_seq();
        let record = evaluator.evaluate(arm.id(), seq, arm.objective(), config, seed);
        arm.observe(&record);
        record
    };
    match evaluator.mode() {
        BudgetMode::Count => {
            let n = share.max(0.0).floor() as u64;
            for _ in 0..n {
                records.push(step(arm));
            }
        }
        BudgetMode::Time => {
            let mut remaining = share;
            while remaining > 0.0 {
                let record = step(arm);
                remaining -= record.cost;
                records.push(record);
            }
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ParamDomain, ParamValue, SearchSpace};
    use crate::tpe::TpeParams;

    fn unit_space() -> SearchSpace {
        SearchSpace::from_pairs([("x", ParamDomain::continuous(0.0, 1.0))]).unwrap()
    }

    fn x_config(x: f64) -> Configuration {
        Configuration::new().with("x", ParamValue::Real(x))
    }

    fn constant(value: f64, scale: RewardScale) -> Arc<dyn Objective> {
        Arc::new((
            move |_: &Configuration, _: u64| -> Result<f64, ObjectiveError> { Ok(value) },
            scale,
        ))
    }

    fn count_evaluator() -> Evaluator {
        Evaluator::new(BudgetMode::Count, None, Arc::new(WallClock::new()))
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(RewardScale::UNIT.normalize(0.83), 0.83);
        let s = RewardScale::new(0.0, 300.0, Orientation::Minimize);
        assert_eq!(s.normalize(300.0), 0.0);
        assert_eq!(s.normalize(0.0), 1.0);
        assert_eq!(s.normalize(-10.0), 1.0);
        assert_eq!(s.normalize(1e6), 0.0);
    }

    #[test]
    fn success_record() {
        let rec = count_evaluator().evaluate("a", 0, &constant(0.83, RewardScale::UNIT), x_config(0.1), 0);
        assert_eq!(rec.reward(), Some(0.83));
        assert_eq!(rec.cost, 1.0);
        assert_eq!(rec.wall_time, None);
    }

    #[test]
    fn error_and_panic_become_failures() {
        let failing: Arc<dyn Objective> = Arc::new((
            |_: &Configuration, _: u64| -> Result<f64, ObjectiveError> { Err(ObjectiveError::new("boom")) },
            RewardScale::UNIT,
        ));
        let rec = count_evaluator().evaluate("a", 0, &failing, x_config(0.1), 0);
        assert_eq!(
            rec.outcome,
            Outcome::Failure {
                reason: FailureReason::ObjectiveError,
                message: "boom".into()
            }
        );
        let panicking: Arc<dyn Objective> = Arc::new((
            |_: &Configuration, _: u64| -> Result<f64, ObjectiveError> { panic!("kaboom") },
            RewardScale::UNIT,
        ));
        let rec = count_evaluator().evaluate("a", 0, &panicking, x_config(0.1), 0);
        assert!(matches!(
            rec.outcome,
            Outcome::Failure { reason: FailureReason::ObjectiveError, ref message } if message == "kaboom"
        ));
        let nan = constant(f64::NAN, RewardScale::UNIT);
        assert!(!count_evaluator()
            .evaluate("a", 0, &nan, x_config(0.1), 0)
            .outcome
            .is_success());
    }

    #[test]
    fn wall_clock_timeout_is_enforced() {
        let slow: Arc<dyn Objective> = Arc::new((
            |_: &Configuration, _: u64| -> Result<f64, ObjectiveError> {
                std::thread::sleep(Duration::from_millis(500));
                Ok(1.0)
            },
            RewardScale::UNIT,
        ));
        let ev = Evaluator::new(BudgetMode::Time, Some(0.05), Arc::new(WallClock::new()));
        let rec = ev.evaluate("a", 0, &slow, x_config(0.1), 0);
        assert!(matches!(
            rec.outcome,
            Outcome::Failure {
                reason: FailureReason::Timeout,
                ..
            }
        ));
        assert!(rec.cost >= 0.05 && rec.cost < 0.4, "{}", rec.cost);
    }

    #[test]
    fn simulated_timeout_charges_elapsed() {
        let clock = Arc::new(SimulatedClock::new());
        let c = Arc::clone(&clock);
        let slow: Arc<dyn Objective> = Arc::new((
            move |_: &Configuration, _: u64| -> Result<f64, ObjectiveError> {
                c.advance(7.0);
                Ok(0.5)
            },
            RewardScale::UNIT,
        ));
        let ev = Evaluator::new(BudgetMode::Time, Some(5.0), clock);
        let rec = ev.evaluate("a", 0, &slow, x_config(0.1), 0);
        assert!(matches!(
            rec.outcome,
            Outcome::Failure {
                reason: FailureReason::Timeout,
                ..
            }
        ));
        assert_eq!(rec.cost, 7.0);
    }

    #[test]
    fn count_share_gives_exact_record_count() {
        let mut arm = Arm::new(
            "a",
            constant(0.4, RewardScale::UNIT),
            unit_space(),
            TpeParams::default(),
        );
        let records = run_arm_round(&mut arm, 3.0, &count_evaluator());
        assert_eq!(records.len(), 3);
        assert_eq!(records.iter().map(|r| r.seq).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(arm.rewards(), &[0.4, 0.4, 0.4]);
        assert_eq!(arm.tpe().observations().len(), 3);
    }

    #[test]
    fn failures_do_not_touch_statistics() {
        let failing: Arc<dyn Objective> = Arc::new((
            |_: &Configuration, _: u64| -> Result<f64, ObjectiveError> { Err(ObjectiveError::new("no")) },
            RewardScale::UNIT,
        ));
        let mut arm = Arm::new("a", failing, unit_space(), TpeParams::default());
        let records = run_arm_round(&mut arm, 5.0, &count_evaluator());
        assert_eq!(records.len(), 5);
        assert!(records.iter().all(|r| !r.outcome.is_success()));
        assert!(arm.rewards().is_empty());
        assert!(arm.tpe().observations().is_empty());
    }

    #[test]
    fn time_share_overruns_by_at_most_one_evaluation() {
        let clock = Arc::new(SimulatedClock::new());
        let c = Arc::clone(&clock);
        let obj: Arc<dyn Objective> = Arc::new((
            move |_: &Configuration, _: u64| -> Result<f64, ObjectiveError> {
                c.advance(3.0);
                Ok(0.5)
            },
            RewardScale::UNIT,
        ));
        let ev = Evaluator::new(BudgetMode::Time, None, clock);
        let mut arm = Arm::new("a", obj, unit_space(), TpeParams::default());
        let records = run_arm_round(&mut arm, 10.0, &ev);
        let total: f64 = records.iter().map(|r| r.cost).sum();
        assert!((3..=4).contains(&records.len()));
        assert!(total >= 10.0);
        assert!(total - 10.0 < 3.0 + 1e-12);
        assert!(records.iter().all(|r| r.wall_time == Some(3.0)));
    }

    #[test]
    fn record_serde_shape() {
        let rec = count_evaluator().evaluate("knn", 4, &constant(0.5, RewardScale::UNIT), x_config(0.25), 0);
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            json,
            r#"{"arm":"knn","seq":4,"config":{"x":0.25},"status":"success","raw_value":0.5,"reward":0.5,"cost":1.0}"#
        );
        assert_eq!(serde_json::from_str::<EvaluationRecord>(&json).unwrap(), rec);
    }

    #[test]
    fn budget_validation() {
        assert!(ResourceBudget::count(10).validate().is_ok());
        assert!(ResourceBudget::seconds(0.0).validate().is_err());
        assert!(ResourceBudget {
            mode: BudgetMode::Count,
            amount: 2.5
        }
        .validate()
        .is_err());
        assert_eq!(ResourceBudget::count(30).per_round(3), 10.0);
        assert_eq!(ResourceBudget::count(30).default_timeout(), None);
        assert_eq!(ResourceBudget::seconds(5.0).default_timeout(), Some(120.0));
    }
}
