//! Adaptive successive filtering over bandit arms.
//!
//! Every round each live arm spends its resource share on
//! suggest → evaluate → update cycles driven by its own TPE model. Between
//! rounds the arms are scored with a Gaussian UCB over their whole reward
//! history, the scores are min-max scaled into advance probabilities, each
//! arm survives an independent Bernoulli draw, and the next round's budget
//! is split among survivors by a softmax over their scores. The first round
//! splits its budget equally.

use std::cmp::Ordering;
use std::sync::Arc;

use log::{debug, info};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{
    run_arm_round, BudgetError, BudgetMode, Clock, EvaluationRecord, Evaluator, Objective, Outcome, ResourceBudget,
    WallClock,
};
use crate::space::{Configuration, SearchSpace};
use crate::tpe::{TpeModel, TpeParams};

/// Default exploration weight in the UCB score.
pub const DEFAULT_UCB_C: f64 = 2.0;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("no successful evaluation")]
    NoSuccessfulEvaluation,
    #[error("no arms to run")]
    NoArms,
    #[error("rounds must be at least 1")]
    NoRounds,
    #[error("a count budget of {amount} cannot cover {rounds} rounds")]
    BudgetBelowRounds { amount: f64, rounds: usize },
    #[error("ucb_c must be positive and finite, got {0}")]
    InvalidUcbC(f64),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// One competitor: an objective restricted to a search space, with its own
/// TPE model and reward history.
pub struct Arm {
    id: String,
    objective: Arc<dyn Objective>,
    tpe: TpeModel,
    rewards: Vec<f64>,
    alive: bool,
    rng: ChaCha8Rng,
    next_seq: u64,
}

impl std::fmt::Debug for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Arm")
            .field("id", &self.id)
            .field("rewards", &self.rewards.len())
            .field("alive", &self.alive)
            .finish_non_exhaustive()
    }
}

impl Arm {
    pub fn new(id: impl Into<String>, objective: Arc<dyn Objective>, space: SearchSpace, tpe: TpeParams) -> Self {
        Self {
            id: id.into(),
            objective,
            tpe: TpeModel::new(space, tpe),
            rewards: Vec::new(),
            alive: true,
            rng: ChaCha8Rng::seed_from_u64(0),
            next_seq: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn tpe(&self) -> &TpeModel {
        &self.tpe
    }

    /// Rewards of successful evaluations, oldest first.
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    pub fn mean_reward(&self) -> Option<f64> {
        (!self.rewards.is_empty()).then(|| self.rewards.iter().sum::<f64>() / self.rewards.len() as f64)
    }

    /// Reseeds the arm's private sampling stream.
    pub fn seed(&mut self, seed: u64, stream: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.rng.set_stream(stream);
    }

    pub(crate) fn suggest(&mut self) -> Configuration {
        self.tpe.suggest(&mut self.rng)
    }

    pub(crate) fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub(crate) fn take_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Folds a finished evaluation into the arm. Failures are ignored.
    pub fn observe(&mut self, record: &EvaluationRecord) {
        if let Some(reward) = record.reward() {
            self.tpe
                .update(record.config.clone(), 1.0 - reward)
                .expect("suggested configurations lie in the arm's space");
            self.rewards.push(reward);
        }
    }
}

/// `μ + c·σ/√N` with the population standard deviation. `None` when there
/// are no rewards.
pub fn gaussian_ucb(rewards: &[f64], c: f64) -> Option<f64> {
    if rewards.is_empty() {
        return None;
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Some(mean + c * var.sqrt() / n.sqrt())
}

/// Min-max scaled scores. When every score is equal all arms get 1.
pub fn advance_probabilities(ucbs: &[f64]) -> Vec<f64> {
    let min = ucbs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ucbs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return vec![1.0; ucbs.len()];
    }
    ucbs.iter().map(|u| (u - min) / (max - min)).collect()
}

/// Indices of arms that survive independent Bernoulli draws. One draw is
/// taken per arm regardless of its probability. If nothing survives, the
/// most probable arm is kept.
pub fn filter_arms<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Vec<usize> {
    let mut survivors: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| {
            let u: f64 = rng.random();
            (p >= 1.0 || (p > 0.0 && u < p)).then_some(i)
        })
        .collect();
    if survivors.is_empty() && !probs.is_empty() {
        let best = (0..probs.len())
            .max_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(b.cmp(&a)))
            .expect("non-empty");
        survivors.push(best);
    }
    survivors
}

fn softmax(ucbs: &[f64]) -> Vec<f64> {
    let max = ucbs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = ucbs.iter().map(|u| (u - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax shares of `budget`.
pub fn allocate_resources(ucbs: &[f64], budget: f64) -> Vec<f64> {
    softmax(ucbs).into_iter().map(|p| p * budget).collect()
}

/// Integer softmax shares summing to `total`, rounded by largest remainder.
/// Every arm gets at least one unit while `total` allows it; units for the
/// floor are taken from the largest allocations.
pub fn allocate_counts(ucbs: &[f64], total: u64) -> Vec<u64> {
    let n = ucbs.len();
    if n == 0 {
        return Vec::new();
    }
    let ideal = allocate_resources(ucbs, total as f64);
    let mut alloc: Vec<u64> = ideal.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = alloc.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.total_cmp(&ra).then(ucbs[b].total_cmp(&ucbs[a])).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned) as usize) {
        alloc[i] += 1;
    }

    // floor of one unit per arm, best-scored arms first
    let mut by_score: Vec<usize> = (0..n).collect();
    by_score.sort_by(|&a, &b| ucbs[b].total_cmp(&ucbs[a]).then(a.cmp(&b)));
    for &i in &by_score {
        if alloc[i] > 0 {
            continue;
        }
        // donor: the largest allocation above one; among equals the lowest score
        let donor = (0..n).filter(|&j| alloc[j] > 1).max_by(|&a, &b| {
            alloc[a]
                .cmp(&alloc[b])
                .then(ucbs[b].total_cmp(&ucbs[a]))
                .then(b.cmp(&a))
        });
        match donor {
            Some(j) => {
                alloc[j] -= 1;
                alloc[i] += 1;
            }
            None => break,
        }
    }
    alloc
}

fn equal_split(n: usize, budget: f64, mode: BudgetMode) -> Vec<f64> {
    match mode {
        BudgetMode::Time => vec![budget / n as f64; n],
        BudgetMode::Count => allocate_counts(&vec![0.0; n], budget.floor() as u64)
            .into_iter()
            .map(|c| c as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig {
    pub budget: ResourceBudget,
    pub rounds: usize,
    pub ucb_c: f64,
    pub filter_seed: u64,
    pub sampling_seed: u64,
    /// Per-evaluation time limit in seconds.
    pub timeout: Option<f64>,
    /// Maximum number of arms evaluated concurrently.
    pub parallelism: usize,
}

impl BanditConfig {
    pub fn new(budget: ResourceBudget, rounds: usize) -> Self {
        Self {
            budget,
            rounds,
            ucb_c: DEFAULT_UCB_C,
            filter_seed: 0,
            sampling_seed: 0,
            timeout: budget.default_timeout(),
            parallelism: 1,
        }
    }

    pub fn validate(&self) -> Result<(), BanditError> {
        self.budget.validate()?;
        if self.rounds < 1 {
            return Err(BanditError::NoRounds);
        }
        if self.budget.mode == BudgetMode::Count && self.budget.amount < self.rounds as f64 {
            return Err(BanditError::BudgetBelowRounds {
                amount: self.budget.amount,
                rounds: self.rounds,
            });
        }
        if !(self.ucb_c > 0.0 && self.ucb_c.is_finite()) {
            return Err(BanditError::InvalidUcbC(self.ucb_c));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRoundStats {
    pub arm: String,
    pub allocated: f64,
    pub evaluations: usize,
    pub successes: usize,
    pub cost: f64,
    /// Score after this round's evaluations; `None` without any success.
    pub ucb: Option<f64>,
    /// `None` in the last round, where no filtering happens.
    pub advance_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// 1-based.
    pub round: usize,
    pub budget: f64,
    pub arms: Vec<ArmRoundStats>,
    /// Arms that advance (the last round keeps every participant).
    pub survivors: Vec<String>,
    pub filtered: bool,
}

impl RoundReport {
    pub fn total_allocated(&self) -> f64 {
        self.arms.iter().map(|a| a.allocated).sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.arms.iter().map(|a| a.cost).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResult {
    pub arm: String,
    pub config: Configuration,
    pub reward: f64,
    pub raw_value: f64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub best: BestResult,
    pub rounds: Vec<RoundReport>,
    pub records: Vec<EvaluationRecord>,
    pub consumed: f64,
}

/// Receives trace events as the scheduler produces them. Records of a round
/// arrive after the round's barrier, in arm order.
pub trait TraceSink {
    fn on_evaluation(&mut self, _record: &EvaluationRecord) {}
    fn on_round(&mut self, _report: &RoundReport) {}
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {}

pub fn run(config: &BanditConfig, arms: &mut [Arm], sink: &mut dyn TraceSink) -> Result<RunOutcome, BanditError> {
    run_with_clock(config, arms, Arc::new(WallClock::new()), sink)
}

pub fn run_with_clock(
    config: &BanditConfig,
    arms: &mut [Arm],
    clock: Arc<dyn Clock>,
    sink: &mut dyn TraceSink,
) -> Result<RunOutcome, BanditError> {
    config.validate()?;
    if arms.is_empty() {
        return Err(BanditError::NoArms);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism.max(1))
        .build()
        .map_err(|e| BanditError::Pool(e.to_string()))?;
    let evaluator = Evaluator::new(config.budget.mode, config.timeout, clock);
    let mode = config.budget.mode;
    let per_round = config.budget.per_round(config.rounds);
    let mut filter_rng = ChaCha8Rng::seed_from_u64(config.filter_seed);

    for (i, arm) in arms.iter_mut().enumerate() {
        arm.alive = true;
        arm.seed(config.sampling_seed, i as u64);
    }

    let mut rounds = Vec::with_capacity(config.rounds);
    let mut records: Vec<EvaluationRecord> = Vec::new();
    let mut consumed = 0.0;

    for round in 0..config.rounds {
        if mode == BudgetMode::Time && consumed >= config.budget.amount {
            info!("time budget exhausted before round {}", round + 1);
            break;
        }
        let live: Vec<usize> = (0..arms.len()).filter(|&i| arms[i].alive).collect();
        let shares: Vec<f64> = if round == 0 {
            equal_split(live.len(), per_round, mode)
        } else {
            let ucbs: Vec<f64> = live
                .iter()
                .map(|&i| gaussian_ucb(&arms[i].rewards, config.ucb_c).expect("live arms have rewards"))
                .collect();
            match mode {
                BudgetMode::Time => allocate_resources(&ucbs, per_round),
                BudgetMode::Count => allocate_counts(&ucbs, per_round.floor() as u64)
                    .into_iter()
                    .map(|c| c as f64)
                    .collect(),
            }
        };
        debug!("round {} shares {:?}", round + 1, shares);

        let mut jobs: Vec<(&mut Arm, f64)> = arms
            .iter_mut()
            .filter(|a| a.alive)
            .zip(shares.iter().copied())
            .collect();
        let results: Vec<Vec<EvaluationRecord>> = pool.install(|| {
            jobs.par_iter_mut()
                .map(|(arm, share)| run_arm_round(arm, *share, &evaluator))
                .collect()
        });
        drop(jobs);

        let mut stats = Vec::with_capacity(live.len());
        let mut ucbs = Vec::with_capacity(live.len());
        for ((&i, &share), recs) in live.iter().zip(&shares).zip(&results) {
            for r in recs {
                sink.on_evaluation(r);
            }
            let cost: f64 = recs.iter().map(|r| r.cost).sum();
            consumed += cost;
            let ucb = gaussian_ucb(&arms[i].rewards, config.ucb_c);
            ucbs.push(ucb);
            stats.push(ArmRoundStats {
                arm: arms[i].id.clone(),
                allocated: share,
                evaluations: recs.len(),
                successes: recs.iter().filter(|r| r.outcome.is_success()).count(),
                cost,
                ucb,
                advance_probability: None,
            });
        }
        records.extend(results.into_iter().flatten());

        if ucbs.iter().all(Option::is_none) {
            return Err(BanditError::NoSuccessfulEvaluation);
        }

        let last = round + 1 == config.rounds;
        let survivors: Vec<usize> = if last {
            live.clone()
        } else {
            // arms without any success are discarded outright
            let scored: Vec<usize> = (0..live.len()).filter(|&j| ucbs[j].is_some()).collect();
            let scores: Vec<f64> = scored.iter().map(|&j| ucbs[j].unwrap()).collect();
            let scaled = advance_probabilities(&scores);
            let mut probs = vec![0.0; live.len()];
            for (&j, p) in scored.iter().zip(scaled) {
                probs[j] = p;
            }
            for (s, p) in stats.iter_mut().zip(&probs) {
                s.advance_probability = Some(*p);
            }
            filter_arms(&probs, &mut filter_rng)
                .into_iter()
                .map(|j| live[j])
                .collect()
        };
        for &i in &live {
            arms[i].alive = survivors.contains(&i);
        }
        let report = RoundReport {
            round: round + 1,
            budget: per_round,
            arms: stats,
            survivors: survivors.iter().map(|&i| arms[i].id.clone()).collect(),
            filtered: !last,
        };
        info!(
            "round {}: {} evaluations, {} survivors",
            report.round,
            report.arms.iter().map(|a| a.evaluations).sum::<usize>(),
            report.survivors.len()
        );
        sink.on_round(&report);
        rounds.push(report);
    }

    let best = select_best(&records, arms).ok_or(BanditError::NoSuccessfulEvaluation)?;
    Ok(RunOutcome {
        best,
        rounds,
        records,
        consumed,
    })
}

/// Highest reward wins. Ties prefer arms still alive at the end, then the
/// higher mean reward, then the earlier record.
fn select_best(records: &[EvaluationRecord], arms: &[Arm]) -> Option<BestResult> {
    let arm_of = |id: &str| arms.iter().find(|a| a.id == id);
    let key = |r: &EvaluationRecord| {
        let arm = arm_of(&r.arm);
        (
            r.reward().unwrap_or(f64::NEG_INFINITY),
            arm.is_some_and(|a| a.alive),
            arm.and_then(Arm::mean_reward).unwrap_or(f64::NEG_INFINITY),
        )
    };
    let cmp =
        |a: &(f64, bool, f64), b: &(f64, bool, f64)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2));
    let mut best: Option<(usize, (f64, bool, f64))> = None;
    for (i, r) in records.iter().enumerate() {
        if !r.outcome.is_success() {
            continue;
        }
        let k = key(r);
        if best.as_ref().is_none_or(|(_, bk)| cmp(&k, bk) == Ordering::Greater) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| {
        let r = &records[i];
        let Outcome::Success { raw_value, reward } = r.outcome else {
            unreachable!("only successes are candidates")
        };
        BestResult {
            arm: r.arm.clone(),
            config: r.config.clone(),
            reward,
            raw_value,
            seq: r.seq,
        }
    })
}
