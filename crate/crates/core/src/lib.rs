//! Budget-aware hyperparameter search that treats candidate learners or
//! search sub-spaces as bandit arms, tunes each arm with a Tree-structured
//! Parzen Estimator, and filters arms between rounds by Gaussian UCB.

pub mod bandit;
pub mod cli;
pub mod evaluator;
pub mod space;
pub mod tasks;
pub mod tpe;

pub use bandit::{run, run_with_clock, Arm, BanditConfig, BanditError, RunOutcome};
pub use evaluator::{BudgetMode, Objective, ResourceBudget, RewardScale};
pub use space::{partition, Configuration, ParamDomain, ParamValue, SearchSpace, SubSpace};
pub use tpe::{TpeModel, TpeParams};
