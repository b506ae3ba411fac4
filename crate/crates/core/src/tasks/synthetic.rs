use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluator::{Objective, ObjectiveError, Orientation, RewardScale};
use crate::space::{Configuration, ParamDomain, SearchSpace};

/// Global minimum of Branin on `[-5, 10] × [0, 15]`.
pub const BRANIN_MINIMUM: f64 = 0.397_887_357_729_738_2;

pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// 1 with probability `mean`, else 0.
pub fn planted_bernoulli<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if rng.random::<f64>() < mean {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum SyntheticFunction {
    Branin,
    Sphere {
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

fn default_dim() -> usize {
    2
}

impl SyntheticFunction {
    pub fn space(&self) -> SearchSpace {
        match self {
            SyntheticFunction::Branin => SearchSpace::from_pairs([
                ("x1", ParamDomain::continuous(-5.0, 10.0)),
                ("x2", ParamDomain::continuous(0.0, 15.0)),
            ]),
            SyntheticFunction::Sphere { dim } => {
                SearchSpace::from_pairs((0..*dim).map(|i| (format!("x{i}"), ParamDomain::continuous(-5.0, 5.0))))
            }
        }
        .expect("static space")
    }

    /// Raw bounds over the whole domain, for reward normalization.
    pub fn default_scale(&self) -> RewardScale {
        match self {
            // max over the domain is about 308.13 at (-5, 0)
            SyntheticFunction::Branin => RewardScale::new(0.0, 310.0, Orientation::Minimize),
            SyntheticFunction::Sphere { dim } => RewardScale::new(0.0, 25.0 * *dim as f64, Orientation::Minimize),
        }
    }

    pub fn value(&self, config: &Configuration) -> Result<f64, ObjectiveError> {
        let get = |name: &str| {
            config
                .real(name)
                .ok_or_else(|| ObjectiveError::new(format!("missing real parameter `{name}`")))
        };
        match self {
            SyntheticFunction::Branin => Ok(branin(get("x1")?, get("x2")?)),
            SyntheticFunction::Sphere { dim } => {
                let x = (0..*dim)
                    .map(|i| get(&format!("x{i}")))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(sphere(&x))
            }
        }
    }
}

/// A synthetic function wrapped as a minimization objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticObjective {
    pub function: SyntheticFunction,
    pub scale: RewardScale,
}

impl SyntheticObjective {
    pub fn new(function: SyntheticFunction) -> Self {
        Self {
            function,
            scale: function.default_scale(),
        }
    }
}

impl Objective for SyntheticObjective {
    fn evaluate(&self, config: &Configuration, _seed: u64) -> Result<f64, ObjectiveError> {
        self.function.value(config)
    }

    fn scale(&self) -> RewardScale {
        self.scale
    }
}

/// A Bernoulli arm with a planted mean; ignores the configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedArm {
    pub mean: f64,
}

impl PlantedArm {
    /// Single-point space for the arm's (trivial) TPE model.
    pub fn space() -> SearchSpace {
        SearchSpace::from_pairs([("pull", ParamDomain::categorical(["pull"]))]).expect("static space")
    }
}

impl Objective for PlantedArm {
    fn evaluate(&self, _config: &Configuration, seed: u64) -> Result<f64, ObjectiveError> {
        Ok(planted_bernoulli(self.mean, &mut ChaCha8Rng::seed_from_u64(seed)))
    }

    fn scale(&self) -> RewardScale {
        RewardScale::UNIT
    }
}
