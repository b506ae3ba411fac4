//! Tree Parzen Estimator.
//!
//! Observations are split at the `gamma` loss quantile into a good set and a
//! bad set. Each set is turned into a factorized Parzen density (one
//! truncated-Gaussian mixture per numeric parameter, one smoothed frequency
//! table per categorical parameter), and the next configuration is the
//! candidate drawn from the good density `l` that maximizes `l(x) / g(x)`.
//!
//! Numeric densities live in an internal coordinate: the natural value for
//! linear parameters, `ln(value)` for logarithmic ones, and the integer
//! widened by half a unit on both sides for integer parameters.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{
    clamp_below, sample_uniform, Configuration, ParamDomain, ParamValue, Scale, SearchSpace, SpaceError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TpeError {
    #[error("loss must be finite, got {0}")]
    NonFiniteLoss(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("invalid tpe parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeParams {
    /// Fraction of observations that form the good set.
    pub gamma: f64,
    /// Samples drawn from `l` per suggestion.
    pub n_candidates: usize,
    /// Below this many observations, suggestions are uniform samples.
    pub min_observations: usize,
    /// Lower bound on kernel bandwidth, as a fraction of the domain width.
    pub bandwidth_floor: f64,
    /// Weight of the uniform prior component in every density.
    pub prior_weight: f64,
}

impl Default for TpeParams {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_candidates: 24,
            min_observations: 3,
            bandwidth_floor: 0.01,
            prior_weight: 1.0,
        }
    }
}

impl TpeParams {
    pub fn validate(&self) -> Result<(), TpeError> {
        let bad = |m: &str| Err(TpeError::InvalidParams(m.to_owned()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.n_candidates < 1 {
            return bad("n_candidates must be at least 1");
        }
        if self.min_observations < 2 {
            return bad("min_observations must be at least 2");
        }
        if !(self.bandwidth_floor > 0.0 && self.bandwidth_floor.is_finite()) {
            return bad("bandwidth_floor must be positive");
        }
        if !(self.prior_weight > 0.0 && self.prior_weight.is_finite()) {
            return bad("prior_weight must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub config: Configuration,
    pub loss: f64,
}

/// Splits observations into the `⌈gamma·n⌉` lowest losses (at least one) and
/// the rest. Ties keep insertion order, so earlier observations win.
pub fn split_observations(obs: &[Observation], gamma: f64) -> (Vec<&Observation>, Vec<&Observation>) {
    if obs.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let n_good = ((gamma * obs.len() as f64).ceil() as usize).clamp(1, obs.len());
    let mut order: Vec<usize> = (0..obs.len()).collect();
    // stable sort keeps insertion order among equal losses
    order.sort_by(|&a, &b| obs[a].loss.total_cmp(&obs[b].loss));
    let good = order[..n_good].iter().map(|&i| &obs[i]).collect();
    let bad = order[n_good..].iter().map(|&i| &obs[i]).collect();
    (good, bad)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
struct Kernel {
    mu: f64,
    sigma: f64,
    /// Probability mass of the untruncated Gaussian inside the domain.
    mass: f64,
}

/// A truncated-Gaussian mixture over `[low, high]` plus a uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericDensity {
    low: f64,
    high: f64,
    kernels: Vec<Kernel>,
    prior_weight: f64,
}

impl NumericDensity {
    fn fit(points: &[f64], low: f64, high: f64, params: &TpeParams) -> Self {
        let width = high - low;
        let floor = params.bandwidth_floor * width;
        let mut sorted: Vec<f64> = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let kernels = points
            .iter()
            .map(|&mu| {
                // nearest neighbour among the other observations and the domain ends
                let idx = sorted.partition_point(|&p| p < mu);
                let mut nearest = (mu - low).min(high - mu);
                // sorted[idx] == mu itself; look at the entries around it
                let same = sorted[idx..].iter().take_while(|&&p| p == mu).count();
                if same > 1 {
                    nearest = 0.0;
                }
                if idx > 0 {
                    nearest = nearest.min(mu - sorted[idx - 1]);
                }
                if let Some(&right) = sorted.get(idx + same) {
                    nearest = nearest.min(right - mu);
                }
                let sigma = nearest.max(floor);
                let mass = std_normal_cdf((high - mu) / sigma) - std_normal_cdf((low - mu) / sigma);
                Kernel { mu, sigma, mass }
            })
            .collect();
        Self {
            low,
            high,
            kernels,
            prior_weight: params.prior_weight,
        }
    }

    fn total_weight(&self) -> f64 {
        self.kernels.len() as f64 + self.prior_weight
    }

    /// Density in the internal coordinate.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.low || x > self.high {
            return 0.0;
        }
        let uniform = self.prior_weight / (self.high - self.low);
        let kernels: f64 = self
            .kernels
            .iter()
            .map(|k| std_normal_pdf((x - k.mu) / k.sigma) / (k.sigma * k.mass))
            .sum();
        (uniform + kernels) / self.total_weight()
    }

    /// Samples in `[low, high)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let pick = rng.random::<f64>() * self.total_weight();
        let idx = pick.floor() as usize;
        let x = match self.kernels.get(idx) {
            Some(k) => {
                let mut draw = None;
                for _ in 0..64 {
                    let z: f64 = rng.sample(StandardNormal);
                    let x = k.mu + k.sigma * z;
                    if x >= self.low && x < self.high {
                        draw = Some(x);
                        break;
                    }
                }
                draw.unwrap_or(k.mu)
            }
            None => rng.random_range(self.low..self.high),
        };
        clamp_below(x, self.low, self.high)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.low, self.high)
    }

    /// Per-kernel bandwidths, in observation order.
    pub fn bandwidths(&self) -> Vec<f64> {
        self.kernels.iter().map(|k| k.sigma).collect()
    }
}

/// Smoothed frequency table: `(count + prior_weight) / (n + m·prior_weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDensity {
    values: Vec<String>,
    probs: Vec<f64>,
}

impl CategoricalDensity {
    fn fit(tokens: &[&str], values: &[String], prior_weight: f64) -> Self {
        let total = tokens.len() as f64 + prior_weight * values.len() as f64;
        let probs = values
            .iter()
            .map(|v| (tokens.iter().filter(|t| **t == v).count() as f64 + prior_weight) / total)
            .collect();
        Self {
            values: values.to_vec(),
            probs,
        }
    }

    pub fn prob(&self, token: &str) -> f64 {
        self.values
            .iter()
            .position(|v| v == token)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        let mut u = rng.random::<f64>();
        for (v, p) in self.values.iter().zip(&self.probs) {
            if u < *p {
                return v;
            }
            u -= p;
        }
        self.values.last().expect("categorical domain is non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamDensity {
    Numeric(NumericDensity),
    Categorical(CategoricalDensity),
}

/// Maps a numeric domain to its internal coordinate interval.
fn internal_bounds(domain: &ParamDomain) -> Option<(f64, f64)> {
    match domain {
        ParamDomain::Continuous { low, high, scale } => Some(match scale {
            Scale::Linear => (*low, *high),
            Scale::Logarithmic => (low.ln(), high.ln()),
        }),
        ParamDomain::Integer { low, high } => Some((*low as f64 - 0.5, *high as f64 + 0.5)),
        ParamDomain::Categorical { .. } => None,
    }
}

fn to_internal(domain: &ParamDomain, value: &ParamValue) -> f64 {
    match (domain, value) {
        (
            ParamDomain::Continuous {
                scale: Scale::Logarithmic,
                ..
            },
            ParamValue::Real(v),
        ) => v.ln(),
        (_, v) => v.as_f64().expect("numeric value for numeric domain"),
    }
}

fn from_internal(domain: &ParamDomain, x: f64) -> ParamValue {
    match domain {
        ParamDomain::Continuous { low, high, scale } => {
            let v = match scale {
                Scale::Linear => x,
                Scale::Logarithmic => x.exp(),
            };
            ParamValue::Real(clamp_below(v, *low, *high))
        }
        ParamDomain::Integer { low, high } => ParamValue::Int((x.round() as i64).clamp(*low, *high)),
        ParamDomain::Categorical { .. } => unreachable!("categorical handled separately"),
    }
}

/// Product of independent one-dimensional densities over a search space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenDensity {
    space: SearchSpace,
    parts: Vec<ParamDensity>,
}

impl ParzenDensity {
    pub fn parts(&self) -> &[ParamDensity] {
        &self.parts
    }

    pub fn log_pdf(&self, config: &Configuration) -> f64 {
        self.space
            .params()
            .iter()
            .zip(&self.parts)
            .map(|(p, d)| {
                let v = &config.values[&p.name];
                match d {
                    ParamDensity::Numeric(n) => n.pdf(to_internal(&p.domain, v)).ln(),
                    ParamDensity::Categorical(c) => c.prob(v.as_token().expect("token for categorical")).ln(),
                }
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let values = self
            .space
            .params()
            .iter()
            .zip(&self.parts)
            .map(|(p, d)| {
                let v = match d {
                    ParamDensity::Numeric(n) => from_internal(&p.domain, n.sample(rng)),
                    ParamDensity::Categorical(c) => ParamValue::Token(c.sample(rng).to_owned()),
                };
                (p.name.clone(), v)
            })
            .collect();
        Configuration { values }
    }
}

/// Fits a Parzen density to `obs`. With no observations the result is the
/// uniform prior over the space.
pub fn fit_density(obs: &[&Observation], space: &SearchSpace, params: &TpeParams) -> Result<ParzenDensity, TpeError> {
    for o in obs {
        space.validate(&o.config)?;
    }
    let parts = space
        .params()
        .iter()
        .map(|p| match &p.domain {
            ParamDomain::Categorical { values } => {
                let tokens: Vec<&str> = obs
                    .iter()
                    .map(|o| o.config.values[&p.name].as_token().expect("validated"))
                    .collect();
                ParamDensity::Categorical(CategoricalDensity::fit(&tokens, values, params.prior_weight))
            }
            domain => {
                let (low, high) = internal_bounds(domain).expect("numeric domain");
                let points: Vec<f64> = obs
                    .iter()
                    .map(|o| to_internal(domain, &o.config.values[&p.name]))
                    .collect();
                ParamDensity::Numeric(NumericDensity::fit(&points, low, high, params))
            }
        })
        .collect();
    Ok(ParzenDensity {
        space: space.clone(),
        parts,
    })
}

/// One arm's Bayesian-optimization state.
#[derive(Debug, Clone, PartialEq)]
pub struct TpeModel {
    space: SearchSpace,
    observations: Vec<Observation>,
    params: TpeParams,
}

impl TpeModel {
    pub fn new(space: SearchSpace, params: TpeParams) -> Self {
        Self {
            space,
            observations: Vec::new(),
            params,
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn params(&self) -> &TpeParams {
        &self.params
    }

    pub fn update(&mut self, config: Configuration, loss: f64) -> Result<(), TpeError> {
        if !loss.is_finite() {
            return Err(TpeError::NonFiniteLoss(loss));
        }
        self.space.validate(&config)?;
        self.observations.push(Observation { config, loss });
        Ok(())
    }

    /// Next configuration to evaluate.
    pub fn suggest<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        if self.observations.len() < self.params.min_observations {
            return sample_uniform(&self.space, rng);
        }
        let (good, bad) = split_observations(&self.observations, self.params.gamma);
        // observations were validated on insert
        let l = fit_density(&good, &self.space, &self.params).expect("validated observations");
        let g = fit_density(&bad, &self.space, &self.params).expect("validated observations");

        let mut best: Option<(f64, Configuration)> = None;
        for _ in 0..self.params.n_candidates {
            let candidate = l.sample(rng);
            let score = l.log_pdf(&candidate) - g.log_pdf(&candidate);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, candidate));
            }
        }
        best.expect("n_candidates >= 1").1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs1(x: f64, loss: f64) -> Observation {
        Observation {
            config: Configuration::new().with("x", ParamValue::Real(x)),
            loss,
        }
    }

    fn unit() -> SearchSpace {
        SearchSpace::from_pairs([("x", ParamDomain::continuous(0.0, 1.0))]).unwrap()
    }

    fn numeric(d: &ParzenDensity) -> &NumericDensity {
        match &d.parts()[0] {
            ParamDensity::Numeric(n) => n,
            other => panic!("expected numeric, got {other:?}"),
        }
    }

    /// Midpoint-rule integral of a one-dimensional density.
    fn integrate(n: &NumericDensity, points: usize) -> f64 {
        let (a, b) = n.bounds();
        let h = (b - a) / points as f64;
        (0..points).map(|i| n.pdf(a + (i as f64 + 0.5) * h) * h).sum()
    }

    #[test]
    fn split_sizes() {
        let obs: Vec<_> = (0..20).map(|i| obs1(0.5, i as f64)).collect();
        let (g, b) = split_observations(&obs, 0.25);
        assert_eq!((g.len(), b.len()), (5, 15));

        let one = [obs1(0.1, 3.0)];
        let (g, b) = split_observations(&one, 0.25);
        assert_eq!((g.len(), b.len()), (1, 0));
    }

    #[test]
    fn split_ties_prefer_earlier() {
        let obs = [obs1(0.0, 3.0), obs1(0.1, 1.0), obs1(0.2, 2.0), obs1(0.3, 1.0)];
        let (g, _) = split_observations(&obs, 0.5);
        assert_eq!(
            g.iter().map(|o| o.config.real("x").unwrap()).collect::<Vec<_>>(),
            [0.1, 0.3]
        );

        let tied = [obs1(0.0, 1.0), obs1(0.1, 1.0), obs1(0.2, 1.0)];
        let (g, _) = split_observations(&tied, 0.3);
        assert_eq!(g[0].config.real("x"), Some(0.0));
    }

    #[test]
    fn empty_fit_is_uniform() {
        let d = fit_density(&[], &unit(), &TpeParams::default()).unwrap();
        for x in [0.0, 0.1, 0.5, 0.99, 1.0] {
            assert!((numeric(&d).pdf(x) - 1.0).abs() < 1e-12);
        }
        let wide = SearchSpace::from_pairs([("x", ParamDomain::continuous(-5.0, 15.0))]).unwrap();
        let d = fit_density(&[], &wide, &TpeParams::default()).unwrap();
        assert!((numeric(&d).pdf(3.0) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn single_observation_mode_is_near_it() {
        let o = obs1(0.2, 0.0);
        let d = fit_density(&[&o], &unit(), &TpeParams::default()).unwrap();
        let n = numeric(&d);
        let bw = n.bandwidths()[0];
        // grid argmax
        let argmax = (0..1000)
            .map(|i| (i as f64 + 0.5) / 1000.0)
            .max_by(|a, b| n.pdf(*a).total_cmp(&n.pdf(*b)))
            .unwrap();
        assert!((argmax - 0.2).abs() <= bw, "argmax {argmax}, bw {bw}");
    }

    #[test]
    fn bandwidth_rule() {
        let params = TpeParams::default();
        let pts = [0.1, 0.4, 0.45, 0.45];
        let n = NumericDensity::fit(&pts, 0.0, 1.0, &params);
        let bw = n.bandwidths();
        assert!((bw[0] - 0.1).abs() < 1e-12); // nearest is the lower domain end
        assert!((bw[1] - 0.05).abs() < 1e-12);
        assert_eq!(bw[2], 0.01); // duplicate → floor
        assert_eq!(bw[3], 0.01);
    }

    #[test]
    fn numeric_densities_normalize() {
        let params = TpeParams::default();
        let cases: [&[f64]; 4] = [&[], &[0.0], &[0.2, 0.21, 0.9], &[1.0, 1.0, 0.999]];
        for pts in cases {
            let n = NumericDensity::fit(pts, 0.0, 1.0, &params);
            let total = integrate(&n, 10_000);
            assert!((total - 1.0).abs() < 1e-6, "{pts:?}: {total}");
        }
    }

    #[test]
    fn categorical_smoothing() {
        let space = SearchSpace::from_pairs([("c", ParamDomain::categorical(["a", "b"]))]).unwrap();
        let obs: Vec<Observation> = (0..7)
            .map(|_| Observation {
                config: Configuration::new().with("c", ParamValue::Token("a".into())),
                loss: 0.0,
            })
            .collect();
        let refs: Vec<&Observation> = obs.iter().collect();
        let d = fit_density(&refs, &space, &TpeParams::default()).unwrap();
        let ParamDensity::Categorical(c) = &d.parts()[0] else {
            panic!()
        };
        assert!((c.prob("a") - 8.0 / 9.0).abs() < 1e-12);
        assert!((c.prob("b") - 1.0 / 9.0).abs() < 1e-12);
        assert!((c.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_outside_observation() {
        let o = obs1(1.5, 0.0);
        assert!(matches!(
            fit_density(&[&o], &unit(), &TpeParams::default()),
            Err(TpeError::Space(_))
        ));
    }

    #[test]
    fn cold_start_is_uniform_sample() {
        let model = TpeModel::new(unit(), TpeParams::default());
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(model.suggest(&mut a), sample_uniform(&unit(), &mut b));
    }

    #[test]
    fn update_contract() {
        let mut model = TpeModel::new(unit(), TpeParams::default());
        let c = Configuration::new().with("x", ParamValue::Real(0.3));
        model.update(c.clone(), 1.0).unwrap();
        model.update(c.clone(), 1.0).unwrap();
        assert_eq!(model.observations().len(), 2);
        assert!(matches!(
            model.update(c.clone(), f64::NAN),
            Err(TpeError::NonFiniteLoss(_))
        ));
        assert!(model.update(c, f64::INFINITY).is_err());
        assert_eq!(model.observations().len(), 2);
        let outside = Configuration::new().with("x", ParamValue::Real(2.0));
        assert!(model.update(outside, 0.0).is_err());
    }

    #[test]
    fn switches_to_ratio_after_min_observations() {
        let mut model = TpeModel::new(unit(), TpeParams::default());
        for x in [0.1, 0.5] {
            model
                .update(Configuration::new().with("x", ParamValue::Real(x)), x)
                .unwrap();
        }
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(model.suggest(&mut a), sample_uniform(&unit(), &mut b));
        model
            .update(Configuration::new().with("x", ParamValue::Real(0.9)), 0.9)
            .unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        assert_ne!(model.suggest(&mut a), sample_uniform(&unit(), &mut b));
    }

    #[test]
    fn categorical_ratio_prefers_good_token() {
        // l: good all "a"; g: bad all "b". With prior 1 and n good, m bad:
        // l(a)/g(a) = ((n+1)/(n+2)) / (1/(m+2)) > l(b)/g(b) = (1/(n+2)) / ((m+1)/(m+2)).
        let space = SearchSpace::from_pairs([("c", ParamDomain::categorical(["a", "b"]))]).unwrap();
        let mut model = TpeModel::new(space, TpeParams::default());
        for _ in 0..2 {
            model
                .update(Configuration::new().with("c", ParamValue::Token("a".into())), 0.0)
                .unwrap();
        }
        for _ in 0..6 {
            model
                .update(Configuration::new().with("c", ParamValue::Token("b".into())), 1.0)
                .unwrap();
        }
        let (n, m) = (2.0, 6.0);
        let ratio_a = ((n + 1.0) / (n + 2.0)) / (1.0 / (m + 2.0));
        let ratio_b = (1.0 / (n + 2.0)) / ((m + 1.0) / (m + 2.0));
        assert!(ratio_a > ratio_b);
        for seed in 0..20 {
            let s = model.suggest(&mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(s.token("c"), Some("a"));
        }
    }

    #[test]
    fn concentrates_near_quadratic_minimum() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut model = TpeModel::new(unit(), TpeParams::default());
            for _ in 0..30 {
                let c = sample_uniform(&unit(), &mut rng);
                let x = c.real("x").unwrap();
                model.update(c, (x - 0.2).powi(2)).unwrap();
            }
            let s = model.suggest(&mut rng).real("x").unwrap();
            if (s - 0.2).abs() < 0.15 {
                hits += 1;
            }
        }
        assert!(hits >= 70, "{hits}/100 suggestions near the minimum");
    }

    #[test]
    fn loss_scaling_does_not_change_suggestion() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut a = TpeModel::new(unit(), TpeParams::default());
        let mut b = TpeModel::new(unit(), TpeParams::default());
        for _ in 0..15 {
            let c = sample_uniform(&unit(), &mut rng);
            let loss = (c.real("x").unwrap() - 0.6).abs();
            a.update(c.clone(), loss).unwrap();
            b.update(c, 37.5 * loss).unwrap();
        }
        assert_eq!(
            a.suggest(&mut ChaCha8Rng::seed_from_u64(1)),
            b.suggest(&mut ChaCha8Rng::seed_from_u64(1))
        );
    }

    #[test]
    fn integer_and_log_suggestions_stay_in_domain() {
        let space = SearchSpace::from_pairs([
            ("n", ParamDomain::integer(3, 4)),
            ("c", ParamDomain::log_continuous(1e-4, 1.0)),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = TpeModel::new(space.clone(), TpeParams::default());
        for i in 0..40 {
            let c = model.suggest(&mut rng);
            assert!(space.contains(&c), "{c}");
            model.update(c, (i % 7) as f64).unwrap();
        }
    }

    #[test]
    fn params_validation() {
        assert!(TpeParams::default().validate().is_ok());
        let bad = TpeParams {
            gamma: 1.0,
            ..TpeParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = TpeParams {
            min_observations: 1,
            ..TpeParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = TpeParams {
            n_candidates: 0,
            ..TpeParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
