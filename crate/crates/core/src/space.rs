//! Hyperparameter domains, configurations and sub-space partitioning.
//!
//! A [`SearchSpace`] is an ordered cross-product of named [`ParamDomain`]s.
//! [`partition`] cuts every domain into at most `k` contiguous pieces and
//! crosses the pieces into disjoint [`SubSpace`]s, each of which can serve
//! as one bandit arm.
//!
//! Continuous pieces are half-open `[lo, hi)` except the last one, which is
//! closed at the parent's upper bound, so every configuration of the parent
//! belongs to exactly one sub-space. Sampling never produces a continuous
//! value equal to a domain's upper bound, which keeps samples drawn from a
//! sub-space inside its half-open interval.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("parameter `{0}`: low must be strictly less than high")]
    EmptyRange(String),
    #[error("parameter `{0}`: logarithmic scale requires low > 0")]
    NonPositiveLogBound(String),
    #[error("parameter `{0}`: bounds must be finite")]
    NonFiniteBound(String),
    #[error("parameter `{0}`: categorical domain has no values")]
    NoValues(String),
    #[error("parameter `{name}`: duplicate categorical value `{value}`")]
    DuplicateValue { name: String, value: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("search space has no parameters")]
    NoParameters,
    #[error("partition factor must be at least 1, got {0}")]
    InvalidPartition(usize),
    #[error("configuration is missing parameter `{0}`")]
    MissingParam(String),
    #[error("configuration has unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{name}`: value {value} is outside its domain")]
    OutOfDomain { name: String, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    #[serde(alias = "log")]
    Logarithmic,
}

/// The domain of one hyperparameter.
///
/// Integer bounds are inclusive on both ends; a single-value integer range
/// (`low == high`) is allowed so that fine partitions stay representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamDomain {
    #[serde(alias = "float", alias = "real")]
    Continuous {
        low: f64,
        high: f64,
        #[serde(default)]
        scale: Scale,
    },
    #[serde(alias = "int")]
    Integer {
        low: i64,
        high: i64,
    },
    Categorical {
        values: Vec<String>,
    },
}

impl ParamDomain {
    pub fn continuous(low: f64, high: f64) -> Self {
        ParamDomain::Continuous {
            low,
            high,
            scale: Scale::Linear,
        }
    }

    pub fn log_continuous(low: f64, high: f64) -> Self {
        ParamDomain::Continuous {
            low,
            high,
            scale: Scale::Logarithmic,
        }
    }

    pub fn integer(low: i64, high: i64) -> Self {
        ParamDomain::Integer { low, high }
    }

    pub fn categorical<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ParamDomain::Categorical {
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub(crate) fn validate(&self, name: &str) -> Result<(), SpaceError> {
        match self {
            ParamDomain::Continuous { low, high, scale } => {
                if !low.is_finite() || !high.is_finite() {
                    return Err(SpaceError::NonFiniteBound(name.to_owned()));
                }
                if low >= high {
                    return Err(SpaceError::EmptyRange(name.to_owned()));
                }
                if *scale == Scale::Logarithmic && *low <= 0.0 {
                    return Err(SpaceError::NonPositiveLogBound(name.to_owned()));
                }
            }
            ParamDomain::Integer { low, high } => {
                if low > high {
                    return Err(SpaceError::EmptyRange(name.to_owned()));
                }
            }
            ParamDomain::Categorical { values } => {
                if values.is_empty() {
                    return Err(SpaceError::NoValues(name.to_owned()));
                }
                for (i, v) in values.iter().enumerate() {
                    if values[..i].contains(v) {
                        return Err(SpaceError::DuplicateValue {
                            name: name.to_owned(),
                            value: v.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of pieces this domain can be cut into; `None` means unbounded.
    pub fn cardinality(&self) -> Option<u64> {
        match self {
            ParamDomain::Continuous { .. } => None,
            ParamDomain::Integer { low, high } => Some((high - low) as u64 + 1),
            ParamDomain::Categorical { values } => Some(values.len() as u64),
        }
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (ParamDomain::Continuous { low, high, .. }, ParamValue::Real(v)) => *low <= *v && *v <= *high,
            (ParamDomain::Integer { low, high }, ParamValue::Int(v)) => low <= v && v <= high,
            (ParamDomain::Categorical { values }, ParamValue::Token(t)) => values.contains(t),
            _ => false,
        }
    }

    /// Draws a value uniformly; logarithmic domains are uniform in log space.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match self {
            ParamDomain::Continuous { low, high, scale } => {
                let v = match scale {
                    Scale::Linear => rng.random_range(*low..*high),
                    Scale::Logarithmic => rng.random_range(low.ln()..high.ln()).exp(),
                };
                ParamValue::Real(clamp_below(v, *low, *high))
            }
            ParamDomain::Integer { low, high } => ParamValue::Int(rng.random_range(*low..=*high)),
            ParamDomain::Categorical { values } => ParamValue::Token(values[rng.random_range(0..values.len())].clone()),
        }
    }
}

/// Clamps `v` into `[low, high)`.
pub(crate) fn clamp_below(v: f64, low: f64, high: f64) -> f64 {
    if v >= high {
        high.next_down().max(low)
    } else if v < low {
        low
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(flatten)]
    pub domain: ParamDomain,
}

/// An ordered, validated list of named parameter domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Param>", into = "Vec<Param>")]
pub struct SearchSpace {
    params: Vec<Param>,
}

impl TryFrom<Vec<Param>> for SearchSpace {
    type Error = SpaceError;

    fn try_from(params: Vec<Param>) -> Result<Self, Self::Error> {
        SearchSpace::new(params)
    }
}

impl From<SearchSpace> for Vec<Param> {
    fn from(space: SearchSpace) -> Self {
        space.params
    }
}

impl SearchSpace {
    pub fn new(params: Vec<Param>) -> Result<Self, SpaceError> {
        if params.is_empty() {
            return Err(SpaceError::NoParameters);
        }
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
            p.domain.validate(&p.name)?;
        }
        Ok(Self { params })
    }

    /// Convenience constructor from `(name, domain)` pairs.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, SpaceError>
    where
        I: IntoIterator<Item = (S, ParamDomain)>,
        S: Into<String>,
    {
        Self::new(
            pairs
                .into_iter()
                .map(|(name, domain)| Param {
                    name: name.into(),
                    domain,
                })
                .collect(),
        )
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn domain(&self, name: &str) -> Option<&ParamDomain> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.domain)
    }

    /// Checks that `config` names exactly this space's parameters and that
    /// each value lies in its domain.
    pub fn validate(&self, config: &Configuration) -> Result<(), SpaceError> {
        self.check_names(config)?;
        for p in &self.params {
            let v = &config.values[&p.name];
            if !p.domain.contains(v) {
                return Err(SpaceError::OutOfDomain {
                    name: p.name.clone(),
                    value: v.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        self.validate(config).is_ok()
    }

    fn check_names(&self, config: &Configuration) -> Result<(), SpaceError> {
        for p in &self.params {
            if !config.values.contains_key(&p.name) {
                return Err(SpaceError::MissingParam(p.name.clone()));
            }
        }
        if let Some(extra) = config.values.keys().find(|k| self.domain(k).is_none()) {
            return Err(SpaceError::UnknownParam(extra.clone()));
        }
        Ok(())
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Token(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Token(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            ParamValue::Token(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Token(t) => f.write_str(t),
        }
    }
}

/// A point in a search space, keyed by parameter name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub values: BTreeMap<String, ParamValue>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: ParamValue) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn real(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(ParamValue::as_f64)
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(ParamValue::as_i64)
    }

    pub fn token(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(ParamValue::as_token)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

pub fn sample_uniform<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Configuration {
    Configuration {
        values: space
            .params
            .iter()
            .map(|p| (p.name.clone(), p.domain.sample(rng)))
            .collect(),
    }
}

/// One parameter's piece of a sub-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Restriction {
    /// `[lo, hi)`, or `[lo, hi]` when `closed` is set. Bounds are in the
    /// parameter's natural units even for logarithmic domains.
    Interval {
        lo: f64,
        hi: f64,
        closed: bool,
    },
    /// Inclusive integer range.
    Range {
        lo: i64,
        hi: i64,
    },
    Values {
        values: Vec<String>,
    },
}

impl Restriction {
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (Restriction::Interval { lo, hi, closed }, ParamValue::Real(v)) => {
                *lo <= *v && (*v < *hi || (*closed && *v == *hi))
            }
            (Restriction::Range { lo, hi }, ParamValue::Int(v)) => lo <= v && v <= hi,
            (Restriction::Values { values }, ParamValue::Token(t)) => values.contains(t),
            _ => false,
        }
    }
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Restriction::Interval { lo, hi, closed } => {
                write!(f, "[{lo}, {hi}{}", if *closed { "]" } else { ")" })
            }
            Restriction::Range { lo, hi } if lo == hi => write!(f, "{{{lo}}}"),
            Restriction::Range { lo, hi } => write!(f, "{{{lo}..{hi}}}"),
            Restriction::Values { values } => write!(f, "[{}]", values.join(",")),
        }
    }
}

/// A product of per-parameter restrictions inside a parent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubSpace {
    parent: SearchSpace,
    restrictions: Vec<Restriction>,
}

impl SubSpace {
    /// The sub-space equal to the whole of `parent`.
    pub fn full(parent: &SearchSpace) -> Self {
        let restrictions = parent
            .params
            .iter()
            .map(|p| match &p.domain {
                ParamDomain::Continuous { low, high, .. } => Restriction::Interval {
                    lo: *low,
                    hi: *high,
                    closed: true,
                },
                ParamDomain::Integer { low, high } => Restriction::Range { lo: *low, hi: *high },
                ParamDomain::Categorical { values } => Restriction::Values { values: values.clone() },
            })
            .collect();
        Self {
            parent: parent.clone(),
            restrictions,
        }
    }

    pub fn parent(&self) -> &SearchSpace {
        &self.parent
    }

    pub fn restrictions(&self) -> impl Iterator<Item = (&str, &Restriction)> {
        self.parent
            .params
            .iter()
            .map(|p| p.name.as_str())
            .zip(self.restrictions.iter())
    }

    /// True iff every value of `config` lies inside its restriction.
    pub fn contains(&self, config: &Configuration) -> Result<bool, SpaceError> {
        self.parent.check_names(config)?;
        Ok(self
            .parent
            .params
            .iter()
            .zip(&self.restrictions)
            .all(|(p, r)| r.contains(&config.values[&p.name])))
    }

    /// The sub-space viewed as a search space of its own.
    pub fn as_search_space(&self) -> SearchSpace {
        let params = self
            .parent
            .params
            .iter()
            .zip(&self.restrictions)
            .map(|(p, r)| {
                let domain = match (&p.domain, r) {
                    (ParamDomain::Continuous { scale, .. }, Restriction::Interval { lo, hi, .. }) => {
                        ParamDomain::Continuous {
                            low: *lo,
                            high: *hi,
                            scale: *scale,
                        }
                    }
                    (_, Restriction::Range { lo, hi }) => ParamDomain::Integer { low: *lo, high: *hi },
                    (_, Restriction::Values { values }) => ParamDomain::Categorical { values: values.clone() },
                    _ => unreachable!("restriction kind always matches its domain"),
                };
                Param {
                    name: p.name.clone(),
                    domain,
                }
            })
            .collect();
        SearchSpace { params }
    }

    /// Short human-readable label, e.g. `x=[0, 0.5) y=[2,3]`.
    pub fn label(&self) -> String {
        self.restrictions()
            .map(|(n, r)| format!("{n}={r}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for SubSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, r) in self.restrictions.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str("]")
    }
}

/// Sizes of `chunks` contiguous near-equal pieces of `n` items, larger first.
fn chunk_sizes(n: u64, chunks: u64) -> Vec<u64> {
    let base = n / chunks;
    let extra = n % chunks;
    (0..chunks).map(|i| base + u64::from(i < extra)).collect()
}

fn split_domain(domain: &ParamDomain, k: usize) -> Vec<Restriction> {
    match domain {
        ParamDomain::Continuous { low, high, scale } => {
            let (a, b) = match scale {
                Scale::Linear => (*low, *high),
                Scale::Logarithmic => (low.ln(), high.ln()),
            };
            let to_natural = |t: f64| match scale {
                Scale::Linear => t,
                Scale::Logarithmic => t.exp(),
            };
            let mut edges: Vec<f64> = (0..=k).map(|i| to_natural(a + (b - a) * i as f64 / k as f64)).collect();
            edges[0] = *low;
            edges[k] = *high;
            // trim float noise such as 1.0000000000000018 from interior cuts
            for i in 1..k {
                let r: f64 = format!("{:.11e}", edges[i]).parse().expect("formatted float parses");
                if r > edges[i - 1] && r < *high {
                    edges[i] = r;
                }
            }
            edges
                .windows(2)
                .enumerate()
                .map(|(i, w)| Restriction::Interval {
                    lo: w[0],
                    hi: w[1],
                    closed: i + 1 == k,
                })
                .collect()
        }
        ParamDomain::Integer { low, high } => {
            let n = (high - low) as u64 + 1;
            let mut start = *low;
            chunk_sizes(n, n.min(k as u64))
                .into_iter()
                .map(|size| {
                    let r = Restriction::Range {
                        lo: start,
                        hi: start + size as i64 - 1,
                    };
                    start += size as i64;
                    r
                })
                .collect()
        }
        ParamDomain::Categorical { values } => {
            let n = values.len() as u64;
            let mut start = 0usize;
            chunk_sizes(n, n.min(k as u64))
                .into_iter()
                .map(|size| {
                    let r = Restriction::Values {
                        values: values[start..start + size as usize].to_vec(),
                    };
                    start += size as usize;
                    r
                })
                .collect()
        }
    }
}

/// Splits every parameter into at most `k` pieces and returns the cross
/// product as disjoint sub-spaces. The first parameter varies slowest.
pub fn partition(space: &SearchSpace, k: usize) -> Result<Vec<SubSpace>, SpaceError> {
    if k < 1 {
        return Err(SpaceError::InvalidPartition(k));
    }
    let pieces: Vec<Vec<Restriction>> = space.params.iter().map(|p| split_domain(&p.domain, k)).collect();

    let mut out: Vec<Vec<Restriction>> = vec![Vec::new()];
    for options in &pieces {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |r| {
                    let mut next = prefix.clone();
                    next.push(r.clone());
                    next
                })
            })
            .collect();
    }
    Ok(out
        .into_iter()
        .map(|restrictions| SubSpace {
            parent: space.clone(),
            restrictions,
        })
        .collect())
}

/// Closed-form sub-space count: the product of `min(k, cardinality)`.
pub fn partition_count(space: &SearchSpace, k: usize) -> u64 {
    space
        .params
        .iter()
        .map(|p| p.domain.cardinality().map_or(k as u64, |c| c.min(k as u64)))
        .product()
}
