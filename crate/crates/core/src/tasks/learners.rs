use std::sync::Arc;

use crate::evaluator::{Objective, ObjectiveError, RewardScale};
use crate::space::{Configuration, ParamDomain, ParamValue, SearchSpace};

use super::{cv_reward, CvSpec, Dataset, Matrix, TaskError};

pub trait Predictor: Send {
    fn predict(&self, x: &Matrix) -> Vec<usize>;
}

/// A trainable classifier with a declared hyperparameter space.
pub trait Learner: Send + Sync {
    fn name(&self) -> &str;

    fn space(&self) -> SearchSpace;

    /// Default hyperparameters, used by the select-best baseline.
    fn defaults(&self) -> Configuration;

    fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        hp: &Configuration,
    ) -> Result<Box<dyn Predictor>, TaskError>;
}

fn missing(learner: &str, name: &str) -> TaskError {
    TaskError::Training {
        learner: learner.to_owned(),
        message: format!("missing hyperparameter `{name}`"),
    }
}

fn majority(counts: &[usize]) -> usize {
    // ties go to the lowest class index
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---------------------------------------------------------------------------
// k-nearest neighbours

#[derive(Debug, Default, Clone, Copy)]
pub struct KNearestNeighbors;

struct KnnModel {
    x: Matrix,
    y: Vec<usize>,
    n_classes: usize,
    k: usize,
}

impl Predictor for KnnModel {
    fn predict(&self, x: &Matrix) -> Vec<usize> {
        let k = self.k.min(self.x.rows());
        (0..x.rows())
            .map(|i| {
                let q = x.row(i);
                let mut near: Vec<(f64, usize)> = (0..self.x.rows()).map(|j| (sq_dist(q, self.x.row(j)), j)).collect();
                near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                near.truncate(k);
                near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut votes = vec![0usize; self.n_classes];
                for &(_, j) in &near {
                    votes[self.y[j]] += 1;
                }
                let top = *votes.iter().max().expect("at least one class");
                // tie: the class of the closest neighbour among the tied ones
                near.iter()
                    .map(|&(_, j)| self.y[j])
                    .find(|&c| votes[c] == top)
                    .expect("some neighbour has the top vote")
            })
            .collect()
    }
}

impl Learner for KNearestNeighbors {
    fn name(&self) -> &str {
        "knn"
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::from_pairs([("n_neighbors", ParamDomain::integer(1, 25))]).expect("static space")
    }

    fn defaults(&self) -> Configuration {
        Configuration::new().with("n_neighbors", ParamValue::Int(5))
    }

    fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        hp: &Configuration,
    ) -> Result<Box<dyn Predictor>, TaskError> {
        let k = hp
            .int("n_neighbors")
            .ok_or_else(|| missing(self.name(), "n_neighbors"))?;
        Ok(Box::new(KnnModel {
            x: x.clone(),
            y: y.to_vec(),
            n_classes,
            k: k.max(1) as usize,
        }))
    }
}

// ---------------------------------------------------------------------------
// decision tree

#[derive(Debug, Default, Clone, Copy)]
pub struct DecisionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    fn impurity(self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p.log2()
                })
                .sum::<f64>(),
        }
    }
}

#[derive(Debug)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    criterion: Criterion,
    max_depth: usize,
    min_samples_split: usize,
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn build(&self, idx: &mut [usize], depth: usize) -> Node {
        let counts = self.counts(idx);
        let leaf = Node::Leaf(majority(&counts));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || idx.len() < self.min_samples_split {
            return leaf;
        }
        let Some((feature, threshold)) = self.best_split(idx, &counts) else {
            return leaf;
        };
        let mid = partition_in_place(idx, |&i| self.x.row(i)[feature] <= threshold);
        let (l, r) = idx.split_at_mut(mid);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        }
    }

    /// Lowest weighted child impurity over all features and midpoints.
    fn best_split(&self, idx: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.cols() {
            order.sort_by(|&a, &b| self.x.row(a)[f].total_cmp(&self.x.row(b)[f]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.to_vec();
            for pos in 0..n - 1 {
                let c = self.y[order[pos]];
                left[c] += 1;
                right[c] -= 1;
                let v = self.x.row(order[pos])[f];
                let next = self.x.row(order[pos + 1])[f];
                if v == next {
                    continue;
                }
                let nl = pos + 1;
                let score = (nl as f64 * self.criterion.impurity(&left, nl)
                    + (n - nl) as f64 * self.criterion.impurity(&right, n - nl))
                    / n as f64;
                if best.is_none_or(|(s, _, _)| score < s - 1e-12) {
                    best = Some((score, f, 0.5 * (v + next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn partition_in_place<T, F: Fn(&T) -> bool>(v: &mut [T], pred: F) -> usize {
    let mut mid = 0;
    for i in 0..v.len() {
        if pred(&v[i]) {
            v.swap(mid, i);
            mid += 1;
        }
    }
    mid
}

struct TreeModel {
    root: Node,
}

impl Predictor for TreeModel {
    fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let mut node = &self.root;
                loop {
                    match node {
                        Node::Leaf(c) => break *c,
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            node = if row[*feature] <= *threshold { left } else { right };
                        }
                    }
                }
            })
            .collect()
    }
}

impl Learner for DecisionTree {
    fn name(&self) -> &str {
        "decision_tree"
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::from_pairs([
            ("criterion", ParamDomain::categorical(["gini", "entropy"])),
            ("max_depth", ParamDomain::integer(1, 12)),
            ("min_samples_split", ParamDomain::integer(2, 21)),
        ])
        .expect("static space")
    }

    fn defaults(&self) -> Configuration {
        Configuration::new()
            .with("criterion", ParamValue::Token("gini".into()))
            .with("max_depth", ParamValue::Int(12))
            .with("min_samples_split", ParamValue::Int(2))
    }

    fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        hp: &Configuration,
    ) -> Result<Box<dyn Predictor>, TaskError> {
        let criterion = match hp.token("criterion") {
            Some("gini") => Criterion::Gini,
            Some("entropy") => Criterion::Entropy,
            _ => return Err(missing(self.name(), "criterion")),
        };
        let max_depth = hp.int("max_depth").ok_or_else(|| missing(self.name(), "max_depth"))?;
        let min_samples_split = hp
            .int("min_samples_split")
            .ok_or_else(|| missing(self.name(), "min_samples_split"))?;
        let builder = TreeBuilder {
            x,
            y,
            n_classes,
            criterion,
            max_depth: max_depth.max(0) as usize,
            min_samples_split: min_samples_split.max(2) as usize,
        };
        let mut idx: Vec<usize> = (0..x.rows()).collect();
        Ok(Box::new(TreeModel {
            root: builder.build(&mut idx, 0),
        }))
    }
}

// ---------------------------------------------------------------------------
// logistic regression

/// Multinomial logistic regression trained by batch gradient descent on
/// standardized features. The `none` penalty stands in for L1.
#[derive(Debug, Default, Clone, Copy)]
pub struct LogisticRegression;

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for i in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for i in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

struct LinearModel {
    std: Standardizer,
    /// `n_classes × (d + 1)`, bias last.
    weights: Vec<Vec<f64>>,
}

impl LinearModel {
    fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w[..z.len()].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + w[z.len()])
            .collect()
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

impl Predictor for LinearModel {
    fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.rows())
            .map(|i| argmax(&self.logits(&self.std.apply(x.row(i)))))
            .collect()
    }
}

impl Learner for LogisticRegression {
    fn name(&self) -> &str {
        "logistic_regression"
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::from_pairs([
            ("penalty", ParamDomain::categorical(["none", "l2"])),
            ("C", ParamDomain::log_continuous(1e-4, 1e4)),
            ("max_iter", ParamDomain::integer(50, 500)),
        ])
        .expect("static space")
    }

    fn defaults(&self) -> Configuration {
        Configuration::new()
            .with("penalty", ParamValue::Token("l2".into()))
            .with("C", ParamValue::Real(1.0))
            .with("max_iter", ParamValue::Int(100))
    }

    fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        hp: &Configuration,
    ) -> Result<Box<dyn Predictor>, TaskError> {
        let penalty = hp.token("penalty").ok_or_else(|| missing(self.name(), "penalty"))?;
        let c = hp.real("C").ok_or_else(|| missing(self.name(), "C"))?;
        let max_iter = hp.int("max_iter").ok_or_else(|| missing(self.name(), "max_iter"))?;
        let n = x.rows();
        let d = x.cols();
        let std = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = (0..n).map(|i| std.apply(x.row(i))).collect();
        // mean cross-entropy + λ/2·|w|², λ = 1/(C·n) mirrors the usual C·Σloss + ½|w|² form
        let lambda = if penalty == "l2" { 1.0 / (c * n as f64) } else { 0.0 };
        // 1/L step: the mean softmax loss has curvature at most ½·E|[z, 1]|² = ½(d + 1)
        let step = 1.0 / (0.5 * (d as f64 + 1.0) + lambda);

        let mut model = LinearModel {
            std,
            weights: vec![vec![0.0; d + 1]; n_classes],
        };
        let mut grad = vec![vec![0.0; d + 1]; n_classes];
        for _ in 0..max_iter.max(1) {
            for g in grad.iter_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            for (zi, &yi) in z.iter().zip(y) {
                let mut p = model.logits(zi);
                softmax_in_place(&mut p);
                p[yi] -= 1.0;
                for (g, pk) in grad.iter_mut().zip(&p) {
                    for (gj, zj) in g[..d].iter_mut().zip(zi) {
                        *gj += pk * zj / n as f64;
                    }
                    g[d] += pk / n as f64;
                }
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                for j in 0..=d {
                    let reg = if j < d { lambda * w[j] } else { 0.0 };
                    w[j] -= step * (g[j] + reg);
                }
            }
        }
        if model.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(TaskError::Training {
                learner: self.name().to_owned(),
                message: "weights diverged".into(),
            });
        }
        Ok(Box::new(model))
    }
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

#[derive(Debug, Default, Clone, Copy)]
pub struct GaussianNaiveBayes;

struct NbModel {
    log_prior: Vec<f64>,
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

impl Predictor for NbModel {
    fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let scores: Vec<f64> = (0..self.log_prior.len())
                    .map(|c| {
                        if self.log_prior[c] == f64::NEG_INFINITY {
                            return f64::NEG_INFINITY;
                        }
                        self.log_prior[c]
                            + row
                                .iter()
                                .zip(&self.mean[c])
                                .zip(&self.var[c])
                                .map(|((v, m), s)| -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m).powi(2) / s))
                                .sum::<f64>()
                    })
                    .collect();
                argmax(&scores)
            })
            .collect()
    }
}

impl Learner for GaussianNaiveBayes {
    fn name(&self) -> &str {
        "gaussian_nb"
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::from_pairs([("var_smoothing", ParamDomain::log_continuous(1e-12, 1e-3))]).expect("static space")
    }

    fn defaults(&self) -> Configuration {
        Configuration::new().with("var_smoothing", ParamValue::Real(1e-9))
    }

    fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        hp: &Configuration,
    ) -> Result<Box<dyn Predictor>, TaskError> {
        let smoothing = hp
            .real("var_smoothing")
            .ok_or_else(|| missing(self.name(), "var_smoothing"))?;
        let d = x.cols();
        let n = x.rows();
        let mut count = vec![0usize; n_classes];
        let mut mean = vec![vec![0.0; d]; n_classes];
        for (i, &c) in y.iter().enumerate() {
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        for (m, &k) in mean.iter_mut().zip(&count) {
            if k > 0 {
                m.iter_mut().for_each(|v| *v /= k as f64);
            }
        }
        let mut var = vec![vec![0.0; d]; n_classes];
        for (i, &c) in y.iter().enumerate() {
            for ((s, v), m) in var[c].iter_mut().zip(x.row(i)).zip(&mean[c]) {
                *s += (v - m).powi(2);
            }
        }
        // epsilon relative to the largest overall feature variance
        let overall = Standardizer::fit(x);
        let max_var = overall.scale.iter().map(|s| s * s).fold(0.0, f64::max);
        let eps = smoothing * max_var.max(1e-12);
        for (s, &k) in var.iter_mut().zip(&count) {
            s.iter_mut().for_each(|v| *v = *v / (k.max(1) as f64) + eps);
        }
        let log_prior = count
            .iter()
            .map(|&k| {
                if k == 0 {
                    f64::NEG_INFINITY
                } else {
                    (k as f64 / n as f64).ln()
                }
            })
            .collect();
        Ok(Box::new(NbModel { log_prior, mean, var }))
    }
}

// ---------------------------------------------------------------------------

pub fn builtin_learners() -> Vec<Arc<dyn Learner>> {
    vec![
        Arc::new(KNearestNeighbors),
        Arc::new(DecisionTree),
        Arc::new(LogisticRegression),
        Arc::new(GaussianNaiveBayes),
    ]
}

pub fn learner_by_name(name: &str) -> Result<Arc<dyn Learner>, TaskError> {
    builtin_learners()
        .into_iter()
        .find(|l| l.name() == name)
        .ok_or_else(|| TaskError::UnknownLearner(name.to_owned()))
}

/// Cross-validated balanced accuracy of a learner as a bandit objective.
pub struct LearnerObjective {
    learner: Arc<dyn Learner>,
    data: Arc<Dataset>,
    cv: CvSpec,
}

impl LearnerObjective {
    pub fn new(learner: Arc<dyn Learner>, data: Arc<Dataset>, cv: CvSpec) -> Self {
        Self { learner, data, cv }
    }
}

impl Objective for LearnerObjective {
    fn evaluate(&self, config: &Configuration, _seed: u64) -> Result<f64, ObjectiveError> {
        cv_reward(self.learner.as_ref(), config, &self.data, &self.cv).map_err(|e| ObjectiveError::new(e.to_string()))
    }

    fn scale(&self) -> RewardScale {
        RewardScale::UNIT
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{balanced_accuracy, generate, GeneratorKind};

    struct Majority;

    impl Learner for Majority {
        fn name(&self) -> &str {
            "majority"
        }
        fn space(&self) -> SearchSpace {
            SearchSpace::from_pairs([("unused", ParamDomain::categorical(["x"]))]).unwrap()
        }
        fn defaults(&self) -> Configuration {
            Configuration::new().with("unused", ParamValue::Token("x".into()))
        }
        fn fit(
            &self,
            _: &Matrix,
            y: &[usize],
            n_classes: usize,
            _: &Configuration,
        ) -> Result<Box<dyn Predictor>, TaskError> {
            let mut counts = vec![0; n_classes];
            for &c in y {
                counts[c] += 1;
            }
            struct Constant(usize);
            impl Predictor for Constant {
                fn predict(&self, x: &Matrix) -> Vec<usize> {
                    vec![self.0; x.rows()]
                }
            }
            Ok(Box::new(Constant(majority(&counts))))
        }
    }

    fn cv3() -> CvSpec {
        CvSpec { folds: 3, seed: 1 }
    }

    #[test]
    fn every_learner_smoke() {
        let data = generate(GeneratorKind::TwoClusters, 100, 1, 2);
        for learner in builtin_learners() {
            let defaults = learner.defaults();
            learner.space().validate(&defaults).unwrap();
            let r = cv_reward(learner.as_ref(), &defaults, &data, &cv3()).unwrap();
            assert!((0.0..=1.0).contains(&r), "{}: {r}", learner.name());
            assert!(r > 0.9, "{} should separate clusters: {r}", learner.name());
        }
    }

    #[test]
    fn majority_is_chance_on_balanced_data() {
        let data = generate(GeneratorKind::TwoClusters, 90, 0, 5);
        let r = cv_reward(&Majority, &Majority.defaults(), &data, &cv3()).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn one_nn_separates_clusters() {
        let data = generate(GeneratorKind::TwoClusters, 300, 0, 11);
        let hp = Configuration::new().with("n_neighbors", ParamValue::Int(1));
        let r = cv_reward(&KNearestNeighbors, &hp, &data, &cv3()).unwrap();
        assert!(r >= 0.98, "{r}");
    }

    #[test]
    fn cv_reward_is_deterministic() {
        let data = generate(GeneratorKind::Rings, 150, 0, 3);
        for learner in builtin_learners() {
            let a = cv_reward(learner.as_ref(), &learner.defaults(), &data, &cv3()).unwrap();
            let b = cv_reward(learner.as_ref(), &learner.defaults(), &data, &cv3()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn stump_on_xor_is_chance() {
        let data = generate(GeneratorKind::Xor, 400, 0, 8);
        // oracle: every axis-aligned split at zero leaves each side half of each class
        let x = data.features();
        let y = data.labels();
        for feature in 0..2 {
            let pred: Vec<usize> = (0..x.rows()).map(|i| usize::from(x.row(i)[feature] > 0.0)).collect();
            let ba = balanced_accuracy(y, &pred);
            assert!((ba - 0.5).abs() < 0.08, "stump oracle {ba}");
        }
        let hp = Configuration::new()
            .with("criterion", ParamValue::Token("gini".into()))
            .with("max_depth", ParamValue::Int(1))
            .with("min_samples_split", ParamValue::Int(2));
        let r = cv_reward(&DecisionTree, &hp, &data, &cv3()).unwrap();
        assert!((r - 0.5).abs() < 0.1, "{r}");
        let deep = Configuration::new()
            .with("criterion", ParamValue::Token("entropy".into()))
            .with("max_depth", ParamValue::Int(12))
            .with("min_samples_split", ParamValue::Int(2));
        let r = cv_reward(&DecisionTree, &deep, &data, &cv3()).unwrap();
        assert!(r > 0.9, "{r}");
    }

    #[test]
    fn held_out_knn_is_not_perfect_on_noisy_data() {
        let data = generate(GeneratorKind::Rings, 300, 0, 4);
        let hp = Configuration::new().with("n_neighbors", ParamValue::Int(1));
        let r = cv_reward(&KNearestNeighbors, &hp, &data, &cv3()).unwrap();
        assert!(r < 1.0);
    }

    #[test]
    fn logistic_regression_extremes_stay_finite() {
        let data = generate(GeneratorKind::TwoClusters, 120, 2, 9);
        for (pen, c) in [("l2", 1e-4), ("l2", 1e4), ("none", 1.0)] {
            let hp = Configuration::new()
                .with("penalty", ParamValue::Token(pen.into()))
                .with("C", ParamValue::Real(c))
                .with("max_iter", ParamValue::Int(500));
            let r = cv_reward(&LogisticRegression, &hp, &data, &cv3()).unwrap();
            assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn invalid_hyperparameters_fail() {
        let data = generate(GeneratorKind::TwoClusters, 60, 0, 9);
        let hp = Configuration::new().with("n_neighbors", ParamValue::Int(99));
        assert!(cv_reward(&KNearestNeighbors, &hp, &data, &cv3()).is_err());
        assert!(learner_by_name("svm").is_err());
        assert_eq!(learner_by_name("gaussian_nb").unwrap().name(), "gaussian_nb");
    }
}
