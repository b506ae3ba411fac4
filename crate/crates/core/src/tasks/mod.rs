//! Built-in objectives: synthetic benchmark functions, planted bandit arms,
//! and small classifiers scored by cross-validated balanced accuracy.

mod data;
mod learners;
mod synthetic;

pub use data::{generate, Dataset, GeneratorKind, Matrix};
pub use learners::{
    builtin_learners, learner_by_name, DecisionTree, GaussianNaiveBayes, KNearestNeighbors, Learner, LearnerObjective,
    LogisticRegression, Predictor,
};
pub use synthetic::{
    branin, planted_bernoulli, sphere, PlantedArm, SyntheticFunction, SyntheticObjective, BRANIN_MINIMUM,
};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{Configuration, SpaceError};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("need 2 <= K <= n for K-fold splitting, got K={k}, n={n}")]
    InvalidFolds { k: usize, n: usize },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("unknown learner `{0}`")]
    UnknownLearner(String),
    #[error("learner `{learner}` failed: {message}")]
    Training { learner: String, message: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSpec {
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self { folds: 3, seed: 0 }
    }
}

fn check_folds(n: usize, k: usize) -> Result<(), TaskError> {
    if k < 2 || k > n {
        return Err(TaskError::InvalidFolds { k, n });
    }
    Ok(())
}

/// Shuffles `0..n` and deals the indices round-robin into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, TaskError> {
    check_folds(n, k)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    Ok(folds)
}

/// Stratified folds: each class is shuffled, the classes are laid end to
/// end, and positions are dealt round-robin. Fold sizes differ by at most
/// one and every class is spread as evenly as possible.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, TaskError> {
    check_folds(labels.len(), k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut folds = vec![Vec::new(); k];
    let mut pos = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[pos % k].push(i);
            pos += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Mean per-class recall over the classes present in `y_true`.
pub fn balanced_accuracy<T: Ord>(y_true: &[T], y_pred: &[T]) -> f64 {
    assert_eq!(y_true.len(), y_pred.len(), "label vectors differ in length");
    let mut per_class: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = per_class.entry(t).or_default();
        e.1 += 1;
        if t == p {
            e.0 += 1;
        }
    }
    if per_class.is_empty() {
        return 0.0;
    }
    per_class
        .values()
        .map(|&(hit, total)| hit as f64 / total as f64)
        .sum::<f64>()
        / per_class.len() as f64
}

/// Mean held-out balanced accuracy over stratified folds.
pub fn cv_reward(learner: &dyn Learner, hp: &Configuration, data: &Dataset, cv: &CvSpec) -> Result<f64, TaskError> {
    learner.space().validate(hp)?;
    let folds = stratified_kfold(data.labels(), cv.folds, cv.seed)?;
    let mut total = 0.0;
    for fold in &folds {
        let mut held_out = vec![false; data.len()];
        for &i in fold {
            held_out[i] = true;
        }
        let train: Vec<usize> = (0..data.len()).filter(|&i| !held_out[i]).collect();
        let (x_train, y_train) = data.subset(&train);
        let (x_val, y_val) = data.subset(fold);
        let model = learner.fit(&x_train, &y_train, data.n_classes(), hp)?;
        total += balanced_accuracy(&y_val, &model.predict(&x_val));
    }
    Ok(total / folds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kfold_sizes() {
        let f = kfold_split(6, 3, 0).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), [2, 2, 2]);
        let f = kfold_split(7, 3, 0).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), [3, 2, 2]);
        assert_eq!(kfold_split(7, 3, 9).unwrap(), kfold_split(7, 3, 9).unwrap());
        assert!(kfold_split(3, 4, 0).is_err());
        assert!(kfold_split(3, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn kfold_partitions_indices(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let folds = kfold_split(n, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn stratified_partitions_indices(labels in proptest::collection::vec(0usize..4, 3..150), seed in any::<u64>()) {
            let folds = stratified_kfold(&labels, 3, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn balanced_accuracy_ignores_relabeling(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..80),
            perm in Just([2usize, 0, 1]),
        ) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let tt: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
            let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
            let a = balanced_accuracy(&t, &p);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - balanced_accuracy(&tt, &pp)).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy(&[0, 1, 1, 0], &[0, 1, 1, 0]), 1.0);
        assert_eq!(balanced_accuracy(&[0, 1, 1, 0], &[1, 1, 1, 1]), 0.5);
        // class a: 2/2, class b: 1/2
        assert_eq!(balanced_accuracy(&["a", "a", "b", "b"], &["a", "a", "b", "a"]), 0.75);
    }

    #[test]
    fn stratified_folds_keep_class_balance() {
        let labels: Vec<usize> = (0..90).map(|i| usize::from(i % 3 == 0)).collect();
        for fold in stratified_kfold(&labels, 3, 4).unwrap() {
            let ones = fold.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!(ones, 10);
        }
    }
}
