use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub train_pd: Vec<String>,
    pub val_pd: Vec<String>,
    /// Controls never train; every fold validates on all of them.
    pub val_control: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Fold>,
    /// PD subjects that no fold validates on.
    pub uncovered: Vec<String>,
}

impl FoldPlan {
    /// Fails if any fold shares a subject between train and validation.
    pub fn check_leakage(&self) -> Result<()> {
        for fold in &self.folds {
            if let Some(s) = fold.val_pd.iter().find(|s| fold.train_pd.contains(s)) {
                return Err(Error::InvalidData(format!("fold {}: subject {s} in train and validation", fold.index)));
            }
        }
        Ok(())
    }
}

/// Plans `k` folds, each validating on `val_per_fold` PD subjects and
/// training on the remaining PD subjects. Validation blocks are consecutive
/// slices of a seeded shuffle, so they are pairwise disjoint whenever
/// `k · val_per_fold` fits in the cohort; otherwise the slices wrap.
pub fn make_folds(
    pd_subjects: &[String],
    control_subjects: &[String],
    k: usize,
    val_per_fold: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let n = pd_subjects.len();
    if val_per_fold == 0 || val_per_fold >= n {
        return Err(Error::InvalidConfig(format!(
            "cannot validate on {val_per_fold} of {n} PD subjects and still train"
        )));
    }
    let mut unique = pd_subjects.to_vec();
    unique.sort();
    unique.dedup();
    if unique.len() != n {
        return Err(Error::InvalidData("duplicate PD subject ids".into()));
    }
    if control_subjects.is_empty() {
        return Err(Error::InvalidConfig("no control subjects to validate against".into()));
    }

    let mut order = unique;
    order.shuffle(&mut seed::rng(seed));

    let mut covered = vec![false; n];
    let folds = (0..k)
        .map(|index| {
            let picks: Vec<usize> = (0..val_per_fold).map(|j| (index * val_per_fold + j) % n).collect();
            picks.iter().for_each(|&i| covered[i] = true);
            let mut val_pd: Vec<String> = picks.iter().map(|&i| order[i].clone()).collect();
            let mut train_pd: Vec<String> = (0..n).filter(|i| !picks.contains(i)).map(|i| order[i].clone()).collect();
            val_pd.sort();
            train_pd.sort();
            Fold {
                index,
                train_pd,
                val_pd,
                val_control: control_subjects.to_vec(),
            }
        })
        .collect();
    let mut uncovered: Vec<String> = (0..n).filter(|&i| !covered[i]).map(|i| order[i].clone()).collect();
    uncovered.sort();
    Ok(FoldPlan { k, folds, uncovered })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i:02}")).collect()
    }

    #[test]
    fn thirteen_subjects_four_folds() {
        let plan = make_folds(&ids("pd", 13), &ids("ct", 13), 4, 3, 5).unwrap();
        assert_eq!(plan.folds.len(), 4);
        for f in &plan.folds {
            assert_eq!((f.train_pd.len(), f.val_pd.len(), f.val_control.len()), (10, 3, 13));
        }
        assert_eq!(plan.uncovered.len(), 1);
        let mut seen: Vec<&String> = plan.folds.iter().flat_map(|f| &f.val_pd).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 12);
        plan.check_leakage().unwrap();
    }

    #[test]
    fn deterministic_and_guarded() {
        let a = make_folds(&ids("pd", 13), &ids("ct", 2), 4, 3, 9).unwrap();
        let b = make_folds(&ids("pd", 13), &ids("ct", 2), 4, 3, 9).unwrap();
        assert_eq!(a, b);
        assert!(make_folds(&ids("pd", 13), &ids("ct", 2), 1, 3, 9).is_err());
        assert!(make_folds(&ids("pd", 3), &ids("ct", 2), 2, 3, 9).is_err());
    }
}
