use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{count_labels, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fold index of every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_assignments: Vec<usize>,
    pub k: usize,
}

impl FoldSplit {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        self.rows_where(|f| f == fold)
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        self.rows_where(|f| f != fold)
    }

    fn rows_where(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        self.fold_assignments
            .iter()
            .enumerate()
            .filter(|&(_, &f)| keep(f))
            .map(|(r, _)| r)
            .collect()
    }
}

pub fn stratified_kfold<T: Scalar>(data: &Dataset<T>, k: usize, seed: u64) -> Result<FoldSplit> {
    stratified_kfold_labels(data.labels(), k, seed)
}

/// Stratified assignment: members of each class are shuffled and dealt
/// round-robin, continuing the deal across classes so fold totals stay level.
pub fn stratified_kfold_labels(labels: &[i32], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}, need at least 2 folds")));
    }
    let counts = count_labels(labels, None);
    if let Some(&(label, count)) = counts.iter().find(|&&(_, c)| c < k) {
        return Err(Error::ClassTooSmall {
            label,
            count,
            needed: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_assignments = vec![0; labels.len()];
    let mut next = 0;
    for (label, _) in counts {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == label).collect();
        members.shuffle(&mut rng);
        for r in members {
            fold_assignments[r] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldSplit { fold_assignments, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per_fold(split: &FoldSplit, labels: &[i32], class: i32) -> Vec<usize> {
        let mut c = vec![0; split.k];
        for (r, &f) in split.fold_assignments.iter().enumerate() {
            if labels[r] == class {
                c[f] += 1;
            }
        }
        c
    }

    #[test]
    fn exact_divisibility() {
        let labels: Vec<i32> = (0..20).map(|i| if i < 10 { 1 } else { -1 }).collect();
        let s = stratified_kfold_labels(&labels, 5, 3).unwrap();
        assert_eq!(per_fold(&s, &labels, 1), vec![2; 5]);
        assert_eq!(per_fold(&s, &labels, -1), vec![2; 5]);
    }

    #[test]
    fn pigeonhole() {
        let labels: Vec<i32> = (0..17).map(|i| if i < 7 { 1 } else { -1 }).collect();
        let s = stratified_kfold_labels(&labels, 5, 9).unwrap();
        let mut pos = per_fold(&s, &labels, 1);
        pos.sort_unstable();
        assert_eq!(pos, vec![1, 1, 1, 2, 2]);
    }

    #[test]
    fn two_folds_four_points() {
        let labels = [1, 1, -1, -1];
        let s = stratified_kfold_labels(&labels, 2, 0).unwrap();
        assert_eq!(per_fold(&s, &labels, 1), vec![1, 1]);
        assert_eq!(per_fold(&s, &labels, -1), vec![1, 1]);
        assert_eq!(s.test_rows(0).len() + s.train_rows(0).len(), 4);
    }

    #[test]
    fn small_class_rejected() {
        let labels = [1, 1, -1, -1, -1, -1];
        assert!(matches!(
            stratified_kfold_labels(&labels, 3, 0),
            Err(Error::ClassTooSmall { label: 1, count: 2, needed: 3 })
        ));
        assert!(stratified_kfold_labels(&labels, 1, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let labels: Vec<i32> = (0..50).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        assert_eq!(
            stratified_kfold_labels(&labels, 4, 5).unwrap(),
            stratified_kfold_labels(&labels, 4, 5).unwrap()
        );
    }
}
