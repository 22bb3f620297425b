use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Splits sample indices into `k` disjoint folds that preserve class
/// proportions.
///
/// Each class's indices are shuffled (seeded) and dealt round-robin from
/// fold 0, so a class's count differs by at most one between folds and a
/// class with fewer than `k` samples lands in the first folds. Indices
/// inside each fold are sorted.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng::seeded(seed, rng::stream_tag(b"folds"));
    let mut folds = vec![Vec::new(); k];
    for mut members in by_class {
        members.shuffle(&mut rng);
        for (j, idx) in members.into_iter().enumerate() {
            folds[j % k].push(idx);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Fold number of every sample, inverse of [`stratified_folds`].
pub fn fold_assignments(folds: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; n];
    for (f, members) in folds.iter().enumerate() {
        for &i in members {
            out[i] = f;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_two_class_split() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let folds = stratified_folds(&labels, 10, 1).unwrap();
        for f in &folds {
            assert_eq!(f.iter().filter(|&&i| labels[i] == 0).count(), 5);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 5);
        }
    }

    #[test]
    fn tiny_class_goes_to_first_folds() {
        let mut labels = vec![0; 30];
        labels.extend([1, 1, 1]);
        let folds = stratified_folds(&labels, 10, 7).unwrap();
        let with_one: Vec<usize> = (0..10)
            .filter(|&f| folds[f].iter().any(|&i| labels[i] == 1))
            .collect();
        assert_eq!(with_one, vec![0, 1, 2]);
    }

    #[test]
    fn needs_two_folds() {
        assert!(matches!(stratified_folds(&[0, 1], 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn seeded() {
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        assert_eq!(stratified_folds(&labels, 5, 3).unwrap(), stratified_folds(&labels, 5, 3).unwrap());
        assert_ne!(stratified_folds(&labels, 5, 3).unwrap(), stratified_folds(&labels, 5, 4).unwrap());
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(labels in proptest::collection::vec(0usize..6, 1..300), k in 2usize..12, seed in any::<u64>()) {
            let folds = stratified_folds(&labels, k, seed).unwrap();
            prop_assert_eq!(folds.len(), k);
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for class in 0..6 {
                let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == class).count()).collect();
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
            let assign = fold_assignments(&folds, labels.len());
            prop_assert!(assign.iter().all(|&f| f < k));
        }
    }
}
