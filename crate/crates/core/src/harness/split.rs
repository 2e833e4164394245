use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("class {class} has {count} members, fewer than k = {k}")]
    ClassTooSmall { class: usize, count: usize, k: usize },
    #[error("k must be at least 2")]
    TooFewFolds,
    #[error("oversampling needs two classes present, found {0}")]
    SingleClass(usize),
}

/// Train/test record indices for one fold, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold over class labels. Each class is shuffled and dealt
/// round-robin across folds, continuing from the fold where the previous
/// class stopped, so per-fold class counts differ from `n_c / k` by < 1.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>, SplitError> {
    if k < 2 {
        return Err(SplitError::TooFewFolds);
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next = 0;
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(SplitError::ClassTooSmall { class, count: members.len(), k });
        }
        members.shuffle(&mut rng);
        for i in members {
            tests[next].push(i);
            next = (next + 1) % k;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train = (0..labels.len()).filter(|i| test.binary_search(i).is_err()).collect();
            Fold { train, test }
        })
        .collect())
}

/// Appends minority-class duplicates, drawn with replacement, until both
/// classes of `labels[i]` over `indices` are equally frequent.
pub fn oversample_minority(indices: &[usize], labels: &[usize], rng: &mut impl Rng) -> Result<Vec<usize>, SplitError> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &i in indices {
        by_class[labels[i]].push(i);
    }
    let present: Vec<&Vec<usize>> = by_class.iter().filter(|c| !c.is_empty()).collect();
    if present.len() != 2 {
        return Err(SplitError::SingleClass(present.len()));
    }
    let (small, large) = if present[0].len() <= present[1].len() { (present[0], present[1]) } else { (present[1], present[0]) };
    let mut out = indices.to_vec();
    for _ in small.len()..large.len() {
        out.push(small[rng.gen_range(0..small.len())]);
    }
    Ok(out)
}

/// Seeded hold-out slice of `round(fraction · n)` indices (at least one when
/// the fraction is positive and two or more indices are available).
pub fn validation_split(indices: &[usize], fraction: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = indices.to_vec();
    shuffled.shuffle(rng);
    let mut n_val = (fraction * indices.len() as f64).round() as usize;
    if fraction > 0.0 && indices.len() >= 2 {
        n_val = n_val.clamp(1, indices.len() - 1);
    }
    let mut val = shuffled.split_off(indices.len() - n_val);
    let mut train = shuffled;
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(idx: &[usize], labels: &[usize], class: usize) -> usize {
        idx.iter().filter(|&&i| labels[i] == class).count()
    }

    #[test]
    fn exact_divisibility() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 20)).collect();
        let folds = stratified_kfold(&labels, 5, 1).unwrap();
        for f in &folds {
            assert_eq!(count(&f.test, &labels, 0), 4);
            assert_eq!(count(&f.test, &labels, 1), 16);
            assert_eq!(f.train.len() + f.test.len(), 100);
        }
    }

    #[test]
    fn ten_records_two_folds() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let folds = stratified_kfold(&labels, 2, 4).unwrap();
        for f in &folds {
            assert_eq!(f.test.len(), 5);
            let c = count(&f.test, &labels, 0);
            assert!((2..=3).contains(&c));
        }
        assert_eq!(folds, stratified_kfold(&labels, 2, 4).unwrap());
    }

    #[test]
    fn tiny_class_errors() {
        let labels = [0, 1, 1, 1, 1, 1];
        assert_eq!(stratified_kfold(&labels, 5, 0), Err(SplitError::ClassTooSmall { class: 0, count: 1, k: 5 }));
    }

    #[test]
    fn oversampling_reaches_parity() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i >= 10)).collect();
        let idx: Vec<usize> = (0..50).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = oversample_minority(&idx, &labels, &mut rng).unwrap();
        assert_eq!((count(&out, &labels, 0), count(&out, &labels, 1)), (40, 40));
        assert_eq!(&out[..50], &idx[..]);

        let balanced = [0, 1, 0, 1];
        assert_eq!(oversample_minority(&[0, 1, 2, 3], &balanced, &mut rng).unwrap(), [0, 1, 2, 3]);
        assert_eq!(oversample_minority(&[1, 3], &balanced, &mut rng), Err(SplitError::SingleClass(1)));
    }

    #[test]
    fn validation_split_sizes() {
        let idx: Vec<usize> = (0..50).collect();
        let (train, val) = validation_split(&idx, 0.1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!((train.len(), val.len()), (45, 5));
        let (train, val) = validation_split(&idx, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!((train.len(), val.len()), (50, 0));
        let (_, val) = validation_split(&idx[..4], 0.1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(val.len(), 1);
    }
}
