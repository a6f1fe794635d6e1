//! Four-fold cross-split construction over the eight sequences.

use crate::error::{CoreError, Result};

/// One train/test fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    /// 1-based fold index.
    pub index: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

const ENVIRONMENTS: [char; 2] = ['V', 'K'];

/// Build the four folds: fold k holds out {V-0k, K-0k} as test and uses
/// the remaining input sequences as train. The input must contain V-01..04
/// and K-01..04; any extra labels always land in train.
pub fn build_splits(sequences: &[String]) -> Result<Vec<Fold>> {
    for env in ENVIRONMENTS {
        for k in 1..=4 {
            let label = format!("{env}-0{k}");
            if !sequences.iter().any(|s| s == &label) {
                return Err(CoreError::MissingSequence(label));
            }
        }
    }
    let mut sorted: Vec<String> = sequences.to_vec();
    sorted.sort();
    sorted.dedup();

    let mut folds = Vec::with_capacity(4);
    for k in 1..=4 {
        let test: Vec<String> = ENVIRONMENTS.iter().map(|env| format!("{env}-0{k}")).collect();
        let train: Vec<String> = sorted
            .iter()
            .filter(|s| !test.contains(s))
            .cloned()
            .collect();
        folds.push(Fold {
            index: k,
            train,
            test,
        });
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_sequences() -> Vec<String> {
        let mut v = Vec::new();
        for env in ['V', 'K'] {
            for k in 1..=4 {
                v.push(format!("{env}-0{k}"));
            }
        }
        v
    }

    #[test]
    fn fold_contents() {
        let folds = build_splits(&all_sequences()).unwrap();
        assert_eq!(folds.len(), 4);
        assert_eq!(folds[0].test, vec!["V-01", "K-01"]);
        assert_eq!(folds[0].train.len(), 6);
        assert!(!folds[0].train.contains(&"V-01".to_string()));
        assert_eq!(folds[3].test, vec!["V-04", "K-04"]);
    }

    #[test]
    fn folds_partition_the_sequences() {
        let folds = build_splits(&all_sequences()).unwrap();
        let mut seen = Vec::new();
        for f in &folds {
            for s in &f.test {
                assert!(!seen.contains(s), "{s} tested twice");
                seen.push(s.clone());
            }
            for s in &f.test {
                assert!(!f.train.contains(s));
            }
            assert_eq!(f.train.len() + f.test.len(), 8);
        }
        seen.sort();
        let mut all = all_sequences();
        all.sort();
        assert_eq!(seen, all);
    }

    #[test]
    fn missing_sequence_is_an_error() {
        let mut seqs = all_sequences();
        seqs.retain(|s| s != "K-03");
        assert!(matches!(
            build_splits(&seqs),
            Err(CoreError::MissingSequence(s)) if s == "K-03"
        ));
    }

    #[test]
    fn extra_sequences_stay_in_train() {
        let mut seqs = all_sequences();
        seqs.push("V-05".to_string());
        let folds = build_splits(&seqs).unwrap();
        for f in &folds {
            assert!(f.train.contains(&"V-05".to_string()));
        }
    }
}
