use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotatedSentence, DataError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.8, validation: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    fn check(&self) -> Result<(), DataError> {
        let r = self.as_array();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DataError::InvalidSplit(format!("ratios must be non-negative, got {r:?}")));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidSplit(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<AnnotatedSentence>,
    pub validation: Vec<AnnotatedSentence>,
    pub test: Vec<AnnotatedSentence>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn parts(&self) -> [(&'static str, &[AnnotatedSentence]); 3] {
        [("train", &self.train), ("validation", &self.validation), ("test", &self.test)]
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub split: DatasetSplit,
    pub warnings: Vec<String>,
}

/// Assigns whole title groups to train/validation/test.
///
/// Groups are visited largest first (seeded shuffle breaks ties between
/// equal sizes) and each goes to the split currently furthest below its
/// target sentence count. Within a split, sentences keep input order.
pub fn stratified_split(
    data: &[AnnotatedSentence],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitOutcome, DataError> {
    ratios.check()?;
    if data.is_empty() {
        return Err(DataError::InvalidSplit("no sentences to split".into()));
    }

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, rec) in data.iter().enumerate() {
        groups.entry(rec.title.as_str()).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    groups.sort_by_key(|g| std::cmp::Reverse(g.len()));

    let total = data.len() as f64;
    let targets = ratios.as_array().map(|r| r * total);
    let mut counts = [0usize; 3];
    let mut assignment = vec![0usize; data.len()];
    for group in &groups {
        let mut best = 0;
        for k in 1..3 {
            if targets[k] - counts[k] as f64 > targets[best] - counts[best] as f64 {
                best = k;
            }
        }
        counts[best] += group.len();
        for &i in group {
            assignment[i] = best;
        }
    }

    let mut parts: [Vec<AnnotatedSentence>; 3] = Default::default();
    for (rec, &k) in data.iter().zip(&assignment) {
        parts[k].push(rec.clone());
    }

    let names = ["train", "validation", "test"];
    let mut warnings = Vec::new();
    for k in 0..3 {
        if parts[k].is_empty() && targets[k] > 0.0 {
            warnings.push(format!(
                "{} split is empty: {} title group(s) cannot fill three splits",
                names[k],
                groups.len()
            ));
        }
    }
    let [train, validation, test] = parts;
    Ok(SplitOutcome { split: DatasetSplit { train, validation, test, seed }, warnings })
}
