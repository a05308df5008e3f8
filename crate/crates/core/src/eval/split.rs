use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, SubjectItem};

/// Train:test proportion by item count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub test: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self { train: 3, test: 1 }
    }
}

impl SplitRatio {
    pub fn test_fraction(&self) -> f64 {
        f64::from(self.test) / f64::from(self.train + self.test)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<SubjectItem>,
    pub test: Vec<SubjectItem>,
}

impl Split {
    pub fn test_fraction(&self) -> f64 {
        self.test.len() as f64 / (self.train.len() + self.test.len()) as f64
    }
}

/// Partition items so that no subject appears on both sides.
///
/// Subjects are sorted, shuffled with a seeded RNG, then assigned one by one
/// to whichever side moves the test item count closer to its target share.
/// The result depends only on the item set and the seed, not input order.
pub fn subject_independent_split(items: &[SubjectItem], ratio: SplitRatio, seed: u64) -> Result<Split, EvalError> {
    if ratio.train == 0 || ratio.test == 0 {
        return Err(EvalError::InvalidItem("both sides of the ratio must be positive".into()));
    }
    let mut by_subject: BTreeMap<&str, Vec<&SubjectItem>> = BTreeMap::new();
    for it in items {
        if it.item_id.is_empty() || it.subject_id.is_empty() {
            return Err(EvalError::InvalidItem("item and subject ids must be non-empty".into()));
        }
        by_subject.entry(&it.subject_id).or_default().push(it);
    }
    if by_subject.len() < 2 {
        return Err(EvalError::Split(by_subject.len()));
    }

    let mut subjects: Vec<(&str, usize)> = by_subject.iter().map(|(s, v)| (*s, v.len())).collect();
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let target = items.len() as f64 * ratio.test_fraction();
    let mut test_n = 0usize;
    let mut to_test = Vec::new();
    let mut to_train = Vec::new();
    for (subject, n) in subjects {
        let with = ((test_n + n) as f64 - target).abs();
        let without = (test_n as f64 - target).abs();
        if with < without {
            test_n += n;
            to_test.push((subject, n));
        } else {
            to_train.push((subject, n));
        }
    }
    // Both sides must hold at least one subject.
    let smallest = |v: &Vec<(&str, usize)>| {
        v.iter().enumerate().min_by_key(|(_, (s, n))| (*n, *s)).map(|(i, _)| i).expect("non-empty")
    };
    if to_test.is_empty() {
        let i = smallest(&to_train);
        to_test.push(to_train.swap_remove(i));
    } else if to_train.is_empty() {
        let i = smallest(&to_test);
        to_train.push(to_test.swap_remove(i));
    }

    let collect = |side: &[(&str, usize)]| {
        let mut v: Vec<SubjectItem> = side.iter().flat_map(|(s, _)| by_subject[s].iter().map(|it| (*it).clone())).collect();
        v.sort();
        v
    };
    Ok(Split { train: collect(&to_train), test: collect(&to_test) })
}
