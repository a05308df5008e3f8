use super::{EvalError, Label, LabeledScore};

/// Exact ROC-AUC: the fraction of (fake, real) pairs where the fake item
/// scores higher, ties counting one half.
///
/// Runs in `O(n log n)` by sorting once and walking groups of equal scores.
/// Counts are kept as integers, so the only rounding is the final division.
pub fn compute_auc(items: &[LabeledScore]) -> Result<f64, EvalError> {
    let mut scored: Vec<(f64, Label)> = Vec::with_capacity(items.len());
    for it in items {
        if !(0.0..=1.0).contains(&it.score) {
            return Err(EvalError::InvalidScore(it.score));
        }
        scored.push((it.score, it.label));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));

    let positives = scored.iter().filter(|(_, l)| *l == Label::Fake).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::DegenerateLabels { positives, negatives });
    }

    // twice the AUC numerator: 2 per win, 1 per tie
    let mut doubled: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        // -0.0 and 0.0 compare equal here, as they should
        while j < scored.len() && scored[j].0 == scored[i].0 {
            match scored[j].1 {
                Label::Fake => pos += 1,
                Label::Real => neg += 1,
            }
            j += 1;
        }
        doubled += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        i = j;
    }
    Ok(doubled as f64 / (2 * positives as u128 * negatives as u128) as f64)
}

/// Brute-force `O(P * N)` pairwise AUC over raw score lists.
pub fn auc_pairwise(fake: &[f64], real: &[f64]) -> Option<f64> {
    if fake.is_empty() || real.is_empty() {
        return None;
    }
    let mut doubled: u64 = 0;
    for &p in fake {
        for &n in real {
            doubled += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    Some(doubled as f64 / (2 * fake.len() as u64 * real.len() as u64) as f64)
}
