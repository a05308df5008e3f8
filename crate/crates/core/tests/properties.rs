use std::collections::HashSet;
use std::sync::Arc;

use fakewatch::buffer::PixelBuffer;
use fakewatch::eval::{auc_pairwise, compute_auc, subject_independent_split, Label, LabeledScore, SplitRatio, SubjectItem};
use fakewatch::face::FaceCrop;
use fakewatch::scoring::{preprocess, FakenessScore, Segment};
use fakewatch::timeline::{color_band, BandThresholds, Timeline};
use proptest::prelude::*;

fn labeled() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((0.0..=1.0f64, any::<bool>()), 2..120)
        .prop_filter("both labels", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
}

fn items(v: &[(f64, bool)], f: impl Fn(f64) -> f64) -> Vec<LabeledScore> {
    v.iter()
        .enumerate()
        .map(|(i, &(s, fake))| LabeledScore::new(format!("{i}"), if fake { Label::Fake } else { Label::Real }, f(s)).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn auc_matches_pairwise(v in labeled()) {
        let fake: Vec<f64> = v.iter().filter(|x| x.1).map(|x| x.0).collect();
        let real: Vec<f64> = v.iter().filter(|x| !x.1).map(|x| x.0).collect();
        prop_assert_eq!(compute_auc(&items(&v, |s| s)).unwrap(), auc_pairwise(&fake, &real).unwrap());
    }

    #[test]
    fn auc_ignores_monotone_transforms(v in labeled()) {
        let base = compute_auc(&items(&v, |s| s)).unwrap();
        // strictly increasing on [0, 1] and staying inside it
        let squashed = compute_auc(&items(&v, |s| s * s * 0.5 + s * 0.25)).unwrap();
        prop_assert!((base - squashed).abs() < 1e-12);
    }

    #[test]
    fn flipping_labels_complements_auc(v in labeled()) {
        let distinct: HashSet<u64> = v.iter().map(|x| x.0.to_bits()).collect();
        prop_assume!(distinct.len() == v.len());
        let flipped: Vec<(f64, bool)> = v.iter().map(|&(s, f)| (s, !f)).collect();
        let a = compute_auc(&items(&v, |s| s)).unwrap();
        let b = compute_auc(&items(&flipped, |s| s)).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_is_order_invariant_and_disjoint(
        counts in prop::collection::vec(1usize..8, 2..40),
        seed in any::<u64>(),
        rot in any::<prop::sample::Index>(),
    ) {
        let mut all: Vec<SubjectItem> = counts
            .iter()
            .enumerate()
            .flat_map(|(s, &n)| (0..n).map(move |i| SubjectItem::new(format!("i{s}-{i}"), format!("s{s}"), Label::Real).unwrap()))
            .collect();
        let a = subject_independent_split(&all, SplitRatio::default(), seed).unwrap();
        let k = rot.index(all.len());
        all.rotate_left(k);
        all.reverse();
        let b = subject_independent_split(&all, SplitRatio::default(), seed).unwrap();
        prop_assert_eq!(&a, &b);
        let train: HashSet<_> = a.train.iter().map(|i| &i.subject_id).collect();
        prop_assert!(a.test.iter().all(|i| !train.contains(&i.subject_id)));
        prop_assert!(!a.train.is_empty() && !a.test.is_empty());
    }

    #[test]
    fn series_equals_linear_scan(
        spans in prop::collection::vec((0u64..50, 1u64..40, 0.0..=1.0f64), 0..60),
        from in 0u64..3000,
        len in 0u64..3000,
    ) {
        let mut t = Timeline::new(BandThresholds::default());
        let mut at = 0;
        for &(gap, dur, score) in &spans {
            let start = at + gap;
            t.append(start, start + dur, FakenessScore::new(score).unwrap(), 0).unwrap();
            at = start + dur;
        }
        let to = from + len;
        let linear: Vec<_> = t.samples().iter().filter(|s| s.t_start_ms <= to && s.t_end_ms >= from).copied().collect();
        prop_assert_eq!(t.series(from, to).to_vec(), linear);
        let sum = t.summarize();
        prop_assert_eq!(sum.sample_count, spans.len());
        if let (Some(avg), Some(p), Some(q)) = (sum.average, sum.peak, sum.trough) {
            prop_assert!(q.score <= avg + 1e-12 && avg <= p.score + 1e-12);
            prop_assert!(t.samples().iter().any(|s| s.t_start_ms == p.t_start_ms && s.score.value() == p.score));
        }
        for s in t.samples() {
            prop_assert_eq!(s.band, color_band(s.score));
        }
    }

    #[test]
    fn preprocess_inverts_up_to_quantization(bytes in prop::collection::vec(any::<u8>(), 4 * 4 * 3)) {
        let crops: Vec<FaceCrop> = (0..30u64)
            .map(|i| {
                let px: Vec<u8> = bytes.iter().map(|b| b.wrapping_add(i as u8)).collect();
                FaceCrop { seq: i, ts_ms: i * 33, size: 4, pixels: Arc::new(PixelBuffer::new(px, None)) }
            })
            .collect();
        let seg = Segment::new(crops.clone()).unwrap();
        let t = preprocess(&seg);
        for (ti, c) in crops.iter().enumerate() {
            for y in 0..4 {
                for x in 0..4 {
                    let px = c.pixel(x, y);
                    for (ch, &want) in px.iter().enumerate() {
                        let v = t.get(ch, ti, y as usize, x as usize);
                        prop_assert_eq!((v * 255.0).round() as u8, want);
                    }
                }
            }
        }
    }
}
