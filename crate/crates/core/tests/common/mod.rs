#![allow(dead_code)]

use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fakewatch::capture::Scenario;
use fakewatch::scoring::{ScoreBackend, ScoreTensor, ScorerHandle, ScoringError};

/// 900 frames at 30 fps, one face, watermark 0.9 on frames 300..=599.
pub const GOLDEN: &str = "golden-320x240@30;frames=900;seed=11;face=112,72,96,96;wm=0.9:300-599";

pub fn scenario(desc: &str) -> Scenario {
    desc.parse().expect("valid scenario")
}

/// Render `desc` into `root/name` and return the bundle directory.
pub fn bundle(root: &Path, name: &str, desc: &str) -> PathBuf {
    let dir = root.join(name);
    scenario(desc).write_bundle(&dir).expect("bundle written");
    dir
}

/// Ten watermarked and ten clean labeled bundles, one subject each.
pub fn labeled_set(root: &Path) -> Vec<PathBuf> {
    (0..20)
        .map(|i| {
            let wm = if i < 10 { ";wm=0.8:0-89" } else { "" };
            let desc = format!("b{i:02}-160x120@30;frames=90;seed={i};face=50,30,48,48{wm};subject=s{i:02}");
            bundle(root, &format!("b{i:02}"), &desc)
        })
        .collect()
}

/// Scores every segment 0 or 1 by a seeded coin keyed on the segment bytes.
pub struct CoinFlip(pub u64);

impl ScoreBackend for CoinFlip {
    fn score(&self, tensor: &ScoreTensor) -> Result<f64, ScoringError> {
        let mut h = DefaultHasher::new();
        self.0.hash(&mut h);
        for v in tensor.data().iter().step_by(97) {
            v.to_bits().hash(&mut h);
        }
        Ok((h.finish() >> 63) as f64)
    }
}

pub fn coin_flip(seed: u64, size: u32) -> ScorerHandle {
    ScorerHandle::from_backend(Arc::new(CoinFlip(seed)), size, Default::default())
}
