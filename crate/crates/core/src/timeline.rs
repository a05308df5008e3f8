//! Per-session score history, color bands and summaries.
//!
//! The timeline only ever stores scores and time spans, never pixels.

use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::FakenessScore;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimelineError {
    #[error("sample [{t_start_ms}, {t_end_ms}] starts before the previous sample ends at {prev_end_ms}")]
    Ordering { t_start_ms: u64, t_end_ms: u64, prev_end_ms: u64 },
    #[error("sample span is reversed: [{0}, {1}]")]
    ReversedSpan(u64, u64),
}

/// Severity color, ordered from least to most suspicious.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Green,
    Yellow,
    Orange,
    Red,
}

/// Lower-inclusive band cut-offs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandThresholds {
    pub yellow: f64,
    pub orange: f64,
    pub red: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        Self { yellow: 0.3, orange: 0.5, red: 0.7 }
    }
}

impl BandThresholds {
    pub fn new(yellow: f64, orange: f64, red: f64) -> Option<Self> {
        (0.0 < yellow && yellow <= orange && orange <= red && red <= 1.0).then_some(Self { yellow, orange, red })
    }

    pub fn band(&self, score: FakenessScore) -> Band {
        let s = score.value();
        if s >= self.red {
            Band::Red
        } else if s >= self.orange {
            Band::Orange
        } else if s >= self.yellow {
            Band::Yellow
        } else {
            Band::Green
        }
    }
}

/// Band under the default 0.3 / 0.5 / 0.7 thresholds.
pub fn color_band(score: FakenessScore) -> Band {
    BandThresholds::default().band(score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub t_start_ms: u64,
    pub t_end_ms: u64,
    pub score: FakenessScore,
    pub band: Band,
    /// Segments dropped or left unscored right before this one.
    pub gap_before: u32,
}

/// A score and where it happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub score: f64,
    pub t_start_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak: Option<Extreme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trough: Option<Extreme>,
    pub sample_count: usize,
    pub gap_count: u64,
    pub duration_ms: u64,
}

/// Summary statistics of a sample list. Peak and trough ties go to the
/// earliest sample.
pub fn summarize(samples: &[ScoreSample]) -> SessionSummary {
    let gap_count = samples.iter().map(|s| u64::from(s.gap_before)).sum();
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return SessionSummary { average: None, peak: None, trough: None, sample_count: 0, gap_count, duration_ms: 0 };
    };
    let mut peak = first;
    let mut trough = first;
    let mut sum = 0.0;
    for s in samples {
        sum += s.score.value();
        if s.score.value() > peak.score.value() {
            peak = s;
        }
        if s.score.value() < trough.score.value() {
            trough = s;
        }
    }
    let ext = |s: &ScoreSample| Extreme { score: s.score.value(), t_start_ms: s.t_start_ms };
    SessionSummary {
        average: Some(sum / samples.len() as f64),
        peak: Some(ext(peak)),
        trough: Some(ext(trough)),
        sample_count: samples.len(),
        gap_count,
        duration_ms: last.t_end_ms - first.t_start_ms,
    }
}

/// Append-only series of samples with change notification.
#[derive(Debug, Default)]
pub struct Timeline {
    thresholds: BandThresholds,
    samples: Vec<ScoreSample>,
    subscribers: Vec<Sender<ScoreSample>>,
}

impl Timeline {
    pub fn new(thresholds: BandThresholds) -> Self {
        Self { thresholds, samples: Vec::new(), subscribers: Vec::new() }
    }

    pub fn thresholds(&self) -> BandThresholds {
        self.thresholds
    }

    pub fn samples(&self) -> &[ScoreSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn append(
        &mut self,
        t_start_ms: u64,
        t_end_ms: u64,
        score: FakenessScore,
        gap_before: u32,
    ) -> Result<ScoreSample, TimelineError> {
        if t_end_ms < t_start_ms {
            return Err(TimelineError::ReversedSpan(t_start_ms, t_end_ms));
        }
        if let Some(prev) = self.samples.last() {
            if t_start_ms < prev.t_end_ms {
                return Err(TimelineError::Ordering { t_start_ms, t_end_ms, prev_end_ms: prev.t_end_ms });
            }
        }
        let sample = ScoreSample { t_start_ms, t_end_ms, score, band: self.thresholds.band(score), gap_before };
        self.samples.push(sample);
        self.subscribers.retain(|tx| tx.send(sample).is_ok());
        Ok(sample)
    }

    /// Samples whose span intersects `[from_ms, to_ms]`, in order.
    pub fn series(&self, from_ms: u64, to_ms: u64) -> &[ScoreSample] {
        if from_ms > to_ms {
            return &[];
        }
        // spans are ordered and disjoint, so both ends are monotone
        let lo = self.samples.partition_point(|s| s.t_end_ms < from_ms);
        let hi = self.samples.partition_point(|s| s.t_start_ms <= to_ms);
        &self.samples[lo..hi.max(lo)]
    }

    pub fn summarize(&self) -> SessionSummary {
        summarize(&self.samples)
    }

    /// Receive every sample appended from now on.
    pub fn subscribe(&mut self) -> Receiver<ScoreSample> {
        let (tx, rx) = mpsc::channel();
        self.subscribers.push(tx);
        rx
    }
}

/// A timeline shared between one writer and any number of readers.
#[derive(Debug, Clone, Default)]
pub struct SharedTimeline(Arc<RwLock<Timeline>>);

impl SharedTimeline {
    pub fn new(thresholds: BandThresholds) -> Self {
        Self(Arc::new(RwLock::new(Timeline::new(thresholds))))
    }

    pub fn append(&self, t_start_ms: u64, t_end_ms: u64, score: FakenessScore, gap_before: u32) -> Result<ScoreSample, TimelineError> {
        self.0.write().unwrap_or_else(|e| e.into_inner()).append(t_start_ms, t_end_ms, score, gap_before)
    }

    pub fn read<R>(&self, f: impl FnOnce(&Timeline) -> R) -> R {
        f(&self.0.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn snapshot(&self) -> Vec<ScoreSample> {
        self.read(|t| t.samples().to_vec())
    }

    pub fn series(&self, from_ms: u64, to_ms: u64) -> Vec<ScoreSample> {
        self.read(|t| t.series(from_ms, to_ms).to_vec())
    }

    pub fn summarize(&self) -> SessionSummary {
        self.read(Timeline::summarize)
    }

    /// Current samples plus a feed of everything appended afterwards, taken
    /// atomically so nothing is missed or repeated.
    pub fn subscribe_with_backlog(&self) -> (Vec<ScoreSample>, Receiver<ScoreSample>) {
        let mut t = self.0.write().unwrap_or_else(|e| e.into_inner());
        (t.samples().to_vec(), t.subscribe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(v: f64) -> FakenessScore {
        FakenessScore::new(v).unwrap()
    }

    #[test]
    fn band_boundaries() {
        assert_eq!(color_band(fs(0.0)), Band::Green);
        assert_eq!(color_band(fs(0.299)), Band::Green);
        assert_eq!(color_band(fs(0.3)), Band::Yellow);
        assert_eq!(color_band(fs(0.5)), Band::Orange);
        assert_eq!(color_band(fs(0.7)), Band::Red);
        assert_eq!(color_band(fs(1.0)), Band::Red);
    }

    #[test]
    fn custom_thresholds_validate() {
        assert!(BandThresholds::new(0.2, 0.4, 0.6).is_some());
        assert!(BandThresholds::new(0.5, 0.4, 0.6).is_none());
        assert!(BandThresholds::new(0.0, 0.4, 0.6).is_none());
    }

    #[test]
    fn append_and_ordering() {
        let mut t = Timeline::default();
        t.append(0, 966, fs(0.1), 0).unwrap();
        assert_eq!(t.len(), 1);
        assert!(matches!(t.append(900, 1900, fs(0.1), 0), Err(TimelineError::Ordering { .. })));
        t.append(1000, 1966, fs(0.1), 0).unwrap();
        assert_eq!(t.append(5, 1, fs(0.1), 0), Err(TimelineError::ReversedSpan(5, 1)));
    }

    #[test]
    fn subscribers_notified_once_in_order() {
        let mut t = Timeline::default();
        let rx = t.subscribe();
        for i in 0..30u64 {
            t.append(i * 1000, i * 1000 + 966, fs(i as f64 / 30.0), 0).unwrap();
        }
        let got: Vec<u64> = rx.try_iter().map(|s| s.t_start_ms).collect();
        assert_eq!(got, (0..30).map(|i| i * 1000).collect::<Vec<_>>());
    }

    #[test]
    fn summary_examples() {
        let mut t = Timeline::default();
        t.append(0, 1000, fs(0.2), 0).unwrap();
        t.append(2000, 3000, fs(0.8), 0).unwrap();
        t.append(4000, 5000, fs(0.5), 1).unwrap();
        let s = t.summarize();
        assert!((s.average.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(s.peak, Some(Extreme { score: 0.8, t_start_ms: 2000 }));
        assert_eq!(s.trough, Some(Extreme { score: 0.2, t_start_ms: 0 }));
        assert_eq!((s.sample_count, s.gap_count, s.duration_ms), (3, 1, 5000));
    }

    #[test]
    fn empty_summary() {
        let s = Timeline::default().summarize();
        assert_eq!(s.sample_count, 0);
        assert!(s.average.is_none() && s.peak.is_none() && s.trough.is_none());
    }

    #[test]
    fn constant_session_ties_to_first() {
        let mut t = Timeline::default();
        for i in 0..5u64 {
            t.append(i * 10 + 100, i * 10 + 105, fs(0.4), 0).unwrap();
        }
        let s = t.summarize();
        assert_eq!(s.peak.unwrap(), Extreme { score: 0.4, t_start_ms: 100 });
        assert_eq!(s.trough.unwrap(), Extreme { score: 0.4, t_start_ms: 100 });
        assert!((s.average.unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn series_queries() {
        let mut t = Timeline::default();
        for i in 0..10u64 {
            t.append(i * 1000, i * 1000 + 500, fs(0.1), 0).unwrap();
        }
        assert_eq!(t.series(0, u64::MAX).len(), 10);
        assert!(t.series(20_000, 30_000).is_empty());
        assert!(t.series(600, 900).is_empty());
        let mid = t.series(2500, 4200);
        assert_eq!(mid.iter().map(|s| s.t_start_ms).collect::<Vec<_>>(), vec![2000, 3000, 4000]);
        assert!(t.series(5, 1).is_empty());
    }

    #[test]
    fn backlog_subscription_misses_nothing() {
        let shared = SharedTimeline::default();
        shared.append(0, 10, fs(0.3), 0).unwrap();
        let (backlog, rx) = shared.subscribe_with_backlog();
        shared.append(20, 30, fs(0.6), 0).unwrap();
        assert_eq!(backlog.len(), 1);
        let live: Vec<_> = rx.try_iter().collect();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].band, Band::Orange);
    }
}
