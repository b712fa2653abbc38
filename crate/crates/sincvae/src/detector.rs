//! Threshold resolution, window classification, detection metrics, and
//! phase-rate analysis over annotated tracks.
//!
//! Two threshold policies come out of the training pipeline: `t1`, the
//! maximum validation reconstruction error, and `t2`, the 95th
//! percentile of it. Both are instances of [`ThresholdPolicy`]. A
//! window is anomalous only when its score is strictly above the
//! threshold — a score exactly at the threshold stays normal, which
//! errs toward fewer false alarms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::{Label, Phase};
use crate::stats::percentile_linear;

/// How to turn validation scores into a decision threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdPolicy {
    /// `t1`: the maximum validation score.
    MaxValidation,
    /// `t2`-style: interpolated percentile of the validation scores.
    Percentile(f64),
    /// Percentile by nearest rank — always an observed score.
    /// Selectable through the `threshold.method` config key.
    NearestRank(f64),
}

impl ThresholdPolicy {
    pub fn describe(&self) -> String {
        match self {
            ThresholdPolicy::MaxValidation => "max".into(),
            ThresholdPolicy::Percentile(p) => format!("percentile:{p}"),
            ThresholdPolicy::NearestRank(p) => format!("percentile:{p} (nearest rank)"),
        }
    }
}

pub fn resolve_threshold(validation_scores: &[f64], policy: ThresholdPolicy) -> Result<f64> {
    if validation_scores.is_empty() {
        return Err(Error::Config(
            "resolve_threshold: no validation scores".into(),
        ));
    }
    for (i, &s) in validation_scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::Numeric(format!(
                "resolve_threshold: validation score {i} is {s}"
            )));
        }
    }
    let check_p = |p: f64| -> Result<()> {
        if p > 0.0 && p <= 100.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "threshold percentile must be in (0, 100], got {p}"
            )))
        }
    };
    match policy {
        ThresholdPolicy::MaxValidation => Ok(validation_scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)),
        ThresholdPolicy::Percentile(p) => {
            check_p(p)?;
            percentile_linear(validation_scores, p)
        }
        ThresholdPolicy::NearestRank(p) => {
            check_p(p)?;
            let mut sorted = validation_scores.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
            let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
            Ok(sorted[rank.max(1) - 1])
        }
    }
}

/// Strictly-greater rule: `score > threshold` flags a window.
pub fn classify(scores: &[f64], threshold: f64) -> Vec<Label> {
    scores
        .iter()
        .map(|&s| {
            if s > threshold {
                Label::Seizure
            } else {
                Label::NonSeizure
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub false_positive_rate: f64,
    /// Set when any metric had an empty denominator and was reported
    /// as 0 instead.
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Seizure is the positive class.
pub fn compute_metrics(predictions: &[Label], labels: &[Label]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Config(format!(
            "compute_metrics: {} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (Label::Seizure, Label::Seizure) => c.true_pos += 1,
            (Label::Seizure, Label::NonSeizure) => c.false_pos += 1,
            (Label::NonSeizure, Label::NonSeizure) => c.true_neg += 1,
            (Label::NonSeizure, Label::Seizure) => c.false_neg += 1,
        }
    }
    let mut degenerate = false;
    let precision = ratio(c.true_pos, c.true_pos + c.false_pos, &mut degenerate);
    let recall = ratio(c.true_pos, c.true_pos + c.false_neg, &mut degenerate);
    let false_positive_rate = ratio(c.false_pos, c.false_pos + c.true_neg, &mut degenerate);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate = true;
        0.0
    };
    Ok(Metrics {
        confusion: c,
        precision,
        recall,
        f1,
        false_positive_rate,
        degenerate,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DetectionReport {
    pub policy: String,
    pub threshold: f64,
    pub metrics: Metrics,
    pub scores: Vec<f64>,
    pub predictions: Vec<Label>,
    pub labels: Vec<Label>,
}

/// Resolve a threshold on the validation scores, classify the test
/// scores, and score against the labels, all in one report.
pub fn evaluate(
    scores: &[f64],
    labels: &[Label],
    validation_scores: &[f64],
    policy: ThresholdPolicy,
) -> Result<DetectionReport> {
    let threshold = resolve_threshold(validation_scores, policy)?;
    let predictions = classify(scores, threshold);
    let metrics = compute_metrics(&predictions, labels)?;
    Ok(DetectionReport {
        policy: policy.describe(),
        threshold,
        metrics,
        scores: scores.to_vec(),
        predictions,
        labels: labels.to_vec(),
    })
}

impl DetectionReport {
    pub fn render_text(&self) -> String {
        let c = &self.metrics.confusion;
        let mut out = String::new();
        out.push_str(&format!(
            "threshold {:.6e} (policy {})\n",
            self.threshold, self.policy
        ));
        out.push_str(&format!(
            "{:>12} {:>10} {:>10}\n",
            "", "pred: yes", "pred: no"
        ));
        out.push_str(&format!(
            "{:>12} {:>10} {:>10}\n",
            "label: yes", c.true_pos, c.false_neg
        ));
        out.push_str(&format!(
            "{:>12} {:>10} {:>10}\n",
            "label: no", c.false_pos, c.true_neg
        ));
        out.push_str(&format!(
            "precision {:.4}  recall {:.4}  f1 {:.4}  fpr {:.4}{}\n",
            self.metrics.precision,
            self.metrics.recall,
            self.metrics.f1,
            self.metrics.false_positive_rate,
            if self.metrics.degenerate {
                "  (zero denominator reported as 0)"
            } else {
                ""
            }
        ));
        out
    }
}

/// Pre/post-seizure windows, in seconds, used to tag phases. There is
/// no single standard value; the default is 15 minutes on each side
/// and every report prints the horizons it used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Horizons {
    pub preictal_s: f64,
    pub postictal_s: f64,
}

impl Default for Horizons {
    fn default() -> Self {
        Self {
            preictal_s: 900.0,
            postictal_s: 900.0,
        }
    }
}

fn validate_intervals(intervals: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    for &(s, e) in intervals {
        if !(s.is_finite() && e.is_finite() && e > s && s >= 0.0) {
            return Err(Error::Malformed(format!("bad seizure interval [{s}, {e}]")));
        }
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite interval bounds"));
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Malformed(format!(
                "overlapping seizure intervals [{}, {}] and [{}, {}]",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(sorted)
}

/// Tag each second of a track. The second starting at integer time `s`
/// is ictal when `start <= s < end` for some interval, preictal when it
/// falls within `preictal_s` before a start, postictal within
/// `postictal_s` after an end, interictal otherwise. Where horizons of
/// adjacent seizures collide, the upcoming seizure wins: a second that
/// is both postictal of one event and preictal of the next is tagged
/// preictal, since early warning is the point of the analysis. Every
/// second receives exactly one tag.
pub fn tag_phases(seconds: usize, intervals: &[(f64, f64)], horizons: &Horizons) -> Result<Vec<Phase>> {
    if !(horizons.preictal_s >= 0.0 && horizons.postictal_s >= 0.0)
        || !horizons.preictal_s.is_finite()
        || !horizons.postictal_s.is_finite()
    {
        return Err(Error::Config(format!(
            "horizons must be finite and nonnegative, got pre {} post {}",
            horizons.preictal_s, horizons.postictal_s
        )));
    }
    let intervals = validate_intervals(intervals)?;
    let mut tags = Vec::with_capacity(seconds);
    for i in 0..seconds {
        let s = i as f64;
        let ictal = intervals.iter().any(|&(start, end)| s >= start && s < end);
        let tag = if ictal {
            Phase::Ictal
        } else if intervals
            .iter()
            .any(|&(start, _)| s < start && s >= start - horizons.preictal_s)
        {
            Phase::Preictal
        } else if intervals
            .iter()
            .any(|&(_, end)| s >= end && s < end + horizons.postictal_s)
        {
            Phase::Postictal
        } else {
            Phase::Interictal
        };
        tags.push(tag);
    }
    Ok(tags)
}

/// Percentage of flagged seconds per phase; `None` where the track (or
/// the subject pool) has no seconds of that phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseRates {
    pub interictal: Option<f64>,
    pub preictal: Option<f64>,
    pub ictal: Option<f64>,
    pub postictal: Option<f64>,
}

impl PhaseRates {
    fn from_array(a: [Option<f64>; 4]) -> Self {
        // Indexed by Phase::to_byte.
        Self {
            interictal: a[0],
            preictal: a[1],
            ictal: a[2],
            postictal: a[3],
        }
    }

    pub fn as_array(&self) -> [Option<f64>; 4] {
        [self.interictal, self.preictal, self.ictal, self.postictal]
    }
}

/// Per-second anomaly flags for one track plus its seizure intervals.
#[derive(Clone, Debug)]
pub struct TrackPredictions {
    pub track_id: String,
    pub flags: Vec<bool>,
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackPhaseReport {
    pub track_id: String,
    pub seconds: usize,
    pub seizure_count: usize,
    /// Indexed by `Phase::to_byte`: interictal, preictal, ictal, postictal.
    pub phase_seconds: [usize; 4],
    pub flagged_seconds: [usize; 4],
    pub rates: PhaseRates,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseRateReport {
    pub horizons: Horizons,
    pub tracks: Vec<TrackPhaseReport>,
    /// Mean of per-track rates across tracks containing at least one
    /// seizure; tracks lacking a phase entirely drop out of that
    /// phase's average.
    pub mean: PhaseRates,
    /// Population standard deviation over the same tracks.
    pub std: PhaseRates,
}

pub fn phase_rates(tracks: &[TrackPredictions], horizons: &Horizons) -> Result<PhaseRateReport> {
    if tracks.is_empty() {
        return Err(Error::Config("phase_rates: no tracks".into()));
    }
    let mut reports = Vec::with_capacity(tracks.len());
    for t in tracks {
        let tags = tag_phases(t.flags.len(), &t.intervals, horizons)?;
        let mut phase_seconds = [0usize; 4];
        let mut flagged_seconds = [0usize; 4];
        for (tag, &f) in tags.iter().zip(&t.flags) {
            let i = tag.to_byte() as usize;
            phase_seconds[i] += 1;
            if f {
                flagged_seconds[i] += 1;
            }
        }
        let mut rates = [None; 4];
        for i in 0..4 {
            if phase_seconds[i] > 0 {
                rates[i] = Some(100.0 * flagged_seconds[i] as f64 / phase_seconds[i] as f64);
            }
        }
        reports.push(TrackPhaseReport {
            track_id: t.track_id.clone(),
            seconds: t.flags.len(),
            seizure_count: t.intervals.len(),
            phase_seconds,
            flagged_seconds,
            rates: PhaseRates::from_array(rates),
        });
    }
    let mut mean = [None; 4];
    let mut std = [None; 4];
    for i in 0..4 {
        let vals: Vec<f64> = reports
            .iter()
            .filter(|r| r.seizure_count > 0)
            .filter_map(|r| r.rates.as_array()[i])
            .collect();
        if !vals.is_empty() {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            mean[i] = Some(m);
            std[i] = Some(v.sqrt());
        }
    }
    Ok(PhaseRateReport {
        horizons: *horizons,
        tracks: reports,
        mean: PhaseRates::from_array(mean),
        std: PhaseRates::from_array(std),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
}

impl PhaseRateReport {
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "phase rates, %% flagged (preictal horizon {} s, postictal horizon {} s)\n",
            self.horizons.preictal_s, self.horizons.postictal_s
        );
        out.push_str(&format!(
            "{:<16} {:>8} {:>9} {:>10} {:>8} {:>8} {:>9}\n",
            "track", "seconds", "seizures", "interictal", "preictal", "ictal", "postictal"
        ));
        for t in &self.tracks {
            let r = t.rates.as_array();
            out.push_str(&format!(
                "{:<16} {:>8} {:>9} {:>10} {:>8} {:>8} {:>9}\n",
                t.track_id,
                t.seconds,
                t.seizure_count,
                cell(r[0]),
                cell(r[1]),
                cell(r[2]),
                cell(r[3])
            ));
        }
        let seizure_tracks = self.tracks.iter().filter(|t| t.seizure_count > 0).count();
        out.push_str(&format!(
            "mean +/- std across {seizure_tracks} seizure track(s):\n"
        ));
        for (i, name) in ["interictal", "preictal", "ictal", "postictal"]
            .iter()
            .enumerate()
        {
            out.push_str(&format!(
                "  {:<10} {} +/- {}\n",
                name,
                cell(self.mean.as_array()[i]),
                cell(self.std.as_array()[i])
            ));
        }
        out
    }
}

/// Per-second trace (`second,mse,prediction,phase`) for external plots.
pub fn score_trace_csv(scores: &[f64], predictions: &[Label], phases: &[Phase]) -> Result<String> {
    if scores.len() != predictions.len() || scores.len() != phases.len() {
        return Err(Error::Config(format!(
            "score_trace_csv: {} scores, {} predictions, {} phases",
            scores.len(),
            predictions.len(),
            phases.len()
        )));
    }
    let mut out = String::from("second,mse,prediction,phase\n");
    for (i, ((&s, &p), &ph)) in scores.iter().zip(predictions).zip(phases).enumerate() {
        out.push_str(&format!("{i},{s},{},{}\n", p.to_byte(), ph.name()));
    }
    Ok(out)
}
