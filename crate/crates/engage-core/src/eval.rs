//! Accuracy and latency evaluation against a generated corpus, plus the
//! latency benchmark used by the real-time budget gate.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::features::{compute_measures, evaluate_classifiers, FeatureError};
use crate::pipeline::{apply_action_override, process_stream, PipelineConfig, PipelineError};
use crate::simulator::{manifest_stream_path, SimError, SplitManifest};
use crate::skeleton::SkeletonStream;
use crate::state::EngagementState;
use crate::stream_io::{read_stream_file, StreamError};
use crate::svm::MulticlassModel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Manifest(#[from] SimError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("stream {0} carries no label track, so it cannot be scored")]
    MissingLabels(String),
    #[error("manifest window ({manifest} frames) disagrees with the configured window ({thresholds} frames)")]
    WindowMismatch { manifest: usize, thresholds: usize },
    #[error("manifest contains no test frames")]
    NoTestFrames,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How truth and prediction are compared.
///
/// `ThreeClass` scores disengagement, intention to act and action
/// separately; the action label is derived by running the same hand-speed
/// override on the annotated state that the pipeline runs on predictions.
/// `CollapsedIntentionAction` folds action into intention to act, scoring
/// only the posture decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringMode {
    ThreeClass,
    CollapsedIntentionAction,
}

impl ScoringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::ThreeClass => "three_class",
            ScoringMode::CollapsedIntentionAction => "collapsed_intention_action",
        }
    }
}

/// Square confusion matrix; rows are truth, columns predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub states: Vec<EngagementState>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(states: Vec<EngagementState>) -> Self {
        let n = states.len();
        ConfusionMatrix {
            states,
            counts: vec![vec![0; n]; n],
        }
    }

    fn index_of(&self, state: EngagementState) -> usize {
        self.states
            .iter()
            .position(|s| *s == state)
            .unwrap_or_else(|| panic!("state {state:?} is outside this matrix"))
    }

    pub fn record(&mut self, truth: EngagementState, predicted: EngagementState) {
        let t = self.index_of(truth);
        let p = self.index_of(predicted);
        self.counts[t][p] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.states.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.trace() as f64 / total as f64
    }

    /// Column precision; `None` when the class was never predicted.
    pub fn precision(&self, class: usize) -> Option<f64> {
        let predicted: usize = self.counts.iter().map(|row| row[class]).sum();
        (predicted > 0).then(|| self.counts[class][class] as f64 / predicted as f64)
    }

    /// Row recall; `None` when the class never occurs in the truth.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let actual: usize = self.counts[class].iter().sum();
        (actual > 0).then(|| self.counts[class][class] as f64 / actual as f64)
    }
}

/// Microsecond latency distribution, nearest-rank percentiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencySummary {
    pub mean_us: f64,
    pub p50_us: u64,
    pub p99_us: u64,
    pub max_us: u64,
}

/// Summarizes raw microsecond samples; `None` when empty.
pub fn latency_summary(samples: &[u64]) -> Option<LatencySummary> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let rank = |q: f64| -> u64 {
        let k = ((q * n as f64).ceil() as usize).clamp(1, n);
        sorted[k - 1]
    };
    Some(LatencySummary {
        mean_us: sorted.iter().sum::<u64>() as f64 / n as f64,
        p50_us: rank(0.50),
        p99_us: rank(0.99),
        max_us: sorted[n - 1],
    })
}

/// Scored outcome under one [`ScoringMode`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub scoring: ScoringMode,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

/// Everything `evaluate` measures over the manifest's test split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSummary {
    pub test_frames: usize,
    pub three_class: EvaluationReport,
    pub collapsed: EvaluationReport,
    pub latency: LatencySummary,
}

fn collapse(state: EngagementState) -> EngagementState {
    if state == EngagementState::Action {
        EngagementState::IntentionToAct
    } else {
        state
    }
}

/// Scores the manifest's test frames with `model` under `config`.
///
/// Each test frame is classified from its own trailing window, truth
/// comes from the stream's label track (with the action override applied
/// to the annotated state at the frame's measured hand speed), and the
/// per-frame classification time feeds the latency summary.
pub fn evaluate_manifest(
    manifest: &SplitManifest,
    manifest_dir: &Path,
    model: &MulticlassModel,
    config: &PipelineConfig,
) -> Result<EvaluationSummary, EvalError> {
    config.validate()?;
    let thresholds = &config.thresholds;
    if model.thresholds_fingerprint != thresholds.fingerprint() {
        return Err(PipelineError::FingerprintMismatch {
            model: model.thresholds_fingerprint,
            configured: thresholds.fingerprint(),
        }
        .into());
    }
    if manifest.window_frames != thresholds.window_frames {
        return Err(EvalError::WindowMismatch {
            manifest: manifest.window_frames,
            thresholds: thresholds.window_frames,
        });
    }
    if manifest.test.is_empty() {
        return Err(EvalError::NoTestFrames);
    }

    let mut by_stream: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for entry in &manifest.test {
        by_stream.entry(&entry.stream).or_default().push(entry.frame);
    }

    let mut three = ConfusionMatrix::new(vec![
        EngagementState::Disengagement,
        EngagementState::IntentionToAct,
        EngagementState::Action,
    ]);
    let mut collapsed = ConfusionMatrix::new(vec![
        EngagementState::Disengagement,
        EngagementState::IntentionToAct,
    ]);
    let mut latencies = Vec::with_capacity(manifest.test.len());

    let window = thresholds.window_frames;
    let eps = thresholds.hand_speed_eps_m_s;
    for (id, frames) in by_stream {
        let meta = manifest
            .streams
            .iter()
            .find(|s| s.id == id)
            .expect("manifest entries were validated against the stream table");
        let stream: SkeletonStream =
            read_stream_file(&manifest_stream_path(manifest_dir, meta))?.stream;
        let labels = stream
            .labels
            .as_ref()
            .ok_or_else(|| EvalError::MissingLabels(id.to_string()))?;
        for frame in frames {
            let started = Instant::now();
            let measures =
                compute_measures(&stream.frames[frame + 1 - window..=frame], thresholds)?;
            let features = evaluate_classifiers(&measures, thresholds);
            let (raw, _) = model.predict(&features);
            let predicted = if config.action_override_enabled {
                apply_action_override(raw, measures.max_hand_speed_m_s, eps)
            } else {
                raw
            };
            latencies.push(started.elapsed().as_micros() as u64);

            let annotated = labels.values[frame];
            let truth = apply_action_override(annotated, measures.max_hand_speed_m_s, eps);
            three.record(truth, predicted);
            collapsed.record(collapse(truth), collapse(predicted));
        }
    }

    let latency = latency_summary(&latencies).expect("test split checked non-empty");
    Ok(EvaluationSummary {
        test_frames: latencies.len(),
        three_class: EvaluationReport {
            scoring: ScoringMode::ThreeClass,
            accuracy: three.accuracy(),
            confusion: three,
        },
        collapsed: EvaluationReport {
            scoring: ScoringMode::CollapsedIntentionAction,
            accuracy: collapsed.accuracy(),
            confusion: collapsed,
        },
        latency,
    })
}

/// Latency benchmark: replays `stream` through [`process_stream`]
/// `repetitions` times and pools every per-frame latency.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub frames_per_pass: usize,
    pub repetitions: usize,
    pub latency: LatencySummary,
}

pub fn bench_stream(
    stream: &SkeletonStream,
    model: &MulticlassModel,
    config: &PipelineConfig,
    repetitions: usize,
) -> Result<BenchReport, EvalError> {
    let mut samples = Vec::new();
    let mut frames_per_pass = 0;
    for _ in 0..repetitions.max(1) {
        let results = process_stream(stream, model, config)?;
        frames_per_pass = results.len();
        samples.extend(results.iter().map(|r| r.latency_us));
    }
    let latency = latency_summary(&samples).ok_or(EvalError::NoTestFrames)?;
    Ok(BenchReport {
        frames_per_pass,
        repetitions: repetitions.max(1),
        latency,
    })
}

#[derive(Serialize)]
struct ClassRow {
    state: u8,
    precision: Option<f64>,
    recall: Option<f64>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    scoring: &'static str,
    states: Vec<u8>,
    confusion: &'a Vec<Vec<usize>>,
    accuracy: f64,
    per_class: Vec<ClassRow>,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    version: u32,
    test_frames: usize,
    three_class: ReportJson<'a>,
    collapsed: ReportJson<'a>,
    latency: &'a LatencySummary,
}

fn report_json(report: &EvaluationReport) -> ReportJson<'_> {
    ReportJson {
        scoring: report.scoring.as_str(),
        states: report.confusion.states.iter().map(|s| s.value()).collect(),
        confusion: &report.confusion.counts,
        accuracy: report.accuracy,
        per_class: (0..report.confusion.states.len())
            .map(|i| ClassRow {
                state: report.confusion.states[i].value(),
                precision: report.confusion.precision(i),
                recall: report.confusion.recall(i),
            })
            .collect(),
    }
}

/// Pretty-printed JSON rendering of the summary.
pub fn summary_to_json(summary: &EvaluationSummary) -> String {
    let doc = SummaryJson {
        version: 1,
        test_frames: summary.test_frames,
        three_class: report_json(&summary.three_class),
        collapsed: report_json(&summary.collapsed),
        latency: &summary.latency,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("report serialization is infallible");
    text.push('\n');
    text
}

/// Plain-text rendering of the summary. Latency lines carry a `latency`
/// prefix so tooling that compares reports across runs can filter them.
pub fn summary_to_text(summary: &EvaluationSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("test frames: {}\n", summary.test_frames));
    for report in [&summary.three_class, &summary.collapsed] {
        out.push('\n');
        out.push_str(&format!("scoring: {}\n", report.scoring.as_str()));
        out.push_str(&format!("accuracy: {:.4}\n", report.accuracy));
        let m = &report.confusion;
        out.push_str("truth\\pred");
        for s in &m.states {
            out.push_str(&format!("{:>8}", s.value()));
        }
        out.push('\n');
        for (i, s) in m.states.iter().enumerate() {
            out.push_str(&format!("{:<10}", s.value()));
            for c in &m.counts[i] {
                out.push_str(&format!("{c:>8}"));
            }
            out.push('\n');
        }
        for (i, s) in m.states.iter().enumerate() {
            let fmt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.4}"),
                None => "n/a".to_string(),
            };
            out.push_str(&format!(
                "class {}: precision {} recall {}\n",
                s.value(),
                fmt(m.precision(i)),
                fmt(m.recall(i)),
            ));
        }
    }
    out.push('\n');
    out.push_str(&format!("latency mean_us: {:.2}\n", summary.latency.mean_us));
    out.push_str(&format!("latency p50_us: {}\n", summary.latency.p50_us));
    out.push_str(&format!("latency p99_us: {}\n", summary.latency.p99_us));
    out.push_str(&format!("latency max_us: {}\n", summary.latency.max_us));
    out
}
