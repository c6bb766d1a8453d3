//! Per-frame classification: feature extraction, SVM prediction, the
//! Action-override rule, optional majority-vote smoothing, and latency
//! accounting, plus the line format the results travel in.

use std::fs;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::features::{compute_measures, evaluate_classifiers, ClassifierThresholds, FeatureError};
use crate::skeleton::SkeletonStream;
use crate::state::{EngagementState, StateMode};
use crate::svm::MulticlassModel;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(
        "model was trained against other thresholds (model fingerprint {model:016x}, \
         configured {configured:016x})"
    )]
    FingerprintMismatch { model: u64, configured: u64 },
    #[error("model predicts state {state} which {mode} mode does not allow")]
    ModeMismatch { state: EngagementState, mode: StateMode },
    #[error("smoothing window must be odd, got {got}")]
    EvenSmoothingWindow { got: usize },
    #[error("results file line {line}: {reason}")]
    ResultsFormat { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a stream is classified.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: StateMode,
    /// Odd majority-vote window over final states; 1 disables smoothing.
    pub smoothing_window: usize,
    pub thresholds: ClassifierThresholds,
    /// Applies the Intention-to-Act + moving-hand => Action rule.
    pub action_override_enabled: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: StateMode::ThreeState,
            smoothing_window: 1,
            thresholds: ClassifierThresholds::default(),
            action_override_enabled: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.smoothing_window % 2 == 0 || self.smoothing_window == 0 {
            return Err(PipelineError::EvenSmoothingWindow {
                got: self.smoothing_window,
            });
        }
        self.thresholds.validate()?;
        Ok(())
    }
}

/// Classification outcome for one feature-bearing frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub timestamp: f64,
    pub participant_id: String,
    /// State straight out of the SVM argmax.
    pub raw_state: EngagementState,
    /// State after the Action override and smoothing.
    pub final_state: EngagementState,
    /// Windowed hand speed the override decided on.
    pub hand_speed_m_s: f64,
    /// Wall-clock time to extract features, predict, and apply the
    /// override for this frame.
    pub latency_us: u64,
}

/// Promotes Intention to Act to Action when a hand is moving faster than
/// the noise floor `eps_m_s`; every other state passes through.
pub fn apply_action_override(
    raw_state: EngagementState,
    hand_speed_m_s: f64,
    eps_m_s: f64,
) -> EngagementState {
    debug_assert!(eps_m_s > 0.0, "override noise floor must be positive");
    if raw_state == EngagementState::IntentionToAct && hand_speed_m_s > eps_m_s {
        EngagementState::Action
    } else {
        raw_state
    }
}

/// Centered majority vote with the window clamped at both ends. Vote ties
/// resolve to the input value at that index; `window == 1` is the
/// identity.
pub fn smooth_states(
    sequence: &[EngagementState],
    window: usize,
) -> Result<Vec<EngagementState>, PipelineError> {
    if window % 2 == 0 || window == 0 {
        return Err(PipelineError::EvenSmoothingWindow { got: window });
    }
    if window == 1 {
        return Ok(sequence.to_vec());
    }
    let half = window / 2;
    let n = sequence.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n.saturating_sub(1));
        let mut counts = [0usize; 6];
        for state in &sequence[lo..=hi] {
            counts[(state.value() - 1) as usize] += 1;
        }
        let top = *counts.iter().max().expect("six fixed buckets");
        let winners: Vec<usize> = (0..6).filter(|&k| counts[k] == top).collect();
        let vote = if winners.len() == 1 {
            EngagementState::from_value(winners[0] as u8 + 1).expect("bucket index in range")
        } else {
            sequence[i]
        };
        out.push(vote);
    }
    Ok(out)
}

/// Classifies every feature-bearing frame of `stream`: one result per
/// frame from index `window_frames - 1` on, ordered by timestamp.
///
/// `latency_us` covers feature extraction, prediction, and the override
/// for that frame. Smoothing (if enabled) runs afterwards over the final
/// states and is not part of the per-frame latency.
pub fn process_stream(
    stream: &SkeletonStream,
    model: &MulticlassModel,
    config: &PipelineConfig,
) -> Result<Vec<FrameResult>, PipelineError> {
    config.validate()?;
    let configured = config.thresholds.fingerprint();
    if model.thresholds_fingerprint != configured {
        return Err(PipelineError::FingerprintMismatch {
            model: model.thresholds_fingerprint,
            configured,
        });
    }
    for &label in &model.class_labels {
        if !config.mode.contains(label) {
            return Err(PipelineError::ModeMismatch {
                state: label,
                mode: config.mode,
            });
        }
    }

    let w = config.thresholds.window_frames;
    if stream.frames.len() < w {
        return Err(FeatureError::StreamTooShort {
            needed: w,
            got: stream.frames.len(),
        }
        .into());
    }

    let mut results = Vec::with_capacity(stream.frames.len() - w + 1);
    for window in stream.frames.windows(w) {
        let started = Instant::now();
        let measures = compute_measures(window, &config.thresholds)?;
        let features = evaluate_classifiers(&measures, &config.thresholds);
        let (raw_state, _) = model.predict(&features);
        let final_state = if config.action_override_enabled {
            apply_action_override(
                raw_state,
                measures.max_hand_speed_m_s,
                config.thresholds.hand_speed_eps_m_s,
            )
        } else {
            raw_state
        };
        let latency_us = started.elapsed().as_micros() as u64;
        debug_assert!(config.mode.contains(final_state));
        results.push(FrameResult {
            timestamp: window[w - 1].timestamp,
            participant_id: stream.participant_id.clone(),
            raw_state,
            final_state,
            hand_speed_m_s: measures.max_hand_speed_m_s,
            latency_us,
        });
    }

    if config.smoothing_window > 1 {
        let finals: Vec<EngagementState> = results.iter().map(|r| r.final_state).collect();
        for (result, smoothed) in results
            .iter_mut()
            .zip(smooth_states(&finals, config.smoothing_window)?)
        {
            result.final_state = smoothed;
        }
    }
    Ok(results)
}

pub const RESULTS_MAGIC: &str = "engage-results";
pub const RESULTS_VERSION: u32 = 1;

/// Renders results in the line format
/// `timestamp participant raw final hand_speed latency_us` under a
/// `engage-results 1` header.
pub fn results_to_string(results: &[FrameResult]) -> String {
    let mut out = format!("{RESULTS_MAGIC} {RESULTS_VERSION}\n");
    for r in results {
        out.push_str(&format!(
            "{} {} {} {} {} {}\n",
            r.timestamp,
            r.participant_id,
            r.raw_state.value(),
            r.final_state.value(),
            r.hand_speed_m_s,
            r.latency_us
        ));
    }
    out
}

pub fn parse_results(text: &str) -> Result<Vec<FrameResult>, PipelineError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(PipelineError::ResultsFormat {
        line: 1,
        reason: "empty file".into(),
    })?;
    if header != format!("{RESULTS_MAGIC} {RESULTS_VERSION}") {
        return Err(PipelineError::ResultsFormat {
            line: 1,
            reason: format!("unrecognized header {header:?}"),
        });
    }
    let mut results = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.len() != 6 {
            return Err(PipelineError::ResultsFormat {
                line,
                reason: format!("expected 6 fields, got {}", tokens.len()),
            });
        }
        let parse_f64 = |t: &str, what: &str| -> Result<f64, PipelineError> {
            t.parse().map_err(|_| PipelineError::ResultsFormat {
                line,
                reason: format!("cannot parse {what} from {t:?}"),
            })
        };
        let parse_state = |t: &str| -> Result<EngagementState, PipelineError> {
            t.parse::<u8>()
                .ok()
                .and_then(EngagementState::from_value)
                .ok_or_else(|| PipelineError::ResultsFormat {
                    line,
                    reason: format!("state {t:?} outside 1..=6"),
                })
        };
        results.push(FrameResult {
            timestamp: parse_f64(tokens[0], "timestamp")?,
            participant_id: tokens[1].to_string(),
            raw_state: parse_state(tokens[2])?,
            final_state: parse_state(tokens[3])?,
            hand_speed_m_s: parse_f64(tokens[4], "hand speed")?,
            latency_us: tokens[5].parse().map_err(|_| PipelineError::ResultsFormat {
                line,
                reason: format!("cannot parse latency from {:?}", tokens[5]),
            })?,
        });
    }
    Ok(results)
}

pub fn write_results_file(results: &[FrameResult], path: &Path) -> Result<(), PipelineError> {
    fs::write(path, results_to_string(results))?;
    Ok(())
}

pub fn read_results_file(path: &Path) -> Result<Vec<FrameResult>, PipelineError> {
    parse_results(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::feature_sequence;
    use crate::skeleton::{Joint, JointName, SkeletonFrame};
    use crate::svm::{train_multiclass, TrainParams};
    use EngagementState::*;

    #[test]
    fn override_rule_matches_the_stated_table() {
        let eps = 0.05;
        assert_eq!(apply_action_override(IntentionToAct, 0.2, eps), Action);
        assert_eq!(apply_action_override(IntentionToAct, 0.0, eps), IntentionToAct);
        assert_eq!(apply_action_override(Disengagement, 0.9, eps), Disengagement);
        // Exactly at the floor does not trigger: the rule is strict.
        assert_eq!(apply_action_override(IntentionToAct, eps, eps), IntentionToAct);
        for state in EngagementState::ALL {
            if state != IntentionToAct {
                assert_eq!(apply_action_override(state, 1.0, eps), state);
            }
        }
    }

    #[test]
    fn override_is_idempotent() {
        for state in EngagementState::ALL {
            for speed in [0.0, 0.04, 0.05, 0.06, 1.0] {
                let once = apply_action_override(state, speed, 0.05);
                assert_eq!(apply_action_override(once, speed, 0.05), once);
            }
        }
    }

    #[test]
    fn smoothing_window_one_is_identity() {
        let seq = vec![Disengagement, IntentionToAct, Action, Disengagement];
        assert_eq!(smooth_states(&seq, 1).unwrap(), seq);
    }

    #[test]
    fn smoothing_removes_a_single_frame_flicker() {
        let seq = vec![
            Disengagement,
            Disengagement,
            IntentionToAct,
            Disengagement,
            Disengagement,
        ];
        assert_eq!(smooth_states(&seq, 3).unwrap(), vec![Disengagement; 5]);
    }

    #[test]
    fn smoothing_keeps_constant_sequences_and_rejects_even_windows() {
        let seq = vec![Action; 7];
        for window in [1, 3, 5, 9] {
            assert_eq!(smooth_states(&seq, window).unwrap(), seq);
        }
        assert!(matches!(
            smooth_states(&seq, 4),
            Err(PipelineError::EvenSmoothingWindow { got: 4 })
        ));
    }

    #[test]
    fn smoothing_ties_keep_the_input_value() {
        // At index 1 the clamped window [1,4] splits 1:1; the input wins.
        let seq = vec![Disengagement, IntentionToAct];
        assert_eq!(smooth_states(&seq, 3).unwrap(), seq);
    }

    fn pose_frame(
        timestamp: f64,
        lean_deg: f64,
        hand_forward_m: f64,
    ) -> SkeletonFrame {
        let theta = lean_deg.to_radians();
        let torso = [0.0, 0.75, 2.5];
        let joints = JointName::ALL
            .iter()
            .map(|&name| {
                let p = match name {
                    JointName::Head => [
                        torso[0],
                        torso[1] + 0.55 * theta.cos(),
                        torso[2] - 0.55 * theta.sin(),
                    ],
                    JointName::ShoulderLeft => [-0.20, 1.05, 2.5],
                    JointName::ShoulderRight => [0.20, 1.05, 2.5],
                    JointName::ElbowLeft => [-0.28, 0.82, 2.47],
                    JointName::ElbowRight => [0.28, 0.82, 2.47],
                    JointName::HandLeft => [-0.24, 0.42, 2.40],
                    JointName::HandRight => [0.24, 0.42, 2.40 - hand_forward_m],
                    JointName::Torso => torso,
                    JointName::HipLeft => [-0.13, 0.50, 2.5],
                    JointName::HipRight => [0.13, 0.50, 2.5],
                };
                Joint::new(name, p)
            })
            .collect();
        SkeletonFrame::new("p1", timestamp, joints)
    }

    /// Backward-lean idle stream: classifier bits of a disengaged sitter.
    fn idle_stream(frames: usize) -> SkeletonStream {
        let mut stream = SkeletonStream::new("p1", 30.0);
        for k in 0..frames {
            stream.frames.push(pose_frame(k as f64 / 30.0, -12.0, 0.0));
        }
        stream
    }

    /// Forward-lean stream with the right hand advancing at a constant
    /// 0.3 m/s: the shape the trained model should call Intention to Act.
    fn reaching_stream(frames: usize) -> SkeletonStream {
        let mut stream = SkeletonStream::new("p1", 30.0);
        for k in 0..frames {
            let t = k as f64 / 30.0;
            stream.frames.push(pose_frame(t, 12.0, 0.3 * t));
        }
        stream
    }

    fn trained_model(config: &PipelineConfig) -> MulticlassModel {
        let mut dataset = Vec::new();
        for frame in feature_sequence(&idle_stream(60), &config.thresholds).unwrap() {
            dataset.push((frame.features, Disengagement));
        }
        for frame in feature_sequence(&reaching_stream(60), &config.thresholds).unwrap() {
            dataset.push((frame.features, IntentionToAct));
        }
        train_multiclass(
            &dataset,
            &TrainParams::default(),
            config.thresholds.fingerprint(),
        )
        .unwrap()
    }

    #[test]
    fn thirty_seconds_at_thirty_fps_yield_891_results() {
        let config = PipelineConfig::default();
        let model = trained_model(&config);
        let results = process_stream(&idle_stream(900), &model, &config).unwrap();
        assert_eq!(results.len(), 891);
        assert!(results.windows(2).all(|p| p[0].timestamp < p[1].timestamp));
        assert!(results.iter().all(|r| r.final_state == Disengagement));
        assert!(results.iter().all(|r| r.hand_speed_m_s == 0.0));
    }

    #[test]
    fn moving_hand_promotes_intention_to_action() {
        let config = PipelineConfig::default();
        let model = trained_model(&config);
        let results = process_stream(&reaching_stream(90), &model, &config).unwrap();
        assert!(!results.is_empty());
        for r in &results {
            assert_eq!(r.raw_state, IntentionToAct);
            assert_eq!(r.final_state, Action);
            assert!(r.hand_speed_m_s > 0.05);
        }

        let frozen = PipelineConfig {
            action_override_enabled: false,
            ..PipelineConfig::default()
        };
        let results = process_stream(&reaching_stream(90), &model, &frozen).unwrap();
        assert!(results.iter().all(|r| r.final_state == IntentionToAct));
    }

    #[test]
    fn results_depend_only_on_frames_up_to_their_timestamp() {
        let config = PipelineConfig::default();
        let model = trained_model(&config);
        let full = process_stream(&reaching_stream(60), &model, &config).unwrap();
        let mut prefix_stream = reaching_stream(60);
        prefix_stream.frames.truncate(40);
        let prefix = process_stream(&prefix_stream, &model, &config).unwrap();
        for (a, b) in prefix.iter().zip(&full) {
            assert_eq!(a.timestamp, b.timestamp);
            assert_eq!(a.raw_state, b.raw_state);
            assert_eq!(a.final_state, b.final_state);
            assert_eq!(a.hand_speed_m_s, b.hand_speed_m_s);
        }
    }

    #[test]
    fn fingerprint_and_mode_guards_fire() {
        let config = PipelineConfig::default();
        let model = trained_model(&config);

        let mut drifted = config.clone();
        drifted.thresholds.lean_fwd_deg = 9.0;
        assert!(matches!(
            process_stream(&idle_stream(30), &model, &drifted),
            Err(PipelineError::FingerprintMismatch { .. })
        ));

        let mut foreign = model.clone();
        foreign.class_labels[1] = RelaxedEngagement;
        assert!(matches!(
            process_stream(&idle_stream(30), &foreign, &config),
            Err(PipelineError::ModeMismatch { state: RelaxedEngagement, .. })
        ));

        assert!(matches!(
            process_stream(&idle_stream(5), &model, &config),
            Err(PipelineError::Feature(FeatureError::StreamTooShort { .. }))
        ));
    }

    #[test]
    fn results_file_round_trips() {
        let config = PipelineConfig::default();
        let model = trained_model(&config);
        let results = process_stream(&reaching_stream(40), &model, &config).unwrap();
        let text = results_to_string(&results);
        assert_eq!(parse_results(&text).unwrap(), results);

        assert!(parse_results("engage-results 9\n").is_err());
        assert!(parse_results("engage-results 1\n1.0 p1 9 1 0 0\n").is_err());
    }
}
