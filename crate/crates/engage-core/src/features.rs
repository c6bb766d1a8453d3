//! Classifier bank: windowed kinematic measures and the 16 binary
//! posture/motion classifiers grouped under 5 indicators.
//!
//! Every classifier is a threshold predicate over one measure. Angles are
//! taken from the torso-to-head vector (lean) and the shoulder line (yaw);
//! speeds are per-step displacements averaged over a trailing window, so
//! the bank is causal and translation-invariant.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::skeleton::{JointName, SkeletonFrame};

/// Errors from measure computation and threshold configuration.
#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window needs at least 2 frames, got {got}")]
    WindowTooShort { got: usize },
    #[error("window spans no time (equal or decreasing timestamps)")]
    ZeroTimeSpan,
    #[error("stream has {got} frames but the window needs {needed}")]
    StreamTooShort { needed: usize, got: usize },
    #[error("frame at {timestamp}s is incomplete: missing {joint}")]
    IncompleteFrame { timestamp: f64, joint: JointName },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("threshold config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cutoffs for all 16 classifiers plus the velocity window length.
///
/// The defaults target a seated participant observed at 30 fps; every
/// value can be overridden from a key-value config file whose keys are
/// exactly these field names.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierThresholds {
    /// Sagittal lean above this is a forward lean (degrees).
    pub lean_fwd_deg: f64,
    /// Sagittal lean below this is a backward lean (degrees, negative).
    pub lean_back_deg: f64,
    /// |lateral lean| above this sets the sideways flag (degrees).
    pub lateral_deg: f64,
    /// Sagittal lean rate above this marks a leaning-forward process (deg/s).
    pub lean_rate_deg_s: f64,
    /// Hand speeds below this count as zero (m/s); also the action
    /// override's noise floor.
    pub hand_speed_eps_m_s: f64,
    /// Hand speeds above this are fast (m/s).
    pub hand_speed_high_m_s: f64,
    /// |torso yaw| below this faces the screen (degrees).
    pub yaw_facing_deg: f64,
    /// |torso yaw| above this is turned away (degrees).
    pub yaw_away_deg: f64,
    /// Mean joint speed below this is still (m/s).
    pub motion_still_m_s: f64,
    /// Mean joint speed above this is agitated (m/s).
    pub motion_agitated_m_s: f64,
    /// Trailing window length in frames for rates and speeds.
    pub window_frames: usize,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        ClassifierThresholds {
            lean_fwd_deg: 8.0,
            lean_back_deg: -8.0,
            lateral_deg: 10.0,
            lean_rate_deg_s: 15.0,
            hand_speed_eps_m_s: 0.05,
            hand_speed_high_m_s: 0.5,
            yaw_facing_deg: 15.0,
            yaw_away_deg: 30.0,
            motion_still_m_s: 0.02,
            motion_agitated_m_s: 0.3,
            window_frames: 10,
        }
    }
}

impl ClassifierThresholds {
    const KEYS: [&'static str; 11] = [
        "lean_fwd_deg",
        "lean_back_deg",
        "lateral_deg",
        "lean_rate_deg_s",
        "hand_speed_eps_m_s",
        "hand_speed_high_m_s",
        "yaw_facing_deg",
        "yaw_away_deg",
        "motion_still_m_s",
        "motion_agitated_m_s",
        "window_frames",
    ];

    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |msg: String| Err(FeatureError::InvalidThresholds(msg));
        if !(self.lean_back_deg < 0.0 && 0.0 < self.lean_fwd_deg) {
            return bad(format!(
                "lean_back_deg ({}) must be < 0 < lean_fwd_deg ({})",
                self.lean_back_deg, self.lean_fwd_deg
            ));
        }
        if !(self.yaw_facing_deg < self.yaw_away_deg) {
            return bad(format!(
                "yaw_facing_deg ({}) must be < yaw_away_deg ({})",
                self.yaw_facing_deg, self.yaw_away_deg
            ));
        }
        if !(self.motion_still_m_s < self.motion_agitated_m_s) {
            return bad(format!(
                "motion_still_m_s ({}) must be < motion_agitated_m_s ({})",
                self.motion_still_m_s, self.motion_agitated_m_s
            ));
        }
        if !(self.hand_speed_eps_m_s < self.hand_speed_high_m_s) {
            return bad(format!(
                "hand_speed_eps_m_s ({}) must be < hand_speed_high_m_s ({})",
                self.hand_speed_eps_m_s, self.hand_speed_high_m_s
            ));
        }
        if self.window_frames < 2 {
            return bad(format!("window_frames ({}) must be >= 2", self.window_frames));
        }
        let floats = [
            self.lean_fwd_deg,
            self.lean_back_deg,
            self.lateral_deg,
            self.lean_rate_deg_s,
            self.hand_speed_eps_m_s,
            self.hand_speed_high_m_s,
            self.yaw_facing_deg,
            self.yaw_away_deg,
            self.motion_still_m_s,
            self.motion_agitated_m_s,
        ];
        if floats.iter().any(|v| !v.is_finite()) {
            return bad("all thresholds must be finite".into());
        }
        Ok(())
    }

    /// Stable 64-bit fingerprint of every threshold, stored inside trained
    /// models so feature/model drift is caught at load time.
    ///
    /// FNV-1a over the raw bit patterns in field order; frozen for
    /// model format version 1.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf29ce484222325;
        const PRIME: u64 = 0x100000001b3;
        let mut hash = OFFSET;
        let mut eat = |bytes: [u8; 8]| {
            for b in bytes {
                hash ^= b as u64;
                hash = hash.wrapping_mul(PRIME);
            }
        };
        for v in [
            self.lean_fwd_deg,
            self.lean_back_deg,
            self.lateral_deg,
            self.lean_rate_deg_s,
            self.hand_speed_eps_m_s,
            self.hand_speed_high_m_s,
            self.yaw_facing_deg,
            self.yaw_away_deg,
            self.motion_still_m_s,
            self.motion_agitated_m_s,
        ] {
            eat(v.to_bits().to_le_bytes());
        }
        eat((self.window_frames as u64).to_le_bytes());
        hash
    }

    /// Applies `key = value` overrides from config text. Lines starting
    /// with `#` and blank lines are skipped; unknown keys are errors.
    pub fn apply_config_str(&mut self, text: &str) -> Result<(), FeatureError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| FeatureError::Config {
                line,
                reason: format!("expected key = value, got {trimmed:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|reason| {
                FeatureError::Config { line, reason }
            })?;
        }
        self.validate()
    }

    /// Sets a single field by its config key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| format!("value {v:?} for {key} is not a number"))
        };
        match key {
            "lean_fwd_deg" => self.lean_fwd_deg = parse_f64(value)?,
            "lean_back_deg" => self.lean_back_deg = parse_f64(value)?,
            "lateral_deg" => self.lateral_deg = parse_f64(value)?,
            "lean_rate_deg_s" => self.lean_rate_deg_s = parse_f64(value)?,
            "hand_speed_eps_m_s" => self.hand_speed_eps_m_s = parse_f64(value)?,
            "hand_speed_high_m_s" => self.hand_speed_high_m_s = parse_f64(value)?,
            "yaw_facing_deg" => self.yaw_facing_deg = parse_f64(value)?,
            "yaw_away_deg" => self.yaw_away_deg = parse_f64(value)?,
            "motion_still_m_s" => self.motion_still_m_s = parse_f64(value)?,
            "motion_agitated_m_s" => self.motion_agitated_m_s = parse_f64(value)?,
            "window_frames" => {
                self.window_frames = value
                    .parse()
                    .map_err(|_| format!("value {value:?} for window_frames is not an integer"))?
            }
            other => {
                return Err(format!(
                    "unknown threshold key {other:?} (known: {})",
                    Self::KEYS.join(", ")
                ))
            }
        }
        Ok(())
    }

    /// Loads thresholds from a config file, starting from the defaults.
    pub fn load(path: &Path) -> Result<ClassifierThresholds, FeatureError> {
        let text = fs::read_to_string(path)?;
        let mut thresholds = ClassifierThresholds::default();
        thresholds.apply_config_str(&text)?;
        Ok(thresholds)
    }

    /// Renders the thresholds in the config file format.
    pub fn to_config_string(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("lean_fwd_deg", self.lean_fwd_deg.to_string());
        map.insert("lean_back_deg", self.lean_back_deg.to_string());
        map.insert("lateral_deg", self.lateral_deg.to_string());
        map.insert("lean_rate_deg_s", self.lean_rate_deg_s.to_string());
        map.insert("hand_speed_eps_m_s", self.hand_speed_eps_m_s.to_string());
        map.insert("hand_speed_high_m_s", self.hand_speed_high_m_s.to_string());
        map.insert("yaw_facing_deg", self.yaw_facing_deg.to_string());
        map.insert("yaw_away_deg", self.yaw_away_deg.to_string());
        map.insert("motion_still_m_s", self.motion_still_m_s.to_string());
        map.insert("motion_agitated_m_s", self.motion_agitated_m_s.to_string());
        map.insert("window_frames", self.window_frames.to_string());
        let mut out = String::new();
        for key in Self::KEYS {
            out.push_str(&format!("{key} = {}\n", map[key]));
        }
        out
    }
}

/// Higher-is-up hand heights, relative to the hip line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandHeights {
    pub left_above_hip_m: f64,
    pub right_above_hip_m: f64,
    pub shoulder_above_hip_m: f64,
}

impl HandHeights {
    pub const ZERO: HandHeights = HandHeights {
        left_above_hip_m: 0.0,
        right_above_hip_m: 0.0,
        shoulder_above_hip_m: 0.0,
    };

    /// Height of the higher hand above the hip line.
    pub fn higher_above_hip_m(&self) -> f64 {
        self.left_above_hip_m.max(self.right_above_hip_m)
    }
}

/// Kinematic measures for one trailing window, evaluated at its last frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMeasures {
    /// Forward(+)/backward(-) tilt of the torso-to-head vector, degrees.
    pub sagittal_lean_deg: f64,
    /// Rightward(+)/leftward(-) tilt of the torso-to-head vector, degrees.
    pub lateral_lean_deg: f64,
    /// Least-squares slope of the sagittal lean over the window, deg/s.
    pub sagittal_lean_rate_deg_s: f64,
    /// Per-hand heights against the hip and shoulder lines, meters.
    pub hand_heights: HandHeights,
    /// Fastest hand's mean per-step speed over the window, m/s.
    pub max_hand_speed_m_s: f64,
    /// Shoulder-line angle off the sensor x-axis, degrees.
    pub torso_yaw_deg: f64,
    /// Mean over all ten joints of the mean per-step speed, m/s.
    pub motion_energy_m_s: f64,
}

impl WindowMeasures {
    /// A motionless, perfectly upright, screen-facing pose.
    pub const NEUTRAL: WindowMeasures = WindowMeasures {
        sagittal_lean_deg: 0.0,
        lateral_lean_deg: 0.0,
        sagittal_lean_rate_deg_s: 0.0,
        hand_heights: HandHeights::ZERO,
        max_hand_speed_m_s: 0.0,
        torso_yaw_deg: 0.0,
        motion_energy_m_s: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        [
            self.sagittal_lean_deg,
            self.lateral_lean_deg,
            self.sagittal_lean_rate_deg_s,
            self.hand_heights.left_above_hip_m,
            self.hand_heights.right_above_hip_m,
            self.hand_heights.shoulder_above_hip_m,
            self.max_hand_speed_m_s,
            self.torso_yaw_deg,
            self.motion_energy_m_s,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Number of binary classifiers in the bank.
pub const FEATURE_COUNT: usize = 16;

/// The 16 classifiers in feature-vector order. The order is frozen: it is
/// the coordinate order the SVM trains on and part of the model format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureBit {
    LeanBackward = 0,
    LeanSideways = 1,
    LeanUpright = 2,
    LeanForwardProcess = 3,
    LeanForward = 4,
    HandRest = 5,
    HandMid = 6,
    HandRaised = 7,
    HandSpeedNearZero = 8,
    HandSpeedModerate = 9,
    HandSpeedHigh = 10,
    FacingScreen = 11,
    TurnedAway = 12,
    MotionStill = 13,
    MotionModerate = 14,
    MotionAgitated = 15,
}

impl FeatureBit {
    pub const ALL: [FeatureBit; FEATURE_COUNT] = [
        FeatureBit::LeanBackward,
        FeatureBit::LeanSideways,
        FeatureBit::LeanUpright,
        FeatureBit::LeanForwardProcess,
        FeatureBit::LeanForward,
        FeatureBit::HandRest,
        FeatureBit::HandMid,
        FeatureBit::HandRaised,
        FeatureBit::HandSpeedNearZero,
        FeatureBit::HandSpeedModerate,
        FeatureBit::HandSpeedHigh,
        FeatureBit::FacingScreen,
        FeatureBit::TurnedAway,
        FeatureBit::MotionStill,
        FeatureBit::MotionModerate,
        FeatureBit::MotionAgitated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureBit::LeanBackward => "lean_backward",
            FeatureBit::LeanSideways => "lean_sideways",
            FeatureBit::LeanUpright => "lean_upright",
            FeatureBit::LeanForwardProcess => "lean_forward_process",
            FeatureBit::LeanForward => "lean_forward",
            FeatureBit::HandRest => "hand_rest",
            FeatureBit::HandMid => "hand_mid",
            FeatureBit::HandRaised => "hand_raised",
            FeatureBit::HandSpeedNearZero => "hand_speed_near_zero",
            FeatureBit::HandSpeedModerate => "hand_speed_moderate",
            FeatureBit::HandSpeedHigh => "hand_speed_high",
            FeatureBit::FacingScreen => "facing_screen",
            FeatureBit::TurnedAway => "turned_away",
            FeatureBit::MotionStill => "motion_still",
            FeatureBit::MotionModerate => "motion_moderate",
            FeatureBit::MotionAgitated => "motion_agitated",
        }
    }
}

impl fmt::Display for FeatureBit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered outputs of the 16 binary classifiers for one frame window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    pub bits: [bool; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn zeros() -> FeatureVector {
        FeatureVector {
            bits: [false; FEATURE_COUNT],
        }
    }

    pub fn get(&self, bit: FeatureBit) -> bool {
        self.bits[bit as usize]
    }

    pub fn set(&mut self, bit: FeatureBit, value: bool) {
        self.bits[bit as usize] = value;
    }

    /// The vector as 0.0/1.0 coordinates for the SVM.
    pub fn as_f64(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for (slot, &bit) in out.iter_mut().zip(self.bits.iter()) {
            *slot = if bit { 1.0 } else { 0.0 };
        }
        out
    }

    /// Compact `0`/`1` string in feature order, for logs and debugging.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

fn require(frame: &SkeletonFrame, joint: JointName) -> Result<[f64; 3], FeatureError> {
    frame.position(joint).ok_or(FeatureError::IncompleteFrame {
        timestamp: frame.timestamp,
        joint,
    })
}

/// Sagittal (forward+/backward-) and lateral (right+/left-) lean of the
/// torso-to-head vector against vertical, in degrees. Leaning toward the
/// screen means the head moves to smaller z.
fn lean_angles(frame: &SkeletonFrame) -> Result<(f64, f64), FeatureError> {
    let head = require(frame, JointName::Head)?;
    let torso = require(frame, JointName::Torso)?;
    let dx = head[0] - torso[0];
    let dy = head[1] - torso[1];
    let forward = torso[2] - head[2];
    let sagittal = forward.atan2(dy).to_degrees();
    let lateral = dx.atan2(dy).to_degrees();
    Ok((sagittal, lateral))
}

fn shoulder_yaw(frame: &SkeletonFrame) -> Result<f64, FeatureError> {
    let left = require(frame, JointName::ShoulderLeft)?;
    let right = require(frame, JointName::ShoulderRight)?;
    let dx = right[0] - left[0];
    let dz = right[2] - left[2];
    Ok(dz.atan2(dx).to_degrees())
}

fn hand_heights(frame: &SkeletonFrame) -> Result<HandHeights, FeatureError> {
    let hip_y = (require(frame, JointName::HipLeft)?[1] + require(frame, JointName::HipRight)?[1]) / 2.0;
    let shoulder_y =
        (require(frame, JointName::ShoulderLeft)?[1] + require(frame, JointName::ShoulderRight)?[1]) / 2.0;
    Ok(HandHeights {
        left_above_hip_m: require(frame, JointName::HandLeft)?[1] - hip_y,
        right_above_hip_m: require(frame, JointName::HandRight)?[1] - hip_y,
        shoulder_above_hip_m: shoulder_y - hip_y,
    })
}

/// Mean per-step speed of one joint across the window, m/s.
fn joint_speed(window: &[SkeletonFrame], joint: JointName) -> Result<f64, FeatureError> {
    let mut total = 0.0;
    let mut steps = 0usize;
    for pair in window.windows(2) {
        let a = require(&pair[0], joint)?;
        let b = require(&pair[1], joint)?;
        let dt = pair[1].timestamp - pair[0].timestamp;
        if !(dt > 0.0) {
            return Err(FeatureError::ZeroTimeSpan);
        }
        let dist = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
        total += dist / dt;
        steps += 1;
    }
    Ok(total / steps as f64)
}

/// Least-squares slope of `values` against `times`.
fn slope(times: &[f64], values: &[f64]) -> Result<f64, FeatureError> {
    let n = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let v_mean = values.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, v) in times.iter().zip(values) {
        num += (t - t_mean) * (v - v_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    if den == 0.0 {
        return Err(FeatureError::ZeroTimeSpan);
    }
    Ok(num / den)
}

/// Computes all window measures for `window`, a slice of at least two
/// consecutive valid frames of one participant in time order. Postures
/// (lean, yaw, hand heights) are taken at the last frame; rates and speeds
/// span the whole window.
pub fn compute_measures(
    window: &[SkeletonFrame],
    _thresholds: &ClassifierThresholds,
) -> Result<WindowMeasures, FeatureError> {
    if window.len() < 2 {
        return Err(FeatureError::WindowTooShort { got: window.len() });
    }
    let last = window.last().expect("window checked non-empty");
    let (sagittal, lateral) = lean_angles(last)?;

    let times: Vec<f64> = window.iter().map(|f| f.timestamp).collect();
    let leans = window
        .iter()
        .map(|f| lean_angles(f).map(|(s, _)| s))
        .collect::<Result<Vec<f64>, _>>()?;
    let lean_rate = slope(&times, &leans)?;

    let left_speed = joint_speed(window, JointName::HandLeft)?;
    let right_speed = joint_speed(window, JointName::HandRight)?;
    let mut energy = 0.0;
    for name in JointName::ALL {
        energy += joint_speed(window, name)?;
    }

    Ok(WindowMeasures {
        sagittal_lean_deg: sagittal,
        lateral_lean_deg: lateral,
        sagittal_lean_rate_deg_s: lean_rate,
        hand_heights: hand_heights(last)?,
        max_hand_speed_m_s: left_speed.max(right_speed),
        torso_yaw_deg: shoulder_yaw(last)?,
        motion_energy_m_s: energy / JointName::ALL.len() as f64,
    })
}

/// Evaluates the 16 binary classifiers on finite measures.
///
/// Band semantics: the sagittal partition is backward / upright / forward
/// with upright as the closure; sideways and forward-process are
/// independent flags; the hand band compares the higher hand against the
/// hip line (rest) and the shoulder line (raised), rest winning the
/// degenerate overlap; speed and motion bands take their middle value
/// between the two cutoffs; facing/turned-away leave a dead band where
/// both are 0.
pub fn evaluate_classifiers(
    measures: &WindowMeasures,
    thresholds: &ClassifierThresholds,
) -> FeatureVector {
    let mut v = FeatureVector::zeros();
    let t = thresholds;

    let sag = measures.sagittal_lean_deg;
    v.set(FeatureBit::LeanBackward, sag < t.lean_back_deg);
    v.set(FeatureBit::LeanForward, sag > t.lean_fwd_deg);
    v.set(
        FeatureBit::LeanUpright,
        !v.get(FeatureBit::LeanBackward) && !v.get(FeatureBit::LeanForward),
    );
    v.set(
        FeatureBit::LeanSideways,
        measures.lateral_lean_deg.abs() > t.lateral_deg,
    );
    v.set(
        FeatureBit::LeanForwardProcess,
        measures.sagittal_lean_rate_deg_s > t.lean_rate_deg_s,
    );

    let hand = measures.hand_heights.higher_above_hip_m();
    let rest = hand <= 0.0;
    let raised = !rest && hand >= measures.hand_heights.shoulder_above_hip_m;
    v.set(FeatureBit::HandRest, rest);
    v.set(FeatureBit::HandRaised, raised);
    v.set(FeatureBit::HandMid, !rest && !raised);

    let speed = measures.max_hand_speed_m_s;
    v.set(FeatureBit::HandSpeedNearZero, speed < t.hand_speed_eps_m_s);
    v.set(FeatureBit::HandSpeedHigh, speed > t.hand_speed_high_m_s);
    v.set(
        FeatureBit::HandSpeedModerate,
        !v.get(FeatureBit::HandSpeedNearZero) && !v.get(FeatureBit::HandSpeedHigh),
    );

    let yaw = measures.torso_yaw_deg.abs();
    v.set(FeatureBit::FacingScreen, yaw < t.yaw_facing_deg);
    v.set(FeatureBit::TurnedAway, yaw > t.yaw_away_deg);

    let motion = measures.motion_energy_m_s;
    v.set(FeatureBit::MotionStill, motion < t.motion_still_m_s);
    v.set(FeatureBit::MotionAgitated, motion > t.motion_agitated_m_s);
    v.set(
        FeatureBit::MotionModerate,
        !v.get(FeatureBit::MotionStill) && !v.get(FeatureBit::MotionAgitated),
    );

    v
}

/// One classifier-bank output: the feature vector at `timestamp` plus the
/// hand speed the action override consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFrame {
    pub timestamp: f64,
    pub features: FeatureVector,
    pub max_hand_speed_m_s: f64,
}

/// Runs the classifier bank over a whole stream with a trailing window:
/// one output per frame from index `window_frames - 1` onward.
pub fn feature_sequence(
    stream: &crate::skeleton::SkeletonStream,
    thresholds: &ClassifierThresholds,
) -> Result<Vec<FeatureFrame>, FeatureError> {
    thresholds.validate()?;
    let w = thresholds.window_frames;
    if stream.frames.len() < w {
        return Err(FeatureError::StreamTooShort {
            needed: w,
            got: stream.frames.len(),
        });
    }
    stream
        .frames
        .windows(w)
        .map(|window| {
            let measures = compute_measures(window, thresholds)?;
            Ok(FeatureFrame {
                timestamp: window[w - 1].timestamp,
                features: evaluate_classifiers(&measures, thresholds),
                max_hand_speed_m_s: measures.max_hand_speed_m_s,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{Joint, SkeletonStream};
    use approx::assert_relative_eq;

    /// Builds a frame from a pose closure mapping each joint to a position.
    fn frame_from(timestamp: f64, pose: impl Fn(JointName) -> [f64; 3]) -> SkeletonFrame {
        let joints = JointName::ALL.iter().map(|&n| Joint::new(n, pose(n))).collect();
        SkeletonFrame::new("p1", timestamp, joints)
    }

    fn upright_pose(name: JointName) -> [f64; 3] {
        match name {
            JointName::Head => [0.0, 1.30, 2.5],
            JointName::ShoulderLeft => [-0.20, 1.05, 2.5],
            JointName::ShoulderRight => [0.20, 1.05, 2.5],
            JointName::ElbowLeft => [-0.28, 0.82, 2.47],
            JointName::ElbowRight => [0.28, 0.82, 2.47],
            JointName::HandLeft => [-0.24, 0.42, 2.40],
            JointName::HandRight => [0.24, 0.42, 2.40],
            JointName::Torso => [0.0, 0.75, 2.5],
            JointName::HipLeft => [-0.13, 0.50, 2.5],
            JointName::HipRight => [0.13, 0.50, 2.5],
        }
    }

    #[test]
    fn motionless_vertical_skeleton_has_zero_measures() {
        let window: Vec<_> = (0..10)
            .map(|k| frame_from(k as f64 / 30.0, upright_pose))
            .collect();
        let m = compute_measures(&window, &ClassifierThresholds::default()).unwrap();
        assert_eq!(m.sagittal_lean_deg, 0.0);
        assert_eq!(m.lateral_lean_deg, 0.0);
        assert_eq!(m.sagittal_lean_rate_deg_s, 0.0);
        assert_eq!(m.max_hand_speed_m_s, 0.0);
        assert_eq!(m.motion_energy_m_s, 0.0);
        assert_eq!(m.torso_yaw_deg, 0.0);
    }

    #[test]
    fn forward_head_offset_gives_expected_sagittal_lean() {
        // Head 0.1 m toward the screen (-z) with 0.3 m of rise over the
        // torso: lean = atan(0.1 / 0.3), frozen from an independent
        // calculator.
        let pose = |name: JointName| match name {
            JointName::Head => [0.0, 1.05, 2.4],
            JointName::Torso => [0.0, 0.75, 2.5],
            other => upright_pose(other),
        };
        let window = vec![frame_from(0.0, pose), frame_from(1.0 / 30.0, pose)];
        let m = compute_measures(&window, &ClassifierThresholds::default()).unwrap();
        assert_relative_eq!(m.sagittal_lean_deg, 18.434948822922014, epsilon = 1e-9);
        assert_eq!(m.lateral_lean_deg, 0.0);
    }

    #[test]
    fn single_moving_hand_sets_speed_and_motion_energy() {
        // hand_left travels 0.3 m in 1.0 s; per-step and mean speeds are
        // 0.3 m/s, and one moving joint out of ten gives 0.03 m/s energy.
        let window: Vec<_> = (0..11)
            .map(|k| {
                let t = k as f64 * 0.1;
                frame_from(t, |name| {
                    let mut p = upright_pose(name);
                    if name == JointName::HandLeft {
                        p[0] += 0.3 * t;
                    }
                    p
                })
            })
            .collect();
        let m = compute_measures(&window, &ClassifierThresholds::default()).unwrap();
        assert_relative_eq!(m.max_hand_speed_m_s, 0.3, epsilon = 1e-9);
        assert_relative_eq!(m.motion_energy_m_s, 0.03, epsilon = 1e-9);
    }

    #[test]
    fn window_shorter_than_two_frames_is_rejected() {
        let window = vec![frame_from(0.0, upright_pose)];
        assert!(matches!(
            compute_measures(&window, &ClassifierThresholds::default()),
            Err(FeatureError::WindowTooShort { got: 1 })
        ));
    }

    #[test]
    fn zero_time_span_is_rejected() {
        let window = vec![frame_from(0.5, upright_pose), frame_from(0.5, upright_pose)];
        assert!(matches!(
            compute_measures(&window, &ClassifierThresholds::default()),
            Err(FeatureError::ZeroTimeSpan)
        ));
    }

    fn bits_by_name(v: &FeatureVector) -> Vec<&'static str> {
        FeatureBit::ALL
            .iter()
            .filter(|b| v.get(**b))
            .map(|b| b.as_str())
            .collect()
    }

    #[test]
    fn all_zero_measures_hit_the_innermost_bands() {
        let v = evaluate_classifiers(&WindowMeasures::NEUTRAL, &ClassifierThresholds::default());
        let expected = [
            false, false, true, false, false, // lean: upright
            true, false, false, // hand: rest
            true, false, false, // speed: near zero
            true, false, // orientation: facing
            true, false, false, // motion: still
        ];
        assert_eq!(v.bits, expected);
    }

    #[test]
    fn backward_lean_crosses_one_threshold() {
        let measures = WindowMeasures {
            sagittal_lean_deg: -12.0,
            ..WindowMeasures::NEUTRAL
        };
        let v = evaluate_classifiers(&measures, &ClassifierThresholds::default());
        assert!(v.get(FeatureBit::LeanBackward));
        assert!(!v.get(FeatureBit::LeanUpright));
        let mut expected = evaluate_classifiers(&WindowMeasures::NEUTRAL, &ClassifierThresholds::default());
        expected.set(FeatureBit::LeanBackward, true);
        expected.set(FeatureBit::LeanUpright, false);
        assert_eq!(v, expected);
    }

    #[test]
    fn active_measures_light_the_outer_bands() {
        let measures = WindowMeasures {
            sagittal_lean_deg: 10.0,
            lateral_lean_deg: 0.0,
            sagittal_lean_rate_deg_s: 20.0,
            hand_heights: HandHeights {
                left_above_hip_m: 0.1,
                right_above_hip_m: 0.60,
                shoulder_above_hip_m: 0.55,
            },
            max_hand_speed_m_s: 0.6,
            torso_yaw_deg: 5.0,
            motion_energy_m_s: 0.4,
        };
        let v = evaluate_classifiers(&measures, &ClassifierThresholds::default());
        assert_eq!(
            bits_by_name(&v),
            vec![
                "lean_forward_process",
                "lean_forward",
                "hand_raised",
                "hand_speed_high",
                "facing_screen",
                "motion_agitated",
            ]
        );
    }

    #[test]
    fn feature_sequence_counts_and_timestamps() {
        let thresholds = ClassifierThresholds::default();
        let mut stream = SkeletonStream::new("p1", 30.0);
        for k in 0..10 {
            stream.frames.push(frame_from(k as f64 / 30.0, upright_pose));
        }
        let seq = feature_sequence(&stream, &thresholds).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq[0].timestamp, stream.frames[9].timestamp);

        for k in 10..300 {
            stream.frames.push(frame_from(k as f64 / 30.0, upright_pose));
        }
        let seq = feature_sequence(&stream, &thresholds).unwrap();
        assert_eq!(seq.len(), 291);
        assert!(seq.windows(2).all(|p| p[0].timestamp < p[1].timestamp));
    }

    #[test]
    fn constant_pose_gives_identical_feature_vectors() {
        let mut stream = SkeletonStream::new("p1", 30.0);
        for k in 0..40 {
            stream.frames.push(frame_from(k as f64 / 30.0, upright_pose));
        }
        let seq = feature_sequence(&stream, &ClassifierThresholds::default()).unwrap();
        assert!(seq.iter().all(|f| f.features == seq[0].features));
    }

    #[test]
    fn short_stream_is_rejected() {
        let mut stream = SkeletonStream::new("p1", 30.0);
        for k in 0..5 {
            stream.frames.push(frame_from(k as f64 / 30.0, upright_pose));
        }
        assert!(matches!(
            feature_sequence(&stream, &ClassifierThresholds::default()),
            Err(FeatureError::StreamTooShort { needed: 10, got: 5 })
        ));
    }

    #[test]
    fn lean_rate_matches_analytic_slope_for_linear_ramp() {
        // Lean angle rises linearly at 12 deg/s; the fitted slope must
        // match to 1e-6 deg/s.
        let rate_deg_s = 12.0;
        let window: Vec<_> = (0..10)
            .map(|k| {
                let t = k as f64 / 30.0;
                let theta = (rate_deg_s * t).to_radians();
                frame_from(t, |name| match name {
                    JointName::Head => {
                        let torso = upright_pose(JointName::Torso);
                        [
                            torso[0],
                            torso[1] + 0.55 * theta.cos(),
                            torso[2] - 0.55 * theta.sin(),
                        ]
                    }
                    other => upright_pose(other),
                })
            })
            .collect();
        let m = compute_measures(&window, &ClassifierThresholds::default()).unwrap();
        assert_relative_eq!(m.sagittal_lean_rate_deg_s, rate_deg_s, epsilon = 1e-6);
    }

    #[test]
    fn thresholds_config_round_trip_and_validation() {
        let mut t = ClassifierThresholds::default();
        t.apply_config_str("# comment\nlean_fwd_deg = 12.5\nwindow_frames = 4\n")
            .unwrap();
        assert_eq!(t.lean_fwd_deg, 12.5);
        assert_eq!(t.window_frames, 4);

        let rendered = t.to_config_string();
        let mut back = ClassifierThresholds::default();
        back.apply_config_str(&rendered).unwrap();
        assert_eq!(back, t);

        let mut bad = ClassifierThresholds::default();
        assert!(bad.apply_config_str("no_such_key = 1\n").is_err());
        let mut bad = ClassifierThresholds::default();
        assert!(bad.apply_config_str("lean_back_deg = 3\n").is_err());
    }

    #[test]
    fn fingerprint_changes_with_any_field() {
        let base = ClassifierThresholds::default();
        let mut tweaked = base.clone();
        tweaked.motion_still_m_s = 0.021;
        assert_ne!(base.fingerprint(), tweaked.fingerprint());
        assert_eq!(base.fingerprint(), ClassifierThresholds::default().fingerprint());
    }
}
