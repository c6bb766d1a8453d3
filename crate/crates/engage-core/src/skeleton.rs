//! Skeleton data model: the ten upper-body joints, frames, and streams.
//!
//! Positions are in meters in the sensor frame: x to the seated
//! participant's right, y up, z depth increasing away from the screen
//! (the participant sits at positive z, leaning toward the screen
//! decreases z).

use std::fmt;

use crate::state::{EngagementState, StateMode};

/// Number of joints in a complete frame.
pub const JOINT_COUNT: usize = 10;

/// The ten upper-body joints relevant for seated meeting participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointName {
    Head,
    ShoulderLeft,
    ShoulderRight,
    ElbowLeft,
    ElbowRight,
    HandLeft,
    HandRight,
    Torso,
    HipLeft,
    HipRight,
}

impl JointName {
    /// Canonical order; also the field order of the stream file format.
    pub const ALL: [JointName; JOINT_COUNT] = [
        JointName::Head,
        JointName::ShoulderLeft,
        JointName::ShoulderRight,
        JointName::ElbowLeft,
        JointName::ElbowRight,
        JointName::HandLeft,
        JointName::HandRight,
        JointName::Torso,
        JointName::HipLeft,
        JointName::HipRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JointName::Head => "head",
            JointName::ShoulderLeft => "shoulder_left",
            JointName::ShoulderRight => "shoulder_right",
            JointName::ElbowLeft => "elbow_left",
            JointName::ElbowRight => "elbow_right",
            JointName::HandLeft => "hand_left",
            JointName::HandRight => "hand_right",
            JointName::Torso => "torso",
            JointName::HipLeft => "hip_left",
            JointName::HipRight => "hip_right",
        }
    }

    pub fn parse(token: &str) -> Option<JointName> {
        Self::ALL.iter().copied().find(|j| j.as_str() == token)
    }
}

impl fmt::Display for JointName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lower-body joint names some sensors emit; skipped with a warning at
/// parse time because seated meetings make them irrelevant.
pub(crate) const LOWER_BODY_JOINTS: [&str; 6] = [
    "knee_left",
    "knee_right",
    "ankle_left",
    "ankle_right",
    "foot_left",
    "foot_right",
];

/// A named joint with its 3D position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub name: JointName,
    pub position: [f64; 3],
}

impl Joint {
    pub fn new(name: JointName, position: [f64; 3]) -> Joint {
        Joint { name, position }
    }
}

/// One timestamped skeleton observation for one participant.
///
/// A valid frame carries each of the ten joints exactly once with finite
/// positions; [`validate_frame`] reports any deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub participant_id: String,
    /// Seconds since stream start.
    pub timestamp: f64,
    pub joints: Vec<Joint>,
}

impl SkeletonFrame {
    pub fn new(participant_id: impl Into<String>, timestamp: f64, joints: Vec<Joint>) -> Self {
        SkeletonFrame {
            participant_id: participant_id.into(),
            timestamp,
            joints,
        }
    }

    /// Position of `name`, if present in this frame.
    pub fn position(&self, name: JointName) -> Option<[f64; 3]> {
        self.joints
            .iter()
            .find(|j| j.name == name)
            .map(|j| j.position)
    }
}

/// A violation of the frame invariants, one per failed check.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameViolation {
    MissingJoint(JointName),
    DuplicateJoint(JointName),
    NonFinitePosition(JointName),
    NegativeTimestamp(f64),
    NonFiniteTimestamp,
}

impl fmt::Display for FrameViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameViolation::MissingJoint(j) => write!(f, "missing joint: {j}"),
            FrameViolation::DuplicateJoint(j) => write!(f, "duplicate joint: {j}"),
            FrameViolation::NonFinitePosition(j) => write!(f, "non-finite position: {j}"),
            FrameViolation::NegativeTimestamp(t) => write!(f, "negative timestamp: {t}"),
            FrameViolation::NonFiniteTimestamp => write!(f, "non-finite timestamp"),
        }
    }
}

/// Checks every frame invariant; the empty list means the frame is valid.
pub fn validate_frame(frame: &SkeletonFrame) -> Vec<FrameViolation> {
    let mut violations = Vec::new();
    if !frame.timestamp.is_finite() {
        violations.push(FrameViolation::NonFiniteTimestamp);
    } else if frame.timestamp < 0.0 {
        violations.push(FrameViolation::NegativeTimestamp(frame.timestamp));
    }
    for name in JointName::ALL {
        let mut count = 0;
        let mut finite = true;
        for joint in &frame.joints {
            if joint.name == name {
                count += 1;
                finite &= joint.position.iter().all(|c| c.is_finite());
            }
        }
        match count {
            0 => violations.push(FrameViolation::MissingJoint(name)),
            1 => {}
            _ => violations.push(FrameViolation::DuplicateJoint(name)),
        }
        if count > 0 && !finite {
            violations.push(FrameViolation::NonFinitePosition(name));
        }
    }
    violations
}

/// Translates all joints so the torso sits at the origin.
///
/// Joint set and timestamp are unchanged; pairwise inter-joint geometry is
/// preserved. Expects a valid frame; a frame without a torso joint is
/// returned unchanged.
pub fn body_centered(frame: &SkeletonFrame) -> SkeletonFrame {
    let Some(torso) = frame.position(JointName::Torso) else {
        debug_assert!(false, "body_centered called on frame without torso");
        return frame.clone();
    };
    let joints = frame
        .joints
        .iter()
        .map(|j| Joint {
            name: j.name,
            position: [
                j.position[0] - torso[0],
                j.position[1] - torso[1],
                j.position[2] - torso[2],
            ],
        })
        .collect();
    SkeletonFrame {
        participant_id: frame.participant_id.clone(),
        timestamp: frame.timestamp,
        joints,
    }
}

/// Per-frame ground-truth labels attached to a stream, together with the
/// state set they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTrack {
    pub mode: StateMode,
    pub values: Vec<EngagementState>,
}

/// An ordered sequence of frames for one participant, optionally labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonStream {
    pub participant_id: String,
    /// Nominal frames per second (30 for the reference sensors).
    pub frame_rate: f64,
    pub frames: Vec<SkeletonFrame>,
    pub labels: Option<LabelTrack>,
}

impl SkeletonStream {
    pub fn new(participant_id: impl Into<String>, frame_rate: f64) -> SkeletonStream {
        SkeletonStream {
            participant_id: participant_id.into(),
            frame_rate,
            frames: Vec::new(),
            labels: None,
        }
    }

    /// Stream-level invariant check: positive frame rate, valid frames,
    /// strictly increasing timestamps, label/frame length agreement.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.frame_rate > 0.0) {
            return Err(format!("frame_rate must be positive, got {}", self.frame_rate));
        }
        let mut prev: Option<f64> = None;
        for (i, frame) in self.frames.iter().enumerate() {
            let violations = validate_frame(frame);
            if let Some(v) = violations.first() {
                return Err(format!("frame {i}: {v}"));
            }
            if let Some(p) = prev {
                if frame.timestamp <= p {
                    return Err(format!(
                        "frame {i}: timestamp {} not after {}",
                        frame.timestamp, p
                    ));
                }
            }
            prev = Some(frame.timestamp);
        }
        if let Some(track) = &self.labels {
            if track.values.len() != self.frames.len() {
                return Err(format!(
                    "label count {} does not match frame count {}",
                    track.values.len(),
                    self.frames.len()
                ));
            }
            if let Some(bad) = track.values.iter().find(|s| !track.mode.contains(**s)) {
                return Err(format!(
                    "label {} outside the {} set",
                    bad,
                    track.mode.as_str()
                ));
            }
        }
        Ok(())
    }
}
