//! Engagement states and the state-set modes the pipeline runs in.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the six engagement states, ordered from least to most active.
///
/// The numeric values 1..=6 are part of every file format in this crate
/// and must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EngagementState {
    /// No participation, no attention to the meeting.
    Disengagement = 1,
    /// Listening and observing without participating.
    RelaxedEngagement = 2,
    /// Attention plus non-verbal feedback (nodding, short confirmations).
    InvolvedEngagement = 3,
    /// Preparing to take the protagonist role.
    IntentionToAct = 4,
    /// Calm protagonistic activity (speaking, interacting with content).
    Action = 5,
    /// Highly engaged interaction with intense gesture and voice.
    InvolvedAction = 6,
}

impl EngagementState {
    pub const ALL: [EngagementState; 6] = [
        EngagementState::Disengagement,
        EngagementState::RelaxedEngagement,
        EngagementState::InvolvedEngagement,
        EngagementState::IntentionToAct,
        EngagementState::Action,
        EngagementState::InvolvedAction,
    ];

    /// Numeric value in 1..=6.
    pub fn value(self) -> u8 {
        self as u8
    }

    /// Inverse of [`value`](Self::value); `None` outside 1..=6.
    pub fn from_value(value: u8) -> Option<EngagementState> {
        Self::ALL.get(value.checked_sub(1)? as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EngagementState::Disengagement => "disengagement",
            EngagementState::RelaxedEngagement => "relaxed engagement",
            EngagementState::InvolvedEngagement => "involved engagement",
            EngagementState::IntentionToAct => "intention to act",
            EngagementState::Action => "action",
            EngagementState::InvolvedAction => "involved action",
        }
    }
}

impl fmt::Display for EngagementState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Which subset of the six states a pipeline produces.
///
/// The initial experiment runs on three states (disengagement, intention
/// to act, action); the full six-state repertoire stays available as a
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateMode {
    ThreeState,
    SixState,
}

impl StateMode {
    /// The states admissible in this mode.
    pub fn allowed(self) -> &'static [EngagementState] {
        match self {
            StateMode::ThreeState => &[
                EngagementState::Disengagement,
                EngagementState::IntentionToAct,
                EngagementState::Action,
            ],
            StateMode::SixState => &EngagementState::ALL,
        }
    }

    pub fn contains(self, state: EngagementState) -> bool {
        self.allowed().contains(&state)
    }

    /// Token used in file headers and config values.
    pub fn as_str(self) -> &'static str {
        match self {
            StateMode::ThreeState => "three_state",
            StateMode::SixState => "six_state",
        }
    }

    /// Accepts both the header token and the short CLI form.
    pub fn parse(token: &str) -> Option<StateMode> {
        match token {
            "three_state" | "three" => Some(StateMode::ThreeState),
            "six_state" | "six" => Some(StateMode::SixState),
            _ => None,
        }
    }
}

impl fmt::Display for StateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
