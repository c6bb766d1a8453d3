//! Deterministic generator of the dyadic hand-off game: a phase schedule
//! (countdown, then alternating switch/play segments), synthetic skeleton
//! streams for both participants with configurable sensor noise, and a
//! seeded train/test split manifest.
//!
//! Every stream is a pure function of (schedule, participant, seed), so
//! corpora regenerate byte for byte.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::skeleton::{Joint, JointName, LabelTrack, SkeletonFrame, SkeletonStream};
use crate::state::{EngagementState, StateMode};
use crate::stream_io::{write_stream_file, StreamError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("participant index {0} does not appear in the schedule (only 0 and 1 do)")]
    UnknownParticipant(usize),
    #[error("corpus of {requested} frames requested but only {available} are eligible")]
    CorpusTooSmall { requested: usize, available: usize },
    #[error("manifest line {line}: {reason}")]
    ManifestFormat { line: usize, reason: String },
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Protocol and sensor parameters of one hand-off game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub countdown_s: f64,
    pub play_s: f64,
    pub switch_s: f64,
    /// Hand-off cycles per game; active participant alternates.
    pub switches: usize,
    /// Repetitions of the whole game per participant pair.
    pub games: usize,
    pub frame_rate: f64,
    pub seed: u64,
    /// Std-dev of white Gaussian jitter added to every joint coordinate.
    pub noise_sigma_m: f64,
    /// Participant's seat distance from the screen plane, meters.
    pub screen_distance_m: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            countdown_s: 10.0,
            play_s: 10.0,
            switch_s: 10.0,
            switches: 20,
            games: 5,
            frame_rate: 30.0,
            seed: 42,
            noise_sigma_m: 0.007,
            screen_distance_m: 2.5,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        for (name, v) in [
            ("countdown_s", self.countdown_s),
            ("play_s", self.play_s),
            ("switch_s", self.switch_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a positive duration, got {v}"));
            }
        }
        if self.switches < 1 {
            return bad("switches must be at least 1".into());
        }
        if self.games < 1 {
            return bad("games must be at least 1".into());
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad(format!("frame_rate must be positive, got {}", self.frame_rate));
        }
        if !(self.noise_sigma_m >= 0.0 && self.noise_sigma_m.is_finite()) {
            return bad(format!(
                "noise_sigma_m must be non-negative, got {}",
                self.noise_sigma_m
            ));
        }
        if !(self.screen_distance_m > 0.0 && self.screen_distance_m.is_finite()) {
            return bad(format!(
                "screen_distance_m must be positive, got {}",
                self.screen_distance_m
            ));
        }
        Ok(())
    }

    /// Duration of one game pass.
    pub fn total_s(&self) -> f64 {
        self.countdown_s + self.switches as f64 * (self.switch_s + self.play_s)
    }
}

/// What the participants are doing during one schedule segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Countdown,
    /// Hand-off announcement; `next` prepares to act.
    Switch { next: usize },
    /// `active` plays the block-selection task.
    Play { active: usize },
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseKind::Countdown => write!(f, "countdown"),
            PhaseKind::Switch { next } => write!(f, "switch(p{})", next + 1),
            PhaseKind::Play { active } => write!(f, "play(p{})", active + 1),
        }
    }
}

/// One half-open segment `[start_s, end_s)` with per-participant truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: PhaseKind,
    /// Ground-truth engagement per participant index.
    pub truth: [EngagementState; 2],
}

/// The full phase layout of one game, contiguous from 0 to `total_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub phases: Vec<Phase>,
    pub total_s: f64,
}

impl PhaseSchedule {
    /// The phase containing `t`; `None` outside `[0, total_s)`.
    pub fn phase_at(&self, t: f64) -> Option<&Phase> {
        if t < 0.0 {
            return None;
        }
        self.phases.iter().find(|p| t >= p.start_s && t < p.end_s)
    }

    pub fn truth_at(&self, t: f64, participant: usize) -> Option<EngagementState> {
        Some(self.phase_at(t)?.truth[participant])
    }
}

/// Lays out one game: countdown, then `switches` cycles of switch + play
/// with the active participant alternating (participant 0 acts first).
pub fn build_schedule(config: &GameConfig) -> Result<PhaseSchedule, SimError> {
    config.validate()?;
    use EngagementState::{Disengagement, IntentionToAct};
    let mut phases = Vec::with_capacity(1 + 2 * config.switches);
    phases.push(Phase {
        start_s: 0.0,
        end_s: config.countdown_s,
        kind: PhaseKind::Countdown,
        truth: [Disengagement, Disengagement],
    });
    let cycle = config.switch_s + config.play_s;
    for k in 0..config.switches {
        let active = k % 2;
        let truth = if active == 0 {
            [IntentionToAct, Disengagement]
        } else {
            [Disengagement, IntentionToAct]
        };
        let cycle_start = config.countdown_s + k as f64 * cycle;
        phases.push(Phase {
            start_s: cycle_start,
            end_s: cycle_start + config.switch_s,
            kind: PhaseKind::Switch { next: active },
            truth,
        });
        phases.push(Phase {
            start_s: cycle_start + config.switch_s,
            end_s: cycle_start + cycle,
            kind: PhaseKind::Play { active },
            truth,
        });
    }
    Ok(PhaseSchedule {
        phases,
        total_s: config.total_s(),
    })
}

/// splitmix64-style mixer deriving independent stream seeds from one
/// user-facing seed.
pub(crate) fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const LEAN_BACK_DEG: f64 = -10.0;
const LEAN_FWD_DEG: f64 = 10.0;
const TORSO_TO_HEAD_M: f64 = 0.55;
/// Seconds of smoothstep blending from the previous phase's end pose.
const EASE_S: f64 = 0.7;
const BREATH_HZ: f64 = 0.25;
const BREATH_AMPLITUDE_M: f64 = 0.003;

type Pose = [[f64; 3]; 10];

fn rest_right_hand(z: f64) -> [f64; 3] {
    [0.24, 0.42, z - 0.10]
}

fn raised_right_hand(z: f64) -> [f64; 3] {
    [0.24, 1.10, z - 0.20]
}

/// Seated template: torso at (0, 0.75, z) facing the screen (which lies
/// toward -z), head tilted by `lean_deg` (positive toward the screen),
/// right hand free, everything else fixed. Order matches
/// [`JointName::ALL`].
fn template(lean_deg: f64, right_hand: [f64; 3], z: f64) -> Pose {
    let theta = lean_deg.to_radians();
    let torso = [0.0, 0.75, z];
    let head = [
        torso[0],
        torso[1] + TORSO_TO_HEAD_M * theta.cos(),
        torso[2] - TORSO_TO_HEAD_M * theta.sin(),
    ];
    [
        head,
        [-0.20, 1.05, z],
        [0.20, 1.05, z],
        [-0.28, 0.82, z - 0.03],
        [0.28, 0.82, z - 0.03],
        [-0.24, 0.42, z - 0.10],
        right_hand,
        torso,
        [-0.13, 0.50, z],
        [0.13, 0.50, z],
    ]
}

fn lerp3(a: [f64; 3], b: [f64; 3], u: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * u,
        a[1] + (b[1] - a[1]) * u,
        a[2] + (b[2] - a[2]) * u,
    ]
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// One quadratic Bezier reach of the playing hand.
#[derive(Debug, Clone)]
struct ArcSegment {
    t0: f64,
    t1: f64,
    from: [f64; 3],
    control: [f64; 3],
    to: [f64; 3],
}

impl ArcSegment {
    fn eval(&self, t: f64) -> [f64; 3] {
        let u = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0);
        let m = 1.0 - u;
        let mut p = [0.0; 3];
        for d in 0..3 {
            p[d] = m * m * self.from[d] + 2.0 * m * u * self.control[d] + u * u * self.to[d];
        }
        p
    }
}

/// Reaching arcs covering `[start_s, end_s)`: each segment heads for a
/// seeded block target in front of the participant at 0.3 to 0.8 m/s.
/// Targets closer than 0.12 m are redrawn and the control point offset is
/// proportional to the reach, which keeps the hand moving for the whole
/// segment instead of stalling at a cusp.
fn build_arcs(rng: &mut ChaCha8Rng, start_s: f64, end_s: f64, z: f64) -> Vec<ArcSegment> {
    let mut arcs = Vec::new();
    let mut t = start_s;
    let mut from = raised_right_hand(z);
    while t < end_s {
        let (to, dist) = loop {
            let cand = [
                rng.gen_range(0.05..0.45),
                rng.gen_range(1.07..1.32),
                z - rng.gen_range(0.25..0.45),
            ];
            let d = ((cand[0] - from[0]).powi(2)
                + (cand[1] - from[1]).powi(2)
                + (cand[2] - from[2]).powi(2))
            .sqrt();
            if d >= 0.12 {
                break (cand, d);
            }
        };
        let speed = rng.gen_range(0.3..0.8);
        let duration = dist / speed;
        let mid = lerp3(from, to, 0.5);
        let control = [
            mid[0] + dist * rng.gen_range(-0.15..0.15),
            mid[1] + dist * rng.gen_range(0.0..0.25),
            mid[2] + dist * rng.gen_range(-0.15..0.15),
        ];
        arcs.push(ArcSegment {
            t0: t,
            t1: t + duration,
            from,
            control,
            to,
        });
        t += duration;
        from = to;
    }
    arcs
}

/// Per-phase motion plan for one participant.
enum PhasePlan {
    /// Backward lean, both hands at rest.
    Idle,
    /// Lean ramp backward-to-forward, right hand rising hip-to-shoulder.
    Ramp,
    /// Forward lean, right hand following precomputed arcs.
    Arcs(Vec<ArcSegment>),
}

struct MotionScript {
    /// One plan per schedule phase, plus the pose carried into it.
    plans: Vec<(PhasePlan, Pose)>,
    z: f64,
}

impl MotionScript {
    /// Builds the deterministic motion plan for `participant`. Arc
    /// randomness comes from `rng` and is consumed in phase order.
    fn new(schedule: &PhaseSchedule, participant: usize, z: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut plans: Vec<(PhasePlan, Pose)> = Vec::with_capacity(schedule.phases.len());
        for phase in &schedule.phases {
            let plan = match phase.kind {
                PhaseKind::Switch { next } if next == participant => PhasePlan::Ramp,
                PhaseKind::Play { active } if active == participant => {
                    PhasePlan::Arcs(build_arcs(rng, phase.start_s, phase.end_s, z))
                }
                _ => PhasePlan::Idle,
            };
            let carry = match plans.last() {
                Some((previous_plan, _)) => {
                    let previous = &schedule.phases[plans.len() - 1];
                    Self::template_pose(previous_plan, previous, previous.end_s, z)
                }
                None => Self::template_pose(&plan, phase, phase.start_s, z),
            };
            plans.push((plan, carry));
        }
        MotionScript { plans, z }
    }

    fn template_pose(plan: &PhasePlan, phase: &Phase, t: f64, z: f64) -> Pose {
        match plan {
            PhasePlan::Idle => template(LEAN_BACK_DEG, rest_right_hand(z), z),
            PhasePlan::Ramp => {
                let u = ((t - phase.start_s) / (phase.end_s - phase.start_s)).clamp(0.0, 1.0);
                let lean = LEAN_BACK_DEG + (LEAN_FWD_DEG - LEAN_BACK_DEG) * u;
                let hand = lerp3(rest_right_hand(z), raised_right_hand(z), u);
                template(lean, hand, z)
            }
            PhasePlan::Arcs(arcs) => {
                let hand = arcs
                    .iter()
                    .find(|a| t < a.t1)
                    .or(arcs.last())
                    .map(|a| a.eval(t))
                    .unwrap_or_else(|| raised_right_hand(z));
                template(LEAN_FWD_DEG, hand, z)
            }
        }
    }

    /// Pose at time `t` inside phase `index`, eased from the carried pose
    /// for the first [`EASE_S`] seconds.
    fn pose_at(&self, schedule: &PhaseSchedule, index: usize, t: f64) -> Pose {
        let phase = &schedule.phases[index];
        let (plan, carry) = &self.plans[index];
        let base = Self::template_pose(plan, phase, t, self.z);
        let into = t - phase.start_s;
        if into >= EASE_S {
            return base;
        }
        let s = smoothstep(into / EASE_S);
        let mut pose = [[0.0; 3]; 10];
        for j in 0..10 {
            pose[j] = lerp3(carry[j], base[j], s);
        }
        pose
    }
}

fn quantize(v: f64, steps_per_unit: f64) -> f64 {
    (v * steps_per_unit).round() / steps_per_unit
}

const POSITION_STEPS: f64 = 1e4;
const TIMESTAMP_STEPS: f64 = 1e6;

/// Synthesizes one game pass for `participant` (0 or 1): positions
/// quantized to 0.1 mm, timestamps to 1 microsecond, labels copied from
/// the schedule truth. Deterministic in (schedule, participant,
/// config.seed).
pub fn synthesize_stream(
    schedule: &PhaseSchedule,
    participant: usize,
    config: &GameConfig,
) -> Result<SkeletonStream, SimError> {
    config.validate()?;
    if participant > 1 {
        return Err(SimError::UnknownParticipant(participant));
    }
    let stream_seed = mix_seed(config.seed, participant as u64 + 1);
    let mut arc_rng = ChaCha8Rng::seed_from_u64(mix_seed(stream_seed, 0xa7c5));
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(mix_seed(stream_seed, 0x11f7));
    let jitter = Normal::new(0.0, config.noise_sigma_m).map_err(|e| {
        SimError::InvalidConfig(format!("noise_sigma_m {} rejected: {e}", config.noise_sigma_m))
    })?;

    let z = config.screen_distance_m;
    let script = MotionScript::new(schedule, participant, z, &mut arc_rng);
    let breath_phase = participant as f64 * 1.3;

    let id = format!("p{}", participant + 1);
    let mut stream = SkeletonStream::new(id.clone(), config.frame_rate);
    let frame_count = (schedule.total_s * config.frame_rate).round() as usize;
    let mut labels = Vec::with_capacity(frame_count);
    let mut phase_index = 0usize;

    for k in 0..frame_count {
        let t = k as f64 / config.frame_rate;
        while phase_index + 1 < schedule.phases.len()
            && t >= schedule.phases[phase_index].end_s
        {
            phase_index += 1;
        }
        let phase = &schedule.phases[phase_index];
        labels.push(phase.truth[participant]);

        let mut pose = script.pose_at(schedule, phase_index, t);
        let torso = JointName::Torso as usize;
        pose[torso][2] +=
            BREATH_AMPLITUDE_M * (std::f64::consts::TAU * BREATH_HZ * t + breath_phase).sin();
        if config.noise_sigma_m > 0.0 {
            for p in pose.iter_mut() {
                for coord in p.iter_mut() {
                    *coord += jitter.sample(&mut jitter_rng);
                }
            }
        }

        let joints = JointName::ALL
            .iter()
            .zip(pose.iter())
            .map(|(&name, p)| {
                Joint::new(
                    name,
                    [
                        quantize(p[0], POSITION_STEPS),
                        quantize(p[1], POSITION_STEPS),
                        quantize(p[2], POSITION_STEPS),
                    ],
                )
            })
            .collect();
        stream
            .frames
            .push(SkeletonFrame::new(id.clone(), quantize(t, TIMESTAMP_STEPS), joints));
    }
    stream.labels = Some(LabelTrack {
        mode: StateMode::ThreeState,
        values: labels,
    });
    Ok(stream)
}

/// A noise-free-motion upright sitter (straight back, hands at rest) for
/// latency replays and idle-baseline tests; sensor jitter still applies
/// per `config.noise_sigma_m`.
pub fn synthesize_idle_stream(duration_s: f64, config: &GameConfig) -> Result<SkeletonStream, SimError> {
    config.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(SimError::InvalidConfig(format!(
            "duration_s must be positive, got {duration_s}"
        )));
    }
    let z = config.screen_distance_m;
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x1d7e));
    let jitter = Normal::new(0.0, config.noise_sigma_m).map_err(|e| {
        SimError::InvalidConfig(format!("noise_sigma_m {} rejected: {e}", config.noise_sigma_m))
    })?;

    let id = "idle".to_string();
    let mut stream = SkeletonStream::new(id.clone(), config.frame_rate);
    let frame_count = (duration_s * config.frame_rate).round() as usize;
    for k in 0..frame_count {
        let t = k as f64 / config.frame_rate;
        let mut pose = template(0.0, rest_right_hand(z), z);
        let torso = JointName::Torso as usize;
        pose[torso][2] += BREATH_AMPLITUDE_M * (std::f64::consts::TAU * BREATH_HZ * t).sin();
        if config.noise_sigma_m > 0.0 {
            for p in pose.iter_mut() {
                for coord in p.iter_mut() {
                    *coord += jitter.sample(&mut jitter_rng);
                }
            }
        }
        let joints = JointName::ALL
            .iter()
            .zip(pose.iter())
            .map(|(&name, p)| {
                Joint::new(
                    name,
                    [
                        quantize(p[0], POSITION_STEPS),
                        quantize(p[1], POSITION_STEPS),
                        quantize(p[2], POSITION_STEPS),
                    ],
                )
            })
            .collect();
        stream
            .frames
            .push(SkeletonFrame::new(id.clone(), quantize(t, TIMESTAMP_STEPS), joints));
    }
    Ok(stream)
}

/// Sizing of the generated corpus and its split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetParams {
    /// Participant pairs; each yields two streams.
    pub pairs: usize,
    /// Labeled frames kept in the corpus after the seeded trim.
    pub corpus_frames: usize,
    /// Corpus frames used for training; the rest test.
    pub train_frames: usize,
    /// Feature window the split must respect: only frames with a full
    /// trailing window are eligible.
    pub window_frames: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            pairs: 3,
            corpus_frames: 2321,
            train_frames: 500,
            window_frames: 10,
        }
    }
}

impl DatasetParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.pairs < 1 {
            return bad("pairs must be at least 1".into());
        }
        if self.window_frames < 2 {
            return bad(format!("window_frames ({}) must be >= 2", self.window_frames));
        }
        if self.train_frames < 1 || self.train_frames >= self.corpus_frames {
            return bad(format!(
                "train_frames ({}) must be >= 1 and below corpus_frames ({})",
                self.train_frames, self.corpus_frames
            ));
        }
        Ok(())
    }
}

/// One stream the manifest knows about.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestStream {
    pub id: String,
    /// Path relative to the manifest's own directory.
    pub path: String,
    pub frames: usize,
}

/// A frame reference: stream id plus frame index within that stream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SplitEntry {
    pub stream: String,
    pub frame: usize,
}

/// The train/test split over the generated streams.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub window_frames: usize,
    pub streams: Vec<ManifestStream>,
    pub train: Vec<SplitEntry>,
    pub test: Vec<SplitEntry>,
}

pub const MANIFEST_MAGIC: &str = "engage-manifest";
pub const MANIFEST_VERSION: u32 = 1;

impl SplitManifest {
    pub fn to_string_repr(&self) -> String {
        let mut out = format!("{MANIFEST_MAGIC} {MANIFEST_VERSION}\n");
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("window {}\n", self.window_frames));
        out.push_str(&format!("corpus {}\n", self.train.len() + self.test.len()));
        out.push_str(&format!("train_count {}\n", self.train.len()));
        for s in &self.streams {
            out.push_str(&format!("stream {} {} {}\n", s.id, s.path, s.frames));
        }
        for e in &self.train {
            out.push_str(&format!("train {} {}\n", e.stream, e.frame));
        }
        for e in &self.test {
            out.push_str(&format!("test {} {}\n", e.stream, e.frame));
        }
        out
    }

    pub fn parse(text: &str) -> Result<SplitManifest, SimError> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, reason: String| SimError::ManifestFormat { line, reason };
        let (_, header) = lines
            .next()
            .ok_or_else(|| bad(1, "empty manifest".into()))?;
        if header != format!("{MANIFEST_MAGIC} {MANIFEST_VERSION}") {
            return Err(bad(1, format!("unrecognized header {header:?}")));
        }
        let mut seed = None;
        let mut window = None;
        let mut corpus = None;
        let mut train_count = None;
        let mut streams = Vec::new();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = trimmed.split_whitespace().collect();
            let parse_usize = |t: &str, what: &str| -> Result<usize, SimError> {
                t.parse()
                    .map_err(|_| bad(line, format!("cannot parse {what} from {t:?}")))
            };
            match tokens[0] {
                "seed" if tokens.len() == 2 => {
                    seed = Some(
                        tokens[1]
                            .parse()
                            .map_err(|_| bad(line, format!("bad seed {:?}", tokens[1])))?,
                    )
                }
                "window" if tokens.len() == 2 => {
                    window = Some(parse_usize(tokens[1], "window")?)
                }
                "corpus" if tokens.len() == 2 => {
                    corpus = Some(parse_usize(tokens[1], "corpus")?)
                }
                "train_count" if tokens.len() == 2 => {
                    train_count = Some(parse_usize(tokens[1], "train_count")?)
                }
                "stream" if tokens.len() == 4 => streams.push(ManifestStream {
                    id: tokens[1].to_string(),
                    path: tokens[2].to_string(),
                    frames: parse_usize(tokens[3], "frame count")?,
                }),
                "train" if tokens.len() == 3 => train.push(SplitEntry {
                    stream: tokens[1].to_string(),
                    frame: parse_usize(tokens[2], "frame index")?,
                }),
                "test" if tokens.len() == 3 => test.push(SplitEntry {
                    stream: tokens[1].to_string(),
                    frame: parse_usize(tokens[2], "frame index")?,
                }),
                other => return Err(bad(line, format!("unrecognized row {other:?}"))),
            }
        }
        let manifest = SplitManifest {
            seed: seed.ok_or_else(|| bad(0, "missing seed row".into()))?,
            window_frames: window.ok_or_else(|| bad(0, "missing window row".into()))?,
            streams,
            train,
            test,
        };
        let corpus = corpus.ok_or_else(|| bad(0, "missing corpus row".into()))?;
        let train_count = train_count.ok_or_else(|| bad(0, "missing train_count row".into()))?;
        if manifest.train.len() != train_count
            || manifest.train.len() + manifest.test.len() != corpus
        {
            return Err(bad(
                0,
                format!(
                    "split rows ({} train, {} test) disagree with declared sizes \
                     (corpus {corpus}, train_count {train_count})",
                    manifest.train.len(),
                    manifest.test.len()
                ),
            ));
        }
        manifest.check_entries()?;
        Ok(manifest)
    }

    fn check_entries(&self) -> Result<(), SimError> {
        let bad = |reason: String| SimError::ManifestFormat { line: 0, reason };
        for entry in self.train.iter().chain(&self.test) {
            let stream = self
                .streams
                .iter()
                .find(|s| s.id == entry.stream)
                .ok_or_else(|| bad(format!("split references unknown stream {:?}", entry.stream)))?;
            if entry.frame >= stream.frames {
                return Err(bad(format!(
                    "frame {} out of range for stream {} ({} frames)",
                    entry.frame, entry.stream, stream.frames
                )));
            }
            if entry.frame + 1 < self.window_frames {
                return Err(bad(format!(
                    "frame {} of stream {} has no full {}-frame window",
                    entry.frame, entry.stream, self.window_frames
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        fs::write(path, self.to_string_repr())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SplitManifest, SimError> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Generates the full corpus: `pairs` participant pairs each playing
/// `config.games` games (concatenated into one stream per participant),
/// written under `out_dir/streams/`, plus a seeded train/test split over
/// all window-eligible frames, trimmed to `corpus_frames`.
pub fn generate_dataset(
    config: &GameConfig,
    params: &DatasetParams,
    out_dir: &Path,
) -> Result<SplitManifest, SimError> {
    config.validate()?;
    params.validate()?;
    let schedule = build_schedule(config)?;
    let streams_dir = out_dir.join("streams");
    fs::create_dir_all(&streams_dir)?;

    let mut streams = Vec::new();
    for pair in 0..params.pairs {
        for participant in 0..2 {
            let id = format!("pair{pair}_p{}", participant + 1);
            let mut merged = SkeletonStream::new(id.clone(), config.frame_rate);
            let mut labels = Vec::new();
            for game in 0..config.games {
                let game_config = GameConfig {
                    seed: mix_seed(config.seed, ((pair as u64) << 32) | (game as u64 + 1)),
                    ..config.clone()
                };
                let pass = synthesize_stream(&schedule, participant, &game_config)?;
                let offset = game as f64 * schedule.total_s;
                for mut frame in pass.frames {
                    frame.timestamp = quantize(frame.timestamp + offset, TIMESTAMP_STEPS);
                    frame.participant_id = id.clone();
                    merged.frames.push(frame);
                }
                labels.extend(pass.labels.expect("synthesized streams carry labels").values);
            }
            merged.labels = Some(LabelTrack {
                mode: StateMode::ThreeState,
                values: labels,
            });
            let file = streams_dir.join(format!("{id}.stream"));
            write_stream_file(&merged, &file)?;
            streams.push(ManifestStream {
                id,
                path: format!("streams/{}", file.file_name().unwrap().to_string_lossy()),
                frames: merged.frames.len(),
            });
        }
    }

    let mut eligible: Vec<SplitEntry> = Vec::new();
    for s in &streams {
        for frame in (params.window_frames - 1)..s.frames {
            eligible.push(SplitEntry {
                stream: s.id.clone(),
                frame,
            });
        }
    }
    if eligible.len() < params.corpus_frames {
        return Err(SimError::CorpusTooSmall {
            requested: params.corpus_frames,
            available: eligible.len(),
        });
    }
    let mut split_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x534c_4954));
    eligible.shuffle(&mut split_rng);
    let mut train: Vec<SplitEntry> = eligible[..params.train_frames].to_vec();
    let mut test: Vec<SplitEntry> = eligible[params.train_frames..params.corpus_frames].to_vec();
    train.sort();
    test.sort();

    let manifest = SplitManifest {
        seed: config.seed,
        window_frames: params.window_frames,
        streams,
        train,
        test,
    };
    manifest.save(&out_dir.join("manifest.txt"))?;
    Ok(manifest)
}

/// Resolves a manifest stream path against the manifest's directory.
pub fn manifest_stream_path(manifest_dir: &Path, stream: &ManifestStream) -> PathBuf {
    manifest_dir.join(&stream.path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{evaluate_classifiers, compute_measures, ClassifierThresholds, FeatureBit};
    use crate::stream_io::stream_to_string;
    use approx::assert_relative_eq;

    fn small_config() -> GameConfig {
        GameConfig {
            countdown_s: 2.0,
            play_s: 3.0,
            switch_s: 3.0,
            switches: 2,
            games: 1,
            frame_rate: 30.0,
            seed: 7,
            noise_sigma_m: 0.0,
            screen_distance_m: 2.5,
        }
    }

    #[test]
    fn default_schedule_runs_410_seconds() {
        let schedule = build_schedule(&GameConfig::default()).unwrap();
        assert_relative_eq!(schedule.total_s, 410.0);
        assert_eq!(schedule.phases.len(), 41);
        assert_relative_eq!(schedule.phases.last().unwrap().end_s, 410.0);
        let frames = (schedule.total_s * 30.0).round() as usize;
        assert_eq!(frames, 12300);
    }

    #[test]
    fn single_switch_layout_matches_the_smallest_case() {
        let config = GameConfig {
            switches: 1,
            ..GameConfig::default()
        };
        let schedule = build_schedule(&config).unwrap();
        assert_eq!(schedule.phases.len(), 3);
        assert_eq!(schedule.phases[0].kind, PhaseKind::Countdown);
        assert_relative_eq!(schedule.phases[0].end_s, 10.0);
        assert_eq!(schedule.phases[1].kind, PhaseKind::Switch { next: 0 });
        assert_relative_eq!(schedule.phases[1].start_s, 10.0);
        assert_relative_eq!(schedule.phases[1].end_s, 20.0);
        assert_eq!(schedule.phases[2].kind, PhaseKind::Play { active: 0 });
        assert_relative_eq!(schedule.phases[2].end_s, 30.0);
    }

    #[test]
    fn phases_are_contiguous_and_alternate_the_active_participant() {
        let schedule = build_schedule(&GameConfig::default()).unwrap();
        for pair in schedule.phases.windows(2) {
            assert_relative_eq!(pair[0].end_s, pair[1].start_s);
        }
        assert_relative_eq!(schedule.phases[0].start_s, 0.0);
        let actives: Vec<usize> = schedule
            .phases
            .iter()
            .filter_map(|p| match p.kind {
                PhaseKind::Play { active } => Some(active),
                _ => None,
            })
            .collect();
        assert_eq!(actives.len(), 20);
        for (k, active) in actives.iter().enumerate() {
            assert_eq!(*active, k % 2);
        }
    }

    #[test]
    fn exactly_one_participant_is_engaged_after_countdown() {
        let schedule = build_schedule(&GameConfig::default()).unwrap();
        for phase in &schedule.phases {
            let engaged = phase
                .truth
                .iter()
                .filter(|s| **s != EngagementState::Disengagement)
                .count();
            match phase.kind {
                PhaseKind::Countdown => assert_eq!(engaged, 0),
                _ => assert_eq!(engaged, 1),
            }
        }
    }

    #[test]
    fn stream_has_one_label_per_frame_and_valid_structure() {
        let config = small_config();
        let schedule = build_schedule(&config).unwrap();
        let stream = synthesize_stream(&schedule, 0, &config).unwrap();
        let expected = (schedule.total_s * config.frame_rate).round() as usize;
        assert_eq!(stream.frames.len(), expected);
        assert_eq!(stream.labels.as_ref().unwrap().values.len(), expected);
        stream.validate().unwrap();
        assert!(matches!(
            synthesize_stream(&schedule, 2, &config),
            Err(SimError::UnknownParticipant(2))
        ));
    }

    #[test]
    fn same_seed_reproduces_the_stream_byte_for_byte() {
        let config = GameConfig {
            noise_sigma_m: 0.007,
            ..small_config()
        };
        let schedule = build_schedule(&config).unwrap();
        let a = synthesize_stream(&schedule, 1, &config).unwrap();
        let b = synthesize_stream(&schedule, 1, &config).unwrap();
        assert_eq!(stream_to_string(&a).unwrap(), stream_to_string(&b).unwrap());

        let other_seed = GameConfig {
            seed: config.seed + 1,
            ..config.clone()
        };
        let c = synthesize_stream(&schedule, 1, &other_seed).unwrap();
        assert_ne!(stream_to_string(&a).unwrap(), stream_to_string(&c).unwrap());
    }

    /// Bits of the window ending at `frame` against default thresholds.
    fn bits_at(stream: &SkeletonStream, frame: usize) -> crate::features::FeatureVector {
        let thresholds = ClassifierThresholds::default();
        let w = thresholds.window_frames;
        let measures =
            compute_measures(&stream.frames[frame + 1 - w..=frame], &thresholds).unwrap();
        evaluate_classifiers(&measures, &thresholds)
    }

    #[test]
    fn noiseless_disengagement_sits_in_the_documented_bands() {
        let config = small_config();
        let schedule = build_schedule(&config).unwrap();
        let stream = synthesize_stream(&schedule, 1, &config).unwrap();
        // Participant 1 idles through countdown and participant 0's
        // first cycle: sample inside the countdown, clear of the window.
        let v = bits_at(&stream, 45);
        assert!(v.get(FeatureBit::LeanBackward));
        assert!(v.get(FeatureBit::HandRest));
        assert!(v.get(FeatureBit::HandSpeedNearZero));
        assert!(v.get(FeatureBit::MotionStill));
        assert!(v.get(FeatureBit::FacingScreen));
    }

    #[test]
    fn noiseless_switch_midpoint_shows_the_ramp() {
        let config = small_config();
        let schedule = build_schedule(&config).unwrap();
        let stream = synthesize_stream(&schedule, 0, &config).unwrap();
        // Switch phase for participant 0 spans [2, 5): midpoint 3.5 s.
        let mid = (3.5 * config.frame_rate) as usize;
        let v = bits_at(&stream, mid);
        assert!(v.get(FeatureBit::LeanUpright), "ramp passes through upright");
        assert!(v.get(FeatureBit::HandMid), "hand is between hip and shoulder");
        assert!(
            !v.get(FeatureBit::HandSpeedNearZero),
            "rising hand moves above the noise floor"
        );
    }

    #[test]
    fn noiseless_play_leans_forward_with_a_moving_raised_hand() {
        let config = small_config();
        let schedule = build_schedule(&config).unwrap();
        let stream = synthesize_stream(&schedule, 0, &config).unwrap();
        // Play phase for participant 0 spans [5, 8): sample past the ease.
        for &t in &[6.5f64, 7.0, 7.5] {
            let v = bits_at(&stream, (t * config.frame_rate) as usize);
            assert!(v.get(FeatureBit::LeanForward), "t={t}");
            assert!(!v.get(FeatureBit::HandSpeedNearZero), "t={t}");
            assert!(!v.get(FeatureBit::HandRest), "t={t}");
            assert!(!v.get(FeatureBit::MotionStill), "t={t}");
        }
    }

    #[test]
    fn play_hand_speed_stays_in_the_configured_band() {
        let config = small_config();
        let schedule = build_schedule(&config).unwrap();
        let stream = synthesize_stream(&schedule, 0, &config).unwrap();
        let thresholds = ClassifierThresholds::default();
        let w = thresholds.window_frames;
        // Interior of the play phase [5, 8).
        for frame in (5.5 * config.frame_rate) as usize..(7.8 * config.frame_rate) as usize {
            let m = compute_measures(&stream.frames[frame + 1 - w..=frame], &thresholds).unwrap();
            assert!(
                m.max_hand_speed_m_s > 0.05 && m.max_hand_speed_m_s < 2.0,
                "frame {frame}: speed {}",
                m.max_hand_speed_m_s
            );
        }
    }

    #[test]
    fn idle_stream_is_upright_still_and_valid() {
        let config = GameConfig {
            noise_sigma_m: 0.0,
            ..small_config()
        };
        let stream = synthesize_idle_stream(3.0, &config).unwrap();
        assert_eq!(stream.frames.len(), 90);
        stream.validate().unwrap();
        let v = bits_at(&stream, 45);
        assert!(v.get(FeatureBit::LeanUpright));
        assert!(v.get(FeatureBit::HandRest));
        assert!(v.get(FeatureBit::MotionStill));
    }

    #[test]
    fn dataset_split_counts_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config();
        // One 14-second game: 2 streams x 420 frames, 411 eligible each.
        let params = DatasetParams {
            pairs: 1,
            corpus_frames: 200,
            train_frames: 50,
            window_frames: 10,
        };
        let manifest = generate_dataset(&config, &params, dir.path()).unwrap();
        assert_eq!(manifest.streams.len(), 2);
        assert_eq!(manifest.train.len(), 50);
        assert_eq!(manifest.test.len(), 150);
        for s in &manifest.streams {
            assert_eq!(s.frames, 420);
            assert!(manifest_stream_path(dir.path(), s).exists());
        }
        for e in manifest.train.iter().chain(&manifest.test) {
            assert!(e.frame >= 9 && e.frame < 420);
        }
        let train_set: std::collections::BTreeSet<_> = manifest.train.iter().collect();
        let test_set: std::collections::BTreeSet<_> = manifest.test.iter().collect();
        assert!(train_set.is_disjoint(&test_set));

        let dir2 = tempfile::tempdir().unwrap();
        let again = generate_dataset(&config, &params, dir2.path()).unwrap();
        assert_eq!(manifest, again);
        let a = fs::read(dir.path().join("manifest.txt")).unwrap();
        let b = fs::read(dir2.path().join("manifest.txt")).unwrap();
        assert_eq!(a, b);
        let a = fs::read(manifest_stream_path(dir.path(), &manifest.streams[0])).unwrap();
        let b = fs::read(manifest_stream_path(dir2.path(), &again.streams[0])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_corpus_request_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let params = DatasetParams {
            pairs: 1,
            corpus_frames: 5000,
            train_frames: 100,
            window_frames: 10,
        };
        assert!(matches!(
            generate_dataset(&small_config(), &params, dir.path()),
            Err(SimError::CorpusTooSmall { requested: 5000, available: 822 })
        ));
    }

    #[test]
    fn manifest_round_trips_and_rejects_bad_entries() {
        let dir = tempfile::tempdir().unwrap();
        let params = DatasetParams {
            pairs: 1,
            corpus_frames: 40,
            train_frames: 10,
            window_frames: 10,
        };
        let manifest = generate_dataset(&small_config(), &params, dir.path()).unwrap();
        let text = manifest.to_string_repr();
        assert_eq!(SplitManifest::parse(&text).unwrap(), manifest);

        assert!(SplitManifest::parse("engage-manifest 2\n").is_err());
        let forged = text.replace("train pair0_p1", "train ghost");
        if forged != text {
            assert!(SplitManifest::parse(&forged).is_err());
        }
    }
}
