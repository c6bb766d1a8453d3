//! Core library of the engagement framework: skeleton-stream ingestion,
//! the binary classifier bank, linear SVM training, per-frame engagement
//! classification, team aggregation, a deterministic game simulator, and
//! evaluation utilities.
//!
//! The intended flow mirrors a desk-scale capture setup:
//!
//! 1. parse or synthesize a [`skeleton::SkeletonStream`],
//! 2. turn it into 16-bit feature vectors with [`features::feature_sequence`],
//! 3. train or load a [`svm::MulticlassModel`],
//! 4. run [`pipeline::process_stream`] for per-frame engagement states,
//! 5. fold several participants into [`team::TeamSnapshot`]s.

pub mod eval;
pub mod features;
pub mod pipeline;
pub mod simulator;
pub mod skeleton;
pub mod state;
pub mod stream_io;
pub mod svm;
pub mod team;

pub use eval::{
    bench_stream, evaluate_manifest, latency_summary, summary_to_json, summary_to_text,
    BenchReport, ConfusionMatrix, EvalError, EvaluationReport, EvaluationSummary, LatencySummary,
    ScoringMode,
};
pub use features::{
    evaluate_classifiers, feature_sequence, ClassifierThresholds, FeatureBit, FeatureError,
    FeatureFrame, FeatureVector, WindowMeasures, FEATURE_COUNT,
};
pub use pipeline::{
    apply_action_override, process_stream, read_results_file, smooth_states, write_results_file,
    FrameResult, PipelineConfig, PipelineError,
};
pub use simulator::{
    build_schedule, generate_dataset, synthesize_idle_stream, synthesize_stream, DatasetParams,
    GameConfig, Phase, PhaseKind, PhaseSchedule, SimError, SplitEntry, SplitManifest,
};
pub use skeleton::{
    body_centered, validate_frame, FrameViolation, Joint, JointName, LabelTrack, SkeletonFrame,
    SkeletonStream, JOINT_COUNT,
};
pub use state::{EngagementState, StateMode};
pub use stream_io::{
    parse_stream, read_stream_file, stream_to_string, write_stream_file, ParseWarning,
    ParsedStream, StreamError,
};
pub use svm::{train_multiclass, BinaryModel, MulticlassModel, SvmError, TrainParams};
pub use team::{aggregate, align_streams, write_snapshots_file, TeamError, TeamSnapshot};

/// FNV-1a 64-bit hash, used for threshold fingerprints and file checksums.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
