//! Line-delimited stream file format.
//!
//! A stream file is UTF-8 text. The first line is the header:
//!
//! ```text
//! engage-stream 1 <participant_id> <frame_rate> [labels=<three_state|six_state>]
//! ```
//!
//! Every following non-empty line is one frame, fields separated by single
//! spaces, joints in canonical order when written (any order is accepted
//! when read):
//!
//! ```text
//! <timestamp> head <x> <y> <z> shoulder_left <x> <y> <z> ... hip_right <x> <y> <z> [<label>]
//! ```
//!
//! The trailing label integer (1-6) is present exactly when the header
//! declares a label set. Numbers are decimal; floats are written in the
//! shortest form that parses back to the identical value, so a
//! write-then-read round trip is field-exact. Lower-body joints
//! (knee/ankle/foot) are skipped with a warning rather than an error.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::skeleton::{
    validate_frame, FrameViolation, Joint, JointName, LabelTrack, SkeletonFrame, SkeletonStream,
    LOWER_BODY_JOINTS,
};
use crate::state::{EngagementState, StateMode};

pub const STREAM_MAGIC: &str = "engage-stream";
pub const STREAM_VERSION: u32 = 1;

/// Errors raised while reading or writing stream files.
#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: missing joint: {joint}")]
    MissingJoint { line: usize, joint: JointName },
    #[error("line {line}: timestamp {current} not after {previous}")]
    NonMonotonicTimestamp {
        line: usize,
        previous: f64,
        current: f64,
    },
    #[error("line {line}: {reason}")]
    LabelMismatch { line: usize, reason: String },
    #[error("unsupported stream version {found} (supported: {STREAM_VERSION})")]
    VersionMismatch { found: String },
    #[error("stream is not valid: {0}")]
    InvalidStream(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A non-fatal observation made while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// A parsed stream plus any warnings collected along the way.
#[derive(Debug, Clone)]
pub struct ParsedStream {
    pub stream: SkeletonStream,
    pub warnings: Vec<ParseWarning>,
}

/// Parses a stream file from raw bytes.
pub fn parse_stream(source: &[u8]) -> Result<ParsedStream, StreamError> {
    let text = std::str::from_utf8(source).map_err(|e| StreamError::Malformed {
        line: 0,
        reason: format!("not valid UTF-8: {e}"),
    })?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| StreamError::Malformed {
        line: 1,
        reason: "empty input, expected header".into(),
    })?;
    let (participant_id, frame_rate, label_mode) = parse_header(header)?;

    let mut stream = SkeletonStream::new(participant_id, frame_rate);
    let mut labels = Vec::new();
    let mut warnings = Vec::new();
    let mut prev_ts: Option<f64> = None;

    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (frame, label) = parse_frame_line(raw, line_no, &stream.participant_id, &mut warnings)?;
        match (label_mode, label) {
            (Some(_), Some(state)) => labels.push(state),
            (Some(_), None) => {
                return Err(StreamError::LabelMismatch {
                    line: line_no,
                    reason: "header declares labels but frame has none".into(),
                })
            }
            (None, Some(_)) => {
                return Err(StreamError::LabelMismatch {
                    line: line_no,
                    reason: "frame carries a label but header declares none".into(),
                })
            }
            (None, None) => {}
        }
        if let Some(prev) = prev_ts {
            if frame.timestamp <= prev {
                return Err(StreamError::NonMonotonicTimestamp {
                    line: line_no,
                    previous: prev,
                    current: frame.timestamp,
                });
            }
        }
        prev_ts = Some(frame.timestamp);
        stream.frames.push(frame);
    }

    if let Some(mode) = label_mode {
        stream.labels = Some(LabelTrack {
            mode,
            values: labels,
        });
    }
    stream
        .validate()
        .map_err(StreamError::InvalidStream)?;
    Ok(ParsedStream { stream, warnings })
}

/// Reads and parses a stream file from disk.
pub fn read_stream_file(path: &Path) -> Result<ParsedStream, StreamError> {
    let bytes = fs::read(path)?;
    parse_stream(&bytes)
}

/// Serializes a stream into the file format. The stream must be valid.
pub fn write_stream<W: Write>(stream: &SkeletonStream, mut out: W) -> Result<(), StreamError> {
    stream.validate().map_err(StreamError::InvalidStream)?;
    if stream.participant_id.is_empty() || stream.participant_id.contains(char::is_whitespace) {
        return Err(StreamError::InvalidStream(format!(
            "participant_id {:?} must be non-empty and free of whitespace",
            stream.participant_id
        )));
    }
    match &stream.labels {
        Some(track) => writeln!(
            out,
            "{STREAM_MAGIC} {STREAM_VERSION} {} {} labels={}",
            stream.participant_id,
            stream.frame_rate,
            track.mode.as_str()
        )?,
        None => writeln!(
            out,
            "{STREAM_MAGIC} {STREAM_VERSION} {} {}",
            stream.participant_id, stream.frame_rate
        )?,
    }
    for (i, frame) in stream.frames.iter().enumerate() {
        write!(out, "{}", frame.timestamp)?;
        for name in JointName::ALL {
            let p = frame.position(name).expect("validated frame");
            write!(out, " {} {} {} {}", name, p[0], p[1], p[2])?;
        }
        if let Some(track) = &stream.labels {
            write!(out, " {}", track.values[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Serializes a stream to an in-memory string.
pub fn stream_to_string(stream: &SkeletonStream) -> Result<String, StreamError> {
    let mut buf = Vec::new();
    write_stream(stream, &mut buf)?;
    Ok(String::from_utf8(buf).expect("writer emits UTF-8"))
}

/// Writes a stream file to disk.
pub fn write_stream_file(stream: &SkeletonStream, path: &Path) -> Result<(), StreamError> {
    let mut buf = Vec::new();
    write_stream(stream, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn parse_header(header: &str) -> Result<(String, f64, Option<StateMode>), StreamError> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    let malformed = |reason: String| StreamError::Malformed { line: 1, reason };
    if fields.len() < 4 || fields.len() > 5 {
        return Err(malformed(format!(
            "header needs 4 or 5 fields, got {}",
            fields.len()
        )));
    }
    if fields[0] != STREAM_MAGIC {
        return Err(malformed(format!(
            "expected magic {STREAM_MAGIC:?}, got {:?}",
            fields[0]
        )));
    }
    if fields[1] != STREAM_VERSION.to_string() {
        return Err(StreamError::VersionMismatch {
            found: fields[1].to_string(),
        });
    }
    let participant_id = fields[2].to_string();
    let frame_rate: f64 = fields[3]
        .parse()
        .map_err(|_| malformed(format!("frame_rate {:?} is not a number", fields[3])))?;
    let label_mode = match fields.get(4) {
        None => None,
        Some(field) => {
            let token = field.strip_prefix("labels=").ok_or_else(|| {
                malformed(format!("unexpected header field {field:?}, expected labels=<set>"))
            })?;
            Some(StateMode::parse(token).ok_or_else(|| {
                malformed(format!("unknown label set {token:?}"))
            })?)
        }
    };
    Ok((participant_id, frame_rate, label_mode))
}

fn parse_frame_line(
    raw: &str,
    line_no: usize,
    participant_id: &str,
    warnings: &mut Vec<ParseWarning>,
) -> Result<(SkeletonFrame, Option<EngagementState>), StreamError> {
    let malformed = |reason: String| StreamError::Malformed {
        line: line_no,
        reason,
    };
    let tokens: Vec<&str> = raw.split_whitespace().collect();
    let mut iter = tokens.iter().peekable();

    let ts_token = iter.next().ok_or_else(|| malformed("empty frame line".into()))?;
    let timestamp: f64 = ts_token
        .parse()
        .map_err(|_| malformed(format!("timestamp {ts_token:?} is not a number")))?;

    let mut joints = Vec::with_capacity(JOINT_CAPACITY);
    let mut label = None;
    while let Some(&token) = iter.next() {
        if let Some(name) = JointName::parse(token) {
            let position = take_triple(&mut iter, token, line_no)?;
            if joints.iter().any(|j: &Joint| j.name == name) {
                return Err(malformed(format!("duplicate joint: {name}")));
            }
            joints.push(Joint::new(name, position));
        } else if LOWER_BODY_JOINTS.contains(&token) {
            take_triple(&mut iter, token, line_no)?;
            warnings.push(ParseWarning {
                line: line_no,
                message: format!("lower-body joint {token:?} ignored"),
            });
        } else if iter.peek().is_none() {
            let value: u8 = token
                .parse()
                .map_err(|_| malformed(format!("trailing token {token:?} is not a label")))?;
            label = Some(EngagementState::from_value(value).ok_or_else(|| {
                malformed(format!("label {value} outside 1..=6"))
            })?);
        } else {
            return Err(malformed(format!("unknown joint name {token:?}")));
        }
    }

    let frame = SkeletonFrame::new(participant_id, timestamp, joints);
    for violation in validate_frame(&frame) {
        return Err(match violation {
            FrameViolation::MissingJoint(joint) => StreamError::MissingJoint {
                line: line_no,
                joint,
            },
            other => malformed(other.to_string()),
        });
    }
    Ok((frame, label))
}

const JOINT_CAPACITY: usize = crate::skeleton::JOINT_COUNT;

fn take_triple<'a, I: Iterator<Item = &'a &'a str>>(
    iter: &mut I,
    joint: &str,
    line_no: usize,
) -> Result<[f64; 3], StreamError> {
    let mut position = [0.0; 3];
    for slot in &mut position {
        let token = iter.next().ok_or_else(|| StreamError::Malformed {
            line: line_no,
            reason: format!("joint {joint:?} is missing coordinates"),
        })?;
        *slot = token.parse().map_err(|_| StreamError::Malformed {
            line: line_no,
            reason: format!("coordinate {token:?} of joint {joint:?} is not a number"),
        })?;
    }
    Ok(position)
}
