//! Versioned text format for trained models.
//!
//! Layout (version 1), line oriented, `\n` separated:
//!
//! ```text
//! engage-svm 1
//! fingerprint <u64>
//! classes <k>
//! class <state value>
//! bias <f64>
//! weights 16 <w0> .. <w15>
//! alphas <n> <a0> .. <a{n-1}>
//! support <m> <i0> .. <i{m-1}>
//! meta c <f64> tol <f64> max_passes <n> max_iterations <n> seed <u64> samples <n>
//! ..repeated per class..
//! checksum <fnv1a64 of every preceding byte, 16 hex digits>
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! parse of the file reproduces every field bit for bit.

use std::fs;
use std::path::Path;

use super::smo::{BinaryModel, TrainMeta, TrainParams};
use super::{MulticlassModel, SvmError};
use crate::features::FEATURE_COUNT;
use crate::fnv1a64;
use crate::state::EngagementState;

pub const MODEL_MAGIC: &str = "engage-svm";
pub const MODEL_VERSION: u32 = 1;

/// Renders `model` in the version 1 file format.
pub fn serialize_model(model: &MulticlassModel) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(&format!("{MODEL_MAGIC} {MODEL_VERSION}\n"));
    out.push_str(&format!("fingerprint {}\n", model.thresholds_fingerprint));
    out.push_str(&format!("classes {}\n", model.class_labels.len()));
    for (label, binary) in model.class_labels.iter().zip(&model.binaries) {
        out.push_str(&format!("class {}\n", label.value()));
        out.push_str(&format!("bias {}\n", binary.bias));
        out.push_str(&format!("weights {}", binary.weights.len()));
        for w in &binary.weights {
            out.push_str(&format!(" {w}"));
        }
        out.push('\n');
        out.push_str(&format!("alphas {}", binary.alphas.len()));
        for a in &binary.alphas {
            out.push_str(&format!(" {a}"));
        }
        out.push('\n');
        out.push_str(&format!("support {}", binary.support_indices.len()));
        for i in &binary.support_indices {
            out.push_str(&format!(" {i}"));
        }
        out.push('\n');
        let p = &binary.train_meta.params;
        out.push_str(&format!(
            "meta c {} tol {} max_passes {} max_iterations {} seed {} samples {}\n",
            p.c, p.tol, p.max_passes, p.max_iterations, p.seed, binary.train_meta.samples
        ));
    }
    out.push_str(&format!("checksum {:016x}\n", fnv1a64(out.as_bytes())));
    out.into_bytes()
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    number: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), SvmError> {
        self.number += 1;
        match self.inner.next() {
            Some(line) => Ok((self.number, line)),
            None => Err(SvmError::ModelFormat {
                line: self.number,
                reason: "file ends early".into(),
            }),
        }
    }
}

fn field<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T, SvmError> {
    token.parse().map_err(|_| SvmError::ModelFormat {
        line,
        reason: format!("cannot parse {what} from {token:?}"),
    })
}

/// Expects `keyword <count> <count values...>` and returns the values.
fn counted_row<T: std::str::FromStr>(
    lines: &mut Lines,
    keyword: &str,
) -> Result<Vec<T>, SvmError> {
    let (number, line) = lines.next()?;
    let mut tokens = line.split_whitespace();
    let head = tokens.next().unwrap_or("");
    if head != keyword {
        return Err(SvmError::ModelFormat {
            line: number,
            reason: format!("expected {keyword} row, got {head:?}"),
        });
    }
    let count: usize = field(number, tokens.next().unwrap_or(""), "count")?;
    let values: Vec<T> = tokens
        .map(|t| field(number, t, keyword))
        .collect::<Result<_, _>>()?;
    if values.len() != count {
        return Err(SvmError::ModelFormat {
            line: number,
            reason: format!("{keyword} row announces {count} values, carries {}", values.len()),
        });
    }
    Ok(values)
}

/// Parses a version 1 model file, verifying the trailing checksum first.
pub fn deserialize_model(bytes: &[u8]) -> Result<MulticlassModel, SvmError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SvmError::ModelFormat {
        line: 0,
        reason: format!("not utf-8: {e}"),
    })?;

    if !text.ends_with('\n') {
        return Err(SvmError::ModelFormat {
            line: 0,
            reason: "file does not end with a newline".into(),
        });
    }
    let tail_at = text.rfind("checksum ").ok_or(SvmError::ModelFormat {
        line: 0,
        reason: "no checksum line".into(),
    })?;
    if tail_at != 0 && &text[tail_at - 1..tail_at] != "\n" {
        return Err(SvmError::ModelFormat {
            line: 0,
            reason: "checksum marker is not at line start".into(),
        });
    }
    let (body, tail) = text.split_at(tail_at);
    let stored_hex = tail
        .strip_prefix("checksum ")
        .expect("split at checksum marker")
        .trim_end();
    let stored = u64::from_str_radix(stored_hex, 16).map_err(|_| SvmError::ModelFormat {
        line: 0,
        reason: format!("unreadable checksum {stored_hex:?}"),
    })?;
    let computed = fnv1a64(body.as_bytes());
    if stored != computed {
        return Err(SvmError::ChecksumMismatch { stored, computed });
    }

    let mut lines = Lines {
        inner: body.lines(),
        number: 0,
    };
    let (number, header) = lines.next()?;
    if header != format!("{MODEL_MAGIC} {MODEL_VERSION}") {
        let _ = number;
        return Err(SvmError::VersionMismatch {
            expected: MODEL_VERSION,
            found: header.to_string(),
        });
    }

    let (number, line) = lines.next()?;
    let fingerprint: u64 = match line.strip_prefix("fingerprint ") {
        Some(rest) => field(number, rest, "fingerprint")?,
        None => {
            return Err(SvmError::ModelFormat {
                line: number,
                reason: "expected fingerprint row".into(),
            })
        }
    };

    let (number, line) = lines.next()?;
    let class_count: usize = match line.strip_prefix("classes ") {
        Some(rest) => field(number, rest, "class count")?,
        None => {
            return Err(SvmError::ModelFormat {
                line: number,
                reason: "expected classes row".into(),
            })
        }
    };

    let mut class_labels = Vec::with_capacity(class_count);
    let mut binaries = Vec::with_capacity(class_count);
    for _ in 0..class_count {
        let (number, line) = lines.next()?;
        let value: u8 = match line.strip_prefix("class ") {
            Some(rest) => field(number, rest, "class value")?,
            None => {
                return Err(SvmError::ModelFormat {
                    line: number,
                    reason: "expected class row".into(),
                })
            }
        };
        let label = EngagementState::from_value(value).ok_or(SvmError::ModelFormat {
            line: number,
            reason: format!("class value {value} outside 1..=6"),
        })?;

        let (number, line) = lines.next()?;
        let bias: f64 = match line.strip_prefix("bias ") {
            Some(rest) => field(number, rest, "bias")?,
            None => {
                return Err(SvmError::ModelFormat {
                    line: number,
                    reason: "expected bias row".into(),
                })
            }
        };

        let weight_values: Vec<f64> = counted_row(&mut lines, "weights")?;
        let weights: [f64; FEATURE_COUNT] =
            weight_values
                .try_into()
                .map_err(|v: Vec<f64>| SvmError::ModelFormat {
                    line: lines.number,
                    reason: format!("expected {FEATURE_COUNT} weights, got {}", v.len()),
                })?;
        let alphas: Vec<f64> = counted_row(&mut lines, "alphas")?;
        let support_indices: Vec<usize> = counted_row(&mut lines, "support")?;

        let (number, line) = lines.next()?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 13
            || tokens[0] != "meta"
            || [tokens[1], tokens[3], tokens[5], tokens[7], tokens[9], tokens[11]]
                != ["c", "tol", "max_passes", "max_iterations", "seed", "samples"]
        {
            return Err(SvmError::ModelFormat {
                line: number,
                reason: format!("malformed meta row {line:?}"),
            });
        }
        let train_meta = TrainMeta {
            params: TrainParams {
                c: field(number, tokens[2], "c")?,
                tol: field(number, tokens[4], "tol")?,
                max_passes: field(number, tokens[6], "max_passes")?,
                max_iterations: field(number, tokens[8], "max_iterations")?,
                seed: field(number, tokens[10], "seed")?,
            },
            samples: field(number, tokens[12], "samples")?,
        };

        class_labels.push(label);
        binaries.push(BinaryModel {
            weights,
            bias,
            alphas,
            support_indices,
            train_meta,
        });
    }

    let model = MulticlassModel {
        class_labels,
        binaries,
        thresholds_fingerprint: fingerprint,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model_file(model: &MulticlassModel, path: &Path) -> Result<(), SvmError> {
    fs::write(path, serialize_model(model))?;
    Ok(())
}

pub fn load_model_file(path: &Path) -> Result<MulticlassModel, SvmError> {
    deserialize_model(&fs::read(path)?)
}
