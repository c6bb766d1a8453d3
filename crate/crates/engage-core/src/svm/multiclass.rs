//! One-vs-rest multiclass wrapper over the binary SMO trainer.

use std::collections::BTreeSet;

use super::smo::{train_binary, BinaryModel, TrainParams};
use super::SvmError;
use crate::features::FeatureVector;
use crate::state::EngagementState;

/// A bank of one-vs-rest binary models, one per engagement state seen in
/// training, plus the fingerprint of the thresholds that produced the
/// training features.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    /// States with a binary model, ascending by numeric value.
    pub class_labels: Vec<EngagementState>,
    /// `binaries[k]` separates `class_labels[k]` from the rest.
    pub binaries: Vec<BinaryModel>,
    /// [`crate::features::ClassifierThresholds::fingerprint`] of the bank
    /// configuration the training features came from.
    pub thresholds_fingerprint: u64,
}

impl MulticlassModel {
    /// Per-class decision values in `class_labels` order.
    pub fn decision_values(&self, x: &FeatureVector) -> Vec<f64> {
        self.binaries.iter().map(|m| m.decision_value(x)).collect()
    }

    /// The argmax state and all per-class decision values. Ties go to the
    /// lower-numbered state.
    pub fn predict(&self, x: &FeatureVector) -> (EngagementState, Vec<f64>) {
        let values = self.decision_values(x);
        let mut best = 0usize;
        for (k, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = k;
            }
        }
        (self.class_labels[best], values)
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if self.class_labels.len() < 2 {
            return Err(SvmError::SingleClass);
        }
        if self.class_labels.len() != self.binaries.len() {
            return Err(SvmError::InvalidParams(format!(
                "{} class labels but {} binary models",
                self.class_labels.len(),
                self.binaries.len()
            )));
        }
        Ok(())
    }
}

/// Trains one binary model per distinct state in `dataset` (one-vs-rest).
/// Each class trains with its own derived seed (`params.seed` plus the
/// class position), so runs are reproducible end to end.
pub fn train_multiclass(
    dataset: &[(FeatureVector, EngagementState)],
    params: &TrainParams,
    thresholds_fingerprint: u64,
) -> Result<MulticlassModel, SvmError> {
    params.validate()?;
    if dataset.is_empty() {
        return Err(SvmError::EmptyInput);
    }
    let class_labels: Vec<EngagementState> = dataset
        .iter()
        .map(|(_, s)| *s)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if class_labels.len() < 2 {
        return Err(SvmError::SingleClass);
    }

    let samples: Vec<FeatureVector> = dataset.iter().map(|(x, _)| *x).collect();
    let mut binaries = Vec::with_capacity(class_labels.len());
    for (index, &label) in class_labels.iter().enumerate() {
        let targets: Vec<f64> = dataset
            .iter()
            .map(|(_, s)| if *s == label { 1.0 } else { -1.0 })
            .collect();
        let class_params = TrainParams {
            seed: params.seed.wrapping_add(index as u64),
            ..params.clone()
        };
        binaries.push(train_binary(&samples, &targets, &class_params)?);
    }
    Ok(MulticlassModel {
        class_labels,
        binaries,
        thresholds_fingerprint,
    })
}
