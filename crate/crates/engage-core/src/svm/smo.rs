//! Sequential minimal optimization for the binary soft-margin dual.
//!
//! Working-set policy per pass: examine violators worst-first, pair each
//! with the partner maximizing |E_i - E_j|, and fall back to seeded
//! rotations over the non-bound set and then the full set. Errors are
//! recomputed from the cached weight vector on demand; with 16 binary
//! features that is cheaper than keeping an error cache coherent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SvmError;
use crate::features::{FeatureVector, FEATURE_COUNT};

/// Hyperparameters for one SMO run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    /// Soft-margin regularization constant; upper bound on every multiplier.
    pub c: f64,
    /// KKT tolerance; also the per-pass quiescence threshold.
    pub tol: f64,
    /// Consecutive passes with no multiplier moving beyond `tol` before
    /// the trainer stops.
    pub max_passes: usize,
    /// Hard cap on examined working-set candidates across the whole run.
    pub max_iterations: usize,
    /// Seed for the pair-selection fallback rotations.
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            c: 1.0,
            tol: 1e-3,
            max_passes: 10,
            max_iterations: 100_000,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), SvmError> {
        let bad = |m: String| Err(SvmError::InvalidParams(m));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive and finite, got {}", self.c));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive and finite, got {}", self.tol));
        }
        if self.max_passes < 1 {
            return bad("max_passes must be at least 1".into());
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1".into());
        }
        Ok(())
    }
}

/// Provenance of a trained binary model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub params: TrainParams,
    pub samples: usize,
}

/// A trained binary linear SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    /// One dual multiplier per training sample, in input order.
    pub alphas: Vec<f64>,
    /// Indices with a strictly positive multiplier.
    pub support_indices: Vec<usize>,
    pub train_meta: TrainMeta,
}

impl BinaryModel {
    /// Decision value `weights . x + bias` on raw coordinates.
    pub fn decision_raw(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// Decision value on a feature vector; positive means class +1.
    pub fn decision_value(&self, x: &FeatureVector) -> f64 {
        self.decision_raw(&x.as_f64())
    }
}

fn dot(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Trains a binary model; labels must be -1.0 or +1.0 with both present.
pub fn train_binary(
    samples: &[FeatureVector],
    labels: &[f64],
    params: &TrainParams,
) -> Result<BinaryModel, SvmError> {
    train_binary_with_trace(samples, labels, params).map(|(model, _)| model)
}

/// Like [`train_binary`], also returning the dual objective value after
/// each accepted pair update. The sequence is non-decreasing; tests and
/// debug builds assert it.
pub fn train_binary_with_trace(
    samples: &[FeatureVector],
    labels: &[f64],
    params: &TrainParams,
) -> Result<(BinaryModel, Vec<f64>), SvmError> {
    let x: Vec<[f64; FEATURE_COUNT]> = samples.iter().map(|s| s.as_f64()).collect();
    train_raw_with_trace(&x, labels, params)
}

/// Trains directly on raw f64 coordinates. The pipeline always goes
/// through [`train_binary`]; this entry exists for verification against
/// hand-constructed geometry that binary features cannot express.
pub fn train_raw_with_trace(
    points: &[[f64; FEATURE_COUNT]],
    labels: &[f64],
    params: &TrainParams,
) -> Result<(BinaryModel, Vec<f64>), SvmError> {
    params.validate()?;
    if points.is_empty() {
        return Err(SvmError::EmptyInput);
    }
    if points.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            samples: points.len(),
            labels: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != -1.0 && y != 1.0) {
        return Err(SvmError::InvalidLabel(bad));
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(SvmError::SingleClass);
    }

    let mut solver = Solver {
        x: points,
        y: labels,
        c: params.c,
        tol: params.tol,
        alphas: vec![0.0; points.len()],
        w: [0.0; FEATURE_COUNT],
        b: 0.0,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        iterations: 0,
        trace: Vec::new(),
    };
    solver.run(params.max_passes, params.max_iterations);

    let support_indices = solver
        .alphas
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, _)| i)
        .collect();
    let model = BinaryModel {
        weights: solver.w,
        bias: solver.b,
        alphas: solver.alphas,
        support_indices,
        train_meta: TrainMeta {
            params: params.clone(),
            samples: points.len(),
        },
    };
    Ok((model, solver.trace))
}

/// Largest KKT violation of `model` on its training set, beyond the
/// stationarity tolerance. Zero means every condition holds within `tol`.
pub fn max_kkt_violation(
    model: &BinaryModel,
    samples: &[FeatureVector],
    labels: &[f64],
    tol: f64,
) -> f64 {
    let points: Vec<[f64; FEATURE_COUNT]> = samples.iter().map(|s| s.as_f64()).collect();
    max_kkt_violation_raw(model, &points, labels, tol)
}

/// [`max_kkt_violation`] over raw coordinate points.
pub fn max_kkt_violation_raw(
    model: &BinaryModel,
    points: &[[f64; FEATURE_COUNT]],
    labels: &[f64],
    tol: f64,
) -> f64 {
    let c = model.train_meta.params.c;
    let mut worst: f64 = 0.0;
    for (k, point) in points.iter().enumerate() {
        let margin = labels[k] * model.decision_raw(point);
        let a = model.alphas[k];
        if a < c {
            worst = worst.max((1.0 - tol) - margin);
        }
        if a > 0.0 {
            worst = worst.max(margin - (1.0 + tol));
        }
    }
    worst
}

struct Solver<'a> {
    x: &'a [[f64; FEATURE_COUNT]],
    y: &'a [f64],
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    w: [f64; FEATURE_COUNT],
    b: f64,
    rng: ChaCha8Rng,
    iterations: usize,
    trace: Vec<f64>,
}

/// Multiplier moves smaller than this are treated as no step at all.
const MIN_STEP: f64 = 1e-12;

impl Solver<'_> {
    fn decision(&self, i: usize) -> f64 {
        dot(&self.w, &self.x[i]) + self.b
    }

    fn error(&self, i: usize) -> f64 {
        self.decision(i) - self.y[i]
    }

    /// How far sample `i` sits beyond the KKT tolerance band; 0 if inside.
    fn violation(&self, i: usize) -> f64 {
        let r = self.y[i] * self.error(i);
        let mut v: f64 = 0.0;
        if self.alphas[i] < self.c && r < -self.tol {
            v = -r - self.tol;
        }
        if self.alphas[i] > 0.0 && r > self.tol {
            v = v.max(r - self.tol);
        }
        v
    }

    fn objective(&self) -> f64 {
        self.alphas.iter().sum::<f64>() - 0.5 * dot(&self.w, &self.w)
    }

    /// Jointly optimizes the pair (i, j); true if a step was taken.
    fn try_pair(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (ai, aj) = (self.alphas[i], self.alphas[j]);
        let (yi, yj) = (self.y[i], self.y[j]);
        let s = yi * yj;

        // Feasible segment for alpha_j along the equality constraint.
        let (low, high) = if s < 0.0 {
            ((aj - ai).max(0.0), (self.c + aj - ai).min(self.c))
        } else {
            ((ai + aj - self.c).max(0.0), (ai + aj).min(self.c))
        };
        if high - low < MIN_STEP {
            return false;
        }

        let ei = self.error(i);
        let ej = self.error(j);
        let kii = dot(&self.x[i], &self.x[i]);
        let kjj = dot(&self.x[j], &self.x[j]);
        let kij = dot(&self.x[i], &self.x[j]);
        // Negative curvature of the objective along the segment.
        let eta = kii + kjj - 2.0 * kij;

        // Objective gain for moving alpha_j by t along the segment.
        let gain = |t: f64| t * yj * (ei - ej) - 0.5 * eta * t * t;

        let mut aj_new;
        if eta > MIN_STEP {
            aj_new = (aj + yj * (ei - ej) / eta).clamp(low, high);
        } else {
            // Flat or concave-up segment: the maximum sits at an endpoint.
            let gain_low = gain(low - aj);
            let gain_high = gain(high - aj);
            if gain_low <= MIN_STEP && gain_high <= MIN_STEP {
                return false;
            }
            aj_new = if gain_low > gain_high { low } else { high };
        }
        // Snap to the segment ends so bound multipliers are exactly 0 or c.
        if aj_new - low < MIN_STEP {
            aj_new = low;
        } else if high - aj_new < MIN_STEP {
            aj_new = high;
        }
        // The segment ends themselves can carry rounding dust (for example
        // `low = ai + aj - c` when the true value is 0). A multiplier that
        // small is both meaningless and unfixable, because the step that
        // would clear it is below MIN_STEP; force it onto the exact bound.
        if aj_new < MIN_STEP {
            aj_new = 0.0;
        } else if self.c - aj_new < MIN_STEP {
            aj_new = self.c;
        }
        let t = aj_new - aj;
        if t.abs() < MIN_STEP {
            return false;
        }
        // Deriving alpha_i from the final alpha_j keeps sum(alpha*y) exact
        // up to cancellation dust, which the same snap clears.
        let mut ai_new = (ai + s * (aj - aj_new)).clamp(0.0, self.c);
        if ai_new < MIN_STEP {
            ai_new = 0.0;
        } else if self.c - ai_new < MIN_STEP {
            ai_new = self.c;
        }

        let di = yi * (ai_new - ai);
        let dj = yj * t;
        let b1 = self.b - ei - di * kii - dj * kij;
        let b2 = self.b - ej - di * kij - dj * kjj;
        self.b = if ai_new > 0.0 && ai_new < self.c {
            b1
        } else if aj_new > 0.0 && aj_new < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        for (slot, (pi, pj)) in self.w.iter_mut().zip(self.x[i].iter().zip(&self.x[j])) {
            *slot += di * pi + dj * pj;
        }
        self.alphas[i] = ai_new;
        self.alphas[j] = aj_new;

        let objective = self.objective();
        if let Some(&previous) = self.trace.last() {
            debug_assert!(
                objective >= previous - 1e-9,
                "dual objective decreased: {previous} -> {objective}"
            );
        }
        // Bound snapping trades up to MIN_STEP of constraint drift per step
        // for exact multiplier bounds; the tolerance budgets for that.
        debug_assert!(
            self.alphas
                .iter()
                .zip(self.y)
                .map(|(a, y)| a * y)
                .sum::<f64>()
                .abs()
                <= 1e-8,
            "equality constraint drifted"
        );
        self.trace.push(objective);
        true
    }

    /// Examines one first-choice candidate: best |E_i - E_j| partner,
    /// then a seeded rotation over non-bound partners, then over all.
    fn examine(&mut self, i: usize) -> bool {
        if self.violation(i) <= 0.0 {
            return false;
        }
        let n = self.x.len();
        let ei = self.error(i);
        let mut best = usize::MAX;
        let mut best_gap = -1.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let gap = (ei - self.error(j)).abs();
            if gap > best_gap {
                best_gap = gap;
                best = j;
            }
        }
        if best != usize::MAX && self.try_pair(i, best) {
            return true;
        }
        let start = self.rng.gen_range(0..n);
        for off in 0..n {
            let j = (start + off) % n;
            if j != i && self.alphas[j] > 0.0 && self.alphas[j] < self.c && self.try_pair(i, j) {
                return true;
            }
        }
        let start = self.rng.gen_range(0..n);
        for off in 0..n {
            let j = (start + off) % n;
            if j != i && self.try_pair(i, j) {
                return true;
            }
        }
        false
    }

    /// Violators sorted worst-first (ties toward the lower index).
    fn violators(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = (0..self.x.len())
            .filter_map(|i| {
                let v = self.violation(i);
                (v > 0.0).then_some((v, i))
            })
            .collect();
        out.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        out
    }

    /// Sets the bias from the trained multipliers: the average of
    /// `y - w.x` over non-bound support vectors, or the midpoint of the
    /// bound-derived feasible interval when every multiplier is at 0 or c.
    fn finalize_bias(&mut self) {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, &a) in self.alphas.iter().enumerate() {
            if a > 0.0 && a < self.c {
                sum += self.y[i] - dot(&self.w, &self.x[i]);
                count += 1;
            }
        }
        if count > 0 {
            self.b = sum / count as f64;
            return;
        }
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for (i, &a) in self.alphas.iter().enumerate() {
            let v = self.y[i] - dot(&self.w, &self.x[i]);
            let positive = self.y[i] > 0.0;
            let at_zero = a <= 0.0;
            if positive == at_zero {
                lower = lower.max(v);
            } else {
                upper = upper.min(v);
            }
        }
        self.b = match (lower.is_finite(), upper.is_finite()) {
            (true, true) => (lower + upper) / 2.0,
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        };
    }

    /// Rebuilds the weight vector exactly from the multipliers, clearing
    /// incremental drift before the model is sealed.
    fn rebuild_weights(&mut self) {
        let mut w = [0.0; FEATURE_COUNT];
        for (i, &a) in self.alphas.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let coeff = a * self.y[i];
            for (slot, p) in w.iter_mut().zip(&self.x[i]) {
                *slot += coeff * p;
            }
        }
        self.w = w;
    }

    fn run(&mut self, max_passes: usize, max_iterations: usize) {
        loop {
            let mut quiet_passes = 0usize;
            let mut capped = false;
            'passes: loop {
                let agenda = self.violators();
                if agenda.is_empty() {
                    break;
                }
                let before = self.alphas.clone();
                for (_, i) in agenda {
                    if self.iterations >= max_iterations {
                        capped = true;
                        break 'passes;
                    }
                    self.iterations += 1;
                    self.examine(i);
                }
                let moved = self
                    .alphas
                    .iter()
                    .zip(&before)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                if moved <= self.tol {
                    quiet_passes += 1;
                    if quiet_passes >= max_passes {
                        break;
                    }
                } else {
                    quiet_passes = 0;
                }
            }
            self.rebuild_weights();
            self.finalize_bias();
            // Resealing the bias can re-expose a violator; if the budget
            // is not spent, keep optimizing against the sealed bias.
            if capped || self.violators().is_empty() {
                return;
            }
        }
    }
}
