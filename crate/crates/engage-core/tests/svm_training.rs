//! Trainer behaviour checked against geometry computed without the
//! trainer: a brute-force angle sweep for the maximum-margin separator
//! of planar point sets, and order independence of the fitted decision
//! function.

use engage_core::features::{FeatureBit, FeatureVector, FEATURE_COUNT};
use engage_core::svm::{
    max_kkt_violation, train_binary, train_multiclass, TrainParams,
};
use engage_core::EngagementState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corner_vector(a: FeatureBit, b: FeatureBit, bits: (bool, bool)) -> FeatureVector {
    let mut v = FeatureVector::zeros();
    v.set(a, bits.0);
    v.set(b, bits.1);
    v
}

/// Maximum-margin separator of labeled 2-D points, found by sweeping the
/// normal direction over a fine angular grid. Returns the geometric
/// margin, the unit normal, and the boundary offset along it, or `None`
/// when no direction separates the classes.
fn sweep_max_margin(points: &[[f64; 2]], labels: &[f64]) -> Option<(f64, [f64; 2], f64)> {
    let mut best: Option<(f64, [f64; 2], f64)> = None;
    let steps = 360_000usize;
    for k in 0..steps {
        let theta = k as f64 / steps as f64 * std::f64::consts::TAU;
        let u = [theta.cos(), theta.sin()];
        let mut min_pos = f64::INFINITY;
        let mut max_neg = f64::NEG_INFINITY;
        for (p, y) in points.iter().zip(labels) {
            let proj = u[0] * p[0] + u[1] * p[1];
            if *y > 0.0 {
                min_pos = min_pos.min(proj);
            } else {
                max_neg = max_neg.max(proj);
            }
        }
        let margin = (min_pos - max_neg) / 2.0;
        if margin > 0.0 && best.map_or(true, |(m, _, _)| margin > m) {
            best = Some((margin, u, (min_pos + max_neg) / 2.0));
        }
    }
    best
}

/// Trains every labeling of the four corners of a two-bit plane and
/// compares the result against the sweep. Separable labelings must
/// reproduce the maximum-margin separator; the two diagonal labelings
/// have no separator and must collapse to the symmetric bounded
/// solution. Every labeling must end KKT-clean.
#[test]
fn corner_labelings_match_angle_sweep_oracle() {
    let corners = [(false, false), (true, false), (false, true), (true, true)];
    let planar: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let bit_pairs = [
        (FeatureBit::LeanBackward, FeatureBit::MotionAgitated),
        (FeatureBit::LeanForward, FeatureBit::HandSpeedNearZero),
    ];
    let params = TrainParams {
        c: 50.0,
        ..TrainParams::default()
    };

    let oracles: Vec<(Vec<f64>, Option<(f64, [f64; 2], f64)>)> = (1u8..15)
        .map(|mask| {
            let labels: Vec<f64> = (0..4)
                .map(|k| if mask & (1 << k) != 0 { 1.0 } else { -1.0 })
                .collect();
            let oracle = sweep_max_margin(&planar, &labels);
            (labels, oracle)
        })
        .collect();

    let mut separable = 0;
    let mut diagonal = 0;
    for (bit_a, bit_b) in bit_pairs {
        let samples: Vec<FeatureVector> = corners
            .iter()
            .map(|&bits| corner_vector(bit_a, bit_b, bits))
            .collect();
        for (mask, (labels, oracle)) in (1u8..).zip(&oracles) {
            let model = train_binary(&samples, labels, &params).unwrap();
            assert_eq!(
                max_kkt_violation(&model, &samples, labels, params.tol),
                0.0,
                "labeling {mask:04b} left a KKT violation"
            );
            for (d, &w) in model.weights.iter().enumerate() {
                if d != bit_a as usize && d != bit_b as usize {
                    assert_eq!(w, 0.0, "weight outside the data plane at bit {d}");
                }
            }
            let w2 = [model.weights[bit_a as usize], model.weights[bit_b as usize]];

            match *oracle {
                Some((margin, u, mid)) => {
                    separable += 1;
                    // The sweep and the trainer must agree on w = u / margin
                    // and b = -mid / margin.
                    assert!(
                        (w2[0] - u[0] / margin).abs() < 1e-2
                            && (w2[1] - u[1] / margin).abs() < 1e-2,
                        "labeling {mask:04b}: w {w2:?} vs sweep {:?}",
                        [u[0] / margin, u[1] / margin]
                    );
                    assert!(
                        (model.bias + mid / margin).abs() < 1e-2,
                        "labeling {mask:04b}: b {} vs sweep {}",
                        model.bias,
                        -mid / margin
                    );
                    let norm = (w2[0] * w2[0] + w2[1] * w2[1]).sqrt();
                    assert!(
                        (1.0 / norm - margin).abs() < 2e-3 * margin,
                        "labeling {mask:04b}: geometric margin {} vs sweep {margin}",
                        1.0 / norm
                    );
                    for (p, y) in samples.iter().zip(labels) {
                        assert!(
                            y * model.decision_value(p) >= 1.0 - 2e-3,
                            "labeling {mask:04b}: point missed the margin"
                        );
                    }
                }
                None => {
                    diagonal += 1;
                    // Both diagonals of the square: the bounded optimum puts
                    // every multiplier at c, which cancels to w = 0, and the
                    // feasible bias interval is symmetric around 0.
                    assert!(w2[0].abs() < 1e-9 && w2[1].abs() < 1e-9);
                    assert!(model.bias.abs() <= 1.0 + params.tol);
                    assert!(model.alphas.iter().all(|&a| a == params.c));
                }
            }
        }
    }
    assert_eq!(separable, 24, "12 separable labelings per bit pair");
    assert_eq!(diagonal, 4, "2 diagonal labelings per bit pair");
}

fn random_vector(rng: &mut ChaCha8Rng) -> FeatureVector {
    let mut v = FeatureVector::zeros();
    for bit in FeatureBit::ALL {
        v.set(bit, rng.gen_bool(0.5));
    }
    v
}

/// The fitted decision function may not depend on sample order. Exact
/// byte equality is too strict (the optimizer visits pairs in a
/// different order), so the check is on decision values.
#[test]
fn decision_function_is_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xba5e);
    for round in 0..10 {
        // A planted halfspace with a margin keeps the problem separable,
        // which pins the optimum down to the solver tolerance.
        let mut hidden = [0.0f64; FEATURE_COUNT];
        for slot in &mut hidden {
            *slot = rng.gen_range(-1.0..1.0);
        }
        let offset = rng.gen_range(-2.0..0.0);
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        while samples.len() < 40 {
            let v = random_vector(&mut rng);
            let f: f64 = v
                .as_f64()
                .iter()
                .zip(&hidden)
                .map(|(x, h)| x * h)
                .sum::<f64>()
                + offset;
            if f.abs() < 0.3 {
                continue;
            }
            samples.push(v);
            labels.push(f.signum());
        }
        if labels.iter().all(|y| *y == labels[0]) {
            continue;
        }

        // A tighter stationarity tolerance pins the optimum well inside
        // the 1e-2 comparison bound below.
        let params = TrainParams {
            c: 10.0,
            tol: 1e-4,
            seed: round,
            ..TrainParams::default()
        };
        let base = train_binary(&samples, &labels, &params).unwrap();

        let mut order: Vec<usize> = (0..samples.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let shuffled_samples: Vec<FeatureVector> = order.iter().map(|&i| samples[i]).collect();
        let shuffled_labels: Vec<f64> = order.iter().map(|&i| labels[i]).collect();
        let shuffled = train_binary(&shuffled_samples, &shuffled_labels, &params).unwrap();

        for _ in 0..50 {
            let probe = random_vector(&mut rng);
            let d1 = base.decision_value(&probe);
            let d2 = shuffled.decision_value(&probe);
            assert!(
                (d1 - d2).abs() < 1e-2,
                "round {round}: decision values diverged: {d1} vs {d2}"
            );
        }
    }
}

/// Same property one level up: a multiclass model trained on a permuted
/// dataset ranks the classes identically away from ties.
#[test]
fn multiclass_prediction_is_order_independent() {
    use EngagementState::*;
    use FeatureBit::*;

    let mut rng = ChaCha8Rng::seed_from_u64(0x7ea3);
    let mut dataset = Vec::new();
    for _ in 0..60 {
        let mut v = random_vector(&mut rng);
        // Plant an unambiguous rule on three bits the random part leaves alone.
        let class = match rng.gen_range(0..3) {
            0 => {
                v.set(LeanBackward, true);
                v.set(HandRaised, false);
                v.set(HandSpeedHigh, false);
                Disengagement
            }
            1 => {
                v.set(LeanBackward, false);
                v.set(HandRaised, false);
                v.set(HandSpeedHigh, false);
                IntentionToAct
            }
            _ => {
                v.set(LeanBackward, false);
                v.set(HandRaised, true);
                v.set(HandSpeedHigh, true);
                Action
            }
        };
        dataset.push((v, class));
    }

    let params = TrainParams::default();
    let base = train_multiclass(&dataset, &params, 11).unwrap();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let permuted: Vec<_> = order.iter().map(|&i| dataset[i].clone()).collect();
    let shuffled = train_multiclass(&permuted, &params, 11).unwrap();

    assert_eq!(base.class_labels, shuffled.class_labels);
    for _ in 0..200 {
        let probe = random_vector(&mut rng);
        let d1 = base.decision_values(&probe);
        let d2 = shuffled.decision_values(&probe);
        for (a, b) in d1.iter().zip(&d2) {
            assert!((a - b).abs() < 2e-2, "class scores diverged: {d1:?} vs {d2:?}");
        }
        let near_tie = {
            let mut sorted = d1.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted[0] - sorted[1] < 5e-2
        };
        if !near_tie {
            assert_eq!(base.predict(&probe).0, shuffled.predict(&probe).0);
        }
    }
}
