//! One function per subcommand. Each returns the text that should reach
//! stdout, so the dispatch layer owns all printing and process exit.

use std::fs;
use std::path::Path;

use engage_core::eval::{bench_stream, evaluate_manifest, summary_to_json, summary_to_text};
use engage_core::features::{compute_measures, evaluate_classifiers};
use engage_core::pipeline::{process_stream, read_results_file, write_results_file, FrameResult};
use engage_core::simulator::{generate_dataset, manifest_stream_path, SplitManifest};
use engage_core::stream_io::read_stream_file;
use engage_core::svm::{load_model_file, save_model_file, train_multiclass};
use engage_core::team::{align_streams, write_snapshots_file};
use engage_core::{EngagementState, FeatureVector, SkeletonStream};

use crate::config::AppConfig;
use crate::CliError;

fn data_err(module: &str, input: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{module}: {}: {err}", input.display()))
}

pub fn simulate(config: &AppConfig, out: &Path) -> Result<String, CliError> {
    let manifest = generate_dataset(&config.game, &config.dataset, out)
        .map_err(|e| data_err("simulate", out, e))?;
    let frames: usize = manifest.streams.iter().map(|s| s.frames).sum();
    Ok(format!(
        "simulate: {} streams ({} frames), {} train / {} test -> {}\n",
        manifest.streams.len(),
        frames,
        manifest.train.len(),
        manifest.test.len(),
        out.join("manifest.txt").display(),
    ))
}

fn load_stream(module: &str, path: &Path) -> Result<SkeletonStream, CliError> {
    Ok(read_stream_file(path).map_err(|e| data_err(module, path, e))?.stream)
}

/// Feature vectors plus labels for the manifest's training split.
fn training_set(
    module: &str,
    manifest: &SplitManifest,
    manifest_dir: &Path,
    config: &AppConfig,
) -> Result<Vec<(FeatureVector, EngagementState)>, CliError> {
    let thresholds = &config.pipeline.thresholds;
    if manifest.window_frames != thresholds.window_frames {
        return Err(CliError::Data(format!(
            "{module}: manifest window ({}) disagrees with configured window ({})",
            manifest.window_frames, thresholds.window_frames
        )));
    }
    let mut dataset = Vec::with_capacity(manifest.train.len());
    for meta in &manifest.streams {
        if !manifest.train.iter().any(|e| e.stream == meta.id) {
            continue;
        }
        let path = manifest_stream_path(manifest_dir, meta);
        let stream = load_stream(module, &path)?;
        let labels = stream.labels.as_ref().ok_or_else(|| {
            data_err(module, &path, "stream carries no label track")
        })?;
        for entry in manifest.train.iter().filter(|e| e.stream == meta.id) {
            let w = thresholds.window_frames;
            let window = &stream.frames[entry.frame + 1 - w..=entry.frame];
            let measures =
                compute_measures(window, thresholds).map_err(|e| data_err(module, &path, e))?;
            dataset.push((
                evaluate_classifiers(&measures, thresholds),
                labels.values[entry.frame],
            ));
        }
    }
    Ok(dataset)
}

pub fn train(config: &AppConfig, manifest_path: &Path, out: &Path) -> Result<String, CliError> {
    let manifest =
        SplitManifest::load(manifest_path).map_err(|e| data_err("train", manifest_path, e))?;
    let manifest_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let dataset = training_set("train", &manifest, manifest_dir, config)?;
    let fingerprint = config.pipeline.thresholds.fingerprint();
    let model = train_multiclass(&dataset, &config.train, fingerprint)
        .map_err(|e| data_err("train", manifest_path, e))?;
    save_model_file(&model, out).map_err(|e| data_err("train", out, e))?;

    let mut lines = format!(
        "train: {} samples, {} classes -> {}\n",
        dataset.len(),
        model.class_labels.len(),
        out.display()
    );
    for (state, binary) in model.class_labels.iter().zip(&model.binaries) {
        lines.push_str(&format!(
            "train: class {} has {} support vectors\n",
            state.value(),
            binary.support_indices.len()
        ));
    }
    Ok(lines)
}

pub fn classify(
    config: &AppConfig,
    model_path: &Path,
    stream_path: &Path,
    out: &Path,
) -> Result<String, CliError> {
    let model = load_model_file(model_path).map_err(|e| data_err("classify", model_path, e))?;
    let stream = load_stream("classify", stream_path)?;
    let results = process_stream(&stream, &model, &config.pipeline)
        .map_err(|e| data_err("classify", stream_path, e))?;
    write_results_file(&results, out).map_err(|e| data_err("classify", out, e))?;
    Ok(format!(
        "classify: {} frames from {} -> {}\n",
        results.len(),
        stream_path.display(),
        out.display()
    ))
}

pub fn evaluate(
    config: &AppConfig,
    manifest_path: &Path,
    model_path: &Path,
    out: Option<&Path>,
) -> Result<String, CliError> {
    let manifest =
        SplitManifest::load(manifest_path).map_err(|e| data_err("evaluate", manifest_path, e))?;
    let manifest_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let model = load_model_file(model_path).map_err(|e| data_err("evaluate", model_path, e))?;
    let summary = evaluate_manifest(&manifest, manifest_dir, &model, &config.pipeline)
        .map_err(|e| data_err("evaluate", manifest_path, e))?;

    let text = summary_to_text(&summary);
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| data_err("evaluate", dir, e))?;
        fs::write(dir.join("report.json"), summary_to_json(&summary))
            .map_err(|e| data_err("evaluate", dir, e))?;
        fs::write(dir.join("report.txt"), &text).map_err(|e| data_err("evaluate", dir, e))?;
    }
    Ok(text)
}

pub fn aggregate(
    config: &AppConfig,
    results_paths: &[std::path::PathBuf],
    out: &Path,
) -> Result<String, CliError> {
    let mut tracks: Vec<Vec<FrameResult>> = Vec::with_capacity(results_paths.len());
    for path in results_paths {
        tracks.push(read_results_file(path).map_err(|e| data_err("aggregate", path, e))?);
    }
    let snapshots = align_streams(&tracks, config.snapshot_period_s, config.alert_threshold)
        .map_err(|e| CliError::Data(format!("aggregate: {e}")))?;
    write_snapshots_file(&snapshots, out).map_err(|e| data_err("aggregate", out, e))?;
    let alerts = snapshots.iter().filter(|s| s.alert).count();
    Ok(format!(
        "aggregate: {} snapshots, {} disengagement alerts -> {}\n",
        snapshots.len(),
        alerts,
        out.display()
    ))
}

pub struct BenchOutcome {
    pub text: String,
    pub gate_passed: bool,
}

pub fn bench(
    config: &AppConfig,
    model_path: &Path,
    stream_path: &Path,
    repetitions: usize,
) -> Result<BenchOutcome, CliError> {
    let model = load_model_file(model_path).map_err(|e| data_err("bench", model_path, e))?;
    let stream = load_stream("bench", stream_path)?;
    let report = bench_stream(&stream, &model, &config.pipeline, repetitions)
        .map_err(|e| data_err("bench", stream_path, e))?;
    let gate_passed = report.latency.p99_us < config.bench_budget_us;
    let text = format!(
        "bench: {} frames x {} repetitions = {} samples\n\
         bench: latency mean {:.2} us, p50 {} us, p99 {} us, max {} us\n\
         bench: p99 budget {} us -> {}\n",
        report.frames_per_pass,
        report.repetitions,
        report.frames_per_pass * report.repetitions,
        report.latency.mean_us,
        report.latency.p50_us,
        report.latency.p99_us,
        report.latency.max_us,
        config.bench_budget_us,
        if gate_passed { "within budget" } else { "over budget" },
    );
    Ok(BenchOutcome { text, gate_passed })
}

/// simulate -> train -> evaluate -> classify both first-pair streams ->
/// aggregate, all under one seed, all artifacts below `out`.
pub fn run_all(config: &AppConfig, out: &Path) -> Result<String, CliError> {
    let mut output = simulate(config, out)?;

    let manifest_path = out.join("manifest.txt");
    let model_path = out.join("model.svm");
    output.push_str(&train(config, &manifest_path, &model_path)?);

    let manifest =
        SplitManifest::load(&manifest_path).map_err(|e| data_err("run-all", &manifest_path, e))?;
    let model = load_model_file(&model_path).map_err(|e| data_err("run-all", &model_path, e))?;
    let summary = evaluate_manifest(&manifest, out, &model, &config.pipeline)
        .map_err(|e| data_err("run-all", &manifest_path, e))?;
    fs::write(out.join("report.json"), summary_to_json(&summary))
        .map_err(|e| data_err("run-all", out, e))?;
    fs::write(out.join("report.txt"), summary_to_text(&summary))
        .map_err(|e| data_err("run-all", out, e))?;
    output.push_str(&format!(
        "run-all: three-class accuracy {:.4}, collapsed accuracy {:.4}\n",
        summary.three_class.accuracy, summary.collapsed.accuracy
    ));

    let mut tracks = Vec::new();
    for meta in manifest.streams.iter().filter(|s| s.id.starts_with("pair0_")) {
        let path = manifest_stream_path(out, meta);
        let stream = load_stream("run-all", &path)?;
        tracks.push(
            process_stream(&stream, &model, &config.pipeline)
                .map_err(|e| data_err("run-all", &path, e))?,
        );
    }
    let snapshots = align_streams(&tracks, config.snapshot_period_s, config.alert_threshold)
        .map_err(|e| CliError::Data(format!("run-all: {e}")))?;
    let snapshots_path = out.join("snapshots.txt");
    write_snapshots_file(&snapshots, &snapshots_path)
        .map_err(|e| data_err("run-all", &snapshots_path, e))?;
    let alerts = snapshots.iter().filter(|s| s.alert).count();
    output.push_str(&format!(
        "run-all: {} team snapshots, {} alerts -> {}\n",
        snapshots.len(),
        alerts,
        snapshots_path.display()
    ));
    Ok(output)
}
