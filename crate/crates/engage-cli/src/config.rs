//! Layered run configuration: built-in defaults, then an optional
//! `key = value` config file, then command-line flags.

use std::fs;
use std::path::Path;

use engage_core::simulator::{DatasetParams, GameConfig};
use engage_core::svm::TrainParams;
use engage_core::team::{DEFAULT_ALERT_THRESHOLD, DEFAULT_SNAPSHOT_PERIOD_S};
use engage_core::{PipelineConfig, StateMode};

use crate::CliError;

/// Per-frame latency budget the bench gate enforces, microseconds.
pub const DEFAULT_BENCH_BUDGET_US: u64 = 10_000;
pub const DEFAULT_BENCH_REPETITIONS: usize = 3;

/// Everything a command can need, resolved from all three layers.
#[derive(Debug, Clone)]
pub struct AppConfig {
    pub game: GameConfig,
    pub dataset: DatasetParams,
    pub train: TrainParams,
    pub pipeline: PipelineConfig,
    pub alert_threshold: f64,
    pub snapshot_period_s: f64,
    pub bench_repetitions: usize,
    pub bench_budget_us: u64,
}

impl Default for AppConfig {
    fn default() -> Self {
        let game = GameConfig::default();
        let train = TrainParams {
            seed: game.seed,
            ..TrainParams::default()
        };
        AppConfig {
            game,
            dataset: DatasetParams::default(),
            train,
            pipeline: PipelineConfig::default(),
            alert_threshold: DEFAULT_ALERT_THRESHOLD,
            snapshot_period_s: DEFAULT_SNAPSHOT_PERIOD_S,
            bench_repetitions: DEFAULT_BENCH_REPETITIONS,
            bench_budget_us: DEFAULT_BENCH_BUDGET_US,
        }
    }
}

impl AppConfig {
    /// One seed drives simulation and training alike.
    pub fn set_seed(&mut self, seed: u64) {
        self.game.seed = seed;
        self.train.seed = seed;
    }

    /// Applies one config key. Threshold keys are delegated to
    /// [`engage_core::ClassifierThresholds::set`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("cannot parse {value:?} as a value for {key}"))
        }
        match key {
            "seed" => self.set_seed(parse(key, value)?),
            "mode" => {
                self.pipeline.mode = StateMode::parse(value)
                    .ok_or_else(|| format!("unknown mode {value:?} (three_state or six_state)"))?
            }
            "smoothing_window" => self.pipeline.smoothing_window = parse(key, value)?,
            "action_override" => self.pipeline.action_override_enabled = parse(key, value)?,
            "alert_threshold" => self.alert_threshold = parse(key, value)?,
            "snapshot_period_s" => self.snapshot_period_s = parse(key, value)?,
            "countdown_s" => self.game.countdown_s = parse(key, value)?,
            "play_s" => self.game.play_s = parse(key, value)?,
            "switch_s" => self.game.switch_s = parse(key, value)?,
            "switches" => self.game.switches = parse(key, value)?,
            "games" => self.game.games = parse(key, value)?,
            "frame_rate" => self.game.frame_rate = parse(key, value)?,
            "noise_sigma_m" => self.game.noise_sigma_m = parse(key, value)?,
            "screen_distance_m" => self.game.screen_distance_m = parse(key, value)?,
            "pairs" => self.dataset.pairs = parse(key, value)?,
            "corpus_frames" => self.dataset.corpus_frames = parse(key, value)?,
            "train_frames" => self.dataset.train_frames = parse(key, value)?,
            "c" => self.train.c = parse(key, value)?,
            "tol" => self.train.tol = parse(key, value)?,
            "max_passes" => self.train.max_passes = parse(key, value)?,
            "max_iterations" => self.train.max_iterations = parse(key, value)?,
            "bench_repetitions" => self.bench_repetitions = parse(key, value)?,
            "bench_budget_us" => self.bench_budget_us = parse(key, value)?,
            _ => self.pipeline.thresholds.set(key, value)?,
        }
        self.sync_window();
        Ok(())
    }

    /// The split manifest and the feature extractor must agree on the
    /// window length, so the dataset follows the thresholds.
    fn sync_window(&mut self) {
        self.dataset.window_frames = self.pipeline.thresholds.window_frames;
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("config file {}: {e}", path.display()))
        })?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "config file {} line {}: expected key = value, got {raw:?}",
                    path.display(),
                    idx + 1
                ))
            })?;
            self.set(key.trim(), value.trim()).map_err(|reason| {
                CliError::Usage(format!(
                    "config file {} line {}: {reason}",
                    path.display(),
                    idx + 1
                ))
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_share_one_seed() {
        let config = AppConfig::default();
        assert_eq!(config.game.seed, 42);
        assert_eq!(config.train.seed, 42);
        assert_eq!(config.bench_budget_us, 10_000);
    }

    #[test]
    fn set_routes_keys_to_the_right_layer() {
        let mut config = AppConfig::default();
        config.set("seed", "7").unwrap();
        config.set("mode", "six_state").unwrap();
        config.set("games", "2").unwrap();
        config.set("lean_fwd_deg", "9.5").unwrap();
        config.set("window_frames", "12").unwrap();
        assert_eq!(config.game.seed, 7);
        assert_eq!(config.train.seed, 7);
        assert_eq!(config.pipeline.mode, StateMode::SixState);
        assert_eq!(config.game.games, 2);
        assert_eq!(config.pipeline.thresholds.lean_fwd_deg, 9.5);
        assert_eq!(config.pipeline.thresholds.window_frames, 12);
        assert_eq!(config.dataset.window_frames, 12);
        assert!(config.set("no_such_key", "1").is_err());
        assert!(config.set("games", "two").is_err());
    }

    #[test]
    fn config_file_lines_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(
            &path,
            "# comment\nseed = 9\nseed = 10 # later lines win\nnoise_sigma_m = 0.0\n",
        )
        .unwrap();
        let mut config = AppConfig::default();
        config.apply_file(&path).unwrap();
        assert_eq!(config.game.seed, 10);
        assert_eq!(config.game.noise_sigma_m, 0.0);

        fs::write(&path, "seed 10\n").unwrap();
        assert!(matches!(
            AppConfig::default().apply_file(&path),
            Err(CliError::Usage(_))
        ));
    }
}
