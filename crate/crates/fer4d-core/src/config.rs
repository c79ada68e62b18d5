//! Flat `key = value` pipeline configuration with typed validation against
//! every stage's preconditions. Unknown keys are rejected so typos fail
//! loudly.

use crate::mesh::PreprocessConfig;
use crate::neural::TrainConfig;
use crate::rankpool::{PoolingConfig, PoolingVariant};
use crate::render::ViewAngle;
use crate::synth::SyntheticSpec;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

/// Every tunable of the pipeline, one flat struct.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// View yaws in degrees; profile tags are inferred from the sign.
    pub view_yaws: Vec<f64>,
    pub render_size: usize,
    pub clahe_clip: f64,
    pub clahe_tiles: usize,
    pub pooling_variant: PoolingVariant,
    pub pooling_lambda: f64,
    pub pooling_iters: usize,
    pub pooling_step: f64,
    pub landmark_image_size: usize,
    pub landmark_radius: usize,
    pub landmark_grid: usize,
    pub forehead_fraction: f64,
    pub margin_fraction: f64,
    pub outlier_k: usize,
    pub outlier_stddev: f64,
    pub cnn_filters: Vec<usize>,
    pub cnn_epochs: usize,
    pub cnn_learning_rate: f64,
    pub cnn_batch: usize,
    pub cnn_weight_decay: f64,
    pub lstm_hidden: usize,
    pub lstm_dropout: f64,
    pub lstm_epochs: usize,
    pub lstm_learning_rate: f64,
    pub lstm_batch: usize,
    pub lstm_weight_decay: f64,
    pub folds: usize,
    pub repetitions: usize,
    pub synth_subjects: usize,
    pub synth_frames: usize,
    pub synth_noise: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            view_yaws: vec![-30.0, 0.0, 30.0],
            render_size: 32,
            clahe_clip: 0.01,
            clahe_tiles: 8,
            pooling_variant: PoolingVariant::LinearArp,
            pooling_lambda: 1.0,
            pooling_iters: 200,
            pooling_step: 1.0,
            landmark_image_size: 64,
            landmark_radius: 1,
            landmark_grid: 8,
            forehead_fraction: 0.6,
            margin_fraction: 0.02,
            outlier_k: 8,
            outlier_stddev: 2.0,
            cnn_filters: vec![8, 16],
            cnn_epochs: 40,
            cnn_learning_rate: 0.08,
            cnn_batch: 8,
            cnn_weight_decay: 1e-4,
            lstm_hidden: 64,
            lstm_dropout: 0.5,
            lstm_epochs: 80,
            lstm_learning_rate: 0.08,
            lstm_batch: 8,
            lstm_weight_decay: 1e-4,
            folds: 10,
            repetitions: 1,
            synth_subjects: 10,
            synth_frames: 20,
            synth_noise: 0.005,
        }
    }
}

impl PipelineConfig {
    pub fn parse_str(text: &str) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = PipelineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", idx + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| ConfigError(format!("line {}: {}", idx + 1, e.0)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value
                .parse::<T>()
                .map_err(|_| ConfigError(format!("bad value {value:?} for {key}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "views" => {
                self.view_yaws = value
                    .split(',')
                    .map(|t| num::<f64>(key, t.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "render.size" => self.render_size = num(key, value)?,
            "render.clahe_clip" => self.clahe_clip = num(key, value)?,
            "render.clahe_tiles" => self.clahe_tiles = num(key, value)?,
            "pooling.variant" => {
                self.pooling_variant = PoolingVariant::parse(value)
                    .ok_or_else(|| ConfigError(format!("unknown pooling variant {value:?}")))?;
            }
            "pooling.lambda" => self.pooling_lambda = num(key, value)?,
            "pooling.iters" => self.pooling_iters = num(key, value)?,
            "pooling.step" => self.pooling_step = num(key, value)?,
            "landmarks.image_size" => self.landmark_image_size = num(key, value)?,
            "landmarks.radius" => self.landmark_radius = num(key, value)?,
            "landmarks.grid" => self.landmark_grid = num(key, value)?,
            "preprocess.forehead_fraction" => self.forehead_fraction = num(key, value)?,
            "preprocess.margin_fraction" => self.margin_fraction = num(key, value)?,
            "preprocess.outlier_k" => self.outlier_k = num(key, value)?,
            "preprocess.outlier_stddev" => self.outlier_stddev = num(key, value)?,
            "cnn.filters" => {
                self.cnn_filters = value
                    .split(',')
                    .map(|t| num::<usize>(key, t.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "cnn.epochs" => self.cnn_epochs = num(key, value)?,
            "cnn.learning_rate" => self.cnn_learning_rate = num(key, value)?,
            "cnn.batch" => self.cnn_batch = num(key, value)?,
            "cnn.weight_decay" => self.cnn_weight_decay = num(key, value)?,
            "lstm.hidden" => self.lstm_hidden = num(key, value)?,
            "lstm.dropout" => self.lstm_dropout = num(key, value)?,
            "lstm.epochs" => self.lstm_epochs = num(key, value)?,
            "lstm.learning_rate" => self.lstm_learning_rate = num(key, value)?,
            "lstm.batch" => self.lstm_batch = num(key, value)?,
            "lstm.weight_decay" => self.lstm_weight_decay = num(key, value)?,
            "folds.k" => self.folds = num(key, value)?,
            "folds.repetitions" => self.repetitions = num(key, value)?,
            "synthetic.subjects" => self.synth_subjects = num(key, value)?,
            "synthetic.frames" => self.synth_frames = num(key, value)?,
            "synthetic.noise" => self.synth_noise = num(key, value)?,
            other => return Err(ConfigError(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Canonical serialization; stable field order, shortest round-trip
    /// floats. Parsing this text reproduces the config exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let yaws = self
            .view_yaws
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let filters = self
            .cnn_filters
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = write!(
            s,
            "seed = {}\n\
             views = {}\n\
             render.size = {}\n\
             render.clahe_clip = {}\n\
             render.clahe_tiles = {}\n\
             pooling.variant = {}\n\
             pooling.lambda = {}\n\
             pooling.iters = {}\n\
             pooling.step = {}\n\
             landmarks.image_size = {}\n\
             landmarks.radius = {}\n\
             landmarks.grid = {}\n\
             preprocess.forehead_fraction = {}\n\
             preprocess.margin_fraction = {}\n\
             preprocess.outlier_k = {}\n\
             preprocess.outlier_stddev = {}\n\
             cnn.filters = {}\n\
             cnn.epochs = {}\n\
             cnn.learning_rate = {}\n\
             cnn.batch = {}\n\
             cnn.weight_decay = {}\n\
             lstm.hidden = {}\n\
             lstm.dropout = {}\n\
             lstm.epochs = {}\n\
             lstm.learning_rate = {}\n\
             lstm.batch = {}\n\
             lstm.weight_decay = {}\n\
             folds.k = {}\n\
             folds.repetitions = {}\n\
             synthetic.subjects = {}\n\
             synthetic.frames = {}\n\
             synthetic.noise = {}\n",
            self.seed,
            yaws,
            self.render_size,
            self.clahe_clip,
            self.clahe_tiles,
            self.pooling_variant.name(),
            self.pooling_lambda,
            self.pooling_iters,
            self.pooling_step,
            self.landmark_image_size,
            self.landmark_radius,
            self.landmark_grid,
            self.forehead_fraction,
            self.margin_fraction,
            self.outlier_k,
            self.outlier_stddev,
            filters,
            self.cnn_epochs,
            self.cnn_learning_rate,
            self.cnn_batch,
            self.cnn_weight_decay,
            self.lstm_hidden,
            self.lstm_dropout,
            self.lstm_epochs,
            self.lstm_learning_rate,
            self.lstm_batch,
            self.lstm_weight_decay,
            self.folds,
            self.repetitions,
            self.synth_subjects,
            self.synth_frames,
            self.synth_noise,
        );
        s
    }

    /// Checks every stage's preconditions up front.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if self.view_yaws.is_empty() {
            return fail("views must be non-empty".into());
        }
        self.views().map_err(|e| ConfigError(e.to_string()))?;
        if self.render_size < 8 {
            return fail(format!("render.size {} below minimum 8", self.render_size));
        }
        if !(self.clahe_clip > 0.0 && self.clahe_clip <= 1.0) {
            return fail(format!("render.clahe_clip {} outside (0, 1]", self.clahe_clip));
        }
        if self.clahe_tiles < 1 {
            return fail("render.clahe_tiles must be >= 1".into());
        }
        self.pooling().validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.landmark_image_size < 8 {
            return fail(format!(
                "landmarks.image_size {} below minimum 8",
                self.landmark_image_size
            ));
        }
        if self.landmark_grid == 0 || self.landmark_image_size % self.landmark_grid != 0 {
            return fail(format!(
                "landmarks.grid {} must divide landmarks.image_size {}",
                self.landmark_grid, self.landmark_image_size
            ));
        }
        self.preprocess().validate().map_err(|e| ConfigError(e.to_string()))?;
        self.train_cnn().validate().map_err(|e| ConfigError(e.to_string()))?;
        self.train_lstm().validate().map_err(|e| ConfigError(e.to_string()))?;
        if !(0.0..1.0).contains(&self.lstm_dropout) {
            return fail(format!("lstm.dropout {} outside [0, 1)", self.lstm_dropout));
        }
        if self.folds == 0 {
            return fail("folds.k must be >= 1".into());
        }
        if self.repetitions == 0 {
            return fail("folds.repetitions must be >= 1".into());
        }
        let spec = self.synthetic();
        spec.validate().map_err(ConfigError)?;
        Ok(())
    }

    pub fn views(&self) -> Result<Vec<ViewAngle>, crate::render::RenderError> {
        self.view_yaws.iter().map(|&y| ViewAngle::from_yaw(y)).collect()
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            forehead_fraction: self.forehead_fraction,
            margin_fraction: self.margin_fraction,
            outlier_k: self.outlier_k,
            outlier_stddev_mult: self.outlier_stddev,
        }
    }

    pub fn pooling(&self) -> PoolingConfig {
        PoolingConfig {
            variant: self.pooling_variant,
            lambda: self.pooling_lambda,
            max_iters: self.pooling_iters,
            step_size: self.pooling_step,
        }
    }

    pub fn train_cnn(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.cnn_learning_rate,
            epochs: self.cnn_epochs,
            batch_size: self.cnn_batch,
            weight_decay: self.cnn_weight_decay,
            seed: self.seed,
        }
    }

    pub fn train_lstm(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lstm_learning_rate,
            epochs: self.lstm_epochs,
            batch_size: self.lstm_batch,
            weight_decay: self.lstm_weight_decay,
            seed: self.seed,
        }
    }

    pub fn synthetic(&self) -> SyntheticSpec {
        SyntheticSpec {
            subjects: self.synth_subjects,
            frames: self.synth_frames,
            noise: self.synth_noise,
            seed: self.seed,
        }
    }
}
