//! Experiment configuration: the full run specification, its per-method
//! defaults, and the plain-text config format.
//!
//! Config files are UTF-8 text with `[section]` headers, `key = value`
//! lines, and `#` comments. Every field of [`ExperimentConfig`] has a
//! default; a file (or command-line override) only states what differs.
//! Unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::adam::AdamConfig;
use crate::dam::DamConfig;
use crate::ebm::SgldConfig;
use crate::error::{Error, Result};
use crate::metrics::NmiNormalizer;
use crate::model::ModelKind;
use crate::objectives::{LossWeights, SinkhornConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Moons,
    Circles,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "moons" => Ok(DatasetKind::Moons),
            "circles" => Ok(DatasetKind::Circles),
            other => Err(Error::Config(format!("unknown dataset '{other}' (moons|circles)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Moons => "moons",
            DatasetKind::Circles => "circles",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Jem,
    Swav,
    Gedi,
    GediNoNf,
    GediNoNfNoStage1,
    GediNoNf2Enc,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Jem,
        Method::Swav,
        Method::Gedi,
        Method::GediNoNf,
        Method::GediNoNfNoStage1,
        Method::GediNoNf2Enc,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "jem" => Ok(Method::Jem),
            "swav" => Ok(Method::Swav),
            "gedi" => Ok(Method::Gedi),
            "gedi_no_nf" => Ok(Method::GediNoNf),
            "gedi_no_nf_no_stage1" => Ok(Method::GediNoNfNoStage1),
            "gedi_no_nf_2enc" => Ok(Method::GediNoNf2Enc),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (jem|swav|gedi|gedi_no_nf|gedi_no_nf_no_stage1|gedi_no_nf_2enc)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Jem => "jem",
            Method::Swav => "swav",
            Method::Gedi => "gedi",
            Method::GediNoNf => "gedi_no_nf",
            Method::GediNoNfNoStage1 => "gedi_no_nf_no_stage1",
            Method::GediNoNf2Enc => "gedi_no_nf_2enc",
        }
    }

    pub fn model_kind(self) -> ModelKind {
        match self {
            Method::Jem => ModelKind::ScalarHead,
            Method::GediNoNf2Enc => ModelKind::TwoEncoders,
            _ => ModelKind::Standard,
        }
    }

    /// Does the method run the generative pre-training stage?
    pub fn has_stage1(self) -> bool {
        !matches!(self, Method::Swav | Method::GediNoNfNoStage1)
    }

    /// Does the method run the joint stage?
    pub fn has_stage2(self) -> bool {
        !matches!(self, Method::Jem)
    }

    pub fn uses_ebm(self) -> bool {
        !matches!(self, Method::Swav)
    }

    fn is_no_nf(self) -> bool {
        matches!(self, Method::GediNoNf | Method::GediNoNfNoStage1 | Method::GediNoNf2Enc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfHeadChoice {
    /// Covariance on the unit-normalized embeddings.
    Proj,
    /// Covariance on the auxiliary unnormalized head (the default).
    ProjStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Train and test drawn independently from the generator (the default).
    Independent,
    /// One pool split stratified by `train_fraction`.
    Pooled,
}

#[derive(Debug, Clone)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub noise_std: f64,
    pub circles_factor: f64,
    pub split_mode: SplitMode,
    pub train_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iters1: usize,
    pub iters2: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub log_every: usize,
}

#[derive(Debug, Clone)]
pub struct BufferConfig {
    pub capacity: usize,
    pub reinit_prob: f64,
    /// The uniform-reinitialization box is the data bounding box expanded by
    /// this much on every side.
    pub box_margin: f64,
}

/// Full specification of one run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub method: Method,
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub c: usize,
    pub tau: f64,
    pub nf_head: NfHeadChoice,
    pub nf_beta: f64,
    pub sigma_aug: f64,
    pub dam: DamConfig,
    pub sgld: SgldConfig,
    pub buffer: BufferConfig,
    pub sinkhorn: SinkhornConfig,
    pub weights: LossWeights,
    pub nmi_norm: NmiNormalizer,
}

impl ExperimentConfig {
    /// Per-method defaults: JEM runs single-step chains with momentum-free
    /// Adam; the ablations zero the negative-free weight; everything else
    /// follows the published toy settings.
    pub fn defaults(dataset: DatasetKind, method: Method, seed: u64) -> Self {
        let batch_size = 400;
        let nf_weight = if method.is_no_nf() { 0.0 } else { 1.0 / batch_size as f64 };
        let (beta1, beta2) = match method {
            Method::Jem => (0.0, 0.9),
            _ => (0.9, 0.999),
        };
        let sgld_steps = match method {
            Method::Jem => 1,
            _ => 20,
        };
        ExperimentConfig {
            dataset,
            method,
            seed,
            out: PathBuf::from("out"),
            data: DataConfig {
                n_train: 1000,
                n_test: 1000,
                noise_std: 0.05,
                circles_factor: 0.5,
                split_mode: SplitMode::Independent,
                train_fraction: 0.5,
            },
            train: TrainConfig {
                batch_size,
                iters1: 7000,
                iters2: 7000,
                learning_rate: 1e-3,
                adam_beta1: beta1,
                adam_beta2: beta2,
                log_every: 100,
            },
            c: 2,
            tau: 0.1,
            nf_head: NfHeadChoice::ProjStar,
            nf_beta: 1e-4,
            sigma_aug: 0.03,
            dam: DamConfig::default(),
            sgld: SgldConfig { steps: sgld_steps, step_size: 1.0, noise_std: 0.01 },
            buffer: BufferConfig { capacity: 10_000, reinit_prob: 0.05, box_margin: 0.5 },
            sinkhorn: SinkhornConfig::default(),
            weights: LossWeights { gen: 1.0, nf: nf_weight, di_aug: 1000.0, di_dam: 500.0 },
            nmi_norm: NmiNormalizer::Arithmetic,
        }
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.train.learning_rate,
            beta1: self.train.adam_beta1,
            beta2: self.train.adam_beta2,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.train.batch_size < 2 {
            return bad("batch_size must be at least 2".into());
        }
        if self.train.batch_size > self.buffer.capacity && self.method.uses_ebm() {
            return bad("batch_size cannot exceed the buffer capacity".into());
        }
        if self.c < 1 {
            return bad("c must be at least 1".into());
        }
        if self.tau <= 0.0 {
            return bad("tau must be positive".into());
        }
        if self.nf_beta <= 0.0 {
            return bad("nf_beta must be positive".into());
        }
        if self.sigma_aug < 0.0 {
            return bad("sigma must be non-negative".into());
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return bad("dataset sizes must be positive".into());
        }
        if !(self.data.circles_factor > 0.0 && self.data.circles_factor < 1.0) {
            return bad("circles_factor must lie in (0, 1)".into());
        }
        if self.train.log_every == 0 {
            return bad("log_every must be positive".into());
        }
        if self.sgld.steps == 0 || self.sgld.step_size <= 0.0 || self.sgld.noise_std < 0.0 {
            return bad("sgld: steps >= 1, step_size > 0, noise_std >= 0".into());
        }
        if self.sinkhorn.epsilon <= 0.0 || self.sinkhorn.iterations == 0 {
            return bad("sinkhorn: epsilon > 0 and iterations >= 1".into());
        }
        if self.weights.gen < 0.0
            || self.weights.nf < 0.0
            || self.weights.di_aug < 0.0
            || self.weights.di_dam < 0.0
        {
            return bad("loss weights must be non-negative".into());
        }
        Ok(())
    }

    /// Render as config-file text (round-trips through the parser).
    pub fn to_ini_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "dataset = {}", self.dataset.name());
        let _ = writeln!(s, "method = {}", self.method.name());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "\n[data]");
        let _ = writeln!(s, "n_train = {}", self.data.n_train);
        let _ = writeln!(s, "n_test = {}", self.data.n_test);
        let _ = writeln!(s, "noise_std = {}", self.data.noise_std);
        let _ = writeln!(s, "circles_factor = {}", self.data.circles_factor);
        let split = match self.data.split_mode {
            SplitMode::Independent => "independent",
            SplitMode::Pooled => "pooled",
        };
        let _ = writeln!(s, "split = {split}");
        let _ = writeln!(s, "train_fraction = {}", self.data.train_fraction);
        let _ = writeln!(s, "\n[train]");
        let _ = writeln!(s, "batch_size = {}", self.train.batch_size);
        let _ = writeln!(s, "iters1 = {}", self.train.iters1);
        let _ = writeln!(s, "iters2 = {}", self.train.iters2);
        let _ = writeln!(s, "learning_rate = {}", self.train.learning_rate);
        let _ = writeln!(s, "adam_beta1 = {}", self.train.adam_beta1);
        let _ = writeln!(s, "adam_beta2 = {}", self.train.adam_beta2);
        let _ = writeln!(s, "log_every = {}", self.train.log_every);
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "c = {}", self.c);
        let _ = writeln!(s, "tau = {}", self.tau);
        let nf_head = match self.nf_head {
            NfHeadChoice::Proj => "proj",
            NfHeadChoice::ProjStar => "proj_star",
        };
        let _ = writeln!(s, "nf_head = {nf_head}");
        let _ = writeln!(s, "nf_beta = {}", self.nf_beta);
        let _ = writeln!(s, "\n[augment]");
        let _ = writeln!(s, "sigma = {}", self.sigma_aug);
        let _ = writeln!(s, "\n[dam]");
        let _ = writeln!(s, "epsilon = {}", self.dam.epsilon);
        let _ = writeln!(s, "steps = {}", self.dam.steps);
        let _ = writeln!(s, "grad_tolerance = {}", self.dam.grad_tolerance);
        let _ = writeln!(s, "resample_delta = {}", self.dam.resample_delta);
        let _ = writeln!(s, "\n[sgld]");
        let _ = writeln!(s, "steps = {}", self.sgld.steps);
        let _ = writeln!(s, "step_size = {}", self.sgld.step_size);
        let _ = writeln!(s, "noise_std = {}", self.sgld.noise_std);
        let _ = writeln!(s, "buffer_capacity = {}", self.buffer.capacity);
        let _ = writeln!(s, "reinit_prob = {}", self.buffer.reinit_prob);
        let _ = writeln!(s, "box_margin = {}", self.buffer.box_margin);
        let _ = writeln!(s, "\n[sinkhorn]");
        let _ = writeln!(s, "epsilon = {}", self.sinkhorn.epsilon);
        let _ = writeln!(s, "iterations = {}", self.sinkhorn.iterations);
        let _ = writeln!(s, "\n[weights]");
        let _ = writeln!(s, "gen = {}", self.weights.gen);
        let _ = writeln!(s, "nf = {}", self.weights.nf);
        let _ = writeln!(s, "di_aug = {}", self.weights.di_aug);
        let _ = writeln!(s, "di_dam = {}", self.weights.di_dam);
        let _ = writeln!(s, "\n[eval]");
        let norm = match self.nmi_norm {
            NmiNormalizer::Arithmetic => "arithmetic",
            NmiNormalizer::Geometric => "geometric",
        };
        let _ = writeln!(s, "nmi_norm = {norm}");
        s
    }
}

/// Parsed-but-untyped key/value pairs, applied over the defaults once the
/// method and dataset are known.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverlay {
    values: BTreeMap<(String, String), String>,
}

impl ConfigOverlay {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key '{}' appears before any [section]",
                    lineno + 1,
                    key.trim()
                )));
            }
            let value = value.trim().trim_matches('"').to_string();
            values.insert((section.clone(), key.trim().to_string()), value);
        }
        Ok(ConfigOverlay { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.values.insert((section.to_string(), key.to_string()), value.into());
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(&(section.to_string(), key.to_string())).map(|s| s.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Apply over per-method defaults and validate. Dataset, method and seed
    /// may come from the overlay itself or from the provided fallbacks.
    pub fn resolve(
        &self,
        dataset: Option<DatasetKind>,
        method: Option<Method>,
        seed: Option<u64>,
    ) -> Result<ExperimentConfig> {
        let dataset = match self.get("run", "dataset") {
            Some(s) => DatasetKind::parse(s)?,
            None => dataset.ok_or_else(|| Error::Config("dataset not specified".into()))?,
        };
        let method = match self.get("run", "method") {
            Some(s) => Method::parse(s)?,
            None => method.ok_or_else(|| Error::Config("method not specified".into()))?,
        };
        let seed = match self.get("run", "seed") {
            Some(s) => parse_num::<u64>("run", "seed", s)?,
            None => seed.unwrap_or(0),
        };
        let mut cfg = ExperimentConfig::defaults(dataset, method, seed);
        let mut unused: Vec<String> = Vec::new();
        for ((section, key), value) in &self.values {
            if !self.apply(&mut cfg, section, key, value)? {
                unused.push(format!("[{section}] {key}"));
            }
        }
        if !unused.is_empty() {
            return Err(Error::Config(format!("unknown config keys: {}", unused.join(", "))));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Returns whether the key was recognized.
    fn apply(&self, cfg: &mut ExperimentConfig, section: &str, key: &str, value: &str) -> Result<bool> {
        let ok = match (section, key) {
            ("run", "dataset") | ("run", "method") | ("run", "seed") => true, // handled up front
            ("run", "out") => {
                cfg.out = PathBuf::from(value);
                true
            }
            ("data", "n_train") => set(&mut cfg.data.n_train, section, key, value)?,
            ("data", "n_test") => set(&mut cfg.data.n_test, section, key, value)?,
            ("data", "noise_std") => set(&mut cfg.data.noise_std, section, key, value)?,
            ("data", "circles_factor") => set(&mut cfg.data.circles_factor, section, key, value)?,
            ("data", "split") => {
                cfg.data.split_mode = match value {
                    "independent" => SplitMode::Independent,
                    "pooled" => SplitMode::Pooled,
                    other => {
                        return Err(Error::Config(format!(
                            "[data] split: unknown mode '{other}' (independent|pooled)"
                        )))
                    }
                };
                true
            }
            ("data", "train_fraction") => set(&mut cfg.data.train_fraction, section, key, value)?,
            ("train", "batch_size") => {
                let changed = set(&mut cfg.train.batch_size, section, key, value)?;
                // The negative-free default weight tracks the batch size
                // unless the file pins it explicitly.
                if changed && self.get("weights", "nf").is_none() && cfg.weights.nf > 0.0 {
                    cfg.weights.nf = 1.0 / cfg.train.batch_size as f64;
                }
                changed
            }
            ("train", "iters1") => set(&mut cfg.train.iters1, section, key, value)?,
            ("train", "iters2") => set(&mut cfg.train.iters2, section, key, value)?,
            ("train", "learning_rate") => set(&mut cfg.train.learning_rate, section, key, value)?,
            ("train", "adam_beta1") => set(&mut cfg.train.adam_beta1, section, key, value)?,
            ("train", "adam_beta2") => set(&mut cfg.train.adam_beta2, section, key, value)?,
            ("train", "log_every") => set(&mut cfg.train.log_every, section, key, value)?,
            ("model", "c") => set(&mut cfg.c, section, key, value)?,
            ("model", "tau") => set(&mut cfg.tau, section, key, value)?,
            ("model", "nf_head") => {
                cfg.nf_head = match value {
                    "proj" => NfHeadChoice::Proj,
                    "proj_star" => NfHeadChoice::ProjStar,
                    other => {
                        return Err(Error::Config(format!(
                            "[model] nf_head: unknown head '{other}' (proj|proj_star)"
                        )))
                    }
                };
                true
            }
            ("model", "nf_beta") => set(&mut cfg.nf_beta, section, key, value)?,
            ("augment", "sigma") => set(&mut cfg.sigma_aug, section, key, value)?,
            ("dam", "epsilon") => set(&mut cfg.dam.epsilon, section, key, value)?,
            ("dam", "steps") => set(&mut cfg.dam.steps, section, key, value)?,
            ("dam", "grad_tolerance") => set(&mut cfg.dam.grad_tolerance, section, key, value)?,
            ("dam", "resample_delta") => set(&mut cfg.dam.resample_delta, section, key, value)?,
            ("sgld", "steps") => set(&mut cfg.sgld.steps, section, key, value)?,
            ("sgld", "step_size") => set(&mut cfg.sgld.step_size, section, key, value)?,
            ("sgld", "noise_std") => set(&mut cfg.sgld.noise_std, section, key, value)?,
            ("sgld", "buffer_capacity") => set(&mut cfg.buffer.capacity, section, key, value)?,
            ("sgld", "reinit_prob") => set(&mut cfg.buffer.reinit_prob, section, key, value)?,
            ("sgld", "box_margin") => set(&mut cfg.buffer.box_margin, section, key, value)?,
            ("sinkhorn", "epsilon") => set(&mut cfg.sinkhorn.epsilon, section, key, value)?,
            ("sinkhorn", "iterations") => set(&mut cfg.sinkhorn.iterations, section, key, value)?,
            ("weights", "gen") => set(&mut cfg.weights.gen, section, key, value)?,
            ("weights", "nf") => set(&mut cfg.weights.nf, section, key, value)?,
            ("weights", "di_aug") => set(&mut cfg.weights.di_aug, section, key, value)?,
            ("weights", "di_dam") => set(&mut cfg.weights.di_dam, section, key, value)?,
            ("eval", "nmi_norm") => {
                cfg.nmi_norm = match value {
                    "arithmetic" => NmiNormalizer::Arithmetic,
                    "geometric" => NmiNormalizer::Geometric,
                    other => {
                        return Err(Error::Config(format!(
                            "[eval] nmi_norm: unknown normalizer '{other}' (arithmetic|geometric)"
                        )))
                    }
                };
                true
            }
            _ => false,
        };
        Ok(ok)
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse '{value}'")))
}

fn set<T: std::str::FromStr>(slot: &mut T, section: &str, key: &str, value: &str) -> Result<bool> {
    *slot = parse_num(section, key, value)?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_differ_per_method() {
        let gedi = ExperimentConfig::defaults(DatasetKind::Moons, Method::Gedi, 0);
        assert_eq!(gedi.sgld.steps, 20);
        assert_eq!((gedi.train.adam_beta1, gedi.train.adam_beta2), (0.9, 0.999));
        assert!((gedi.weights.nf - 1.0 / 400.0).abs() < 1e-15);

        let jem = ExperimentConfig::defaults(DatasetKind::Moons, Method::Jem, 0);
        assert_eq!(jem.sgld.steps, 1);
        assert_eq!((jem.train.adam_beta1, jem.train.adam_beta2), (0.0, 0.9));

        let ablation = ExperimentConfig::defaults(DatasetKind::Circles, Method::GediNoNf, 0);
        assert_eq!(ablation.weights.nf, 0.0);
    }

    #[test]
    fn parse_apply_and_reject_unknown_keys() {
        let text = "\
# comment line
[run]
dataset = circles
method = gedi
seed = 3

[dam]
steps = 5     # inline comment
[weights]
di_dam = 250
";
        let overlay = ConfigOverlay::parse(text).unwrap();
        let cfg = overlay.resolve(None, None, None).unwrap();
        assert_eq!(cfg.dataset, DatasetKind::Circles);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.dam.steps, 5);
        assert_eq!(cfg.weights.di_dam, 250.0);
        assert_eq!(cfg.weights.di_aug, 1000.0);

        let bad = ConfigOverlay::parse("[run]\ndataset = moons\nmethod = gedi\n[dam]\nstep = 5\n")
            .unwrap();
        let err = bad.resolve(None, None, None).unwrap_err();
        assert!(err.to_string().contains("unknown config keys"), "{err}");
    }

    #[test]
    fn missing_method_is_a_config_error() {
        let overlay = ConfigOverlay::parse("[run]\ndataset = moons\n").unwrap();
        assert!(overlay.resolve(None, None, Some(0)).is_err());
    }

    #[test]
    fn unknown_method_is_rejected() {
        let overlay = ConfigOverlay::parse("[run]\ndataset = moons\nmethod = kmeans\n").unwrap();
        assert!(overlay.resolve(None, None, None).is_err());
    }

    #[test]
    fn nf_weight_tracks_batch_size_override() {
        let mut overlay = ConfigOverlay::default();
        overlay.set("train", "batch_size", "100");
        let cfg = overlay.resolve(Some(DatasetKind::Moons), Some(Method::Gedi), Some(0)).unwrap();
        assert!((cfg.weights.nf - 0.01).abs() < 1e-15);
        // But an explicit weight wins.
        overlay.set("weights", "nf", "0.5");
        let cfg = overlay.resolve(Some(DatasetKind::Moons), Some(Method::Gedi), Some(0)).unwrap();
        assert_eq!(cfg.weights.nf, 0.5);
    }

    #[test]
    fn ini_round_trip_preserves_the_config() {
        let mut cfg = ExperimentConfig::defaults(DatasetKind::Circles, Method::GediNoNf2Enc, 9);
        cfg.dam.steps = 8;
        cfg.tau = 0.07;
        let text = cfg.to_ini_string();
        let overlay = ConfigOverlay::parse(&text).unwrap();
        let back = overlay.resolve(None, None, None).unwrap();
        assert_eq!(back.dataset, cfg.dataset);
        assert_eq!(back.method, cfg.method);
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.dam.steps, 8);
        assert_eq!(back.tau, 0.07);
        assert_eq!(back.weights.nf, 0.0);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = ExperimentConfig::defaults(DatasetKind::Moons, Method::Gedi, 0);
        cfg.tau = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(DatasetKind::Moons, Method::Gedi, 0);
        cfg.train.batch_size = 20_000;
        assert!(cfg.validate().is_err());
    }
}
