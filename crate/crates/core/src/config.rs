//! Run configuration: every tunable of training, sampling and evaluation,
//! read from `key = value` text with `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::diffusion::{NoiseSchedule, Solver, TrainRun};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, Metric, ThresholdRule};

pub const DEFAULT_HIDDEN: [usize; 5] = [1024, 384, 384, 384, 1024];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub schedule: NoiseSchedule,
    pub hidden: Vec<usize>,
    pub precondition: bool,
    pub train: TrainRun,
    pub solver: Solver,
    pub sample_seed: u64,
    /// Synthetic record count; `None` means the real training set size.
    pub samples: Option<usize>,
    pub eval: EvalOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schedule: NoiseSchedule::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            precondition: true,
            train: TrainRun::default(),
            solver: Solver::Heun,
            sample_seed: 0,
            samples: None,
            eval: EvalOptions::default(),
        }
    }
}

/// Recognised keys with a one-line description, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("sigma_min", "smallest noise level of the sampling ladder"),
    ("sigma_max", "largest noise level of the sampling ladder"),
    ("rho", "ladder curvature exponent"),
    ("steps", "number of noise levels in the sampling ladder"),
    ("sigma_data", "data standard deviation used by preconditioning"),
    ("p_mean", "mean of ln(sigma) during training"),
    ("p_std", "standard deviation of ln(sigma) during training"),
    ("hidden", "comma-separated hidden layer widths"),
    ("precondition", "wrap the network with noise-dependent scalings"),
    ("epochs", "training epochs"),
    ("batch_size", "training mini-batch size"),
    ("lr", "Adam learning rate"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("adam_eps", "Adam denominator guard"),
    ("seed", "training seed"),
    ("checkpoint_interval", "epochs between intermediate checkpoints, 0 for none"),
    ("deterministic", "sequential reductions for bit-reproducible training"),
    ("sampler", "heun or euler"),
    ("sample_seed", "sampling seed"),
    ("samples", "synthetic record count, or auto for the training set size"),
    ("metrics", "comma-separated metric names, or all"),
    ("eval_seed", "seed for clustering and membership subsets"),
    ("prediction_tasks", "columns used by the per-dimension prediction metric"),
    ("l2", "logistic regression penalty, or auto for 1/N"),
    ("max_iter", "logistic regression iteration cap"),
    ("latent_variance", "variance fraction retained before clustering"),
    ("latent_max_components", "cap on retained principal components"),
    ("latent_k", "cluster count, or elbow to search 2..8"),
    ("mcad_bins", "histogram bins for the code-count distance"),
    ("known_features", "attribute-inference known feature count"),
    ("mir_threshold", "membership distance threshold, or median"),
    ("mir_subset", "training records in the membership pool, or auto for |test|"),
    ("label", "binary label column for downstream AUC, empty for none"),
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn auto<T: FromStr>(key: &str, value: &str, word: &str) -> Result<Option<T>> {
    if value == word {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn show<T: fmt::Display>(v: &Option<T>, word: &str) -> String {
    v.as_ref().map_or_else(|| word.to_string(), T::to_string)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "sigma_min" => self.schedule.sigma_min = num(key, value)?,
            "sigma_max" => self.schedule.sigma_max = num(key, value)?,
            "rho" => self.schedule.rho = num(key, value)?,
            "steps" => self.schedule.steps = num(key, value)?,
            "sigma_data" => self.schedule.sigma_data = num(key, value)?,
            "p_mean" => self.schedule.p_mean = num(key, value)?,
            "p_std" => self.schedule.p_std = num(key, value)?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            "precondition" => self.precondition = flag(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "lr" => self.train.adam.learning_rate = num(key, value)?,
            "beta1" => self.train.adam.beta1 = num(key, value)?,
            "beta2" => self.train.adam.beta2 = num(key, value)?,
            "adam_eps" => self.train.adam.eps = num(key, value)?,
            "seed" => self.train.seed = num(key, value)?,
            "checkpoint_interval" => self.train.checkpoint_interval = num(key, value)?,
            "deterministic" => self.train.deterministic = flag(key, value)?,
            "sampler" => self.solver = value.parse()?,
            "sample_seed" => self.sample_seed = num(key, value)?,
            "samples" => self.samples = auto(key, value, "auto")?,
            "metrics" => self.eval.metrics = Metric::parse_list(value)?,
            "eval_seed" => self.eval.seed = num(key, value)?,
            "prediction_tasks" => self.eval.prediction_tasks = num(key, value)?,
            "l2" => self.eval.classifier.l2 = auto(key, value, "auto")?,
            "max_iter" => self.eval.classifier.max_iter = num(key, value)?,
            "latent_variance" => self.eval.latent.variance_fraction = num(key, value)?,
            "latent_max_components" => self.eval.latent.max_components = num(key, value)?,
            "latent_k" => self.eval.latent.fixed_k = auto(key, value, "elbow")?,
            "mcad_bins" => self.eval.mcad_bins = num(key, value)?,
            "known_features" => self.eval.known_features = num(key, value)?,
            "mir_threshold" => {
                self.eval.mir_threshold = match value {
                    "median" => ThresholdRule::Median,
                    v => ThresholdRule::Constant(num(key, v)?),
                }
            }
            "mir_subset" => self.eval.mir_subset = auto(key, value, "auto")?,
            "label" => self.eval.label = (!value.is_empty()).then(|| value.to_string()),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        Some(match key {
            "sigma_min" => self.schedule.sigma_min.to_string(),
            "sigma_max" => self.schedule.sigma_max.to_string(),
            "rho" => self.schedule.rho.to_string(),
            "steps" => self.schedule.steps.to_string(),
            "sigma_data" => self.schedule.sigma_data.to_string(),
            "p_mean" => self.schedule.p_mean.to_string(),
            "p_std" => self.schedule.p_std.to_string(),
            "hidden" => list(&self.hidden),
            "precondition" => self.precondition.to_string(),
            "epochs" => self.train.epochs.to_string(),
            "batch_size" => self.train.batch_size.to_string(),
            "lr" => self.train.adam.learning_rate.to_string(),
            "beta1" => self.train.adam.beta1.to_string(),
            "beta2" => self.train.adam.beta2.to_string(),
            "adam_eps" => self.train.adam.eps.to_string(),
            "seed" => self.train.seed.to_string(),
            "checkpoint_interval" => self.train.checkpoint_interval.to_string(),
            "deterministic" => self.train.deterministic.to_string(),
            "sampler" => self.solver.name().to_string(),
            "sample_seed" => self.sample_seed.to_string(),
            "samples" => show(&self.samples, "auto"),
            "metrics" => self.eval.metrics.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
            "eval_seed" => self.eval.seed.to_string(),
            "prediction_tasks" => self.eval.prediction_tasks.to_string(),
            "l2" => show(&self.eval.classifier.l2, "auto"),
            "max_iter" => self.eval.classifier.max_iter.to_string(),
            "latent_variance" => self.eval.latent.variance_fraction.to_string(),
            "latent_max_components" => self.eval.latent.max_components.to_string(),
            "latent_k" => show(&self.eval.latent.fixed_k, "elbow"),
            "mcad_bins" => self.eval.mcad_bins.to_string(),
            "known_features" => self.eval.known_features.to_string(),
            "mir_threshold" => match self.eval.mir_threshold {
                ThresholdRule::Median => "median".into(),
                ThresholdRule::Constant(t) => t.to_string(),
            },
            "mir_subset" => show(&self.eval.mir_subset, "auto"),
            "label" => self.eval.label.clone().unwrap_or_default(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    pub fn snapshot(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|(k, _)| (k.to_string(), self.get(k).expect("every key is readable")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.train.validate()?;
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if !(self.eval.latent.variance_fraction > 0.0 && self.eval.latent.variance_fraction <= 1.0) {
            return Err(Error::Config("latent_variance must lie in (0, 1]".into()));
        }
        if self.eval.mcad_bins == 0 || self.eval.latent.max_components == 0 {
            return Err(Error::Config("mcad_bins and latent_max_components must be positive".into()));
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(s)?;
        Ok(cfg)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, _) in KEYS {
            writeln!(f, "{key} = {}", self.get(key).expect("every key is readable"))?;
        }
        Ok(())
    }
}
