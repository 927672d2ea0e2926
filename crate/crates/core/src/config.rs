//! Experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which descriptor drives the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "AURORA")]
    Aurora,
    #[serde(rename = "HC-Nav")]
    HcNav,
    #[serde(rename = "HC-Forw")]
    HcForw,
    #[serde(rename = "HC-Turn")]
    HcTurn,
    #[serde(rename = "MeS")]
    MeanStreams,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Aurora,
        Variant::HcNav,
        Variant::HcForw,
        Variant::HcTurn,
        Variant::MeanStreams,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Aurora => "AURORA",
            Variant::HcNav => "HC-Nav",
            Variant::HcForw => "HC-Forw",
            Variant::HcTurn => "HC-Turn",
            Variant::MeanStreams => "MeS",
        }
    }

    /// The task whose hand-coded descriptor this variant uses, if any.
    pub fn hand_coded_task(self) -> Option<Task> {
        match self {
            Variant::HcNav => Some(Task::Nav),
            Variant::HcForw => Some(Task::Forw),
            Variant::HcTurn => Some(Task::Turn),
            Variant::Aurora | Variant::MeanStreams => None,
        }
    }

    pub fn uses_encoder(self) -> bool {
        self == Variant::Aurora
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// A QD task: a hand-coded descriptor plus a performance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Nav,
    Forw,
    Turn,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Nav, Task::Forw, Task::Turn];

    pub fn name(self) -> &'static str {
        match self {
            Task::Nav => "nav",
            Task::Forw => "forw",
            Task::Turn => "turn",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Pca,
    Ae,
}

/// Descriptor-learning settings (AURORA only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    /// Width of the autoencoder's hidden layers.
    pub hidden: usize,
    /// Adam steps per encoder phase.
    pub train_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Iteration of the first encoder phase; later phases follow the triangular schedule.
    pub first_update: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::Ae,
            hidden: 64,
            train_steps: 3000,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_update: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub variant: Variant,
    /// Tasks evaluated on the finished archive.
    pub tasks: Vec<Task>,
    /// Task whose score is the fitness for AURORA and MeS.
    pub scoring_task: Task,
    pub n_iterations: usize,
    pub batch_size: usize,
    pub bootstrap_size: usize,
    pub container_target: usize,
    pub container_update_period: usize,
    pub initial_threshold: f64,
    pub novelty_k: usize,
    pub mutation_eta: f64,
    pub mutation_rate: f64,
    pub latent_dim: usize,
    pub encoder: EncoderConfig,
    pub seed: u64,
    /// Worker threads for offspring evaluation; results do not depend on it.
    pub threads: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Aurora,
            tasks: Task::ALL.to_vec(),
            scoring_task: Task::Nav,
            n_iterations: 15_000,
            batch_size: 64,
            bootstrap_size: 256,
            container_target: 5_000,
            container_update_period: 10,
            initial_threshold: 0.01,
            novelty_k: 15,
            mutation_eta: 10.0,
            mutation_rate: 0.3,
            latent_dim: 2,
            encoder: EncoderConfig::default(),
            seed: 0,
            threads: 1,
            output_dir: PathBuf::from("runs/out"),
        }
    }
}

impl ExperimentConfig {
    /// Target used by navigation-focused runs.
    pub const NAV_CONTAINER_TARGET: usize = 1_500;

    /// Task whose score is the fitness of archived policies.
    pub fn active_task(&self) -> Task {
        self.variant.hand_coded_task().unwrap_or(self.scoring_task)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.container_target == 0 {
            return fail("container_target must be > 0");
        }
        if !(self.mutation_eta > 0.0 && self.mutation_eta.is_finite()) {
            return fail("mutation_eta must be > 0");
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return fail("mutation_rate must lie in (0, 1]");
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be >= 1");
        }
        if self.batch_size == 0 || self.bootstrap_size == 0 {
            return fail("batch_size and bootstrap_size must be >= 1");
        }
        if self.container_update_period == 0 {
            return fail("container_update_period must be >= 1");
        }
        if !(self.initial_threshold > 0.0 && self.initial_threshold.is_finite()) {
            return fail("initial_threshold must be > 0");
        }
        if self.novelty_k == 0 {
            return fail("novelty_k must be >= 1");
        }
        if self.threads == 0 {
            return fail("threads must be >= 1");
        }
        if self.tasks.is_empty() {
            return fail("tasks must not be empty");
        }
        let enc = &self.encoder;
        if enc.hidden == 0 || enc.batch_size == 0 || enc.first_update == 0 {
            return fail("encoder hidden, batch_size and first_update must be >= 1");
        }
        if !(enc.learning_rate > 0.0) || !(enc.epsilon > 0.0) {
            return fail("encoder learning_rate and epsilon must be > 0");
        }
        if !(0.0..1.0).contains(&enc.beta1) || !(0.0..1.0).contains(&enc.beta2) {
            return fail("encoder betas must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}
