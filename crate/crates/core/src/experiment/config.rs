use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attack::{GradientAscentConfig, PartialKnowledgeConfig};
use crate::data::{generate_synthetic, load_dataset, Schema, SyntheticConfig};
use crate::defense::{InfluenceDomain, MieConfig, MwaConfig};
use crate::error::{Error, Result};
use crate::truth_discovery::{CrhConfig, GtmConfig, InitialReliability, ModelConfig};
use crate::types::{ModelKind, ObservationSet};

/// Where the normal observations come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSpec {
    Synthetic(SyntheticConfig),
    File {
        path: PathBuf,
        #[serde(default)]
        schema: Schema,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(SyntheticConfig::default())
    }
}

impl DatasetSpec {
    pub fn load(&self) -> Result<ObservationSet> {
        match self {
            DatasetSpec::Synthetic(cfg) => Ok(generate_synthetic(cfg)?.0),
            DatasetSpec::File { path, schema } => Ok(load_dataset(path, *schema)?.observations),
        }
    }

    /// Number of targets used for each dataset unless overridden. Synthetic
    /// data targets a tenth of its items, 400 at the default size.
    pub fn default_targets(&self) -> Option<usize> {
        match self {
            DatasetSpec::Synthetic(cfg) => Some((cfg.num_items / 10).max(1)),
            DatasetSpec::File {
                schema: Schema::Emotion,
                ..
            } => Some(60),
            DatasetSpec::File {
                schema: Schema::Weather,
                ..
            } => Some(100),
            DatasetSpec::File {
                schema: Schema::Generic,
                ..
            } => None,
        }
    }

    /// MWA group count used for each dataset unless overridden.
    pub fn default_groups(&self) -> usize {
        match self {
            DatasetSpec::File {
                schema: Schema::Emotion,
                ..
            } => 4,
            _ => 5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    None,
    Random,
    Maximum,
    FullKnowledge,
    PartialKnowledge,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    #[default]
    None,
    Mwa,
    Mie,
}

macro_rules! names {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),* }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let s = s.replace('-', "_").to_ascii_lowercase();
                $ty::ALL
                    .iter()
                    .copied()
                    .find(|k| k.name() == s)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown {} `{s}`", stringify!($ty))))
            }
        }
    };
}

names!(AttackKind {
    None => "none",
    Random => "random",
    Maximum => "maximum",
    FullKnowledge => "full_knowledge",
    PartialKnowledge => "partial_knowledge",
});

names!(DefenseKind {
    None => "none",
    Mwa => "mwa",
    Mie => "mie",
});

/// Partial-knowledge settings shared by every sweep point; the knowledge
/// fraction and seed are filled in per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialSettings {
    pub bootstrap_rounds: usize,
    pub use_bootstrap: bool,
}

impl Default for PartialSettings {
    fn default() -> Self {
        let d = PartialKnowledgeConfig::default();
        Self {
            bootstrap_rounds: d.bootstrap_rounds,
            use_bootstrap: d.use_bootstrap,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MwaSettings {
    /// Defaults to the dataset's group count.
    pub num_groups: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MieSettings {
    /// Defaults to the attack fraction of the sweep point.
    pub assumed_attack_fraction: Option<f64>,
    pub influence_domain: InfluenceDomain,
}

/// One sweep: a dataset, a server model, an attack, a defense, and the grid
/// of attack and knowledge fractions, each point repeated `trials` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub model: ModelKind,
    pub attack: AttackKind,
    pub defense: DefenseKind,
    pub attack_fractions: Vec<f64>,
    /// Only used by the partial-knowledge attack.
    pub knowledge_fractions: Vec<f64>,
    /// Defaults to the dataset's target count.
    pub num_targets: Option<usize>,
    pub trials: usize,
    pub base_seed: u64,
    /// Worker threads for trials; all cores when unset.
    pub jobs: Option<usize>,
    /// Server-side CRH settings.
    pub crh: CrhConfig,
    /// Server-side GTM settings.
    pub gtm: GtmConfig,
    /// Starting reliability in the attacker's simulation of the server.
    pub attacker_initial: InitialReliability,
    pub gradient_ascent: GradientAscentConfig,
    pub partial: PartialSettings,
    pub mwa: MwaSettings,
    pub mie: MieSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            model: ModelKind::Crh,
            attack: AttackKind::None,
            defense: DefenseKind::None,
            attack_fractions: vec![0.05, 0.1, 0.2, 0.3],
            knowledge_fractions: vec![1.0],
            num_targets: None,
            trials: 50,
            base_seed: 0,
            jobs: None,
            crh: CrhConfig::default(),
            gtm: GtmConfig::default(),
            attacker_initial: InitialReliability::Constant(1.0),
            gradient_ascent: GradientAscentConfig::default(),
            partial: PartialSettings::default(),
            mwa: MwaSettings::default(),
            mie: MieSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Full check for a sweep: [`Self::validate_settings`] plus a resolvable
    /// target count.
    pub fn validate(&self) -> Result<()> {
        self.validate_settings()?;
        self.targets()?;
        Ok(())
    }

    /// Checks everything except the target count, which only runs that
    /// plan attacks need.
    pub fn validate_settings(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.attack_fractions.is_empty() {
            return Err(Error::InvalidConfig("attack_fractions is empty".into()));
        }
        if let Some(a) = self.attack_fractions.iter().find(|a| !(**a > 0.0 && **a < 0.5)) {
            return Err(Error::InvalidConfig(format!("attack fraction {a} is outside (0, 0.5)")));
        }
        if self.knowledge_fractions.is_empty() {
            return Err(Error::InvalidConfig("knowledge_fractions is empty".into()));
        }
        if let Some(f) = self.knowledge_fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::InvalidConfig(format!("knowledge fraction {f} is outside (0, 1]")));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        if self.num_targets == Some(0) {
            return Err(Error::InvalidConfig("num_targets must be at least 1".into()));
        }
        self.server_model().validate()?;
        self.gradient_ascent.validate()?;
        self.partial_config(1.0, 0).validate()?;
        self.mwa_config().validate()?;
        if let Some(a) = self.mie.assumed_attack_fraction {
            self.mie_config(a).validate()?;
        }
        Ok(())
    }

    pub fn targets(&self) -> Result<usize> {
        self.num_targets
            .or_else(|| self.dataset.default_targets())
            .ok_or_else(|| Error::InvalidConfig("num_targets is required for generic files".into()))
    }

    /// The aggregation engine the server runs.
    pub fn server_model(&self) -> ModelConfig {
        match self.model {
            ModelKind::Crh => ModelConfig::Crh(self.crh.clone()),
            ModelKind::Gtm => ModelConfig::Gtm(self.gtm.clone()),
        }
    }

    /// The attacker's simulation of the server.
    pub fn attacker_model(&self) -> ModelConfig {
        self.server_model().with_initial(self.attacker_initial.clone())
    }

    pub fn partial_config(&self, knowledge_fraction: f64, seed: u64) -> PartialKnowledgeConfig {
        PartialKnowledgeConfig {
            knowledge_fraction,
            bootstrap_rounds: self.partial.bootstrap_rounds,
            use_bootstrap: self.partial.use_bootstrap,
            rng_seed: seed,
        }
    }

    pub fn mwa_config(&self) -> MwaConfig {
        MwaConfig {
            num_groups: self.mwa.num_groups.unwrap_or_else(|| self.dataset.default_groups()),
            max_iterations: self.crh.max_iterations,
            tolerance: self.crh.tolerance,
            initial_weight: self.crh.initial_weight.clone(),
        }
    }

    pub fn mie_config(&self, attack_fraction: f64) -> MieConfig {
        MieConfig {
            assumed_attack_fraction: self.mie.assumed_attack_fraction.unwrap_or(attack_fraction),
            engine: self.crh.clone(),
            influence_domain: self.mie.influence_domain,
        }
    }

    /// Knowledge fractions actually swept: the configured list for the
    /// partial-knowledge attack, full knowledge otherwise.
    pub fn effective_knowledge_fractions(&self) -> Vec<f64> {
        match self.attack {
            AttackKind::PartialKnowledge => self.knowledge_fractions.clone(),
            _ => vec![1.0],
        }
    }
}
