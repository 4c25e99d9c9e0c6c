//! Experiment configs: one TOML file per experiment.
//!
//! ```toml
//! name = "learning_curve"
//! seeds = [0, 1, 2]
//! output_dir = "runs/learning_curve_ipbt"
//! budget = 1000
//! optimizer = "ipbt"
//!
//! [trainable]
//! kind = "learning_curve"
//! horizon = 1000
//!
//! [[space]]
//! name = "learning_rate"
//! kind = "real"
//! low = -4.0
//! high = 0.0
//! log_base = 10.0
//!
//! [engine]
//! population_size = 8
//! ```
//!
//! `budget` is the training time of one population member. Random search and
//! ASHA get `population_size * budget` inner steps in total, so every
//! optimizer spends the same compute. The run seed comes from `seeds`, never
//! from the optimizer sections.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ipbt_core::baselines::asha::AshaConfig;
use ipbt_core::baselines::pbt_config;
use ipbt_core::baselines::random_search::RandomSearchConfig;
use ipbt_core::engine::EngineConfig;
use ipbt_core::hpspace::{Dimension, HyperparameterSpace};
use ipbt_core::trainable::TrainableSpec;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Ipbt,
    Pbt,
    RandomSearch,
    Asha,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Ipbt => "ipbt",
            Optimizer::Pbt => "pbt",
            Optimizer::RandomSearch => "random_search",
            Optimizer::Asha => "asha",
        }
    }

    /// Whether runs of this optimizer write checkpoints and can resume.
    pub fn is_population_based(self) -> bool {
        matches!(self, Optimizer::Ipbt | Optimizer::Pbt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Task name used by `compare`.
    pub name: String,
    /// Algorithm name used by `compare`; defaults to the optimizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub budget: u64,
    pub optimizer: Optimizer,
    /// Outer steps between checkpoints.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
    pub trainable: TrainableSpec,
    pub space: Vec<Dimension>,
    #[serde(default, with = "engine_section")]
    pub engine: EngineConfig,
    #[serde(default)]
    pub asha: AshaSection,
    #[serde(default)]
    pub random_search: RandomSearchSection,
}

fn default_checkpoint_every() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AshaSection {
    pub eta: u64,
    /// Defaults to `max_resource / 8`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_resource: Option<u64>,
    /// Defaults to `budget`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_resource: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_configs: Option<usize>,
    pub workers: usize,
}

impl Default for AshaSection {
    fn default() -> Self {
        AshaSection {
            eta: 2,
            min_resource: None,
            max_resource: None,
            n_configs: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSearchSection {
    /// Defaults to `engine.population_size`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_configs: Option<usize>,
}

/// `[engine]` without `budget` and `seed`, which come from the top level.
mod engine_section {
    use ipbt_core::engine::EngineConfig;
    use serde::de::Error as _;
    use serde::ser::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    const RESERVED: [(&str, &str); 2] = [("budget", "budget"), ("seed", "seeds")];

    pub fn serialize<S: Serializer>(cfg: &EngineConfig, s: S) -> Result<S::Ok, S::Error> {
        let mut v = toml::Value::try_from(cfg).map_err(S::Error::custom)?;
        if let Some(t) = v.as_table_mut() {
            for (k, _) in RESERVED {
                t.remove(k);
            }
        }
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<EngineConfig, D::Error> {
        let t = toml::Table::deserialize(d)?;
        if let Some((k, top)) = RESERVED.iter().find(|(k, _)| t.contains_key(*k)) {
            return Err(D::Error::custom(format!(
                "`engine.{k}` is not allowed, set the top-level `{top}` instead"
            )));
        }
        toml::Value::Table(t).try_into().map_err(D::Error::custom)
    }
}

impl ExperimentConfig {
    /// Reads, overrides and validates a config file.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses TOML text, applies `key=value` overrides and validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: ExperimentConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            let mut doc: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
            for o in overrides {
                apply_override(&mut doc, o)?;
            }
            let resolved = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
            toml::from_str(&resolved)
                .map_err(|e| CliError::Config(format!("after --set overrides, {e}\nresolved config:\n{resolved}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.name.is_empty() {
            return bad("`name` must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("`seeds` must list at least one seed".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("`seeds` contains duplicates".into());
        }
        if self.budget == 0 {
            return bad("`budget` must be positive".into());
        }
        if self.checkpoint_every == 0 {
            return bad("`checkpoint_every` must be positive".into());
        }
        let space = self.space()?;
        self.trainable.build(&space)?;
        match self.optimizer {
            Optimizer::Ipbt | Optimizer::Pbt => self.engine_config(self.seeds[0]).validate()?,
            Optimizer::Asha => self.asha_config(self.seeds[0]).validate()?,
            Optimizer::RandomSearch => {
                let rs = self.random_search_config(self.seeds[0]);
                if rs.n_configs == 0 || rs.budget < rs.n_configs as u64 {
                    return bad("random_search needs n_configs >= 1 and at least one inner step per config".into());
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<HyperparameterSpace> {
        Ok(HyperparameterSpace::new(self.space.clone())?)
    }

    /// Name under which `compare` files this run.
    pub fn algorithm(&self) -> &str {
        self.label.as_deref().unwrap_or(self.optimizer.name())
    }

    /// Total inner steps over all population members or configurations.
    pub fn total_budget(&self) -> u64 {
        self.engine.population_size as u64 * self.budget
    }

    /// Engine config of one seed, with the PBT settings applied for `pbt`.
    pub fn engine_config(&self, seed: u64) -> EngineConfig {
        let cfg = EngineConfig {
            budget: self.budget,
            seed,
            ..self.engine.clone()
        };
        if self.optimizer == Optimizer::Pbt {
            pbt_config(cfg)
        } else {
            cfg
        }
    }

    pub fn asha_config(&self, seed: u64) -> AshaConfig {
        let a = &self.asha;
        let max_resource = a.max_resource.unwrap_or(self.budget);
        AshaConfig {
            eta: a.eta,
            min_resource: a.min_resource.unwrap_or((max_resource / 8).max(1)),
            max_resource,
            n_configs: a.n_configs,
            workers: a.workers,
            budget: self.total_budget(),
            seed,
        }
    }

    pub fn random_search_config(&self, seed: u64) -> RandomSearchConfig {
        RandomSearchConfig {
            budget: self.total_budget(),
            n_configs: self.random_search.n_configs.unwrap_or(self.engine.population_size),
            seed,
        }
    }
}

/// Applies one `dotted.key=value` override. The value is read as a TOML
/// value when it parses as one and as a bare string otherwise; numeric path
/// segments index into arrays (`space.0.low=-5`).
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let mut node: &mut toml::Value = doc
        .entry(parts[0])
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    for (i, part) in parts.iter().enumerate().skip(1) {
        let path = parts[..i].join(".");
        node = match node {
            toml::Value::Table(t) => t
                .entry(*part)
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| CliError::Config(format!("`{path}` is an array, `{part}` is not an index")))?;
                let len = a.len();
                a.get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("index {idx} out of range for `{path}` (length {len})")))?
            }
            _ => return Err(CliError::Config(format!("`{path}` is not a table"))),
        };
    }
    *node = value;
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ipbt_core::restart::StepGrowth;

    pub(crate) const EXAMPLE: &str = r#"
name = "lc"
seeds = [0, 1]
output_dir = "runs/lc"
budget = 500
optimizer = "ipbt"

[trainable]
kind = "learning_curve"
horizon = 500

[[space]]
name = "learning_rate"
kind = "real"
low = -4.0
high = 0.0
log_base = 10.0

[[space]]
name = "regularization"
kind = "real"
low = 0.0
high = 1.0

[engine]
population_size = 4
"#;

    #[test]
    fn round_trip_is_identity() {
        let cfg = ExperimentConfig::parse(EXAMPLE, &[]).unwrap();
        let text = cfg.to_toml().unwrap();
        let again = ExperimentConfig::parse(&text, &[]).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.to_toml().unwrap());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = ExperimentConfig::parse(
            EXAMPLE,
            &[
                "engine.step_growth=linear".into(),
                "engine.stagnation.t_patience=5".into(),
                "space.0.low=-5".into(),
                "label=\"ipbt-linear\"".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.engine.step_growth, StepGrowth::Linear);
        assert_eq!(cfg.engine.stagnation.t_patience, 5);
        assert_eq!(cfg.space[0].low, -5.0);
        assert_eq!(cfg.algorithm(), "ipbt-linear");
        assert!(ExperimentConfig::parse(EXAMPLE, &["space.9.low=1".into()]).is_err());
        assert!(ExperimentConfig::parse(EXAMPLE, &["budget".into()]).is_err());
    }

    #[test]
    fn schema_errors_name_the_field_and_line() {
        let no_kind = EXAMPLE.replace("kind = \"learning_curve\"\n", "");
        let e = ExperimentConfig::parse(&no_kind, &[]).unwrap_err().to_string();
        assert!(e.contains("kind") && e.contains("line"), "{e}");

        let unknown = EXAMPLE.replace("population_size = 4", "population_size = 4\npopulation = 3");
        let e = ExperimentConfig::parse(&unknown, &[]).unwrap_err().to_string();
        assert!(e.contains("population"), "{e}");

        for key in ["budget = 10", "seed = 1"] {
            let reserved = EXAMPLE.replace("population_size = 4", &format!("population_size = 4\n{key}"));
            let e = ExperimentConfig::parse(&reserved, &[]).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{e}");
        }
        let dup = EXAMPLE.replace("seeds = [0, 1]", "seeds = [1, 1]");
        assert!(ExperimentConfig::parse(&dup, &[]).is_err());
    }

    #[test]
    fn baseline_budgets_match_population_compute() {
        let mut cfg = ExperimentConfig::parse(EXAMPLE, &[]).unwrap();
        cfg.optimizer = Optimizer::Asha;
        let a = cfg.asha_config(3);
        assert_eq!((a.budget, a.max_resource, a.min_resource, a.seed), (2000, 500, 62, 3));
        let rs = cfg.random_search_config(0);
        assert_eq!((rs.budget, rs.n_configs), (2000, 4));
        cfg.optimizer = Optimizer::Pbt;
        assert!(!cfg.engine_config(0).restarts_enabled);
    }
}
