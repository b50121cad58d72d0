use crate::error::CliError;
use serde::{Deserialize, Serialize};
use std::path::Path;
use trajcritic::control::{ControlConfig, VehicleParams};
use trajcritic::perturb::SynthesisConfig;
use trajcritic::refine::{Constants, CriticConfig};
use trajcritic::risk::RiskThresholds;
use trajcritic::sim::SimSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub success_completion: f64,
    /// Seeds used by `simulate suite` when `--seed` is not given.
    pub seeds: Vec<u64>,
    /// Waypoint noise added to the planner, meters.
    pub sigma: f64,
    /// Critic passes per plan when `--refined` is set.
    pub refine_steps: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { success_completion: 0.98, seeds: vec![1, 2, 3, 4, 5], sigma: 0.5, refine_steps: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditParams {
    /// Jittered pairs drawn for the sensitivity estimates.
    pub pairs: usize,
    pub tolerance: f64,
    /// Constants quoted in `refine` step bounds.
    pub refine_constants: Constants,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams { pairs: 20_000, tolerance: 1e-9, refine_constants: Constants { beta: 0.1, l_q: 1.0, l_c: 1.0 } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetParams {
    /// Waypoint noise of the planner behind MGS records, meters.
    pub mgs_sigma: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams { mgs_sigma: 0.5 }
    }
}

/// Every tunable in one file. The top-level `thresholds` table governs all
/// commands, including synthesis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    pub thresholds: RiskThresholds,
    pub critic: CriticConfig,
    pub control: ControlConfig,
    pub vehicle: VehicleParams,
    pub sim: SimParams,
    pub synthesis: SynthesisConfig,
    pub audit: AuditParams,
    pub dataset: DatasetParams,
}

impl CliConfig {
    /// Reads the optional config file, applies `key.path=value` overrides
    /// and the seed flag, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<CliConfig, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: CliConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.synthesis.thresholds = cfg.thresholds;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sim_settings().validate()?;
        self.synthesis.validate()?;
        if self.sim.seeds.is_empty() {
            return Err(CliError::Config("sim.seeds must not be empty".into()));
        }
        if !(self.sim.sigma >= 0.0) {
            return Err(CliError::Config(format!("sim.sigma must be >= 0, got {}", self.sim.sigma)));
        }
        if self.audit.pairs == 0 || !(self.audit.tolerance >= 0.0) {
            return Err(CliError::Config("audit.pairs must be >= 1 and audit.tolerance >= 0".into()));
        }
        if !(self.dataset.mgs_sigma > 0.0) {
            return Err(CliError::Config(format!("dataset.mgs_sigma must be > 0, got {}", self.dataset.mgs_sigma)));
        }
        Ok(())
    }

    pub fn sim_settings(&self) -> SimSettings {
        SimSettings {
            control: self.control,
            vehicle: self.vehicle,
            critic: self.critic,
            thresholds: self.thresholds,
            success_completion: self.sim.success_completion,
        }
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| CliError::Config(format!("override `{spec}` is not KEY=VALUE")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = CliConfig::load(None, &[], None).unwrap();
        assert_eq!(cfg, CliConfig { synthesis: cfg.synthesis, ..Default::default() });
    }

    #[test]
    fn overrides_and_seed_apply() {
        let o = ["thresholds.tau_theta=8.5".to_string(), "sim.seeds=[7, 8]".to_string()];
        let cfg = CliConfig::load(None, &o, Some(42)).unwrap();
        assert_eq!(cfg.thresholds.tau_theta, 8.5);
        assert_eq!(cfg.synthesis.thresholds.tau_theta, 8.5);
        assert_eq!(cfg.sim.seeds, vec![7, 8]);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(CliConfig::load(None, &["thresholds.nope=1".into()], None).is_err());
        assert!(CliConfig::load(None, &["critic.step_eta=0".into()], None).is_err());
        assert!(CliConfig::load(None, &["no_equals".into()], None).is_err());
        assert!(CliConfig::load(None, &["seed.x=1".into()], None).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        let cfg = CliConfig { seed: 9, audit: AuditParams { pairs: 123, ..Default::default() }, ..Default::default() };
        std::fs::write(&p, toml::to_string(&cfg).unwrap()).unwrap();
        let back = CliConfig::load(Some(&p), &[], None).unwrap();
        assert_eq!(back.seed, 9);
        assert_eq!(back.audit.pairs, 123);
    }
}
