//! JSON run configuration. Field names follow `ProtocolConfig`, flattened:
//! the attack parameters sit at top level.

use std::path::Path;

use lgbb84_core::attacks::{AttackConfig, CheatPolicy};
use lgbb84_core::protocol::ProtocolConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Radians.
    pub theta: f64,
    pub f: f64,
    pub rounds: u64,
    pub bob_basis_weights: [f64; 4],
    pub policy: CheatPolicy,
    pub seed: u64,
    pub disclose_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            theta: p.attack.theta,
            f: p.attack.f,
            rounds: p.rounds,
            bob_basis_weights: p.bob_basis_weights,
            policy: p.attack.cheat_policy,
            seed: p.seed,
            disclose_fraction: p.disclose_fraction,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Validated protocol configuration.
    pub fn protocol(&self) -> Result<ProtocolConfig, CliError> {
        let cfg = ProtocolConfig {
            rounds: self.rounds,
            attack: AttackConfig {
                theta: self.theta,
                f: self.f,
                cheat_policy: self.policy,
            },
            bob_basis_weights: self.bob_basis_weights,
            seed: self.seed,
            disclose_fraction: self.disclose_fraction,
        };
        cfg.validate()
            .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_documented_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c.theta, 0.0);
        assert_eq!(c.f, 0.0);
        assert_eq!(c.rounds, 100_000);
        assert_eq!(c.bob_basis_weights, [0.25; 4]);
        assert_eq!(c.policy, CheatPolicy::UnwiredRandom);
        assert_eq!(c.seed, 0);
        assert_eq!(c.disclose_fraction, 1.0);
    }

    #[test]
    fn policy_names_and_unknown_fields() {
        let c: RunConfig =
            serde_json::from_str(r#"{"policy": "measure_x_pair", "f": 0.5}"#).unwrap();
        assert_eq!(c.policy, CheatPolicy::MeasureXPair);
        assert!(serde_json::from_str::<RunConfig>(r#"{"thetta": 1}"#).is_err());
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let c = RunConfig {
            f: 1.5,
            ..RunConfig::default()
        };
        assert!(matches!(c.protocol(), Err(CliError::Usage(_))));
    }
}
