//! Run configuration: parsing, defaults and validation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use surrogate_mcmc_core::adaptive::DesignRule;
use surrogate_mcmc_core::mcmc::McmcConfig;
use surrogate_mcmc_core::strategy::{StrategyAConfig, StrategyBConfig, StrategyLabel};
use surrogate_mcmc_core::surrogate::SurrogateConfig;

use crate::scenario::ScenarioSpec;
use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Example1KlTruth,
    Example1SgsTruth,
    Example2Multimodal,
    SyntheticSmoke,
    Custom,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Example1KlTruth => "example1-kl-truth",
            Self::Example1SgsTruth => "example1-sgs-truth",
            Self::Example2Multimodal => "example2-multimodal",
            Self::SyntheticSmoke => "synthetic-smoke",
            Self::Custom => "custom",
        }
    }
}

/// A surrogate strategy label, or plain sampling of the high-fidelity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    HighFidelity,
    Surrogate(StrategyLabel),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HighFidelity => f.write_str("high-fidelity"),
            Self::Surrogate(l) => l.fmt(f),
        }
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "high-fidelity" {
            return Ok(Self::HighFidelity);
        }
        s.parse::<StrategyLabel>().map(Self::Surrogate).map_err(|_| {
            let labels: Vec<&str> = StrategyLabel::ALL.iter().map(StrategyLabel::as_str).collect();
            format!("unknown method `{s}`; expected high-fidelity or one of {}", labels.join(", "))
        })
    }
}

impl TryFrom<String> for Method {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.to_string()
    }
}

/// Refinement-loop settings; unset counts take the scenario's defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_initial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_add: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iterations: Option<usize>,
    pub design_rule: DesignRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset_max: Option<usize>,
    pub strategy_a: StrategyAConfig,
    pub strategy_b: StrategyBConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighFidelitySettings {
    /// Chain length of plain high-fidelity sampling; the scenario decides
    /// when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_generations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    /// Use the 81×41 grid instead of the 41×21 desk-scale grid.
    #[serde(default)]
    pub full_grid: bool,
    /// Use the full published iteration counts for Example 1.
    #[serde(default)]
    pub long: bool,
    #[serde(default)]
    pub adaptive: AdaptiveSettings,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub high_fidelity: HighFidelitySettings,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    /// Problem definition, required for `scenario = "custom"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<ScenarioSpec>,
}

impl RunConfig {
    pub fn new(scenario: ScenarioKind, method: Method) -> Self {
        Self {
            scenario,
            method,
            seed: 0,
            full_grid: false,
            long: false,
            adaptive: AdaptiveSettings::default(),
            mcmc: McmcConfig::default(),
            high_fidelity: HighFidelitySettings::default(),
            surrogate: SurrogateConfig::default(),
            custom: None,
        }
    }

    /// Every violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let positive = [
            ("adaptive.n_initial", self.adaptive.n_initial),
            ("adaptive.n_add", self.adaptive.n_add),
            ("high_fidelity.n_generations", self.high_fidelity.n_generations),
        ];
        for (name, v) in positive {
            if v == Some(0) {
                bad.push(format!("{name} must be at least 1"));
            }
        }
        if let DesignRule::Stretch { factor } = self.adaptive.design_rule {
            if !(factor >= 1.0 && factor.is_finite()) {
                bad.push("adaptive.design_rule.factor must be at least 1".into());
            }
        }
        if self.adaptive.strategy_a.ensemble_size < 2 {
            bad.push("adaptive.strategy_a.ensemble_size must be at least 2".into());
        }
        if !(self.adaptive.strategy_b.secondary_gp_noise > 0.0) {
            bad.push("adaptive.strategy_b.secondary_gp_noise must be positive".into());
        }
        for r in [self.mcmc.validate(), self.surrogate.pce.validate(), self.surrogate.gp.validate()] {
            if let Err(e) = r {
                bad.extend(e.to_string().trim_start_matches("invalid configuration: ").split("; ").map(String::from));
            }
        }
        match (self.scenario, &self.custom) {
            (ScenarioKind::Custom, None) => bad.push("custom: required when scenario = \"custom\"".into()),
            (ScenarioKind::Custom, Some(spec)) => bad.extend(spec.violations()),
            (_, Some(_)) => bad.push("custom: only allowed when scenario = \"custom\"".into()),
            _ => {}
        }
        bad
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(RunError::Invalid(bad))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialise to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run configs always serialise to JSON")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("run configs always serialise to JSON"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses TOML or JSON (detected from the first non-blank character) and
/// validates the result.
pub fn parse_config_str(text: &str) -> Result<RunConfig, RunError> {
    let cfg: RunConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| RunError::Parse(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| RunError::Parse(e.to_string()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file, or standard input for `-`.
pub fn parse_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = if path.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(path)?
    };
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config_str("scenario = \"synthetic-smoke\"\nmethod = \"b-pce-gp\"\n").unwrap();
        assert_eq!(cfg, RunConfig::new(ScenarioKind::SyntheticSmoke, Method::Surrogate(StrategyLabel::BPceGp)));
    }

    #[test]
    fn zero_additions_name_the_field() {
        let err = parse_config_str("scenario = \"synthetic-smoke\"\nmethod = \"a-pce\"\n[adaptive]\nn_add = 0\n")
            .unwrap_err();
        assert!(err.to_string().contains("adaptive.n_add"), "{err}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "scenario = \"custom\"\nmethod = \"none-gp\"\n[adaptive]\nn_add = 0\n[mcmc]\nn_chains = 1\n";
        let RunError::Invalid(v) = parse_config_str(text).unwrap_err() else { panic!() };
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config_str("scenario = \"synthetic-smoke\"\nmethod = \"a-pce\"\ncolour = 1\n").is_err());
        assert!(parse_config_str("scenario = \"synthetic-smoke\"\nmethod = \"a-pce\"\n[mcmc]\nchains = 4\n").is_err());
        assert!(parse_config_str("scenario = \"synthetic-smoke\"\nmethod = \"c-pce\"\n").is_err());
    }

    #[test]
    fn json_is_accepted() {
        let cfg =
            parse_config_str(r#"{"scenario": "example2-multimodal", "method": "high-fidelity", "seed": 3}"#).unwrap();
        assert_eq!(cfg.method, Method::HighFidelity);
        assert_eq!(cfg.seed, 3);
    }
}
