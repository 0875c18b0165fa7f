//! Run configuration: a flat `key = value` text format with `#` comments.
//!
//! ```text
//! experiment = 2
//! final_corner = northwest
//! num_trials = 20
//! ```
//!
//! Keys that are absent take the defaults for the chosen experiment.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::ActionSelection;
use crate::env::{RewardLocation, RewardRule};
use crate::experiments::{
    run_experiment_1, run_experiment_2, run_experiment_3, ExperimentParams, ExperimentReport,
    DEFAULT_ALPHA_INIT,
};
use crate::model::ModelVariant;

pub const KEYS: [&str; 12] = [
    "experiment",
    "model_variant",
    "final_corner",
    "utility_only",
    "num_trials",
    "base_seed",
    "gamma",
    "alpha_init",
    "eta",
    "action_selection",
    "reward_rule",
    "output_dir",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line of the offending entry, if the error is tied to one.
    pub line: Option<usize>,
    /// Key the error is about, when there is one.
    pub key: Option<&'static str>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem found in a config file.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: u8,
    /// Agent model for experiments 1 and 2. Experiment 3 always runs both.
    pub model_variant: ModelVariant,
    pub final_corner: RewardLocation,
    pub utility_only: bool,
    pub num_trials: usize,
    pub base_seed: u64,
    pub gamma: f64,
    pub alpha_init: f64,
    pub eta: f64,
    pub action_selection: ActionSelection,
    pub reward_rule: RewardRule,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Defaults for `experiment`: one argmax trial for experiment 1, twenty
    /// sampled trials for experiment 2 and ten for experiment 3.
    pub fn defaults(experiment: u8) -> Self {
        let (num_trials, action_selection) = match experiment {
            1 => (1, ActionSelection::Argmax),
            3 => (10, ActionSelection::Sample),
            _ => (20, ActionSelection::Sample),
        };
        Self {
            experiment,
            model_variant: ModelVariant::ToolState,
            final_corner: RewardLocation::Northeast,
            utility_only: false,
            num_trials,
            base_seed: 0,
            gamma: 16.0,
            alpha_init: DEFAULT_ALPHA_INIT,
            eta: 1.0,
            action_selection,
            reward_rule: RewardRule::ExactMatch,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn params(&self) -> ExperimentParams {
        ExperimentParams {
            num_trials: self.num_trials,
            base_seed: self.base_seed,
            gamma: self.gamma,
            alpha_init: self.alpha_init,
            eta: self.eta,
            action_selection: self.action_selection,
            reward_rule: self.reward_rule,
            ..ExperimentParams::default()
        }
    }

    /// Runs the configured experiment. Call [`RunConfig::validate`] first.
    pub fn run(&self) -> crate::Result<ExperimentReport> {
        let params = self.params();
        match self.experiment {
            1 => run_experiment_1(self.model_variant, &params),
            2 => run_experiment_2(self.model_variant, self.final_corner, &params),
            _ => run_experiment_3(self.final_corner, self.utility_only, &params),
        }
    }

    /// Checks everything the experiments would otherwise reject mid-run.
    pub fn validate(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        let mut err = |key: &'static str, message: String| {
            errs.push(ConfigError {
                line: None,
                key: Some(key),
                message,
            })
        };
        if !(1..=3).contains(&self.experiment) {
            err(
                "experiment",
                format!("experiment must be 1, 2 or 3, got {}", self.experiment),
            );
        }
        if self.num_trials == 0 {
            err("num_trials", "num_trials must be at least 1".into());
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            err(
                "gamma",
                format!("gamma must be finite and > 0, got {}", self.gamma),
            );
        }
        if !(self.alpha_init.is_finite() && self.alpha_init > 0.0) {
            err(
                "alpha_init",
                format!("alpha_init must be finite and > 0, got {}", self.alpha_init),
            );
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            err(
                "eta",
                format!("eta must be finite and > 0, got {}", self.eta),
            );
        }
        if self.experiment != 1 && !self.final_corner.is_corner() {
            err(
                "final_corner",
                format!(
                    "final_corner must be northeast or northwest, got {}",
                    self.final_corner
                ),
            );
        }
        if self.utility_only && self.experiment != 3 {
            err(
                "utility_only",
                "utility_only applies to experiment 3 only".into(),
            );
        }
        if self.output_dir.as_os_str().is_empty() {
            err("output_dir", "output_dir must not be empty".into());
        }
        errs
    }

    /// Writes every key so that `parse_config(render())` returns `self`.
    pub fn render(&self) -> String {
        format!(
            "experiment = {}\nmodel_variant = {}\nfinal_corner = {}\nutility_only = {}\n\
             num_trials = {}\nbase_seed = {}\ngamma = {:?}\nalpha_init = {:?}\neta = {:?}\n\
             action_selection = {}\nreward_rule = {}\noutput_dir = {}\n",
            self.experiment,
            self.model_variant,
            self.final_corner,
            self.utility_only,
            self.num_trials,
            self.base_seed,
            self.gamma,
            self.alpha_init,
            self.eta,
            self.action_selection.name(),
            self.reward_rule.name(),
            self.output_dir.display(),
        )
    }
}

fn parse_value<T: FromStr>(raw: &str, what: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| format!("invalid {what} `{raw}`: {e}"))
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid boolean `{raw}`")),
    }
}

fn apply(cfg: &mut RunConfig, key: &str, raw: &str) -> Result<(), String> {
    match key {
        "experiment" => cfg.experiment = parse_value(raw, "experiment")?,
        "model_variant" => cfg.model_variant = parse_value(raw, "model_variant")?,
        "final_corner" => cfg.final_corner = parse_value(raw, "final_corner")?,
        "utility_only" => cfg.utility_only = parse_bool(raw)?,
        "num_trials" => cfg.num_trials = parse_value(raw, "num_trials")?,
        "base_seed" => cfg.base_seed = parse_value(raw, "base_seed")?,
        "gamma" => cfg.gamma = parse_value(raw, "gamma")?,
        "alpha_init" => cfg.alpha_init = parse_value(raw, "alpha_init")?,
        "eta" => cfg.eta = parse_value(raw, "eta")?,
        "action_selection" => cfg.action_selection = parse_value(raw, "action_selection")?,
        "reward_rule" => cfg.reward_rule = parse_value(raw, "reward_rule")?,
        "output_dir" => cfg.output_dir = PathBuf::from(raw),
        _ => unreachable!("key checked against KEYS"),
    }
    Ok(())
}

/// Parses and validates a config. All errors are collected rather than
/// stopping at the first.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut errs = Vec::new();
    let mut entries: Vec<(usize, &str, &str)> = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errs.push(ConfigError {
                line: Some(line),
                key: None,
                message: format!("expected `key = value`, got `{content}`"),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            errs.push(ConfigError {
                line: Some(line),
                key: None,
                message: format!("unknown key `{key}`"),
            });
            continue;
        }
        if let Some((first, _, _)) = entries.iter().find(|(_, k, _)| *k == key) {
            errs.push(ConfigError {
                line: Some(line),
                key: None,
                message: format!("duplicate key `{key}` (first set on line {first})"),
            });
            continue;
        }
        entries.push((line, key, value));
    }

    let experiment = match entries.iter().find(|(_, k, _)| *k == "experiment") {
        Some((line, _, v)) => match v.parse::<u8>() {
            Ok(e) => e,
            Err(_) => {
                errs.push(ConfigError {
                    line: Some(*line),
                    key: Some("experiment"),
                    message: format!("invalid experiment `{v}`"),
                });
                return Err(ConfigErrors(errs));
            }
        },
        None => {
            errs.push(ConfigError {
                line: None,
                key: Some("experiment"),
                message: "missing required key `experiment`".into(),
            });
            return Err(ConfigErrors(errs));
        }
    };

    let mut cfg = RunConfig::defaults(experiment);
    let mut bad_keys = Vec::new();
    for &(line, key, value) in &entries {
        if let Err(message) = apply(&mut cfg, key, value) {
            bad_keys.push(key);
            errs.push(ConfigError {
                line: Some(line),
                key: KEYS.iter().copied().find(|k| *k == key),
                message,
            });
        }
    }
    for mut e in cfg.validate() {
        if e.key.is_some_and(|k| bad_keys.contains(&k)) {
            continue;
        }
        e.line = entries
            .iter()
            .find(|(_, k, _)| Some(*k) == e.key)
            .map(|(l, _, _)| *l);
        errs.push(e);
    }
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn messages(text: &str) -> Vec<String> {
        parse_config(text)
            .unwrap_err()
            .0
            .into_iter()
            .map(|e| e.to_string())
            .collect()
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("experiment = 1\n").unwrap();
        assert_eq!(cfg.gamma, 16.0);
        assert_eq!(cfg.alpha_init, DEFAULT_ALPHA_INIT);
        assert_eq!(cfg.eta, 1.0);
        assert_eq!(cfg.action_selection, ActionSelection::Argmax);
        assert_eq!(parse_config("experiment = 2").unwrap().num_trials, 20);
        assert_eq!(parse_config("experiment = 3").unwrap().num_trials, 10);
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = parse_config(
            "# tool discovery\n\n  experiment=2   # inline\nfinal_corner = north-west\n",
        )
        .unwrap();
        assert_eq!(cfg.final_corner, RewardLocation::Northwest);
    }

    #[test]
    fn negative_gamma_rejected() {
        let m = messages("experiment = 2\ngamma = -1\n");
        assert_eq!(
            m,
            vec!["line 2: gamma must be finite and > 0, got -1".to_string()]
        );
    }

    #[test]
    fn unknown_key_named() {
        let m = messages("experiment = 2\ntemprature = 3\n");
        assert_eq!(m, vec!["line 2: unknown key `temprature`".to_string()]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let m = messages("experiment = 2\nnum_trials = many\nbase_seed = -4\ngarbage\n");
        assert_eq!(m.len(), 3, "{m:?}");
        assert!(m[0].starts_with("line 4:"));
        assert!(m[1].starts_with("line 2:"));
        assert!(m[2].starts_with("line 3:"));
    }

    #[test]
    fn missing_experiment() {
        let m = messages("gamma = 4\n");
        assert!(m[0].contains("experiment"));
    }

    #[test]
    fn cross_field_checks() {
        assert!(!messages("experiment = 2\nutility_only = true\n").is_empty());
        assert!(!messages("experiment = 3\nfinal_corner = east\n").is_empty());
        assert!(!messages("experiment = 4\n").is_empty());
        assert!(!messages("experiment = 2\nexperiment = 3\n").is_empty());
        assert!(parse_config("experiment = 1\nfinal_corner = east\n").is_ok());
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            1u8..=3,
            any::<bool>(),
            any::<bool>(),
            any::<bool>(),
            1usize..100,
            any::<u64>(),
            (1e-3f64..1e3, 1e-3f64..1e3, 1e-3f64..1e3),
            any::<bool>(),
            any::<bool>(),
            "[a-z][a-z0-9_/]{0,12}",
        )
            .prop_map(
                |(exp, aff, nw, util, trials, seed, (g, a, e), argmax, hv, dir)| RunConfig {
                    experiment: exp,
                    model_variant: if aff {
                        ModelVariant::Affordance
                    } else {
                        ModelVariant::ToolState
                    },
                    final_corner: if nw {
                        RewardLocation::Northwest
                    } else {
                        RewardLocation::Northeast
                    },
                    utility_only: util && exp == 3,
                    num_trials: trials,
                    base_seed: seed,
                    gamma: g,
                    alpha_init: a,
                    eta: e,
                    action_selection: if argmax {
                        ActionSelection::Argmax
                    } else {
                        ActionSelection::Sample
                    },
                    reward_rule: if hv {
                        RewardRule::HvReachesAdjacent
                    } else {
                        RewardRule::ExactMatch
                    },
                    output_dir: PathBuf::from(dir),
                },
            )
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(cfg in arb_config()) {
            prop_assert_eq!(parse_config(&cfg.render()).unwrap(), cfg);
        }
    }
}
