//! Run specification files: TOML key-value documents whose keys mirror the
//! training configuration exactly. Unknown keys are a hard error, so a typo
//! never silently falls back to a default.

use std::fs;
use std::path::Path;

use anyhow::Context;
use jcl_core::trainer::TrainConfig;

pub fn load_spec(path: &Path) -> anyhow::Result<TrainConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading spec file {}", path.display()))?;
    let config: TrainConfig = toml::from_str(&text)
        .with_context(|| format!("parsing spec file {}", path.display()))?;
    config
        .validate()
        .with_context(|| format!("validating spec file {}", path.display()))?;
    Ok(config)
}

/// Writes the fully-resolved configuration (all defaults applied) next to a
/// run's outputs, so the run can be reproduced from its artifacts alone.
pub fn write_resolved_spec(config: &TrainConfig, path: &Path) -> anyhow::Result<()> {
    let text = toml::to_string_pretty(config).context("serializing resolved spec")?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_spec_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.toml");
        fs::write(&path, "seed = 7\nepochs = 3\n").unwrap();
        let cfg = load_spec(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.tau, TrainConfig::default().tau);
    }

    #[test]
    fn unknown_key_is_a_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.toml");
        fs::write(&path, "seed = 7\ntua = 0.2\n").unwrap();
        let err = load_spec(&path).unwrap_err();
        assert!(format!("{err:#}").contains("tua"), "{err:#}");
    }

    #[test]
    fn invalid_value_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.toml");
        fs::write(&path, "tau = 0.0\n").unwrap();
        assert!(load_spec(&path).is_err());
    }

    #[test]
    fn resolved_spec_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resolved.toml");
        let cfg = TrainConfig {
            seed: 123,
            lambda: 2.5,
            ..TrainConfig::default()
        };
        write_resolved_spec(&cfg, &path).unwrap();
        let reloaded = load_spec(&path).unwrap();
        assert_eq!(reloaded, cfg);
    }
}
