//! Resolved pipeline configuration. Precedence: CLI flags > config file
//! (key=value lines) > defaults.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

use synthqa_core::GenerationConfig;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub size: usize,
    pub balance: bool,
    pub max_retries: u32,
    pub max_facts: usize,
    pub workers: usize,
    pub dev_fraction: f64,
    pub perturb_prob: f64,
    pub step_min: usize,
    pub step_max: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            size: 1000,
            balance: true,
            max_retries: 200,
            max_facts: 25,
            workers: 1,
            dev_fraction: 0.0,
            perturb_prob: 0.5,
            step_min: 2,
            step_max: 6,
        }
    }
}

impl PipelineConfig {
    pub fn load_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
        let text = std::fs::read_to_string(path.as_ref())
            .with_context(|| format!("cannot read config {}", path.as_ref().display()))?;
        let mut out = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                bail!("config line {}: expected key=value", i + 1);
            };
            out.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(out)
    }

    /// Applies key=value settings from a config file.
    pub fn apply_file(&mut self, values: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in values {
            match key.as_str() {
                "seed" => self.seed = value.parse().context("seed")?,
                "size" => self.size = value.parse().context("size")?,
                "balance" => self.balance = value.parse().context("balance")?,
                "max_retries" => self.max_retries = value.parse().context("max_retries")?,
                "max_facts" => self.max_facts = value.parse().context("max_facts")?,
                "workers" => self.workers = value.parse().context("workers")?,
                "dev_fraction" => self.dev_fraction = value.parse().context("dev_fraction")?,
                "perturb_prob" => self.perturb_prob = value.parse().context("perturb_prob")?,
                "step_min" => self.step_min = value.parse().context("step_min")?,
                "step_max" => self.step_max = value.parse().context("step_max")?,
                other => bail!("unknown config key {other:?}"),
            }
        }
        Ok(())
    }

    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            max_retries: self.max_retries,
            max_facts: self.max_facts,
            seed: self.seed,
            ..GenerationConfig::default()
        }
    }

    /// The resolved configuration in config-file syntax, for provenance.
    pub fn emit(&self) -> String {
        format!(
            "seed={}\nsize={}\nbalance={}\nmax_retries={}\nmax_facts={}\nworkers={}\ndev_fraction={}\nperturb_prob={}\nstep_min={}\nstep_max={}\n",
            self.seed,
            self.size,
            self.balance,
            self.max_retries,
            self.max_facts,
            self.workers,
            self.dev_fraction,
            self.perturb_prob,
            self.step_min,
            self.step_max,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn file_values_override_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nseed=9\nworkers=4").unwrap();
        let values = PipelineConfig::load_file(f.path()).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.apply_file(&values).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.workers, 4);
        assert_eq!(cfg.max_facts, 25);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "bogus=1").unwrap();
        let values = PipelineConfig::load_file(f.path()).unwrap();
        assert!(PipelineConfig::default().apply_file(&values).is_err());
    }

    #[test]
    fn emit_round_trips() {
        let cfg = PipelineConfig { seed: 7, workers: 8, ..PipelineConfig::default() };
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(cfg.emit().as_bytes()).unwrap();
        let values = PipelineConfig::load_file(f.path()).unwrap();
        let mut cfg2 = PipelineConfig::default();
        cfg2.apply_file(&values).unwrap();
        assert_eq!(cfg2.seed, 7);
        assert_eq!(cfg2.workers, 8);
    }
}
