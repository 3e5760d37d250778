//! Run configuration: flat `key=value` files with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pipeline::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub holdout: String,
    /// Hypotheses per prediction.
    pub topk: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            holdout: "zara1".into(),
            topk: 20,
            seed: 0,
            out: PathBuf::from("out"),
            train: TrainConfig::default(),
        }
    }
}

fn canonical(key: &str) -> &str {
    match key {
        "k_clusters" | "k-clusters" => "k",
        "wh" => "w_history",
        "wf" => "w_future",
        "dv" => "speed_tolerance",
        "dtheta" => "angle_tolerance",
        "epochs_stage1" | "epochs-stage1" => "pretrain_epochs",
        "epochs_stage2" | "epochs-stage2" => "classifier_epochs",
        "epochs_stage3" | "epochs-stage3" => "synthesis_epochs",
        other => other,
    }
}

impl RunConfig {
    /// Sets a field by key. Command-line flag names are accepted as aliases.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = || Error::Config(format!("cannot parse `{value}` for `{key}`"));
        match canonical(key.trim()) {
            "data" => self.data = PathBuf::from(value),
            "holdout" => self.holdout = value.to_string(),
            "topk" => self.topk = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "out" => self.out = PathBuf::from(value),
            k => {
                if !self.train.set(k, value)? {
                    return Err(Error::Config(format!("unknown config key `{key}`")));
                }
            }
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(&fs::read_to_string(path)?)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.topk == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.topk > self.train.k {
            return Err(Error::Config(format!(
                "k = {} exceeds the number of modalities K = {}",
                self.topk, self.train.k
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_constants() {
        let c = RunConfig::default();
        assert_eq!(c.train.k, 200);
        assert_eq!((c.train.w_history, c.train.w_future), (0.5, 0.5));
        assert_eq!(c.train.qualify.radius, 1.0);
        assert_eq!(c.train.qualify.speed_tolerance, 0.1);
        assert_eq!(c.train.qualify.angle_tolerance, 0.1 * std::f64::consts::PI);
        assert_eq!(c.topk, 20);
        c.validate().unwrap();
    }

    #[test]
    fn file_values_and_aliases() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nk_clusters = 50\nwh=0.25 # trailing\n\ntopk=5\nholdout=eth\n")
            .unwrap();
        assert_eq!(c.train.k, 50);
        assert_eq!(c.train.w_history, 0.25);
        assert_eq!(c.topk, 5);
        assert_eq!(c.holdout, "eth");
        assert!(c.apply_text("nonsense=1").is_err());
        assert!(c.apply_text("k=abc").is_err());
        assert!(c.apply_text("no equals sign").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.train.k = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.topk = 201;
        assert!(c.validate().is_err());
    }
}
