use std::fmt::Write as _;
use std::str::FromStr;

use super::losses::LossWeights;
use crate::error::{Error, Result};
use crate::kg::PartitionStrategy;
use crate::sha::ModelVariant;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub num_envs: usize,
    pub steps_per_update: usize,
    /// An episode ends after this many valid steps.
    pub episode_valid_step_limit: usize,
    /// An episode also ends after this many steps of any kind.
    pub episode_step_cap: usize,
    /// Environment interactions summed over all parallel environments.
    pub total_steps: u64,
    pub gamma: f64,
    pub lr: f64,
    pub weights: LossWeights,
    pub variant: ModelVariant,
    pub strategy: PartitionStrategy,
    pub seed: u64,
    /// Optimizer updates between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: u64,
    /// Transitions per gradient work unit.
    pub grad_chunk: usize,
    /// Cap on rollout threads; `None` means one per environment.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_envs: 32,
            steps_per_update: 8,
            episode_valid_step_limit: 100,
            episode_step_cap: 400,
            total_steps: 50_000,
            gamma: 0.9,
            lr: 0.003,
            weights: LossWeights::default(),
            variant: ModelVariant::Full,
            strategy: PartitionStrategy::Full,
            seed: 1,
            checkpoint_interval: 0,
            grad_chunk: 16,
            threads: None,
        }
    }
}

pub const KEYS: [&str; 17] = [
    "num_envs",
    "steps_per_update",
    "episode_valid_step_limit",
    "episode_step_cap",
    "total_steps",
    "gamma",
    "lr",
    "lambda_critic",
    "lambda_entropy",
    "lambda_template",
    "lambda_object",
    "variant",
    "strategy",
    "seed",
    "checkpoint_interval",
    "grad_chunk",
    "threads",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

impl TrainConfig {
    /// Sets one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "num_envs" => self.num_envs = parse(key, v)?,
            "steps_per_update" => self.steps_per_update = parse(key, v)?,
            "episode_valid_step_limit" => self.episode_valid_step_limit = parse(key, v)?,
            "episode_step_cap" => self.episode_step_cap = parse(key, v)?,
            "total_steps" => self.total_steps = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "lambda_critic" => self.weights.critic = parse(key, v)?,
            "lambda_entropy" => self.weights.entropy = parse(key, v)?,
            "lambda_template" => self.weights.template = parse(key, v)?,
            "lambda_object" => self.weights.object = parse(key, v)?,
            "variant" => self.variant = v.parse()?,
            "strategy" => self.strategy = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "checkpoint_interval" => self.checkpoint_interval = parse(key, v)?,
            "grad_chunk" => self.grad_chunk = parse(key, v)?,
            "threads" => {
                self.threads = if v == "auto" { None } else { Some(parse(key, v)?) };
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "num_envs" => self.num_envs.to_string(),
            "steps_per_update" => self.steps_per_update.to_string(),
            "episode_valid_step_limit" => self.episode_valid_step_limit.to_string(),
            "episode_step_cap" => self.episode_step_cap.to_string(),
            "total_steps" => self.total_steps.to_string(),
            "gamma" => self.gamma.to_string(),
            "lr" => self.lr.to_string(),
            "lambda_critic" => self.weights.critic.to_string(),
            "lambda_entropy" => self.weights.entropy.to_string(),
            "lambda_template" => self.weights.template.to_string(),
            "lambda_object" => self.weights.object.to_string(),
            "variant" => self.variant.to_string(),
            "strategy" => self.strategy.to_string(),
            "seed" => self.seed.to_string(),
            "checkpoint_interval" => self.checkpoint_interval.to_string(),
            "grad_chunk" => self.grad_chunk.to_string(),
            "threads" => self.threads.map_or("auto".into(), |t| t.to_string()),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_envs", self.num_envs),
            ("steps_per_update", self.steps_per_update),
            ("episode_valid_step_limit", self.episode_valid_step_limit),
            ("episode_step_cap", self.episode_step_cap),
            ("grad_chunk", self.grad_chunk),
            ("threads", self.threads.unwrap_or(1)),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if self.total_steps == 0 {
            return Err(Error::Config("`total_steps` must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("`gamma` = {} is outside (0, 1]", self.gamma)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("`lr` must be positive".into()));
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.num_envs * self.steps_per_update
    }

    /// Updates needed to reach `total_steps`, rounding up.
    pub fn num_updates(&self) -> u64 {
        self.total_steps.div_ceil(self.batch_size() as u64)
    }

    /// `key = value` lines in [`KEYS`] order.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("known key"));
        }
        s
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.batch_size(), 256);
        assert_eq!(c.num_updates(), 196);
    }

    #[test]
    fn kv_round_trip() {
        let mut c = TrainConfig::default();
        c.set("variant", "no-low-level").unwrap();
        c.set("lambda_entropy", "0.05").unwrap();
        c.set("threads", "2").unwrap();
        let mut d = TrainConfig::default();
        for (k, v) in parse_kv(&c.to_kv_string()).unwrap() {
            d.set(&k, &v).unwrap();
        }
        assert_eq!(c, d);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut c = TrainConfig::default();
        assert!(matches!(c.set("num_envs", "many"), Err(Error::Config(_))));
        assert!(matches!(c.set("colour", "blue"), Err(Error::Config(_))));
        c.gamma = 0.0;
        assert!(c.validate().is_err());
        assert!(parse_kv("seed 3").is_err());
        assert_eq!(parse_kv("# c\nseed = 3 # x\n").unwrap(), [("seed".into(), "3".into())]);
    }
}
