use std::fmt::Write as _;
use std::path::Path;

use super::checkpoint::save_checkpoint;
use super::config::TrainConfig;
use super::losses::LossTerms;
use super::metrics::{MetricRow, MetricsWriter, MovingAverage};
use super::rollout::{rollout_collect, EnvWorker, RolloutBatch};
use super::update::{batch_gradients, LossContext};
use crate::agent::Agent;
use crate::autodiff::{adam_step, AdamConfig, AdamState};
use crate::env::TextEnv;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum TrainEvent {
    Episode(MetricRow),
    Update { index: u64, env_steps: u64, losses: LossTerms },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub updates: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub final_avg100: f64,
}

/// A2C over a set of parallel environments.
pub struct Trainer<E> {
    pub config: TrainConfig,
    pub agent: Agent,
    adam: AdamState,
    adam_config: AdamConfig,
    workers: Vec<EnvWorker<E>>,
    pool: rayon::ThreadPool,
    env_steps: u64,
    updates: u64,
    episodes: u64,
    avg: MovingAverage,
    failure: Option<String>,
}

impl<E: TextEnv + Clone> Trainer<E> {
    pub fn new(config: TrainConfig, agent: Agent, env: &E) -> Result<Self> {
        config.validate()?;
        if agent.variant() != config.variant || agent.strategy() != config.strategy {
            return Err(Error::Config("agent was built for a different variant or strategy".into()));
        }
        let workers = (0..config.num_envs)
            .map(|i| EnvWorker::new(i, env.clone(), config.seed))
            .collect::<Result<Vec<_>>>()?;
        let threads = config.threads.unwrap_or(config.num_envs).min(config.num_envs).max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let adam = AdamState::new(&agent.store);
        let adam_config = AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        };
        Ok(Self {
            config,
            agent,
            adam,
            adam_config,
            workers,
            pool,
            env_steps: 0,
            updates: 0,
            episodes: 0,
            avg: MovingAverage::default(),
            failure: None,
        })
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn is_finished(&self) -> bool {
        self.env_steps >= self.config.total_steps
    }

    /// Human-readable dump of the batch that produced a non-finite loss.
    pub fn failure_dump(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    /// One rollout segment followed by exactly one optimizer step.
    pub fn update(&mut self, on_event: &mut dyn FnMut(&TrainEvent) -> Result<()>) -> Result<LossTerms> {
        let cfg = &self.config;
        let (limit, cap, steps, chunk) = (
            cfg.episode_valid_step_limit,
            cfg.episode_step_cap,
            cfg.steps_per_update,
            cfg.grad_chunk,
        );
        let agent = &self.agent;
        let workers = &mut self.workers;
        let batch = self
            .pool
            .install(|| rollout_collect(agent, workers, steps, limit, cap))?;
        let ctx = LossContext {
            model: &agent.model,
            vocab: &agent.vocab,
            templates: &agent.templates,
            gamma: cfg.gamma,
            weights: cfg.weights,
        };
        let store = &agent.store;
        let result = self.pool.install(|| batch_gradients(store, &ctx, &batch.transitions, chunk));
        let (grads, losses) = match result {
            Ok(r) if r.0.is_finite() => r,
            Ok(_) => {
                self.failure = Some(describe_batch(&batch));
                return Err(Error::NonFiniteLoss("gradient"));
            }
            Err(e) => {
                if matches!(e, Error::NonFiniteLoss(_)) {
                    self.failure = Some(describe_batch(&batch));
                }
                return Err(e);
            }
        };
        adam_step(&mut self.agent.store, &grads, &mut self.adam, &self.adam_config)?;
        let n = self.config.num_envs as u64;
        let before = self.env_steps;
        for f in &batch.finished {
            self.episodes += 1;
            let avg100 = self.avg.push(f.score as f64);
            on_event(&TrainEvent::Episode(MetricRow {
                episode: self.episodes,
                step: before + (f.step as u64 + 1) * n,
                raw_score: f.score as f64,
                avg100,
            }))?;
        }
        self.env_steps += batch.transitions.len() as u64;
        self.updates += 1;
        on_event(&TrainEvent::Update {
            index: self.updates,
            env_steps: self.env_steps,
            losses,
        })?;
        Ok(losses)
    }

    pub fn run(&mut self, on_event: &mut dyn FnMut(&TrainEvent) -> Result<()>) -> Result<TrainSummary> {
        while !self.is_finished() {
            self.update(on_event)?;
        }
        Ok(self.summary())
    }

    pub fn summary(&self) -> TrainSummary {
        TrainSummary {
            updates: self.updates,
            env_steps: self.env_steps,
            episodes: self.episodes,
            final_avg100: self.avg.mean(),
        }
    }
}

fn describe_batch(batch: &RolloutBatch) -> String {
    let mut s = String::from("index,action,reward,value,next_value,done,log_prob\n");
    for (i, t) in batch.transitions.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{}",
            t.action, t.reward, t.value, t.next_value, t.done, t.log_prob
        );
    }
    s
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const FAILURE_FILE: &str = "failed_batch.csv";

/// Trains to completion, writing `metrics.csv`, periodic
/// `checkpoint-<update>.bin` files, and a final `checkpoint.bin` into `out`.
pub fn train_run<E: TextEnv + Clone>(
    config: TrainConfig,
    agent: Agent,
    env: &E,
    out: &Path,
    on_event: &mut dyn FnMut(&TrainEvent) -> Result<()>,
) -> Result<(TrainSummary, Agent)> {
    std::fs::create_dir_all(out)?;
    let mut trainer = Trainer::new(config, agent, env)?;
    let mut metrics = MetricsWriter::create(&out.join(METRICS_FILE))?;
    let interval = trainer.config.checkpoint_interval;
    let seed = trainer.config.seed;
    let hash = trainer.agent.config_hash();
    while !trainer.is_finished() {
        let mut rows = Vec::new();
        let result = trainer.update(&mut |ev| {
            if let TrainEvent::Episode(row) = ev {
                rows.push(*row);
            }
            on_event(ev)
        });
        for row in &rows {
            metrics.write(row)?;
        }
        if let Err(e) = result {
            metrics.flush()?;
            if let Some(dump) = trainer.failure_dump() {
                std::fs::write(out.join(FAILURE_FILE), dump)?;
            }
            return Err(e);
        }
        if interval > 0 && trainer.updates() % interval == 0 {
            let path = out.join(format!("checkpoint-{}.bin", trainer.updates()));
            save_checkpoint(&path, &trainer.agent.store, hash, seed)?;
        }
    }
    metrics.flush()?;
    save_checkpoint(&out.join(CHECKPOINT_FILE), &trainer.agent.store, hash, seed)?;
    Ok((trainer.summary(), trainer.agent))
}
