use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::{Agent, Tracker};
use crate::decoder::{DecodeMode, TemplateSet};
use crate::encoders::Vocabulary;
use crate::env::{StepOutcome, TextEnv};
use crate::error::{Error, Result};
use crate::model::PolicyInput;

/// One recorded interaction, enough to rebuild its loss.
#[derive(Clone, Debug)]
pub struct Transition {
    pub input: PolicyInput,
    pub template: usize,
    pub objects: Vec<usize>,
    pub action: String,
    pub log_prob: f64,
    pub reward: f64,
    /// Critic estimate at collection time.
    pub value: f64,
    /// Critic estimate of the following state; ignored when `done`.
    pub next_value: f64,
    pub done: bool,
    /// 1 for every template that has a valid instantiation.
    pub template_labels: Vec<f64>,
    /// 1 for every candidate that is an object of some valid action.
    pub object_labels: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinishedEpisode {
    pub env: usize,
    /// Step index within the rollout segment.
    pub step: usize,
    pub score: i64,
}

#[derive(Clone, Debug, Default)]
pub struct RolloutBatch {
    /// Step-major: all environments for step 0, then step 1, ...
    pub transitions: Vec<Transition>,
    /// In completion order (step-major, then environment index).
    pub finished: Vec<FinishedEpisode>,
}

/// One environment with the agent's episode state and its own random stream.
pub struct EnvWorker<E> {
    pub id: usize,
    env: E,
    tracker: Tracker,
    rng: ChaCha8Rng,
    valid_steps: usize,
    steps: usize,
}

/// Labels for the auxiliary valid-action task.
pub fn valid_action_labels(
    valid: &BTreeSet<String>,
    templates: &TemplateSet,
    vocab: &Vocabulary,
    candidates: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let mut template_labels = vec![0.0; templates.len()];
    let mut objects = BTreeSet::new();
    for action in valid {
        if let Some((t, objs)) = templates.parse_action(action) {
            template_labels[t] = 1.0;
            objects.extend(objs.iter().filter_map(|o| vocab.get(o)));
        }
    }
    let object_labels = candidates
        .iter()
        .map(|c| if objects.contains(c) { 1.0 } else { 0.0 })
        .collect();
    (template_labels, object_labels)
}

/// Stream seed for environment `id` of a run seeded with `seed`.
pub fn worker_seed(seed: u64, id: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (id as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

impl<E: TextEnv> EnvWorker<E> {
    pub fn new(id: usize, mut env: E, seed: u64) -> Result<Self> {
        let obs = env.reset(seed);
        Ok(Self {
            id,
            env,
            tracker: Tracker::start(obs).map_err(|e| Error::Env {
                env: id,
                reason: e.to_string(),
            })?,
            rng: ChaCha8Rng::seed_from_u64(worker_seed(seed, id)),
            valid_steps: 0,
            steps: 0,
        })
    }

    fn fault(&self, e: Error) -> Error {
        Error::Env {
            env: self.id,
            reason: e.to_string(),
        }
    }

    /// Updates the tracker and step counters; true when the episode is over.
    fn observe(&mut self, action: &str, out: &StepOutcome, limit: usize, cap: usize) -> Result<bool> {
        self.tracker.advance(action, out).map_err(|e| self.fault(e))?;
        self.steps += 1;
        if out.valid {
            self.valid_steps += 1;
        }
        Ok(out.done || self.valid_steps >= limit || self.steps >= cap)
    }

    /// Samples an action, applies it, and resets the episode if it ended.
    fn step(&mut self, agent: &Agent, limit: usize, cap: usize) -> Result<(Transition, Option<FinishedEpisode>)> {
        let input = agent.input(&self.tracker);
        let view = agent
            .act(&input, DecodeMode::Sample(&mut self.rng))
            .map_err(|e| self.fault(e))?;
        let (template_labels, object_labels) = valid_action_labels(
            &self.env.valid_actions(),
            &agent.templates,
            &agent.vocab,
            &input.candidates,
        );
        let action = view.decision.action.clone();
        let out = self.env.step(&action);
        let ended = self.observe(&action, &out, limit, cap)?;
        let finished = if ended {
            let score = out.obs.score;
            let obs = self.env.reset(0);
            self.tracker = Tracker::start(obs).map_err(|e| self.fault(e))?;
            self.valid_steps = 0;
            self.steps = 0;
            Some(FinishedEpisode {
                env: self.id,
                step: 0,
                score,
            })
        } else {
            None
        };
        let transition = Transition {
            input,
            template: view.decision.template,
            objects: view.decision.objects,
            action,
            log_prob: view.decision.log_prob,
            reward: out.reward,
            value: view.value,
            next_value: 0.0,
            done: ended,
            template_labels,
            object_labels,
        };
        Ok((transition, finished))
    }
}

/// Runs `steps` steps in every environment and fills in bootstrap values.
pub fn rollout_collect<E: TextEnv>(
    agent: &Agent,
    workers: &mut [EnvWorker<E>],
    steps: usize,
    limit: usize,
    cap: usize,
) -> Result<RolloutBatch> {
    let n = workers.len();
    let mut batch = RolloutBatch::default();
    for step in 0..steps {
        let results: Vec<Result<(Transition, Option<FinishedEpisode>)>> =
            workers.par_iter_mut().map(|w| w.step(agent, limit, cap)).collect();
        for r in results {
            let (t, f) = r?;
            batch.transitions.push(t);
            batch.finished.extend(f.map(|f| FinishedEpisode { step, ..f }));
        }
    }
    let bootstrap: Vec<Result<f64>> = workers
        .par_iter_mut()
        .map(|w| agent.value(&agent.input(&w.tracker)).map_err(|e| w.fault(e)))
        .collect();
    for i in 0..batch.transitions.len() {
        let next = if i + n < batch.transitions.len() {
            batch.transitions[i + n].value
        } else {
            match &bootstrap[i % n] {
                Ok(v) => *v,
                Err(e) => {
                    return Err(Error::Env {
                        env: i % n,
                        reason: e.to_string(),
                    })
                }
            }
        };
        let t = &mut batch.transitions[i];
        t.next_value = if t.done { 0.0 } else { next };
    }
    Ok(batch)
}
