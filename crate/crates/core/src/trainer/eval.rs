use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;

use crate::agent::{Agent, StepView, Tracker};
use crate::decoder::DecodeMode;
use crate::env::{ObservationBundle, TextEnv};
use crate::error::{Error, Result};
use crate::kg::Triple;

/// How actions are chosen during evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalPolicy {
    /// Greedy decoding from the model.
    Greedy,
    /// A fixed action list, replayed from the start of every episode.
    Script(Vec<String>),
}

/// One evaluated step: what was seen, what the model attended to, and the result.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub index: usize,
    pub obs: ObservationBundle,
    pub new_triples: BTreeSet<Triple>,
    /// Absent for scripted policies.
    pub view: Option<StepView>,
    pub action: String,
    pub reward: f64,
    pub score: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeLimits {
    pub valid_steps: usize,
    pub steps: usize,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        Self {
            valid_steps: 100,
            steps: 400,
        }
    }
}

/// Plays one episode without learning and returns the final score.
pub fn run_episode<E: TextEnv>(
    agent: &Agent,
    env: &mut E,
    policy: &EvalPolicy,
    seed: u64,
    limits: EpisodeLimits,
    on_step: &mut dyn FnMut(&StepRecord) -> Result<()>,
) -> Result<i64> {
    let mut tracker = Tracker::start(env.reset(seed))?;
    let (mut valid, mut steps) = (0, 0);
    loop {
        let (action, view) = match policy {
            EvalPolicy::Greedy => {
                let input = agent.input(&tracker);
                let view = agent.act::<ChaCha8Rng>(&input, DecodeMode::Greedy)?;
                (view.decision.action.clone(), Some(view))
            }
            EvalPolicy::Script(actions) => match actions.get(steps) {
                Some(a) => (a.clone(), None),
                None => return Ok(tracker.obs.score),
            },
        };
        let out = env.step(&action);
        let record = StepRecord {
            index: steps + 1,
            obs: tracker.obs.clone(),
            new_triples: tracker.new_triples.clone(),
            view,
            action: action.clone(),
            reward: out.reward,
            score: out.obs.score,
        };
        on_step(&record)?;
        tracker.advance(&action, &out)?;
        steps += 1;
        if out.valid {
            valid += 1;
        }
        if out.done || valid >= limits.valid_steps || steps >= limits.steps {
            return Ok(out.obs.score);
        }
    }
}

/// Mean final score over `episodes` episodes.
pub fn evaluate<E: TextEnv>(
    agent: &Agent,
    env: &mut E,
    episodes: usize,
    policy: &EvalPolicy,
    seed: u64,
    limits: EpisodeLimits,
) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::Config("`episodes` must be positive".into()));
    }
    let mut total = 0.0;
    for e in 0..episodes {
        total += run_episode(agent, env, policy, seed.wrapping_add(e as u64), limits, &mut |_| Ok(()))? as f64;
    }
    Ok(total / episodes as f64)
}
