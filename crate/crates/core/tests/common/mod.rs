#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use shakg::agent::Agent;
use shakg::env::{miniquest_vocabulary, MiniQuest, TextEnv};
use shakg::kg::{KnowledgeGraph, PartitionStrategy, Triple, PLAYER};
use shakg::model::PolicyInput;
use shakg::sha::ModelVariant;
use shakg::trainer::{rollout_collect, worker_seed, EnvWorker, Transition};

pub const ROOMS: [&str; 5] = ["cell", "vault", "hall", "garden", "attic"];
pub const OBJECTS: [&str; 6] = ["key", "chest", "gem", "lamp", "brass lamp", "sword"];
const DIRS: [&str; 4] = ["east of", "west of", "north of", "south of"];
const PLAYER_RELATIONS: [&str; 3] = ["have", "see", "near"];

fn triple(s: &str, r: &str, o: &str) -> Triple {
    Triple::new(s, r, o).expect("non-empty fields")
}

/// A graph with one player location plus random room, object, and player edges.
pub fn random_kg<R: Rng>(rng: &mut R) -> KnowledgeGraph {
    let room = *ROOMS.choose(rng).unwrap();
    let mut edges = vec![triple(PLAYER, "in", room)];
    for _ in 0..rng.gen_range(0..20) {
        let t = match rng.gen_range(0..5) {
            0 => {
                let a = ROOMS.choose(rng).unwrap();
                let b = ROOMS.choose(rng).unwrap();
                triple(a, DIRS.choose(rng).unwrap(), b)
            }
            1 => triple(OBJECTS.choose(rng).unwrap(), "in", ROOMS.choose(rng).unwrap()),
            2 => triple(OBJECTS.choose(rng).unwrap(), "in", OBJECTS.choose(rng).unwrap()),
            3 => triple(PLAYER, PLAYER_RELATIONS.choose(rng).unwrap(), OBJECTS.choose(rng).unwrap()),
            _ => triple(PLAYER, "in", ROOMS.choose(rng).unwrap()),
        };
        edges.push(t);
    }
    KnowledgeGraph::from_edges(edges, room)
}

/// A random observation's worth of policy input over the bundled vocabulary.
pub fn random_input<R: Rng>(rng: &mut R, strategy: PartitionStrategy) -> PolicyInput {
    let vocab = miniquest_vocabulary();
    let kg = random_kg(rng);
    let mut obs = MiniQuest::bundled().reset(0);
    let words: Vec<String> = (0..vocab.len()).map(|i| vocab.token(i).to_string()).collect();
    let sentence = |rng: &mut R| {
        let n = rng.gen_range(0..12);
        (0..n).map(|_| words.choose(rng).unwrap().clone()).collect::<Vec<_>>().join(" ")
    };
    obs.desc = sentence(rng);
    obs.inv = sentence(rng);
    obs.feed = sentence(rng);
    obs.last_action = sentence(rng);
    obs.score = rng.gen_range(0..=20);
    let mut input = PolicyInput::new(&obs, &kg, strategy, &vocab);
    if input.candidates.is_empty() {
        input.candidates = vec![vocab.id("key")];
    }
    input
}

pub fn bundled_agent(variant: ModelVariant, strategy: PartitionStrategy, seed: u64) -> Agent {
    let env = MiniQuest::bundled();
    Agent::new(miniquest_vocabulary(), env.templates().clone(), variant, strategy, seed).unwrap()
}

/// `envs x steps` sampled MiniQuest transitions, step-major.
pub fn miniquest_batch(agent: &Agent, envs: usize, steps: usize, seed: u64) -> Vec<Transition> {
    let mut workers: Vec<EnvWorker<MiniQuest>> = (0..envs)
        .map(|i| EnvWorker::new(i, MiniQuest::bundled(), worker_seed(seed, i)).unwrap())
        .collect();
    rollout_collect(agent, &mut workers, steps, 100, 400).unwrap().transitions
}
