mod common;

use shakg::env::{walkthrough, MiniQuest};
use shakg::kg::PartitionStrategy;
use shakg::sha::ModelVariant;
use shakg::trace::{trace_episode, Aggregation, TraceOptions};
use shakg::trainer::{
    evaluate, load_checkpoint, save_checkpoint, train_run, EpisodeLimits, EvalPolicy, TrainConfig, METRICS_FILE,
};
use shakg::Error;

use common::bundled_agent;

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        num_envs: 4,
        total_steps: 256,
        episode_valid_step_limit: 8,
        seed,
        ..TrainConfig::default()
    }
}

fn train_metrics(seed: u64) -> String {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(seed);
    let agent = bundled_agent(cfg.variant, cfg.strategy, seed);
    train_run(cfg, agent, &MiniQuest::bundled(), dir.path(), &mut |_| Ok(())).unwrap();
    std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap()
}

#[test]
fn training_is_reproducible_from_the_seed() {
    let a = train_metrics(3);
    assert!(a.lines().count() > 1);
    assert_eq!(a, train_metrics(3));
    assert_ne!(a, train_metrics(4));
}

#[test]
fn scripted_walkthrough_scores_the_maximum_every_episode() {
    let agent = bundled_agent(ModelVariant::Full, PartitionStrategy::Full, 1);
    let mut env = MiniQuest::bundled();
    let script = walkthrough(env.spec(), env.templates()).unwrap();
    let mean = evaluate(&agent, &mut env, 5, &EvalPolicy::Script(script), 0, EpisodeLimits::default()).unwrap();
    assert_eq!(mean, 20.0);
}

#[test]
fn untrained_greedy_scores_are_never_negative_and_repeat() {
    let agent = bundled_agent(ModelVariant::Full, PartitionStrategy::Full, 2);
    let mut env = MiniQuest::bundled();
    let limits = EpisodeLimits { valid_steps: 100, steps: 60 };
    let a = evaluate(&agent, &mut env, 3, &EvalPolicy::Greedy, 7, limits).unwrap();
    let b = evaluate(&agent, &mut env, 3, &EvalPolicy::Greedy, 7, limits).unwrap();
    assert!(a >= 0.0);
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn checkpoint_from_another_variant_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    let full = bundled_agent(ModelVariant::Full, PartitionStrategy::Full, 1);
    save_checkpoint(&path, &full.store, full.config_hash(), 1).unwrap();
    let mut other = bundled_agent(ModelVariant::NoLowLevel, PartitionStrategy::Full, 1);
    let hash = other.config_hash();
    assert!(matches!(load_checkpoint(&path, &mut other.store, hash), Err(Error::Checkpoint(_))));

    std::fs::write(&path, b"SHAKGCKP\x01").unwrap();
    let mut same = bundled_agent(ModelVariant::Full, PartitionStrategy::Full, 1);
    let hash = same.config_hash();
    assert!(load_checkpoint(&path, &mut same.store, hash).is_err());
}

#[test]
fn trace_filter_keeps_only_the_chosen_method() {
    let agent = bundled_agent(ModelVariant::Full, PartitionStrategy::NoRelational, 1);
    let mut opts = TraceOptions::new(PartitionStrategy::NoRelational.labels());
    opts.methods = vec![Aggregation::TopSum(25)];
    opts.top_nodes = true;
    let limits = EpisodeLimits { valid_steps: 100, steps: 3 };
    let text = trace_episode(&agent, &mut MiniQuest::bundled(), 0, limits, &opts).unwrap();
    let att: Vec<&str> = text.lines().filter(|l| l.starts_with("att")).collect();
    assert_eq!(att.len(), 6);
    assert!(att.iter().all(|l| l.starts_with("attH_top25_sum :") || l.starts_with("attL_top25_sum :")));
    assert_eq!(text.matches("----- ===== Step").count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("top_nodes ")).count(), 9);
}

#[test]
fn ablated_levels_drop_their_trace_sections() {
    let limits = EpisodeLimits { valid_steps: 100, steps: 1 };
    let opts = TraceOptions::new(PartitionStrategy::Full.labels());
    let no_low = bundled_agent(ModelVariant::NoLowLevel, PartitionStrategy::Full, 1);
    let text = trace_episode(&no_low, &mut MiniQuest::bundled(), 0, limits, &opts).unwrap();
    assert!(text.contains("----- attH:") && !text.contains("----- attL:"));
    let no_high = bundled_agent(ModelVariant::NoHighLevel, PartitionStrategy::Full, 1);
    let text = trace_episode(&no_high, &mut MiniQuest::bundled(), 0, limits, &opts).unwrap();
    assert!(!text.contains("----- attH:") && text.contains("----- attL:"));
}
