mod combine;
mod run_config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use shakg::agent::Agent;
use shakg::env::{walkthrough, world_texts, MiniQuest};
use shakg::encoders::Vocabulary;
use shakg::trace::{trace_episode, Aggregation, TraceOptions};
use shakg::trainer::{evaluate, load_checkpoint, train_run, EpisodeLimits, EvalPolicy, TrainEvent};

use run_config::{RunConfig, CONFIG_ECHO};

#[derive(Parser)]
#[command(name = "shakg", version, about = "Train, evaluate, and trace knowledge-graph text-game agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write metrics and checkpoints.
    Train(TrainArgs),
    /// Print the mean final score over greedy episodes.
    Eval(EvalArgs),
    /// Write the step trace of one greedy episode.
    Trace(TraceArgs),
    /// Merge metrics files into a mean and std curve.
    Combine(CombineArgs),
    /// Print a vocabulary covering the world and templates.
    Vocab(CommonArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Extra key=value override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Total environment steps.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint_interval: Option<u64>,
    /// Also write trace.txt for the trained agent.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Greedy,
    Walkthrough,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Greedy)]
    policy: PolicyArg,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Trace file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep only these aggregation methods, repeatable.
    #[arg(long)]
    aggregation: Vec<String>,
    /// Append the three most-attended nodes of each sub-graph.
    #[arg(long)]
    top_nodes: bool,
    /// Stop after this many steps.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct CombineArgs {
    #[arg(required = true)]
    metrics: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit 1: bad config, paths, or checkpoint. Exit 2: fault while training.
enum Failure {
    Config(anyhow::Error),
    Fault(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn run_config(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    let here = Path::new(".");
    let flags = [
        ("seed", common.seed.map(|s| s.to_string())),
        ("variant", common.variant.clone()),
        ("strategy", common.strategy.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v, here)?;
        }
    }
    if let Some(p) = &common.world {
        cfg.world = Some(p.clone());
    }
    if let Some(p) = &common.templates {
        cfg.templates = Some(p.clone());
    }
    if let Some(p) = &common.vocab {
        cfg.vocab = Some(p.clone());
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim(), here)?;
    }
    Ok(cfg)
}

fn load_agent(cfg: &RunConfig, checkpoint: Option<&Path>) -> anyhow::Result<(Agent, MiniQuest)> {
    let (env, vocab) = cfg.load_world()?;
    let t = &cfg.train;
    let mut agent = Agent::new(vocab, env.templates().clone(), t.variant, t.strategy, t.seed)?;
    if let Some(path) = checkpoint {
        let hash = agent.config_hash();
        load_checkpoint(path, &mut agent.store, hash)
            .with_context(|| format!("checkpoint {}", path.display()))?;
    }
    Ok((agent, env))
}

fn limits(cfg: &RunConfig) -> EpisodeLimits {
    EpisodeLimits {
        valid_steps: cfg.train.episode_valid_step_limit,
        steps: cfg.train.episode_step_cap,
    }
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let mut cfg = run_config(&args.common)?;
    if let Some(s) = args.steps {
        cfg.train.total_steps = s;
    }
    if let Some(i) = args.checkpoint_interval {
        cfg.train.checkpoint_interval = i;
    }
    if let Some(o) = args.out {
        cfg.out = Some(o);
    }
    cfg.trace |= args.trace;
    cfg.validate()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs/default"));
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    std::fs::write(out.join(CONFIG_ECHO), cfg.to_kv_string())?;
    let (agent, env) = load_agent(&cfg, None)?;

    let quiet = args.quiet;
    let mut last_avg = 0.0;
    let mut on_event = |ev: &TrainEvent| {
        match ev {
            TrainEvent::Episode(row) => last_avg = row.avg100,
            TrainEvent::Update { index, env_steps, .. } => {
                if !quiet && index % 10 == 0 {
                    eprintln!("update {index} steps {env_steps} avg100 {last_avg:.2}");
                }
            }
        }
        Ok(())
    };
    let (summary, agent) = train_run(cfg.train.clone(), agent, &env, &out, &mut on_event)
        .map_err(|e| Failure::Fault(e.into()))?;
    if cfg.trace {
        let mut env = env.clone();
        let opts = TraceOptions::new(cfg.train.strategy.labels());
        let text = trace_episode(&agent, &mut env, cfg.train.seed, limits(&cfg), &opts)
            .map_err(|e| Failure::Fault(e.into()))?;
        std::fs::write(out.join("trace.txt"), text)?;
    }
    println!(
        "updates {} env_steps {} episodes {} avg100 {}",
        summary.updates, summary.env_steps, summary.episodes, summary.final_avg100
    );
    Ok(())
}

fn format_score(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let cfg = run_config(&args.common)?;
    cfg.validate()?;
    let policy = match args.policy {
        PolicyArg::Greedy => EvalPolicy::Greedy,
        PolicyArg::Walkthrough => {
            let (env, _) = cfg.load_world()?;
            EvalPolicy::Script(walkthrough(env.spec(), env.templates())?)
        }
    };
    let checkpoint = match (&policy, &args.checkpoint) {
        (EvalPolicy::Greedy, None) => return Err(anyhow!("greedy evaluation needs --checkpoint").into()),
        (_, c) => c.as_deref(),
    };
    let (agent, mut env) = load_agent(&cfg, checkpoint)?;
    let mean = evaluate(&agent, &mut env, args.episodes, &policy, cfg.train.seed, limits(&cfg))
        .map_err(|e| Failure::Fault(e.into()))?;
    println!("{}", format_score(mean));
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> CmdResult {
    let cfg = run_config(&args.common)?;
    cfg.validate()?;
    let (agent, mut env) = load_agent(&cfg, Some(&args.checkpoint))?;
    let mut opts = TraceOptions::new(cfg.train.strategy.labels());
    if !args.aggregation.is_empty() {
        opts.methods = args
            .aggregation
            .iter()
            .map(|a| a.parse::<Aggregation>())
            .collect::<shakg::Result<_>>()?;
    }
    opts.top_nodes = args.top_nodes;
    let mut lim = limits(&cfg);
    if let Some(m) = args.max_steps {
        lim.steps = lim.steps.min(m);
    }
    let text = trace_episode(&agent, &mut env, cfg.train.seed, lim, &opts)
        .map_err(|e| Failure::Fault(e.into()))?;
    match args.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_combine(args: CombineArgs) -> CmdResult {
    let text = combine::combine(&args.metrics)?;
    match args.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_vocab(args: CommonArgs) -> CmdResult {
    let cfg = run_config(&args)?;
    cfg.validate()?;
    let (env, _) = cfg.load_world()?;
    let vocab = Vocabulary::from_texts(world_texts(env.spec(), env.templates()));
    print!("{}", vocab.to_file_string());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Combine(a) => cmd_combine(a),
        Command::Vocab(a) => cmd_vocab(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Fault(e)) => {
            eprintln!("training fault: {e:#}");
            ExitCode::from(2)
        }
    }
}
