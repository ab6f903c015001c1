//! Attention aggregation and the per-step trace log.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::autodiff::{row_softmax, Matrix};
use crate::error::{Error, Result};
use crate::agent::Agent;
use crate::env::TextEnv;
use crate::trainer::{run_episode, EpisodeLimits, EvalPolicy, StepRecord};

pub const HIGH_LABELS: [&str; 4] = ["o_desc", "o_inv", "o_feed", "a_past"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregation {
    Max,
    Mean,
    Sum,
    TopMean(usize),
    TopSum(usize),
}

impl Aggregation {
    pub const ALL: [Aggregation; 9] = [
        Aggregation::Max,
        Aggregation::Mean,
        Aggregation::Sum,
        Aggregation::TopMean(10),
        Aggregation::TopSum(10),
        Aggregation::TopMean(25),
        Aggregation::TopSum(25),
        Aggregation::TopMean(50),
        Aggregation::TopSum(50),
    ];

    /// Reduces one channel's values to a single score.
    pub fn reduce(self, values: &[f64]) -> f64 {
        let top = |k: usize| {
            let mut v = values.to_vec();
            v.sort_by(|a, b| b.total_cmp(a));
            v.truncate(k.min(values.len()));
            v
        };
        match self {
            Aggregation::Max => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Sum => values.iter().sum(),
            Aggregation::TopMean(k) => {
                let v = top(k);
                v.iter().sum::<f64>() / v.len() as f64
            }
            Aggregation::TopSum(k) => top(k).iter().sum(),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregation::Max => f.write_str("max"),
            Aggregation::Mean => f.write_str("mean"),
            Aggregation::Sum => f.write_str("sum"),
            Aggregation::TopMean(k) => write!(f, "top{k}_mean"),
            Aggregation::TopSum(k) => write!(f, "top{k}_sum"),
        }
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::UnknownAggregation(s.to_string()))
    }
}

/// Reduces each column of `alpha` (`d x channels`) and softmaxes across channels.
pub fn aggregate_attention(alpha: &Matrix, method: Aggregation) -> Vec<f64> {
    let scores: Vec<f64> = (0..alpha.cols())
        .map(|c| method.reduce(&alpha.col_values(c)))
        .collect();
    row_softmax(&Matrix::row(&scores)).into_vec()
}

/// Top three nodes of a sub-graph by mean incoming attention.
pub fn top_nodes(nodes: &[String], alpha: &Matrix, k: usize) -> Vec<String> {
    let mut ranked: Vec<(f64, usize)> = (0..nodes.len())
        .map(|j| {
            let col = alpha.col_values(j);
            (col.iter().sum::<f64>() / col.len().max(1) as f64, j)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(k).map(|(_, j)| nodes[j].clone()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceOptions {
    pub methods: Vec<Aggregation>,
    /// Labels of the low-level channels, in partition order.
    pub low_labels: Vec<String>,
    /// Append the three most-attended nodes of each sub-graph.
    pub top_nodes: bool,
}

impl TraceOptions {
    pub fn new(low_labels: &[&str]) -> Self {
        Self {
            methods: Aggregation::ALL.to_vec(),
            low_labels: low_labels.iter().map(|s| s.to_string()).collect(),
            top_nodes: false,
        }
    }
}

fn quoted_list<S: AsRef<str>>(items: &[S]) -> String {
    let inner: Vec<String> = items.iter().map(|s| format!("'{}'", s.as_ref())).collect();
    format!("[{}]", inner.join(", "))
}

fn number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn attention_block(out: &mut String, prefix: &str, labels: &[String], alpha: &Matrix, methods: &[Aggregation]) {
    let _ = writeln!(out, "----- {prefix}: {}", labels.join(", "));
    for &m in methods {
        let values: Vec<String> = aggregate_attention(alpha, m)
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect();
        let key = format!("{prefix}_{m}");
        let _ = writeln!(out, "{key:<15}: {}", quoted_list(&values));
    }
}

/// Renders one step as a four-section trace block.
pub fn render_trace(record: &StepRecord, opts: &TraceOptions) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "----- ===== Step {} ===== -----", record.index);
    out.push_str("===== 1. Textual obs: \n");
    let o = &record.obs;
    let _ = writeln!(out, "o_desc: {}", o.desc);
    let _ = writeln!(out, "o_inv: {}", o.inv);
    let _ = writeln!(out, "o_feed: {}", o.feed);
    let _ = writeln!(out, "a_past: {}", o.last_action);
    out.push_str("===== 2. Newly extracted triplets\n");
    let triples: Vec<String> = record.new_triples.iter().map(ToString::to_string).collect();
    let _ = writeln!(out, "[{}]", triples.join(", "));
    out.push_str("===== 3. Attention values: \n");
    if let Some(view) = &record.view {
        let high: Vec<String> = HIGH_LABELS.iter().map(|s| s.to_string()).collect();
        if let Some(a) = &view.alpha_high {
            attention_block(&mut out, "attH", &high, a, &opts.methods);
        }
        if let Some(a) = &view.alpha_low {
            attention_block(&mut out, "attL", &opts.low_labels, a, &opts.methods);
        }
        if opts.top_nodes {
            for (label, (nodes, alpha)) in opts.low_labels.iter().zip(&view.gat_attention) {
                let _ = writeln!(out, "top_nodes {label}: {}", quoted_list(&top_nodes(nodes, alpha, 3)));
            }
        }
    }
    out.push_str("===== 4. Chosen action and reward\n");
    let _ = writeln!(out, "Action: {}", record.action);
    let _ = writeln!(out, "Reward: {}|Score: {}", number(record.reward), record.score);
    out.push('\n');
    out
}

/// Plays one greedy episode and renders every step.
pub fn trace_episode<E: TextEnv>(
    agent: &Agent,
    env: &mut E,
    seed: u64,
    limits: EpisodeLimits,
    opts: &TraceOptions,
) -> Result<String> {
    let mut out = String::new();
    run_episode(agent, env, &EvalPolicy::Greedy, seed, limits, &mut |r| {
        out.push_str(&render_trace(r, opts));
        Ok(())
    })?;
    Ok(out)
}

/// Splits an attention line into its key and values.
pub fn parse_attention_line(line: &str) -> Option<(String, Vec<f64>)> {
    let (key, rest) = line.split_once(": ")?;
    let key = key.trim();
    if !(key.starts_with("attH_") || key.starts_with("attL_")) {
        return None;
    }
    let inner = rest.trim().strip_prefix('[')?.strip_suffix(']')?;
    let values = inner
        .split(", ")
        .map(|v| v.trim_matches('\'').parse().ok())
        .collect::<Option<Vec<f64>>>()?;
    Some((key.to_string(), values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::StepView;
    use crate::decoder::ActionDecision;
    use crate::env::ObservationBundle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(alpha_high: Matrix, alpha_low: Matrix) -> StepRecord {
        StepRecord {
            index: 1,
            obs: ObservationBundle {
                desc: "Cell. A cell.".into(),
                inv: "you are empty-handed".into(),
                feed: "Cell. A cell.".into(),
                last_action: "look".into(),
                score: 0,
                interactables: vec![],
                inventory_items: vec![],
                room_id: "cell".into(),
            },
            new_triples: [crate::kg::Triple::new("you", "in", "cell").unwrap()].into(),
            view: Some(StepView {
                decision: ActionDecision {
                    template: 0,
                    objects: vec![],
                    action: "west".into(),
                    log_prob: 0.0,
                    template_dist: vec![],
                    object_dists: vec![],
                },
                value: 0.0,
                alpha_high: Some(alpha_high),
                alpha_low: Some(alpha_low),
                gat_attention: vec![],
            }),
            action: "west".into(),
            reward: 0.0,
            score: 0,
        }
    }

    #[test]
    fn names_round_trip() {
        let names: Vec<String> = Aggregation::ALL.iter().map(ToString::to_string).collect();
        assert_eq!(
            names,
            ["max", "mean", "sum", "top10_mean", "top10_sum", "top25_mean", "top25_sum", "top50_mean", "top50_sum"]
        );
        for a in Aggregation::ALL {
            assert_eq!(a.to_string().parse::<Aggregation>().unwrap(), a);
        }
        assert!(matches!("top7_sum".parse::<Aggregation>(), Err(Error::UnknownAggregation(_))));
    }

    #[test]
    fn identical_channels_are_uniform() {
        let alpha = Matrix::filled(100, 4, 0.25);
        for m in Aggregation::ALL {
            for v in aggregate_attention(&alpha, m) {
                assert!((v - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn top_k_matches_a_sorting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let alpha = Matrix::from_vec(100, 4, (0..400).map(|_| rng.gen::<f64>()).collect());
            let scores: Vec<f64> = (0..4)
                .map(|c| {
                    let mut col = alpha.col_values(c);
                    col.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    col[..25].iter().sum()
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
            let got = aggregate_attention(&alpha, Aggregation::TopSum(25));
            for (g, s) in got.iter().zip(&scores) {
                assert!((g - (s - max).exp() / z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn top50_on_fifty_rows_is_sum_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alpha = Matrix::from_vec(50, 4, (0..200).map(|_| rng.gen::<f64>()).collect());
        let a = aggregate_attention(&alpha, Aggregation::TopSum(50));
        let b = aggregate_attention(&alpha, Aggregation::Sum);
        let c = aggregate_attention(&alpha, Aggregation::TopMean(50));
        let d = aggregate_attention(&alpha, Aggregation::Mean);
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-12 && (c[i] - d[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_record_renders_quarter_lines() {
        let labels = ["connectivity", "item_in_room", "item_in_inv", "history"];
        let text = render_trace(
            &record(Matrix::filled(100, 4, 0.25), Matrix::filled(50, 4, 0.25)),
            &TraceOptions::new(&labels),
        );
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "----- ===== Step 1 ===== -----");
        assert_eq!(lines[1], "===== 1. Textual obs: ");
        assert_eq!(lines[7], "[('you', 'in', 'cell')]");
        assert_eq!(lines[8], "===== 3. Attention values: ");
        assert_eq!(lines[9], "----- attH: o_desc, o_inv, o_feed, a_past");
        let keys: Vec<&str> = lines[10..19].iter().map(|l| &l[..15]).collect();
        assert_eq!(
            keys,
            [
                "attH_max       ",
                "attH_mean      ",
                "attH_sum       ",
                "attH_top10_mean",
                "attH_top10_sum ",
                "attH_top25_mean",
                "attH_top25_sum ",
                "attH_top50_mean",
                "attH_top50_sum "
            ]
        );
        assert_eq!(lines[19], "----- attL: connectivity, item_in_room, item_in_inv, history");
        for l in lines.iter().filter(|l| l.starts_with("att")) {
            assert!(l.ends_with(": ['0.250', '0.250', '0.250', '0.250']"), "{l}");
        }
        assert_eq!(&lines[lines.len() - 3..], ["Action: west", "Reward: 0|Score: 0", ""]);
    }

    #[test]
    fn attention_lines_parse_back() {
        let (k, v) = parse_attention_line("attH_top25_sum : ['0.881', '0.000', '0.119', '0.000']").unwrap();
        assert_eq!(k, "attH_top25_sum");
        assert_eq!(v, [0.881, 0.0, 0.119, 0.0]);
        assert!(parse_attention_line("Action: west").is_none());
    }

    #[test]
    fn top_nodes_rank_by_incoming_attention() {
        let nodes: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let alpha = Matrix::from_rows(&[
            vec![0.1, 0.6, 0.3, 0.0],
            vec![0.0, 0.5, 0.5, 0.0],
            vec![0.2, 0.4, 0.4, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        assert_eq!(top_nodes(&nodes, &alpha, 3), ["b", "c", "d"]);
    }
}
