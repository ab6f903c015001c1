use crate::autodiff::{Graph, Matrix, ParamId, ParameterStore, Var};
use crate::error::Result;
use crate::kg::SubGraph;

use super::vocab::Vocabulary;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Single-head graph attention layer followed by mean pooling and a linear
/// read-out. The node-name embedding table is shared across channels.
#[derive(Clone, Debug)]
pub struct GatChannel {
    w: ParamId,
    /// `2 x node_dim`: row 0 scores the receiving node, row 1 the neighbour.
    attn: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    pub out_dim: usize,
}

pub struct GatOutput {
    /// `out_dim x 1`
    pub vector: Var,
    /// Row `i` holds the neighbour weights of node `i`; empty for an empty graph.
    pub attention: Matrix,
    pub nodes: Vec<String>,
}

impl GatChannel {
    pub fn new(store: &mut ParameterStore, prefix: &str, node_dim: usize, out_dim: usize) -> Result<Self> {
        Ok(Self {
            w: store.add_uniform(&format!("{prefix}.w"), node_dim, node_dim)?,
            attn: store.add_uniform(&format!("{prefix}.attn"), 2, node_dim)?,
            out_w: store.add_uniform(&format!("{prefix}.out_w"), out_dim, node_dim)?,
            out_b: store.add_zeros(&format!("{prefix}.out_b"), out_dim, 1)?,
            out_dim,
        })
    }

    /// Node features come from the first word of each node name.
    pub fn encode(
        &self,
        g: &mut Graph<'_>,
        part: &SubGraph,
        node_embedding: ParamId,
        vocab: &Vocabulary,
    ) -> Result<GatOutput> {
        let n = part.nodes.len();
        if n == 0 {
            return Ok(GatOutput {
                vector: g.constant(Matrix::zeros(self.out_dim, 1)),
                attention: Matrix::zeros(0, 0),
                nodes: Vec::new(),
            });
        }
        let ids: Vec<usize> = part
            .nodes
            .iter()
            .map(|name| vocab.id(name.split_whitespace().next().unwrap_or_default()))
            .collect();
        let table = g.param(node_embedding);
        let h = g.row_select(table, ids)?;
        let w = g.param(self.w);
        let wt = g.transpose(w)?;
        let wh = g.matmul(h, wt)?;

        let attn = g.param(self.attn);
        let a_dst = g.row_select(attn, vec![0])?;
        let a_src = g.row_select(attn, vec![1])?;
        let a_dst = g.transpose(a_dst)?;
        let a_src = g.transpose(a_src)?;
        let s_dst = g.matmul(wh, a_dst)?;
        let s_src = g.matmul(wh, a_src)?;
        let s_src_row = g.transpose(s_src)?;
        let ones_col = g.constant(Matrix::filled(n, 1, 1.0));
        let spread = g.matmul(ones_col, s_src_row)?;
        let e = g.add_broadcast_column(spread, s_dst)?;
        let e = g.leaky_relu(e, LEAKY_SLOPE)?;

        let adj = part.to_adjacency();
        let mut mask = Matrix::zeros(n, n);
        for (i, row) in adj.iter().enumerate() {
            for (j, &linked) in row.iter().enumerate() {
                if !linked {
                    mask.set(i, j, f64::NEG_INFINITY);
                }
            }
        }
        let mask = g.constant(mask);
        let e = g.add(e, mask)?;
        let alpha = g.row_softmax(e)?;
        let attention = g.value(alpha).clone();

        let mixed = g.matmul(alpha, wh)?;
        let h_out = g.tanh(mixed)?;
        let pool = g.constant(Matrix::filled(1, n, 1.0 / n as f64));
        let pooled = g.matmul(pool, h_out)?;
        let pooled = g.transpose(pooled)?;
        let (ow, ob) = (g.param(self.out_w), g.param(self.out_b));
        let vector = g.linear(ow, pooled, Some(ob))?;
        Ok(GatOutput {
            vector,
            attention,
            nodes: part.nodes.clone(),
        })
    }
}
