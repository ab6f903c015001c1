use crate::autodiff::{Graph, Matrix, ParamId, ParameterStore, Var};
use crate::error::Result;

/// One GRU cell:
///
/// ```text
/// r  = σ(W_ir x + W_hr h + b_r)
/// z  = σ(W_iz x + W_hz h + b_z)
/// n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
#[derive(Clone, Debug)]
pub struct GruCell {
    pub input: usize,
    pub hidden: usize,
    w_ir: ParamId,
    w_iz: ParamId,
    w_in: ParamId,
    w_hr: ParamId,
    w_hz: ParamId,
    w_hn: ParamId,
    b_r: ParamId,
    b_z: ParamId,
    b_in: ParamId,
    b_hn: ParamId,
}

impl GruCell {
    pub fn new(store: &mut ParameterStore, prefix: &str, input: usize, hidden: usize) -> Result<Self> {
        let mut w = |n: &str, cols: usize| store.add_uniform(&format!("{prefix}.{n}"), hidden, cols);
        let (w_ir, w_iz, w_in) = (w("w_ir", input)?, w("w_iz", input)?, w("w_in", input)?);
        let (w_hr, w_hz, w_hn) = (w("w_hr", hidden)?, w("w_hz", hidden)?, w("w_hn", hidden)?);
        let mut b = |n: &str| store.add_zeros(&format!("{prefix}.{n}"), hidden, 1);
        Ok(Self {
            input,
            hidden,
            w_ir,
            w_iz,
            w_in,
            w_hr,
            w_hz,
            w_hn,
            b_r: b("b_r")?,
            b_z: b("b_z")?,
            b_in: b("b_in")?,
            b_hn: b("b_hn")?,
        })
    }

    /// `x` is `input x 1`, `h` is `hidden x 1`.
    pub fn step(&self, g: &mut Graph<'_>, x: Var, h: Var) -> Result<Var> {
        let gate = |g: &mut Graph<'_>, wi: ParamId, wh: ParamId, b: ParamId| -> Result<Var> {
            let (wi, wh, b) = (g.param(wi), g.param(wh), g.param(b));
            let xi = g.matmul(wi, x)?;
            let hh = g.matmul(wh, h)?;
            let s = g.add(xi, hh)?;
            let s = g.add(s, b)?;
            g.sigmoid(s)
        };
        let r = gate(g, self.w_ir, self.w_hr, self.b_r)?;
        let z = gate(g, self.w_iz, self.w_hz, self.b_z)?;
        let (w_in, b_in, w_hn, b_hn) = (
            g.param(self.w_in),
            g.param(self.b_in),
            g.param(self.w_hn),
            g.param(self.b_hn),
        );
        let xn = g.linear(w_in, x, Some(b_in))?;
        let hn = g.linear(w_hn, h, Some(b_hn))?;
        let rh = g.mul(r, hn)?;
        let pre = g.add(xn, rh)?;
        let n = g.tanh(pre)?;
        let diff = g.sub(h, n)?;
        let zd = g.mul(z, diff)?;
        g.add(n, zd)
    }
}

/// Embedding table plus a GRU; one per textual component.
#[derive(Clone, Debug)]
pub struct TextEncoder {
    embedding: ParamId,
    cell: GruCell,
}

impl TextEncoder {
    pub fn new(
        store: &mut ParameterStore,
        prefix: &str,
        vocab_size: usize,
        emb_dim: usize,
        hidden: usize,
    ) -> Result<Self> {
        let embedding = store.add_uniform(&format!("{prefix}.embedding"), vocab_size, emb_dim)?;
        let cell = GruCell::new(store, &format!("{prefix}.gru"), emb_dim, hidden)?;
        Ok(Self { embedding, cell })
    }

    pub fn hidden(&self) -> usize {
        self.cell.hidden
    }

    /// Final hidden state (`hidden x 1`); zero for an empty sequence.
    pub fn encode(&self, g: &mut Graph<'_>, tokens: &[usize]) -> Result<Var> {
        let mut h = g.constant(Matrix::zeros(self.cell.hidden, 1));
        if tokens.is_empty() {
            return Ok(h);
        }
        let table = g.param(self.embedding);
        let rows = g.row_select(table, tokens.to_vec())?;
        for t in 0..tokens.len() {
            let row = g.row_select(rows, vec![t])?;
            let x = g.transpose(row)?;
            h = self.cell.step(g, x, h)?;
        }
        Ok(h)
    }
}
