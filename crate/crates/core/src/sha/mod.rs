//! Stacked hierarchical attention: a KG + score query attends over the text
//! components, and the result attends over the sub-graph vectors.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Graph, Matrix, ParamId, ParameterStore, Var};
use crate::error::{Error, Result};

pub const D_HIGH: usize = 100;
pub const D_LOW: usize = 50;
pub const D_KG: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    Full,
    NoGroupAttn,
    NoHighLevel,
    NoLowLevel,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Full,
        ModelVariant::NoGroupAttn,
        ModelVariant::NoHighLevel,
        ModelVariant::NoLowLevel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Full => "full",
            ModelVariant::NoGroupAttn => "no-group-attn",
            ModelVariant::NoHighLevel => "no-high-level",
            ModelVariant::NoLowLevel => "no-low-level",
        }
    }

    pub fn group_attention(self) -> bool {
        self != ModelVariant::NoGroupAttn
    }

    pub fn uses_high_level(self) -> bool {
        self != ModelVariant::NoHighLevel
    }

    pub fn uses_low_level(self) -> bool {
        self != ModelVariant::NoLowLevel
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Weights of one attention level.
#[derive(Clone, Debug)]
pub struct AttentionLevel {
    w_i: ParamId,
    w_q: ParamId,
    w_a: ParamId,
    b_q: ParamId,
    b_a: ParamId,
    pub dim: usize,
}

impl AttentionLevel {
    pub fn new(store: &mut ParameterStore, prefix: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            w_i: store.add_uniform(&format!("{prefix}.w_i"), dim, dim)?,
            w_q: store.add_uniform(&format!("{prefix}.w_q"), dim, dim)?,
            w_a: store.add_uniform(&format!("{prefix}.w_a"), dim, dim)?,
            b_q: store.add_zeros(&format!("{prefix}.b_q"), dim, 1)?,
            b_a: store.add_zeros(&format!("{prefix}.b_a"), dim, 1)?,
            dim,
        })
    }

    pub fn w_a(&self) -> ParamId {
        self.w_a
    }

    pub fn b_a(&self) -> ParamId {
        self.b_a
    }

    /// Returns `(α, query + Σ_i α_i ⊙ values_i)`; `values` is `dim x channels`.
    pub fn attend(&self, g: &mut Graph<'_>, values: Var, query: Var, group: bool) -> Result<(Var, Var)> {
        let (w_i, w_q, w_a, b_q, b_a) = (
            g.param(self.w_i),
            g.param(self.w_q),
            g.param(self.w_a),
            g.param(self.b_q),
            g.param(self.b_a),
        );
        let iv = g.matmul(w_i, values)?;
        let qv = g.linear(w_q, query, Some(b_q))?;
        let pre = g.add_broadcast_column(iv, qv)?;
        let h = g.tanh(pre)?;
        let ah = g.matmul(w_a, h)?;
        let scores = g.add_broadcast_column(ah, b_a)?;
        let alpha = if group {
            g.row_softmax(scores)?
        } else {
            let (rows, _) = g.shape(scores);
            let avg = g.constant(Matrix::filled(1, rows, 1.0 / rows as f64));
            let per_channel = g.matmul(avg, scores)?;
            let single = g.row_softmax(per_channel)?;
            let ones = g.constant(Matrix::filled(rows, 1, 1.0));
            g.matmul(ones, single)?
        };
        let weighted = g.mul(alpha, values)?;
        let summed = g.sum_columns(weighted)?;
        let out = g.add(query, summed)?;
        Ok((alpha, out))
    }
}

/// Linear map `w · x + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    w: ParamId,
    b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParameterStore, prefix: &str, input: usize, output: usize) -> Result<Self> {
        Ok(Self {
            w: store.add_uniform(&format!("{prefix}.w"), output, input)?,
            b: store.add_zeros(&format!("{prefix}.b"), output, 1)?,
        })
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> ParamId {
        self.b
    }

    pub fn apply(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        g.linear(w, x, Some(b))
    }
}

#[derive(Clone, Debug)]
pub struct ShaParams {
    /// `D_HIGH x (D_KG + SCORE_BITS)`, or `D_HIGH x (D_HIGH + SCORE_BITS)` when
    /// the high level is ablated and the query is built from the text.
    pub init: Linear,
    pub high: Option<AttentionLevel>,
    pub bridge: Linear,
    pub low: Option<AttentionLevel>,
    pub variant: ModelVariant,
}

/// Everything the encoder computed on the way to `v_t`.
#[derive(Clone, Copy, Debug)]
pub struct StateEncoding {
    pub v_t: Var,
    pub q_high: Var,
    pub q_low_pre: Var,
    pub q_low: Var,
    /// `D_HIGH x c`
    pub alpha_high: Option<Var>,
    /// `D_LOW x m`
    pub alpha_low: Option<Var>,
}

impl ShaParams {
    pub fn new(store: &mut ParameterStore, variant: ModelVariant, score_bits: usize) -> Result<Self> {
        let init_in = if variant.uses_high_level() {
            D_KG + score_bits
        } else {
            D_HIGH + score_bits
        };
        let init = Linear::new(store, "sha.init", init_in, D_HIGH)?;
        let high = if variant.uses_high_level() {
            Some(AttentionLevel::new(store, "sha.high", D_HIGH)?)
        } else {
            None
        };
        let bridge = Linear::new(store, "sha.bridge", D_HIGH, D_LOW)?;
        let low = if variant.uses_low_level() {
            Some(AttentionLevel::new(store, "sha.low", D_LOW)?)
        } else {
            None
        };
        Ok(Self {
            init,
            high,
            bridge,
            low,
            variant,
        })
    }

    /// `q_high = W_Init · [v_kg ; v_score] + b_Init`
    pub fn build_query(&self, g: &mut Graph<'_>, v_kg: Var, v_score: Var) -> Result<Var> {
        let x = g.concat_rows(&[v_kg, v_score])?;
        self.init.apply(g, x)
    }

    pub fn high_attend(&self, g: &mut Graph<'_>, v_text: Var, q_high: Var) -> Result<(Var, Var)> {
        let high = self.high.as_ref().ok_or(Error::UnknownVariant(
            "high-level attention is disabled in this variant".into(),
        ))?;
        high.attend(g, v_text, q_high, self.variant.group_attention())
    }

    /// Returns `(α_low, q_low, v_t)`.
    pub fn low_attend(&self, g: &mut Graph<'_>, v_subs: Var, q_low_pre: Var) -> Result<(Var, Var, Var)> {
        let low = self.low.as_ref().ok_or(Error::UnknownVariant(
            "low-level attention is disabled in this variant".into(),
        ))?;
        let q_low = self.bridge.apply(g, q_low_pre)?;
        let (alpha, v_t) = low.attend(g, v_subs, q_low, self.variant.group_attention())?;
        Ok((alpha, q_low, v_t))
    }

    /// `v_kg` is needed unless the high level is ablated; `v_subs` unless the
    /// low level is.
    pub fn encode(
        &self,
        g: &mut Graph<'_>,
        v_text: Var,
        v_score: Var,
        v_kg: Option<Var>,
        v_subs: Option<Var>,
    ) -> Result<StateEncoding> {
        let missing = |what: &str| Error::UnknownVariant(format!("{} needs {what}", self.variant));
        let (q_high, q_low_pre, alpha_high) = if self.variant.uses_high_level() {
            let q_high = self.build_query(g, v_kg.ok_or_else(|| missing("the full-graph vector"))?, v_score)?;
            let (alpha, q_low_pre) = self.high_attend(g, v_text, q_high)?;
            (q_high, q_low_pre, Some(alpha))
        } else {
            let text = g.mean_columns(v_text)?;
            let x = g.concat_rows(&[text, v_score])?;
            let q = self.init.apply(g, x)?;
            (q, q, None)
        };
        if self.variant.uses_low_level() {
            let v_subs = v_subs.ok_or_else(|| missing("sub-graph vectors"))?;
            let (alpha, q_low, v_t) = self.low_attend(g, v_subs, q_low_pre)?;
            Ok(StateEncoding {
                v_t,
                q_high,
                q_low_pre,
                q_low,
                alpha_high,
                alpha_low: Some(alpha),
            })
        } else {
            let q_low = self.bridge.apply(g, q_low_pre)?;
            Ok(StateEncoding {
                v_t: q_low,
                q_high,
                q_low_pre,
                q_low,
                alpha_high,
                alpha_low: None,
            })
        }
    }
}
