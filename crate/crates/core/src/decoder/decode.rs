use rand::Rng;

use super::templates::TemplateSet;
use crate::autodiff::{Graph, Matrix, ParamId, ParameterStore, Var};
use crate::encoders::{GruCell, Vocabulary};
use crate::error::{Error, Result};
use crate::sha::Linear;

/// Added inside `log` when computing `p log p`, so an underflowed
/// probability contributes 0 instead of NaN.
const LOG_FLOOR: f64 = 1e-300;

pub enum DecodeMode<'r, R: Rng> {
    Sample(&'r mut R),
    Greedy,
    /// Replays a known template and object token ids.
    Forced(usize, &'r [usize]),
}

/// Template-GRU followed by an object-GRU that emits one token per slot.
#[derive(Clone, Debug)]
pub struct DecoderParams {
    template_lift: Linear,
    template_cell: GruCell,
    template_out: Linear,
    object_lift: Linear,
    template_embedding: ParamId,
    word_embedding: ParamId,
    object_cell: GruCell,
    object_out_w: ParamId,
    object_out_b: ParamId,
    pub hidden: usize,
}

/// Graph handles for one decoded action.
#[derive(Clone, Debug)]
pub struct DecodeTrace {
    pub template: usize,
    /// Token ids, one per slot.
    pub objects: Vec<usize>,
    /// `1 x |T|`
    pub template_probs: Var,
    /// `1 x |candidates|` per decoded slot.
    pub slot_probs: Vec<Var>,
    /// `log π(template) + Σ log π(object_i | prefix)`, `1 x 1`.
    pub log_prob: Var,
    /// `Σ p log p` over the template and every decoded slot, `1 x 1`.
    pub neg_entropy: Var,
}

/// Plain-value summary of a decoded action.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionDecision {
    pub template: usize,
    pub objects: Vec<usize>,
    pub action: String,
    pub log_prob: f64,
    pub template_dist: Vec<f64>,
    /// Distributions over the whole vocabulary; masked tokens are 0.
    pub object_dists: Vec<Vec<f64>>,
}

impl DecoderParams {
    pub fn new(
        store: &mut ParameterStore,
        state_dim: usize,
        hidden: usize,
        num_templates: usize,
        vocab_size: usize,
    ) -> Result<Self> {
        Ok(Self {
            template_lift: Linear::new(store, "dec.template_lift", state_dim, hidden)?,
            template_cell: GruCell::new(store, "dec.template_gru", state_dim, hidden)?,
            template_out: Linear::new(store, "dec.template_out", hidden, num_templates)?,
            object_lift: Linear::new(store, "dec.object_lift", state_dim, hidden)?,
            template_embedding: store.add_uniform("dec.template_embedding", num_templates, hidden)?,
            word_embedding: store.add_uniform("dec.word_embedding", vocab_size, hidden)?,
            object_cell: GruCell::new(store, "dec.object_gru", hidden, hidden)?,
            object_out_w: store.add_uniform("dec.object_out_w", vocab_size, hidden)?,
            object_out_b: store.add_zeros("dec.object_out_b", vocab_size, 1)?,
            hidden,
        })
    }

    /// `candidates` are ascending token ids allowed in object slots.
    pub fn decode<R: Rng>(
        &self,
        g: &mut Graph<'_>,
        v_t: Var,
        templates: &TemplateSet,
        candidates: &[usize],
        mode: DecodeMode<'_, R>,
    ) -> Result<DecodeTrace> {
        let mut mode = mode;
        let h0 = self.template_lift.apply(g, v_t)?;
        let h1 = self.template_cell.step(g, v_t, h0)?;
        let logits = self.template_out.apply(g, h1)?;
        let logits = g.transpose(logits)?;
        let template_probs = g.row_softmax(logits)?;
        let template = match &mut mode {
            DecodeMode::Forced(t, _) => {
                if *t >= templates.len() {
                    return Err(Error::UnknownTemplate(*t));
                }
                *t
            }
            DecodeMode::Greedy => argmax(g.value(template_probs).data()),
            DecodeMode::Sample(rng) => sample(g.value(template_probs).data(), *rng),
        };
        let slots = templates
            .get(template)
            .ok_or(Error::UnknownTemplate(template))?
            .slot_count();

        let mut log_terms = vec![pick_log(g, template_probs, template)?];
        let mut entropy_terms = vec![plogp(g, template_probs)?];
        let mut slot_probs = Vec::with_capacity(slots);
        let mut objects = Vec::with_capacity(slots);
        if slots > 0 {
            if candidates.is_empty() {
                return Err(Error::EmptyCandidates);
            }
            if let DecodeMode::Forced(_, objs) = &mode {
                if objs.len() != slots {
                    return Err(Error::SlotCount {
                        template: templates.get(template).map(ToString::to_string).unwrap_or_default(),
                        slots,
                        given: objs.len(),
                    });
                }
            }
            let out_w = g.param(self.object_out_w);
            let out_b = g.param(self.object_out_b);
            let w_c = g.row_select(out_w, candidates.to_vec())?;
            let b_c = g.row_select(out_b, candidates.to_vec())?;
            let mut h = self.object_lift.apply(g, v_t)?;
            let temb = g.param(self.template_embedding);
            let mut x = g.row_select(temb, vec![template])?;
            for slot in 0..slots {
                let xt = g.transpose(x)?;
                h = self.object_cell.step(g, xt, h)?;
                let logits = g.linear(w_c, h, Some(b_c))?;
                let logits = g.transpose(logits)?;
                let probs = g.row_softmax(logits)?;
                let pos = match &mut mode {
                    DecodeMode::Forced(_, objs) => candidates
                        .binary_search(&objs[slot])
                        .map_err(|_| Error::MaskedObject(objs[slot]))?,
                    DecodeMode::Greedy => argmax(g.value(probs).data()),
                    DecodeMode::Sample(rng) => sample(g.value(probs).data(), *rng),
                };
                let token = candidates[pos];
                log_terms.push(pick_log(g, probs, pos)?);
                entropy_terms.push(plogp(g, probs)?);
                slot_probs.push(probs);
                objects.push(token);
                let wemb = g.param(self.word_embedding);
                x = g.row_select(wemb, vec![token])?;
            }
        }
        let log_prob = g.sum_scalars(&log_terms)?;
        let neg_entropy = g.sum_scalars(&entropy_terms)?;
        Ok(DecodeTrace {
            template,
            objects,
            template_probs,
            slot_probs,
            log_prob,
            neg_entropy,
        })
    }

    /// Differentiable `log π` of a given action.
    pub fn action_log_prob(
        &self,
        g: &mut Graph<'_>,
        v_t: Var,
        templates: &TemplateSet,
        candidates: &[usize],
        template: usize,
        objects: &[usize],
    ) -> Result<Var> {
        let trace = self.decode::<rand_chacha::ChaCha8Rng>(
            g,
            v_t,
            templates,
            candidates,
            DecodeMode::Forced(template, objects),
        )?;
        Ok(trace.log_prob)
    }
}

impl DecodeTrace {
    pub fn decision(
        &self,
        g: &Graph<'_>,
        templates: &TemplateSet,
        candidates: &[usize],
        vocab: &Vocabulary,
    ) -> Result<ActionDecision> {
        let words: Vec<&str> = self.objects.iter().map(|&id| vocab.token(id)).collect();
        let action = render_action(templates, self.template, &words)?;
        let object_dists = self
            .slot_probs
            .iter()
            .map(|&p| {
                let mut full = vec![0.0; vocab.len()];
                for (&id, &v) in candidates.iter().zip(g.value(p).data()) {
                    full[id] = v;
                }
                full
            })
            .collect();
        Ok(ActionDecision {
            template: self.template,
            objects: self.objects.clone(),
            action,
            log_prob: g.scalar(self.log_prob),
            template_dist: g.value(self.template_probs).data().to_vec(),
            object_dists,
        })
    }
}

pub fn render_action<S: AsRef<str>>(templates: &TemplateSet, template: usize, objects: &[S]) -> Result<String> {
    templates
        .get(template)
        .ok_or(Error::UnknownTemplate(template))?
        .render(objects)
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw; falls back to the last non-zero entry on rounding.
pub fn sample<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

fn pick_log(g: &mut Graph<'_>, probs: Var, index: usize) -> Result<Var> {
    let col = g.transpose(probs)?;
    let p = g.row_select(col, vec![index])?;
    g.log(p)
}

fn plogp(g: &mut Graph<'_>, probs: Var) -> Result<Var> {
    let (r, c) = g.shape(probs);
    let floor = g.constant(Matrix::filled(r, c, LOG_FLOOR));
    let shifted = g.add(probs, floor)?;
    let logs = g.log(shifted)?;
    let prod = g.mul(probs, logs)?;
    g.sum_all(prod)
}
