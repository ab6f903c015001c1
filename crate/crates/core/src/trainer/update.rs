use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::losses::{bce, compute_q_advantage, LossTerms, LossWeights};
use super::rollout::Transition;
use crate::autodiff::{Graph, GradStore, Matrix, ParameterStore, Var};
use crate::decoder::{DecodeMode, TemplateSet};
use crate::encoders::Vocabulary;
use crate::error::Result;
use crate::model::ShaKgModel;

/// Read-only pieces needed to rebuild a transition's loss.
#[derive(Clone, Copy)]
pub struct LossContext<'a> {
    pub model: &'a ShaKgModel,
    pub vocab: &'a Vocabulary,
    pub templates: &'a TemplateSet,
    pub gamma: f64,
    pub weights: LossWeights,
}

/// Weighted total loss of one transition, recomputed under current parameters.
/// The advantage uses the stored rollout values and is a constant here.
pub fn transition_loss(g: &mut Graph<'_>, ctx: &LossContext<'_>, tr: &Transition) -> Result<(Var, LossTerms)> {
    let out = ctx.model.forward(
        g,
        &tr.input,
        ctx.vocab,
        ctx.templates,
        DecodeMode::<ChaCha8Rng>::Forced(tr.template, &tr.objects),
    )?;
    let (q, advantage) = compute_q_advantage(tr.reward, tr.next_value, tr.value, ctx.gamma, tr.done);
    let policy = g.scalar_mul(out.decode.log_prob, -advantage)?;
    let target = g.constant(Matrix::filled(1, 1, -q));
    let td = g.add(out.value, target)?;
    let critic = g.mul(td, td)?;
    let entropy = out.decode.neg_entropy;
    let template = bce(g, out.decode.template_probs, &tr.template_labels)?;
    let object = if out.decode.slot_probs.is_empty() {
        g.constant(Matrix::zeros(1, 1))
    } else {
        let mut terms = Vec::with_capacity(out.decode.slot_probs.len());
        for &p in &out.decode.slot_probs {
            terms.push(bce(g, p, &tr.object_labels)?);
        }
        g.sum_scalars(&terms)?
    };
    let terms = LossTerms {
        policy: g.scalar(policy),
        critic: g.scalar(critic),
        entropy: g.scalar(entropy),
        template: g.scalar(template),
        object: g.scalar(object),
    };
    let w = ctx.weights;
    let c = g.scalar_mul(critic, w.critic)?;
    let e = g.scalar_mul(entropy, w.entropy)?;
    let t = g.scalar_mul(template, w.template)?;
    let o = g.scalar_mul(object, w.object)?;
    let total = g.sum_scalars(&[policy, c, e, t, o])?;
    Ok((total, terms))
}

/// Mean loss over `batch` as one scalar, for gradient checking.
pub fn batch_loss(g: &mut Graph<'_>, ctx: &LossContext<'_>, batch: &[Transition]) -> Result<Var> {
    let mut totals = Vec::with_capacity(batch.len());
    for tr in batch {
        totals.push(transition_loss(g, ctx, tr)?.0);
    }
    let sum = g.sum_scalars(&totals)?;
    g.scalar_mul(sum, 1.0 / batch.len() as f64)
}

/// Gradient of the mean batch loss and the mean loss terms. Work is split into
/// fixed chunks and summed in chunk order, so the result does not depend on
/// the number of threads.
pub fn batch_gradients(
    store: &ParameterStore,
    ctx: &LossContext<'_>,
    batch: &[Transition],
    chunk: usize,
) -> Result<(GradStore, LossTerms)> {
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<Result<(GradStore, LossTerms)>> = batch
        .par_chunks(chunk.max(1))
        .map(|trs| {
            let mut grads = GradStore::zeros_like(store);
            let mut sum = LossTerms::default();
            for tr in trs {
                let mut g = Graph::new(store);
                let (loss, terms) = transition_loss(&mut g, ctx, tr)?;
                terms.check_finite()?;
                g.backward_scaled(loss, scale, &mut grads)?;
                sum.add(&terms);
            }
            Ok((grads, sum))
        })
        .collect();
    let mut grads = GradStore::zeros_like(store);
    let mut terms = LossTerms::default();
    for part in parts {
        let (g, t) = part?;
        grads.add_assign(&g);
        terms.add(&t);
    }
    terms.scale(scale);
    Ok((grads, terms))
}
