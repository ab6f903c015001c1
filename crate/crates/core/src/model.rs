//! The full SHA-KG policy: text and graph encoders, stacked hierarchical
//! attention, the action decoder, and the critic head.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;

use crate::autodiff::{Graph, Matrix, ParamId, ParameterStore, Var};
use crate::decoder::{DecodeMode, DecodeTrace, DecoderParams, TemplateSet};
use crate::encoders::{score_column, GatChannel, TextEncoder, Vocabulary, SCORE_BITS};
use crate::env::ObservationBundle;
use crate::error::Result;
use crate::kg::{object_candidates, partition, KnowledgeGraph, PartitionStrategy, SubGraph};
use crate::sha::{Linear, ModelVariant, ShaParams, StateEncoding, D_HIGH, D_KG, D_LOW};

pub const D_EMB: usize = 50;
pub const D_NODE: usize = 25;
pub const D_DECODER: usize = 50;
pub const TEXT_COMPONENTS: [&str; 4] = ["desc", "inv", "feed", "action"];

/// Everything the policy reads at one step, already tokenized and partitioned.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyInput {
    pub tokens: [Vec<usize>; 4],
    pub score: i64,
    pub full: SubGraph,
    pub parts: Vec<SubGraph>,
    /// Ascending token ids allowed in object slots.
    pub candidates: Vec<usize>,
}

impl PolicyInput {
    pub fn new(obs: &ObservationBundle, kg: &KnowledgeGraph, strategy: PartitionStrategy, vocab: &Vocabulary) -> Self {
        let [desc, inv, feed, action] = obs.components();
        Self {
            tokens: [
                vocab.tokenize(desc),
                vocab.tokenize(inv),
                vocab.tokenize(feed),
                vocab.tokenize(action),
            ],
            score: obs.score,
            full: SubGraph::whole(kg),
            parts: partition(kg, strategy).parts,
            candidates: object_candidates(kg, vocab),
        }
    }
}

/// Node names of one sub-graph and their neighbour attention.
pub type NodeAttention = (Vec<String>, Matrix);

/// Graph handles produced by one forward pass.
pub struct PolicyOutput {
    pub encoding: StateEncoding,
    pub decode: DecodeTrace,
    /// `1 x 1`
    pub value: Var,
    /// Neighbour attention of each sub-graph GAT, in partition order.
    pub gat_attention: Vec<(Vec<String>, Matrix)>,
}

pub struct ShaKgModel {
    pub variant: ModelVariant,
    pub strategy: PartitionStrategy,
    text: Vec<TextEncoder>,
    node_embedding: ParamId,
    full_gat: Option<GatChannel>,
    sub_gats: Vec<GatChannel>,
    pub sha: ShaParams,
    pub decoder: DecoderParams,
    critic: Linear,
    sub_gat_calls: AtomicUsize,
}

impl ShaKgModel {
    /// Registers every parameter in `store` in a fixed order.
    pub fn new(
        store: &mut ParameterStore,
        vocab_size: usize,
        num_templates: usize,
        variant: ModelVariant,
        strategy: PartitionStrategy,
    ) -> Result<Self> {
        let text = TEXT_COMPONENTS
            .iter()
            .map(|c| TextEncoder::new(store, &format!("text.{c}"), vocab_size, D_EMB, D_HIGH))
            .collect::<Result<Vec<_>>>()?;
        let node_embedding = store.add_uniform("gat.nodes", vocab_size, D_NODE)?;
        let full_gat = if variant.uses_high_level() {
            Some(GatChannel::new(store, "gat.full", D_NODE, D_KG)?)
        } else {
            None
        };
        let sub_gats = if variant.uses_low_level() {
            (0..strategy.num_parts())
                .map(|i| GatChannel::new(store, &format!("gat.sub{i}"), D_NODE, D_LOW))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let sha = ShaParams::new(store, variant, SCORE_BITS)?;
        let decoder = DecoderParams::new(store, D_LOW, D_DECODER, num_templates, vocab_size)?;
        let critic = Linear::new(store, "critic", D_LOW, 1)?;
        Ok(Self {
            variant,
            strategy,
            text,
            node_embedding,
            full_gat,
            sub_gats,
            sha,
            decoder,
            critic,
            sub_gat_calls: AtomicUsize::new(0),
        })
    }

    /// How many times a sub-graph GAT has been evaluated.
    pub fn sub_gat_calls(&self) -> usize {
        self.sub_gat_calls.load(Ordering::Relaxed)
    }

    pub fn encode(&self, g: &mut Graph<'_>, input: &PolicyInput, vocab: &Vocabulary) -> Result<(StateEncoding, Vec<NodeAttention>)> {
        let mut rows = Vec::with_capacity(self.text.len());
        for (enc, tokens) in self.text.iter().zip(&input.tokens) {
            let h = enc.encode(g, tokens)?;
            rows.push(g.transpose(h)?);
        }
        let stacked = g.concat_rows(&rows)?;
        let v_text = g.transpose(stacked)?;
        let v_score = g.constant(score_column(input.score));
        let v_kg = match &self.full_gat {
            Some(gat) => Some(gat.encode(g, &input.full, self.node_embedding, vocab)?.vector),
            None => None,
        };
        let mut attention = Vec::new();
        let v_subs = if self.sub_gats.is_empty() {
            None
        } else {
            let mut cols = Vec::with_capacity(self.sub_gats.len());
            for (gat, part) in self.sub_gats.iter().zip(&input.parts) {
                self.sub_gat_calls.fetch_add(1, Ordering::Relaxed);
                let out = gat.encode(g, part, self.node_embedding, vocab)?;
                attention.push((out.nodes, out.attention));
                cols.push(g.transpose(out.vector)?);
            }
            let stacked = g.concat_rows(&cols)?;
            Some(g.transpose(stacked)?)
        };
        let enc = self.sha.encode(g, v_text, v_score, v_kg, v_subs)?;
        Ok((enc, attention))
    }

    pub fn value(&self, g: &mut Graph<'_>, v_t: Var) -> Result<Var> {
        self.critic.apply(g, v_t)
    }

    pub fn forward<R: Rng>(
        &self,
        g: &mut Graph<'_>,
        input: &PolicyInput,
        vocab: &Vocabulary,
        templates: &TemplateSet,
        mode: DecodeMode<'_, R>,
    ) -> Result<PolicyOutput> {
        let (encoding, gat_attention) = self.encode(g, input, vocab)?;
        let decode = self
            .decoder
            .decode(g, encoding.v_t, templates, &input.candidates, mode)?;
        let value = self.value(g, encoding.v_t)?;
        Ok(PolicyOutput {
            encoding,
            decode,
            value,
            gat_attention,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::GradStore;
    use crate::env::{MiniQuest, TextEnv};
    use crate::kg::extract_triples;
    use rand_chacha::ChaCha8Rng;

    fn first_input(strategy: PartitionStrategy) -> (PolicyInput, Vocabulary, TemplateSet) {
        let mut env = MiniQuest::bundled();
        let obs = env.reset(0);
        let vocab = crate::env::miniquest_vocabulary();
        let triples = extract_triples(&obs, &obs.room_id, None, &obs.interactables, &obs.inventory_items);
        let mut kg = KnowledgeGraph::new();
        kg.update(triples).unwrap();
        (PolicyInput::new(&obs, &kg, strategy, &vocab), vocab, env.templates().clone())
    }

    #[test]
    fn every_variant_produces_a_50_wide_state() {
        for variant in ModelVariant::ALL {
            let (input, vocab, templates) = first_input(PartitionStrategy::Full);
            let mut s = ParameterStore::new(1);
            let m = ShaKgModel::new(&mut s, vocab.len(), templates.len(), variant, PartitionStrategy::Full).unwrap();
            let mut g = Graph::new(&s);
            let out = m
                .forward::<ChaCha8Rng>(&mut g, &input, &vocab, &templates, DecodeMode::Greedy)
                .unwrap();
            assert_eq!(g.shape(out.encoding.v_t), (D_LOW, 1));
            assert_eq!(g.shape(out.value), (1, 1));
            let expected_calls = if variant == ModelVariant::NoLowLevel { 0 } else { 4 };
            assert_eq!(m.sub_gat_calls(), expected_calls);
        }
    }

    #[test]
    fn gradients_reach_every_parameter_of_the_full_model() {
        let (input, vocab, templates) = first_input(PartitionStrategy::Full);
        let mut s = ParameterStore::new(2);
        let m = ShaKgModel::new(&mut s, vocab.len(), templates.len(), ModelVariant::Full, PartitionStrategy::Full).unwrap();
        let mut g = Graph::new(&s);
        // pick a two-slot template so the whole decoder is exercised
        let t = templates.iter().position(|t| t.slot_count() == 2).unwrap();
        let objs = [input.candidates[0], input.candidates[1]];
        let out = m
            .forward(&mut g, &input, &vocab, &templates, DecodeMode::<ChaCha8Rng>::Forced(t, &objs))
            .unwrap();
        let loss = g.add(out.decode.log_prob, out.value).unwrap();
        let mut grads = GradStore::zeros_like(&s);
        g.backward(loss, &mut grads).unwrap();
        let mut checked = 0;
        for (id, name, _) in s.iter() {
            if name.starts_with("sha.") {
                assert!(grads.get(id).max_abs() > 0.0, "{name} got no gradient");
                checked += 1;
            }
        }
        assert_eq!(checked, 14);
    }
}
