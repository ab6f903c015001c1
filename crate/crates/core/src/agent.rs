//! A model bound to its parameters, vocabulary, and templates, plus the
//! per-episode knowledge tracker that turns observations into policy inputs.

use std::collections::BTreeSet;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::autodiff::{Graph, Matrix, ParameterStore};
use crate::decoder::{ActionDecision, DecodeMode, TemplateSet};
use crate::encoders::Vocabulary;
use crate::env::{is_direction, ObservationBundle, StepOutcome};
use crate::error::Result;
use crate::kg::{extract_triples, KnowledgeGraph, PartitionStrategy, Triple};
use crate::model::{PolicyInput, ShaKgModel};
use crate::sha::ModelVariant;

/// What the policy saw and chose at one step, as plain values.
#[derive(Clone, Debug)]
pub struct StepView {
    pub decision: ActionDecision,
    pub value: f64,
    pub alpha_high: Option<Matrix>,
    pub alpha_low: Option<Matrix>,
    /// Node names and neighbour attention per sub-graph.
    pub gat_attention: Vec<(Vec<String>, Matrix)>,
}

pub struct Agent {
    pub model: ShaKgModel,
    pub store: ParameterStore,
    pub vocab: Vocabulary,
    pub templates: TemplateSet,
}

impl Agent {
    pub fn new(
        vocab: Vocabulary,
        templates: TemplateSet,
        variant: ModelVariant,
        strategy: PartitionStrategy,
        seed: u64,
    ) -> Result<Self> {
        let mut store = ParameterStore::new(seed);
        let model = ShaKgModel::new(&mut store, vocab.len(), templates.len(), variant, strategy)?;
        Ok(Self {
            model,
            store,
            vocab,
            templates,
        })
    }

    pub fn variant(&self) -> ModelVariant {
        self.model.variant
    }

    pub fn strategy(&self) -> PartitionStrategy {
        self.model.strategy
    }

    /// Identifies everything that fixes parameter shapes and meaning.
    pub fn config_hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.variant().as_str());
        h.update([0]);
        h.update(self.strategy().as_str());
        h.update([0]);
        h.update(self.vocab.to_file_string());
        h.update([0]);
        h.update(self.templates.to_file_string());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    pub fn input(&self, tracker: &Tracker) -> PolicyInput {
        PolicyInput::new(&tracker.obs, &tracker.kg, self.strategy(), &self.vocab)
    }

    pub fn act<R: Rng>(&self, input: &PolicyInput, mode: DecodeMode<'_, R>) -> Result<StepView> {
        let mut g = Graph::new(&self.store);
        let out = self.model.forward(&mut g, input, &self.vocab, &self.templates, mode)?;
        let decision = out
            .decode
            .decision(&g, &self.templates, &input.candidates, &self.vocab)?;
        Ok(StepView {
            decision,
            value: g.scalar(out.value),
            alpha_high: out.encoding.alpha_high.map(|a| g.value(a).clone()),
            alpha_low: out.encoding.alpha_low.map(|a| g.value(a).clone()),
            gat_attention: out.gat_attention,
        })
    }

    /// Critic estimate only.
    pub fn value(&self, input: &PolicyInput) -> Result<f64> {
        let mut g = Graph::new(&self.store);
        let (enc, _) = self.model.encode(&mut g, input, &self.vocab)?;
        let v = self.model.value(&mut g, enc.v_t)?;
        Ok(g.scalar(v))
    }
}

/// The agent's view of one episode: last observation and the knowledge graph.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub obs: ObservationBundle,
    pub kg: KnowledgeGraph,
    /// Triples extracted at the latest step.
    pub new_triples: BTreeSet<Triple>,
}

impl Tracker {
    pub fn start(obs: ObservationBundle) -> Result<Self> {
        let triples = extract_triples(&obs, &obs.room_id, None, &obs.interactables, &obs.inventory_items);
        let mut kg = KnowledgeGraph::new();
        kg.update(triples.clone())?;
        Ok(Self {
            obs,
            kg,
            new_triples: triples,
        })
    }

    pub fn advance(&mut self, action: &str, out: &StepOutcome) -> Result<()> {
        let prev_room = self.obs.room_id.clone();
        let action = action.trim();
        let moved = out.valid && out.obs.room_id != prev_room && is_direction(action);
        let triples = extract_triples(
            &out.obs,
            &prev_room,
            moved.then_some(action),
            &out.obs.interactables,
            &out.obs.inventory_items,
        );
        self.kg.update(triples.clone())?;
        self.new_triples = triples;
        self.obs = out.obs.clone();
        Ok(())
    }
}
