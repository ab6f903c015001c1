//! Vectors from raw inputs: vocabulary and tokenization, per-component GRU
//! text encoders, the binary score code, and GAT graph encoders.

mod gat;
mod gru;
mod score;
mod vocab;

pub use gat::{GatChannel, GatOutput, LEAKY_SLOPE};
pub use gru::{GruCell, TextEncoder};
pub use score::{encode_score, score_column, SCORE_BITS};
pub use vocab::{split_words, Vocabulary, PAD, UNK};
