//! Template-then-objects action decoding under the graph mask.

mod decode;
mod templates;

pub use decode::{argmax, render_action, sample, ActionDecision, DecodeMode, DecodeTrace, DecoderParams};
pub use templates::{Template, TemplateSet, TemplateToken, MAX_SLOTS, SLOT};
