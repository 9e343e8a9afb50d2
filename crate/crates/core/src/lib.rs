//! Multi-agent detector of machine-generated text.
//!
//! Three profiling agents describe a text along stylistic, semantic and
//! logical lines; a Generator-Mimic and a Detector-Enhancer then argue over
//! those profiles for a few rounds; a Synthesis Judge reads everything and
//! returns HUMAN or MACHINE. All LLM traffic goes through a
//! [`gateway::ChatBackend`], so runs can be mocked, cached, recorded and
//! replayed.

pub mod agents;
pub mod datasets;
pub mod eval;
pub mod gateway;
pub mod model;
pub mod pipeline;

pub use model::{
    AuthorshipLabel, DetectionResult, Leaning, PipelineConfig, SamplingParams, TextSample, Verdict,
};
pub use pipeline::Pipeline;
