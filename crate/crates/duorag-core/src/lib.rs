//! Two-agent adaptive-retrieval QA engine.
//!
//! A generalist detector agent decides when retrieval is needed and
//! dissects questions into sub-questions; a specialist resolver agent
//! explains, summarizes retrieved context, and answers. A moderator state
//! machine sequences the phases, gates retrieval on token-logprob
//! confidence scores, and records every step in a session trace. The
//! crate also ships the knowledge-base tooling (chunking, embedding,
//! exact cosine search) and the evaluation harness (metrics, benchmark
//! runner, config-grid ablations).

pub mod engine;
pub mod eval;
pub mod gateway;
pub mod kb;
pub mod model;
pub mod prompts;
pub mod scoring;
