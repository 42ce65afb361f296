//! Adversarial obfuscation of small programs via constrained first-order
//! optimization.
//!
//! The pipeline: generate a MiniLang corpus, train a small differentiable
//! program summarizer on it, then search for semantics-preserving
//! obfuscations (renames, boolean-literal rewrites, statement inserts)
//! that flip the summarizer's prediction. Site selection and token choice
//! are relaxed to a continuous problem and solved with projected gradient
//! descent, either jointly or by alternating over the two variable blocks,
//! optionally under randomized smoothing of the loss landscape.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability.

pub mod attack;
pub mod harness;
pub mod minilang;
pub mod rng;
pub mod summarizer;
