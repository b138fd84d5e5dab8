//! Unsupervised video summarization with a reinforcement-learned frame
//! selection policy.
//!
//! A bidirectional LSTM reads precomputed per-frame features and predicts a
//! selection probability for every frame. Training samples binary selections
//! from those probabilities and rewards them for being diverse (selected
//! frames look different from each other) and representative (every frame has
//! a close selected frame). At test time the probabilities become importance
//! scores, shots are detected with kernel temporal segmentation, and a 0/1
//! knapsack picks the best shots within a length budget.
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example <name>`.

pub mod cli;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod policy_net;
pub mod rewards;
pub mod segmentation;
pub mod summarizer;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
