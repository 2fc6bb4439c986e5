//! Explicit-state model checking of multi-agent graphs.
//!
//! * [`kernel`]: semantics of agent graphs, handshakes and serial closure.
//! * [`textlang`]: the model and query languages.
//! * [`checker`]: on-the-fly verification and a fixed-point oracle.
//! * [`abstraction`]: variable removal and merge abstractions.
//! * [`votecorpus`]: the postal-vote model family and its properties.
//! * [`randgen`] and [`suite`]: random models and whole-model checks for
//!   the test suites.

pub mod abstraction;
pub mod kernel;
pub mod checker;
pub mod randgen;
pub mod suite;
pub mod textlang;
pub mod votecorpus;
