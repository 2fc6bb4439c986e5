//! Executable semantics of agent graphs and their composition.
//!
//! A [`MasGraph`] is a set of agent instances over one flat valuation of
//! shared and local variables. [`MasGraph::enabled`] and [`MasGraph::step`]
//! implement the combined graph: interleaved internal edges, send/receive
//! handshakes (sender update first), committed-location priority and a
//! serial self-loop at deadlocks.

pub mod eval;
pub mod explicit;
pub mod graph;
pub mod hidden;
pub mod ir;
mod semantics;
pub mod types;

pub use explicit::{unwrap, ExplicitModel, UnwrapError};
pub use graph::{
    AgentGraph, ChannelDecl, Edge, EdgeChoice, EdgeText, GlobalState, KernelError, Location, MasGraph,
    SyncDir, SyncSpec, TransitionLabel,
};
pub use hidden::{Direction, HiddenLayer, MergeDef, ScopeDecl, Visibility};
pub use types::{Domain, SlotInfo, SlotKind, Ty, Value, VarDecl, VarScope};
