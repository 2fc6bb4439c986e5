//! Agent graphs, their composition into a MAS graph, global states and labels.

use super::eval::{Addr, Fault};
use super::hidden::HiddenLayer;
use super::ir::{Ex, Function, Place, St};
use super::types::{Domain, SlotInfo, VarDecl};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Location {
    pub name: String,
    pub committed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyncDir {
    Send,
    Receive,
}

#[derive(Clone, Debug)]
pub struct SyncSpec {
    pub dir: SyncDir,
    /// Resolved like a global place whose address is the channel id.
    pub channel: Place,
}

/// Source text of the edge clauses, kept for display.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EdgeText {
    pub select: String,
    pub guard: String,
    pub sync: String,
    pub update: String,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub source: u32,
    pub target: u32,
    /// Select binders occupy frame slots `0..selects.len()`.
    pub selects: Vec<(String, Domain)>,
    pub guard: Option<Ex>,
    pub sync: Option<SyncSpec>,
    pub update: Vec<St>,
    pub frame_size: u32,
    pub text: EdgeText,
}

#[derive(Clone, Debug)]
pub struct AgentGraph {
    /// Instance name such as `Voter(1)`.
    pub name: String,
    pub template: String,
    pub params: Vec<(String, i32)>,
    pub locations: Vec<Location>,
    pub initial: u32,
    pub initial_condition: Option<Ex>,
    pub init_frame: u32,
    pub edges: Vec<Edge>,
    /// Edge ids per source location.
    pub outgoing: Vec<Vec<u32>>,
    /// Ids of local variables in `MasGraph::vars`.
    pub locals: Vec<u32>,
}

impl AgentGraph {
    pub fn location_id(&self, name: &str) -> Option<u32> {
        self.locations
            .iter()
            .position(|l| l.name == name)
            .map(|i| i as u32)
    }

    pub fn rebuild_outgoing(&mut self) {
        self.outgoing = vec![Vec::new(); self.locations.len()];
        for (i, e) in self.edges.iter().enumerate() {
            self.outgoing[e.source as usize].push(i as u32);
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChannelDecl {
    pub name: String,
    pub dims: Vec<Domain>,
    pub base: u32,
}

/// A composed network: shared and local variables in one flat layout,
/// channels, functions and the agent instances.
#[derive(Clone, Debug)]
pub struct MasGraph {
    pub vars: Vec<VarDecl>,
    pub slots: Vec<SlotInfo>,
    pub functions: Vec<Function>,
    pub channels: Vec<ChannelDecl>,
    pub channel_count: u32,
    pub agents: Vec<AgentGraph>,
    /// Present on abstract models.
    pub hidden: Option<Arc<HiddenLayer>>,
}

impl MasGraph {
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn agent_id(&self, name: &str) -> Option<u32> {
        self.agents
            .iter()
            .position(|a| a.name == name)
            .map(|i| i as u32)
    }

    pub fn var_id(&self, name: &str) -> Option<u32> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .map(|i| i as u32)
    }

    pub fn channel_name(&self, id: u32) -> String {
        for c in self.channels.iter().rev() {
            if id >= c.base {
                let mut rest = id - c.base;
                let mut idx = Vec::new();
                for d in c.dims.iter().rev() {
                    let n = d.size() as u32;
                    idx.push(d.lo + (rest % n) as i32);
                    rest /= n;
                }
                idx.reverse();
                return idx
                    .iter()
                    .fold(c.name.clone(), |s, i| format!("{s}[{i}]"));
            }
        }
        format!("chan#{id}")
    }

    pub fn describe_addr(&self, a: Addr) -> String {
        match a {
            Addr::Global(g) => self
                .slots
                .get(g as usize)
                .map(|s| s.name.clone())
                .unwrap_or_else(|| format!("slot#{g}")),
            Addr::Stack(_) => "local".to_string(),
        }
    }

    /// Human-readable form of a fault raised while evaluating `context`.
    pub fn fault_error(&self, fault: Fault, context: &str, label: Option<TransitionLabel>) -> KernelError {
        match fault {
            Fault::Range { addr, value, dom } => KernelError::RangeFault {
                target: self.describe_addr(addr),
                value,
                domain: dom,
                context: context.to_string(),
                label,
            },
            other => KernelError::EvaluationFault {
                context: context.to_string(),
                reason: describe_fault(&other),
            },
        }
    }

    pub fn label_text(&self, t: &TransitionLabel) -> String {
        let edge = |c: &EdgeChoice| {
            let a = &self.agents[c.agent as usize];
            let e = &a.edges[c.edge as usize];
            let mut s = format!(
                "{}: {} -> {}",
                a.name,
                a.locations[e.source as usize].name,
                a.locations[e.target as usize].name
            );
            if !c.bindings.is_empty() {
                let b: Vec<String> = e
                    .selects
                    .iter()
                    .zip(&c.bindings)
                    .map(|((n, _), v)| format!("{n}={v}"))
                    .collect();
                s.push_str(&format!(" [{}]", b.join(", ")));
            }
            s
        };
        match t {
            TransitionLabel::Internal { choice, variant } => {
                let mut s = edge(choice);
                if *variant > 0 {
                    s.push_str(&format!(" #{variant}"));
                }
                s
            }
            TransitionLabel::Handshake {
                sender,
                receiver,
                channel,
                variant,
            } => {
                let mut s = format!(
                    "{} ! {} ? on {}",
                    edge(sender),
                    edge(receiver),
                    self.channel_name(*channel)
                );
                if *variant > 0 {
                    s.push_str(&format!(" #{variant}"));
                }
                s
            }
            TransitionLabel::SerialLoop => "serial self-loop".to_string(),
        }
    }

    /// Slot-wise rendering of a valuation.
    pub fn render_values(&self, s: &GlobalState) -> Vec<(String, String)> {
        self.slots
            .iter()
            .zip(&s.vals)
            .map(|(slot, v)| (slot.name.clone(), slot.kind.render(*v)))
            .collect()
    }

    pub fn render_locations(&self, s: &GlobalState) -> Vec<(String, String)> {
        self.agents
            .iter()
            .zip(&s.locs)
            .map(|(a, l)| (a.name.clone(), a.locations[*l as usize].name.clone()))
            .collect()
    }

    /// Slots whose value differs between `a` and `b`, rendered as in `b`.
    pub fn changed_values(&self, a: &GlobalState, b: &GlobalState) -> Vec<(String, String)> {
        self.slots
            .iter()
            .zip(a.vals.iter().zip(&b.vals))
            .filter(|(_, (x, y))| x != y)
            .map(|(slot, (_, y))| (slot.name.clone(), slot.kind.render(*y)))
            .collect()
    }
}

pub fn describe_fault(f: &Fault) -> String {
    match f {
        Fault::DivisionByZero => "division by zero".into(),
        Fault::IndexOutOfRange { value, dom } => format!("index {value} outside {dom}"),
        Fault::Range { value, dom, .. } => format!("value {value} outside {dom}"),
        Fault::MissingReturn(_) => "function ended without returning a value".into(),
        Fault::StackOverflow => "call depth exceeded".into(),
        Fault::ReadOnly => "write to a variable in a side-effect-free context".into(),
        Fault::Need(s) => format!("hidden slot {s} read"),
    }
}

/// Locations plus valuation; equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GlobalState {
    pub locs: Vec<u32>,
    pub vals: Vec<i32>,
}

impl GlobalState {
    /// Canonical byte string: location ids then values, in declaration order.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * (self.locs.len() + self.vals.len()));
        for l in &self.locs {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for v in &self.vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeChoice {
    pub agent: u32,
    pub edge: u32,
    pub bindings: Vec<i32>,
}

/// One transition of the combined graph. `variant` distinguishes the
/// outcomes of a nondeterministic abstract update and is 0 otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionLabel {
    Internal {
        choice: EdgeChoice,
        variant: u32,
    },
    Handshake {
        sender: EdgeChoice,
        receiver: EdgeChoice,
        channel: u32,
        variant: u32,
    },
    SerialLoop,
}

impl TransitionLabel {
    pub fn edges(&self) -> Vec<&EdgeChoice> {
        match self {
            TransitionLabel::Internal { choice, .. } => vec![choice],
            TransitionLabel::Handshake {
                sender, receiver, ..
            } => vec![sender, receiver],
            TransitionLabel::SerialLoop => vec![],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("evaluation fault in {context}: {reason}")]
    EvaluationFault { context: String, reason: String },
    #[error("range fault: {target} := {value} outside {domain} in {context}")]
    RangeFault {
        target: String,
        value: i32,
        domain: Domain,
        context: String,
        label: Option<TransitionLabel>,
    },
    #[error("initial condition of {agent} violated")]
    InitialConditionViolated { agent: String },
    #[error("transition is not enabled in the given state")]
    NotEnabled,
    #[error("state does not belong to this model")]
    ForeignState,
    #[error("scope boundary fault: {0}")]
    ScopeBoundaryFault(String),
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {:?}", self.locs, self.vals)
    }
}
