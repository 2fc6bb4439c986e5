//! Request and response bodies.

use masgraph::checker::{EgMode, Stats, Status, Trace};
use masgraph::kernel::{EdgeChoice, GlobalState, MasGraph, TransitionLabel};
use masgraph::votecorpus::DeviationSet;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: String,
}

fn named(pairs: Vec<(String, String)>) -> Vec<NamedValue> {
    pairs.into_iter().map(|(name, value)| NamedValue { name, value }).collect()
}

/// Exactly one of `model` and `corpus`.
#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub model: Option<String>,
    pub corpus: Option<CorpusRequest>,
}

#[derive(Debug, Deserialize)]
pub struct CorpusRequest {
    /// `NV,NMO,NEC,NC`.
    pub config: String,
    #[serde(default)]
    pub deviations: DeviationSet,
}

#[derive(Debug, Deserialize)]
pub struct StepRequest {
    pub revision: u64,
    pub index: usize,
}

#[derive(Debug, Deserialize)]
pub struct BookmarkRequest {
    pub name: String,
}

/// The query is given either as text or as a corpus property; the
/// abstraction either as spec text or as a corpus spec name.
#[derive(Debug, Default, Deserialize)]
pub struct CheckRequest {
    pub query: Option<String>,
    pub property: Option<PropertyRequest>,
    pub abstraction: Option<String>,
    pub abstraction_name: Option<String>,
    pub eg_mode: Option<EgMode>,
}

#[derive(Debug, Deserialize)]
pub struct PropertyRequest {
    pub name: String,
    #[serde(default = "one")]
    pub voter: u32,
    #[serde(default = "one")]
    pub cand: u32,
    /// Office agent id, e.g. `-1` for the first office.
    #[serde(default = "minus_one")]
    pub office: i32,
}

fn one() -> u32 {
    1
}

fn minus_one() -> i32 {
    -1
}

/// Either a finished job's trace or explicit transitions.
#[derive(Debug, Deserialize)]
pub struct LoadTrace {
    pub job: Option<String>,
    pub transitions: Option<Vec<TransitionLabel>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session: String,
    pub revision: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobCreated {
    pub job: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateView {
    pub session: String,
    pub revision: u64,
    /// Number of transitions fired since the initial state.
    pub position: usize,
    pub locations: Vec<NamedValue>,
    pub values: Vec<NamedValue>,
    /// Slots changed by the last transition.
    pub changed: Vec<String>,
}

impl StateView {
    pub fn new(session: &str, revision: u64, g: &MasGraph, states: &[GlobalState]) -> StateView {
        let cur = states.last().expect("nonempty run");
        let changed = match states {
            [.., a, b] => g.changed_values(a, b).into_iter().map(|(n, _)| n).collect(),
            _ => Vec::new(),
        };
        StateView {
            session: session.to_string(),
            revision,
            position: states.len() - 1,
            locations: named(g.render_locations(cur)),
            values: named(g.render_values(cur)),
            changed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeView {
    /// `internal`, `sender` or `receiver`.
    pub role: String,
    pub agent: String,
    pub source: String,
    pub target: String,
    pub bindings: Vec<NamedValue>,
    pub select: String,
    pub guard: String,
    pub sync: String,
    pub update: String,
}

impl EdgeView {
    fn new(g: &MasGraph, role: &str, c: &EdgeChoice) -> EdgeView {
        let a = &g.agents[c.agent as usize];
        let e = &a.edges[c.edge as usize];
        EdgeView {
            role: role.to_string(),
            agent: a.name.clone(),
            source: a.locations[e.source as usize].name.clone(),
            target: a.locations[e.target as usize].name.clone(),
            bindings: e
                .selects
                .iter()
                .zip(&c.bindings)
                .map(|((n, _), v)| NamedValue {
                    name: n.clone(),
                    value: v.to_string(),
                })
                .collect(),
            select: e.text.select.clone(),
            guard: e.text.guard.clone(),
            sync: e.text.sync.clone(),
            update: e.text.update.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionView {
    pub index: usize,
    pub label: String,
    pub channel: Option<String>,
    pub edges: Vec<EdgeView>,
    /// The kernel label, accepted back by `load_trace`.
    pub transition: TransitionLabel,
}

impl TransitionView {
    pub fn new(g: &MasGraph, index: usize, t: &TransitionLabel) -> TransitionView {
        let (channel, edges) = match t {
            TransitionLabel::Internal { choice, .. } => (None, vec![EdgeView::new(g, "internal", choice)]),
            TransitionLabel::Handshake {
                sender,
                receiver,
                channel,
                ..
            } => (
                Some(g.channel_name(*channel)),
                vec![EdgeView::new(g, "sender", sender), EdgeView::new(g, "receiver", receiver)],
            ),
            TransitionLabel::SerialLoop => (None, Vec::new()),
        };
        TransitionView {
            index,
            label: g.label_text(t),
            channel,
            edges,
            transition: t.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnabledView {
    pub revision: u64,
    pub transitions: Vec<TransitionView>,
}

/// One entry of a downloadable trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub revision: u64,
    pub label: String,
    pub transition: TransitionLabel,
    pub changed: Vec<NamedValue>,
}

impl TraceEntry {
    pub fn new(g: &MasGraph, revision: u64, t: &TransitionLabel, from: &GlobalState, to: &GlobalState) -> TraceEntry {
        TraceEntry {
            revision,
            label: g.label_text(t),
            transition: t.clone(),
            changed: named(g.changed_values(from, to)),
        }
    }
}

/// Entries of a verification trace. Step `i` is numbered `i + 1`.
pub fn trace_entries(g: &MasGraph, t: &Trace) -> Vec<TraceEntry> {
    let mut prev = &t.initial;
    t.steps
        .iter()
        .enumerate()
        .map(|(i, (l, s))| {
            let e = TraceEntry::new(g, i as u64 + 1, l, prev, s);
            prev = s;
            e
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceView {
    /// Full number of steps.
    pub length: usize,
    pub truncated: bool,
    pub loop_start: Option<usize>,
    pub steps: Vec<TraceEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvidenceView {
    pub direction: String,
    pub query: String,
    pub status: Status,
    pub stats: Stats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub query: String,
    /// `concrete` or `abstract`.
    pub mode: String,
    /// `None` when the result is inconclusive or the search ran out of memory.
    pub sat: Option<bool>,
    pub conclusive: bool,
    pub memout: bool,
    pub stats: Stats,
    /// Counterexample or witness on the session's model, capped.
    pub trace: Option<TraceView>,
    pub evidence: Vec<EvidenceView>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JobView {
    pub job: String,
    pub session: String,
    pub state: JobState,
    pub result: Option<CheckResult>,
    pub error: Option<serde_json::Value>,
}
