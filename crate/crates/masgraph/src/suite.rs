//! Whole-model property checks shared by the test suites and the
//! acceptance harness.

use crate::abstraction::{abstract_model, check_with_abstraction, project, simulation_check, AbstractionSpec, Outcome};
use crate::checker::{self, EgMode, Formula, Options, Verdict};
use crate::kernel::{unwrap, Direction, ExplicitModel, GlobalState, KernelError, MasGraph, SyncDir, TransitionLabel, UnwrapError};
use crate::textlang::{self, LoadError, Model};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Violation {
    #[error("model exceeds {0} states")]
    TooLarge(usize),
    #[error("state {0} has no successor")]
    NotSerial(usize),
    #[error("serial loop at state {0}, which has other successors")]
    SpuriousSerialLoop(usize),
    #[error("transition {label} from state {from} does not replay: {reason}")]
    Replay { from: usize, label: String, reason: String },
    #[error("handshake {0} does not pair a send with a receive on its channel")]
    BadHandshake(String),
    #[error("permuted model differs: {0}")]
    Asymmetric(String),
    #[error("checker and oracle disagree on '{query}': checker {checker}, oracle {oracle}")]
    OracleMismatch { query: String, checker: bool, oracle: bool },
    #[error("invalid witness for '{query}': {reason}")]
    Witness { query: String, reason: String },
    #[error("{direction:?} model does not simulate as promised: {reason}")]
    Simulation { direction: Direction, reason: String },
    #[error("abstraction concluded {outcome:?} for '{query}', but it is {truth} concretely")]
    Unsound { query: String, outcome: Outcome, truth: bool },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Other(String),
}

pub fn explicit(m: &MasGraph, bound: usize) -> Result<ExplicitModel, Violation> {
    match unwrap(m, bound) {
        Ok(em) => Ok(em),
        Err(UnwrapError::BoundExceeded { bound, .. }) => Err(Violation::TooLarge(bound)),
        Err(UnwrapError::Kernel(e)) => Err(e.into()),
    }
}

/// Seriality, replay of every transition, and well-formed handshakes.
pub fn kernel_invariants(m: &MasGraph, em: &ExplicitModel) -> Result<(), Violation> {
    let init = m.initial_state()?;
    if em.initial.iter().all(|&i| em.states[i] != init) {
        return Err(Violation::Other("initial state missing from the unwrapping".into()));
    }
    for (i, out) in em.edges.iter().enumerate() {
        if out.is_empty() {
            return Err(Violation::NotSerial(i));
        }
        let s = &em.states[i];
        let enabled = m.enabled(s)?;
        if enabled.len() != out.len() {
            return Err(Violation::Other(format!(
                "state {i}: {} enabled labels, {} edges",
                enabled.len(),
                out.len()
            )));
        }
        for (j, t) in out {
            let replay = |reason: String| Violation::Replay {
                from: i,
                label: m.label_text(t),
                reason,
            };
            match t {
                TransitionLabel::SerialLoop if out.len() > 1 => return Err(Violation::SpuriousSerialLoop(i)),
                TransitionLabel::SerialLoop if *j != i => return Err(replay("serial loop leaves the state".into())),
                TransitionLabel::Handshake {
                    sender, receiver, ..
                } => {
                    let dir = |c: &crate::kernel::EdgeChoice| {
                        m.agents[c.agent as usize].edges[c.edge as usize].sync.as_ref().map(|s| s.dir)
                    };
                    if sender.agent == receiver.agent
                        || dir(sender) != Some(SyncDir::Send)
                        || dir(receiver) != Some(SyncDir::Receive)
                    {
                        return Err(Violation::BadHandshake(m.label_text(t)));
                    }
                }
                _ => {}
            }
            if !enabled.contains(t) {
                return Err(replay("label not enabled".into()));
            }
            let n = m.step(s, t).map_err(|e| replay(e.to_string()))?;
            if n != em.states[*j] {
                return Err(replay("successor differs".into()));
            }
        }
    }
    Ok(())
}

/// Move the agents of `text`'s `system` line into the order `perm`.
pub fn permute_system(text: &str, perm: &[usize]) -> Result<String, Violation> {
    let start = text
        .rfind("system ")
        .ok_or_else(|| Violation::Other("no system line".into()))?;
    let end = start + text[start..].find(';').ok_or_else(|| Violation::Other("unterminated system line".into()))?;
    let names: Vec<&str> = text[start + 7..end].split(',').map(str::trim).collect();
    if perm.len() != names.len() {
        return Err(Violation::Other("permutation length differs from the system line".into()));
    }
    let reordered: Vec<&str> = perm.iter().map(|&p| names[p]).collect();
    Ok(format!("{}system {}{}", &text[..start], reordered.join(", "), &text[end..]))
}

/// Rewrite states of `from` into the slot and agent order of `to`, by name.
fn renaming(from: &MasGraph, to: &MasGraph) -> Result<impl Fn(&GlobalState) -> GlobalState, Violation> {
    let slot_of: HashMap<&str, usize> = to.slots.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
    let agent_of: HashMap<&str, usize> = to.agents.iter().enumerate().map(|(i, a)| (a.name.as_str(), i)).collect();
    let slots: Vec<usize> = from
        .slots
        .iter()
        .map(|s| slot_of.get(s.name.as_str()).copied())
        .collect::<Option<_>>()
        .ok_or_else(|| Violation::Asymmetric("slot names differ".into()))?;
    let agents: Vec<usize> = from
        .agents
        .iter()
        .map(|a| agent_of.get(a.name.as_str()).copied())
        .collect::<Option<_>>()
        .ok_or_else(|| Violation::Asymmetric("agent names differ".into()))?;
    if slots.len() != to.slots.len() || agents.len() != to.agents.len() {
        return Err(Violation::Asymmetric("sizes differ".into()));
    }
    Ok(move |s: &GlobalState| {
        let mut out = GlobalState {
            locs: vec![0; agents.len()],
            vals: vec![0; slots.len()],
        };
        for (i, &a) in agents.iter().enumerate() {
            out.locs[a] = s.locs[i];
        }
        for (i, &k) in slots.iter().enumerate() {
            out.vals[k] = s.vals[i];
        }
        out
    })
}

/// The permuted model's transition system equals the original one up to
/// renaming of agents and slots.
pub fn permutation_symmetric(a: &MasGraph, b: &MasGraph, bound: usize) -> Result<(), Violation> {
    let (ea, eb) = (explicit(a, bound)?, explicit(b, bound)?);
    if ea.len() != eb.len() || ea.transition_count() != eb.transition_count() {
        return Err(Violation::Asymmetric(format!(
            "{} states / {} transitions against {} / {}",
            ea.len(),
            ea.transition_count(),
            eb.len(),
            eb.transition_count()
        )));
    }
    let h = renaming(a, b)?;
    let edges_b: HashSet<(usize, usize)> = eb
        .edges
        .iter()
        .enumerate()
        .flat_map(|(i, out)| out.iter().map(move |(j, _)| (i, *j)))
        .collect();
    for (i, out) in ea.edges.iter().enumerate() {
        let Some(bi) = eb.index_of(&h(&ea.states[i])) else {
            return Err(Violation::Asymmetric(format!("state {i} has no counterpart")));
        };
        for (j, _) in out {
            let bj = eb.index_of(&h(&ea.states[*j])).ok_or_else(|| Violation::Asymmetric(format!("state {j} has no counterpart")))?;
            if !edges_b.contains(&(bi, bj)) {
                return Err(Violation::Asymmetric(format!("edge {i} -> {j} has no counterpart")));
            }
        }
    }
    Ok(())
}

/// The on-the-fly verdict and witness shape for `f`, checked against the
/// fixed-point oracle in `mode`.
pub fn oracle_agrees(m: &MasGraph, em: &ExplicitModel, query: &str, f: &Formula, mode: EgMode) -> Result<Verdict, Violation> {
    let opts = Options {
        eg_mode: mode,
        ..Options::default()
    };
    let v = checker::check(m, f, &opts).map_err(|e| Violation::Other(e.to_string()))?;
    let oracle = checker::oracle_check(m, em, f, mode).map_err(|e| Violation::Other(e.to_string()))?;
    let got = v
        .satisfied()
        .ok_or_else(|| Violation::Other(format!("'{query}' ran out of memory")))?;
    if got != oracle {
        return Err(Violation::OracleMismatch {
            query: query.into(),
            checker: got,
            oracle,
        });
    }
    if let Some(t) = &v.trace {
        t.replay(m).map_err(|e| Violation::Witness {
            query: query.into(),
            reason: e.to_string(),
        })?;
    }
    Ok(v)
}

/// Every query of `queries` (one per line) on `model`.
pub fn oracle_suite(model: &Model, queries: &str, bound: usize) -> Result<usize, Violation> {
    let em = explicit(&model.graph, bound)?;
    let mut n = 0;
    for q in textlang::load_queries(model, queries)? {
        for mode in [EgMode::Maximal, EgMode::FiniteRun] {
            oracle_agrees(&model.graph, &em, &q.text, &q.formula, mode)?;
            n += 1;
        }
    }
    Ok(n)
}

/// Parse, print, and parse again; the two printed forms must agree.
pub fn round_trip(text: &str) -> Result<(), Violation> {
    let d1 = textlang::parse_model(text).map_err(LoadError::from)?;
    let p1 = textlang::pretty_print(&d1);
    let d2 = textlang::parse_model(&p1).map_err(LoadError::from)?;
    let p2 = textlang::pretty_print(&d2);
    if p1 != p2 {
        return Err(Violation::Other("printing is not a fixpoint".into()));
    }
    textlang::load_model(&p1)?;
    Ok(())
}

/// Simulation in every direction of `spec`, and agreement of a conclusive
/// verdict for `query` with the oracle's value of `concrete_query` (the
/// same property phrased over the concrete model).
pub fn abstraction_sound(
    m: &Model,
    em: &ExplicitModel,
    spec: &AbstractionSpec,
    query: &str,
    concrete_query: &str,
    bound: usize,
) -> Result<Outcome, Violation> {
    let other = |e: &dyn std::fmt::Display| Violation::Other(e.to_string());
    let dirs = match spec.direction() {
        Some(d) => vec![d],
        None => vec![Direction::Under, Direction::Over],
    };
    for d in dirs {
        let a = abstract_model(m, &spec.with_direction(d)).map_err(|e| other(&e))?;
        let ea = explicit(&a.graph, bound)?;
        let h = |s: &GlobalState| project(&m.graph, &a.graph, s);
        let r = simulation_check(em, &ea, &h, d).map_err(|e| other(&e))?;
        if !r.holds {
            return Err(Violation::Simulation {
                direction: d,
                reason: r.witness.map_or_else(String::new, |w| {
                    format!("{} -> {} by {}", w.from, w.to, a.graph.label_text(&w.label))
                }),
            });
        }
    }
    let v = check_with_abstraction(m, spec, query, &Options::default()).map_err(|e| other(&e))?;
    let f = &textlang::load_queries(m, concrete_query)?
        .into_iter()
        .next()
        .ok_or_else(|| Violation::Other("no query".into()))?
        .formula;
    let truth = checker::oracle_check(&m.graph, em, f, EgMode::Maximal).map_err(|e| other(&e))?;
    match v.outcome {
        Outcome::True if !truth => Err(Violation::Unsound { query: query.into(), outcome: v.outcome, truth }),
        Outcome::False if truth => Err(Violation::Unsound { query: query.into(), outcome: v.outcome, truth }),
        o => Ok(o),
    }
}
