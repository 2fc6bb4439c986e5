//! Breadth-first materialization of the serial-closed transition system.

use super::graph::*;
use rustc_hash::FxHashMap;
use std::collections::VecDeque;
use thiserror::Error;

/// Explicit Kripke structure of a MAS graph.
#[derive(Clone, Debug, Default)]
pub struct ExplicitModel {
    pub states: Vec<GlobalState>,
    pub initial: Vec<usize>,
    pub edges: Vec<Vec<(usize, TransitionLabel)>>,
    /// Set when the state bound stopped exploration; such a model cannot
    /// decide universal properties.
    pub truncated: bool,
    index: FxHashMap<GlobalState, usize>,
}

impl ExplicitModel {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &GlobalState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn transition_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    fn intern(&mut self, s: GlobalState) -> (usize, bool) {
        if let Some(&i) = self.index.get(&s) {
            return (i, false);
        }
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.edges.push(Vec::new());
        (i, true)
    }
}

#[derive(Debug, Error)]
pub enum UnwrapError {
    #[error("state bound {bound} exceeded")]
    BoundExceeded {
        bound: usize,
        partial: Box<ExplicitModel>,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Materialize at most `state_bound` reachable states.
pub fn unwrap(m: &MasGraph, state_bound: usize) -> Result<ExplicitModel, UnwrapError> {
    assert!(state_bound > 0, "state bound must be positive");
    let mut em = ExplicitModel::default();
    let (i0, _) = em.intern(m.initial_state()?);
    em.initial.push(i0);
    let mut queue = VecDeque::from([i0]);
    while let Some(i) = queue.pop_front() {
        let succ = m.successors(&em.states[i])?;
        let mut out = Vec::with_capacity(succ.len());
        for (t, n) in succ {
            if em.index_of(&n).is_none() && em.states.len() >= state_bound {
                em.truncated = true;
                em.edges[i] = out;
                return Err(UnwrapError::BoundExceeded {
                    bound: state_bound,
                    partial: Box::new(em),
                });
            }
            let (j, fresh) = em.intern(n);
            if fresh {
                queue.push_back(j);
            }
            out.push((j, t));
        }
        em.edges[i] = out;
    }
    Ok(em)
}
