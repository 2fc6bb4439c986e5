//! On-the-fly verification and the fixed-point oracle.
//!
//! `A[]` and `E<>` run a breadth-first search (optionally level-parallel,
//! with deterministic insertion order) and return shortest traces. `E[]`
//! and `A<>` search for a lasso by depth-first search restricted to the
//! states satisfying the path predicate. Leads-to materializes the state
//! graph and computes the states with an infinite path avoiding the goal.

mod formula;
mod oracle;
mod search;
mod store;

pub use formula::{Formula, Pred};
pub use oracle::{oracle_check, OracleError};
pub use search::{check, check_exists_globally, check_invariant, check_leads_to, check_liveness, check_reach};

use crate::kernel::{GlobalState, KernelError, MasGraph, TransitionLabel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Semantics of `E[]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgMode {
    /// An infinite path of the serial-closed graph.
    #[default]
    Maximal,
    /// Some nonempty finite run; over-approximates `Maximal`.
    FiniteRun,
}

#[derive(Clone, Debug)]
pub struct Options {
    /// Estimated memory cap in bytes; exceeding it yields [`Status::MemOut`].
    pub mem_budget: usize,
    pub threads: usize,
    pub eg_mode: EgMode,
}

pub const DEFAULT_BUDGET: usize = 2 << 30;

impl Default for Options {
    fn default() -> Self {
        Options {
            mem_budget: DEFAULT_BUDGET,
            threads: 1,
            eg_mode: EgMode::Maximal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Violated,
    MemOut,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub states_stored: usize,
    /// Successor generations plus the initial state.
    pub states_explored: usize,
    pub time_s: f64,
    /// Peak estimate of the search's memory use.
    pub mem_bytes: usize,
}

/// A finite run from the initial state. For lasso witnesses the last step
/// re-enters the state at `loop_start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: GlobalState,
    pub steps: Vec<(TransitionLabel, GlobalState)>,
    pub loop_start: Option<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("initial state differs from the model's")]
    Initial,
    #[error("step {0} does not reproduce the recorded state")]
    Mismatch(usize),
    #[error("loop start {0} does not match the final state")]
    Loop(usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &GlobalState> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|(_, s)| s))
    }

    pub fn last(&self) -> &GlobalState {
        self.steps.last().map(|(_, s)| s).unwrap_or(&self.initial)
    }

    /// Re-execute every step through the kernel.
    pub fn replay(&self, m: &MasGraph) -> Result<(), ReplayError> {
        if m.initial_state()? != self.initial {
            return Err(ReplayError::Initial);
        }
        let mut cur = self.initial.clone();
        for (i, (t, s)) in self.steps.iter().enumerate() {
            let n = m.step(&cur, t)?;
            if n != *s {
                return Err(ReplayError::Mismatch(i));
            }
            cur = n;
        }
        if let Some(k) = self.loop_start {
            if self.states().nth(k) != Some(self.last()) {
                return Err(ReplayError::Loop(k));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub trace: Option<Trace>,
    pub stats: Stats,
}

impl Verdict {
    /// `None` when the search ran out of memory.
    pub fn satisfied(&self) -> Option<bool> {
        match self.status {
            Status::Satisfied => Some(true),
            Status::Violated => Some(false),
            Status::MemOut => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
