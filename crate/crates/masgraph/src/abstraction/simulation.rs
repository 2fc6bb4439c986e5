//! Empirical containment check between a concrete and an abstract model.

use super::AbsError;
use crate::kernel::{Direction, ExplicitModel, GlobalState, KernelError, TransitionLabel};
use serde::Serialize;

/// An unmatched transition, given as concrete states for `Under` and
/// abstract states for `Over`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationWitness {
    pub from: GlobalState,
    pub to: GlobalState,
    pub label: TransitionLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub holds: bool,
    pub witness: Option<SimulationWitness>,
}

impl SimulationResult {
    fn pass() -> Self {
        SimulationResult {
            holds: true,
            witness: None,
        }
    }

    fn fail(from: &GlobalState, to: &GlobalState, label: &TransitionLabel) -> Self {
        SimulationResult {
            holds: false,
            witness: Some(SimulationWitness {
                from: from.clone(),
                to: to.clone(),
                label: label.clone(),
            }),
        }
    }
}

/// Check that the abstract model relates to the concrete one as its
/// direction promises, with `h` the abstraction map.
///
/// `Under`: the initial state maps to the abstract initial state and every
/// concrete step s -> s' has an abstract step h(s) -> h(s').
/// `Over`: for every reachable concrete s whose image is reachable in the
/// abstract model, every abstract step from h(s) is matched by a concrete
/// step from s. Serial self-loops are exempt on the matched side.
pub fn simulation_check(
    concrete: &ExplicitModel,
    abs: &ExplicitModel,
    h: &dyn Fn(&GlobalState) -> Result<GlobalState, KernelError>,
    direction: Direction,
) -> Result<SimulationResult, AbsError> {
    if concrete.truncated || abs.truncated {
        return Err(AbsError::TruncatedModel);
    }
    let image: Vec<GlobalState> = concrete.states.iter().map(h).collect::<Result<_, _>>()?;
    let abs_index: Vec<Option<usize>> = image.iter().map(|a| abs.index_of(a)).collect();
    match direction {
        Direction::Under => {
            for &i in &concrete.initial {
                if !abs_index[i].is_some_and(|a| abs.initial.contains(&a)) {
                    return Ok(SimulationResult::fail(&concrete.states[i], &concrete.states[i], &TransitionLabel::SerialLoop));
                }
            }
            for (i, out) in concrete.edges.iter().enumerate() {
                for (j, t) in out {
                    if *t == TransitionLabel::SerialLoop {
                        continue;
                    }
                    let matched = match (abs_index[i], abs_index[*j]) {
                        (Some(a), Some(b)) => abs.edges[a].iter().any(|(k, _)| *k == b),
                        _ => false,
                    };
                    if !matched {
                        return Ok(SimulationResult::fail(&concrete.states[i], &concrete.states[*j], t));
                    }
                }
            }
        }
        Direction::Over => {
            for (i, a) in abs_index.iter().enumerate() {
                let Some(a) = *a else { continue };
                for (b, t) in &abs.edges[a] {
                    if *t == TransitionLabel::SerialLoop {
                        continue;
                    }
                    let matched = concrete.edges[i].iter().any(|(j, _)| abs_index[*j] == Some(*b));
                    if !matched {
                        return Ok(SimulationResult::fail(&abs.states[a], &abs.states[*b], t));
                    }
                }
            }
        }
    }
    Ok(SimulationResult::pass())
}
