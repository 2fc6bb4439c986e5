//! Reference semantics by naive fixed-point iteration over an explicit model.
//! Deliberately simple and slow; used to cross-check the search algorithms.

use super::{EgMode, Formula, Pred};
use crate::kernel::{ExplicitModel, KernelError, MasGraph};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("explicit model is truncated")]
    TruncatedModel,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn label(m: &MasGraph, em: &ExplicitModel, p: &Pred) -> Result<Vec<bool>, KernelError> {
    em.states.iter().map(|s| p.holds(m, s)).collect()
}

/// States satisfying `E[a U b]`.
fn eu(em: &ExplicitModel, a: &[bool], b: &[bool]) -> Vec<bool> {
    let mut z = b.to_vec();
    loop {
        let mut changed = false;
        for i in 0..em.len() {
            if !z[i] && a[i] && em.edges[i].iter().any(|(j, _)| z[*j]) {
                z[i] = true;
                changed = true;
            }
        }
        if !changed {
            return z;
        }
    }
}

/// States satisfying `EG a`.
fn eg(em: &ExplicitModel, a: &[bool]) -> Vec<bool> {
    let mut z = a.to_vec();
    loop {
        let mut changed = false;
        for i in 0..em.len() {
            if z[i] && !em.edges[i].iter().any(|(j, _)| z[*j]) {
                z[i] = false;
                changed = true;
            }
        }
        if !changed {
            return z;
        }
    }
}

fn not(v: &[bool]) -> Vec<bool> {
    v.iter().map(|b| !b).collect()
}

/// Decide `f` at the initial states of `em`.
pub fn oracle_check(m: &MasGraph, em: &ExplicitModel, f: &Formula, mode: EgMode) -> Result<bool, OracleError> {
    if em.truncated {
        return Err(OracleError::TruncatedModel);
    }
    let all = vec![true; em.len()];
    let at_init = |v: Vec<bool>| em.initial.iter().all(|&i| v[i]);
    Ok(match f {
        Formula::Invariant(p) => {
            let bad = eu(em, &all, &not(&label(m, em, p)?));
            at_init(not(&bad))
        }
        Formula::Reach(p) => at_init(eu(em, &all, &label(m, em, p)?)),
        Formula::ExistsGlobally(p) => {
            let lp = label(m, em, p)?;
            match mode {
                EgMode::Maximal => at_init(eg(em, &lp)),
                EgMode::FiniteRun => at_init(lp),
            }
        }
        Formula::Liveness(p) => at_init(not(&eg(em, &not(&label(m, em, p)?)))),
        Formula::LeadsTo(p, q) => {
            let lp = label(m, em, p)?;
            let avoid = eg(em, &not(&label(m, em, q)?));
            let bad: Vec<bool> = lp.iter().zip(&avoid).map(|(a, b)| *a && *b).collect();
            at_init(not(&eu(em, &all, &bad)))
        }
    })
}
