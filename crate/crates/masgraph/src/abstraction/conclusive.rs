//! Transferring verdicts from abstract models back to the concrete one.

use super::{abstract_model, check_formula_visible, AbsError, AbstractionSpec};
use crate::checker::{self, Formula, Options, Status, Verdict};
use crate::kernel::Direction;
use crate::textlang::{self, Model};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    True,
    False,
    Inconclusive,
}

/// One abstract check that contributed to a conclusive verdict.
#[derive(Clone, Debug, Serialize)]
pub struct Evidence {
    pub direction: Direction,
    pub query: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConclusiveVerdict {
    pub outcome: Outcome,
    /// Some abstract check ran out of memory.
    pub memout: bool,
    pub evidence: Vec<Evidence>,
}

/// Check `query` through the abstractions described by `spec`.
///
/// Without a declared direction both abstract models are built; otherwise
/// only the declared one. Replacement queries in the spec are used on the
/// abstract models instead of `query`. `A[]` is concluded true from the
/// under model and false from the over model; `E<>` the other way round.
pub fn check_with_abstraction(
    m: &Model,
    spec: &AbstractionSpec,
    query: &str,
    opts: &Options,
) -> Result<ConclusiveVerdict, AbsError> {
    let directions = match spec.direction() {
        Some(d) => vec![d],
        None => vec![Direction::Under, Direction::Over],
    };
    let mut out = ConclusiveVerdict {
        outcome: Outcome::Inconclusive,
        memout: false,
        evidence: Vec::new(),
    };
    for d in directions {
        let abs = abstract_model(m, &spec.with_direction(d))?;
        let q = match spec.queries().first() {
            Some(q) => textlang::compile_query(&abs, q, &spec.text)?,
            None => textlang::load_queries(&abs, query)
                .map_err(|e| match e {
                    textlang::LoadError::Parse(p) => AbsError::Parse(p),
                    textlang::LoadError::Type(t) => AbsError::Type(t),
                })?
                .into_iter()
                .next()
                .ok_or_else(|| AbsError::Invalid("no query given".into()))?,
        };
        let universal = match &q.formula {
            Formula::Invariant(_) => true,
            Formula::Reach(_) => false,
            f => return Err(AbsError::Unsupported(f.kind())),
        };
        check_formula_visible(&abs.graph, &q.formula)?;
        let v = checker::check(&abs.graph, &q.formula, opts)?;
        let decided = match (d, universal, v.status) {
            (_, _, Status::MemOut) => {
                out.memout = true;
                None
            }
            (Direction::Under, true, Status::Satisfied) => Some(Outcome::True),
            (Direction::Over, true, Status::Violated) => Some(Outcome::False),
            (Direction::Over, false, Status::Satisfied) => Some(Outcome::True),
            (Direction::Under, false, Status::Violated) => Some(Outcome::False),
            _ => None,
        };
        out.evidence.push(Evidence {
            direction: d,
            query: q.text,
            verdict: v,
        });
        if let Some(o) = decided {
            out.outcome = o;
            break;
        }
    }
    Ok(out)
}
