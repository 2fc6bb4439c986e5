//! Compiled properties.

use crate::kernel::ir::Ex;
use crate::kernel::{GlobalState, KernelError, MasGraph};
use std::fmt;

/// A side-effect-free state predicate with the frame its quantifiers need.
#[derive(Clone, Debug)]
pub struct Pred {
    pub ex: Ex,
    pub frame: u32,
    /// Source text, for reports.
    pub text: String,
}

impl Pred {
    pub fn constant(b: bool) -> Pred {
        Pred {
            ex: Ex::truth(b),
            frame: 0,
            text: b.to_string(),
        }
    }

    pub fn holds(&self, m: &MasGraph, s: &GlobalState) -> Result<bool, KernelError> {
        m.eval_predicate(&self.ex, self.frame, s)
    }

    pub fn negate(&self) -> Pred {
        Pred {
            ex: Ex::not(self.ex.clone()),
            frame: self.frame,
            text: format!("!({})", self.text),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Formula {
    /// `A[] p`
    Invariant(Pred),
    /// `E<> p`
    Reach(Pred),
    /// `A<> p`
    Liveness(Pred),
    /// `E[] p`
    ExistsGlobally(Pred),
    /// `p --> q`
    LeadsTo(Pred, Pred),
}

impl Formula {
    pub fn kind(&self) -> &'static str {
        match self {
            Formula::Invariant(_) => "A[]",
            Formula::Reach(_) => "E<>",
            Formula::Liveness(_) => "A<>",
            Formula::ExistsGlobally(_) => "E[]",
            Formula::LeadsTo(..) => "-->",
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::LeadsTo(p, q) => write!(f, "{} --> {}", p.text, q.text),
            Formula::Invariant(p) | Formula::Reach(p) | Formula::Liveness(p) | Formula::ExistsGlobally(p) => {
                write!(f, "{} {}", self.kind(), p.text)
            }
        }
    }
}
