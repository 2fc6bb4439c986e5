//! Value domains, elaborated types and the flat slot layout of a valuation.

use serde::Serialize;
use std::fmt;

/// Every variable value is stored as a 32-bit integer slot.
pub type Value = i32;

/// Closed integer interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Domain {
    pub lo: i32,
    pub hi: i32,
}

impl Domain {
    pub const BOOL: Domain = Domain { lo: 0, hi: 1 };
    /// Range of a plain `int`.
    pub const INT: Domain = Domain {
        lo: -32768,
        hi: 32767,
    };

    pub fn new(lo: i32, hi: i32) -> Self {
        Domain { lo, hi }
    }

    pub fn contains(&self, v: i32) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn size(&self) -> u64 {
        (self.hi as i64 - self.lo as i64 + 1).max(0) as u64
    }

    /// 0 when it lies in the interval, otherwise the lower bound.
    pub fn default_value(&self) -> i32 {
        if self.contains(0) {
            0
        } else {
            self.lo
        }
    }

    pub fn values(&self) -> std::ops::RangeInclusive<i32> {
        self.lo..=self.hi
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Elaborated type of a variable, parameter or expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ty {
    Bool,
    Int(Domain),
    Enum {
        name: String,
        variants: Vec<String>,
    },
    Record {
        name: Option<String>,
        fields: Vec<(String, Ty)>,
    },
    Array {
        index: Domain,
        elem: Box<Ty>,
    },
}

impl Ty {
    /// Number of scalar slots occupied by a value of this type.
    pub fn size(&self) -> u32 {
        match self {
            Ty::Bool | Ty::Int(_) | Ty::Enum { .. } => 1,
            Ty::Record { fields, .. } => fields.iter().map(|(_, t)| t.size()).sum(),
            Ty::Array { index, elem } => index.size() as u32 * elem.size(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Ty::Bool | Ty::Int(_) | Ty::Enum { .. })
    }

    /// Domain of a scalar type.
    pub fn domain(&self) -> Option<Domain> {
        match self {
            Ty::Bool => Some(Domain::BOOL),
            Ty::Int(d) => Some(*d),
            Ty::Enum { variants, .. } => Some(Domain::new(0, variants.len() as i32 - 1)),
            _ => None,
        }
    }

    pub fn field(&self, name: &str) -> Option<(u32, &Ty)> {
        let Ty::Record { fields, .. } = self else {
            return None;
        };
        let mut off = 0;
        for (n, t) in fields {
            if n == name {
                return Some((off, t));
            }
            off += t.size();
        }
        None
    }

    /// Flattened default values.
    pub fn defaults(&self) -> Vec<i32> {
        let mut out = Vec::with_capacity(self.size() as usize);
        self.push_defaults(&mut out);
        out
    }

    fn push_defaults(&self, out: &mut Vec<i32>) {
        match self {
            Ty::Record { fields, .. } => fields.iter().for_each(|(_, t)| t.push_defaults(out)),
            Ty::Array { index, elem } => {
                for _ in 0..index.size() {
                    elem.push_defaults(out)
                }
            }
            scalar => out.push(scalar.domain().unwrap().default_value()),
        }
    }

    /// Visit every scalar leaf with its relative offset, path suffix and domain.
    pub fn leaves(&self, prefix: &str, f: &mut dyn FnMut(u32, String, &Ty)) {
        self.leaves_at(0, prefix.to_string(), f);
    }

    fn leaves_at(&self, base: u32, path: String, f: &mut dyn FnMut(u32, String, &Ty)) {
        match self {
            Ty::Record { fields, .. } => {
                let mut off = base;
                for (n, t) in fields {
                    t.leaves_at(off, format!("{path}.{n}"), f);
                    off += t.size();
                }
            }
            Ty::Array { index, elem } => {
                let sz = elem.size();
                for (k, i) in index.values().enumerate() {
                    elem.leaves_at(base + k as u32 * sz, format!("{path}[{i}]"), f);
                }
            }
            scalar => f(base, path, scalar),
        }
    }

    /// Structural compatibility used for aggregate copies and reference parameters.
    pub fn same_shape(&self, other: &Ty) -> bool {
        match (self, other) {
            (Ty::Bool, Ty::Bool) => true,
            (Ty::Int(a), Ty::Int(b)) => a == b,
            (Ty::Enum { name: a, .. }, Ty::Enum { name: b, .. }) => a == b,
            (Ty::Record { fields: a, .. }, Ty::Record { fields: b, .. }) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|((na, ta), (nb, tb))| na == nb && ta.same_shape(tb))
            }
            (Ty::Array { index: ia, elem: ea }, Ty::Array { index: ib, elem: eb }) => {
                ia == ib && ea.same_shape(eb)
            }
            _ => false,
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Bool => write!(f, "bool"),
            Ty::Int(d) if *d == Domain::INT => write!(f, "int"),
            Ty::Int(d) => write!(f, "int{d}"),
            Ty::Enum { name, .. } => write!(f, "{name}"),
            Ty::Record { name: Some(n), .. } => write!(f, "{n}"),
            Ty::Record { name: None, fields } => {
                write!(f, "struct {{")?;
                for (n, t) in fields {
                    write!(f, " {t} {n};")?;
                }
                write!(f, " }}")
            }
            Ty::Array { index, elem } => write!(f, "{elem}{index}"),
        }
    }
}

/// Where a variable lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum VarScope {
    Shared,
    Local(u32),
}

/// An elaborated variable occupying `ty.size()` consecutive slots.
#[derive(Clone, Debug)]
pub struct VarDecl {
    /// Fully qualified, e.g. `Voter(1).pref_cand`.
    pub name: String,
    pub ty: Ty,
    pub scope: VarScope,
    pub base: u32,
    /// Flattened initial values (declared or default).
    pub initial: Vec<i32>,
}

/// One scalar position in the valuation vector.
#[derive(Clone, Debug)]
pub struct SlotInfo {
    /// Path such as `vlist[1].comment`.
    pub name: String,
    pub domain: Domain,
    pub var: u32,
    /// Enumeration name when the slot holds an enum value, `bool` for booleans.
    pub kind: SlotKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Int,
    Bool,
    Enum(Vec<String>),
}

impl SlotKind {
    pub fn of(ty: &Ty) -> SlotKind {
        match ty {
            Ty::Bool => SlotKind::Bool,
            Ty::Enum { variants, .. } => SlotKind::Enum(variants.clone()),
            _ => SlotKind::Int,
        }
    }

    pub fn render(&self, v: i32) -> String {
        match self {
            SlotKind::Bool => (v != 0).to_string(),
            SlotKind::Enum(vs) => vs
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| v.to_string()),
            SlotKind::Int => v.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_zero_or_lower_bound() {
        assert_eq!(Domain::new(0, 3).default_value(), 0);
        assert_eq!(Domain::new(1, 3).default_value(), 1);
        assert_eq!(Domain::new(-4, -1).default_value(), -4);
        let rec = Ty::Record {
            name: None,
            fields: vec![
                ("a".into(), Ty::Bool),
                (
                    "b".into(),
                    Ty::Array {
                        index: Domain::new(1, 2),
                        elem: Box::new(Ty::Int(Domain::new(2, 5))),
                    },
                ),
            ],
        };
        assert_eq!(rec.size(), 3);
        assert_eq!(rec.defaults(), vec![0, 2, 2]);
        let mut paths = vec![];
        rec.leaves("r", &mut |o, p, _| paths.push((o, p)));
        assert_eq!(
            paths,
            vec![(0, "r.a".into()), (1, "r.b[1]".into()), (2, "r.b[2]".into())]
        );
    }
}
