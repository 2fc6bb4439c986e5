//! Compiled expressions and statements over the flat slot layout.
//!
//! Places address either the global valuation or the current stack frame.
//! Frames hold select bindings, quantifier binders, function parameters and
//! locals. Reference parameters store an encoded address in a frame slot.

use super::types::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Imply,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantKind {
    Forall,
    Exists,
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Base {
    Global,
    Frame,
    /// Frame slot holding an encoded address.
    Ref(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexTerm {
    pub expr: Ex,
    pub dom: Domain,
    pub stride: u32,
}

/// A location in memory: base + static offset + dynamic index terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Place {
    pub base: Base,
    pub offset: u32,
    pub index: Vec<IndexTerm>,
}

impl Place {
    pub fn global(offset: u32) -> Place {
        Place {
            base: Base::Global,
            offset,
            index: vec![],
        }
    }

    pub fn frame(offset: u32) -> Place {
        Place {
            base: Base::Frame,
            offset,
            index: vec![],
        }
    }

    pub fn is_static_global(&self) -> bool {
        self.base == Base::Global && self.index.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Arg {
    /// Scalar by value, range-checked against the parameter domain.
    Value(Ex, Domain),
    /// Aggregate by value.
    Copy(Place, u32),
    /// By reference to a block of the given size.
    Ref(Place, u32),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ex {
    Const(i32),
    Load(Box<Place>),
    Un(UnOp, Box<Ex>),
    Bin(BinOp, Box<Ex>, Box<Ex>),
    Cond(Box<Ex>, Box<Ex>, Box<Ex>),
    Quant {
        kind: QuantKind,
        slot: u32,
        dom: Domain,
        body: Box<Ex>,
    },
    Call {
        func: u32,
        args: Vec<Arg>,
    },
    /// Agent `first + (index - dom.lo)` is at location `loc`.
    AtLocation {
        first: u32,
        index: Option<(Box<Ex>, Domain)>,
        loc: u32,
    },
}

impl Ex {
    pub fn truth(b: bool) -> Ex {
        Ex::Const(b as i32)
    }

    pub fn load(p: Place) -> Ex {
        Ex::Load(Box::new(p))
    }

    pub fn bin(op: BinOp, a: Ex, b: Ex) -> Ex {
        Ex::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn not(a: Ex) -> Ex {
        Ex::Un(UnOp::Not, Box::new(a))
    }

    pub fn as_const(&self) -> Option<i32> {
        match self {
            Ex::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// Calls reachable from this expression, used for purity checks.
    pub fn calls(&self, out: &mut Vec<u32>) {
        match self {
            Ex::Const(_) => {}
            Ex::Load(p) => p.calls(out),
            Ex::Un(_, a) => a.calls(out),
            Ex::Bin(_, a, b) => {
                a.calls(out);
                b.calls(out)
            }
            Ex::Cond(a, b, c) => {
                a.calls(out);
                b.calls(out);
                c.calls(out)
            }
            Ex::Quant { body, .. } => body.calls(out),
            Ex::Call { func, args } => {
                out.push(*func);
                for a in args {
                    match a {
                        Arg::Value(e, _) => e.calls(out),
                        Arg::Copy(p, _) | Arg::Ref(p, _) => p.calls(out),
                    }
                }
            }
            Ex::AtLocation { index, .. } => {
                if let Some((e, _)) = index {
                    e.calls(out)
                }
            }
        }
    }
}

impl Place {
    pub fn calls(&self, out: &mut Vec<u32>) {
        for t in &self.index {
            t.expr.calls(out)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum St {
    Assign {
        place: Place,
        value: Ex,
        dom: Domain,
    },
    Copy {
        dst: Place,
        src: Place,
        size: u32,
    },
    Eval(Ex),
    If(Ex, Vec<St>, Vec<St>),
    For {
        slot: u32,
        dom: Domain,
        body: Vec<St>,
    },
    /// C-style switch: jump to the matching entry of `body`, fall through until `Break`.
    Switch {
        scrut: Ex,
        cases: Vec<(i32, usize)>,
        default: Option<usize>,
        body: Vec<St>,
    },
    Break,
    Return(Option<Ex>),
    /// Initialise a frame-local block.
    Init {
        slot: u32,
        values: Vec<i32>,
    },
}

impl St {
    pub fn calls(&self, out: &mut Vec<u32>) {
        match self {
            St::Assign { place, value, .. } => {
                place.calls(out);
                value.calls(out)
            }
            St::Copy { dst, src, .. } => {
                dst.calls(out);
                src.calls(out)
            }
            St::Eval(e) => e.calls(out),
            St::If(c, a, b) => {
                c.calls(out);
                a.iter().chain(b).for_each(|s| s.calls(out))
            }
            St::For { body, .. } => body.iter().for_each(|s| s.calls(out)),
            St::Switch { scrut, body, .. } => {
                scrut.calls(out);
                body.iter().for_each(|s| s.calls(out))
            }
            St::Return(Some(e)) => e.calls(out),
            St::Break | St::Return(None) | St::Init { .. } => {}
        }
    }

    /// Whether this statement writes outside its own frame.
    pub fn writes_nonlocal(&self) -> bool {
        match self {
            St::Assign { place, .. } => place.base != Base::Frame,
            St::Copy { dst, .. } => dst.base != Base::Frame,
            St::If(_, a, b) => a.iter().chain(b).any(St::writes_nonlocal),
            St::For { body, .. } | St::Switch { body, .. } => body.iter().any(St::writes_nonlocal),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamKind {
    Value(Domain),
    Copy(u32),
    Ref,
}

#[derive(Clone, Debug)]
pub struct Function {
    pub name: String,
    /// Parameter kinds with their frame offsets.
    pub params: Vec<(ParamKind, u32)>,
    pub frame_size: u32,
    pub ret: Option<Domain>,
    pub body: Vec<St>,
    /// No writes outside its frame, directly or through callees.
    pub pure: bool,
}
