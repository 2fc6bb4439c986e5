//! Elaboration: name resolution, type checking, slot layout, compilation of
//! functions and edges to kernel IR, and template instantiation.

use super::ast::*;
use super::printer::print_expr;
use super::{CompiledQuery, Instance, Model, TypeError, TypeErrorKind as K};
use crate::checker::{Formula, Pred};
use crate::kernel::eval::apply_bin;
use crate::kernel::ir::*;
use crate::kernel::*;
use std::collections::HashMap;
use std::sync::Arc;

type TResult<T> = Result<T, TypeError>;

#[derive(Clone, Debug)]
pub struct ParamSig {
    pub ty: Ty,
    pub by_ref: bool,
    pub is_const: bool,
}

#[derive(Clone, Debug)]
pub struct FnSig {
    pub id: u32,
    pub name: String,
    pub params: Vec<ParamSig>,
    pub ret: Option<Ty>,
    pub pure: bool,
}

/// What a name denotes.
#[derive(Clone, Debug)]
pub enum Sym {
    Const(i32, Ty),
    Type(Ty),
    Var { place: Place, ty: Ty, writable: bool },
    Chan { base: u32, dims: Vec<Domain> },
    Func(Arc<FnSig>),
    Template(String),
}

#[derive(Clone, Debug)]
pub struct TemplateInfo {
    pub name: String,
    pub params: Vec<(String, Ty)>,
    /// Instances in agent order.
    pub agents: Vec<u32>,
    pub locations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct InstanceInfo {
    pub template: String,
    pub actuals: Vec<i32>,
    /// First slot and slot count of the local variable block.
    pub block: (u32, u32),
    /// Parameters, local constants, types, variables and functions.
    pub scope: HashMap<String, Sym>,
}

/// Symbols of an elaborated model.
#[derive(Clone, Debug, Default)]
pub struct Env {
    pub(crate) globals: HashMap<String, Sym>,
    pub(crate) templates: HashMap<String, TemplateInfo>,
    pub(crate) instances: Vec<InstanceInfo>,
}

impl Env {
    pub fn global(&self, name: &str) -> Option<&Sym> {
        self.globals.get(name)
    }

    pub fn template(&self, name: &str) -> Option<&TemplateInfo> {
        self.templates.get(name)
    }

    pub fn instance(&self, agent: u32) -> Option<&InstanceInfo> {
        self.instances.get(agent as usize)
    }

    /// Named types visible at the top level.
    pub fn named_type(&self, name: &str) -> Option<&Ty> {
        match self.globals.get(name) {
            Some(Sym::Type(t)) => Some(t),
            _ => None,
        }
    }
}

/// A compiled expression: an rvalue or an addressable place.
#[derive(Clone, Debug)]
pub(crate) struct Typed {
    pub ty: Ty,
    pub v: TV,
}

#[derive(Clone, Debug)]
pub(crate) enum TV {
    Val(Ex),
    Place(Place, bool),
}

impl Typed {
    fn val(ex: Ex, ty: Ty) -> Typed {
        Typed { ty, v: TV::Val(ex) }
    }

    fn ex(&self) -> Ex {
        match &self.v {
            TV::Val(e) => e.clone(),
            TV::Place(p, _) => Ex::load(p.clone()),
        }
    }
}

fn int_ty() -> Ty {
    Ty::Int(Domain::INT)
}

fn is_int(t: &Ty) -> bool {
    matches!(t, Ty::Int(_))
}

/// Same scalar class: ints with ints, bools with bools, one enum with itself.
fn compatible(a: &Ty, b: &Ty) -> bool {
    match (a, b) {
        (Ty::Int(_), Ty::Int(_)) | (Ty::Bool, Ty::Bool) => true,
        (Ty::Enum { name: x, .. }, Ty::Enum { name: y, .. }) => x == y,
        _ => false,
    }
}

fn show(t: &Ty) -> String {
    match t {
        Ty::Int(_) => "int".into(),
        other => other.to_string(),
    }
}

/// Expression and statement compiler over a scope chain and a frame.
pub(crate) struct Cx<'e> {
    pub env: &'e Env,
    pub text: &'e str,
    pub layers: Vec<HashMap<String, Sym>>,
    pub next: u32,
    pub max: u32,
    /// Guards, initial conditions and queries may not have side effects.
    pub pure: bool,
    /// Return type of the function being compiled.
    ret: Option<Option<Ty>>,
    breakable: u32,
    /// Function ids called, collected for purity.
    pub called: Vec<u32>,
}

impl<'e> Cx<'e> {
    pub fn new(env: &'e Env, text: &'e str) -> Self {
        Cx {
            env,
            text,
            layers: vec![HashMap::new()],
            next: 0,
            max: 0,
            pure: false,
            ret: None,
            breakable: 0,
            called: vec![],
        }
    }

    pub fn err<T>(&self, kind: K, span: Span, msg: impl Into<String>) -> TResult<T> {
        Err(TypeError::new(kind, self.text, span, msg.into()))
    }

    pub fn lookup(&self, name: &str) -> Option<&Sym> {
        self.layers
            .iter()
            .rev()
            .find_map(|l| l.get(name))
            .or_else(|| self.env.globals.get(name))
    }

    pub fn bind(&mut self, id: &Ident, sym: Sym) -> TResult<()> {
        let layer = self.layers.last_mut().unwrap();
        if layer.contains_key(&id.name) {
            return Err(TypeError::new(
                K::Duplicate,
                self.text,
                id.span,
                format!("duplicate declaration of '{}'", id.name),
            ));
        }
        layer.insert(id.name.clone(), sym);
        Ok(())
    }

    pub fn alloc(&mut self, n: u32) -> u32 {
        let s = self.next;
        self.next += n;
        self.max = self.max.max(self.next);
        s
    }

    // ---- types -----------------------------------------------------------

    pub fn ty_of(&mut self, te: &TypeExpr) -> TResult<Ty> {
        match te {
            TypeExpr::Bool(_) => Ok(Ty::Bool),
            TypeExpr::Int { range: None, .. } => Ok(int_ty()),
            TypeExpr::Int {
                range: Some(r),
                span,
            } => {
                let lo = self.const_int(&r.0)?;
                let hi = self.const_int(&r.1)?;
                if lo > hi {
                    return self.err(K::Type, *span, format!("empty range [{lo},{hi}]"));
                }
                Ok(Ty::Int(Domain::new(lo, hi)))
            }
            TypeExpr::Named(id) => match self.lookup(&id.name) {
                Some(Sym::Type(t)) => Ok(t.clone()),
                Some(_) => self.err(K::Type, id.span, format!("'{}' is not a type", id.name)),
                None => self.err(K::UnknownName, id.span, format!("unknown type '{}'", id.name)),
            },
            TypeExpr::Struct { fields, .. } => {
                let mut out: Vec<(String, Ty)> = Vec::new();
                for f in fields {
                    if out.iter().any(|(n, _)| *n == f.name.name) {
                        return self.err(K::Duplicate, f.name.span, format!("duplicate field '{}'", f.name.name));
                    }
                    let t = self.ty_of(&f.ty)?;
                    let t = self.with_dims(t, &f.dims)?;
                    out.push((f.name.name.clone(), t));
                }
                Ok(Ty::Record { name: None, fields: out })
            }
            TypeExpr::Enum { span, .. } => self.err(K::Type, *span, "enumerations must be declared with typedef"),
        }
    }

    pub fn with_dims(&mut self, ty: Ty, dims: &[ArrayDim]) -> TResult<Ty> {
        let mut t = ty;
        for d in dims.iter().rev() {
            let index = self.dim_domain(d)?;
            t = Ty::Array {
                index,
                elem: Box::new(t),
            };
        }
        Ok(t)
    }

    fn dim_domain(&mut self, d: &ArrayDim) -> TResult<Domain> {
        match d {
            ArrayDim::Type(te) => {
                let t = self.ty_of(te)?;
                match t.domain() {
                    Some(dom) if dom.size() <= 1 << 16 => Ok(dom),
                    _ => self.err(K::Type, te.span(), "array index type must be a small scalar type"),
                }
            }
            ArrayDim::Expr(e) => {
                if let ExprKind::Ident(n) = &e.kind {
                    if let Some(Sym::Type(t)) = self.lookup(n) {
                        return match t.domain() {
                            Some(dom) if dom.size() <= 1 << 16 => Ok(dom),
                            _ => self.err(K::Type, e.span, "array index type must be a small scalar type"),
                        };
                    }
                }
                let n = self.const_int(e)?;
                if n < 1 {
                    return self.err(K::Type, e.span, format!("array size {n} must be positive"));
                }
                Ok(Domain::new(0, n - 1))
            }
        }
    }

    /// Flattened constant initializer.
    pub fn const_init(&mut self, ty: &Ty, init: &Init) -> TResult<Vec<i32>> {
        match (ty, init) {
            (Ty::Record { fields, .. }, Init::List(items, span)) => {
                if items.len() != fields.len() {
                    return self.err(
                        K::Type,
                        *span,
                        format!("expected {} initializers, found {}", fields.len(), items.len()),
                    );
                }
                let mut out = Vec::new();
                for ((_, t), i) in fields.iter().zip(items) {
                    out.extend(self.const_init(t, i)?);
                }
                Ok(out)
            }
            (Ty::Array { index, elem }, Init::List(items, span)) => {
                if items.len() as u64 != index.size() {
                    return self.err(
                        K::Type,
                        *span,
                        format!("expected {} initializers, found {}", index.size(), items.len()),
                    );
                }
                let mut out = Vec::new();
                for i in items {
                    out.extend(self.const_init(elem, i)?);
                }
                Ok(out)
            }
            (t, Init::Expr(e)) if t.is_scalar() => {
                let v = self.compile(e)?;
                if !compatible(&v.ty, t) {
                    return self.err(K::Type, e.span, format!("expected {}, found {}", show(t), show(&v.ty)));
                }
                let Some(c) = v.ex().as_const() else {
                    return self.err(K::Type, e.span, "initializer is not a constant expression");
                };
                let dom = t.domain().unwrap();
                if !dom.contains(c) {
                    return self.err(K::Type, e.span, format!("value {c} outside {dom}"));
                }
                Ok(vec![c])
            }
            (_, Init::Expr(e)) => self.err(K::Type, e.span, "aggregate needs a braced initializer"),
            (_, Init::List(_, span)) => self.err(K::Type, *span, "scalar cannot take a braced initializer"),
        }
    }

    pub fn const_int(&mut self, e: &Expr) -> TResult<i32> {
        let t = self.compile(e)?;
        if !is_int(&t.ty) {
            return self.err(K::Type, e.span, format!("expected int, found {}", show(&t.ty)));
        }
        match t.ex().as_const() {
            Some(v) => Ok(v),
            None => self.err(K::Type, e.span, "not a constant expression"),
        }
    }

    // ---- expressions -----------------------------------------------------

    /// Compile a scalar rvalue of the given class.
    pub fn value(&mut self, e: &Expr) -> TResult<(Ex, Ty)> {
        let t = self.compile(e)?;
        if !t.ty.is_scalar() {
            return self.err(K::Type, e.span, format!("expected a scalar, found {}", t.ty));
        }
        Ok((t.ex(), t.ty))
    }

    pub fn boolean(&mut self, e: &Expr) -> TResult<Ex> {
        let (x, t) = self.value(e)?;
        if t != Ty::Bool {
            return self.err(K::Type, e.span, format!("expected bool, found {}", show(&t)));
        }
        Ok(x)
    }

    fn integer(&mut self, e: &Expr) -> TResult<Ex> {
        let (x, t) = self.value(e)?;
        if !is_int(&t) {
            return self.err(K::Type, e.span, format!("expected int, found {}", show(&t)));
        }
        Ok(x)
    }

    fn fold(&self, op: BinOp, a: Ex, b: Ex, span: Span) -> TResult<Ex> {
        match (op, a.as_const(), b.as_const()) {
            (_, Some(x), Some(y)) => match apply_bin(op, x, y) {
                Ok(v) => Ok(Ex::Const(v)),
                Err(_) => self.err(K::Type, span, "division by zero in constant expression"),
            },
            (BinOp::And, Some(0), _) => Ok(Ex::Const(0)),
            (BinOp::And, Some(_), _) => Ok(b),
            (BinOp::Or, Some(0), _) => Ok(b),
            (BinOp::Or, Some(_), _) => Ok(Ex::Const(1)),
            (BinOp::Imply, Some(0), _) => Ok(Ex::Const(1)),
            (BinOp::Imply, Some(_), _) => Ok(b),
            _ => Ok(Ex::bin(op, a, b)),
        }
    }

    pub fn compile(&mut self, e: &Expr) -> TResult<Typed> {
        match &e.kind {
            ExprKind::Int(v) => {
                if *v > i32::MAX as i64 {
                    return self.err(K::Type, e.span, "integer literal too large");
                }
                Ok(Typed::val(Ex::Const(*v as i32), int_ty()))
            }
            ExprKind::Bool(b) => Ok(Typed::val(Ex::truth(*b), Ty::Bool)),
            ExprKind::Ident(n) => match self.lookup(n) {
                None => self.err(K::UnknownName, e.span, format!("unknown name '{n}'")),
                Some(Sym::Const(v, t)) => Ok(Typed::val(Ex::Const(*v), t.clone())),
                Some(Sym::Var { place, ty, writable }) => Ok(Typed {
                    ty: ty.clone(),
                    v: TV::Place(place.clone(), *writable),
                }),
                Some(Sym::Chan { .. }) => self.err(K::Type, e.span, format!("channel '{n}' used as a value")),
                Some(Sym::Type(_)) => self.err(K::Type, e.span, format!("type '{n}' used as a value")),
                Some(Sym::Func(_)) => self.err(K::Type, e.span, format!("function '{n}' used without a call")),
                Some(Sym::Template(_)) => self.err(K::Type, e.span, format!("process '{n}' used as a value")),
            },
            ExprKind::Field(base, f) => {
                if let Some(r) = self.process_ref(base)? {
                    return self.process_member(r, f);
                }
                let b = self.compile(base)?;
                let TV::Place(mut p, w) = b.v else {
                    return self.err(K::Type, base.span, "field access on a non-record value");
                };
                let Some((off, t)) = b.ty.field(&f.name) else {
                    return self.err(K::UnknownName, f.span, format!("{} has no field '{}'", b.ty, f.name));
                };
                p.offset += off;
                Ok(Typed {
                    ty: t.clone(),
                    v: TV::Place(p, w),
                })
            }
            ExprKind::Index(base, ix) => {
                let b = self.compile(base)?;
                let TV::Place(mut p, w) = b.v else {
                    return self.err(K::Type, base.span, "indexing a non-array value");
                };
                let Ty::Array { index, elem } = b.ty else {
                    return self.err(K::Type, base.span, format!("indexing non-array type {}", b.ty));
                };
                let (x, t) = self.value(ix)?;
                if t == Ty::Bool {
                    return self.err(K::Type, ix.span, "array index must be an integer");
                }
                let stride = elem.size();
                match x.as_const() {
                    Some(v) if !index.contains(v) => {
                        return self.err(K::Type, ix.span, format!("index {v} outside {index}"));
                    }
                    Some(v) => p.offset += (v - index.lo) as u32 * stride,
                    None => p.index.push(IndexTerm {
                        expr: x,
                        dom: index,
                        stride,
                    }),
                }
                Ok(Typed {
                    ty: *elem,
                    v: TV::Place(p, w),
                })
            }
            ExprKind::Call(f, args) => {
                let (ex, ret) = self.call(f, args, e.span)?;
                match ret {
                    Some(t) => Ok(Typed::val(ex, t)),
                    None => self.err(K::Type, e.span, format!("void function '{}' used as a value", f.name)),
                }
            }
            ExprKind::Unary(UnaryOp::Neg, a) => {
                let x = self.integer(a)?;
                Ok(Typed::val(
                    match x.as_const() {
                        Some(v) => Ex::Const(v.wrapping_neg()),
                        None => Ex::Un(UnOp::Neg, Box::new(x)),
                    },
                    int_ty(),
                ))
            }
            ExprKind::Unary(UnaryOp::Not, a) => {
                let x = self.boolean(a)?;
                Ok(Typed::val(
                    match x.as_const() {
                        Some(v) => Ex::truth(v == 0),
                        None => Ex::not(x),
                    },
                    Ty::Bool,
                ))
            }
            ExprKind::Binary(op, a, b) => self.binary(*op, a, b, e.span),
            ExprKind::Ternary(c, a, b) => {
                let c = self.boolean(c)?;
                let (x, tx) = self.value(a)?;
                let (y, ty) = self.value(b)?;
                if !compatible(&tx, &ty) {
                    return self.err(K::Type, e.span, format!("branches have types {} and {}", show(&tx), show(&ty)));
                }
                let t = if is_int(&tx) { int_ty() } else { tx };
                let ex = match c.as_const() {
                    Some(0) => y,
                    Some(_) => x,
                    None => Ex::Cond(Box::new(c), Box::new(x), Box::new(y)),
                };
                Ok(Typed::val(ex, t))
            }
            ExprKind::Assign(..) | ExprKind::IncDec(..) => {
                if self.pure {
                    self.err(K::SideEffectInGuard, e.span, "assignment in a side-effect-free context")
                } else {
                    self.err(K::Type, e.span, "assignment used as a value")
                }
            }
            ExprKind::Quant { q, var, ty, body } => {
                let t = self.ty_of(ty)?;
                let Some(dom) = t.domain() else {
                    return self.err(K::Type, ty.span(), "quantifier ranges over a scalar type");
                };
                let slot = self.alloc(1);
                self.layers.push(HashMap::new());
                self.bind(
                    var,
                    Sym::Var {
                        place: Place::frame(slot),
                        ty: t,
                        writable: false,
                    },
                )?;
                let r = self.value(body);
                self.layers.pop();
                let (b, bt) = r?;
                let (kind, rt) = match q {
                    Quantifier::Forall => (QuantKind::Forall, Ty::Bool),
                    Quantifier::Exists => (QuantKind::Exists, Ty::Bool),
                    Quantifier::Sum => (QuantKind::Sum, int_ty()),
                };
                let ok = match q {
                    Quantifier::Sum => is_int(&bt) || bt == Ty::Bool,
                    _ => bt == Ty::Bool,
                };
                if !ok {
                    return self.err(K::Type, body.span, format!("quantifier body has type {}", show(&bt)));
                }
                Ok(Typed::val(
                    Ex::Quant {
                        kind,
                        slot,
                        dom,
                        body: Box::new(b),
                    },
                    rt,
                ))
            }
        }
    }

    fn binary(&mut self, op: BinaryOp, a: &Expr, b: &Expr, span: Span) -> TResult<Typed> {
        use BinaryOp as B;
        let bop = match op {
            B::Add => BinOp::Add,
            B::Sub => BinOp::Sub,
            B::Mul => BinOp::Mul,
            B::Div => BinOp::Div,
            B::Mod => BinOp::Mod,
            B::Lt => BinOp::Lt,
            B::Le => BinOp::Le,
            B::Gt => BinOp::Gt,
            B::Ge => BinOp::Ge,
            B::Eq => BinOp::Eq,
            B::Ne => BinOp::Ne,
            B::And => BinOp::And,
            B::Or => BinOp::Or,
            B::Imply => BinOp::Imply,
        };
        let (x, y, rt) = match op {
            B::Add | B::Sub | B::Mul | B::Div | B::Mod => (self.integer(a)?, self.integer(b)?, int_ty()),
            B::Lt | B::Le | B::Gt | B::Ge => (self.integer(a)?, self.integer(b)?, Ty::Bool),
            B::And | B::Or | B::Imply => (self.boolean(a)?, self.boolean(b)?, Ty::Bool),
            B::Eq | B::Ne => {
                let (x, tx) = self.value(a)?;
                let (y, ty) = self.value(b)?;
                if !compatible(&tx, &ty) {
                    return self.err(K::Type, span, format!("cannot compare {} with {}", show(&tx), show(&ty)));
                }
                (x, y, Ty::Bool)
            }
        };
        Ok(Typed::val(self.fold(bop, x, y, span)?, rt))
    }

    /// Resolve `P` or `P(args)` naming a process instance.
    fn process_ref(&mut self, base: &Expr) -> TResult<Option<ProcRef>> {
        let (id, args) = match &base.kind {
            ExprKind::Ident(n) => match self.lookup(n) {
                Some(Sym::Template(t)) => (t.clone(), None),
                _ => return Ok(None),
            },
            ExprKind::Call(f, args) => match self.lookup(&f.name) {
                Some(Sym::Template(t)) => (t.clone(), Some(args)),
                _ => return Ok(None),
            },
            _ => return Ok(None),
        };
        let env = self.env;
        let Some(tpl) = env.templates.get(&id) else {
            return self.err(K::UnknownName, base.span, format!("process '{id}' is not instantiated"));
        };
        let args: &[Expr] = args.map(|a| a.as_slice()).unwrap_or(&[]);
        if args.len() != tpl.params.len() {
            return self.err(
                K::UnboundParameter,
                base.span,
                format!("process '{id}' takes {} arguments", tpl.params.len()),
            );
        }
        let mut vals = Vec::new();
        for (a, (_, pt)) in args.iter().zip(&tpl.params) {
            let (x, t) = self.value(a)?;
            if !compatible(&t, pt) {
                return self.err(K::Type, a.span, format!("expected {}, found {}", show(pt), show(&t)));
            }
            vals.push(x);
        }
        if vals.iter().all(|v| v.as_const().is_some()) {
            let actuals: Vec<i32> = vals.iter().map(|v| v.as_const().unwrap()).collect();
            for &a in &tpl.agents {
                if env.instances[a as usize].actuals == actuals {
                    return Ok(Some(ProcRef::Static(a)));
                }
            }
            return self.err(K::OutOfDomain, base.span, format!("no instance {id}{actuals:?} in the system"));
        }
        // Dynamic index: a single parameter whose instances are contiguous and complete.
        let dom = tpl.params.first().and_then(|(_, t)| t.domain());
        let contiguous = tpl.params.len() == 1
            && dom.is_some_and(|d| {
                tpl.agents.len() as u64 == d.size()
                    && tpl.agents.iter().enumerate().all(|(k, &a)| {
                        a == tpl.agents[0] + k as u32 && env.instances[a as usize].actuals == vec![d.lo + k as i32]
                    })
            });
        if !contiguous {
            return self.err(
                K::Type,
                base.span,
                format!("dynamic index into '{id}' needs one instance per parameter value"),
            );
        }
        Ok(Some(ProcRef::Dynamic {
            first: tpl.agents[0],
            index: vals.pop().unwrap(),
            dom: dom.unwrap(),
            template: id,
        }))
    }

    fn process_member(&mut self, r: ProcRef, f: &Ident) -> TResult<Typed> {
        let env = self.env;
        let (first, tname) = match &r {
            ProcRef::Static(a) => (*a, env.instances[*a as usize].template.clone()),
            ProcRef::Dynamic { first, template, .. } => (*first, template.clone()),
        };
        let tpl = &env.templates[&tname];
        if let Some(loc) = tpl.locations.iter().position(|l| *l == f.name) {
            let ex = match r {
                ProcRef::Static(a) => Ex::AtLocation {
                    first: a,
                    index: None,
                    loc: loc as u32,
                },
                ProcRef::Dynamic { first, index, dom, .. } => Ex::AtLocation {
                    first,
                    index: Some((Box::new(index), dom)),
                    loc: loc as u32,
                },
            };
            return Ok(Typed::val(ex, Ty::Bool));
        }
        let inst = &env.instances[first as usize];
        let Some(Sym::Var { place, ty, .. }) = inst.scope.get(&f.name) else {
            return self.err(K::UnknownName, f.span, format!("'{tname}' has no location or variable '{}'", f.name));
        };
        let mut place = place.clone();
        if let ProcRef::Dynamic { index, dom, .. } = r {
            let size = inst.block.1;
            let uniform = tpl.agents.iter().enumerate().all(|(k, &a)| {
                let b = env.instances[a as usize].block;
                b.1 == size && b.0 == inst.block.0 + k as u32 * size
            });
            if !uniform {
                return self.err(K::Type, f.span, format!("instances of '{tname}' have differing layouts"));
            }
            place.index.push(IndexTerm {
                expr: index,
                dom,
                stride: size,
            });
        }
        Ok(Typed {
            ty: ty.clone(),
            v: TV::Place(place, false),
        })
    }

    fn call(&mut self, f: &Ident, args: &[Expr], span: Span) -> TResult<(Ex, Option<Ty>)> {
        let sig = match self.lookup(&f.name) {
            Some(Sym::Func(s)) => s.clone(),
            Some(_) => return self.err(K::Type, f.span, format!("'{}' is not a function", f.name)),
            None => return self.err(K::UnknownName, f.span, format!("unknown function '{}'", f.name)),
        };
        if args.len() != sig.params.len() {
            return self.err(
                K::Type,
                span,
                format!("'{}' takes {} arguments, found {}", f.name, sig.params.len(), args.len()),
            );
        }
        if self.pure && !sig.pure {
            return self.err(
                K::SideEffectInGuard,
                span,
                format!("call to '{}' which has side effects", f.name),
            );
        }
        let mut out = Vec::new();
        for (a, p) in args.iter().zip(&sig.params) {
            let t = self.compile(a)?;
            if p.by_ref || !p.ty.is_scalar() {
                let TV::Place(pl, writable) = t.v else {
                    return self.err(K::Type, a.span, "argument must be a variable");
                };
                let shape_ok = if p.ty.is_scalar() {
                    compatible(&p.ty, &t.ty) && (!is_int(&p.ty) || p.ty == t.ty)
                } else {
                    p.ty.same_shape(&t.ty)
                };
                if !shape_ok {
                    return self.err(K::Type, a.span, format!("expected {}, found {}", p.ty, t.ty));
                }
                if p.by_ref {
                    if !writable && !p.is_const {
                        return self.err(K::Type, a.span, "read-only variable passed by reference");
                    }
                    out.push(Arg::Ref(pl, p.ty.size()));
                } else {
                    out.push(Arg::Copy(pl, p.ty.size()));
                }
            } else {
                if !compatible(&p.ty, &t.ty) {
                    return self.err(K::Type, a.span, format!("expected {}, found {}", show(&p.ty), show(&t.ty)));
                }
                let dom = p.ty.domain().unwrap();
                let x = t.ex();
                if let Some(v) = x.as_const() {
                    if !dom.contains(v) {
                        return self.err(K::Type, a.span, format!("argument {v} outside {dom}"));
                    }
                }
                out.push(Arg::Value(x, dom));
            }
        }
        self.called.push(sig.id);
        Ok((Ex::Call { func: sig.id, args: out }, sig.ret.clone()))
    }

    /// Compile a `chan` expression to a place addressing the channel id.
    pub fn channel(&mut self, e: &Expr) -> TResult<Place> {
        let mut indices = Vec::new();
        let mut cur = e;
        while let ExprKind::Index(b, i) = &cur.kind {
            indices.push(i.as_ref());
            cur = b;
        }
        indices.reverse();
        let ExprKind::Ident(n) = &cur.kind else {
            return self.err(K::UnknownChannel, e.span, "expected a channel");
        };
        let Some(Sym::Chan { base, dims }) = self.lookup(n).cloned() else {
            return self.err(K::UnknownChannel, cur.span, format!("unknown channel '{n}'"));
        };
        if indices.len() != dims.len() {
            return self.err(
                K::Type,
                e.span,
                format!("channel '{n}' needs {} indices", dims.len()),
            );
        }
        let mut place = Place::global(base);
        let mut stride: u32 = dims.iter().map(|d| d.size() as u32).product();
        for (ix, dom) in indices.into_iter().zip(&dims) {
            stride /= dom.size() as u32;
            let (x, t) = self.value(ix)?;
            if t == Ty::Bool {
                return self.err(K::Type, ix.span, "channel index must be an integer");
            }
            match x.as_const() {
                Some(v) if !dom.contains(v) => return self.err(K::Type, ix.span, format!("index {v} outside {dom}")),
                Some(v) => place.offset += (v - dom.lo) as u32 * stride,
                None => place.index.push(IndexTerm {
                    expr: x,
                    dom: *dom,
                    stride,
                }),
            }
        }
        Ok(place)
    }

    // ---- statements ------------------------------------------------------

    /// An expression in statement position: assignment, call or plain evaluation.
    pub fn effect(&mut self, e: &Expr) -> TResult<Vec<St>> {
        match &e.kind {
            ExprKind::Assign(op, l, r) => {
                let lt = self.compile(l)?;
                let TV::Place(place, writable) = lt.v else {
                    return self.err(K::Type, l.span, "left side of assignment is not a variable");
                };
                if !writable {
                    return self.err(K::Type, l.span, "assignment to a read-only name");
                }
                if !lt.ty.is_scalar() {
                    if *op != AssignOp::Set {
                        return self.err(K::Type, e.span, "compound assignment on an aggregate");
                    }
                    let rt = self.compile(r)?;
                    let TV::Place(src, _) = rt.v else {
                        return self.err(K::Type, r.span, "aggregate assignment needs a variable");
                    };
                    if !lt.ty.same_shape(&rt.ty) {
                        return self.err(K::Type, e.span, format!("cannot assign {} to {}", rt.ty, lt.ty));
                    }
                    return Ok(vec![St::Copy {
                        dst: place,
                        src,
                        size: lt.ty.size(),
                    }]);
                }
                let (rv, rt) = self.value(r)?;
                let dom = lt.ty.domain().unwrap();
                let value = match op {
                    AssignOp::Set => {
                        if !compatible(&lt.ty, &rt) {
                            return self.err(K::Type, e.span, format!("cannot assign {} to {}", show(&rt), show(&lt.ty)));
                        }
                        rv
                    }
                    _ => {
                        if !is_int(&lt.ty) || !is_int(&rt) {
                            return self.err(K::Type, e.span, "compound assignment needs integers");
                        }
                        let bop = match op {
                            AssignOp::Add => BinOp::Add,
                            AssignOp::Sub => BinOp::Sub,
                            AssignOp::Mul => BinOp::Mul,
                            AssignOp::Div => BinOp::Div,
                            _ => BinOp::Mod,
                        };
                        Ex::bin(bop, Ex::load(place.clone()), rv)
                    }
                };
                if let Some(v) = value.as_const() {
                    if !dom.contains(v) {
                        return self.err(K::Type, r.span, format!("value {v} outside {dom}"));
                    }
                }
                Ok(vec![St::Assign { place, value, dom }])
            }
            ExprKind::IncDec(k, x) => {
                let t = self.compile(x)?;
                let TV::Place(place, writable) = t.v else {
                    return self.err(K::Type, x.span, "increment of a non-variable");
                };
                if !writable || !is_int(&t.ty) {
                    return self.err(K::Type, x.span, "increment needs a writable integer variable");
                }
                let op = match k {
                    IncDec::PreInc | IncDec::PostInc => BinOp::Add,
                    IncDec::PreDec | IncDec::PostDec => BinOp::Sub,
                };
                Ok(vec![St::Assign {
                    value: Ex::bin(op, Ex::load(place.clone()), Ex::Const(1)),
                    dom: t.ty.domain().unwrap(),
                    place,
                }])
            }
            ExprKind::Call(f, args) => {
                let (ex, _) = self.call(f, args, e.span)?;
                Ok(vec![St::Eval(ex)])
            }
            _ => {
                let (x, _) = self.value(e)?;
                Ok(vec![St::Eval(x)])
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> TResult<Vec<St>> {
        self.layers.push(HashMap::new());
        let mut out = Vec::new();
        let mut r = Ok(());
        for s in stmts {
            match self.stmt(s) {
                Ok(v) => out.extend(v),
                Err(e) => {
                    r = Err(e);
                    break;
                }
            }
        }
        self.layers.pop();
        r.map(|_| out)
    }

    fn stmt(&mut self, s: &Stmt) -> TResult<Vec<St>> {
        match s {
            Stmt::Var(v) => {
                let t = self.ty_of(&v.ty)?;
                let t = self.with_dims(t, &v.dims)?;
                let slot = self.alloc(t.size());
                let st = match &v.init {
                    None => St::Init {
                        slot,
                        values: t.defaults(),
                    },
                    Some(Init::Expr(e)) if t.is_scalar() => {
                        let (x, xt) = self.value(e)?;
                        if !compatible(&t, &xt) {
                            return self.err(K::Type, e.span, format!("cannot initialise {} with {}", show(&t), show(&xt)));
                        }
                        let dom = t.domain().unwrap();
                        if let Some(c) = x.as_const() {
                            if !dom.contains(c) {
                                return self.err(K::Type, e.span, format!("value {c} outside {dom}"));
                            }
                        }
                        St::Assign {
                            place: Place::frame(slot),
                            value: x,
                            dom,
                        }
                    }
                    Some(init) => St::Init {
                        slot,
                        values: self.const_init(&t, init)?,
                    },
                };
                self.bind(
                    &v.name,
                    Sym::Var {
                        place: Place::frame(slot),
                        ty: t,
                        writable: true,
                    },
                )?;
                Ok(vec![st])
            }
            Stmt::Expr(e) => self.effect(e),
            Stmt::If { cond, then, els, .. } => {
                let c = self.boolean(cond)?;
                let a = self.block(std::slice::from_ref(then))?;
                let b = match els {
                    Some(e) => self.block(std::slice::from_ref(e))?,
                    None => vec![],
                };
                Ok(vec![St::If(c, a, b)])
            }
            Stmt::For { var, ty, body, .. } => {
                let t = self.ty_of(ty)?;
                let Some(dom) = t.domain() else {
                    return self.err(K::Type, ty.span(), "loop ranges over a scalar type");
                };
                let slot = self.alloc(1);
                self.layers.push(HashMap::new());
                self.bind(
                    var,
                    Sym::Var {
                        place: Place::frame(slot),
                        ty: t,
                        writable: false,
                    },
                )?;
                self.breakable += 1;
                let b = self.block(std::slice::from_ref(body));
                self.breakable -= 1;
                self.layers.pop();
                Ok(vec![St::For { slot, dom, body: b? }])
            }
            Stmt::Switch { scrut, cases, span } => {
                let (x, xt) = self.value(scrut)?;
                let mut labels: Vec<(i32, usize)> = Vec::new();
                let mut default = None;
                let mut body = Vec::new();
                self.breakable += 1;
                self.layers.push(HashMap::new());
                let r: TResult<()> = (|| {
                    for c in cases {
                        match &c.label {
                            Some(l) => {
                                let (lx, lt) = self.value(l)?;
                                if !compatible(&lt, &xt) {
                                    return self.err(K::Type, l.span, format!("case label of type {}", show(&lt)));
                                }
                                let Some(v) = lx.as_const() else {
                                    return self.err(K::Type, l.span, "case label is not constant");
                                };
                                if labels.iter().any(|(w, _)| *w == v) {
                                    return self.err(K::Duplicate, l.span, format!("duplicate case {v}"));
                                }
                                labels.push((v, body.len()));
                            }
                            None => {
                                if default.is_some() {
                                    return self.err(K::Duplicate, c.span, "duplicate default");
                                }
                                default = Some(body.len());
                            }
                        }
                        for s in &c.body {
                            body.extend(self.stmt(s)?);
                        }
                    }
                    Ok(())
                })();
                self.layers.pop();
                self.breakable -= 1;
                r?;
                let _ = span;
                Ok(vec![St::Switch {
                    scrut: x,
                    cases: labels,
                    default,
                    body,
                }])
            }
            Stmt::Break(span) => {
                if self.breakable == 0 {
                    return self.err(K::Type, *span, "break outside a loop or switch");
                }
                Ok(vec![St::Break])
            }
            Stmt::Return(e, span) => {
                let Some(ret) = self.ret.clone() else {
                    return self.err(K::Type, *span, "return outside a function");
                };
                match (ret, e) {
                    (None, None) => Ok(vec![St::Return(None)]),
                    (None, Some(e)) => self.err(K::Type, e.span, "void function returns a value"),
                    (Some(_), None) => self.err(K::Type, *span, "missing return value"),
                    (Some(t), Some(e)) => {
                        let (x, xt) = self.value(e)?;
                        if !compatible(&t, &xt) {
                            return self.err(K::Type, e.span, format!("returns {}, expected {}", show(&xt), show(&t)));
                        }
                        if let Some(v) = x.as_const() {
                            let dom = t.domain().unwrap();
                            if !dom.contains(v) {
                                return self.err(K::Type, e.span, format!("value {v} outside {dom}"));
                            }
                        }
                        Ok(vec![St::Return(Some(x))])
                    }
                }
            }
            Stmt::Block(b) => self.block(&b.stmts),
            Stmt::Empty(_) => Ok(vec![]),
        }
    }
}

enum ProcRef {
    Static(u32),
    Dynamic {
        first: u32,
        index: Ex,
        dom: Domain,
        template: String,
    },
}

// ---- declarations --------------------------------------------------------

struct Elab<'d> {
    text: &'d str,
    env: Env,
    vars: Vec<VarDecl>,
    slots: Vec<SlotInfo>,
    functions: Vec<Function>,
    channels: Vec<ChannelDecl>,
    channel_count: u32,
    agents: Vec<AgentGraph>,
    processes: HashMap<String, &'d ProcessDecl>,
}

impl<'d> Elab<'d> {
    fn new(text: &'d str) -> Self {
        Elab {
            text,
            env: Env::default(),
            vars: vec![],
            slots: vec![],
            functions: vec![],
            channels: vec![],
            channel_count: 0,
            agents: vec![],
            processes: HashMap::new(),
        }
    }

    fn err<T>(&self, kind: K, span: Span, msg: impl Into<String>) -> TResult<T> {
        Err(TypeError::new(kind, self.text, span, msg.into()))
    }

    fn alloc_var(&mut self, name: String, ty: Ty, scope: VarScope, initial: Vec<i32>) -> (u32, u32) {
        let id = self.vars.len() as u32;
        let base = self.slots.len() as u32;
        let mut leaves = Vec::new();
        ty.leaves(&name, &mut |_, path, t| leaves.push((path, t.domain().unwrap(), SlotKind::of(t))));
        for (path, domain, kind) in leaves {
            self.slots.push(SlotInfo {
                name: path,
                domain,
                var: id,
                kind,
            });
        }
        self.vars.push(VarDecl {
            name,
            ty,
            scope,
            base,
            initial,
        });
        (id, base)
    }

    /// Declarations shared by the top level and process bodies. Returns the
    /// new bindings; `prefix` qualifies variable names of an instance.
    fn simple_decl(
        &mut self,
        layers: &mut Vec<HashMap<String, Sym>>,
        d: &Decl,
        scope: VarScope,
        prefix: &str,
    ) -> TResult<Option<u32>> {
        let env = std::mem::take(&mut self.env);
        let mut cx = Cx::new(&env, self.text);
        cx.layers = std::mem::take(layers);
        cx.pure = true;
        let r = self.simple_decl_in(&mut cx, d, scope, prefix);
        *layers = std::mem::take(&mut cx.layers);
        drop(cx);
        self.env = env;
        r
    }

    fn simple_decl_in(&mut self, cx: &mut Cx, d: &Decl, scope: VarScope, prefix: &str) -> TResult<Option<u32>> {
        match d {
            Decl::Const { ty, name, value, .. } => {
                let t = cx.ty_of(ty)?;
                if !t.is_scalar() {
                    return cx.err(K::Type, ty.span(), "constants must be scalar");
                }
                let v = cx.const_init(&t, &Init::Expr(value.clone()))?[0];
                cx.bind(name, Sym::Const(v, t))?;
                Ok(None)
            }
            Decl::Typedef { ty, name, dims, .. } => {
                let t = match ty {
                    TypeExpr::Enum { variants, .. } => {
                        let t = Ty::Enum {
                            name: name.name.clone(),
                            variants: variants.iter().map(|v| v.name.clone()).collect(),
                        };
                        for (i, v) in variants.iter().enumerate() {
                            cx.bind(v, Sym::Const(i as i32, t.clone()))?;
                        }
                        t
                    }
                    TypeExpr::Struct { .. } => match cx.ty_of(ty)? {
                        Ty::Record { fields, .. } => Ty::Record {
                            name: Some(name.name.clone()),
                            fields,
                        },
                        _ => unreachable!(),
                    },
                    other => cx.ty_of(other)?,
                };
                let t = cx.with_dims(t, dims)?;
                cx.bind(name, Sym::Type(t))?;
                Ok(None)
            }
            Decl::Var(v) => {
                let t = cx.ty_of(&v.ty)?;
                let t = cx.with_dims(t, &v.dims)?;
                let init = match &v.init {
                    Some(i) => cx.const_init(&t, i)?,
                    None => t.defaults(),
                };
                let full = if prefix.is_empty() {
                    v.name.name.clone()
                } else {
                    format!("{prefix}.{}", v.name.name)
                };
                let (id, base) = self.alloc_var(full, t.clone(), scope, init);
                cx.bind(
                    &v.name,
                    Sym::Var {
                        place: Place::global(base),
                        ty: t,
                        writable: true,
                    },
                )?;
                Ok(Some(id))
            }
            Decl::Chan { name, dims, span } => {
                if !prefix.is_empty() {
                    return cx.err(K::Type, *span, "channels must be declared at the top level");
                }
                let mut doms = Vec::new();
                let mut count: u64 = 1;
                for d in dims {
                    let dom = cx.dim_domain(d)?;
                    count *= dom.size();
                    doms.push(dom);
                }
                let base = self.channel_count;
                self.channel_count += count as u32;
                self.channels.push(ChannelDecl {
                    name: name.name.clone(),
                    dims: doms.clone(),
                    base,
                });
                cx.bind(name, Sym::Chan { base, dims: doms })?;
                Ok(None)
            }
            Decl::Partition { whole, parts, span } => {
                let dom_of = |cx: &Cx, id: &Ident| -> TResult<Domain> {
                    match cx.lookup(&id.name) {
                        Some(Sym::Type(Ty::Int(d))) => Ok(*d),
                        Some(_) => cx.err(K::Type, id.span, format!("'{}' is not an integer range type", id.name)),
                        None => cx.err(K::UnknownName, id.span, format!("unknown type '{}'", id.name)),
                    }
                };
                let w = dom_of(cx, whole)?;
                let mut ds = Vec::new();
                for p in parts {
                    ds.push((dom_of(cx, p)?, &p.name));
                }
                ds.sort_by_key(|(d, _)| d.lo);
                let mut expect = w.lo;
                for (d, n) in &ds {
                    if d.lo < expect {
                        return cx.err(K::Type, *span, format!("'{n}' overlaps another part of '{}'", whole.name));
                    }
                    if d.lo > expect {
                        return cx.err(K::Type, *span, format!("parts of '{}' leave {expect} uncovered", whole.name));
                    }
                    expect = d.hi + 1;
                }
                if expect != w.hi + 1 {
                    return cx.err(K::Type, *span, format!("parts of '{}' do not cover {w}", whole.name));
                }
                Ok(None)
            }
            Decl::Function(f) => {
                let qual = if prefix.is_empty() {
                    f.name.name.clone()
                } else {
                    format!("{prefix}.{}", f.name.name)
                };
                let id = self.functions.len() as u32;
                let (func, sig) = compile_function(cx, f, id, qual, &self.functions)?;
                self.functions.push(func);
                cx.bind(&f.name, Sym::Func(Arc::new(sig)))?;
                Ok(None)
            }
            Decl::Process(p) => cx.err(K::Type, p.span, "nested process"),
            Decl::System { span, .. } => cx.err(K::Type, *span, "system line inside a process"),
        }
    }

    fn globals(&mut self, doc: &'d ModelDocument) -> TResult<Vec<&'d SystemEntry>> {
        let mut system: Option<&Vec<SystemEntry>> = None;
        let mut layers = vec![HashMap::new()];
        for d in &doc.decls {
            match d {
                Decl::Process(p) => {
                    let env = std::mem::take(&mut self.env);
                    let mut cx = Cx::new(&env, self.text);
                    cx.layers = std::mem::take(&mut layers);
                    let r = (|| {
                        let mut params = Vec::new();
                        for prm in &p.params {
                            if prm.by_ref {
                                return cx.err(K::Type, prm.span, "process parameters are passed by value");
                            }
                            let t = cx.ty_of(&prm.ty)?;
                            let t = cx.with_dims(t, &prm.dims)?;
                            if t.domain().is_none() {
                                return cx.err(K::Type, prm.span, "process parameters must be scalar");
                            }
                            params.push((prm.name.name.clone(), t));
                        }
                        cx.bind(&p.name, Sym::Template(p.name.name.clone()))?;
                        Ok(params)
                    })();
                    layers = std::mem::take(&mut cx.layers);
                    drop(cx);
                    self.env = env;
                    let params = r?;
                    self.env.templates.insert(
                        p.name.name.clone(),
                        TemplateInfo {
                            name: p.name.name.clone(),
                            params,
                            agents: vec![],
                            locations: p.states.iter().map(|s| s.name.clone()).collect(),
                        },
                    );
                    self.processes.insert(p.name.name.clone(), p);
                }
                Decl::System { entries, span } => {
                    if system.is_some() {
                        return self.err(K::Duplicate, *span, "more than one system line");
                    }
                    system = Some(entries);
                }
                other => {
                    self.simple_decl(&mut layers, other, VarScope::Shared, "")?;
                }
            }
            // Publish top-level bindings so later declarations and processes see them.
            for (k, v) in layers[0].drain() {
                self.env.globals.insert(k, v);
            }
        }
        Ok(system.map(|s| s.iter().collect()).unwrap_or_default())
    }

    /// Expand the system line into (template, actuals) pairs.
    fn expand_system(&mut self, entries: &[&SystemEntry]) -> TResult<Vec<(String, Vec<i32>)>> {
        let mut out = Vec::new();
        for e in entries {
            let Some(tpl) = self.env.templates.get(&e.name.name).cloned() else {
                return self.err(K::UnknownName, e.name.span, format!("unknown process '{}'", e.name.name));
            };
            match &e.args {
                None => {
                    let doms: Vec<Domain> = tpl.params.iter().map(|(_, t)| t.domain().unwrap()).collect();
                    if doms.iter().map(|d| d.size()).product::<u64>() > 4096 {
                        return self.err(K::Type, e.name.span, "too many instances");
                    }
                    let mut cur: Vec<i32> = doms.iter().map(|d| d.lo).collect();
                    loop {
                        out.push((tpl.name.clone(), cur.clone()));
                        let mut k = doms.len();
                        loop {
                            if k == 0 {
                                break;
                            }
                            k -= 1;
                            if cur[k] < doms[k].hi {
                                cur[k] += 1;
                                break;
                            }
                            cur[k] = doms[k].lo;
                            if k == 0 {
                                k = usize::MAX;
                                break;
                            }
                        }
                        if doms.is_empty() || k == usize::MAX {
                            break;
                        }
                    }
                }
                Some(args) => {
                    let env = std::mem::take(&mut self.env);
                    let mut cx = Cx::new(&env, self.text);
                    let r = (|| {
                        let mut vals = Vec::new();
                        for a in args {
                            let (x, _) = cx.value(a)?;
                            match x.as_const() {
                                Some(v) => vals.push((v, a.span)),
                                None => return cx.err(K::Type, a.span, "process argument is not constant"),
                            }
                        }
                        Ok(vals)
                    })();
                    drop(cx);
                    self.env = env;
                    let vals = r?;
                    let actuals = check_actuals(self.text, &tpl, &vals, e.name.span)?;
                    out.push((tpl.name.clone(), actuals));
                }
            }
        }
        Ok(out)
    }

    /// First pass over an instance: parameters, local declarations, locations.
    fn declare_instance(&mut self, template: &str, actuals: &[i32]) -> TResult<()> {
        let p = self.processes[template];
        let tpl = self.env.templates[template].clone();
        let agent = self.agents.len() as u32;
        let name = if actuals.is_empty() {
            template.to_string()
        } else {
            format!(
                "{template}({})",
                actuals.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
            )
        };
        let mut layer = HashMap::new();
        for ((pn, pt), v) in tpl.params.iter().zip(actuals) {
            layer.insert(pn.clone(), Sym::Const(*v, pt.clone()));
        }
        let mut layers = vec![layer];
        let start = self.slots.len() as u32;
        let mut locals = Vec::new();
        for d in &p.decls {
            if matches!(d, Decl::Function(_)) {
                continue;
            }
            if let Some(id) = self.simple_decl(&mut layers, d, VarScope::Local(agent), &name)? {
                locals.push(id);
            }
        }
        let mut locations = Vec::new();
        for s in &p.states {
            locations.push(Location {
                name: s.name.clone(),
                committed: false,
            });
        }
        for c in &p.committed {
            match p.states.iter().position(|s| s.name == c.name) {
                Some(i) => locations[i].committed = true,
                None => return self.err(K::UnknownName, c.span, format!("unknown location '{}'", c.name)),
            }
        }
        let Some(initial) = p.states.iter().position(|s| s.name == p.init.name) else {
            return self.err(K::UnknownName, p.init.span, format!("unknown location '{}'", p.init.name));
        };
        for s in &p.states {
            if layers[0].contains_key(&s.name) {
                return self.err(K::Duplicate, s.span, format!("location '{}' clashes with a local name", s.name));
            }
        }
        self.env.instances.push(InstanceInfo {
            template: template.to_string(),
            actuals: actuals.to_vec(),
            block: (start, self.slots.len() as u32 - start),
            scope: layers.pop().unwrap(),
        });
        self.env.templates.get_mut(template).unwrap().agents.push(agent);
        self.agents.push(AgentGraph {
            name,
            template: template.to_string(),
            params: tpl.params.iter().map(|(n, _)| n.clone()).zip(actuals.iter().copied()).collect(),
            locations,
            initial: initial as u32,
            initial_condition: None,
            init_frame: 0,
            edges: vec![],
            outgoing: vec![],
            locals,
        });
        Ok(())
    }

    /// Second pass: local functions, initial condition and edges.
    fn define_instance(&mut self, agent: u32) -> TResult<()> {
        let template = self.agents[agent as usize].template.clone();
        let p = self.processes[template.as_str()];
        let name = self.agents[agent as usize].name.clone();
        let mut layers = vec![std::mem::take(&mut self.env.instances[agent as usize].scope)];
        for d in &p.decls {
            if matches!(d, Decl::Function(_)) {
                self.simple_decl(&mut layers, d, VarScope::Local(agent), &name)?;
            }
        }
        let scope = layers.pop().unwrap();
        self.env.instances[agent as usize].scope = scope.clone();

        let text = self.text;
        let env = &self.env;
        let mut cx = Cx::new(env, text);
        cx.layers = vec![scope.clone()];
        cx.pure = true;
        let initial_condition = match &p.initially {
            Some(e) => Some(cx.boolean(e)?),
            None => None,
        };
        let init_frame = cx.max;
        let mut edges = Vec::new();
        for t in &p.transitions {
            let mut cx = Cx::new(env, text);
            cx.layers = vec![scope.clone(), HashMap::new()];
            let loc = |id: &Ident| -> TResult<u32> {
                p.states
                    .iter()
                    .position(|s| s.name == id.name)
                    .map(|i| i as u32)
                    .ok_or_else(|| TypeError::new(K::UnknownName, text, id.span, format!("unknown location '{}'", id.name)))
            };
            let source = loc(&t.from)?;
            let target = loc(&t.to)?;
            let mut selects = Vec::new();
            for s in &t.selects {
                let ty = cx.ty_of(&s.ty)?;
                let Some(dom) = ty.domain() else {
                    return cx.err(K::Type, s.ty.span(), "select ranges over a scalar type");
                };
                let slot = cx.alloc(1);
                cx.bind(
                    &s.var,
                    Sym::Var {
                        place: Place::frame(slot),
                        ty,
                        writable: false,
                    },
                )?;
                selects.push((s.var.name.clone(), dom));
            }
            cx.pure = true;
            let guard = match &t.guard {
                Some(g) => Some(cx.boolean(g)?).filter(|g| g.as_const() != Some(1)),
                None => None,
            };
            let sync = match &t.sync {
                Some(s) => Some(SyncSpec {
                    dir: match s.kind {
                        SyncKind::Send => SyncDir::Send,
                        SyncKind::Receive => SyncDir::Receive,
                    },
                    channel: cx.channel(&s.chan)?,
                }),
                None => None,
            };
            cx.pure = false;
            let mut update = Vec::new();
            for a in &t.assign {
                update.extend(cx.effect(a)?);
            }
            let slice = |s: Span| text[s.start..s.end].to_string();
            let etext = EdgeText {
                select: t
                    .selects
                    .iter()
                    .map(|s| format!("{} : {}", s.var.name, slice(s.ty.span())))
                    .collect::<Vec<_>>()
                    .join(", "),
                guard: t.guard.as_ref().map(|g| slice(g.span)).unwrap_or_default(),
                sync: t
                    .sync
                    .as_ref()
                    .map(|s| {
                        format!(
                            "{}{}",
                            slice(s.chan.span),
                            if s.kind == SyncKind::Send { "!" } else { "?" }
                        )
                    })
                    .unwrap_or_default(),
                update: t.assign.iter().map(|a| slice(a.span)).collect::<Vec<_>>().join(", "),
            };
            edges.push(Edge {
                source,
                target,
                selects,
                guard,
                sync,
                update,
                frame_size: cx.max,
                text: etext,
            });
        }
        let a = &mut self.agents[agent as usize];
        a.initial_condition = initial_condition;
        a.init_frame = init_frame;
        a.edges = edges;
        a.rebuild_outgoing();
        Ok(())
    }

    fn finish(self) -> Model {
        Model {
            graph: MasGraph {
                vars: self.vars,
                slots: self.slots,
                functions: self.functions,
                channels: self.channels,
                channel_count: self.channel_count,
                agents: self.agents,
                hidden: None,
            },
            env: Arc::new(self.env),
        }
    }
}

fn check_actuals(text: &str, tpl: &TemplateInfo, vals: &[(i32, Span)], span: Span) -> TResult<Vec<i32>> {
    if vals.len() < tpl.params.len() {
        return Err(TypeError::new(
            K::UnboundParameter,
            text,
            span,
            format!("parameter '{}' of '{}' is unbound", tpl.params[vals.len()].0, tpl.name),
        ));
    }
    if vals.len() > tpl.params.len() {
        return Err(TypeError::new(
            K::Type,
            text,
            span,
            format!("'{}' takes {} parameters", tpl.name, tpl.params.len()),
        ));
    }
    for ((v, s), (pn, pt)) in vals.iter().zip(&tpl.params) {
        let dom = pt.domain().unwrap();
        if !dom.contains(*v) {
            return Err(TypeError::new(
                K::OutOfDomain,
                text,
                *s,
                format!("actual {v} for '{pn}' outside {dom}"),
            ));
        }
    }
    Ok(vals.iter().map(|(v, _)| *v).collect())
}

fn compile_function(
    cx: &mut Cx,
    f: &FunctionDecl,
    id: u32,
    qual: String,
    earlier: &[Function],
) -> TResult<(Function, FnSig)> {
    let ret = match &f.ret {
        None => None,
        Some(t) => {
            let ty = cx.ty_of(t)?;
            if !ty.is_scalar() {
                return cx.err(K::Type, t.span(), "functions return scalars");
            }
            Some(ty)
        }
    };
    let mut sig = FnSig {
        id,
        name: qual.clone(),
        params: vec![],
        ret: ret.clone(),
        pure: true,
    };
    let mut inner = Cx::new(cx.env, cx.text);
    inner.layers = cx.layers.clone();
    inner.layers.push(HashMap::new());
    let mut params = Vec::new();
    let mut binds = Vec::new();
    for p in &f.params {
        let t = inner.ty_of(&p.ty)?;
        let t = inner.with_dims(t, &p.dims)?;
        let (kind, sym) = if p.by_ref {
            let off = inner.alloc(1);
            (
                (ParamKind::Ref, off),
                Sym::Var {
                    place: Place {
                        base: Base::Ref(off),
                        offset: 0,
                        index: vec![],
                    },
                    ty: t.clone(),
                    writable: !p.is_const,
                },
            )
        } else if t.is_scalar() {
            let off = inner.alloc(1);
            (
                (ParamKind::Value(t.domain().unwrap()), off),
                Sym::Var {
                    place: Place::frame(off),
                    ty: t.clone(),
                    writable: !p.is_const,
                },
            )
        } else {
            let off = inner.alloc(t.size());
            (
                (ParamKind::Copy(t.size()), off),
                Sym::Var {
                    place: Place::frame(off),
                    ty: t.clone(),
                    writable: !p.is_const,
                },
            )
        };
        params.push(kind);
        binds.push((p.name.clone(), sym));
        sig.params.push(ParamSig {
            ty: t,
            by_ref: p.by_ref,
            is_const: p.is_const,
        });
    }
    inner.layers.last_mut().unwrap().insert(f.name.name.clone(), Sym::Func(Arc::new(sig.clone())));
    inner.layers.push(HashMap::new());
    for (n, s) in binds {
        inner.bind(&n, s)?;
    }
    inner.ret = Some(ret.clone());
    let body = inner.block(&f.body.stmts)?;
    let writes = body.iter().any(St::writes_nonlocal);
    let callees_pure = inner
        .called
        .iter()
        .all(|c| *c == id || earlier.get(*c as usize).is_some_and(|g| g.pure));
    sig.pure = !writes && callees_pure;
    let func = Function {
        name: qual,
        params,
        frame_size: inner.max,
        ret: ret.as_ref().map(|t| t.domain().unwrap()),
        body,
        pure: sig.pure,
    };
    Ok((func, sig))
}

pub(crate) fn elaborate(doc: &ModelDocument, text: &str) -> TResult<Model> {
    let mut el = Elab::new(text);
    let entries = el.globals(doc)?;
    let insts = el.expand_system(&entries)?;
    build(el, insts)
}

fn build(mut el: Elab, insts: Vec<(String, Vec<i32>)>) -> TResult<Model> {
    for (t, a) in &insts {
        el.declare_instance(t, a)?;
    }
    for agent in 0..el.agents.len() as u32 {
        el.define_instance(agent)?;
    }
    Ok(el.finish())
}

pub(crate) fn instantiate_one(doc: &ModelDocument, text: &str, template: &str, actuals: &[i32]) -> TResult<Instance> {
    let mut el = Elab::new(text);
    let entries = el.globals(doc)?;
    let mut insts = el.expand_system(&entries)?;
    let Some(tpl) = el.env.templates.get(template).cloned() else {
        return Err(TypeError::new(
            K::UnknownName,
            text,
            Span::default(),
            format!("unknown process '{template}'"),
        ));
    };
    let vals: Vec<(i32, Span)> = actuals.iter().map(|v| (*v, Span::default())).collect();
    let actuals = check_actuals(text, &tpl, &vals, Span::default())?;
    insts.retain(|(t, a)| !(t == template && *a == actuals));
    insts.push((template.to_string(), actuals));
    let model = build(el, insts)?;
    let mut g = model.graph;
    let agent = g.agents.pop().unwrap();
    let locals = agent.locals.iter().map(|v| g.vars[*v as usize].clone()).collect();
    Ok(Instance { agent, locals })
}

pub(crate) fn compile_query(env: &Env, q: &NamedQuery, text: &str) -> TResult<CompiledQuery> {
    let pred = |e: &Expr| -> TResult<Pred> {
        let mut cx = Cx::new(env, text);
        cx.pure = true;
        let ex = cx.boolean(e)?;
        Ok(Pred {
            ex,
            frame: cx.max,
            text: print_expr(e),
        })
    };
    let formula = match &q.formula {
        FormulaAst::Path(k, e) => {
            let p = pred(e)?;
            match k {
                PathQuant::AlwaysGlobally => Formula::Invariant(p),
                PathQuant::ExistsFinally => Formula::Reach(p),
                PathQuant::AlwaysFinally => Formula::Liveness(p),
                PathQuant::ExistsGlobally => Formula::ExistsGlobally(p),
            }
        }
        FormulaAst::LeadsTo(a, b) => Formula::LeadsTo(pred(a)?, pred(b)?),
    };
    Ok(CompiledQuery {
        name: q.name.as_ref().map(|n| n.name.clone()),
        text: super::print_query(q),
        formula,
    })
}

/// Resolve `e` to a variable with constant indices in the global scope.
pub(crate) fn resolve_place(env: &Env, text: &str, e: &Expr) -> TResult<(u32, Ty)> {
    let mut cx = Cx::new(env, text);
    cx.pure = true;
    let t = cx.compile(e)?;
    match t.v {
        TV::Place(p, _) if p.base == Base::Global && p.index.is_empty() => Ok((p.offset, t.ty)),
        _ => cx.err(K::Type, e.span, "expected a variable with constant indices"),
    }
}

/// Compile the defining expression of a merge variable. With `this`, the
/// name `self` denotes the record at that offset.
pub(crate) fn compile_merge(
    env: &Env,
    text: &str,
    ty: &TypeExpr,
    def: &Expr,
    this: Option<(u32, &Ty)>,
) -> TResult<(Ty, Ex, u32)> {
    let mut cx = Cx::new(env, text);
    cx.pure = true;
    let t = cx.ty_of(ty)?;
    if !t.is_scalar() {
        return cx.err(K::Type, ty.span(), "merge variables must be scalar");
    }
    if let Some((off, rty)) = this {
        cx.layers[0].insert(
            "self".into(),
            Sym::Var {
                place: Place::global(off),
                ty: rty.clone(),
                writable: false,
            },
        );
    }
    let (ex, et) = cx.value(def)?;
    if !compatible(&t, &et) {
        return cx.err(K::Type, def.span, format!("merge of type {} defined by {}", show(&t), show(&et)));
    }
    Ok((t, ex, cx.max))
}

/// Resolve `P(args).loc` with constant arguments to (agent, location).
pub(crate) fn resolve_location(env: &Env, text: &str, e: &Expr) -> TResult<(u32, u32)> {
    let mut cx = Cx::new(env, text);
    cx.pure = true;
    match cx.compile(e)?.v {
        TV::Val(Ex::AtLocation {
            first,
            index: None,
            loc,
        }) => Ok((first, loc)),
        _ => cx.err(K::Type, e.span, "expected a location of a process instance"),
    }
}
