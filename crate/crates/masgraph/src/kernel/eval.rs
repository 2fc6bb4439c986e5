//! Expression evaluation and statement execution against an abstract memory.

use super::ir::*;
use super::types::Domain;

/// Resolved address: global slot or absolute stack slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Addr {
    Global(u32),
    Stack(u32),
}

impl Addr {
    pub fn encode(self) -> i32 {
        match self {
            Addr::Global(a) => a as i32,
            Addr::Stack(a) => -(a as i32) - 1,
        }
    }

    pub fn decode(v: i32) -> Addr {
        if v >= 0 {
            Addr::Global(v as u32)
        } else {
            Addr::Stack((-(v + 1)) as u32)
        }
    }

    fn add(self, k: u32) -> Addr {
        match self {
            Addr::Global(a) => Addr::Global(a + k),
            Addr::Stack(a) => Addr::Stack(a + k),
        }
    }
}

/// Reasons an evaluation can stop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fault {
    DivisionByZero,
    IndexOutOfRange { value: i32, dom: Domain },
    Range { addr: Addr, value: i32, dom: Domain },
    MissingReturn(u32),
    StackOverflow,
    /// Write to the valuation while evaluating a side-effect-free context.
    ReadOnly,
    /// A lazily concretized memory needs the value of a hidden slot.
    Need(u32),
}

pub trait Memory {
    fn load(&mut self, a: Addr) -> Result<i32, Fault>;
    fn store(&mut self, a: Addr, v: i32) -> Result<(), Fault>;
    fn copy(&mut self, dst: Addr, src: Addr) -> Result<(), Fault> {
        let v = self.load(src)?;
        self.store(dst, v)
    }
    fn stack_len(&self) -> u32;
    /// Grow (zero-filled) or shrink the stack.
    fn stack_resize(&mut self, n: u32);
    fn location(&self, agent: u32) -> u32;
}

/// Plain memory over a concrete valuation.
pub struct Concrete<'a> {
    pub vals: &'a mut [i32],
    pub locs: &'a [u32],
    pub stack: Vec<i32>,
}

impl<'a> Concrete<'a> {
    pub fn new(vals: &'a mut [i32], locs: &'a [u32]) -> Self {
        Concrete {
            vals,
            locs,
            stack: Vec::new(),
        }
    }
}

impl Memory for Concrete<'_> {
    #[inline]
    fn load(&mut self, a: Addr) -> Result<i32, Fault> {
        Ok(match a {
            Addr::Global(g) => self.vals[g as usize],
            Addr::Stack(s) => self.stack[s as usize],
        })
    }
    #[inline]
    fn store(&mut self, a: Addr, v: i32) -> Result<(), Fault> {
        match a {
            Addr::Global(g) => self.vals[g as usize] = v,
            Addr::Stack(s) => self.stack[s as usize] = v,
        }
        Ok(())
    }
    fn stack_len(&self) -> u32 {
        self.stack.len() as u32
    }
    fn stack_resize(&mut self, n: u32) {
        self.stack.resize(n as usize, 0)
    }
    fn location(&self, agent: u32) -> u32 {
        self.locs[agent as usize]
    }
}

/// Memory for guards and predicates: the valuation is read-only.
pub struct ReadOnly<'a> {
    pub vals: &'a [i32],
    pub locs: &'a [u32],
    pub stack: Vec<i32>,
}

impl<'a> ReadOnly<'a> {
    pub fn new(vals: &'a [i32], locs: &'a [u32]) -> Self {
        ReadOnly {
            vals,
            locs,
            stack: Vec::new(),
        }
    }
}

impl Memory for ReadOnly<'_> {
    #[inline]
    fn load(&mut self, a: Addr) -> Result<i32, Fault> {
        Ok(match a {
            Addr::Global(g) => self.vals[g as usize],
            Addr::Stack(s) => self.stack[s as usize],
        })
    }
    #[inline]
    fn store(&mut self, a: Addr, v: i32) -> Result<(), Fault> {
        match a {
            Addr::Global(_) => return Err(Fault::ReadOnly),
            Addr::Stack(s) => self.stack[s as usize] = v,
        }
        Ok(())
    }
    fn stack_len(&self) -> u32 {
        self.stack.len() as u32
    }
    fn stack_resize(&mut self, n: u32) {
        self.stack.resize(n as usize, 0)
    }
    fn location(&self, agent: u32) -> u32 {
        self.locs[agent as usize]
    }
}

pub(crate) enum Flow {
    Normal,
    Break,
    Return(Option<i32>),
}

const MAX_DEPTH: u32 = 256;

pub struct Machine<'a, M: Memory> {
    pub funcs: &'a [Function],
    pub mem: M,
    depth: u32,
}

impl<'a, M: Memory> Machine<'a, M> {
    pub fn new(funcs: &'a [Function], mem: M) -> Self {
        Machine {
            funcs,
            mem,
            depth: 0,
        }
    }

    /// Allocate a frame of `size` slots and return its base.
    pub fn push_frame(&mut self, size: u32) -> u32 {
        let fp = self.mem.stack_len();
        self.mem.stack_resize(fp + size);
        fp
    }

    pub fn pop_frame(&mut self, fp: u32) {
        self.mem.stack_resize(fp)
    }

    pub fn addr(&mut self, p: &Place, fp: u32) -> Result<Addr, Fault> {
        let mut a = match p.base {
            Base::Global => Addr::Global(p.offset),
            Base::Frame => Addr::Stack(fp + p.offset),
            Base::Ref(k) => Addr::decode(self.mem.load(Addr::Stack(fp + k))?).add(p.offset),
        };
        for t in &p.index {
            let v = self.eval(&t.expr, fp)?;
            if !t.dom.contains(v) {
                return Err(Fault::IndexOutOfRange { value: v, dom: t.dom });
            }
            a = a.add((v - t.dom.lo) as u32 * t.stride);
        }
        Ok(a)
    }

    pub fn eval_bool(&mut self, e: &Ex, fp: u32) -> Result<bool, Fault> {
        Ok(self.eval(e, fp)? != 0)
    }

    pub fn eval(&mut self, e: &Ex, fp: u32) -> Result<i32, Fault> {
        match e {
            Ex::Const(v) => Ok(*v),
            Ex::Load(p) => {
                let a = self.addr(p, fp)?;
                self.mem.load(a)
            }
            Ex::Un(op, a) => {
                let v = self.eval(a, fp)?;
                Ok(match op {
                    UnOp::Neg => v.wrapping_neg(),
                    UnOp::Not => (v == 0) as i32,
                })
            }
            Ex::Bin(op, a, b) => {
                match op {
                    BinOp::And => {
                        return Ok((self.eval_bool(a, fp)? && self.eval_bool(b, fp)?) as i32)
                    }
                    BinOp::Or => {
                        return Ok((self.eval_bool(a, fp)? || self.eval_bool(b, fp)?) as i32)
                    }
                    BinOp::Imply => {
                        return Ok((!self.eval_bool(a, fp)? || self.eval_bool(b, fp)?) as i32)
                    }
                    _ => {}
                }
                let x = self.eval(a, fp)?;
                let y = self.eval(b, fp)?;
                apply_bin(*op, x, y)
            }
            Ex::Cond(c, a, b) => {
                if self.eval_bool(c, fp)? {
                    self.eval(a, fp)
                } else {
                    self.eval(b, fp)
                }
            }
            Ex::Quant {
                kind,
                slot,
                dom,
                body,
            } => {
                let at = Addr::Stack(fp + slot);
                let mut acc: i32 = match kind {
                    QuantKind::Forall => 1,
                    QuantKind::Exists | QuantKind::Sum => 0,
                };
                for v in dom.values() {
                    self.mem.store(at, v)?;
                    let r = self.eval(body, fp)?;
                    match kind {
                        QuantKind::Forall if r == 0 => return Ok(0),
                        QuantKind::Exists if r != 0 => return Ok(1),
                        QuantKind::Sum => acc = acc.wrapping_add(r),
                        _ => {}
                    }
                }
                Ok(acc)
            }
            Ex::Call { func, args } => self
                .call(*func, args, fp)?
                .ok_or(Fault::MissingReturn(*func)),
            Ex::AtLocation { first, index, loc } => {
                let agent = match index {
                    None => *first,
                    Some((ix, dom)) => {
                        let v = self.eval(ix, fp)?;
                        if !dom.contains(v) {
                            return Err(Fault::IndexOutOfRange { value: v, dom: *dom });
                        }
                        first + (v - dom.lo) as u32
                    }
                };
                Ok((self.mem.location(agent) == *loc) as i32)
            }
        }
    }

    pub fn call(&mut self, func: u32, args: &[Arg], fp: u32) -> Result<Option<i32>, Fault> {
        if self.depth >= MAX_DEPTH {
            return Err(Fault::StackOverflow);
        }
        let f = &self.funcs[func as usize];
        enum Prepared {
            Value(i32),
            Copy(Addr, u32),
            Ref(Addr),
        }
        let mut prepared = Vec::with_capacity(args.len());
        for a in args {
            prepared.push(match a {
                Arg::Value(e, dom) => {
                    let v = self.eval(e, fp)?;
                    if !dom.contains(v) {
                        return Err(Fault::Range {
                            addr: Addr::Stack(0),
                            value: v,
                            dom: *dom,
                        });
                    }
                    Prepared::Value(v)
                }
                Arg::Copy(p, n) => Prepared::Copy(self.addr(p, fp)?, *n),
                Arg::Ref(p, _) => Prepared::Ref(self.addr(p, fp)?),
            });
        }
        let nfp = self.push_frame(f.frame_size);
        for (p, (_, off)) in prepared.into_iter().zip(&f.params) {
            let dst = Addr::Stack(nfp + off);
            match p {
                Prepared::Value(v) => self.mem.store(dst, v)?,
                Prepared::Copy(src, n) => {
                    for i in 0..n {
                        self.mem.copy(dst.add(i), src.add(i))?
                    }
                }
                Prepared::Ref(a) => self.mem.store(dst, a.encode())?,
            }
        }
        self.depth += 1;
        let flow = self.exec(&f.body, nfp);
        self.depth -= 1;
        let flow = flow?;
        self.pop_frame(nfp);
        match flow {
            Flow::Return(Some(v)) => {
                if let Some(d) = f.ret {
                    if !d.contains(v) {
                        return Err(Fault::Range {
                            addr: Addr::Stack(nfp),
                            value: v,
                            dom: d,
                        });
                    }
                }
                Ok(Some(v))
            }
            _ => Ok(None),
        }
    }

    pub fn run(&mut self, body: &[St], fp: u32) -> Result<(), Fault> {
        self.exec(body, fp).map(|_| ())
    }

    pub(crate) fn exec(&mut self, body: &[St], fp: u32) -> Result<Flow, Fault> {
        for s in body {
            match self.exec_one(s, fp)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_one(&mut self, s: &St, fp: u32) -> Result<Flow, Fault> {
        match s {
            St::Assign { place, value, dom } => {
                let a = self.addr(place, fp)?;
                let v = self.eval(value, fp)?;
                if !dom.contains(v) {
                    return Err(Fault::Range {
                        addr: a,
                        value: v,
                        dom: *dom,
                    });
                }
                self.mem.store(a, v)?;
            }
            St::Copy { dst, src, size } => {
                let d = self.addr(dst, fp)?;
                let s = self.addr(src, fp)?;
                if d != s {
                    for i in 0..*size {
                        self.mem.copy(d.add(i), s.add(i))?;
                    }
                }
            }
            St::Eval(e) => match e {
                Ex::Call { func, args } => {
                    self.call(*func, args, fp)?;
                }
                _ => {
                    self.eval(e, fp)?;
                }
            },
            St::If(c, a, b) => {
                let branch = if self.eval_bool(c, fp)? { a } else { b };
                return self.exec(branch, fp);
            }
            St::For { slot, dom, body } => {
                for v in dom.values() {
                    self.mem.store(Addr::Stack(fp + slot), v)?;
                    match self.exec(body, fp)? {
                        Flow::Normal => {}
                        Flow::Break => break,
                        r @ Flow::Return(_) => return Ok(r),
                    }
                }
            }
            St::Switch {
                scrut,
                cases,
                default,
                body,
            } => {
                let v = self.eval(scrut, fp)?;
                let start = cases
                    .iter()
                    .find(|(c, _)| *c == v)
                    .map(|(_, i)| *i)
                    .or(*default);
                if let Some(start) = start {
                    match self.exec(&body[start..], fp)? {
                        Flow::Normal | Flow::Break => {}
                        r @ Flow::Return(_) => return Ok(r),
                    }
                }
            }
            St::Break => return Ok(Flow::Break),
            St::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(e, fp)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
            St::Init { slot, values } => {
                for (i, v) in values.iter().enumerate() {
                    self.mem.store(Addr::Stack(fp + slot + i as u32), *v)?;
                }
            }
        }
        Ok(Flow::Normal)
    }
}

pub fn apply_bin(op: BinOp, x: i32, y: i32) -> Result<i32, Fault> {
    Ok(match op {
        BinOp::Add => x.wrapping_add(y),
        BinOp::Sub => x.wrapping_sub(y),
        BinOp::Mul => x.wrapping_mul(y),
        BinOp::Div => {
            if y == 0 {
                return Err(Fault::DivisionByZero);
            }
            x.wrapping_div(y)
        }
        BinOp::Mod => {
            if y == 0 {
                return Err(Fault::DivisionByZero);
            }
            x.wrapping_rem(y)
        }
        BinOp::Lt => (x < y) as i32,
        BinOp::Le => (x <= y) as i32,
        BinOp::Gt => (x > y) as i32,
        BinOp::Ge => (x >= y) as i32,
        BinOp::Eq => (x == y) as i32,
        BinOp::Ne => (x != y) as i32,
        BinOp::And => (x != 0 && y != 0) as i32,
        BinOp::Or => (x != 0 || y != 0) as i32,
        BinOp::Imply => (x == 0 || y != 0) as i32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_truncates_toward_zero() {
        assert_eq!(apply_bin(BinOp::Div, -7, 2), Ok(-3));
        assert_eq!(apply_bin(BinOp::Mod, -7, 2), Ok(-1));
        assert_eq!(apply_bin(BinOp::Div, 7, -2), Ok(-3));
        assert_eq!(apply_bin(BinOp::Mod, 1, 0), Err(Fault::DivisionByZero));
    }

    #[test]
    fn address_encoding_round_trips() {
        for a in [Addr::Global(0), Addr::Global(17), Addr::Stack(0), Addr::Stack(5)] {
            assert_eq!(Addr::decode(a.encode()), a);
        }
    }

    #[test]
    fn switch_falls_through_until_break() {
        // switch (x) { case 1: y = y + 1; case 2: y = y + 10; break; default: y = 100; }
        let x = || Ex::load(Place::global(0));
        let y = Place::global(1);
        let incr = |k| St::Assign {
            place: y.clone(),
            value: Ex::bin(BinOp::Add, Ex::load(y.clone()), Ex::Const(k)),
            dom: Domain::INT,
        };
        let sw = St::Switch {
            scrut: x(),
            cases: vec![(1, 0), (2, 1)],
            default: Some(3),
            body: vec![
                incr(1),
                incr(10),
                St::Break,
                St::Assign {
                    place: y.clone(),
                    value: Ex::Const(100),
                    dom: Domain::INT,
                },
            ],
        };
        for (xv, expect) in [(1, 11), (2, 10), (3, 100)] {
            let mut vals = vec![xv, 0];
            let mut m = Machine::new(&[], Concrete::new(&mut vals, &[]));
            m.run(std::slice::from_ref(&sw), 0).unwrap();
            assert_eq!(vals[1], expect);
        }
    }
}
