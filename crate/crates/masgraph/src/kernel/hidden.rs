//! Hidden-slot semantics for abstract models.
//!
//! An abstract model keeps the concrete slot layout. Removed slots are
//! canonicalized to their default and every read of one forks the
//! evaluation over the values consistent with the merge variables of the
//! pre-state. Merge variables are appended after the concrete slots and are
//! recomputed whenever a transition writes one of their constituents.
//!
//! Under the `Under` direction every feasible concretization contributes a
//! transition (existential reading, more behaviours). Under `Over` a
//! transition exists only when all feasible concretizations enable it and
//! agree on its outcome (universal reading, fewer behaviours).

use super::eval::{Addr, Fault, Machine, Memory, ReadOnly};
use super::graph::*;
use super::ir::{Ex, Function};
use super::semantics::for_each_binding;
use super::types::Domain;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// May-abstraction: every concrete behaviour is kept; universal
    /// properties that hold here hold concretely.
    Under,
    /// Must-abstraction: only behaviours present for every concretization;
    /// universal properties that fail here fail concretely.
    Over,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    Hidden,
    /// Hidden while the scope's agent is in one of the scope locations.
    Scoped(u32),
}

#[derive(Clone, Debug)]
pub struct ScopeDecl {
    pub agent: u32,
    pub locs: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct MergeDef {
    pub name: String,
    pub slot: u32,
    pub dom: Domain,
    pub def: Ex,
    pub frame_size: u32,
    /// Concrete slots the definition may read.
    pub constituents: Vec<u32>,
}

#[derive(Clone, Debug)]
struct Group {
    slots: Vec<u32>,
    merges: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct HiddenLayer {
    pub direction: Direction,
    pub concrete_slots: u32,
    pub visibility: Vec<Visibility>,
    pub scopes: Vec<ScopeDecl>,
    pub merges: Vec<MergeDef>,
    merges_of_slot: Vec<Vec<u32>>,
    group_of_slot: Vec<u32>,
    groups: Vec<Group>,
    maybe_hidden: Vec<u32>,
}

const NO_GROUP: u32 = u32::MAX;

impl HiddenLayer {
    pub fn new(
        direction: Direction,
        concrete_slots: u32,
        visibility: Vec<Visibility>,
        scopes: Vec<ScopeDecl>,
        merges: Vec<MergeDef>,
    ) -> HiddenLayer {
        let n = concrete_slots as usize;
        let mut merges_of_slot = vec![Vec::new(); n];
        for (mi, m) in merges.iter().enumerate() {
            for &c in &m.constituents {
                merges_of_slot[c as usize].push(mi as u32);
            }
        }
        // Union merges sharing a hidden constituent.
        let mut parent: Vec<usize> = (0..merges.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        for (slot, ms) in merges_of_slot.iter().enumerate() {
            if visibility[slot] == Visibility::Visible {
                continue;
            }
            for w in ms.windows(2) {
                let a = find(&mut parent, w[0] as usize);
                let b = find(&mut parent, w[1] as usize);
                parent[a] = b;
            }
        }
        let mut group_index: FxHashMap<usize, u32> = FxHashMap::default();
        let mut groups: Vec<Group> = Vec::new();
        let mut group_of_merge = vec![0u32; merges.len()];
        for mi in 0..merges.len() {
            let r = find(&mut parent, mi);
            let g = *group_index.entry(r).or_insert_with(|| {
                groups.push(Group {
                    slots: vec![],
                    merges: vec![],
                });
                groups.len() as u32 - 1
            });
            groups[g as usize].merges.push(mi as u32);
            group_of_merge[mi] = g;
        }
        let mut group_of_slot = vec![NO_GROUP; n];
        for (slot, ms) in merges_of_slot.iter().enumerate() {
            if visibility[slot] != Visibility::Visible {
                if let Some(&m) = ms.first() {
                    let g = group_of_merge[m as usize];
                    group_of_slot[slot] = g;
                    groups[g as usize].slots.push(slot as u32);
                }
            }
        }
        let maybe_hidden = (0..n as u32)
            .filter(|s| visibility[*s as usize] != Visibility::Visible)
            .collect();
        HiddenLayer {
            direction,
            concrete_slots,
            visibility,
            scopes,
            merges,
            merges_of_slot,
            group_of_slot,
            groups,
            maybe_hidden,
        }
    }

    /// Per concrete slot: hidden in a state with these locations.
    pub fn hidden_flags(&self, locs: &[u32]) -> Vec<bool> {
        let mut out = vec![false; self.concrete_slots as usize];
        for &s in &self.maybe_hidden {
            out[s as usize] = match self.visibility[s as usize] {
                Visibility::Visible => false,
                Visibility::Hidden => true,
                Visibility::Scoped(k) => {
                    let sc = &self.scopes[k as usize];
                    sc.locs[locs[sc.agent as usize] as usize]
                }
            };
        }
        out
    }

    /// Slots hidden in every state.
    pub fn always_hidden(&self, slot: u32) -> bool {
        self.visibility
            .get(slot as usize)
            .is_some_and(|v| *v == Visibility::Hidden)
    }

    /// Abstraction map: erase hidden slots and compute the merges of a
    /// concrete state (given in the concrete layout).
    pub fn project(&self, g: &MasGraph, s: &GlobalState) -> Result<GlobalState, KernelError> {
        let n = self.concrete_slots as usize;
        let mut vals = s.vals[..n].to_vec();
        vals.resize(n + self.merges.len(), 0);
        {
            let mut m = Machine::new(&g.functions, ReadOnly::new(&s.vals[..n], &s.locs));
            for (k, md) in self.merges.iter().enumerate() {
                m.mem.stack.clear();
                let fp = m.push_frame(md.frame_size);
                let v = m
                    .eval(&md.def, fp)
                    .map_err(|f| g.fault_error(f, &format!("merge {}", md.name), None))?;
                if !md.dom.contains(v) {
                    return Err(merge_range(md, v));
                }
                vals[n + k] = v;
            }
        }
        let hidden = self.hidden_flags(&s.locs);
        for &h in &self.maybe_hidden {
            if hidden[h as usize] {
                vals[h as usize] = g.slots[h as usize].domain.default_value();
            }
        }
        Ok(GlobalState {
            locs: s.locs.clone(),
            vals,
        })
    }

    pub fn successors(
        &self,
        g: &MasGraph,
        s: &GlobalState,
    ) -> Result<Vec<(TransitionLabel, GlobalState)>, KernelError> {
        let mut cx = Ctx {
            g,
            layer: self,
            pre: s,
            hidden: self.hidden_flags(&s.locs),
            feasible: FxHashMap::default(),
            overlay: vec![None; self.concrete_slots as usize],
            written: Vec::new(),
        };
        let mut out: Vec<(TransitionLabel, GlobalState)> = Vec::new();
        struct SyncCand {
            choice: EdgeChoice,
            dir: SyncDir,
            chans: Vec<u32>,
        }
        let mut syncs: Vec<SyncCand> = Vec::new();
        for (ai, a) in g.agents.iter().enumerate() {
            for &ei in &a.outgoing[s.locs[ai] as usize] {
                let e = &a.edges[ei as usize];
                for_each_binding(&e.selects, |b| {
                    let choice = EdgeChoice {
                        agent: ai as u32,
                        edge: ei,
                        bindings: b.to_vec(),
                    };
                    match &e.sync {
                        None => {
                            let leaves = cx.explore(&[&choice], false);
                            cx.emit(&leaves, &mut out, |chan, variant| {
                                debug_assert!(chan.is_none());
                                TransitionLabel::Internal {
                                    choice: choice.clone(),
                                    variant,
                                }
                            })?;
                        }
                        Some(sy) => {
                            let leaves = cx.explore(&[&choice], true);
                            let mut chans: Vec<u32> = leaves
                                .iter()
                                .filter_map(|l| match l {
                                    Ok(Some((Some(c), _))) => Some(*c),
                                    _ => None,
                                })
                                .collect();
                            chans.sort_unstable();
                            chans.dedup();
                            if !chans.is_empty() {
                                syncs.push(SyncCand {
                                    choice,
                                    dir: sy.dir,
                                    chans,
                                });
                            }
                        }
                    }
                    Ok(())
                })?;
            }
        }
        for sc in syncs.iter().filter(|c| c.dir == SyncDir::Send) {
            for rc in syncs.iter().filter(|c| c.dir == SyncDir::Receive) {
                if rc.choice.agent == sc.choice.agent || !rc.chans.iter().any(|c| sc.chans.contains(c)) {
                    continue;
                }
                let leaves = cx.explore(&[&sc.choice, &rc.choice], false);
                cx.emit(&leaves, &mut out, |chan, variant| TransitionLabel::Handshake {
                    sender: sc.choice.clone(),
                    receiver: rc.choice.clone(),
                    channel: chan.expect("handshake channel"),
                    variant,
                })?;
            }
        }
        // Emission order above is agent-major for internal edges but puts
        // handshakes last; restore the concrete ordering.
        out.sort_by(|a, b| a.0.cmp(&b.0));
        let committed = g.committed_agents(s);
        if committed.iter().any(|c| *c) {
            out.retain(|(t, _)| t.edges().iter().any(|c| committed[c.agent as usize]));
        }
        if out.is_empty() {
            out.push((TransitionLabel::SerialLoop, s.clone()));
        }
        Ok(out)
    }
}

fn merge_range(md: &MergeDef, v: i32) -> KernelError {
    KernelError::RangeFault {
        target: md.name.clone(),
        value: v,
        domain: md.dom,
        context: format!("merge {}", md.name),
        label: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Val(i32),
    Alias(u32),
}

type Outcome = (Option<u32>, GlobalState);
type Leaf = Result<Option<Outcome>, Fault>;

struct Ctx<'a> {
    g: &'a MasGraph,
    layer: &'a HiddenLayer,
    pre: &'a GlobalState,
    hidden: Vec<bool>,
    feasible: FxHashMap<(u32, Vec<(u32, i32)>), bool>,
    overlay: Vec<Option<Cell>>,
    written: Vec<u32>,
}

struct Lazy<'c, 'a> {
    pre: &'a GlobalState,
    hidden: &'c [bool],
    fixed: &'c [(u32, i32)],
    overlay: &'c mut Vec<Option<Cell>>,
    written: &'c mut Vec<u32>,
    stack: Vec<Cell>,
}

impl Lazy<'_, '_> {
    fn pre_value(&self, p: u32) -> Result<i32, Fault> {
        if !self.hidden[p as usize] {
            return Ok(self.pre.vals[p as usize]);
        }
        self.fixed
            .iter()
            .find(|(s, _)| *s == p)
            .map(|(_, v)| *v)
            .ok_or(Fault::Need(p))
    }

    fn resolve(&self, c: Cell) -> Result<i32, Fault> {
        match c {
            Cell::Val(v) => Ok(v),
            Cell::Alias(p) => self.pre_value(p),
        }
    }

    fn peek(&self, a: Addr) -> Result<Cell, Fault> {
        match a {
            Addr::Stack(s) => Ok(self.stack[s as usize]),
            Addr::Global(g) => {
                if let Some(c) = self.overlay[g as usize] {
                    return Ok(c);
                }
                match self.pre_value(g) {
                    Ok(v) => Ok(Cell::Val(v)),
                    Err(Fault::Need(p)) => Ok(Cell::Alias(p)),
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn put(&mut self, a: Addr, c: Cell) {
        match a {
            Addr::Stack(s) => self.stack[s as usize] = c,
            Addr::Global(g) => {
                if self.overlay[g as usize].is_none() {
                    self.written.push(g);
                }
                self.overlay[g as usize] = Some(c);
            }
        }
    }
}

impl Memory for Lazy<'_, '_> {
    fn load(&mut self, a: Addr) -> Result<i32, Fault> {
        let c = self.peek(a)?;
        self.resolve(c)
    }
    fn store(&mut self, a: Addr, v: i32) -> Result<(), Fault> {
        self.put(a, Cell::Val(v));
        Ok(())
    }
    fn copy(&mut self, dst: Addr, src: Addr) -> Result<(), Fault> {
        let c = self.peek(src)?;
        self.put(dst, c);
        Ok(())
    }
    fn stack_len(&self) -> u32 {
        self.stack.len() as u32
    }
    fn stack_resize(&mut self, n: u32) {
        self.stack.resize(n as usize, Cell::Val(0))
    }
    fn location(&self, agent: u32) -> u32 {
        self.pre.locs[agent as usize]
    }
}

impl Ctx<'_> {
    /// Run the edges of one transition under every feasible concretization.
    /// With `guard_only`, stop after the guard and channel of a single edge.
    fn explore(&mut self, edges: &[&EdgeChoice], guard_only: bool) -> Vec<Leaf> {
        let mut work: Vec<Vec<(u32, i32)>> = vec![Vec::new()];
        let mut leaves = Vec::new();
        while let Some(fixed) = work.pop() {
            let r = self.attempt(edges, guard_only, &fixed);
            match r {
                Err(Fault::Need(p)) => {
                    let dom = self.g.slots[p as usize].domain;
                    for v in dom.values().rev() {
                        let mut f2 = fixed.clone();
                        f2.push((p, v));
                        if self.is_feasible(&f2, p) {
                            work.push(f2);
                        }
                    }
                }
                other => leaves.push(other),
            }
        }
        leaves
    }

    fn attempt(&mut self, edges: &[&EdgeChoice], guard_only: bool, fixed: &[(u32, i32)]) -> Leaf {
        for w in self.written.drain(..) {
            self.overlay[w as usize] = None;
        }
        let g = self.g;
        let layer = self.layer;
        let pre = self.pre;
        let mem = Lazy {
            pre,
            hidden: &self.hidden,
            fixed,
            overlay: &mut self.overlay,
            written: &mut self.written,
            stack: Vec::new(),
        };
        let mut m = Machine::new(&g.functions, mem);
        // Guards and channels of every participant on the pre-state.
        let mut chan: Option<u32> = None;
        for c in edges {
            let e = &g.agents[c.agent as usize].edges[c.edge as usize];
            m.mem.stack.clear();
            let fp = m.push_frame(e.frame_size);
            for (i, b) in c.bindings.iter().enumerate() {
                m.mem.stack[i] = Cell::Val(*b);
            }
            if let Some(gd) = &e.guard {
                if !m.eval_bool(gd, fp)? {
                    return Ok(None);
                }
            }
            if let Some(sy) = &e.sync {
                let Addr::Global(ch) = m.addr(&sy.channel, fp)? else {
                    unreachable!("channel on stack")
                };
                match chan {
                    Some(prev) if prev != ch => return Ok(None),
                    _ => chan = Some(ch),
                }
            }
        }
        if guard_only {
            return Ok(Some((chan, pre.clone())));
        }
        for c in edges {
            let e = &g.agents[c.agent as usize].edges[c.edge as usize];
            m.mem.stack.clear();
            let fp = m.push_frame(e.frame_size);
            for (i, b) in c.bindings.iter().enumerate() {
                m.mem.stack[i] = Cell::Val(*b);
            }
            m.run(&e.update, fp)?;
        }
        let mut locs = pre.locs.clone();
        for c in edges {
            locs[c.agent as usize] = g.agents[c.agent as usize].edges[c.edge as usize].target;
        }
        let post_hidden = layer.hidden_flags(&locs);
        let mut vals = pre.vals.clone();
        let written: Vec<u32> = m.mem.written.clone();
        for &w in &written {
            if !post_hidden[w as usize] {
                let cell = m.mem.overlay[w as usize].expect("written slot");
                vals[w as usize] = m.mem.resolve(cell)?;
            }
        }
        for &h in &layer.maybe_hidden {
            if post_hidden[h as usize] {
                vals[h as usize] = g.slots[h as usize].domain.default_value();
            }
        }
        let mut affected: Vec<u32> = written
            .iter()
            .flat_map(|w| layer.merges_of_slot[*w as usize].iter().copied())
            .collect();
        affected.sort_unstable();
        affected.dedup();
        for mi in affected {
            let md = &layer.merges[mi as usize];
            m.mem.stack.clear();
            let fp = m.push_frame(md.frame_size);
            let v = m.eval(&md.def, fp)?;
            if !md.dom.contains(v) {
                return Err(Fault::Range {
                    addr: Addr::Global(md.slot),
                    value: v,
                    dom: md.dom,
                });
            }
            vals[md.slot as usize] = v;
        }
        Ok(Some((chan, GlobalState { locs, vals })))
    }

    /// Whether the assignment restricted to `slot`'s merge group extends to a
    /// valuation of the whole group that reproduces the pre-state merges.
    fn is_feasible(&mut self, fixed: &[(u32, i32)], slot: u32) -> bool {
        let gi = self.layer.group_of_slot[slot as usize];
        if gi == NO_GROUP {
            return true;
        }
        let group = &self.layer.groups[gi as usize];
        let mut key: Vec<(u32, i32)> = fixed
            .iter()
            .copied()
            .filter(|(s, _)| self.layer.group_of_slot[*s as usize] == gi)
            .collect();
        key.sort_unstable();
        if let Some(r) = self.feasible.get(&(gi, key.clone())) {
            return *r;
        }
        let free: Vec<(String, Domain)> = group
            .slots
            .iter()
            .filter(|s| self.hidden[**s as usize] && !key.iter().any(|(k, _)| k == *s))
            .map(|s| (String::new(), self.g.slots[*s as usize].domain))
            .collect();
        let free_slots: Vec<u32> = group
            .slots
            .iter()
            .copied()
            .filter(|s| self.hidden[*s as usize] && !key.iter().any(|(k, _)| k == s))
            .collect();
        let mut vals = self.pre.vals.clone();
        for (s, v) in &key {
            vals[*s as usize] = *v;
        }
        let g = self.g;
        let layer = self.layer;
        let pre = self.pre;
        let mut found = false;
        let _ = for_each_binding(&free, |b| {
            if found {
                return Ok(());
            }
            for (s, v) in free_slots.iter().zip(b) {
                vals[*s as usize] = *v;
            }
            let mut m = Machine::new(&g.functions, ReadOnly::new(&vals, &pre.locs));
            let ok = group.merges.iter().all(|mi| {
                let md = &layer.merges[*mi as usize];
                m.mem.stack.clear();
                let fp = m.push_frame(md.frame_size);
                matches!(m.eval(&md.def, fp), Ok(v) if v == pre.vals[md.slot as usize])
            });
            found = ok;
            Ok(())
        });
        self.feasible.insert((gi, key), found);
        found
    }

    /// Turn the leaves of one transition candidate into labelled successors.
    fn emit(
        &self,
        leaves: &[Leaf],
        out: &mut Vec<(TransitionLabel, GlobalState)>,
        label: impl Fn(Option<u32>, u32) -> TransitionLabel,
    ) -> Result<(), KernelError> {
        match self.layer.direction {
            Direction::Under => {
                let mut posts: Vec<&Outcome> = Vec::new();
                for l in leaves {
                    match l {
                        Ok(Some(o)) => posts.push(o),
                        Err(Fault::Range {
                            addr: Addr::Global(s),
                            value,
                            ..
                        }) if *s >= self.layer.concrete_slots => {
                            return Err(merge_range(
                                &self.layer.merges[(*s - self.layer.concrete_slots) as usize],
                                *value,
                            ))
                        }
                        _ => {}
                    }
                }
                posts.sort();
                posts.dedup();
                for (i, (chan, post)) in posts.into_iter().enumerate() {
                    out.push((label(*chan, i as u32), post.clone()));
                }
            }
            Direction::Over => {
                let mut first: Option<&Outcome> = None;
                for l in leaves {
                    match l {
                        Ok(Some(o)) => match first {
                            None => first = Some(o),
                            Some(f) if f == o => {}
                            Some(_) => return Ok(()),
                        },
                        _ => return Ok(()),
                    }
                }
                if let Some((chan, post)) = first {
                    out.push((label(*chan, 0), post.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Concrete slots possibly read by `e`, following calls. Dynamic indices
/// contribute every slot in their range; reference and aggregate arguments
/// contribute their whole block.
pub fn global_reads(e: &Ex, funcs: &[Function], out: &mut Vec<u32>) {
    let mut seen = vec![false; funcs.len()];
    reads_ex(e, funcs, &mut seen, out);
    out.sort_unstable();
    out.dedup();
}

fn place_slots(p: &super::ir::Place, size: u32, out: &mut Vec<u32>) {
    if p.base != super::ir::Base::Global {
        return;
    }
    let mut offs = vec![p.offset];
    for t in &p.index {
        let mut next = Vec::with_capacity(offs.len() * t.dom.size() as usize);
        for o in &offs {
            for k in 0..t.dom.size() as u32 {
                next.push(o + k * t.stride);
            }
        }
        offs = next;
    }
    for o in offs {
        out.extend(o..o + size);
    }
}

fn reads_ex(e: &Ex, funcs: &[Function], seen: &mut Vec<bool>, out: &mut Vec<u32>) {
    use super::ir::Arg;
    match e {
        Ex::Const(_) => {}
        Ex::Load(p) => {
            place_slots(p, 1, out);
            for t in &p.index {
                reads_ex(&t.expr, funcs, seen, out)
            }
        }
        Ex::Un(_, a) => reads_ex(a, funcs, seen, out),
        Ex::Bin(_, a, b) => {
            reads_ex(a, funcs, seen, out);
            reads_ex(b, funcs, seen, out)
        }
        Ex::Cond(a, b, c) => {
            reads_ex(a, funcs, seen, out);
            reads_ex(b, funcs, seen, out);
            reads_ex(c, funcs, seen, out)
        }
        Ex::Quant { body, .. } => reads_ex(body, funcs, seen, out),
        Ex::AtLocation { index, .. } => {
            if let Some((i, _)) = index {
                reads_ex(i, funcs, seen, out)
            }
        }
        Ex::Call { func, args } => {
            for a in args {
                match a {
                    Arg::Value(x, _) => reads_ex(x, funcs, seen, out),
                    Arg::Copy(p, n) | Arg::Ref(p, n) => {
                        place_slots(p, *n, out);
                        for t in &p.index {
                            reads_ex(&t.expr, funcs, seen, out)
                        }
                    }
                }
            }
            if !seen[*func as usize] {
                seen[*func as usize] = true;
                for s in &funcs[*func as usize].body {
                    reads_st(s, funcs, seen, out);
                }
            }
        }
    }
}

fn reads_st(s: &super::ir::St, funcs: &[Function], seen: &mut Vec<bool>, out: &mut Vec<u32>) {
    use super::ir::St;
    match s {
        St::Assign { place, value, .. } => {
            for t in &place.index {
                reads_ex(&t.expr, funcs, seen, out)
            }
            reads_ex(value, funcs, seen, out)
        }
        St::Copy { dst, src, size } => {
            place_slots(src, *size, out);
            for t in dst.index.iter().chain(&src.index) {
                reads_ex(&t.expr, funcs, seen, out)
            }
        }
        St::Eval(e) | St::Return(Some(e)) => reads_ex(e, funcs, seen, out),
        St::If(c, a, b) => {
            reads_ex(c, funcs, seen, out);
            for s in a.iter().chain(b) {
                reads_st(s, funcs, seen, out)
            }
        }
        St::For { body, .. } => body.iter().for_each(|s| reads_st(s, funcs, seen, out)),
        St::Switch { scrut, body, .. } => {
            reads_ex(scrut, funcs, seen, out);
            body.iter().for_each(|s| reads_st(s, funcs, seen, out))
        }
        St::Break | St::Return(None) | St::Init { .. } => {}
    }
}
