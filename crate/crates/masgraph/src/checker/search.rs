//! Search algorithms.

use super::store::Store;
use super::*;
use rayon::prelude::*;
use std::time::Instant;

type Succ = Vec<(TransitionLabel, GlobalState)>;

struct Search<'a> {
    m: &'a MasGraph,
    opts: &'a Options,
    store: Store,
    parent: Vec<u32>,
    explored: usize,
    peak: usize,
    start: Instant,
}

impl<'a> Search<'a> {
    fn new(m: &'a MasGraph, opts: &'a Options) -> Self {
        Search {
            m,
            opts,
            store: Store::new(m),
            parent: Vec::new(),
            explored: 1,
            peak: 0,
            start: Instant::now(),
        }
    }

    /// Current memory estimate given `extra` bytes of transient data.
    fn over_budget(&mut self, extra: usize) -> bool {
        let est = self.store.len() * (self.store.bytes_per_state() + 4) + extra;
        self.peak = self.peak.max(est);
        est > self.opts.mem_budget
    }

    fn insert(&mut self, s: &GlobalState, parent: u32) -> (u32, bool) {
        let (i, fresh) = self.store.insert(s);
        if fresh {
            self.parent.push(parent);
        }
        (i, fresh)
    }

    fn stats(&self) -> Stats {
        Stats {
            states_stored: self.store.len(),
            states_explored: self.explored,
            time_s: self.start.elapsed().as_secs_f64(),
            mem_bytes: self.peak.max(self.store.bytes()),
        }
    }

    fn verdict(&self, status: Status, trace: Option<Trace>) -> Verdict {
        Verdict {
            status,
            trace,
            stats: self.stats(),
        }
    }

    fn successors(&self, s: &GlobalState) -> Result<Succ, CheckError> {
        Ok(self.m.successors(s)?)
    }

    /// Trace from the initial state to stored state `i` along BFS parents.
    fn path_to(&self, i: u32) -> Result<Trace, CheckError> {
        let mut chain = vec![i];
        let mut cur = i;
        while self.parent[cur as usize] != cur {
            cur = self.parent[cur as usize];
            chain.push(cur);
        }
        chain.reverse();
        let initial = self.store.get(chain[0]);
        let mut steps = Vec::new();
        let mut prev = initial.clone();
        for &j in &chain[1..] {
            let target = self.store.get(j);
            let label = self
                .successors(&prev)?
                .into_iter()
                .find(|(_, n)| *n == target)
                .map(|(t, _)| t)
                .expect("parent link without a transition");
            steps.push((label, target.clone()));
            prev = target;
        }
        Ok(Trace {
            initial,
            steps,
            loop_start: None,
        })
    }

    /// Breadth-first search for a reachable state satisfying `goal`.
    /// Levels are expanded (possibly in parallel) and inserted in order.
    fn bfs(&mut self, goal: &Pred) -> Result<Result<Option<u32>, ()>, CheckError> {
        let s0 = self.m.initial_state()?;
        let (i0, _) = self.insert(&s0, 0);
        if goal.holds(self.m, &s0)? {
            return Ok(Ok(Some(i0)));
        }
        let pool = if self.opts.threads > 1 {
            rayon::ThreadPoolBuilder::new().num_threads(self.opts.threads).build().ok()
        } else {
            None
        };
        let mut frontier = vec![i0];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            let chunk = if pool.is_some() { 256 * self.opts.threads } else { 1 };
            for part in frontier.chunks(chunk) {
                let states: Vec<GlobalState> = part.iter().map(|&i| self.store.get(i)).collect();
                let m = self.m;
                let expanded: Vec<Result<Vec<(GlobalState, bool)>, CheckError>> = match &pool {
                    Some(p) => p.install(|| states.par_iter().map(|s| expand(m, s, goal)).collect()),
                    None => states.iter().map(|s| expand(m, s, goal)).collect(),
                };
                for (&from, succ) in part.iter().zip(expanded) {
                    for (n, hit) in succ? {
                        self.explored += 1;
                        let (j, fresh) = self.insert(&n, from);
                        if fresh {
                            if hit {
                                return Ok(Ok(Some(j)));
                            }
                            next.push(j);
                        }
                    }
                    let transient = (next.len() + frontier.len()) * (self.store.packer.stride + 4);
                    if self.over_budget(transient) {
                        return Ok(Err(()));
                    }
                }
            }
            frontier = next;
        }
        Ok(Ok(None))
    }

    /// Depth-first search for an infinite path inside `p` from the initial
    /// state. Returns the lasso as a trace.
    fn lasso(&mut self, p: &Pred) -> Result<Result<Option<Trace>, ()>, CheckError> {
        let s0 = self.m.initial_state()?;
        if !p.holds(self.m, &s0)? {
            self.insert(&s0, 0);
            return Ok(Ok(None));
        }
        let (i0, _) = self.insert(&s0, 0);
        struct Frame {
            idx: u32,
            succ: Vec<(TransitionLabel, u32)>,
            pos: usize,
        }
        let mut on_stack = vec![true];
        let mut stack = vec![Frame {
            idx: i0,
            succ: self.p_successors(&s0, i0, p, &mut on_stack)?,
            pos: 0,
        }];
        while let Some(top) = stack.last_mut() {
            if top.pos < top.succ.len() {
                let (_, j) = top.succ[top.pos];
                top.pos += 1;
                if on_stack[j as usize] {
                    return Ok(Ok(Some(self.lasso_trace(&stack.iter().map(|f| (f.idx, &f.succ[f.pos - 1].0)).collect::<Vec<_>>(), j))));
                }
                if self.store_expanded(j) {
                    continue;
                }
                let s = self.store.get(j);
                on_stack[j as usize] = true;
                let succ = self.p_successors(&s, j, p, &mut on_stack)?;
                stack.push(Frame { idx: j, succ, pos: 0 });
                let transient = stack.len() * 64;
                if self.over_budget(transient) {
                    return Ok(Err(()));
                }
            } else {
                on_stack[top.idx as usize] = false;
                stack.pop();
            }
        }
        Ok(Ok(None))
    }

    /// Successors satisfying `p`, stored; marks nothing as expanded.
    fn p_successors(
        &mut self,
        s: &GlobalState,
        from: u32,
        p: &Pred,
        on_stack: &mut Vec<bool>,
    ) -> Result<Vec<(TransitionLabel, u32)>, CheckError> {
        self.mark_expanded(from);
        let mut out = Vec::new();
        for (t, n) in self.successors(s)? {
            self.explored += 1;
            if !p.holds(self.m, &n)? {
                continue;
            }
            let (j, fresh) = self.insert(&n, from);
            if fresh {
                on_stack.push(false);
            }
            out.push((t, j));
        }
        Ok(out)
    }

    // The parent vector doubles as the expanded marker in the DFS: a state
    // is expanded once its parent entry has the high bit set.
    fn mark_expanded(&mut self, i: u32) {
        self.parent[i as usize] |= 1 << 31;
    }

    fn store_expanded(&self, i: u32) -> bool {
        self.parent[i as usize] & (1 << 31) != 0
    }

    fn lasso_trace(&self, stack: &[(u32, &TransitionLabel)], back: u32) -> Trace {
        let initial = self.store.get(stack[0].0);
        let mut steps = Vec::new();
        for k in 0..stack.len() {
            let target = if k + 1 < stack.len() { stack[k + 1].0 } else { back };
            steps.push((stack[k].1.clone(), self.store.get(target)));
        }
        let loop_start = stack.iter().position(|(i, _)| *i == back);
        Trace {
            initial,
            steps,
            loop_start,
        }
    }
}

fn expand(m: &MasGraph, s: &GlobalState, goal: &Pred) -> Result<Vec<(GlobalState, bool)>, CheckError> {
    let mut out = Vec::new();
    for (_, n) in m.successors(s)? {
        let hit = goal.holds(m, &n)?;
        out.push((n, hit));
    }
    Ok(out)
}

/// `A[] p`: every reachable state satisfies `p`.
pub fn check_invariant(m: &MasGraph, p: &Pred, opts: &Options) -> Result<Verdict, CheckError> {
    let mut s = Search::new(m, opts);
    let neg = p.negate();
    Ok(match s.bfs(&neg)? {
        Err(()) => s.verdict(Status::MemOut, None),
        Ok(None) => s.verdict(Status::Satisfied, None),
        Ok(Some(i)) => {
            let t = s.path_to(i)?;
            s.verdict(Status::Violated, Some(t))
        }
    })
}

/// `E<> p`: some reachable state satisfies `p`.
pub fn check_reach(m: &MasGraph, p: &Pred, opts: &Options) -> Result<Verdict, CheckError> {
    let mut s = Search::new(m, opts);
    Ok(match s.bfs(p)? {
        Err(()) => s.verdict(Status::MemOut, None),
        Ok(None) => s.verdict(Status::Violated, None),
        Ok(Some(i)) => {
            let t = s.path_to(i)?;
            s.verdict(Status::Satisfied, Some(t))
        }
    })
}

/// `E[] p` in the requested mode.
pub fn check_exists_globally(m: &MasGraph, p: &Pred, mode: EgMode, opts: &Options) -> Result<Verdict, CheckError> {
    let mut s = Search::new(m, opts);
    if mode == EgMode::FiniteRun {
        let s0 = m.initial_state()?;
        s.insert(&s0, 0);
        let ok = p.holds(m, &s0)?;
        let trace = ok.then(|| Trace {
            initial: s0,
            steps: vec![],
            loop_start: None,
        });
        let status = if ok { Status::Satisfied } else { Status::Violated };
        return Ok(s.verdict(status, trace));
    }
    Ok(match s.lasso(p)? {
        Err(()) => s.verdict(Status::MemOut, None),
        Ok(None) => s.verdict(Status::Violated, None),
        Ok(Some(t)) => s.verdict(Status::Satisfied, Some(t)),
    })
}

/// `A<> p`, i.e. no infinite path avoids `p`.
pub fn check_liveness(m: &MasGraph, p: &Pred, opts: &Options) -> Result<Verdict, CheckError> {
    let mut s = Search::new(m, opts);
    let neg = p.negate();
    Ok(match s.lasso(&neg)? {
        Err(()) => s.verdict(Status::MemOut, None),
        Ok(None) => s.verdict(Status::Satisfied, None),
        Ok(Some(t)) => s.verdict(Status::Violated, Some(t)),
    })
}

/// `p --> q`: every reachable `p` state is followed by `q` on all paths.
pub fn check_leads_to(m: &MasGraph, p: &Pred, q: &Pred, opts: &Options) -> Result<Verdict, CheckError> {
    let mut s = Search::new(m, opts);
    let s0 = m.initial_state()?;
    s.insert(&s0, 0);
    let mut succ: Vec<Vec<u32>> = Vec::new();
    let mut i = 0;
    while (i as usize) < s.store.len() {
        let st = s.store.get(i);
        let mut out = Vec::new();
        for (_, n) in s.successors(&st)? {
            s.explored += 1;
            out.push(s.insert(&n, i).0);
        }
        succ.push(out);
        let edges: usize = succ.iter().map(|v| v.capacity() * 4 + 24).sum();
        if s.over_budget(edges) {
            return Ok(s.verdict(Status::MemOut, None));
        }
        i += 1;
    }
    let n = s.store.len();
    let mut not_q = vec![false; n];
    let mut pl = vec![false; n];
    for k in 0..n {
        let st = s.store.get(k as u32);
        not_q[k] = !q.holds(m, &st)?;
        pl[k] = p.holds(m, &st)?;
    }
    // Greatest fixpoint of EG !q by successor counting.
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (k, out) in succ.iter().enumerate() {
        for &j in out {
            preds[j as usize].push(k as u32);
        }
    }
    let mut eg = not_q.clone();
    let mut count: Vec<usize> = (0..n)
        .map(|k| succ[k].iter().filter(|&&j| not_q[j as usize]).count())
        .collect();
    let mut work: Vec<usize> = (0..n).filter(|&k| eg[k] && count[k] == 0).collect();
    for &k in &work {
        eg[k] = false;
    }
    while let Some(k) = work.pop() {
        for &pr in &preds[k] {
            let pr = pr as usize;
            if eg[pr] {
                count[pr] -= 1;
                if count[pr] == 0 {
                    eg[pr] = false;
                    work.push(pr);
                }
            }
        }
    }
    let Some(bad) = (0..n).find(|&k| pl[k] && eg[k]) else {
        return Ok(s.verdict(Status::Satisfied, None));
    };
    let mut trace = s.path_to(bad as u32)?;
    let mut seen = vec![usize::MAX; n];
    let mut cur = bad;
    let base = trace.steps.len();
    seen[cur] = base;
    loop {
        let next = *succ[cur].iter().find(|&&j| eg[j as usize]).expect("EG state without EG successor") as usize;
        let from = s.store.get(cur as u32);
        let target = s.store.get(next as u32);
        let label = m
            .successors(&from)?
            .into_iter()
            .find(|(_, x)| *x == target)
            .map(|(t, _)| t)
            .unwrap();
        trace.steps.push((label, target));
        if seen[next] != usize::MAX {
            trace.loop_start = Some(seen[next]);
            break;
        }
        seen[next] = trace.steps.len();
        cur = next;
    }
    Ok(s.verdict(Status::Violated, Some(trace)))
}

pub fn check(m: &MasGraph, f: &Formula, opts: &Options) -> Result<Verdict, CheckError> {
    match f {
        Formula::Invariant(p) => check_invariant(m, p, opts),
        Formula::Reach(p) => check_reach(m, p, opts),
        Formula::ExistsGlobally(p) => check_exists_globally(m, p, opts.eg_mode, opts),
        Formula::Liveness(p) => check_liveness(m, p, opts),
        Formula::LeadsTo(p, q) => check_leads_to(m, p, q, opts),
    }
}
