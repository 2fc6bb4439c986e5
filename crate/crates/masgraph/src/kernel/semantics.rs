//! Concrete successor generation: select expansion, guard filtering,
//! channel pairing, committed priority and serial closure.

use super::eval::{Concrete, Fault, Machine, ReadOnly};
use super::graph::*;
use super::ir::Ex;
use super::types::Domain;

/// An enabled edge under one select binding.
#[derive(Clone, Debug)]
pub(crate) struct Candidate {
    pub agent: u32,
    pub edge: u32,
    pub bindings: Vec<i32>,
    pub sync: Option<(SyncDir, u32)>,
}

/// Odometer over select domains in lexicographic order.
pub(crate) fn for_each_binding(
    selects: &[(String, Domain)],
    mut f: impl FnMut(&[i32]) -> Result<(), KernelError>,
) -> Result<(), KernelError> {
    let mut cur: Vec<i32> = selects.iter().map(|(_, d)| d.lo).collect();
    if selects.iter().any(|(_, d)| d.size() == 0) {
        return Ok(());
    }
    loop {
        f(&cur)?;
        let mut k = selects.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            if cur[k] < selects[k].1.hi {
                cur[k] += 1;
                break;
            }
            cur[k] = selects[k].1.lo;
        }
    }
}

impl MasGraph {
    pub(crate) fn edge_context(&self, agent: u32, edge: u32) -> String {
        let a = &self.agents[agent as usize];
        let e = &a.edges[edge as usize];
        format!(
            "{}: {} -> {}",
            a.name, a.locations[e.source as usize].name, a.locations[e.target as usize].name
        )
    }

    /// Concrete valuation from declared initials and defaults.
    pub fn initial_values(&self) -> Vec<i32> {
        let mut vals = vec![0; self.concrete_slot_count()];
        for v in &self.vars {
            if (v.base as usize) < vals.len() {
                vals[v.base as usize..v.base as usize + v.initial.len()].copy_from_slice(&v.initial);
            }
        }
        vals
    }

    /// Slots of the underlying concrete layout (merge slots excluded).
    pub fn concrete_slot_count(&self) -> usize {
        match &self.hidden {
            Some(h) => h.concrete_slots as usize,
            None => self.slots.len(),
        }
    }

    pub fn initial_state(&self) -> Result<GlobalState, KernelError> {
        let locs: Vec<u32> = self.agents.iter().map(|a| a.initial).collect();
        let vals = self.initial_values();
        for a in &self.agents {
            if let Some(g0) = &a.initial_condition {
                let mut m = Machine::new(&self.functions, ReadOnly::new(&vals, &locs));
                let fp = m.push_frame(a.init_frame);
                let ok = m
                    .eval_bool(g0, fp)
                    .map_err(|f| self.fault_error(f, &format!("initial condition of {}", a.name), None))?;
                if !ok {
                    return Err(KernelError::InitialConditionViolated {
                        agent: a.name.clone(),
                    });
                }
            }
        }
        let s = GlobalState { locs, vals };
        match &self.hidden {
            Some(h) => h.project(self, &s),
            None => Ok(s),
        }
    }

    /// Evaluate a side-effect-free expression in a state.
    pub fn eval_predicate(&self, e: &Ex, frame: u32, s: &GlobalState) -> Result<bool, KernelError> {
        let mut m = Machine::new(&self.functions, ReadOnly::new(&s.vals, &s.locs));
        let fp = m.push_frame(frame);
        m.eval_bool(e, fp)
            .map_err(|f| self.fault_error(f, "predicate", None))
    }

    pub(crate) fn check_state(&self, s: &GlobalState) -> Result<(), KernelError> {
        if s.locs.len() != self.agents.len()
            || s.vals.len() != self.slots.len()
            || s
                .locs
                .iter()
                .zip(&self.agents)
                .any(|(l, a)| *l as usize >= a.locations.len())
        {
            return Err(KernelError::ForeignState);
        }
        Ok(())
    }

    /// Enabled edge/binding pairs with their resolved channel.
    pub(crate) fn candidates(&self, s: &GlobalState) -> Result<Vec<Candidate>, KernelError> {
        let mut out = Vec::new();
        let mut m = Machine::new(&self.functions, ReadOnly::new(&s.vals, &s.locs));
        for (ai, a) in self.agents.iter().enumerate() {
            for &ei in &a.outgoing[s.locs[ai] as usize] {
                let e = &a.edges[ei as usize];
                for_each_binding(&e.selects, |b| {
                    m.mem.stack.clear();
                    let fp = m.push_frame(e.frame_size);
                    m.mem.stack[..b.len()].copy_from_slice(b);
                    let res: Result<Option<Option<(SyncDir, u32)>>, Fault> = (|| {
                        if let Some(g) = &e.guard {
                            if !m.eval_bool(g, fp)? {
                                return Ok(None);
                            }
                        }
                        Ok(Some(match &e.sync {
                            None => None,
                            Some(sy) => match m.addr(&sy.channel, fp)? {
                                super::eval::Addr::Global(c) => Some((sy.dir, c)),
                                super::eval::Addr::Stack(_) => unreachable!("channel on stack"),
                            },
                        }))
                    })();
                    match res {
                        Ok(Some(sync)) => out.push(Candidate {
                            agent: ai as u32,
                            edge: ei,
                            bindings: b.to_vec(),
                            sync,
                        }),
                        Ok(None) => {}
                        Err(f) => {
                            return Err(self.fault_error(
                                f,
                                &format!("guard of {}", self.edge_context(ai as u32, ei)),
                                None,
                            ))
                        }
                    }
                    Ok(())
                })?;
            }
        }
        Ok(out)
    }

    /// Whether any agent sits in a committed location.
    pub(crate) fn committed_agents(&self, s: &GlobalState) -> Vec<bool> {
        self.agents
            .iter()
            .zip(&s.locs)
            .map(|(a, l)| a.locations[*l as usize].committed)
            .collect()
    }

    /// Combine candidates into labels (internal edges and send/receive pairs)
    /// ordered by agent, edge and binding of the first participant.
    pub(crate) fn pair_candidates(&self, cands: &[Candidate]) -> Vec<(TransitionLabel, usize, Option<usize>)> {
        let mut out = Vec::new();
        for (i, c) in cands.iter().enumerate() {
            match c.sync {
                None => out.push((
                    TransitionLabel::Internal {
                        choice: choice_of(c),
                        variant: 0,
                    },
                    i,
                    None,
                )),
                Some((SyncDir::Send, ch)) => {
                    for (j, r) in cands.iter().enumerate() {
                        if r.agent != c.agent && r.sync == Some((SyncDir::Receive, ch)) {
                            out.push((
                                TransitionLabel::Handshake {
                                    sender: choice_of(c),
                                    receiver: choice_of(r),
                                    channel: ch,
                                    variant: 0,
                                },
                                i,
                                Some(j),
                            ));
                        }
                    }
                }
                Some((SyncDir::Receive, _)) => {}
            }
        }
        out
    }

    pub(crate) fn committed_filter(&self, s: &GlobalState, labels: &mut Vec<TransitionLabel>) {
        let committed = self.committed_agents(s);
        if committed.iter().any(|c| *c) {
            labels.retain(|t| t.edges().iter().any(|c| committed[c.agent as usize]));
        }
    }

    /// All transitions enabled in `s`, including the serial self-loop at deadlocks.
    pub fn enabled(&self, s: &GlobalState) -> Result<Vec<TransitionLabel>, KernelError> {
        self.check_state(s)?;
        if let Some(h) = &self.hidden {
            return Ok(h.successors(self, s)?.into_iter().map(|(t, _)| t).collect());
        }
        let cands = self.candidates(s)?;
        let mut labels: Vec<TransitionLabel> =
            self.pair_candidates(&cands).into_iter().map(|(t, _, _)| t).collect();
        self.committed_filter(s, &mut labels);
        if labels.is_empty() {
            labels.push(TransitionLabel::SerialLoop);
        }
        Ok(labels)
    }

    /// Apply the updates of a (possibly handshake) transition without checking enabledness.
    pub(crate) fn apply(&self, s: &GlobalState, t: &TransitionLabel) -> Result<GlobalState, KernelError> {
        let mut next = s.clone();
        {
            let mut m = Machine::new(&self.functions, Concrete::new(&mut next.vals, &s.locs));
            for c in t.edges() {
                let e = &self.agents[c.agent as usize].edges[c.edge as usize];
                m.mem.stack.clear();
                let fp = m.push_frame(e.frame_size);
                m.mem.stack[..c.bindings.len()].copy_from_slice(&c.bindings);
                m.run(&e.update, fp).map_err(|f| {
                    self.fault_error(
                        f,
                        &format!("update of {}", self.edge_context(c.agent, c.edge)),
                        Some(t.clone()),
                    )
                })?;
            }
        }
        for c in t.edges() {
            next.locs[c.agent as usize] = self.agents[c.agent as usize].edges[c.edge as usize].target;
        }
        Ok(next)
    }

    /// Successor of `s` under `t`; `t` must be enabled in `s`.
    pub fn step(&self, s: &GlobalState, t: &TransitionLabel) -> Result<GlobalState, KernelError> {
        self.check_state(s)?;
        if let Some(h) = &self.hidden {
            return h
                .successors(self, s)?
                .into_iter()
                .find(|(l, _)| l == t)
                .map(|(_, n)| n)
                .ok_or(KernelError::NotEnabled);
        }
        if !self.enabled(s)?.contains(t) {
            return Err(KernelError::NotEnabled);
        }
        if *t == TransitionLabel::SerialLoop {
            return Ok(s.clone());
        }
        self.apply(s, t)
    }

    /// Every enabled transition with its successor.
    pub fn successors(&self, s: &GlobalState) -> Result<Vec<(TransitionLabel, GlobalState)>, KernelError> {
        if let Some(h) = &self.hidden {
            return h.successors(self, s);
        }
        let cands = self.candidates(s)?;
        let committed = self.committed_agents(s);
        let any_committed = committed.iter().any(|c| *c);
        let mut out = Vec::new();
        for (t, _, _) in self.pair_candidates(&cands) {
            if any_committed && !t.edges().iter().any(|c| committed[c.agent as usize]) {
                continue;
            }
            let n = self.apply(s, &t)?;
            out.push((t, n));
        }
        if out.is_empty() {
            out.push((TransitionLabel::SerialLoop, s.clone()));
        }
        Ok(out)
    }
}

fn choice_of(c: &Candidate) -> EdgeChoice {
    EdgeChoice {
        agent: c.agent,
        edge: c.edge,
        bindings: c.bindings.clone(),
    }
}
