//! Seeded generators of small models and queries, used by the differential
//! and invariant test suites.
//!
//! Generated models never fault: every assignment is reduced modulo the
//! target's range.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write;

/// A generated model with queries over it.
#[derive(Clone, Debug)]
pub struct RandomModel {
    pub seed: u64,
    pub text: String,
    /// One query per line.
    pub queries: Vec<String>,
    /// Upper bounds of the variables `v0..`, all with lower bound 0.
    pub vars: Vec<i32>,
    /// Process names with their location names.
    pub procs: Vec<(String, Vec<String>)>,
}

/// A generated abstraction spec for a [`RandomModel`].
#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub text: String,
    /// Indices of the removed variables.
    pub removed: Vec<usize>,
    /// Definition of the merge variable `m0`, if any.
    pub merge: Option<String>,
    /// `A[]` and `E<>` queries over kept variables, `m0` and locations.
    pub queries: Vec<String>,
}

struct Gen {
    rng: ChaCha8Rng,
    /// Upper bounds of the global variables `v0..`.
    vars: Vec<i32>,
    procs: Vec<(String, Vec<String>)>,
    chans: usize,
}

impl Gen {
    fn atom(&mut self) -> String {
        if self.rng.gen_bool(0.3) && !self.procs.is_empty() {
            let (p, locs) = self.procs.choose(&mut self.rng).unwrap();
            return format!("{p}.{}", locs.choose(&mut self.rng).unwrap());
        }
        let i = self.rng.gen_range(0..self.vars.len());
        let c = self.rng.gen_range(0..=self.vars[i]);
        let op = ["==", "!=", "<", "<=", ">", ">="].choose(&mut self.rng).unwrap();
        if self.rng.gen_bool(0.2) && self.vars.len() > 1 {
            let j = (i + 1) % self.vars.len();
            return format!("v{i} {op} v{j}");
        }
        format!("v{i} {op} {c}")
    }

    fn pred(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.5) {
            return self.atom();
        }
        match self.rng.gen_range(0..3) {
            0 => format!("!({})", self.pred(depth - 1)),
            1 => format!("({}) && ({})", self.pred(depth - 1), self.pred(depth - 1)),
            _ => format!("({}) || ({})", self.pred(depth - 1), self.pred(depth - 1)),
        }
    }

    fn update(&mut self, sel: Option<i32>) -> String {
        let i = self.rng.gen_range(0..self.vars.len());
        let m = self.vars[i] + 1;
        match self.rng.gen_range(0..4) {
            0 => format!("v{i} = (v{i} + {}) % {m}", self.rng.gen_range(1..m.max(2))),
            1 => format!("v{i} = {}", self.rng.gen_range(0..m)),
            2 if sel.is_some() => format!("v{i} = s % {m}"),
            _ => {
                let j = self.rng.gen_range(0..self.vars.len());
                format!("v{i} = v{j} % {m}")
            }
        }
    }
}

/// Generate a model with `nq` queries from `seed`.
pub fn random_model(seed: u64, nq: usize) -> RandomModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nvars = rng.gen_range(1..=4);
    let vars: Vec<i32> = (0..nvars).map(|_| rng.gen_range(1..=4)).collect();
    let chans = rng.gen_range(0..=2);
    let mut g = Gen {
        rng,
        vars,
        procs: Vec::new(),
        chans,
    };
    let mut text = String::new();
    for (i, k) in g.vars.iter().enumerate() {
        writeln!(text, "int[0,{k}] v{i};").unwrap();
    }
    for c in 0..g.chans {
        writeln!(text, "chan c{c};").unwrap();
    }
    let nprocs = g.rng.gen_range(1..=4);
    for p in 0..nprocs {
        let nlocs = g.rng.gen_range(2..=4);
        let locs: Vec<String> = (0..nlocs).map(|l| format!("l{l}")).collect();
        g.procs.push((format!("P{p}"), locs));
    }
    let procs = g.procs.clone();
    for (name, locs) in &procs {
        writeln!(text, "process {name} {{").unwrap();
        writeln!(text, "    state {};", locs.join(", ")).unwrap();
        if g.rng.gen_bool(0.2) {
            writeln!(text, "    commit {};", locs[locs.len() - 1]).unwrap();
        }
        writeln!(text, "    init l0;").unwrap();
        // A cycle through every location keeps most of them reachable.
        let extra = g.rng.gen_range(0..=3);
        let mut edges = Vec::new();
        for e in 0..locs.len() + extra {
            let (src, dst) = if e < locs.len() {
                (locs[e].clone(), locs[(e + 1) % locs.len()].clone())
            } else {
                (locs.choose(&mut g.rng).unwrap().clone(), locs.choose(&mut g.rng).unwrap().clone())
            };
            let mut clauses = Vec::new();
            let sel = if g.rng.gen_bool(0.2) {
                let hi = g.rng.gen_range(1..=2);
                clauses.push(format!("select s : int[0,{hi}];"));
                Some(hi)
            } else {
                None
            };
            if g.rng.gen_bool(0.35) {
                let p = g.pred(1);
                clauses.push(format!("guard {p};"));
            }
            if g.chans > 0 && g.rng.gen_bool(0.4) {
                let c = g.rng.gen_range(0..g.chans);
                let d = if g.rng.gen_bool(0.5) { '!' } else { '?' };
                clauses.push(format!("sync c{c}{d};"));
            }
            if g.rng.gen_bool(0.7) {
                let n = g.rng.gen_range(1..=2);
                let ups: Vec<String> = (0..n).map(|_| g.update(sel)).collect();
                clauses.push(format!("assign {};", ups.join(", ")));
            }
            edges.push(format!("{src} -> {dst} {{ {} }}", clauses.join(" ")));
        }
        writeln!(text, "    trans {};", edges.join(",\n        ")).unwrap();
        writeln!(text, "}}").unwrap();
    }
    let names: Vec<&str> = procs.iter().map(|(n, _)| n.as_str()).collect();
    writeln!(text, "system {};", names.join(", ")).unwrap();
    let mut queries = Vec::new();
    for _ in 0..nq {
        let p = g.pred(2);
        let q = match g.rng.gen_range(0..5) {
            0 => format!("A[] {p}"),
            1 => format!("E<> {p}"),
            2 => format!("E[] {p}"),
            3 => format!("A<> {p}"),
            _ => format!("{p} --> {}", g.pred(1)),
        };
        queries.push(q);
    }
    RandomModel {
        seed,
        text,
        queries,
        vars: g.vars,
        procs: g.procs,
    }
}

/// Generate a spec removing some variables of `rm`, possibly with a merge.
pub fn random_spec(rm: &RandomModel, seed: u64, nq: usize) -> RandomSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rm.vars.len();
    let mut removed: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
    if removed.is_empty() {
        removed.push(rng.gen_range(0..n));
    }
    let mut text = String::new();
    let names: Vec<String> = removed.iter().map(|i| format!("v{i}")).collect();
    writeln!(text, "remove {};", names.join(", ")).unwrap();
    let mut merged = None;
    let mut merge = None;
    if rng.gen_bool(0.6) {
        let a = removed[rng.gen_range(0..removed.len())];
        let b = rng.gen_range(0..n);
        let (hi, def) = if rng.gen_bool(0.5) {
            (rm.vars[a] + rm.vars[b], format!("v{a} + v{b}"))
        } else {
            (1, format!("v{a} <= v{b} ? 1 : 0"))
        };
        writeln!(text, "merge m0 : int[0,{hi}] = {def};").unwrap();
        merged = Some(hi);
        merge = Some(def);
    }
    match rng.gen_range(0..3) {
        0 => writeln!(text, "direction under;").unwrap(),
        1 => writeln!(text, "direction over;").unwrap(),
        _ => {}
    }
    let kept: Vec<usize> = (0..n).filter(|i| !removed.contains(i)).collect();
    let mut queries = Vec::new();
    for _ in 0..nq {
        let mut atoms = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let pick = rng.gen_range(0..3);
            let atom = if pick == 0 && !kept.is_empty() {
                let i = kept[rng.gen_range(0..kept.len())];
                format!("v{i} {} {}", ["==", "<=", ">="][rng.gen_range(0..3)], rng.gen_range(0..=rm.vars[i]))
            } else if pick == 1 && merged.is_some() {
                format!("m0 {} {}", ["==", "<=", ">="][rng.gen_range(0..3)], rng.gen_range(0..=merged.unwrap()))
            } else {
                let (p, locs) = &rm.procs[rng.gen_range(0..rm.procs.len())];
                format!("{p}.{}", locs[rng.gen_range(0..locs.len())])
            };
            atoms.push(atom);
        }
        let p = atoms.join(if rng.gen_bool(0.5) { " && " } else { " || " });
        let neg = if rng.gen_bool(0.3) { "!" } else { "" };
        let q = if rng.gen_bool(0.5) { "A[]" } else { "E<>" };
        queries.push(format!("{q} {neg}({p})"));
    }
    RandomSpec {
        text,
        removed,
        merge,
        queries,
    }
}
