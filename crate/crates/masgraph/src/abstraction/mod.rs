//! Variable abstraction.
//!
//! A spec removes variables (optionally only while an agent is inside a set
//! of locations) and may introduce merge variables defined over removed and
//! kept ones. The abstract model keeps the concrete layout and appends the
//! merge slots; its semantics is implemented by [`HiddenLayer`].
//!
//! ```text
//! remove b_recv, ep_sent;
//! merge ballot_diff : int[-4,4] = ep_sent - b_recv;
//! direction under;
//! query A[] (ballot_diff >= 0);
//! ```
//!
//! The `under` model admits every concrete behaviour, so a universal
//! property that holds there holds concretely. The `over` model keeps only
//! behaviours common to all concretizations, so a universal property that
//! fails there fails concretely.

mod conclusive;
mod simulation;

pub use conclusive::{check_with_abstraction, ConclusiveVerdict, Evidence, Outcome};
pub use simulation::{simulation_check, SimulationResult, SimulationWitness};

use crate::checker::{CheckError, Formula};
use crate::kernel::hidden::global_reads;
use crate::kernel::ir::Place;
use crate::kernel::*;
use crate::textlang::ast::*;
use crate::textlang::{self, Model, ParseError, Sym, TypeError};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AbsError {
    #[error("syntax error in abstraction spec at {0}")]
    Parse(#[from] ParseError),
    #[error("type error in abstraction spec at {0}")]
    Type(#[from] TypeError),
    #[error("invalid abstraction spec: {0}")]
    Invalid(String),
    #[error("scope of {slot} is left by {agent}: {from} -> {to}")]
    ScopeBoundaryFault {
        slot: String,
        agent: String,
        from: String,
        to: String,
    },
    #[error("formula reads removed variable {0}")]
    FormulaReadsRemoved(String),
    #[error("{0} formulas are not preserved by the abstraction")]
    Unsupported(&'static str),
    #[error("explicit model is truncated")]
    TruncatedModel,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// A parsed `.abs` document together with its source.
#[derive(Clone, Debug)]
pub struct AbstractionSpec {
    pub doc: AbsDocument,
    pub text: String,
}

impl AbstractionSpec {
    pub fn parse(text: &str) -> Result<AbstractionSpec, ParseError> {
        Ok(AbstractionSpec {
            doc: textlang::parse_abstraction(text)?,
            text: text.to_string(),
        })
    }

    /// The empty spec.
    pub fn identity() -> AbstractionSpec {
        AbstractionSpec {
            doc: AbsDocument::default(),
            text: String::new(),
        }
    }

    /// The declared direction, if any. The last declaration wins.
    pub fn direction(&self) -> Option<Direction> {
        self.doc.items.iter().rev().find_map(|i| match i {
            AbsItem::Direction(DirectionAst::Under, _) => Some(Direction::Under),
            AbsItem::Direction(DirectionAst::Over, _) => Some(Direction::Over),
            _ => None,
        })
    }

    pub fn with_direction(&self, d: Direction) -> AbstractionSpec {
        let mut out = self.clone();
        out.doc.items.retain(|i| !matches!(i, AbsItem::Direction(..)));
        let ast = match d {
            Direction::Under => DirectionAst::Under,
            Direction::Over => DirectionAst::Over,
        };
        out.doc.items.push(AbsItem::Direction(ast, Span::default()));
        out
    }

    /// Replacement queries stated by the spec, to be checked on the
    /// abstract model in place of the original formula.
    pub fn queries(&self) -> Vec<&NamedQuery> {
        self.doc
            .items
            .iter()
            .filter_map(|i| match i {
                AbsItem::Query(q) => Some(q),
                _ => None,
            })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        !self
            .doc
            .items
            .iter()
            .any(|i| matches!(i, AbsItem::Remove { .. } | AbsItem::Merge { .. }))
    }
}

impl fmt::Display for AbstractionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&textlang::print_abstraction(&self.doc))
    }
}

/// Every occurrence of the record type `tname` inside the variables of `g`,
/// as (first slot, path, type).
fn record_occurrences(g: &MasGraph, tname: &str) -> Vec<(u32, String, Ty)> {
    fn walk(t: &Ty, off: u32, path: String, tname: &str, out: &mut Vec<(u32, String, Ty)>) {
        match t {
            Ty::Record { name, fields } => {
                if name.as_deref() == Some(tname) {
                    out.push((off, path.clone(), t.clone()));
                }
                let mut o = off;
                for (f, ft) in fields {
                    walk(ft, o, format!("{path}.{f}"), tname, out);
                    o += ft.size();
                }
            }
            Ty::Array { index, elem } => {
                for (k, i) in index.values().enumerate() {
                    walk(elem, off + k as u32 * elem.size(), format!("{path}[{i}]"), tname, out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for v in &g.vars {
        if (v.base as usize) < g.concrete_slot_count() {
            walk(&v.ty, v.base, v.name.clone(), tname, &mut out);
        }
    }
    out
}

fn named_record<'a>(m: &'a Model, e: &Expr) -> Option<(&'a str, &'a Ty)> {
    if let ExprKind::Ident(n) = &e.kind {
        if let Some((name, t @ Ty::Record { .. })) = m.env.globals.get_key_value(n.as_str()).and_then(|(k, s)| match s {
            Sym::Type(t) => Some((k, t)),
            _ => None,
        }) {
            return Some((name.as_str(), t));
        }
    }
    None
}

fn template_name<'a>(m: &'a Model, e: &Expr) -> Option<&'a str> {
    if let ExprKind::Ident(n) = &e.kind {
        if let Some(Sym::Template(t)) = m.env.globals.get(n) {
            return Some(t.as_str());
        }
    }
    None
}

/// Slots denoted by a `remove` target: a variable path with constant
/// indices, `Type.field` for that field of every record of the type, or
/// `Process.var` for the variable of every instance.
fn removal_slots(m: &Model, text: &str, e: &Expr) -> Result<Vec<u32>, AbsError> {
    if let ExprKind::Field(base, f) = &e.kind {
        if let Some((tname, t)) = named_record(m, base) {
            let Some((foff, ft)) = t.field(&f.name) else {
                return Err(AbsError::Invalid(format!("{tname} has no field '{}'", f.name)));
            };
            let n = ft.size();
            return Ok(record_occurrences(&m.graph, tname)
                .into_iter()
                .flat_map(|(off, _, _)| off + foff..off + foff + n)
                .collect());
        }
        if let Some(tpl) = template_name(m, base) {
            let info = &m.env.templates[tpl];
            if !info.params.is_empty() {
                let mut out = Vec::new();
                for &a in &info.agents {
                    match m.env.instances[a as usize].scope.get(&f.name) {
                        Some(Sym::Var { place, ty, .. }) => out.extend(place.offset..place.offset + ty.size()),
                        _ => return Err(AbsError::Invalid(format!("'{tpl}' has no variable '{}'", f.name))),
                    }
                }
                return Ok(out);
            }
        }
    }
    let (off, ty) = textlang::resolve_place(&m.env, text, e)?;
    Ok((off..off + ty.size()).collect())
}

/// Agents and location ids named by a `scope` item.
fn scope_locations(m: &Model, text: &str, e: &Expr) -> Result<Vec<(u32, u32)>, AbsError> {
    if let ExprKind::Field(base, f) = &e.kind {
        if let Some(tpl) = template_name(m, base) {
            let info = &m.env.templates[tpl];
            if !info.params.is_empty() {
                let Some(loc) = info.locations.iter().position(|l| *l == f.name) else {
                    return Err(AbsError::Invalid(format!("'{tpl}' has no location '{}'", f.name)));
                };
                return Ok(info.agents.iter().map(|a| (*a, loc as u32)).collect());
            }
        }
    }
    Ok(vec![textlang::resolve_location(&m.env, text, e)?])
}

fn agent_of_slot(m: &Model, slot: u32) -> Option<u32> {
    m.env
        .instances
        .iter()
        .position(|i| slot >= i.block.0 && slot < i.block.0 + i.block.1)
        .map(|a| a as u32)
}

/// Build the abstract model of `m` under `spec`. Without a declared
/// direction the under-approximation is produced.
pub fn abstract_model(m: &Model, spec: &AbstractionSpec) -> Result<Model, AbsError> {
    let g = &m.graph;
    if g.hidden.is_some() {
        return Err(AbsError::Invalid("model is already abstract".into()));
    }
    let text = spec.text.as_str();
    let n = g.slots.len();
    let mut visibility = vec![Visibility::Visible; n];
    let mut scopes: Vec<ScopeDecl> = Vec::new();
    let mut last_removed: Vec<u32> = Vec::new();
    let mut merges: Vec<MergeDef> = Vec::new();
    let mut merge_tys: Vec<(String, Ty, bool)> = Vec::new();
    for item in &spec.doc.items {
        match item {
            AbsItem::Remove { targets, .. } => {
                last_removed.clear();
                for t in targets {
                    for s in removal_slots(m, text, t)? {
                        visibility[s as usize] = Visibility::Hidden;
                        last_removed.push(s);
                    }
                }
            }
            AbsItem::Scope { locations, .. } => {
                if last_removed.is_empty() {
                    return Err(AbsError::Invalid("scope without a preceding remove".into()));
                }
                let mut by_agent: BTreeMap<u32, Vec<bool>> = BTreeMap::new();
                for l in locations {
                    for (a, loc) in scope_locations(m, text, l)? {
                        let locs = by_agent
                            .entry(a)
                            .or_insert_with(|| vec![false; g.agents[a as usize].locations.len()]);
                        locs[loc as usize] = true;
                    }
                }
                for &s in &last_removed {
                    let agent = match agent_of_slot(m, s) {
                        Some(a) if by_agent.contains_key(&a) => a,
                        _ if by_agent.len() == 1 => *by_agent.keys().next().unwrap(),
                        _ => {
                            return Err(AbsError::Invalid(format!(
                                "scope of shared variable {} must name exactly one agent",
                                g.slots[s as usize].name
                            )))
                        }
                    };
                    let decl = ScopeDecl {
                        agent,
                        locs: by_agent[&agent].clone(),
                    };
                    check_absorbing(g, &decl, s)?;
                    let k = match scopes.iter().position(|d| d.agent == decl.agent && d.locs == decl.locs) {
                        Some(k) => k,
                        None => {
                            scopes.push(decl);
                            scopes.len() - 1
                        }
                    };
                    visibility[s as usize] = Visibility::Scoped(k as u32);
                }
            }
            AbsItem::Merge { target, ty, def, .. } => {
                let instances: Vec<(String, Option<(u32, Ty)>)> = match &target.kind {
                    ExprKind::Ident(name) => {
                        if matches!(m.env.globals.get(name), Some(Sym::Var { .. } | Sym::Const(..))) {
                            return Err(AbsError::Invalid(format!("merge target '{name}' is already declared")));
                        }
                        vec![(name.clone(), None)]
                    }
                    ExprKind::Field(base, f) => {
                        let Some((tname, rty)) = named_record(m, base) else {
                            return Err(AbsError::Invalid("merge target must be a name or Type.field".into()));
                        };
                        let occ = record_occurrences(g, tname);
                        if let Some((foff, ft)) = rty.field(&f.name) {
                            // A field may be reused as a merge name only once it is removed everywhere.
                            let all_removed = occ.iter().all(|(off, _, _)| {
                                (off + foff..off + foff + ft.size()).all(|s| visibility[s as usize] == Visibility::Hidden)
                            });
                            if !all_removed {
                                return Err(AbsError::Invalid(format!(
                                    "merge target {tname}.{} is a kept field",
                                    f.name
                                )));
                            }
                        }
                        occ.into_iter()
                            .map(|(off, path, t)| (format!("{path}.{}", f.name), Some((off, t))))
                            .collect()
                    }
                    _ => return Err(AbsError::Invalid("merge target must be a name or Type.field".into())),
                };
                let per_record = instances.iter().any(|(_, t)| t.is_some());
                for (name, this) in instances {
                    if merges.iter().any(|md| md.name == name) {
                        return Err(AbsError::Invalid(format!("duplicate merge '{name}'")));
                    }
                    let (mty, ex, frame) =
                        textlang::compile_merge(&m.env, text, ty, def, this.as_ref().map(|(o, t)| (*o, t)))?;
                    let mut constituents = Vec::new();
                    global_reads(&ex, &g.functions, &mut constituents);
                    constituents.retain(|s| (*s as usize) < n);
                    merges.push(MergeDef {
                        name: name.clone(),
                        slot: (n + merges.len()) as u32,
                        dom: mty.domain().unwrap(),
                        def: ex,
                        frame_size: frame,
                        constituents,
                    });
                    merge_tys.push((name, mty, per_record));
                }
            }
            AbsItem::Direction(..) | AbsItem::Query(_) => {}
        }
    }
    let direction = spec.direction().unwrap_or(Direction::Under);
    let mut graph = g.clone();
    let mut env = (*m.env).clone();
    for (md, (name, ty, per_record)) in merges.iter().zip(&merge_tys) {
        let var = graph.vars.len() as u32;
        graph.vars.push(VarDecl {
            name: name.clone(),
            ty: ty.clone(),
            scope: VarScope::Shared,
            base: md.slot,
            initial: vec![md.dom.default_value()],
        });
        graph.slots.push(SlotInfo {
            name: name.clone(),
            domain: md.dom,
            var,
            kind: SlotKind::of(ty),
        });
        if !per_record {
            env.globals.insert(
                name.clone(),
                Sym::Var {
                    place: Place::global(md.slot),
                    ty: ty.clone(),
                    writable: false,
                },
            );
        }
    }
    graph.hidden = Some(Arc::new(HiddenLayer::new(
        direction,
        n as u32,
        visibility,
        scopes,
        merges,
    )));
    Ok(Model {
        graph,
        env: Arc::new(env),
    })
}

/// Scoped removal is only sound when the agent cannot leave the scope:
/// the hidden value would otherwise reappear as its default.
fn check_absorbing(g: &MasGraph, d: &ScopeDecl, slot: u32) -> Result<(), AbsError> {
    let a = &g.agents[d.agent as usize];
    for e in &a.edges {
        if d.locs[e.source as usize] && !d.locs[e.target as usize] {
            return Err(AbsError::ScopeBoundaryFault {
                slot: g.slots[slot as usize].name.clone(),
                agent: a.name.clone(),
                from: a.locations[e.source as usize].name.clone(),
                to: a.locations[e.target as usize].name.clone(),
            });
        }
    }
    Ok(())
}

/// Reject formulas that read a variable the abstract model does not track.
pub fn check_formula_visible(abs: &MasGraph, f: &Formula) -> Result<(), AbsError> {
    let Some(h) = &abs.hidden else {
        return Ok(());
    };
    let preds = match f {
        Formula::LeadsTo(p, q) => vec![p, q],
        Formula::Invariant(p) | Formula::Reach(p) | Formula::Liveness(p) | Formula::ExistsGlobally(p) => vec![p],
    };
    for p in preds {
        let mut reads = Vec::new();
        global_reads(&p.ex, &abs.functions, &mut reads);
        if let Some(s) = reads
            .iter()
            .find(|s| h.visibility.get(**s as usize).is_some_and(|v| *v != Visibility::Visible))
        {
            return Err(AbsError::FormulaReadsRemoved(abs.slots[*s as usize].name.clone()));
        }
    }
    Ok(())
}

/// The abstraction map from concrete states of `concrete` to states of
/// `abs`, which must have been produced from it.
pub fn project(concrete: &MasGraph, abs: &MasGraph, s: &GlobalState) -> Result<GlobalState, KernelError> {
    match &abs.hidden {
        Some(h) => h.project(concrete, s),
        None => Ok(s.clone()),
    }
}

/// Field names of a record type as seen in the abstract model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecordView {
    pub name: String,
    pub fields: Vec<String>,
}

impl fmt::Display for RecordView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{{}}}", self.name, self.fields.join(", "))
    }
}

/// A record type that receives type-level merges, possibly nested.
fn has_merges(t: &Ty, merged: &[&str]) -> bool {
    match t {
        Ty::Record { name, fields } => {
            name.as_deref().is_some_and(|n| merged.contains(&n)) || fields.iter().any(|(_, f)| has_merges(f, merged))
        }
        Ty::Array { elem, .. } => has_merges(elem, merged),
        _ => false,
    }
}

/// Record types after the spec's type-level removals and merges. Fields
/// removed for every occurrence disappear; merges follow the kept fields.
pub fn record_view(m: &Model, spec: &AbstractionSpec) -> Result<Vec<RecordView>, AbsError> {
    let abs = abstract_model(m, spec)?;
    let h = abs.graph.hidden.as_ref().unwrap();
    let mut names: Vec<(&String, &Ty)> = m
        .env
        .globals
        .iter()
        .filter_map(|(k, s)| match s {
            Sym::Type(t @ Ty::Record { name: Some(_), .. }) => Some((k, t)),
            _ => None,
        })
        .collect();
    names.sort_by(|a, b| a.0.cmp(b.0));
    let merged: Vec<&str> = spec
        .doc
        .items
        .iter()
        .filter_map(|item| match item {
            AbsItem::Merge { target, .. } => match &target.kind {
                ExprKind::Field(base, _) => match &base.kind {
                    ExprKind::Ident(b) => Some(b.as_str()),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (tname, t) in names {
        let Ty::Record { fields, .. } = t else { unreachable!() };
        let occ = record_occurrences(&m.graph, tname);
        let mut view = Vec::new();
        let mut off = 0;
        for (f, ft) in fields {
            let removed = !occ.is_empty()
                && !has_merges(ft, &merged)
                && occ
                    .iter()
                    .all(|(o, _, _)| (o + off..o + off + ft.size()).all(|s| h.visibility[s as usize] != Visibility::Visible));
            if !removed {
                view.push(f.clone());
            }
            off += ft.size();
        }
        for item in &spec.doc.items {
            if let AbsItem::Merge { target, .. } = item {
                if let ExprKind::Field(base, f) = &target.kind {
                    if matches!(&base.kind, ExprKind::Ident(b) if b == tname) && !view.contains(&f.name) {
                        view.push(f.name.clone());
                    }
                }
            }
        }
        out.push(RecordView {
            name: tname.clone(),
            fields: view,
        });
    }
    Ok(out)
}
