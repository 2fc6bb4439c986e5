//! Files written by the `abstract` verb.
//!
//! Abstract models have no source text of their own: they are the concrete
//! model plus a hidden layer. Next to the spec, a `.layout` file per
//! direction lists what the abstract model sees.

use crate::run::RunError;
use masgraph::abstraction::{abstract_model, record_view, AbstractionSpec};
use masgraph::kernel::{Direction, Visibility};
use masgraph::textlang::Model;
use std::fmt::Write;
use std::path::{Path, PathBuf};

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Under => "under",
        Direction::Over => "over",
    }
}

/// Slot visibility, merge slots and record views of `spec` applied in
/// direction `d`.
pub fn layout(m: &Model, spec: &AbstractionSpec, d: Direction) -> Result<String, RunError> {
    let spec = spec.with_direction(d);
    let abs = abstract_model(m, &spec)?;
    let h = abs.graph.hidden.as_ref().expect("abstract models carry a hidden layer");
    let g = &abs.graph;
    let mut s = format!("direction {}\n\n", direction_name(d));
    let (mut visible, mut hidden, mut scoped) = (0, 0, 0);
    for (slot, v) in g.slots.iter().zip(&h.visibility) {
        let tag = match v {
            Visibility::Visible => {
                visible += 1;
                "visible".to_string()
            }
            Visibility::Hidden => {
                hidden += 1;
                "hidden".to_string()
            }
            Visibility::Scoped(k) => {
                scoped += 1;
                let sc = &h.scopes[*k as usize];
                let a = &g.agents[sc.agent as usize];
                let locs: Vec<&str> = a
                    .locations
                    .iter()
                    .zip(&sc.locs)
                    .filter(|(_, &on)| on)
                    .map(|(l, _)| l.name.as_str())
                    .collect();
                format!("hidden in {}.{{{}}}", a.name, locs.join(", "))
            }
        };
        let _ = writeln!(s, "{:<40} {:<12} {tag}", slot.name, slot.domain.to_string());
    }
    let _ = writeln!(s, "\n{visible} visible, {hidden} hidden, {scoped} scoped\n");
    for mg in &h.merges {
        let from: Vec<&str> = mg.constituents.iter().map(|&c| g.slots[c as usize].name.as_str()).collect();
        let _ = writeln!(s, "merge {} : {} from {}", mg.name, mg.dom, from.join(", "));
    }
    let views = record_view(m, &spec)?;
    if !views.is_empty() {
        s.push('\n');
        for v in views {
            let _ = writeln!(s, "record {v}");
        }
    }
    Ok(s)
}

/// Write `<name>.abs` and one `<name>.<direction>.layout` per direction
/// into `dir`.
pub fn write_abstraction(dir: &Path, name: &str, m: &Model, spec: &AbstractionSpec) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut out = Vec::new();
    let p = dir.join(format!("{name}.abs"));
    std::fs::write(&p, &spec.text).map_err(io(&p))?;
    out.push(p);
    let dirs = match spec.direction() {
        Some(d) => vec![d],
        None => vec![Direction::Under, Direction::Over],
    };
    for d in dirs {
        let p = dir.join(format!("{name}.{}.layout", direction_name(d)));
        std::fs::write(&p, layout(m, spec, d)?).map_err(io(&p))?;
        out.push(p);
    }
    Ok(out)
}
