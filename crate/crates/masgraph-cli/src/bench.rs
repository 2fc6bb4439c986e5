//! The experiment matrix and its CSV and Markdown tables.

use crate::run::{run, AbstractionSource, ModelSource, Mode, QuerySource, Row, RunSpec};
use masgraph::checker::EgMode;
use masgraph::votecorpus::{Config, DeviationSet, Property, SpecName};
use std::io::Write;

pub const CSV_COLUMNS: [&str; 9] = [
    "conf",
    "property",
    "mode",
    "sat",
    "conclusive",
    "states_stored",
    "states_explored",
    "time_s",
    "mem_mb",
];

/// Deviations a property is checked against unless told otherwise: voter
/// deviations for the counting properties, the invalid-stamp office
/// deviation for office blocking.
pub fn default_deviations(p: &Property) -> DeviationSet {
    match p {
        Property::Bstuff | Property::Valvote { .. } => DeviationSet::voters(),
        Property::MoblockUnder { .. } | Property::MoblockOverover { .. } => DeviationSet::offices(),
    }
}

/// The abstraction used for a property's abstract rows.
pub fn default_spec(p: &Property) -> Option<SpecName> {
    match *p {
        Property::Bstuff => Some(SpecName::BstuffSpec),
        Property::Valvote { voter, cand } => Some(SpecName::ValvoteSpec { voter, cand }),
        Property::MoblockUnder { .. } => Some(SpecName::MoblockSpec),
        Property::MoblockOverover { .. } => None,
    }
}

pub struct BenchSpec {
    pub configs: Vec<Config>,
    pub properties: Vec<String>,
    pub modes: Vec<Mode>,
    pub voter: u32,
    pub cand: u32,
    pub office: i32,
    pub mem_budget: usize,
    pub threads: usize,
    pub eg_mode: EgMode,
}

/// One row per (config, property, mode). Failures and memory exhaustion
/// end up in their row; properties without an abstraction get no
/// abstract row.
pub fn bench_matrix(spec: &BenchSpec, on_row: &mut dyn FnMut(&Row)) -> Vec<Row> {
    let mut rows = Vec::new();
    for cfg in &spec.configs {
        for name in &spec.properties {
            for &mode in &spec.modes {
                let conf = cfg.to_string();
                let row = match Property::parse(name, spec.voter, spec.cand, spec.office) {
                    Err(e) => Some(failed(&conf, name, mode, e.to_string())),
                    Ok(p) => {
                        let abstraction = match mode {
                            Mode::Concrete => Some(None),
                            Mode::Abstract => default_spec(&p).map(|s| Some(AbstractionSource::Named(s))),
                        };
                        abstraction.map(|abstraction| {
                            let rs = RunSpec {
                                model: ModelSource::Corpus {
                                    cfg: *cfg,
                                    dev: default_deviations(&p),
                                },
                                query: QuerySource::Property(p),
                                abstraction,
                                mem_budget: spec.mem_budget,
                                threads: spec.threads,
                                eg_mode: spec.eg_mode,
                            };
                            match run(&rs) {
                                Ok(mut r) => {
                                    let mut row = r.rows.remove(0);
                                    row.trace = None;
                                    row
                                }
                                Err(e) => failed(&conf, name, mode, e.to_string()),
                            }
                        })
                    }
                };
                if let Some(row) = row {
                    on_row(&row);
                    rows.push(row);
                }
            }
        }
    }
    rows
}

fn failed(conf: &str, property: &str, mode: Mode, e: String) -> Row {
    let mut r = Row::new(conf, property, mode);
    r.error = Some(e);
    r
}

fn sat_text(r: &Row) -> &'static str {
    match (r.sat, &r.error) {
        (_, Some(_)) => "error",
        (Some(true), _) => "true",
        (Some(false), _) => "false",
        (None, _) if r.memout => "memout",
        (None, _) => "unknown",
    }
}

fn fields(r: &Row) -> [String; 9] {
    [
        r.conf.clone(),
        r.property.clone(),
        r.mode.to_string(),
        sat_text(r).to_string(),
        r.conclusive.to_string(),
        r.states_stored.to_string(),
        r.states_explored.to_string(),
        format!("{:.3}", r.time_s),
        format!("{:.1}", r.mem_mb),
    ]
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Concrete over abstract explored states, when both rows completed.
pub fn reduction(rows: &[Row], abs: &Row) -> Option<f64> {
    if abs.mode != Mode::Abstract || abs.error.is_some() || abs.memout || abs.states_explored == 0 {
        return None;
    }
    rows.iter()
        .find(|c| c.mode == Mode::Concrete && c.conf == abs.conf && c.property == abs.property && c.conclusive)
        .map(|c| c.states_explored as f64 / abs.states_explored as f64)
}

/// The CSV columns plus the explored-state reduction of abstract rows.
pub fn markdown(rows: &[Row]) -> String {
    let mut s = format!("| {} | ratio |\n|{}\n", CSV_COLUMNS.join(" | "), "---|".repeat(CSV_COLUMNS.len() + 1));
    for r in rows {
        let ratio = reduction(rows, r).map_or_else(String::new, |x| format!("{x:.1}"));
        s.push_str(&format!("| {} | {ratio} |\n", fields(r).join(" | ")));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(configs: Vec<Config>, properties: &[&str], modes: Vec<Mode>) -> BenchSpec {
        BenchSpec {
            configs,
            properties: properties.iter().map(|s| s.to_string()).collect(),
            modes,
            voter: 1,
            cand: 1,
            office: -1,
            mem_budget: 64 << 20,
            threads: 1,
            eg_mode: EgMode::Maximal,
        }
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let rows = bench_matrix(&spec(vec![], &["bstuff"], vec![Mode::Concrete]), &mut |_| {});
        assert!(rows.is_empty());
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
        assert_eq!(markdown(&rows).lines().count(), 2);
    }

    #[test]
    fn bad_rows_do_not_stop_the_matrix() {
        let s = spec(
            vec![Config::new(1, 1, 1, 1).unwrap()],
            &["nonsense", "bstuff", "moblock_overover"],
            vec![Mode::Concrete, Mode::Abstract],
        );
        let rows = bench_matrix(&s, &mut |_| {});
        // Two failed rows, two bstuff rows, one concrete moblock row.
        assert_eq!(rows.len(), 5);
        assert_eq!(rows.iter().filter(|r| r.error.is_some()).count(), 2);
        assert_eq!(sat_text(&rows[2]), "true");
        assert!(reduction(&rows, &rows[3]).unwrap() > 1.0);
    }

    #[test]
    fn conf_is_quoted_in_csv() {
        let mut r = Row::new("1,2,1,1", "bstuff", Mode::Concrete);
        r.sat = Some(true);
        r.conclusive = true;
        let mut out = Vec::new();
        write_csv(&[r], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("\"1,2,1,1\",bstuff,concrete,true,true,"));
    }
}
