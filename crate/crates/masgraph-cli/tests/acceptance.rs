//! Acceptance harness: one PASS/FAIL line per criterion on stdout.
//!
//! Run with `cargo test -p masgraph-cli --test acceptance -- --test-threads 1`
//! for an ordered report; the tests serialize themselves either way.

use masgraph::abstraction::{abstract_model, project, simulation_check, AbstractionSpec, Outcome};
use masgraph::checker::{EgMode, Formula, Trace};
use masgraph::kernel::{Direction, ExplicitModel};
use masgraph::randgen::{random_model, random_spec};
use masgraph::suite::{
    abstraction_sound, explicit, kernel_invariants, oracle_suite, permutation_symmetric, permute_system, round_trip,
    Violation,
};
use masgraph::textlang::{self, LoadError, Model, TypeErrorKind};
use masgraph::votecorpus::{self, Config, DeviationSet, Property, SpecName};
use masgraph_cli::{run, AbstractionSource, ModelSource, QuerySource, Report, Row, RunSpec};
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};

const BUDGET: usize = 2 << 30;
const ROW_SECONDS: f64 = 600.0;
const SUITE_BOUND: usize = 50_000;
const RANDOM_MODELS: usize = 100;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Print the criterion's line and fail the test if it did not pass.
fn report(n: u32, title: &str, result: Result<String, String>) {
    let line = match &result {
        Ok(detail) => format!("criterion {n:>2} PASS  {title}: {detail}"),
        Err(why) => format!("criterion {n:>2} FAIL  {title}: {why}"),
    };
    let _ = writeln!(std::io::stdout().lock(), "{line}");
    if let Err(why) = result {
        panic!("criterion {n}: {why}");
    }
}

fn desk() -> Vec<Config> {
    Config::up_to(2, 2, 2, 3)
}

fn check(cfg: Config, dev: DeviationSet, p: Property, spec: Option<SpecName>) -> Result<Report, String> {
    let rs = RunSpec {
        model: ModelSource::Corpus { cfg, dev },
        query: QuerySource::Property(p),
        abstraction: spec.map(AbstractionSource::Named),
        mem_budget: BUDGET,
        threads: 1,
        eg_mode: EgMode::Maximal,
    };
    let r = run(&rs).map_err(|e| format!("{cfg}: {e}"))?;
    let row = &r.rows[0];
    if let Some(e) = &row.error {
        return Err(format!("{cfg}: {e}"));
    }
    if row.time_s > ROW_SECONDS {
        return Err(format!("{cfg} {} {}: {:.0} s", row.property, row.mode, row.time_s));
    }
    Ok(r)
}

fn row(cfg: Config, dev: DeviationSet, p: Property, spec: Option<SpecName>) -> Result<Row, String> {
    check(cfg, dev, p, spec).map(|mut r| r.rows.remove(0))
}

fn verdict(r: &Row) -> String {
    match (r.memout, r.conclusive, r.sat) {
        (true, _, _) => "memout".into(),
        (_, false, _) => "inconclusive".into(),
        (_, _, Some(b)) => b.to_string(),
        _ => "unknown".into(),
    }
}

/// The bstuff rows shared by criteria 1, 2 and 8: concrete rows on the
/// desk configs, abstract rows on the desk configs plus (3,1,1,3).
struct Bstuff {
    concrete: Vec<(Config, Result<Row, String>)>,
    abstracted: Vec<(Config, Result<Row, String>)>,
}

fn bstuff() -> &'static Bstuff {
    static ROWS: OnceLock<Bstuff> = OnceLock::new();
    ROWS.get_or_init(|| {
        let concrete = desk()
            .into_iter()
            .map(|c| (c, row(c, DeviationSet::voters(), Property::Bstuff, None)))
            .collect();
        let mut configs = desk();
        configs.push(Config::new(3, 1, 1, 3).unwrap());
        let abstracted = configs
            .into_iter()
            .map(|c| (c, row(c, DeviationSet::voters(), Property::Bstuff, Some(SpecName::BstuffSpec))))
            .collect();
        Bstuff { concrete, abstracted }
    })
}

fn max_time<'a>(rows: impl Iterator<Item = &'a Row>) -> f64 {
    rows.map(|r| r.time_s).fold(0.0, f64::max)
}

#[test]
fn c01_bstuff_concrete_holds() {
    let _g = serial();
    let b = bstuff();
    let result = (|| {
        let mut done = 0;
        let mut memout = Vec::new();
        for (c, r) in &b.concrete {
            let r = r.clone()?;
            if r.memout {
                memout.push(c.to_string());
                continue;
            }
            if r.sat != Some(true) {
                return Err(format!("{c}: {}", verdict(&r)));
            }
            done += 1;
        }
        let rows = b.concrete.iter().filter_map(|(_, r)| r.as_ref().ok());
        Ok(format!(
            "true on {done}/{} configs, memout on [{}], slowest {:.1} s",
            b.concrete.len(),
            memout.join(" "),
            max_time(rows)
        ))
    })();
    report(1, "bstuff concrete", result);
}

#[test]
fn c02_bstuff_spec_is_conclusive_true() {
    let _g = serial();
    let b = bstuff();
    let result = (|| {
        for (c, r) in &b.abstracted {
            let r = r.clone()?;
            if r.memout || !r.conclusive || r.sat != Some(true) {
                return Err(format!("{c}: {}", verdict(&r)));
            }
        }
        let rows = b.abstracted.iter().filter_map(|(_, r)| r.as_ref().ok());
        Ok(format!(
            "conclusive true on {} configs including 3,1,1,3, slowest {:.1} s",
            b.abstracted.len(),
            max_time(rows)
        ))
    })();
    report(2, "bstuff with bstuff_spec", result);
}

/// The trace replays and its last state violates the invariant.
fn counterexample_ok(m: &Model, query: &str, t: &Trace) -> Result<(), String> {
    t.replay(&m.graph).map_err(|e| e.to_string())?;
    let q = textlang::load_queries(m, query).map_err(|e| e.to_string())?;
    let Formula::Invariant(p) = &q[0].formula else {
        return Err(format!("'{query}' is not an invariant"));
    };
    match p.holds(&m.graph, t.last()) {
        Ok(false) => Ok(()),
        Ok(true) => Err("last state satisfies the invariant".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[test]
fn c03_valvote_concrete_fails_with_a_replayable_trace() {
    let _g = serial();
    let result = (|| {
        let p = Property::Valvote { voter: 1, cand: 1 };
        let (mut done, mut longest, mut slowest) = (0, 0, 0.0f64);
        for c in desk() {
            let r = check(c, DeviationSet::voters(), p, None)?;
            let row = &r.rows[0];
            slowest = slowest.max(row.time_s);
            if row.memout {
                continue;
            }
            if row.sat != Some(false) {
                return Err(format!("{c}: {}", verdict(row)));
            }
            let t = row.trace.as_ref().ok_or_else(|| format!("{c}: no counterexample"))?;
            let query = p.query(&c).map_err(|e| e.to_string())?;
            counterexample_ok(&r.model, &query, t).map_err(|e| format!("{c}: {e}"))?;
            longest = longest.max(t.len());
            done += 1;
        }
        Ok(format!(
            "false on {done}/{} configs, every trace replays (longest {longest} steps), slowest {slowest:.1} s",
            desk().len()
        ))
    })();
    report(3, "valvote concrete", result);
}

#[test]
fn c04_valvote_spec_needs_the_honest_voter() {
    let _g = serial();
    let result = (|| {
        let p = Property::Valvote { voter: 1, cand: 1 };
        let spec = Some(SpecName::ValvoteSpec { voter: 1, cand: 1 });
        let mut slowest = 0.0f64;
        for c in desk() {
            let r = row(c, DeviationSet::voters(), p, spec)?;
            if r.memout || r.conclusive {
                return Err(format!("{c} with deviating voters: {}", verdict(&r)));
            }
            let h = row(c, DeviationSet::voters().with_honest_voter(1), p, spec)?;
            if h.memout || !h.conclusive || h.sat != Some(true) {
                return Err(format!("{c} with honest voter 1: {}", verdict(&h)));
            }
            slowest = slowest.max(r.time_s).max(h.time_s);
        }
        Ok(format!(
            "inconclusive, then conclusive true with voter 1 honest, on {} configs, slowest {slowest:.1} s",
            desk().len()
        ))
    })();
    report(4, "valvote with valvote_spec", result);
}

#[test]
fn c05_office_blocking() {
    let _g = serial();
    let result = (|| {
        let under = Property::MoblockUnder { office: -1, cand: 1 };
        let overover = Property::MoblockOverover { office: -1, cand: 1 };
        let fixed = DeviationSet::honest().with_fixed_strategy(1, -1);
        let mut slowest = 0.0f64;
        for c in desk() {
            let a = row(c, DeviationSet::offices(), under, None)?;
            if a.sat != Some(false) {
                return Err(format!("{c} under: {}", verdict(&a)));
            }
            let b = row(c, DeviationSet::offices(), overover, None)?;
            if b.sat != Some(true) {
                return Err(format!("{c} overover: {}", verdict(&b)));
            }
            let s = row(c, fixed.clone(), under, Some(SpecName::MoblockSpec))?;
            if s.memout || !s.conclusive || s.sat != Some(true) {
                return Err(format!("{c} fixed strategy: {}", verdict(&s)));
            }
            slowest = slowest.max(a.time_s).max(b.time_s).max(s.time_s);
        }
        Ok(format!(
            "under false, overover true, fixed strategy conclusive true on {} configs, slowest {slowest:.1} s",
            desk().len()
        ))
    })();
    report(5, "office blocking", result);
}

/// Random models within the suite bound, with their queries.
fn random_models() -> &'static Vec<(String, Vec<String>, usize)> {
    static MODELS: OnceLock<Vec<(String, Vec<String>, usize)>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let mut out = Vec::new();
        let mut seed = 0;
        while out.len() < RANDOM_MODELS {
            let rm = random_model(seed, 6);
            seed += 1;
            let m = textlang::load_model(&rm.text).unwrap_or_else(|e| panic!("seed {}: {e}", rm.seed));
            if explicit(&m.graph, SUITE_BOUND).is_ok() {
                out.push((rm.text, rm.queries, rm.procs.len()));
            }
        }
        out
    })
}

fn deviation_sets() -> Vec<(&'static str, DeviationSet)> {
    vec![
        ("honest", DeviationSet::honest()),
        ("voters", DeviationSet::voters()),
        ("offices", DeviationSet::offices()),
        ("all", DeviationSet::all()),
        ("honest voter", DeviationSet::voters().with_honest_voter(1)),
        ("fixed strategy", DeviationSet::honest().with_fixed_strategy(1, -1)),
    ]
}

/// Corpus models within the suite bound.
fn corpus_models() -> &'static Vec<(String, Config, String, Model, ExplicitModel)> {
    static MODELS: OnceLock<Vec<(String, Config, String, Model, ExplicitModel)>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let mut out = Vec::new();
        for c in desk() {
            for (name, dev) in deviation_sets() {
                let text = votecorpus::model_text(&c, &dev).unwrap_or_else(|e| panic!("{c} {name}: {e}"));
                let m = textlang::load_model(&text).unwrap_or_else(|e| panic!("{c} {name}: {e}"));
                match explicit(&m.graph, SUITE_BOUND) {
                    Ok(em) => out.push((format!("{c} {name}"), c, text, m, em)),
                    Err(Violation::TooLarge(_)) => {}
                    Err(e) => panic!("{c} {name}: {e}"),
                }
            }
        }
        out
    })
}

fn corpus_queries(c: &Config) -> String {
    let mut qs: Vec<String> = [
        Property::Bstuff,
        Property::Valvote { voter: 1, cand: 1 },
        Property::MoblockUnder { office: -1, cand: 1 },
        Property::MoblockOverover { office: -1, cand: 1 },
    ]
    .iter()
    .map(|p| p.query(c).unwrap())
    .collect();
    qs.push("E<> Time.end".into());
    qs.push("A<> Time.end".into());
    qs.push("E<> Time.end and b_recv < ep_sent".into());
    qs.join("\n")
}

#[test]
fn c06_oracle_equivalence() {
    let _g = serial();
    let result = (|| {
        let mut checks = 0;
        for (text, queries, _) in random_models() {
            let m = textlang::load_model(text).map_err(|e| e.to_string())?;
            checks += oracle_suite(&m, &queries.join("\n"), SUITE_BOUND).map_err(|e| format!("{e}\n{text}"))?;
        }
        let corpus = corpus_models();
        for (name, c, _, m, _) in corpus {
            checks += oracle_suite(m, &corpus_queries(c), SUITE_BOUND).map_err(|e| format!("{name}: {e}"))?;
        }
        Ok(format!(
            "{checks} verdicts agree over {} random and {} corpus models",
            random_models().len(),
            corpus.len()
        ))
    })();
    report(6, "oracle equivalence", result);
}

fn corpus_specs(c: &Config) -> Vec<(SpecName, Property, DeviationSet)> {
    vec![
        (SpecName::BstuffSpec, Property::Bstuff, DeviationSet::voters()),
        (SpecName::InvalidMerge, Property::Bstuff, DeviationSet::all()),
        (
            SpecName::ValvoteSpec { voter: 1, cand: 1 },
            Property::Valvote { voter: 1, cand: 1 },
            DeviationSet::voters(),
        ),
        (
            SpecName::ValvoteSpec { voter: c.nv, cand: 1 },
            Property::Valvote { voter: c.nv, cand: 1 },
            DeviationSet::voters().with_honest_voter(c.nv),
        ),
        (
            SpecName::MoblockSpec,
            Property::MoblockUnder { office: -1, cand: 1 },
            DeviationSet::honest().with_fixed_strategy(1, -1),
        ),
    ]
}

#[test]
fn c07_abstraction_soundness() {
    let _g = serial();
    let result = (|| {
        let (mut corpus, mut random, mut conclusive) = (0, 0, 0);
        let mut tally = |o: Outcome| {
            if o != Outcome::Inconclusive {
                conclusive += 1;
            }
        };
        for c in desk() {
            for (name, p, dev) in corpus_specs(&c) {
                let m = votecorpus::load(&c, &dev).map_err(|e| e.to_string())?;
                let em = match explicit(&m.graph, SUITE_BOUND) {
                    Ok(em) => em,
                    Err(Violation::TooLarge(_)) => continue,
                    Err(e) => return Err(format!("{c}: {e}")),
                };
                let spec = votecorpus::abstraction_spec(&name, &c).map_err(|e| e.to_string())?;
                let q = p.query(&c).map_err(|e| e.to_string())?;
                let o = abstraction_sound(&m, &em, &spec, &q, &q, 4 * SUITE_BOUND)
                    .map_err(|e| format!("{c} {}: {e}", name.name()))?;
                tally(o);
                corpus += 1;
            }
        }
        let mut caught = 0;
        for seed in 0..RANDOM_MODELS as u64 {
            let rm = random_model(seed, 0);
            let m = textlang::load_model(&rm.text).map_err(|e| e.to_string())?;
            let Ok(em) = explicit(&m.graph, SUITE_BOUND) else { continue };
            let rs = random_spec(&rm, seed, 4);
            let spec = AbstractionSpec::parse(&rs.text).map_err(|e| e.to_string())?;
            for q in &rs.queries {
                let concrete = match &rs.merge {
                    Some(def) => q.replace("m0", &format!("({def})")),
                    None => q.clone(),
                };
                let o = abstraction_sound(&m, &em, &spec, q, &concrete, SUITE_BOUND)
                    .map_err(|e| format!("seed {seed}: {e}\n{}", rs.text))?;
                tally(o);
                random += 1;
            }
            // Mutation: the must model presented as a may model.
            let over = abstract_model(&m, &spec.with_direction(Direction::Over)).map_err(|e| e.to_string())?;
            let eo = explicit(&over.graph, SUITE_BOUND).map_err(|e| e.to_string())?;
            let h = |s: &_| project(&m.graph, &over.graph, s);
            if !simulation_check(&em, &eo, &h, Direction::Under).map_err(|e| e.to_string())?.holds {
                caught += 1;
            }
        }
        if caught == 0 {
            return Err("no mutated abstraction was rejected".into());
        }
        Ok(format!(
            "{corpus} corpus and {random} random checks sound ({conclusive} conclusive), {caught} mutants rejected"
        ))
    })();
    report(7, "abstraction soundness", result);
}

#[test]
fn c08_bstuff_spec_reduces_explored_states() {
    let _g = serial();
    let b = bstuff();
    let result = (|| {
        let (mut compared, mut worst) = (0, 0.0f64);
        for (c, conc) in &b.concrete {
            let Some((_, abs)) = b.abstracted.iter().find(|(a, _)| a == c) else { continue };
            let (Ok(conc), Ok(abs)) = (conc, abs) else { continue };
            if conc.memout || abs.memout {
                continue;
            }
            if abs.states_explored >= conc.states_explored {
                return Err(format!("{c}: abstract {} >= concrete {}", abs.states_explored, conc.states_explored));
            }
            let ratio = abs.states_explored as f64 / conc.states_explored as f64;
            worst = worst.max(ratio);
            compared += 1;
        }
        if compared == 0 {
            return Err("no config completed in both modes".into());
        }
        Ok(format!("strictly smaller on {compared} configs, largest abstract/concrete ratio {worst:.3}"))
    })();
    report(8, "reduction", result);
}

fn system_len(text: &str) -> usize {
    let line = text.lines().find(|l| l.trim_start().starts_with("system ")).unwrap_or("");
    line.split(',').count()
}

#[test]
fn c09_kernel_invariants() {
    let _g = serial();
    let result = (|| {
        let mut models = 0;
        for (text, _, n) in random_models() {
            let a = textlang::load_model(text).map_err(|e| e.to_string())?;
            let em = explicit(&a.graph, SUITE_BOUND).map_err(|e| e.to_string())?;
            kernel_invariants(&a.graph, &em).map_err(|e| format!("{e}\n{text}"))?;
            let perm: Vec<usize> = (0..*n).rev().collect();
            let b = textlang::load_model(&permute_system(text, &perm).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            permutation_symmetric(&a.graph, &b.graph, SUITE_BOUND).map_err(|e| format!("{e}\n{text}"))?;
            models += 1;
        }
        for (name, _, text, m, em) in corpus_models() {
            kernel_invariants(&m.graph, em).map_err(|e| format!("{name}: {e}"))?;
            let perm: Vec<usize> = (0..system_len(text)).rev().collect();
            let b = textlang::load_model(&permute_system(text, &perm).map_err(|e| e.to_string())?)
                .map_err(|e| format!("{name}: {e}"))?;
            permutation_symmetric(&m.graph, &b.graph, SUITE_BOUND).map_err(|e| format!("{name}: {e}"))?;
            models += 1;
        }
        Ok(format!("serial, replayable and order-independent on {models} models"))
    })();
    report(9, "kernel invariants", result);
}

fn type_error(text: &str) -> Result<TypeErrorKind, String> {
    match textlang::load_model(text) {
        Err(LoadError::Type(e)) => Ok(e.kind),
        Err(e) => Err(e.to_string()),
        Ok(_) => Err("accepted".into()),
    }
}

#[test]
fn c10_round_trip_and_negative_programs() {
    let _g = serial();
    let result = (|| {
        let mut texts = 0;
        for c in desk() {
            for (name, dev) in deviation_sets() {
                let text = votecorpus::model_text(&c, &dev).map_err(|e| e.to_string())?;
                round_trip(&text).map_err(|e| format!("{c} {name}: {e}"))?;
                texts += 1;
            }
            let queries = textlang::print_queries(&textlang::parse_query(&corpus_queries(&c)).map_err(|e| e.to_string())?);
            let again = textlang::print_queries(&textlang::parse_query(&queries).map_err(|e| e.to_string())?);
            if queries != again {
                return Err(format!("{c}: query printing is not a fixpoint"));
            }
            for (name, _, _) in corpus_specs(&c) {
                let t = votecorpus::abstraction_text(&name, &c).map_err(|e| e.to_string())?;
                let p1 = textlang::print_abstraction(&textlang::parse_abstraction(&t).map_err(|e| e.to_string())?);
                let p2 = textlang::print_abstraction(&textlang::parse_abstraction(&p1).map_err(|e| e.to_string())?);
                if p1 != p2 {
                    return Err(format!("{c} {}: abstraction printing is not a fixpoint", name.name()));
                }
            }
            texts += 2;
        }
        let negatives = [
            (
                "int x; bool f() { x = 1; return true; } process P { state a; init a; trans a -> a { guard f(); }; } system P;",
                TypeErrorKind::SideEffectInGuard,
            ),
            (
                "typedef int[-3,2] addr_t; typedef int[-3,-2] mo_t; typedef int[-2,-1] ec_t; typedef int[1,2] v_t; partition addr_t = mo_t | ec_t | v_t;",
                TypeErrorKind::Type,
            ),
            (
                "typedef int[1,3] c_t; typedef int[0,3] c_tx; c_t x; void f() { x = 0; }",
                TypeErrorKind::Type,
            ),
        ];
        for (text, want) in negatives {
            let got = type_error(text)?;
            if got != want {
                return Err(format!("expected {want:?}, got {got:?}: {text}"));
            }
        }
        Ok(format!("{texts} corpus documents print to a fixpoint, 3 negative programs rejected"))
    })();
    report(10, "round trip and typecheck", result);
}
