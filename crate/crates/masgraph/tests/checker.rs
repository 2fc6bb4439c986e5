use masgraph::checker::{self, EgMode, Formula, Options, Status, Verdict};
use masgraph::kernel::{unwrap, MasGraph};
use masgraph::randgen::random_model;
use masgraph::textlang::{self, Model};

fn load(text: &str) -> Model {
    textlang::load_model(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

fn formulas(m: &Model, text: &str) -> Vec<Formula> {
    textlang::load_queries(m, text)
        .unwrap_or_else(|e| panic!("{e}\n{text}"))
        .into_iter()
        .map(|q| q.formula)
        .collect()
}

/// Witness and counterexample shapes that each verdict must carry.
fn check_trace(g: &MasGraph, f: &Formula, v: &Verdict) {
    let Some(t) = &v.trace else {
        let needs = match (f, v.status) {
            (Formula::Invariant(_), Status::Violated) | (Formula::Reach(_), Status::Satisfied) => true,
            (Formula::Liveness(_), Status::Violated) | (Formula::LeadsTo(..), Status::Violated) => true,
            (Formula::ExistsGlobally(_), Status::Satisfied) => true,
            _ => false,
        };
        assert!(!needs, "{f}: missing trace");
        return;
    };
    t.replay(g).unwrap_or_else(|e| panic!("{f}: {e}"));
    match f {
        Formula::Invariant(p) => assert!(!p.holds(g, t.last()).unwrap()),
        Formula::Reach(p) => assert!(p.holds(g, t.last()).unwrap()),
        Formula::ExistsGlobally(p) => assert!(t.states().all(|s| p.holds(g, s).unwrap())),
        Formula::Liveness(p) => {
            assert!(t.loop_start.is_some());
            assert!(t.states().all(|s| !p.holds(g, s).unwrap()));
        }
        Formula::LeadsTo(p, q) => {
            let start = t.loop_start.expect("lasso");
            let states: Vec<_> = t.states().collect();
            let ok = (0..=start).any(|k| {
                p.holds(g, states[k]).unwrap() && states[k..].iter().all(|s| !q.holds(g, s).unwrap())
            });
            assert!(ok, "{f}: no p state followed by a q-free lasso");
        }
    }
}

#[test]
fn random_models_agree_with_oracle() {
    let mut checked = 0;
    for seed in 0..100 {
        let rm = random_model(seed, 8);
        let m = load(&rm.text);
        let em = unwrap(&m.graph, 50_000).expect("small model");
        let fs = formulas(&m, &rm.queries.join("\n"));
        for f in &fs {
            for mode in [EgMode::Maximal, EgMode::FiniteRun] {
                let opts = Options {
                    eg_mode: mode,
                    ..Options::default()
                };
                let v = checker::check(&m.graph, f, &opts).unwrap();
                let want = checker::oracle_check(&m.graph, &em, f, mode).unwrap();
                assert_eq!(v.satisfied(), Some(want), "seed {seed}: {f} ({mode:?})\n{}", rm.text);
                check_trace(&m.graph, f, &v);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 1600);
}

#[test]
fn parallel_search_is_deterministic() {
    for seed in 0..30 {
        let rm = random_model(seed, 4);
        let m = load(&rm.text);
        for f in formulas(&m, &rm.queries.join("\n")) {
            let a = checker::check(&m.graph, &f, &Options::default()).unwrap();
            let par = Options {
                threads: 2,
                ..Options::default()
            };
            let b = checker::check(&m.graph, &f, &par).unwrap();
            assert_eq!(a.status, b.status);
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.stats.states_stored, b.stats.states_stored);
        }
    }
}

#[test]
fn dualities_and_mode_ordering() {
    for seed in 100..160 {
        let rm = random_model(seed, 0);
        let m = load(&rm.text);
        let em = unwrap(&m.graph, 50_000).unwrap();
        let atoms = ["v0 == 0", "v0 > 0", "P0.l0", "P0.l1 || v0 == 1"];
        for p in atoms {
            let fs = formulas(&m, &format!("A[] {p}\nE<> !({p})\nA<> {p}\nE[] !({p})"));
            let r: Vec<bool> = fs
                .iter()
                .map(|f| checker::check(&m.graph, f, &Options::default()).unwrap().satisfied().unwrap())
                .collect();
            assert_eq!(r[0], !r[1], "seed {seed} {p}");
            assert_eq!(r[2], !r[3], "seed {seed} {p}");
            // The finite-run reading of E[] is weaker than the maximal one.
            let eg = &fs[3];
            let fin = checker::oracle_check(&m.graph, &em, eg, EgMode::FiniteRun).unwrap();
            assert!(!r[3] || fin);
        }
    }
}

#[test]
fn budget_exhaustion_reports_memout() {
    let m = load("int[0,1000] x; process P { state a; init a; trans a -> a { assign x = (x + 1) % 1001; }; } system P;");
    let f = &formulas(&m, "A[] x >= 0")[0];
    let tight = Options {
        mem_budget: 2000,
        ..Options::default()
    };
    let v = checker::check(&m.graph, f, &tight).unwrap();
    assert_eq!(v.status, Status::MemOut);
    assert_eq!(v.satisfied(), None);
    let v = checker::check(&m.graph, f, &Options::default()).unwrap();
    assert_eq!(v.status, Status::Satisfied);
    assert_eq!(v.stats.states_stored, 1001);
    assert_eq!(v.stats.states_explored, 1002);
}

#[test]
fn shortest_counterexample() {
    let m = load(
        "int[0,5] x; process P { state a; init a; trans a -> a { guard x < 5; assign x++; }, a -> a { guard x < 4; assign x = x + 2; }; } system P;",
    );
    let f = &formulas(&m, "A[] x != 5")[0];
    let v = checker::check(&m.graph, f, &Options::default()).unwrap();
    assert_eq!(v.status, Status::Violated);
    assert_eq!(v.trace.as_ref().unwrap().len(), 3);
}

#[test]
fn deadlock_is_serial() {
    // The only infinite path stutters in the deadlock.
    let m = load("int[0,2] x; process P { state a, b; init a; trans a -> b { assign x = 2; }; } system P;");
    let fs = formulas(&m, "E[] x < 2\nA<> x == 2\nE[] P.a || x == 2");
    let r: Vec<_> = fs
        .iter()
        .map(|f| checker::check(&m.graph, f, &Options::default()).unwrap())
        .collect();
    assert_eq!(r[0].status, Status::Violated);
    assert_eq!(r[1].status, Status::Satisfied);
    assert_eq!(r[2].status, Status::Satisfied);
    assert_eq!(r[2].trace.as_ref().unwrap().loop_start, Some(1));
}
