use masgraph::abstraction::{
    abstract_model, check_with_abstraction, project, simulation_check, AbsError, AbstractionSpec, Outcome,
};
use masgraph::checker::{self, EgMode, Options};
use masgraph::kernel::{unwrap, Direction, ExplicitModel, MasGraph};
use masgraph::randgen::{random_model, random_spec};
use masgraph::textlang::{self, Model};

const COUNTERS: &str = r#"
const int N = 3;
int[0,N] sent;
int[0,N] recv;
int[0,1] noise;
chan post;
process Sender {
    state idle, done;
    init idle;
    trans idle -> idle { guard sent < N; sync post!; assign sent++; },
        idle -> done { guard sent == N; };
}
process Receiver {
    state wait;
    init wait;
    trans wait -> wait { sync post?; assign recv++; },
        wait -> wait { assign noise = 1 - noise; };
}
system Sender, Receiver;
"#;

fn load(text: &str) -> Model {
    textlang::load_model(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

fn spec(text: &str) -> AbstractionSpec {
    AbstractionSpec::parse(text).unwrap_or_else(|e| panic!("{e}"))
}

fn explicit(g: &MasGraph) -> ExplicitModel {
    unwrap(g, 50_000).expect("small model")
}

fn sim(m: &Model, a: &Model, d: Direction) -> bool {
    let h = |s: &_| project(&m.graph, &a.graph, s);
    simulation_check(&explicit(&m.graph), &explicit(&a.graph), &h, d)
        .unwrap()
        .holds
}

#[test]
fn identity_is_isomorphic() {
    let m = load(COUNTERS);
    let id = AbstractionSpec::identity();
    assert!(id.is_identity());
    for d in [Direction::Under, Direction::Over] {
        let a = abstract_model(&m, &id.with_direction(d)).unwrap();
        let (c, x) = (explicit(&m.graph), explicit(&a.graph));
        assert_eq!(c.len(), x.len());
        for (i, s) in c.states.iter().enumerate() {
            let j = x.index_of(s).expect("state present");
            let mut ce: Vec<_> = c.edges[i].iter().map(|(k, t)| (&c.states[*k], t)).collect();
            let mut xe: Vec<_> = x.edges[j].iter().map(|(k, t)| (&x.states[*k], t)).collect();
            ce.sort();
            xe.sort();
            assert_eq!(ce, xe);
        }
        assert!(sim(&m, &a, Direction::Under) && sim(&m, &a, Direction::Over));
    }
}

#[test]
fn merged_counter_difference() {
    let m = load(COUNTERS);
    let s = spec("remove sent, recv; merge diff : int[-3,3] = sent - recv; query A[] diff >= 0;");
    let under = abstract_model(&m, &s.with_direction(Direction::Under)).unwrap();
    let over = abstract_model(&m, &s.with_direction(Direction::Over)).unwrap();
    assert!(sim(&m, &under, Direction::Under));
    assert!(sim(&m, &over, Direction::Over));
    let v = check_with_abstraction(&m, &s, "A[] recv <= sent", &Options::default()).unwrap();
    assert_eq!(v.outcome, Outcome::True);
    assert_eq!(v.evidence.len(), 1);
    let conc = checker::check(
        &m.graph,
        &textlang::load_queries(&m, "A[] recv <= sent").unwrap()[0].formula,
        &Options::default(),
    )
    .unwrap();
    assert!(v.evidence[0].verdict.stats.states_stored < conc.stats.states_stored);
}

#[test]
fn false_transfers_from_over_model() {
    let m = load(COUNTERS);
    let s = spec("remove noise;");
    let v = check_with_abstraction(&m, &s, "A[] sent < 3", &Options::default()).unwrap();
    assert_eq!(v.outcome, Outcome::False);
    assert_eq!(v.evidence.last().unwrap().direction, Direction::Over);
    let v = check_with_abstraction(&m, &s.with_direction(Direction::Under), "A[] sent < 3", &Options::default()).unwrap();
    assert_eq!(v.outcome, Outcome::Inconclusive);
}

#[test]
fn rejected_specs_and_formulas() {
    let m = load(COUNTERS);
    assert!(matches!(
        check_with_abstraction(&m, &spec("remove sent;"), "A[] sent < 9", &Options::default()),
        Err(AbsError::FormulaReadsRemoved(_))
    ));
    assert!(matches!(
        check_with_abstraction(&m, &spec("remove noise;"), "A<> sent == 3", &Options::default()),
        Err(AbsError::Unsupported("A<>"))
    ));
    assert!(matches!(
        abstract_model(&m, &spec("remove sent; merge recv : bool = sent > 0;")),
        Err(AbsError::Invalid(_))
    ));
    assert!(matches!(abstract_model(&m, &spec("remove nothing;")), Err(AbsError::Type(_))));
    // Receiver's only location loops back to itself, but Sender leaves idle.
    assert!(matches!(
        abstract_model(&m, &spec("remove noise; scope Sender.idle;")),
        Err(AbsError::ScopeBoundaryFault { .. })
    ));
    assert!(abstract_model(&m, &spec("remove noise; scope Sender.done;")).is_ok());
}

#[test]
fn scoped_removal_only_hides_inside_scope() {
    let m = load(COUNTERS);
    let a = abstract_model(&m, &spec("remove noise; scope Sender.done;")).unwrap();
    assert!(sim(&m, &a, Direction::Under));
    let em = explicit(&a.graph);
    let noise = m.graph.var_id("noise").unwrap() as usize;
    let done = 1;
    assert!(em.states.iter().filter(|s| s.locs[0] == done).all(|s| s.vals[noise] == 0));
    assert!(em.states.iter().any(|s| s.locs[0] != done && s.vals[noise] == 1));
}

#[test]
fn random_specs_are_sound() {
    let mut conclusive = 0;
    for seed in 0..60 {
        let rm = random_model(seed, 0);
        let m = load(&rm.text);
        let em = explicit(&m.graph);
        let rs = random_spec(&rm, seed, 4);
        let s = spec(&rs.text);
        for d in [Direction::Under, Direction::Over] {
            let a = abstract_model(&m, &s.with_direction(d)).unwrap();
            assert!(sim(&m, &a, d), "seed {seed} {d:?}\n{}\n{}", rm.text, rs.text);
        }
        for q in &rs.queries {
            let v = check_with_abstraction(&m, &s, q, &Options::default()).unwrap();
            let concrete_q = match &rs.merge {
                Some(def) => q.replace("m0", &format!("({def})")),
                None => q.clone(),
            };
            let f = &textlang::load_queries(&m, &concrete_q).unwrap()[0].formula;
            let truth = checker::oracle_check(&m.graph, &em, f, EgMode::Maximal).unwrap();
            match v.outcome {
                Outcome::True => assert!(truth, "seed {seed}: {q}\n{}", rs.text),
                Outcome::False => assert!(!truth, "seed {seed}: {q}\n{}", rs.text),
                Outcome::Inconclusive => continue,
            }
            conclusive += 1;
        }
    }
    assert!(conclusive > 50, "only {conclusive} conclusive verdicts");
}

#[test]
fn universal_guards_in_an_under_model_break_containment() {
    // Mutation: an over (must) model presented as an under model.
    let mut caught = 0;
    for seed in 0..60 {
        let rm = random_model(seed, 0);
        let m = load(&rm.text);
        let rs = random_spec(&rm, seed, 0);
        let over = abstract_model(&m, &spec(&rs.text).with_direction(Direction::Over)).unwrap();
        let h = |s: &_| project(&m.graph, &over.graph, s);
        let r = simulation_check(&explicit(&m.graph), &explicit(&over.graph), &h, Direction::Under).unwrap();
        if !r.holds {
            let w = r.witness.expect("witness");
            assert!(explicit(&m.graph).index_of(&w.from).is_some());
            caught += 1;
        }
    }
    assert!(caught > 10, "mutation caught only {caught} times");
}
