use masgraph::kernel::{TransitionLabel, Ty, Domain};
use masgraph::textlang::{self, ast::*, LoadError, TypeErrorKind};

const WORKERS: &str = r#"
const int N = 2;
typedef int[1,N] id_t;
int[0,N] done;
chan go[id_t];
process Worker(const id_t id) {
    bool seen;
    state idle, busy;
    init idle;
    trans idle -> busy { sync go[id]?; assign done++, seen = true; };
}
process Boss {
    state s;
    init s;
    trans s -> s { select w : id_t; guard done < N; sync go[w]!; };
}
system Worker, Boss;
"#;

fn load(text: &str) -> textlang::Model {
    textlang::load_model(text).unwrap_or_else(|e| panic!("{e}"))
}

fn type_error(text: &str) -> TypeErrorKind {
    match textlang::load_model(text) {
        Err(LoadError::Type(e)) => e.kind,
        Err(LoadError::Parse(e)) => panic!("unexpected syntax error {e}"),
        Ok(_) => panic!("model accepted"),
    }
}

#[test]
fn instances_and_handshakes() {
    let m = load(WORKERS);
    let g = &m.graph;
    let names: Vec<_> = g.agents.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["Worker(1)", "Worker(2)", "Boss"]);
    assert_eq!(g.slots.len(), 3);
    assert_eq!(g.slots[1].name, "Worker(1).seen");
    let s0 = g.initial_state().unwrap();
    let en = g.enabled(&s0).unwrap();
    assert_eq!(en.len(), 2);
    assert!(en.iter().all(|t| matches!(t, TransitionLabel::Handshake { .. })));
    let s1 = g.step(&s0, &en[0]).unwrap();
    assert_eq!(s1.vals, vec![1, 1, 0]);
    assert_eq!(s1.locs, vec![1, 0, 0]);
}

#[test]
fn empty_document() {
    let m = load("");
    assert!(m.graph.agents.is_empty());
    assert_eq!(textlang::parse_model("").unwrap(), ModelDocument::default());
}

#[test]
fn round_trip() {
    let doc = textlang::parse_model(WORKERS).unwrap();
    let printed = textlang::pretty_print(&doc);
    let again = textlang::parse_model(&printed).unwrap();
    assert_eq!(doc, again, "{printed}");
}

#[test]
fn listing_types() {
    let m = load(
        "const int NC = 3;\ntypedef int[1,NC] c_t;\ntypedef struct { bool sealed; bool pkw_stamp; bool dec_stamp; int[0,2] cell[c_t]; } Benv;\nBenv b;",
    );
    let t = &m.graph.vars[0].ty;
    let (_, cell) = t.field("cell").unwrap();
    assert_eq!(
        *cell,
        Ty::Array {
            index: Domain::new(1, 3),
            elem: Box::new(Ty::Int(Domain::new(0, 2)))
        }
    );
}

#[test]
fn negative_programs() {
    assert_eq!(
        type_error("int x; bool f() { x = 1; return true; } process P { state a; init a; trans a -> a { guard f(); }; } system P;"),
        TypeErrorKind::SideEffectInGuard
    );
    assert_eq!(
        type_error("typedef int[-3,2] addr_t; typedef int[-3,-2] mo_t; typedef int[-2,-1] ec_t; typedef int[1,2] v_t; partition addr_t = mo_t | ec_t | v_t;"),
        TypeErrorKind::Type
    );
    assert_eq!(
        type_error("typedef int[1,3] c_t; typedef int[0,3] c_tx; c_t x; void f() { x = 0; }"),
        TypeErrorKind::Type
    );
}
