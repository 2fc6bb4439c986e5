use masgraph::abstraction::{
    abstract_model, check_with_abstraction, project, record_view, simulation_check, AbstractionSpec, Outcome,
};
use masgraph::checker::{self, EgMode, Options};
use masgraph::kernel::{Direction, ExplicitModel, GlobalState};
use masgraph::suite::{explicit, oracle_suite, round_trip};
use masgraph::textlang::{self, Model};
use masgraph::votecorpus::*;
use std::collections::HashSet;

fn cfg(s: &str) -> Config {
    s.parse().unwrap()
}

fn holds(m: &Model, em: &ExplicitModel, q: &str) -> bool {
    let f = &textlang::load_queries(m, q).unwrap_or_else(|e| panic!("{e}: {q}"))[0].formula;
    checker::oracle_check(&m.graph, em, f, EgMode::Maximal).unwrap()
}

#[test]
fn property_strings() {
    let c = cfg("1,1,1,1");
    assert_eq!(Property::Bstuff.query(&c).unwrap(), "A[] (b_recv<=ep_sent)");
    assert_eq!(
        Property::MoblockOverover { office: -1, cand: 1 }.query(&c).unwrap(),
        "E[] forall(i:v_t)(Time.end and vlist[i].mo_addr==-1 and vpref[i]==1 imply recorded_link[i]!=1)"
    );
    assert_eq!(
        Property::Valvote { voter: 1, cand: 1 }.query(&c).unwrap(),
        "A[] (Time.end and (Voter(1).sent_renv or Voter(1).passed_renv) imply recorded_link[1]==Voter(1).pref_cand)"
    );
    let m = load(&c, &DeviationSet::honest()).unwrap();
    for p in [
        Property::Bstuff,
        Property::Valvote { voter: 1, cand: 1 },
        Property::MoblockUnder { office: -1, cand: 1 },
        Property::MoblockOverover { office: -1, cand: 1 },
    ] {
        property(&p, &c).unwrap();
        textlang::load_queries(&m, &p.query(&c).unwrap()).unwrap();
    }
    for bad in [
        Property::Valvote { voter: 2, cand: 1 },
        Property::Valvote { voter: 1, cand: 0 },
        Property::MoblockUnder { office: -2, cand: 1 },
        Property::MoblockUnder { office: 1, cand: 1 },
    ] {
        assert!(matches!(bad.query(&c), Err(VoteError::IndexOutOfRange { .. })), "{bad:?}");
    }
    assert!(matches!(Property::parse("nope", 1, 1, -1), Err(VoteError::Unknown { .. })));
}

#[test]
fn configs_parse_and_every_desk_model_typechecks() {
    assert_eq!(cfg(" 2,1, 4,3").to_string(), "2,1,4,3");
    assert!("1,1,1".parse::<Config>().is_err());
    assert!("1,0,1,1".parse::<Config>().is_err());
    assert_eq!(Config::up_to(2, 2, 2, 3).len(), 24);
    for c in Config::up_to(2, 2, 2, 3) {
        for dev in [DeviationSet::honest(), DeviationSet::all(), DeviationSet::voters().with_honest_voter(1)] {
            load(&c, &dev).unwrap_or_else(|e| panic!("{c}: {e}"));
        }
    }
    let bad = DeviationSet {
        mo_fixed_strategy: Some(FixedStrategy { cand: 1, office: -1 }),
        ..DeviationSet::honest()
    };
    assert!(matches!(load(&cfg("1,1,1,1"), &bad), Err(VoteError::InvalidConfig(_))));
    assert!(matches!(
        load(&cfg("1,1,1,1"), &DeviationSet::honest().with_fixed_strategy(2, -1)),
        Err(VoteError::IndexOutOfRange { .. })
    ));
}

#[test]
fn honest_models_count_and_tally_correctly() {
    for c in ["1,1,1,1", "1,2,2,2", "2,1,1,2", "2,2,1,1", "2,1,2,2"] {
        let c = cfg(c);
        let m = load(&c, &DeviationSet::honest()).unwrap();
        let em = explicit(&m.graph, 200_000).unwrap();
        assert!(holds(&m, &em, "A[] (b_recv<=ep_sent)"), "{c}");
        assert!(holds(&m, &em, "A[] b_recv == sum (i : v_t) (in_box[i] ? 1 : 0)"), "{c}");
        for i in 1..=c.nv {
            let q = Property::Valvote { voter: i, cand: 1 }.query(&c).unwrap();
            assert!(holds(&m, &em, &q), "{c}: {q}");
        }
        // Some run ends with every vote tallied.
        assert!(holds(&m, &em, "E<> Time.end and forall (i : v_t) (recorded_link[i] == vpref[i])"), "{c}");
        let (b, e) = (m.graph.var_id("b_recv").unwrap() as usize, m.graph.var_id("ep_sent").unwrap() as usize);
        for (i, out) in em.edges.iter().enumerate() {
            for (j, _) in out {
                let (s, t) = (&em.states[i], &em.states[*j]);
                assert!(t.vals[b] >= s.vals[b] && t.vals[e] >= s.vals[e], "counters decrease");
            }
        }
    }
}

fn reachable(c: &Config, dev: &DeviationSet) -> HashSet<GlobalState> {
    let m = load(c, dev).unwrap();
    explicit(&m.graph, 300_000).unwrap().states.into_iter().collect()
}

#[test]
fn deviations_only_add_behaviour() {
    let singles = [
        DeviationSet { voter_wrong_recipient: true, ..DeviationSet::honest() },
        DeviationSet { envelope_unsealed: true, ..DeviationSet::honest() },
        DeviationSet { mark_misplaced: true, ..DeviationSet::honest() },
        DeviationSet { card_unfilled_or_unsigned: true, ..DeviationSet::honest() },
        DeviationSet { vote_after_certificate: true, ..DeviationSet::honest() },
        DeviationSet::offices(),
    ];
    for c in ["1,2,2,2", "2,1,1,1"] {
        let c = cfg(c);
        let honest = reachable(&c, &DeviationSet::honest());
        let voters = reachable(&c, &DeviationSet::voters());
        let all = reachable(&c, &DeviationSet::all());
        assert!(voters.is_subset(&all) && voters.len() < all.len(), "{c}");
        for d in &singles {
            let r = reachable(&c, d);
            assert!(honest.is_subset(&r), "{c} {d:?}");
            assert!(r.is_subset(&all), "{c} {d:?}");
        }
        let restricted = reachable(&c, &DeviationSet::voters().with_honest_voter(1));
        assert!(honest.is_subset(&restricted) && restricted.is_subset(&voters));
        let fixed = reachable(&c, &DeviationSet::honest().with_fixed_strategy(1, -1));
        assert!(fixed.is_subset(&reachable(&c, &singles[5])));
    }
}

#[test]
fn fixed_strategy_is_deterministic() {
    let c = cfg("2,2,1,2");
    let m = load(&c, &DeviationSet::all().with_fixed_strategy(2, -1)).unwrap();
    let em = explicit(&m.graph, 2_000_000).unwrap();
    assert!(holds(
        &m,
        &em,
        "A[] forall (v : v_t) (ep[v].src == -1 imply ep[v].renv.benv.pkw_stamp == (vpref[v] != 2))"
    ));
    // The other office keeps its freedom.
    assert!(holds(&m, &em, "E<> exists (v : v_t) (ep[v].src == -2 and !ep[v].renv.benv.pkw_stamp)"));
    assert!(holds(&m, &em, &Property::MoblockUnder { office: -1, cand: 2 }.query(&c).unwrap()));
    assert!(!holds(&m, &em, &Property::MoblockUnder { office: -2, cand: 2 }.query(&c).unwrap()));
}

#[test]
fn small_budget_runs_out_on_a_large_config() {
    let c = cfg("2,1,4,3");
    let m = load(&c, &DeviationSet::voters()).unwrap();
    let f = &textlang::load_queries(&m, "A[] (b_recv<=ep_sent)").unwrap()[0].formula;
    let opts = Options {
        mem_budget: 16 << 20,
        ..Options::default()
    };
    let v = checker::check(&m.graph, f, &opts).unwrap();
    assert_eq!(v.status, checker::Status::MemOut);
    assert!(v.stats.states_stored > 100_000);
}

#[test]
fn invalid_merge_matches_the_abstract_listing() {
    let c = cfg("1,1,1,2");
    let m = load(&c, &DeviationSet::honest()).unwrap();
    let spec = abstraction_spec(&SpecName::InvalidMerge, &c).unwrap();
    let views = record_view(&m, &spec).unwrap();
    let fields = |name: &str| -> HashSet<String> {
        views
            .iter()
            .find(|v| v.name == name)
            .unwrap_or_else(|| panic!("{name} missing"))
            .fields
            .iter()
            .cloned()
            .collect()
    };
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<HashSet<_>>();
    assert_eq!(fields("Benv"), set(&["invalid", "cell"]));
    assert_eq!(fields("Renv"), set(&["dst", "invalid", "benv"]));
    assert_eq!(fields("ElectionPackage"), set(&["sent", "renv"]));
    abstract_model(&m, &spec).unwrap();
}

fn specs(c: &Config) -> Vec<(SpecName, Property, DeviationSet)> {
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
fn corpus_specs_are_sound() {
    for c in ["1,1,1,1", "1,1,1,3", "1,2,2,1", "2,1,1,1"] {
        let c = cfg(c);
        for (name, prop, dev) in specs(&c) {
            let m = load(&c, &dev).unwrap();
            let Ok(em) = explicit(&m.graph, 50_000) else { continue };
            let spec = abstraction_spec(&name, &c).unwrap();
            let dirs = match spec.direction() {
                Some(d) => vec![d],
                None => vec![Direction::Under, Direction::Over],
            };
            for d in dirs {
                let a = abstract_model(&m, &spec.with_direction(d)).unwrap();
                let h = |s: &_| project(&m.graph, &a.graph, s);
                let ea = explicit(&a.graph, 50_000).unwrap();
                let r = simulation_check(&em, &ea, &h, d).unwrap();
                assert!(r.holds, "{c} {name:?} {d:?}: {:?}", r.witness);
                if d == Direction::Under {
                    assert!(ea.len() <= em.len(), "{c} {name:?}");
                }
            }
            let q = prop.query(&c).unwrap();
            let v = check_with_abstraction(&m, &spec, &q, &Options::default()).unwrap();
            let truth = holds(&m, &em, &q);
            match v.outcome {
                Outcome::True => assert!(truth, "{c} {name:?}"),
                Outcome::False => assert!(!truth, "{c} {name:?}"),
                Outcome::Inconclusive => {}
            }
        }
    }
}

#[test]
fn abstraction_verdicts_on_a_small_config() {
    let c = cfg("2,1,1,2");
    let opts = Options::default();
    let run = |dev: DeviationSet, name: SpecName, p: Property| {
        let m = load(&c, &dev).unwrap();
        let s = abstraction_spec(&name, &c).unwrap();
        check_with_abstraction(&m, &s, &p.query(&c).unwrap(), &opts).unwrap()
    };
    let v = run(DeviationSet::voters(), SpecName::BstuffSpec, Property::Bstuff);
    assert_eq!(v.outcome, Outcome::True);
    let rewritten = textlang::print_queries(&textlang::parse_query("A[] (ballot_diff>=0)").unwrap());
    assert_eq!(v.evidence[0].query, rewritten.trim());
    let vv = (SpecName::ValvoteSpec { voter: 2, cand: 1 }, Property::Valvote { voter: 2, cand: 1 });
    assert_eq!(run(DeviationSet::voters(), vv.0, vv.1).outcome, Outcome::Inconclusive);
    assert_eq!(run(DeviationSet::voters().with_honest_voter(2), vv.0, vv.1).outcome, Outcome::True);
    let fixed = DeviationSet::honest().with_fixed_strategy(2, -1);
    let p = Property::MoblockUnder { office: -1, cand: 2 };
    assert_eq!(run(fixed, SpecName::MoblockSpec, p).outcome, Outcome::True);
}

#[test]
fn corpus_tree_round_trips() {
    let root = std::env::temp_dir().join(format!("masgraph-corpus-{}", std::process::id()));
    let cfgs = [cfg("1,1,1,1"), cfg("2,2,1,3")];
    let dirs = write_corpus(&root, &cfgs, &DeviationSet::voters()).unwrap();
    assert_eq!(dirs[1], root.join("2,2,1,3"));
    for (c, dir) in cfgs.iter().zip(&dirs) {
        let text = std::fs::read_to_string(dir.join("model.masg")).unwrap();
        round_trip(&text).unwrap();
        let m = textlang::load_model(&text).unwrap();
        let q = std::fs::read_to_string(dir.join("queries.q")).unwrap();
        assert_eq!(textlang::load_queries(&m, &q).unwrap().len(), 4);
        for s in ["bstuff_spec", "valvote_spec", "invalid_merge", "moblock_spec"] {
            let t = std::fs::read_to_string(dir.join(format!("{s}.abs"))).unwrap();
            let spec = AbstractionSpec::parse(&t).unwrap();
            abstract_model(&m, &spec).unwrap_or_else(|e| panic!("{c} {s}: {e}"));
        }
        if c.nv == 1 {
            assert!(oracle_suite(&m, &q, 50_000).unwrap() == 8);
        }
    }
    std::fs::remove_dir_all(&root).unwrap();
}
