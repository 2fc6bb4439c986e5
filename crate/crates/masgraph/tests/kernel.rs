use masgraph::randgen::random_model;
use masgraph::suite::{explicit, kernel_invariants, permutation_symmetric, permute_system};
use masgraph::textlang;
use masgraph::votecorpus::{self, Config, DeviationSet};
use proptest::prelude::*;

fn load(text: &str) -> textlang::Model {
    textlang::load_model(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_models_are_serial_and_replayable(seed in 0u64..100_000) {
        let rm = random_model(seed, 0);
        let m = load(&rm.text);
        let em = explicit(&m.graph, 50_000).unwrap();
        kernel_invariants(&m.graph, &em).unwrap();
    }

    #[test]
    fn agent_order_does_not_matter(seed in 0u64..100_000, rot in 0usize..4) {
        let rm = random_model(seed, 0);
        let n = rm.procs.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(rot % n);
        perm.reverse();
        let a = load(&rm.text);
        let b = load(&permute_system(&rm.text, &perm).unwrap());
        permutation_symmetric(&a.graph, &b.graph, 50_000).unwrap();
    }
}

#[test]
fn corpus_models_satisfy_kernel_invariants() {
    for (cfg, dev) in [
        ("1,1,1,1", DeviationSet::all()),
        ("1,2,2,2", DeviationSet::voters()),
        ("2,1,1,1", DeviationSet::honest().with_fixed_strategy(1, -1)),
    ] {
        let cfg: Config = cfg.parse().unwrap();
        let m = votecorpus::load(&cfg, &dev).unwrap();
        let em = explicit(&m.graph, 50_000).unwrap();
        kernel_invariants(&m.graph, &em).unwrap_or_else(|e| panic!("{cfg}: {e}"));
    }
}

#[test]
fn corpus_handshakes_are_symmetric_under_reordering() {
    let cfg: Config = "2,1,1,1".parse().unwrap();
    let text = votecorpus::model_text(&cfg, &DeviationSet::voters()).unwrap();
    let a = load(&text);
    let b = load(&permute_system(&text, &[3, 2, 1, 0]).unwrap());
    assert_eq!(b.graph.agents[0].name, "Time");
    permutation_symmetric(&a.graph, &b.graph, 100_000).unwrap();
}
