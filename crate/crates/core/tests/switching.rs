mod common;

use cellswitch::metrics::{approx_eq, slot_throughput};
use cellswitch::netmodel::cell_power;
use cellswitch::switching::{
    aao, es_switch, es_switch_capped, mlc_switch, run_policy, thesis_switch, thesis_switch_with,
    SwitchParams,
};
use cellswitch::{BsKind, Error, MacroCell, Policy, PolicyInput, ThesisMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n: usize) -> (common::Instance, MacroCell) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = common::random_instance(&mut rng, n);
    let cell = MacroCell::with_kinds(&inst.kinds).unwrap();
    (inst, cell)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn es_matches_brute_force(seed in any::<u64>(), n in 0usize..=10) {
        let (inst, cell) = instance(seed, n);
        let out = es_switch(&PolicyInput::new(&cell, &inst.loads, inst.mbs_load)).unwrap();
        let (off, power) = common::brute_force(&inst);
        prop_assert_eq!(out.decision.off_set(), &off[..]);
        prop_assert_eq!(out.power, power);
        prop_assert_eq!(out.stats.candidates_evaluated, 1u64 << n);
    }

    #[test]
    fn every_policy_is_feasible_and_conserves_traffic(seed in any::<u64>(), n in 0usize..=40, b_th in 1usize..=12) {
        let (inst, cell) = instance(seed, n);
        let input = PolicyInput::new(&cell, &inst.loads, inst.mbs_load);
        let params = SwitchParams { b_th, seed, ..SwitchParams::default() };
        let base = aao(&input).unwrap();
        let base_tp = slot_throughput(&cell, &inst.loads, inst.mbs_load, &base.decision).unwrap();
        for policy in Policy::ALL {
            if policy == Policy::Es && n > 12 {
                continue;
            }
            let out = run_policy(policy, &input, &params).unwrap();
            let oracle = common::evaluate(&inst, out.decision.off_set());
            prop_assert!(oracle.feasible);
            prop_assert!(out.decision.mbs_load_after() <= 1.0 + 1e-9);
            prop_assert!(approx_eq(out.power, oracle.power));
            prop_assert_eq!(cell_power(&cell, &inst.loads, inst.mbs_load, &out.decision).unwrap(), out.power);
            let tp = slot_throughput(&cell, &inst.loads, inst.mbs_load, &out.decision).unwrap();
            prop_assert!(approx_eq(tp, base_tp), "{} throughput {} vs {}", policy, tp, base_tp);
            prop_assert!(out.power <= base.power);
        }
    }

    #[test]
    fn sandwich_ordering(seed in any::<u64>(), n in 1usize..=12) {
        let (inst, cell) = instance(seed, n);
        let input = PolicyInput::new(&cell, &inst.loads, inst.mbs_load);
        let es = es_switch(&input).unwrap().power;
        let thesis = thesis_switch(&input, 12, seed).unwrap().power;
        let mlc = mlc_switch(&input, seed).unwrap().power;
        let all_on = aao(&input).unwrap().power;
        prop_assert!(es <= thesis && es <= mlc);
        prop_assert!(thesis <= all_on && mlc <= all_on);
        // ES switches something off exactly when that saves power.
        let (off, _) = common::brute_force(&inst);
        prop_assert_eq!(off.is_empty(), es == all_on);
    }

    #[test]
    fn policies_are_deterministic(seed in any::<u64>(), n in 0usize..=30) {
        let (inst, cell) = instance(seed, n);
        let input = PolicyInput::new(&cell, &inst.loads, inst.mbs_load);
        prop_assert_eq!(mlc_switch(&input, 3).unwrap(), mlc_switch(&input, 3).unwrap());
        prop_assert_eq!(thesis_switch(&input, 5, 3).unwrap(), thesis_switch(&input, 5, 3).unwrap());
    }

    #[test]
    fn thesis_counts_leaf_cluster_subsets(seed in any::<u64>(), n in 1usize..=60, b_th in 1usize..=12) {
        let (inst, cell) = instance(seed, n);
        let input = PolicyInput::new(&cell, &inst.loads, inst.mbs_load);
        let out = thesis_switch(&input, b_th, seed).unwrap();
        let c = out.stats.candidates_evaluated;
        // Leaf clusters partition the cells and none exceeds b_th.
        prop_assert!(c >= 2 * n as u64);
        prop_assert!(c <= n as u64 * (1u64 << b_th));
        if b_th == 1 {
            prop_assert_eq!(c, 2 * n as u64);
        }
    }

    #[test]
    fn thesis_equals_es_on_a_single_cluster(seed in any::<u64>(), n in 1usize..=10, load in 0.0..=1.0f64) {
        let (inst, cell) = instance(seed, n);
        let loads = vec![load; n];
        let input = PolicyInput::new(&cell, &loads, inst.mbs_load);
        let es = es_switch(&input).unwrap();
        let thesis = thesis_switch(&input, 12, seed).unwrap();
        prop_assert_eq!(&thesis.decision, &es.decision);
        prop_assert_eq!(thesis.stats.candidates_evaluated, 1u64 << n);
    }
}

#[test]
fn idle_cells_all_sleep() {
    let kinds: Vec<BsKind> = (0..10).map(|j| BsKind::SMALL[j % 4]).collect();
    let cell = MacroCell::with_kinds(&kinds).unwrap();
    let loads = vec![0.0; 10];
    let input = PolicyInput::new(&cell, &loads, 0.2);
    let all: Vec<usize> = (0..10).collect();
    assert_eq!(es_switch(&input).unwrap().decision.off_set(), &all[..]);
    assert_eq!(
        thesis_switch(&input, 12, 0).unwrap().decision.off_set(),
        &all[..]
    );
    assert_eq!(mlc_switch(&input, 0).unwrap().decision.off_set(), &all[..]);
}

#[test]
fn saturated_macro_keeps_everything_on() {
    let cell = MacroCell::with_kinds(&[BsKind::Rrh, BsKind::Micro, BsKind::Pico]).unwrap();
    let loads = [0.3, 0.6, 0.9];
    let input = PolicyInput::new(&cell, &loads, 1.0);
    for out in [
        es_switch(&input).unwrap(),
        thesis_switch(&input, 12, 1).unwrap(),
        mlc_switch(&input, 1).unwrap(),
    ] {
        assert_eq!(out.decision.n_off(), 0);
        assert_eq!(out.power, aao(&input).unwrap().power);
    }
}

#[test]
fn single_cluster_mode_never_beats_greedy() {
    for seed in 0..200 {
        let (inst, cell) = instance(seed, 24);
        let input = PolicyInput::new(&cell, &inst.loads, inst.mbs_load);
        let greedy = thesis_switch_with(&input, 6, seed, 10, ThesisMode::Greedy).unwrap();
        let single = thesis_switch_with(&input, 6, seed, 10, ThesisMode::SingleCluster).unwrap();
        assert!(greedy.power <= single.power, "seed {seed}");
    }
}

#[test]
fn exhaustive_search_has_a_cap() {
    let kinds = vec![BsKind::Femto; 25];
    let cell = MacroCell::with_kinds(&kinds).unwrap();
    let loads = vec![0.5; 25];
    let input = PolicyInput::new(&cell, &loads, 0.5);
    assert!(matches!(es_switch(&input), Err(Error::Usage(_))));
    assert!(matches!(es_switch_capped(&input, 10), Err(Error::Usage(_))));
    assert!(matches!(thesis_switch(&input, 0, 0), Err(Error::Usage(_))));
}
