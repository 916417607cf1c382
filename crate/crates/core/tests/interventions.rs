mod common;

use common::{assert_close, random_dbn, random_network, rng};
use polinfer::inference::{Evidence, VariableElimination};
use polinfer::intervention::{apply_hard_do, apply_prior_do, compose, Intervention, Scenario};
use polinfer::network::DiscreteNetwork;
use polinfer::pollinator::{self, default_utility};
use polinfer::temporal::{evaluate_scenario, slice_marginals, unroll, TwoSliceDbn};
use polinfer::Error;
use proptest::prelude::*;
use rand::Rng;

const EXACT: f64 = 1e-12;

fn marginal(net: &DiscreteNetwork, id: usize) -> Vec<f64> {
    VariableElimination::default()
        .posterior_marginal(net, net.variable(id).name(), &Evidence::new())
        .unwrap()
        .distribution
}

fn all_marginals(dbn: &TwoSliceDbn, scenario: &Scenario, horizon: usize) -> Vec<Vec<Vec<f64>>> {
    let unrolled = compose(scenario, &unroll(dbn, horizon).unwrap(), dbn).unwrap();
    let names: Vec<&str> = unrolled.base_variables().iter().map(String::as_str).collect();
    slice_marginals(&unrolled, &names)
        .unwrap()
        .into_iter()
        .map(|s| s.into_iter().map(|m| m.distribution).collect())
        .collect()
}

fn pollinator_dbn() -> TwoSliceDbn {
    pollinator::bundled_model().unwrap().dbn
}

fn random_fix(dbn: &TwoSliceDbn, r: &mut impl Rng, from: usize, to: usize) -> Intervention {
    let v = dbn.initial().variable(r.gen_range(0..dbn.len()));
    let s = &v.states()[r.gen_range(0..v.cardinality())];
    Intervention::fix(v.name(), s, from, to)
}

#[test]
fn pesticide_fix_does_not_move_weather() {
    let dbn = pollinator_dbn();
    let fixed = Scenario::new("p", vec![Intervention::fix(pollinator::PESTICIDE, "Low", 1, 10)]);
    let a = all_marginals(&dbn, &Scenario::new("b", vec![]), 10);
    let b = all_marginals(&dbn, &fixed, 10);
    let w = dbn.id(pollinator::WEATHER).unwrap();
    for t in 0..10 {
        assert_eq!(a[t][w], b[t][w]);
    }
}

#[test]
fn prior_replacement_on_a_non_root_is_rejected() {
    let dbn = pollinator_dbn();
    let s = Scenario::new(
        "bad",
        vec![Intervention::prior(pollinator::PESTICIDE, vec![0.5, 0.5], 1, 3)],
    );
    assert!(matches!(s.validate(&dbn, 10), Err(Error::InvalidIntervention { .. })));
    // Disease pressure has a lagged parent, so it is not a root either.
    let s = Scenario::new(
        "bad",
        vec![Intervention::prior(pollinator::DISEASE, vec![0.5, 0.5], 1, 3)],
    );
    assert!(s.validate(&dbn, 10).is_err());
}

#[test]
fn overlapping_windows_on_one_variable_conflict() {
    let dbn = pollinator_dbn();
    let s = Scenario::new(
        "clash",
        vec![
            Intervention::fix(pollinator::PESTICIDE, "Low", 1, 5),
            Intervention::fix(pollinator::PESTICIDE, "High", 5, 7),
        ],
    );
    assert!(matches!(
        s.validate(&dbn, 10),
        Err(Error::ConflictingInterventions { .. })
    ));
}

#[test]
fn windows_outside_the_horizon_are_rejected() {
    let dbn = pollinator_dbn();
    for (from, to) in [(0, 3), (4, 2), (9, 11)] {
        let s = Scenario::new("w", vec![Intervention::fix(pollinator::PESTICIDE, "Low", from, to)]);
        assert!(
            matches!(s.validate(&dbn, 10), Err(Error::WindowOutOfRange { .. })),
            "[{from}, {to}]"
        );
    }
}

#[test]
fn fixing_a_utility_target_pins_its_probability() {
    // Fixing honeybee abundance pins its utility share exactly.
    let dbn = pollinator_dbn();
    let s = Scenario::new("hb", vec![Intervention::fix(pollinator::HONEYBEE, "Good", 2, 2)]);
    let run = evaluate_scenario(&dbn, &s, 3, &default_utility()).unwrap();
    assert_eq!(run.timeline.records[1].good[0], 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hard_do_leaves_ancestors_unchanged(seed in any::<u64>()) {
        let net = random_network(seed, 10, 3);
        let mut r = rng(seed);
        let v = r.gen_range(0..net.len());
        let var = net.variable(v);
        let state = var.states()[r.gen_range(0..var.cardinality())].clone();
        let done = apply_hard_do(&net, var.name(), &state).unwrap();
        let ancestors = net.ancestors(&[v]);
        for a in (0..net.len()).filter(|&a| a != v && ancestors[a]) {
            assert_close(&marginal(&net, a), &marginal(&done, a), EXACT, "ancestor");
        }
        let m = marginal(&done, v);
        let s = var.state_index(&state).unwrap();
        let point = m.iter().enumerate().all(|(i, &p)| p == if i == s { 1.0 } else { 0.0 });
        prop_assert!(point, "{:?}", m);
    }

    #[test]
    fn point_mass_prior_equals_hard_do_on_roots(seed in any::<u64>()) {
        let net = random_network(seed, 10, 3);
        let roots: Vec<usize> = (0..net.len()).filter(|&v| net.is_root(v)).collect();
        let mut r = rng(seed);
        let v = roots[r.gen_range(0..roots.len())];
        let s = r.gen_range(0..net.cardinality(v));
        let mut prior = vec![0.0; net.cardinality(v)];
        prior[s] = 1.0;
        let name = net.variable(v).name();
        let a = apply_prior_do(&net, name, &prior).unwrap();
        let b = apply_hard_do(&net, name, &net.variable(v).states()[s]).unwrap();
        for u in 0..net.len() {
            assert_close(&marginal(&a, u), &marginal(&b, u), EXACT, "prior vs fix");
        }
    }

    #[test]
    fn slices_before_a_window_match_the_baseline(seed in any::<u64>()) {
        let dbn = random_dbn(seed, 5);
        let mut r = rng(seed);
        let horizon = 6;
        let from = r.gen_range(1..=horizon);
        let to = r.gen_range(from..=horizon);
        let s = Scenario::new("w", vec![random_fix(&dbn, &mut r, from, to)]);
        let base = all_marginals(&dbn, &Scenario::new("b", vec![]), horizon);
        let with = all_marginals(&dbn, &s, horizon);
        for t in 0..from - 1 {
            for (a, b) in base[t].iter().zip(&with[t]) {
                assert_close(a, b, EXACT, "pre-window slice");
            }
        }
    }

    #[test]
    fn disjoint_interventions_commute(seed in any::<u64>()) {
        let dbn = random_dbn(seed, 5);
        let mut r = rng(seed);
        let horizon = 5;
        let a = random_fix(&dbn, &mut r, 1, 3);
        let mut b = random_fix(&dbn, &mut r, 2, 5);
        if b.kind.variable() == a.kind.variable() {
            // Same variable: keep the windows apart instead.
            b = Intervention::fix(b.kind.variable(), &dbn.initial().variable(dbn.id(b.kind.variable()).unwrap()).states()[0], 4, 5);
        }
        let ab = all_marginals(&dbn, &Scenario::new("ab", vec![a.clone(), b.clone()]), horizon);
        let ba = all_marginals(&dbn, &Scenario::new("ba", vec![b, a]), horizon);
        for (x, y) in ab.iter().flatten().zip(ba.iter().flatten()) {
            assert_close(x, y, EXACT, "order of interventions");
        }
    }
}
