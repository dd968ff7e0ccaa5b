//! Oracle equivalence and invariant checks over randomized inputs.

use chainworld_core::chaining::{chaining_report, ScoreRule};
use chainworld_core::matcher::{ExactMatcher, FixtureMatcher};
use chainworld_core::search::{satisfiability_of, summarize, PooledEffect};
use chainworld_core::world_model::{check_preconditions, derive_state_trace, TransitionResult};
use chainworld_core::{apply_delta, ActionPlan, ActionStep, Proposition, Provenance};
use proptest::prelude::*;

fn p(s: &str) -> Proposition {
    Proposition::new(s).unwrap()
}

const VOCAB: [&str; 8] = [
    "water is boiling",
    "pot is on the stove",
    "stove is on",
    "pasta is cooked",
    "onions are diced",
    "oil is hot",
    "pan is greased",
    "sauce is simmering",
];

fn arb_items(max: usize) -> impl Strategy<Value = Vec<Proposition>> {
    proptest::collection::vec(0..VOCAB.len(), 1..=max)
        .prop_map(|ix| ix.into_iter().map(|i| p(VOCAB[i])).collect())
}

fn arb_plan() -> impl Strategy<Value = ActionPlan> {
    proptest::collection::vec((arb_items(4), arb_items(3)), 1..7).prop_map(|steps| {
        let steps = steps
            .into_iter()
            .enumerate()
            .map(|(k, (pre, eff))| {
                ActionStep::annotated(format!("s{k}"), format!("step {k}"), pre, eff).unwrap()
            })
            .collect();
        ActionPlan::new("rand", "random", steps, Provenance::raw()).unwrap()
    })
}

/// All-pairs string comparison, no indexing.
fn brute_force_uncovered(queries: &[Proposition], pool: &[Proposition]) -> Vec<Proposition> {
    let mut out = Vec::new();
    for q in queries {
        let mut covered = false;
        for item in pool {
            if q.as_str() == item.as_str() {
                covered = true;
            }
        }
        if !covered {
            out.push(q.clone());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn chaining_report_equals_all_pairs(plan in arb_plan()) {
        let report = chaining_report(&plan, &ExactMatcher, ScoreRule::Mean).unwrap();
        let pre = plan.pooled_preconditions();
        let eff = plan.pooled_effects();
        let unc_pre = brute_force_uncovered(&pre, &eff);
        let unc_eff = brute_force_uncovered(&eff, &pre);
        prop_assert_eq!(&report.uncovered_preconditions, &unc_pre);
        prop_assert_eq!(&report.uncovered_effects, &unc_eff);
        prop_assert_eq!(report.pct_uncovered_pre, unc_pre.len() as f64 / pre.len() as f64);
        prop_assert_eq!(report.pct_uncovered_eff, unc_eff.len() as f64 / eff.len() as f64);
        prop_assert_eq!(report.score, (report.pct_uncovered_pre + report.pct_uncovered_eff) / 2.0);
        prop_assert!((0.0..=1.0).contains(&report.score));
    }
}

/// Plans where every precondition is either fresh or an earlier step's
/// effect, so gold replay must succeed.
fn arb_chained_plan() -> impl Strategy<Value = ActionPlan> {
    proptest::collection::vec(
        (
            proptest::collection::vec((any::<bool>(), 0usize..100), 1..4),
            1usize..3,
        ),
        1..7,
    )
    .prop_map(|spec| {
        let mut earlier: Vec<Proposition> = Vec::new();
        let mut steps = Vec::new();
        for (k, (pre_spec, n_eff)) in spec.into_iter().enumerate() {
            let pre: Vec<Proposition> = pre_spec
                .into_iter()
                .enumerate()
                .map(|(i, (reuse, pick))| {
                    if reuse && !earlier.is_empty() {
                        earlier[pick % earlier.len()].clone()
                    } else {
                        p(&format!("initial fact {k} {i}"))
                    }
                })
                .collect();
            let eff: Vec<Proposition> = (0..n_eff).map(|i| p(&format!("effect {k} {i}"))).collect();
            earlier.extend(eff.iter().cloned());
            steps.push(
                ActionStep::annotated(format!("s{k}"), format!("act {k}"), pre, eff).unwrap(),
            );
        }
        ActionPlan::new("chained", "t", steps, Provenance::raw()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gold_plans_replay(plan in arb_chained_plan()) {
        let trace = derive_state_trace(&plan, &ExactMatcher).unwrap();
        prop_assert_eq!(trace.states.len(), plan.steps.len() + 1);
        for (k, step) in plan.steps.iter().enumerate() {
            let verdict = check_preconditions(&ExactMatcher, &step.preconditions, &trace.states[k]).unwrap();
            prop_assert!(verdict.valid, "step {} failed: {:?}", k, verdict.unmatched);
            // no contradictions under the exact matcher: states only grow
            prop_assert!(trace.states[k].is_subset(&trace.states[k + 1]));
            prop_assert_eq!(&apply_delta(&trace.states[k], &trace.deltas[k]).state, &trace.states[k + 1]);
        }
    }

    #[test]
    fn contradiction_deltas_are_consistent(plan in arb_chained_plan(), pairs in proptest::collection::vec((0usize..20, 0usize..20), 0..6)) {
        // random contradictions between initial facts and effects
        let pre = plan.pooled_preconditions();
        let eff = plan.pooled_effects();
        let mut m = FixtureMatcher::new();
        for (a, b) in pairs {
            m.add_contradiction(&pre[a % pre.len()], &eff[b % eff.len()]);
        }
        let trace = derive_state_trace(&plan, &m).unwrap();
        for k in 0..plan.steps.len() {
            let step = &plan.steps[k];
            let result: TransitionResult =
                chainworld_core::world_model::apply_effects(&m, &trace.states[k], &step.effects).unwrap();
            let mut contradicted: Vec<_> = result.contradictions.iter().map(|(s, _)| s.clone()).collect();
            contradicted.dedup();
            let mut deletions = result.delta.deletions().to_vec();
            deletions.sort();
            contradicted.sort();
            contradicted.dedup();
            prop_assert_eq!(deletions, contradicted);
            prop_assert_eq!(&result.new_state, &apply_delta(&trace.states[k], &result.delta).state);
            prop_assert_eq!(&result.new_state, &trace.states[k + 1]);
        }
    }
}

fn pool_of(items: &[&str]) -> Vec<PooledEffect> {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| PooledEffect {
            effect: p(s),
            plan_id: format!("plan{}", i / 3),
            step_id: format!("s{}", i % 3),
        })
        .collect()
}

/// Counts every tuple (pool index per precondition) where each index matches.
fn enumerate_ways(pre: &[Proposition], pool: &[PooledEffect], m: &FixtureMatcher) -> u64 {
    fn go(i: usize, pre: &[Proposition], pool: &[PooledEffect], m: &FixtureMatcher) -> u64 {
        if i == pre.len() {
            return 1;
        }
        let mut total = 0;
        for item in pool {
            if m.is_equivalent(&pre[i], &item.effect) {
                total += go(i + 1, pre, pool, m);
            }
        }
        total
    }
    go(0, pre, pool, m)
}

#[test]
fn ways_equal_enumeration_on_fixtures() {
    let mut m = FixtureMatcher::new();
    m.add_equivalent(&p("a"), &p("a prime"));
    m.add_equivalent(&p("b"), &p("b prime"));
    m.add_equivalent(&p("b"), &p("b second"));
    let pool = pool_of(&["a", "a prime", "b", "b prime", "b second", "c"]);
    let pre = vec![p("a"), p("b")];
    let r = satisfiability_of("act", pre.clone(), &pool, &m).unwrap();
    assert_eq!(r.per_precondition_match_counts, [2, 3]);
    assert_eq!(r.ways, 6);
    assert_eq!(r.ways, enumerate_ways(&pre, &pool, &m));

    let r = satisfiability_of("act", vec![], &pool, &m).unwrap();
    assert!(r.satisfiable);
    assert_eq!(r.ways, 1);
    assert_eq!(r.ways, enumerate_ways(&[], &pool, &m));
}

const POOL_VOCAB: [&str; 6] = ["a", "b", "c", "d", "a prime", "b prime"];

fn fixture() -> FixtureMatcher {
    let mut m = FixtureMatcher::new();
    m.add_equivalent(&p("a"), &p("a prime"))
        .add_equivalent(&p("b"), &p("b prime"));
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ways_match_enumeration(
        pre in proptest::collection::vec(0..POOL_VOCAB.len(), 0..4),
        pool in proptest::collection::vec(0..POOL_VOCAB.len(), 0..8),
    ) {
        let m = fixture();
        let pre: Vec<_> = pre.into_iter().map(|i| p(POOL_VOCAB[i])).collect();
        let names: Vec<&str> = pool.iter().map(|&i| POOL_VOCAB[i]).collect();
        let pool = pool_of(&names);
        let r = satisfiability_of("act", pre.clone(), &pool, &m).unwrap();
        prop_assert_eq!(r.ways, enumerate_ways(&pre, &pool, &m));
        prop_assert_eq!(r.satisfiable, r.per_precondition_match_counts.iter().all(|&c| c >= 1));
    }

    #[test]
    fn pool_extension_is_monotone(
        actions in proptest::collection::vec(proptest::collection::vec(0..POOL_VOCAB.len(), 0..3), 1..5),
        base in proptest::collection::vec(0..POOL_VOCAB.len(), 0..5),
        extra in proptest::collection::vec(0..POOL_VOCAB.len(), 1..4),
    ) {
        let m = fixture();
        let base_names: Vec<&str> = base.iter().map(|&i| POOL_VOCAB[i]).collect();
        let all_names: Vec<&str> = base.iter().chain(&extra).map(|&i| POOL_VOCAB[i]).collect();
        let small = pool_of(&base_names);
        let big = pool_of(&all_names);
        let mut before = Vec::new();
        let mut after = Vec::new();
        for a in &actions {
            let pre: Vec<_> = a.iter().map(|&i| p(POOL_VOCAB[i])).collect();
            let r0 = satisfiability_of("act", pre.clone(), &small, &m).unwrap();
            let r1 = satisfiability_of("act", pre, &big, &m).unwrap();
            for (c0, c1) in r0.per_precondition_match_counts.iter().zip(&r1.per_precondition_match_counts) {
                prop_assert!(c1 >= c0);
            }
            prop_assert!(r1.ways >= r0.ways);
            before.push(r0);
            after.push(r1);
        }
        prop_assert!(summarize(&after).pct_satisfiable >= summarize(&before).pct_satisfiable);
    }
}
