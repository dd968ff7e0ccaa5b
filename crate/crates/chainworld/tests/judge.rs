mod support;

use chainworld::io::read_corpus;
use chainworld::judge::{
    llm_chaining_report, parse_contradiction_reply, parse_validity_reply, LlmMatcher,
};
use chainworld::templates;
use chainworld_core::chaining::{chaining_report, ScoreRule};
use chainworld_core::matcher::{Contradiction, CoverageTask, ExactMatcher, Matcher};
use chainworld_core::world_model::derive_state_trace;
use chainworld_core::{Error as CoreError, Proposition};
use support::{fixture, gateway_with, toy_gateway};

fn p(s: &str) -> Proposition {
    Proposition::new(s).unwrap()
}

#[test]
fn llm_judge_agrees_with_exact_matching_on_the_toy_model() {
    let gateway = toy_gateway();
    let judge = LlmMatcher::new(&gateway);
    for plan in read_corpus(&fixture("toy_corpus.jsonl")).unwrap() {
        assert_eq!(
            derive_state_trace(&plan, &judge).unwrap(),
            derive_state_trace(&plan, &ExactMatcher).unwrap(),
            "{}",
            plan.id
        );
        for rule in [ScoreRule::Mean, ScoreRule::Max] {
            assert_eq!(
                llm_chaining_report(&gateway, &plan, rule).unwrap(),
                chaining_report(&plan, &ExactMatcher, rule).unwrap()
            );
        }
    }
}

#[test]
fn validity_rows_and_verdict() {
    assert_eq!(
        parse_validity_reply("1: 2\n2: 1, 2\nTRUE", 2, 2).unwrap(),
        [vec![1], vec![0, 1]]
    );
    assert_eq!(
        parse_validity_reply("1: none\n2: 1\nFALSE.", 2, 1).unwrap(),
        [vec![], vec![0]]
    );
    // The verdict must agree with the rows.
    assert!(parse_validity_reply("1: none\nTRUE", 1, 1).is_err());
    assert!(parse_validity_reply("1: 1", 1, 1).is_err());
    assert!(parse_validity_reply("1: 3\nTRUE", 1, 2).is_err());
    assert!(parse_validity_reply("1: 1\n1: 1\nTRUE", 1, 1).is_err());
}

#[test]
fn contradiction_rows() {
    let c = parse_contradiction_reply("effect 1: none\neffect 2: 3, 1", 2, 3).unwrap();
    assert_eq!(
        c,
        [
            Contradiction {
                state: 0,
                effect: 1
            },
            Contradiction {
                state: 2,
                effect: 1
            }
        ]
    );
    assert!(parse_contradiction_reply("1: none\n2: none", 2, 3).is_err());
}

#[test]
fn llm_matcher_sends_numbered_lists() {
    let gateway = gateway_with(|t, b| {
        assert_eq!(t, templates::VALID_ACTION);
        assert_eq!(b["inferred_action_preconditions"], "1. the stove is on");
        assert_eq!(b["current_world_state"], "1. pot is empty\n2. stove is on");
        "1: 2\nTRUE".into()
    });
    let judge = LlmMatcher::new(&gateway);
    let m = judge
        .matches(
            CoverageTask::PreconditionsInState,
            &[p("the stove is on")],
            &[p("pot is empty"), p("stove is on")],
        )
        .unwrap();
    assert_eq!(m, [vec![1]]);
}

#[test]
fn malformed_judgments_are_errors() {
    let gateway = gateway_with(|_, _| "I am not sure".into());
    let judge = LlmMatcher::new(&gateway);
    let err = judge
        .matches(CoverageTask::PreconditionsInEffects, &[p("a")], &[p("b")])
        .unwrap_err();
    assert!(matches!(err, CoreError::MalformedJudgment(_)), "{err}");
}
