//! Semantic matching between proposition lists.
//!
//! A [`Matcher`] answers two questions: which pool items express the same
//! meaning as a query item (coverage), and which state items contradict an
//! effect. The LLM judge lives in the `chainworld` crate; the deterministic
//! kinds here are the test oracles.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Proposition, Result};

/// What is being matched against what. LLM-backed matchers pick their prompt
/// from this; deterministic matchers ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoverageTask {
    /// Preconditions of one action against the current world state.
    PreconditionsInState,
    /// Preconditions against a pool of effects (plan-level chaining, initial
    /// state derivation, search-space analysis).
    PreconditionsInEffects,
    /// Effects against a pool of preconditions (plan-level chaining).
    EffectsInPreconditions,
}

/// A state item judged to contradict an effect item, by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Contradiction {
    pub state: usize,
    pub effect: usize,
}

pub trait Matcher {
    /// For every query, the indices (ascending) of pool items that express the
    /// same meaning. Several queries may match the same pool item.
    fn matches(
        &self,
        task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<Vec<usize>>>;

    /// Indices of queries with no match in the pool.
    fn uncovered(
        &self,
        task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<usize>> {
        let matches = self.matches(task, queries, pool)?;
        Ok(matches
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_empty())
            .map(|(i, _)| i)
            .collect())
    }

    /// Every (state item, effect item) pair that contradicts, sorted.
    fn contradictions(
        &self,
        effects: &[Proposition],
        state: &[Proposition],
    ) -> Result<Vec<Contradiction>>;
}

impl<M: Matcher + ?Sized> Matcher for &M {
    fn matches(
        &self,
        task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<Vec<usize>>> {
        (**self).matches(task, queries, pool)
    }

    fn uncovered(
        &self,
        task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<usize>> {
        (**self).uncovered(task, queries, pool)
    }

    fn contradictions(
        &self,
        effects: &[Proposition],
        state: &[Proposition],
    ) -> Result<Vec<Contradiction>> {
        (**self).contradictions(effects, state)
    }
}

impl<M: Matcher + ?Sized> Matcher for Box<M> {
    fn matches(
        &self,
        task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<Vec<usize>>> {
        (**self).matches(task, queries, pool)
    }

    fn uncovered(
        &self,
        task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<usize>> {
        (**self).uncovered(task, queries, pool)
    }

    fn contradictions(
        &self,
        effects: &[Proposition],
        state: &[Proposition],
    ) -> Result<Vec<Contradiction>> {
        (**self).contradictions(effects, state)
    }
}

fn index_pool(pool: &[Proposition]) -> BTreeMap<&str, Vec<usize>> {
    let mut index: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in pool.iter().enumerate() {
        index.entry(item.as_str()).or_default().push(i);
    }
    index
}

/// Equivalent iff normalized strings are equal; never contradicts.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatcher;

impl Matcher for ExactMatcher {
    fn matches(
        &self,
        _task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<Vec<usize>>> {
        let index = index_pool(pool);
        Ok(queries
            .iter()
            .map(|q| index.get(q.as_str()).cloned().unwrap_or_default())
            .collect())
    }

    fn contradictions(&self, _: &[Proposition], _: &[Proposition]) -> Result<Vec<Contradiction>> {
        Ok(Vec::new())
    }
}

/// File form of a [`FixtureMatcher`]: lists of unordered pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureTable {
    #[serde(default)]
    pub equivalent: Vec<(Proposition, Proposition)>,
    #[serde(default)]
    pub contradicts: Vec<(Proposition, Proposition)>,
}

/// Explicit equivalence and contradiction tables.
///
/// Both relations are symmetric. Equivalence also includes normalized
/// equality, so the fixture only needs to list paraphrases.
#[derive(Debug, Clone, Default)]
pub struct FixtureMatcher {
    equivalent: BTreeSet<(Proposition, Proposition)>,
    contradicts: BTreeSet<(Proposition, Proposition)>,
}

fn ordered(a: &Proposition, b: &Proposition) -> (Proposition, Proposition) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl FixtureMatcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_table(table: &FixtureTable) -> Self {
        let mut m = Self::new();
        for (a, b) in &table.equivalent {
            m.add_equivalent(a, b);
        }
        for (a, b) in &table.contradicts {
            m.add_contradiction(a, b);
        }
        m
    }

    pub fn add_equivalent(&mut self, a: &Proposition, b: &Proposition) -> &mut Self {
        self.equivalent.insert(ordered(a, b));
        self
    }

    pub fn add_contradiction(&mut self, a: &Proposition, b: &Proposition) -> &mut Self {
        self.contradicts.insert(ordered(a, b));
        self
    }

    pub fn is_equivalent(&self, a: &Proposition, b: &Proposition) -> bool {
        a == b || self.equivalent.contains(&ordered(a, b))
    }

    pub fn is_contradiction(&self, a: &Proposition, b: &Proposition) -> bool {
        self.contradicts.contains(&ordered(a, b))
    }

    pub fn to_table(&self) -> FixtureTable {
        FixtureTable {
            equivalent: self.equivalent.iter().cloned().collect(),
            contradicts: self.contradicts.iter().cloned().collect(),
        }
    }
}

impl Matcher for FixtureMatcher {
    fn matches(
        &self,
        _task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<Vec<usize>>> {
        Ok(queries
            .iter()
            .map(|q| {
                pool.iter()
                    .enumerate()
                    .filter(|(_, item)| self.is_equivalent(q, item))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect())
    }

    fn contradictions(
        &self,
        effects: &[Proposition],
        state: &[Proposition],
    ) -> Result<Vec<Contradiction>> {
        let mut out = Vec::new();
        for (s, item) in state.iter().enumerate() {
            for (e, effect) in effects.iter().enumerate() {
                if self.is_contradiction(item, effect) {
                    out.push(Contradiction {
                        state: s,
                        effect: e,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Which matcher a run uses; resolved to an instance by the caller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MatcherKind {
    LlmJudge,
    ExactNormalized,
    FixtureTable { path: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(items: &[&str]) -> Vec<Proposition> {
        items.iter().map(|s| Proposition::new(s).unwrap()).collect()
    }

    #[test]
    fn exact_matches_all_occurrences() {
        let m = ExactMatcher
            .matches(
                CoverageTask::PreconditionsInEffects,
                &ps(&["a", "b", "z"]),
                &ps(&["a", "b", "a"]),
            )
            .unwrap();
        assert_eq!(m, vec![vec![0, 2], vec![1], vec![]]);
        let unc = ExactMatcher
            .uncovered(
                CoverageTask::PreconditionsInState,
                &ps(&["a", "z"]),
                &ps(&["a"]),
            )
            .unwrap();
        assert_eq!(unc, vec![1]);
        assert!(ExactMatcher
            .contradictions(&ps(&["a"]), &ps(&["a"]))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn fixture_is_symmetric() {
        let [cold, boiling, hot] = [
            Proposition::new("water is cold").unwrap(),
            Proposition::new("water is boiling").unwrap(),
            Proposition::new("the water is hot").unwrap(),
        ];
        let mut m = FixtureMatcher::new();
        m.add_contradiction(&boiling, &cold)
            .add_equivalent(&hot, &boiling);
        assert!(m.is_contradiction(&cold, &boiling));
        assert!(m.is_equivalent(&boiling, &hot));
        let c = m
            .contradictions(
                core::slice::from_ref(&boiling),
                &[hot.clone(), cold.clone()],
            )
            .unwrap();
        assert_eq!(
            c,
            vec![Contradiction {
                state: 1,
                effect: 0
            }]
        );
        let round = FixtureMatcher::from_table(&m.to_table());
        assert!(round.is_equivalent(&hot, &boiling));
    }
}
