//! Marginal contribution network games.
//!
//! A game over `m` agents is a list of weighted rules. Each rule carries a
//! set of required agents and a set of banned agents; a coalition satisfies
//! the rule when it contains every required agent and none of the banned
//! ones. The value of a coalition is the sum of the weights of the rules it
//! satisfies.
//!
//! Agents are 0-indexed and sets of agents are single 64-bit words, so games
//! are limited to [`MAX_AGENTS`] agents.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_AGENTS: usize = 64;

/// A set of agents stored as a bitmask; bit `i` is agent `i`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentSet(u64);

/// A coalition is simply the set of its members.
pub type Coalition = AgentSet;

impl AgentSet {
    pub const EMPTY: AgentSet = AgentSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        AgentSet(bits)
    }

    /// All agents `0..m`.
    pub fn full(m: usize) -> Self {
        AgentSet(full_mask(m))
    }

    pub fn from_agents<I: IntoIterator<Item = usize>>(agents: I) -> Self {
        agents.into_iter().fold(AgentSet::EMPTY, |s, a| s.with(a))
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, agent: usize) -> bool {
        agent < MAX_AGENTS && self.0 >> agent & 1 == 1
    }

    #[must_use]
    pub fn with(self, agent: usize) -> Self {
        AgentSet(self.0 | 1 << agent)
    }

    #[must_use]
    pub fn without(self, agent: usize) -> Self {
        AgentSet(self.0 & !(1 << agent))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: AgentSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: AgentSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let a = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(a)
        })
    }
}

impl fmt::Debug for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub(crate) fn full_mask(m: usize) -> u64 {
    if m >= 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rule {
    pub req: AgentSet,
    pub ban: AgentSet,
    pub weight: f64,
}

impl Rule {
    pub fn new(req: AgentSet, ban: AgentSet, weight: f64) -> Self {
        Rule { req, ban, weight }
    }

    /// Whether the coalition contains every required agent and no banned one.
    #[inline]
    pub fn matches(&self, c: Coalition) -> bool {
        self.req.is_subset(c) && self.ban.is_disjoint(c)
    }

    /// Agents mentioned by the rule at all.
    pub fn participants(&self) -> AgentSet {
        AgentSet(self.req.0 | self.ban.0)
    }
}

/// A single broken invariant found by [`validate_ruleset`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ReqBanOverlap { rule: usize, agents: AgentSet },
    AgentOutOfRange { rule: usize, agents: AgentSet },
    NonFiniteWeight { rule: usize },
    TotalWeightMismatch { cached: f64, actual: f64 },
    AgentCount(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ReqBanOverlap { rule, agents } => {
                write!(f, "rule {rule}: agents {agents:?} both required and banned")
            }
            Violation::AgentOutOfRange { rule, agents } => {
                write!(f, "rule {rule}: agents {agents:?} outside the agent range")
            }
            Violation::NonFiniteWeight { rule } => write!(f, "rule {rule}: weight is not finite"),
            Violation::TotalWeightMismatch { cached, actual } => {
                write!(f, "cached total weight {cached} != rule weight sum {actual}")
            }
            Violation::AgentCount(m) => write!(f, "agent count {m} outside 1..=64"),
        }
    }
}

/// A game: `m` agents and an ordered list of rules.
///
/// Rule order never affects values; it only fixes the indices reported by
/// [`RuleSet::changed_rules`].
#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    m: usize,
    rules: Vec<Rule>,
    total_weight: f64,
}

impl RuleSet {
    pub fn new(m: usize, rules: Vec<Rule>) -> Result<Self> {
        if m == 0 || m > MAX_AGENTS {
            return Err(Error::AgentCount(m));
        }
        let total_weight = rules.iter().map(|r| r.weight).sum();
        let rs = RuleSet {
            m,
            rules,
            total_weight,
        };
        validate_ruleset(&rs).map_err(Error::InvalidRuleSet)?;
        Ok(rs)
    }

    /// Builds a rule set without checking anything, including the cached
    /// total weight. Use [`validate_ruleset`] on the result.
    pub fn from_raw_parts(m: usize, rules: Vec<Rule>, total_weight: f64) -> Self {
        RuleSet {
            m,
            rules,
            total_weight,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn agents(&self) -> AgentSet {
        AgentSet::full(self.m)
    }

    /// The characteristic function `v(c)`.
    #[inline]
    pub fn value(&self, c: Coalition) -> f64 {
        self.rules
            .iter()
            .filter(|r| r.matches(c))
            .map(|r| r.weight)
            .sum()
    }

    /// Indices of rules whose match status differs between the two
    /// coalitions, ascending.
    pub fn changed_rules(&self, c1: Coalition, c2: Coalition) -> Vec<usize> {
        self.rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.matches(c1) != r.matches(c2))
            .map(|(i, _)| i)
            .collect()
    }

    /// Gross weight of the rules whose status changes between `c1` and `c2`.
    #[inline]
    pub fn delta_weight(&self, c1: Coalition, c2: Coalition) -> f64 {
        self.rules
            .iter()
            .filter(|r| r.matches(c1) != r.matches(c2))
            .map(|r| r.weight)
            .sum()
    }

    pub(crate) fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.m {
            Err(Error::AgentOutOfRange { agent, m: self.m })
        } else {
            Ok(())
        }
    }
}

pub fn rule_matches(rule: &Rule, c: Coalition) -> bool {
    rule.matches(c)
}

pub fn coalition_value(rs: &RuleSet, c: Coalition) -> f64 {
    rs.value(c)
}

pub fn changed_rules(rs: &RuleSet, c1: Coalition, c2: Coalition) -> Vec<usize> {
    rs.changed_rules(c1, c2)
}

pub fn delta_weight(rs: &RuleSet, c1: Coalition, c2: Coalition) -> f64 {
    rs.delta_weight(c1, c2)
}

/// Checks every rule-set invariant and reports all violations found.
pub fn validate_ruleset(rs: &RuleSet) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if rs.m == 0 || rs.m > MAX_AGENTS {
        out.push(Violation::AgentCount(rs.m));
    }
    let universe = AgentSet::full(rs.m.min(MAX_AGENTS));
    for (i, r) in rs.rules.iter().enumerate() {
        let overlap = AgentSet(r.req.0 & r.ban.0);
        if !overlap.is_empty() {
            out.push(Violation::ReqBanOverlap {
                rule: i,
                agents: overlap,
            });
        }
        let outside = AgentSet(r.participants().0 & !universe.0);
        if !outside.is_empty() {
            out.push(Violation::AgentOutOfRange {
                rule: i,
                agents: outside,
            });
        }
        if !r.weight.is_finite() {
            out.push(Violation::NonFiniteWeight { rule: i });
        }
    }
    let actual: f64 = rs.rules.iter().map(|r| r.weight).sum();
    if actual != rs.total_weight {
        out.push(Violation::TotalWeightMismatch {
            cached: rs.total_weight,
            actual,
        });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// JSON document form of a rule set.
///
/// Agent names are a presentation concern and live only here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSetDoc {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_names: Option<Vec<String>>,
    pub rules: Vec<RuleDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    pub req: Vec<usize>,
    pub ban: Vec<usize>,
    pub weight: f64,
}

impl RuleSetDoc {
    pub fn from_ruleset(rs: &RuleSet, agent_names: Option<Vec<String>>) -> Self {
        RuleSetDoc {
            m: rs.m,
            agent_names,
            rules: rs
                .rules
                .iter()
                .map(|r| RuleDoc {
                    req: r.req.iter().collect(),
                    ban: r.ban.iter().collect(),
                    weight: r.weight,
                })
                .collect(),
        }
    }

    pub fn to_ruleset(&self) -> Result<RuleSet> {
        if self.m == 0 || self.m > MAX_AGENTS {
            return Err(Error::AgentCount(self.m));
        }
        if let Some(names) = &self.agent_names {
            if names.len() != self.m {
                return Err(Error::invalid(format!(
                    "{} agent names for {} agents",
                    names.len(),
                    self.m
                )));
            }
        }
        let mut violations = Vec::new();
        let mut rules = Vec::with_capacity(self.rules.len());
        for (i, r) in self.rules.iter().enumerate() {
            let out_of_range: Vec<usize> = r
                .req
                .iter()
                .chain(&r.ban)
                .copied()
                .filter(|&a| a >= self.m)
                .collect();
            if !out_of_range.is_empty() {
                violations.push(Violation::AgentOutOfRange {
                    rule: i,
                    agents: AgentSet::from_agents(out_of_range.into_iter().filter(|&a| a < 64)),
                });
                continue;
            }
            rules.push(Rule::new(
                AgentSet::from_agents(r.req.iter().copied()),
                AgentSet::from_agents(r.ban.iter().copied()),
                r.weight,
            ));
        }
        if !violations.is_empty() {
            return Err(Error::InvalidRuleSet(violations));
        }
        RuleSet::new(self.m, rules)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("rule set serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const A: usize = 0;
    pub const B: usize = 1;
    pub const C: usize = 2;

    /// `{a ∧ b} → 3`, `{a ∧ ¬c} → 1`, `{b ∧ ¬c} → 2`.
    pub fn example() -> RuleSet {
        RuleSet::new(
            3,
            vec![
                Rule::new(AgentSet::from_agents([A, B]), AgentSet::EMPTY, 3.0),
                Rule::new(AgentSet::from_agents([A]), AgentSet::from_agents([C]), 1.0),
                Rule::new(AgentSet::from_agents([B]), AgentSet::from_agents([C]), 2.0),
            ],
        )
        .unwrap()
    }

    pub fn set(agents: &[usize]) -> Coalition {
        AgentSet::from_agents(agents.iter().copied())
    }
}
