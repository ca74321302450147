//! Exact power indices by enumeration.
//!
//! Four index semantics are supported, see [`IndexKind`]. The classical
//! definitions (`BanzhafEq1`, `ShapleyEq2`) use signed marginal
//! contributions of the characteristic function. The sampling estimators in
//! [`crate::mc`] do not converge to those: they credit the gross weight of
//! the rules whose status flips, normalized by the total rule weight, and
//! the Shapley variant credits only the first agent that changes the value
//! of a permutation's growing coalition. `BanzhafAlg4` and `ShapleyAlg5` are
//! the exact expectations of those estimators and serve as their oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcn::{AgentSet, RuleSet};

/// Largest game enumerated over all coalitions.
pub const MAX_SUBSET_AGENTS: usize = 20;
/// Largest game enumerated over all permutations.
pub const MAX_PERMUTATION_AGENTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    /// Classical Banzhaf: mean signed marginal over the 2^(m-1) coalitions
    /// without the agent.
    BanzhafEq1,
    /// Classical Shapley-Shubik: mean signed marginal over agent orderings.
    ShapleyEq2,
    /// Gross changed-rule weight on removing the agent from a uniform
    /// coalition (zero when absent or when the value is unchanged), over
    /// total weight.
    BanzhafAlg4,
    /// Gross changed-rule weight credited to the first value-changing agent
    /// of a uniform ordering, over total weight.
    ShapleyAlg5,
}

impl IndexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::BanzhafEq1 => "banzhaf_eq1",
            IndexKind::ShapleyEq2 => "shapley_eq2",
            IndexKind::BanzhafAlg4 => "banzhaf_alg4",
            IndexKind::ShapleyAlg5 => "shapley_alg5",
        }
    }

    pub fn is_banzhaf(self) -> bool {
        matches!(self, IndexKind::BanzhafEq1 | IndexKind::BanzhafAlg4)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// Per-agent index values plus how they were obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PowerVectorDoc", into = "PowerVectorDoc")]
pub struct PowerVector {
    pub kind: IndexKind,
    pub method: Method,
    pub values: Vec<f64>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

impl PowerVector {
    pub fn exact(kind: IndexKind, values: Vec<f64>) -> Self {
        PowerVector {
            kind,
            method: Method::Exact,
            values,
            samples: None,
            seed: None,
        }
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("power vector serializes");
        s.push('\n');
        s
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerVectorDoc {
    kind: IndexKind,
    method: Method,
    m: usize,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl From<PowerVector> for PowerVectorDoc {
    fn from(p: PowerVector) -> Self {
        PowerVectorDoc {
            kind: p.kind,
            method: p.method,
            m: p.values.len(),
            values: p.values,
            samples: p.samples,
            seed: p.seed,
        }
    }
}

impl TryFrom<PowerVectorDoc> for PowerVector {
    type Error = String;

    fn try_from(d: PowerVectorDoc) -> std::result::Result<Self, String> {
        if d.values.len() != d.m {
            return Err(format!("m = {} but {} values", d.m, d.values.len()));
        }
        if d.method == Method::Exact && (d.samples.is_some() || d.seed.is_some()) {
            return Err("exact power vectors carry no samples or seed".into());
        }
        Ok(PowerVector {
            kind: d.kind,
            method: d.method,
            values: d.values,
            samples: d.samples,
            seed: d.seed,
        })
    }
}

/// Computes the named index exactly.
pub fn exact_index(rs: &RuleSet, kind: IndexKind) -> Result<PowerVector> {
    match kind {
        IndexKind::BanzhafEq1 => exact_banzhaf_eq1(rs),
        IndexKind::ShapleyEq2 => exact_shapley_eq2(rs),
        IndexKind::BanzhafAlg4 => exact_alg4_estimand(rs),
        IndexKind::ShapleyAlg5 => exact_alg5_estimand(rs),
    }
}

fn check_cap(op: &'static str, m: usize, max: usize) -> Result<()> {
    if m > max {
        Err(Error::EnumerationLimit { op, m, max })
    } else {
        Ok(())
    }
}

fn nonzero_total(rs: &RuleSet) -> Result<f64> {
    let w = rs.total_weight();
    if w == 0.0 {
        Err(Error::ZeroTotalWeight)
    } else {
        Ok(w)
    }
}

/// `v(C)` for every coalition, indexed by bitmask.
pub(crate) fn value_table(rs: &RuleSet) -> Vec<f64> {
    (0..1u64 << rs.m())
        .map(|bits| rs.value(AgentSet::from_bits(bits)))
        .collect()
}

pub fn exact_banzhaf_eq1(rs: &RuleSet) -> Result<PowerVector> {
    let m = rs.m();
    check_cap("exact_banzhaf_eq1", m, MAX_SUBSET_AGENTS)?;
    let v = value_table(rs);
    let scale = 1.0 / (1u64 << (m - 1)) as f64;
    let values = (0..m)
        .map(|j| {
            let bit = 1usize << j;
            let sum: f64 = (0..v.len())
                .filter(|c| c & bit == 0)
                .map(|c| v[c | bit] - v[c])
                .sum();
            sum * scale
        })
        .collect();
    Ok(PowerVector::exact(IndexKind::BanzhafEq1, values))
}

/// Uses the coalition-weighted form
/// `Σ_S |S|!(m-1-|S|)!/m! · [v(S ∪ j) − v(S)]`, equal to the permutation
/// average but linear in the number of coalitions.
pub fn exact_shapley_eq2(rs: &RuleSet) -> Result<PowerVector> {
    let m = rs.m();
    check_cap("exact_shapley_eq2", m, MAX_SUBSET_AGENTS)?;
    let v = value_table(rs);
    // |S|!(m-1-|S|)!/m! = 1 / (m · C(m-1, |S|))
    let mut binom = vec![1.0f64; m];
    for s in 1..m {
        binom[s] = binom[s - 1] * (m - s) as f64 / s as f64;
    }
    let weight: Vec<f64> = binom.iter().map(|b| 1.0 / (m as f64 * b)).collect();
    let values = (0..m)
        .map(|j| {
            let bit = 1usize << j;
            (0..v.len())
                .filter(|c| c & bit == 0)
                .map(|c| weight[c.count_ones() as usize] * (v[c | bit] - v[c]))
                .sum()
        })
        .collect();
    Ok(PowerVector::exact(IndexKind::ShapleyEq2, values))
}

/// Exact expectation of the sampling Banzhaf estimator.
pub fn exact_alg4_estimand(rs: &RuleSet) -> Result<PowerVector> {
    let m = rs.m();
    check_cap("exact_alg4_estimand", m, MAX_SUBSET_AGENTS)?;
    let total = nonzero_total(rs)?;
    let v = value_table(rs);
    let mut acc = vec![0.0f64; m];
    for c in 0..v.len() {
        let coalition = AgentSet::from_bits(c as u64);
        for (a, slot) in acc.iter_mut().enumerate() {
            let bit = 1usize << a;
            if c & bit == 0 || v[c] == v[c & !bit] {
                continue;
            }
            *slot += rs.delta_weight(coalition, coalition.without(a));
        }
    }
    let norm = v.len() as f64 * total;
    Ok(PowerVector::exact(
        IndexKind::BanzhafAlg4,
        acc.into_iter().map(|p| p / norm).collect(),
    ))
}

/// Exact expectation of the sampling Shapley-Shubik estimator, by walking
/// all `m!` orderings.
pub fn exact_alg5_estimand(rs: &RuleSet) -> Result<PowerVector> {
    let m = rs.m();
    check_cap("exact_alg5_estimand", m, MAX_PERMUTATION_AGENTS)?;
    let total = nonzero_total(rs)?;
    let v = value_table(rs);
    let mut acc = vec![0.0f64; m];
    let mut count = 0u64;
    for_each_permutation(m, |perm| {
        count += 1;
        let mut c = 0usize;
        for &a in perm {
            let next = c | 1 << a;
            if v[next] != v[c] {
                acc[a] += rs.delta_weight(
                    AgentSet::from_bits(next as u64),
                    AgentSet::from_bits(c as u64),
                );
                break;
            }
            c = next;
        }
    });
    let norm = count as f64 * total;
    Ok(PowerVector::exact(
        IndexKind::ShapleyAlg5,
        acc.into_iter().map(|p| p / norm).collect(),
    ))
}

/// Visits every permutation of `0..m` (Heap's algorithm, iterative).
pub(crate) fn for_each_permutation(m: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..m).collect();
    let mut stack = vec![0usize; m];
    f(&perm);
    let mut i = 1;
    while i < m {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            f(&perm);
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
}
