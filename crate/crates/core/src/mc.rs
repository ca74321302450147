//! Monte-Carlo power index estimation.
//!
//! Samples are processed in blocks of [`BLOCK_SAMPLES`]; block `b` draws from
//! ChaCha8 stream `b` under the configured seed and keeps its own
//! accumulators. Blocks may run on any number of threads but are always
//! reduced in block order, so a result depends only on `(n_samples, seed)`.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{IndexKind, Method, PowerVector};
use crate::mcn::{full_mask, AgentSet, Coalition, RuleSet};
use crate::rng::{fisher_yates, stream_rng, StreamRng};

pub const BLOCK_SAMPLES: u64 = 4096;
pub const DEFAULT_SAMPLES: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_samples: DEFAULT_SAMPLES,
            seed: 0,
            workers: 1,
        }
    }
}

impl McConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        McConfig {
            n_samples,
            seed,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn check(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }
}

/// Sample count guaranteeing `P(|estimate − mean| ≥ ε) ≤ δ` for a mean of
/// i.i.d. draws bounded in `[0, 1]` (Hoeffding).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBound {
    pub epsilon: f64,
    pub delta: f64,
    pub k_required: u64,
}

pub fn hoeffding_samples(epsilon: f64, delta: f64) -> Result<SampleBound> {
    let open_unit = |x: f64| x > 0.0 && x < 1.0;
    if !open_unit(epsilon) || !open_unit(delta) {
        return Err(Error::invalid(format!(
            "epsilon and delta must lie in (0, 1), got epsilon={epsilon}, delta={delta}"
        )));
    }
    let k = ((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil();
    Ok(SampleBound {
        epsilon,
        delta,
        k_required: (k as u64).max(1),
    })
}

/// Whether removing `agent` from `c` changes the coalition's value.
pub fn is_critical(rs: &RuleSet, c: Coalition, agent: usize) -> Result<bool> {
    rs.check_agent(agent)?;
    if !c.contains(agent) {
        return Err(Error::AgentNotInCoalition { agent });
    }
    Ok(rs.value(c) != rs.value(c.without(agent)))
}

/// Runs `per_block` over every sample block and sums the per-agent
/// accumulators in block order.
fn run_blocks<F>(m: usize, cfg: &McConfig, per_block: F) -> Result<Vec<f64>>
where
    F: Fn(&mut StreamRng, u64, &mut [f64]) + Sync,
{
    cfg.check()?;
    let n_blocks = cfg.n_samples.div_ceil(BLOCK_SAMPLES);
    let block = |b: u64| {
        let mut rng = stream_rng(cfg.seed, b);
        let len = BLOCK_SAMPLES.min(cfg.n_samples - b * BLOCK_SAMPLES);
        let mut acc = vec![0.0; m];
        per_block(&mut rng, len, &mut acc);
        acc
    };
    let partials: Vec<Vec<f64>> = if cfg.workers == 1 || n_blocks == 1 {
        (0..n_blocks).map(block).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..n_blocks).into_par_iter().map(block).collect())
    };
    let mut total = vec![0.0; m];
    for p in partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    Ok(total)
}

fn normalized(
    kind: IndexKind,
    rs: &RuleSet,
    cfg: &McConfig,
    pivotal: Vec<f64>,
) -> PowerVector {
    let norm = cfg.n_samples as f64 * rs.total_weight();
    PowerVector {
        kind,
        method: Method::MonteCarlo,
        values: pivotal.into_iter().map(|p| p / norm).collect(),
        samples: Some(cfg.n_samples),
        seed: Some(cfg.seed),
    }
}

/// Sampling Banzhaf estimator.
///
/// Each iteration draws one uniform coalition and, for every member whose
/// removal changes the coalition's value, credits that member with the
/// total weight of the rules whose status flips.
pub fn mc_banzhaf(rs: &RuleSet, cfg: &McConfig) -> Result<PowerVector> {
    if rs.total_weight() == 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let m = rs.m();
    let mask = full_mask(m);
    let rules = rs.rules();
    let pivotal = run_blocks(m, cfg, |rng, len, acc| {
        let mut status = vec![false; rules.len()];
        for _ in 0..len {
            let c = AgentSet::from_bits(rng.next_u64() & mask);
            let mut v = 0.0;
            for (s, r) in status.iter_mut().zip(rules) {
                *s = r.matches(c);
                if *s {
                    v += r.weight;
                }
            }
            for a in c.iter() {
                let without = c.without(a);
                let mut v_without = 0.0;
                let mut changed = 0.0;
                for (&s, r) in status.iter().zip(rules) {
                    let s2 = r.matches(without);
                    if s2 {
                        v_without += r.weight;
                    }
                    if s2 != s {
                        changed += r.weight;
                    }
                }
                if v_without != v {
                    acc[a] += changed;
                }
            }
        }
    })?;
    Ok(normalized(IndexKind::BanzhafAlg4, rs, cfg, pivotal))
}

/// Sampling Shapley-Shubik estimator.
///
/// Each iteration draws a uniform ordering and grows a coalition along it.
/// The first agent whose arrival changes the coalition's value is credited
/// with the weight of the rules that flip on its arrival; later agents in
/// the same ordering receive nothing.
pub fn mc_shapley(rs: &RuleSet, cfg: &McConfig) -> Result<PowerVector> {
    if rs.total_weight() == 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let m = rs.m();
    let v_empty = rs.value(AgentSet::EMPTY);
    let pivotal = run_blocks(m, cfg, |rng, len, acc| {
        let mut order: Vec<usize> = (0..m).collect();
        for _ in 0..len {
            fisher_yates(&mut order, rng);
            let mut c = AgentSet::EMPTY;
            let mut v = v_empty;
            for &a in &order {
                let next = c.with(a);
                let v_next = rs.value(next);
                if v_next != v {
                    acc[a] += rs.delta_weight(next, c);
                    break;
                }
                c = next;
                v = v_next;
            }
        }
    })?;
    Ok(normalized(IndexKind::ShapleyAlg5, rs, cfg, pivotal))
}

/// Monte-Carlo estimator for the given sampling kind.
pub fn mc_index(rs: &RuleSet, kind: IndexKind, cfg: &McConfig) -> Result<PowerVector> {
    match kind {
        IndexKind::BanzhafAlg4 => mc_banzhaf(rs, cfg),
        IndexKind::ShapleyAlg5 => mc_shapley(rs, cfg),
        other => Err(Error::invalid(format!(
            "no Monte-Carlo estimator for {}",
            other.as_str()
        ))),
    }
}

/// Fraction of uniformly drawn coalitions containing `agent` in which the
/// agent is critical.
pub fn estimate_criticality_probability(
    rs: &RuleSet,
    agent: usize,
    cfg: &McConfig,
) -> Result<f64> {
    rs.check_agent(agent)?;
    let mask = full_mask(rs.m());
    let hits = run_blocks(1, cfg, |rng, len, acc| {
        for _ in 0..len {
            let c = AgentSet::from_bits(rng.next_u64() & mask).with(agent);
            if rs.value(c) != rs.value(c.without(agent)) {
                acc[0] += 1.0;
            }
        }
    })?;
    Ok(hits[0] / cfg.n_samples as f64)
}

/// Draws a uniform coalition over `m` agents.
pub fn sample_coalition<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Coalition {
    AgentSet::from_bits(rng.next_u64() & full_mask(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_alg4_estimand, exact_alg5_estimand, exact_banzhaf_eq1};
    use crate::mcn::fixtures::*;
    use crate::mcn::Rule;

    fn single_rule(m: usize) -> RuleSet {
        RuleSet::new(m, vec![Rule::new(set(&[0]), AgentSet::EMPTY, 1.0)]).unwrap()
    }

    #[test]
    fn hoeffding_values() {
        assert_eq!(hoeffding_samples(0.01, 0.05).unwrap().k_required, 18445);
        assert_eq!(hoeffding_samples(0.1, 0.05).unwrap().k_required, 185);
        assert_eq!(hoeffding_samples(0.05, 0.1).unwrap().k_required, 600);
        for (e, d) in [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0), (f64::NAN, 0.5)] {
            assert!(hoeffding_samples(e, d).is_err());
        }
    }

    #[test]
    fn criticality() {
        let rs = example();
        assert!(is_critical(&rs, set(&[A, B]), A).unwrap());
        assert!(!is_critical(&rs, set(&[A, C]), A).unwrap());
        let empty = RuleSet::new(3, vec![]).unwrap();
        assert!(!is_critical(&empty, set(&[A]), A).unwrap());
        assert!(matches!(
            is_critical(&rs, set(&[B]), A),
            Err(Error::AgentNotInCoalition { agent: 0 })
        ));
    }

    #[test]
    fn banzhaf_converges_to_alg4_estimand() {
        let rs = example();
        let pv = mc_banzhaf(&rs, &McConfig::new(100_000, 11)).unwrap();
        let exact = exact_alg4_estimand(&rs).unwrap();
        for (x, y) in pv.values.iter().zip(&exact.values) {
            assert!((x - y).abs() <= 0.01, "{:?} vs {:?}", pv.values, exact.values);
        }
        assert_eq!(pv.kind, IndexKind::BanzhafAlg4);
        assert_eq!(pv.samples, Some(100_000));
        // Not the classical index: a's Eq. 1 value is 2.0.
        let eq1 = exact_banzhaf_eq1(&rs).unwrap();
        assert!((pv.values[A] - eq1.values[A]).abs() > 1.0);
    }

    #[test]
    fn shapley_converges_to_alg5_estimand() {
        let pv = mc_shapley(&single_rule(2), &McConfig::new(10_000, 3)).unwrap();
        assert_eq!(pv.values, vec![1.0, 0.0]);

        let rs = example();
        let pv = mc_shapley(&rs, &McConfig::new(200_000, 5)).unwrap();
        let exact = exact_alg5_estimand(&rs).unwrap();
        for (x, y) in pv.values.iter().zip(&exact.values) {
            assert!((x - y).abs() <= 0.01);
        }
    }

    #[test]
    fn zero_weight_is_an_error() {
        let empty = RuleSet::new(3, vec![]).unwrap();
        let cfg = McConfig::new(10, 0);
        assert!(matches!(mc_banzhaf(&empty, &cfg), Err(Error::ZeroTotalWeight)));
        assert!(matches!(mc_shapley(&empty, &cfg), Err(Error::ZeroTotalWeight)));
    }

    #[test]
    fn dummy_agent_is_exactly_zero() {
        let rs = single_rule(4);
        for seed in 0..5 {
            let b = mc_banzhaf(&rs, &McConfig::new(777, seed)).unwrap();
            let s = mc_shapley(&rs, &McConfig::new(777, seed)).unwrap();
            for a in 1..4 {
                assert_eq!(b.values[a], 0.0);
                assert_eq!(s.values[a], 0.0);
            }
        }
    }

    #[test]
    fn workers_never_change_results() {
        let rs = example();
        let base = McConfig::new(3 * BLOCK_SAMPLES + 17, 99);
        let one = mc_banzhaf(&rs, &base).unwrap();
        let four = mc_banzhaf(&rs, &base.with_workers(4)).unwrap();
        assert_eq!(one, four);
        let one = mc_shapley(&rs, &base).unwrap();
        let three = mc_shapley(&rs, &base.with_workers(3)).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn criticality_probability() {
        let cfg = McConfig::new(5_000, 1);
        assert_eq!(estimate_criticality_probability(&single_rule(4), 0, &cfg).unwrap(), 1.0);
        assert_eq!(estimate_criticality_probability(&single_rule(4), 2, &cfg).unwrap(), 0.0);

        // Brute force over the coalitions containing c.
        let rs = example();
        let containing: Vec<_> = (0..8u64)
            .map(AgentSet::from_bits)
            .filter(|s| s.contains(C))
            .collect();
        let exact = containing
            .iter()
            .filter(|&&s| is_critical(&rs, s, C).unwrap())
            .count() as f64
            / containing.len() as f64;
        let est = estimate_criticality_probability(&rs, C, &McConfig::new(50_000, 8)).unwrap();
        assert!((est - exact).abs() <= 0.01, "{est} vs {exact}");
        assert!(estimate_criticality_probability(&rs, 3, &cfg).is_err());
    }
}
