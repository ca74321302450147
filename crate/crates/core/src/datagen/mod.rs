//! Synthetic rule-set generation.
//!
//! Three structural generators are provided:
//!
//! * **uniform**: per agent slot draw `x, y ~ U(0,1)`; the agent is required
//!   when `x ≥ p`, otherwise banned when `y ≥ p`.
//! * **coinflip**: each rule draws `c` agents with replacement and a fair
//!   coin for each; heads requires the agent, tails bans it. A later draw of
//!   the same agent overrides an earlier one.
//! * **mog**: like uniform, but per datapoint the draws come from a normal
//!   distribution whose mean and standard deviation are themselves drawn
//!   from `Gamma(alpha, rate = beta)`.
//!
//! Rule weights come from one of three [`WeightScheme`]s. Weights are
//! rounded to `f32` at generation time so the on-disk tensor reproduces the
//! generated games exactly.
//!
//! Datapoint `i` draws its rules from ChaCha8 stream `i` under the dataset
//! seed and its weights from `derive_seed(seed, i)`, so output is
//! independent of the number of threads.

mod dataset;

pub use dataset::{
    label_dataset, label_rulesets, pad_dataset, split_dataset, DatasetMeta, LabelInfo,
    LabeledDataset, Part, SplitInfo, FORMAT_VERSION,
};

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcn::{AgentSet, Rule, RuleSet, MAX_AGENTS};
use crate::rng::{derive_seed, stream_rng};

/// Gamma shape used by the mixture generator when none is given.
pub const DEFAULT_ALPHA: f64 = 2.0;
/// Gamma rate used by the mixture generator when none is given.
pub const DEFAULT_BETA: f64 = 1.0;
/// Smallest rule weight produced by the Gaussian schemes.
pub const MIN_WEIGHT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMethod {
    Uniform,
    Coinflip,
    Mog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// Every rule weighs 1.
    Uniform,
    /// `Normal(5, 1)`.
    GaussLow,
    /// `Normal(15, 5)`.
    GaussHigh,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub method: GenMethod,
    /// Number of datapoints.
    pub k: usize,
    /// Rules per datapoint.
    pub n: usize,
    /// Agents per datapoint.
    pub m: usize,
    /// Membership threshold (uniform, mog).
    pub p: f64,
    /// Coins per rule (coinflip).
    pub c: usize,
    pub alpha: f64,
    pub beta: f64,
    pub weights: WeightScheme,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(method: GenMethod, k: usize, n: usize, m: usize) -> Self {
        GenSpec {
            method,
            k,
            n,
            m,
            p: 0.5,
            c: 1,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            weights: WeightScheme::Uniform,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.m == 0 {
            return Err(Error::invalid("k, n and m must all be at least 1"));
        }
        if self.m > MAX_AGENTS {
            return Err(Error::AgentCount(self.m));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("p = {} outside [0, 1]", self.p)));
        }
        match self.method {
            GenMethod::Coinflip if self.c == 0 => {
                Err(Error::invalid("coinflip needs at least one coin per rule"))
            }
            GenMethod::Mog if !(self.alpha > 0.0 && self.beta > 0.0) => Err(Error::invalid(
                format!("gamma parameters must be positive, got alpha={}, beta={}", self.alpha, self.beta),
            )),
            _ => Ok(()),
        }
    }

    fn expect(&self, method: GenMethod) -> Result<()> {
        if self.method != method {
            return Err(Error::invalid(format!(
                "spec method {:?} passed to the {method:?} generator",
                self.method
            )));
        }
        self.validate()
    }
}

/// Generates the dataset's games with the generator named by the spec.
pub fn generate(spec: &GenSpec) -> Result<Vec<RuleSet>> {
    match spec.method {
        GenMethod::Uniform => gen_uniform(spec),
        GenMethod::Coinflip => gen_coinflip(spec),
        GenMethod::Mog => gen_mog(spec),
    }
}

pub fn gen_uniform(spec: &GenSpec) -> Result<Vec<RuleSet>> {
    spec.expect(GenMethod::Uniform)?;
    build(spec, |i| {
        let mut rng = stream_rng(spec.seed, i as u64);
        threshold_masks(spec.n, spec.m, spec.p, || rng.random::<f64>())
    })
}

pub fn gen_coinflip(spec: &GenSpec) -> Result<Vec<RuleSet>> {
    spec.expect(GenMethod::Coinflip)?;
    build(spec, |i| {
        let mut rng = stream_rng(spec.seed, i as u64);
        (0..spec.n)
            .map(|_| {
                let agents: Vec<usize> = (0..spec.c).map(|_| rng.random_range(0..spec.m)).collect();
                let coins: Vec<bool> = (0..spec.c).map(|_| rng.random_bool(0.5)).collect();
                let (mut req, mut ban) = (AgentSet::EMPTY, AgentSet::EMPTY);
                for (&a, &heads) in agents.iter().zip(&coins) {
                    if heads {
                        req = req.with(a);
                        ban = ban.without(a);
                    } else {
                        ban = ban.with(a);
                        req = req.without(a);
                    }
                }
                (req, ban)
            })
            .collect()
    })
}

pub fn gen_mog(spec: &GenSpec) -> Result<Vec<RuleSet>> {
    spec.expect(GenMethod::Mog)?;
    let gamma = Gamma::new(spec.alpha, 1.0 / spec.beta)
        .map_err(|e| Error::invalid(format!("gamma distribution: {e}")))?;
    build(spec, |i| {
        let mut rng = stream_rng(spec.seed, i as u64);
        let mu = gamma.sample(&mut rng);
        let sigma = gamma.sample(&mut rng);
        normal_masks(spec.n, spec.m, spec.p, mu, sigma, &mut rng)
    })
}

pub(crate) fn normal_masks<R: Rng>(
    n: usize,
    m: usize,
    p: f64,
    mu: f64,
    sigma: f64,
    rng: &mut R,
) -> Vec<(AgentSet, AgentSet)> {
    let normal = Normal::new(mu, sigma).expect("finite, non-negative sigma");
    threshold_masks(n, m, p, || normal.sample(rng))
}

/// Draws the full `x` matrix, then the full `y` matrix, and thresholds both
/// at `p`; `ban` is only set where `req` is not.
fn threshold_masks(
    n: usize,
    m: usize,
    p: f64,
    mut draw: impl FnMut() -> f64,
) -> Vec<(AgentSet, AgentSet)> {
    let x: Vec<f64> = (0..n * m).map(|_| draw()).collect();
    let y: Vec<f64> = (0..n * m).map(|_| draw()).collect();
    (0..n)
        .map(|r| {
            let (mut req, mut ban) = (AgentSet::EMPTY, AgentSet::EMPTY);
            for a in 0..m {
                if x[r * m + a] >= p {
                    req = req.with(a);
                } else if y[r * m + a] >= p {
                    ban = ban.with(a);
                }
            }
            (req, ban)
        })
        .collect()
}

fn build<F>(spec: &GenSpec, masks: F) -> Result<Vec<RuleSet>>
where
    F: Fn(usize) -> Vec<(AgentSet, AgentSet)> + Sync,
{
    (0..spec.k)
        .into_par_iter()
        .map(|i| {
            let weights = assign_weights(spec.weights, spec.n, derive_seed(spec.seed, i as u64));
            let rules = masks(i)
                .into_iter()
                .zip(weights)
                .map(|((req, ban), w)| Rule::new(req, ban, w))
                .collect();
            RuleSet::new(spec.m, rules)
        })
        .collect()
}

/// Rule weights for one datapoint. Gaussian weights are clamped below at
/// [`MIN_WEIGHT`] and every weight is representable as `f32`.
pub fn assign_weights(scheme: WeightScheme, n: usize, seed: u64) -> Vec<f64> {
    let (mean, sd) = match scheme {
        WeightScheme::Uniform => return vec![1.0; n],
        WeightScheme::GaussLow => (5.0, 1.0),
        WeightScheme::GaussHigh => (15.0, 5.0),
    };
    let normal = Normal::new(mean, sd).unwrap();
    let mut rng = stream_rng(seed, 0);
    (0..n)
        .map(|_| f64::max(normal.sample(&mut rng), MIN_WEIGHT) as f32 as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(method: GenMethod, k: usize, n: usize, m: usize) -> GenSpec {
        GenSpec {
            seed: 42,
            ..GenSpec::new(method, k, n, m)
        }
    }

    fn densities(games: &[RuleSet]) -> (f64, f64) {
        let (mut req, mut ban, mut slots) = (0usize, 0usize, 0usize);
        for g in games {
            for r in g.rules() {
                req += r.req.len();
                ban += r.ban.len();
                slots += g.m();
            }
        }
        (req as f64 / slots as f64, ban as f64 / slots as f64)
    }

    #[test]
    fn uniform_extreme_thresholds() {
        let all = gen_uniform(&GenSpec { p: 0.0, ..spec(GenMethod::Uniform, 5, 4, 6) }).unwrap();
        for g in &all {
            for r in g.rules() {
                assert_eq!(r.req, AgentSet::full(6));
                assert!(r.ban.is_empty());
            }
        }
        let none = gen_uniform(&GenSpec { p: 1.0, ..spec(GenMethod::Uniform, 5, 4, 6) }).unwrap();
        assert_eq!(densities(&none), (0.0, 0.0));
    }

    #[test]
    fn uniform_bit_frequencies() {
        let games = gen_uniform(&spec(GenMethod::Uniform, 1000, 20, 10)).unwrap();
        let (req, ban) = densities(&games);
        assert!((req - 0.5).abs() <= 0.02, "{req}");
        assert!((ban - 0.25).abs() <= 0.02, "{ban}");
    }

    #[test]
    fn uniform_density_falls_with_p() {
        let d: Vec<f64> = (1..=9)
            .map(|i| {
                let s = GenSpec { p: i as f64 / 10.0, ..spec(GenMethod::Uniform, 50, 20, 10) };
                densities(&gen_uniform(&s).unwrap()).0
            })
            .collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0]), "{d:?}");
    }

    #[test]
    fn coinflip_single_coin() {
        let games = gen_coinflip(&GenSpec { c: 1, ..spec(GenMethod::Coinflip, 500, 20, 10) }).unwrap();
        let mut heads = 0;
        for g in &games {
            for r in g.rules() {
                assert_eq!(r.participants().len(), 1);
                heads += r.req.len();
            }
        }
        let frac = heads as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
        assert!(gen_coinflip(&GenSpec { c: 0, ..spec(GenMethod::Coinflip, 1, 1, 1) }).is_err());
    }

    #[test]
    fn coinflip_distinct_agents() {
        let games = gen_coinflip(&GenSpec { c: 5, ..spec(GenMethod::Coinflip, 1000, 20, 10) }).unwrap();
        let total: usize = games.iter().flat_map(|g| g.rules()).map(|r| r.participants().len()).sum();
        let mean = total as f64 / 20_000.0;
        let expected = 10.0 * (1.0 - 0.9f64.powi(5));
        assert!((mean - expected).abs() <= 0.1, "{mean} vs {expected}");
    }

    #[test]
    fn mog_degenerate_and_disjoint() {
        let mut rng = stream_rng(1, 0);
        let masks = normal_masks(10, 8, 0.5, 3.0, 1e-12, &mut rng);
        assert!(masks.iter().all(|(req, ban)| *req == AgentSet::full(8) && ban.is_empty()));

        let games = gen_mog(&spec(GenMethod::Mog, 200, 20, 10)).unwrap();
        assert!(games.iter().flat_map(|g| g.rules()).all(|r| r.req.is_disjoint(r.ban)));
    }

    #[test]
    fn mog_density_spreads_more_than_uniform() {
        fn per_point(games: &[RuleSet]) -> Vec<f64> {
            games.iter().map(|g| densities(std::slice::from_ref(g)).0).collect()
        }
        fn mean_var(x: &[f64]) -> (f64, f64) {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            (mean, x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64)
        }
        let mog = per_point(&gen_mog(&spec(GenMethod::Mog, 1000, 20, 10)).unwrap());
        let (mean, var_mog) = mean_var(&mog);
        let matched = GenSpec { p: 1.0 - mean, ..spec(GenMethod::Uniform, 1000, 20, 10) };
        let uni = per_point(&gen_uniform(&matched).unwrap());
        let (uni_mean, var_uni) = mean_var(&uni);
        assert!((uni_mean - mean).abs() < 0.02);
        assert!(var_mog > var_uni, "{var_mog} <= {var_uni}");
    }

    #[test]
    fn weights() {
        assert_eq!(assign_weights(WeightScheme::Uniform, 20, 0), vec![1.0; 20]);
        let low = assign_weights(WeightScheme::GaussLow, 10_000, 5);
        let mean = low.iter().sum::<f64>() / 1e4;
        assert!((mean - 5.0).abs() <= 0.05, "{mean}");
        let high = assign_weights(WeightScheme::GaussHigh, 10_000, 5);
        let mean = high.iter().sum::<f64>() / 1e4;
        assert!((mean - 15.0).abs() <= 0.25, "{mean}");
        assert!(high.iter().all(|&w| w >= MIN_WEIGHT as f32 as f64 && w == w as f32 as f64));
    }

    #[test]
    fn generation_is_deterministic_and_validated() {
        let s = spec(GenMethod::Uniform, 20, 5, 4);
        assert_eq!(gen_uniform(&s).unwrap(), gen_uniform(&s).unwrap());
        assert!(gen_coinflip(&s).is_err());
        assert!(gen_uniform(&GenSpec { p: 1.5, ..s }).is_err());
        assert!(gen_uniform(&GenSpec { k: 0, ..s }).is_err());
        let bad = GenSpec { alpha: 0.0, ..spec(GenMethod::Mog, 1, 1, 1) };
        assert!(gen_mog(&bad).is_err());
    }
}
