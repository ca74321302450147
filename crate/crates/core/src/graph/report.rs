use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{banzhaf_stats, build_graph, graph_metrics, spearman, BanzhafStats, GraphKind, GraphMetrics};
use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};

pub const SIGNIFICANCE_RHO: f64 = 0.2;
pub const SIGNIFICANCE_P: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanzhafStat {
    Mean,
    Variance,
    Gini,
}

impl BanzhafStat {
    pub const ALL: [BanzhafStat; 3] = [BanzhafStat::Mean, BanzhafStat::Variance, BanzhafStat::Gini];

    pub fn as_str(self) -> &'static str {
        match self {
            BanzhafStat::Mean => "mean",
            BanzhafStat::Variance => "variance",
            BanzhafStat::Gini => "gini",
        }
    }

    fn get(self, s: &BanzhafStats) -> Option<f64> {
        match self {
            BanzhafStat::Mean => Some(s.mean),
            BanzhafStat::Variance => Some(s.variance),
            BanzhafStat::Gini => s.gini,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MaxClique,
    AvgDegree,
    DegreeVariance,
    AvgClustering,
    MaxBetweenness,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::MaxClique,
        Metric::AvgDegree,
        Metric::DegreeVariance,
        Metric::AvgClustering,
        Metric::MaxBetweenness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::MaxClique => "max_clique",
            Metric::AvgDegree => "avg_degree",
            Metric::DegreeVariance => "degree_variance",
            Metric::AvgClustering => "avg_clustering",
            Metric::MaxBetweenness => "max_betweenness",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphStat {
    pub metric: Metric,
    pub kind: GraphKind,
}

impl GraphStat {
    pub fn name(self) -> String {
        format!("{}_{}", self.metric.as_str(), self.kind.as_str())
    }

    fn all() -> impl Iterator<Item = GraphStat> {
        GraphKind::ALL
            .into_iter()
            .flat_map(|kind| Metric::ALL.into_iter().map(move |metric| GraphStat { metric, kind }))
    }
}

/// One (Banzhaf statistic, graph statistic) correlation within one dataset.
/// When Spearman is undefined, `rho`/`p_value` are absent and `error` says why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub dataset: usize,
    pub banzhaf_stat: BanzhafStat,
    pub graph_stat: GraphStat,
    /// Datapoints that entered the correlation.
    pub n: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub banzhaf_stat: BanzhafStat,
    pub graph_stat: GraphStat,
    pub significant_datasets: usize,
    pub datasets: usize,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub datasets: usize,
    pub records: Vec<CorrelationRecord>,
    pub prevalence: Vec<PrevalenceRow>,
}

impl CorrelationReport {
    pub fn record(&self, dataset: usize, stat: BanzhafStat, graph_stat: GraphStat) -> Option<&CorrelationRecord> {
        self.records
            .iter()
            .find(|r| r.dataset == dataset && r.banzhaf_stat == stat && r.graph_stat == graph_stat)
    }

    pub fn records_csv(&self) -> String {
        let mut out = String::from("dataset,banzhaf_stat,graph_stat,n,rho,p_value,significant\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.dataset,
                r.banzhaf_stat.as_str(),
                r.graph_stat.name(),
                r.n,
                opt(r.rho),
                opt(r.p_value),
                r.significant
            ));
        }
        out
    }
}

fn is_significant(rho: f64, p: f64) -> bool {
    rho.abs() > SIGNIFICANCE_RHO && p <= SIGNIFICANCE_P
}

struct Observation {
    stats: BanzhafStats,
    metrics: [GraphMetrics; 2],
}

fn observe(ds: &LabeledDataset) -> Result<Vec<Observation>> {
    match &ds.meta.labels {
        Some(info) if info.kind.is_banzhaf() => {}
        Some(info) => {
            return Err(Error::invalid(format!(
                "graph statistics need banzhaf labels, found {}",
                info.kind.as_str()
            )))
        }
        None => return Err(Error::invalid("dataset has no labels")),
    }
    let m = ds.meta.m;
    (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let rs = ds.ruleset(i)?;
            let labels: Vec<f64> = ds.label_row(i).unwrap()[..m].iter().map(|&v| v as f64).collect();
            Ok(Observation {
                stats: banzhaf_stats(&labels)?,
                metrics: GraphKind::ALL.map(|kind| graph_metrics(&build_graph(&rs, kind))),
            })
        })
        .collect()
}

/// Correlates every Banzhaf statistic with every graph statistic across the
/// datapoints of each dataset, then tallies in what share of datasets each
/// pair is significant. Datapoints with an undefined Gini are left out of the
/// Gini correlations only.
pub fn correlation_report(datasets: &[LabeledDataset]) -> Result<CorrelationReport> {
    let mut records = Vec::new();
    for (d, ds) in datasets.iter().enumerate() {
        let obs = observe(ds)?;
        for stat in BanzhafStat::ALL {
            for graph_stat in GraphStat::all() {
                let k = graph_stat.kind as usize;
                let (x, y): (Vec<f64>, Vec<f64>) = obs
                    .iter()
                    .filter_map(|o| stat.get(&o.stats).map(|s| (s, o.metrics[k].get(graph_stat.metric))))
                    .unzip();
                let mut record = CorrelationRecord {
                    dataset: d,
                    banzhaf_stat: stat,
                    graph_stat,
                    n: x.len(),
                    rho: None,
                    p_value: None,
                    significant: false,
                    error: None,
                };
                match spearman(&x, &y) {
                    Ok((rho, p)) => {
                        record.rho = Some(rho);
                        record.p_value = Some(p);
                        record.significant = is_significant(rho, p);
                    }
                    Err(e) => record.error = Some(e.to_string()),
                }
                records.push(record);
            }
        }
    }

    let mut prevalence: Vec<PrevalenceRow> = BanzhafStat::ALL
        .into_iter()
        .flat_map(|stat| GraphStat::all().map(move |g| (stat, g)))
        .map(|(stat, graph_stat)| {
            let significant_datasets = records
                .iter()
                .filter(|r| r.banzhaf_stat == stat && r.graph_stat == graph_stat && r.significant)
                .count();
            let n = datasets.len();
            PrevalenceRow {
                banzhaf_stat: stat,
                graph_stat,
                significant_datasets,
                datasets: n,
                percent: if n == 0 { 0.0 } else { 100.0 * significant_datasets as f64 / n as f64 },
            }
        })
        .collect();
    prevalence.sort_by(|a, b| b.significant_datasets.cmp(&a.significant_datasets));

    Ok(CorrelationReport {
        datasets: datasets.len(),
        records,
        prevalence,
    })
}
