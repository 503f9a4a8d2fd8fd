//! Corpus-level summary of pipeline results.

use serde::{Deserialize, Serialize};

use crate::records::{Lengths, RecordResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl Distribution {
    /// Percentiles use the nearest-rank method.
    pub fn of(values: &[f64]) -> Option<Distribution> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let rank = |q: f64| v[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Some(Distribution {
            count: n,
            mean: v.iter().sum::<f64>() / n as f64,
            min: v[0],
            p50: rank(0.5),
            p90: rank(0.9),
            p99: rank(0.99),
            max: v[n - 1],
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageDistributions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<Distribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clean: Option<Distribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1: Option<Distribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage2: Option<Distribution>,
}

impl StageDistributions {
    fn of<'a>(lengths: impl Iterator<Item = &'a Lengths> + Clone) -> StageDistributions {
        let col = |f: fn(&Lengths) -> Option<usize>| {
            Distribution::of(
                &lengths
                    .clone()
                    .filter_map(f)
                    .map(|x| x as f64)
                    .collect::<Vec<_>>(),
            )
        };
        StageDistributions {
            raw: col(|l| Some(l.raw)),
            clean: col(|l| Some(l.clean)),
            stage1: col(|l| l.stage1),
            stage2: col(|l| l.stage2),
        }
    }
}

/// Mean per-record fraction removed by each step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Shrink {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total: Option<f64>,
}

impl Shrink {
    fn of<'a>(lengths: impl Iterator<Item = &'a Lengths> + Clone) -> Shrink {
        let mean = |f: &dyn Fn(&Lengths) -> Option<(usize, usize)>| {
            let r: Vec<f64> = lengths
                .clone()
                .filter_map(f)
                .filter(|&(before, _)| before > 0)
                .map(|(before, after)| 1.0 - after as f64 / before as f64)
                .collect();
            (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
        };
        Shrink {
            clean: mean(&|l| Some((l.raw, l.clean))),
            stage1: mean(&|l| l.stage1.map(|s| (l.clean, s))),
            stage2: mean(&|l| Some((l.stage1?, l.stage2?))),
            total: mean(&|l| l.stage2.or(l.stage1).map(|s| (l.raw, s))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProviderTotals {
    pub records: usize,
    pub calls: usize,
    pub nodes: usize,
    pub skipped: usize,
    /// Pooled over all records: skipped / nodes.
    pub skipped_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub ok: usize,
    pub failed: usize,
    pub unit: String,
    pub lengths: StageDistributions,
    pub bytes: StageDistributions,
    pub shrink: Shrink,
    pub byte_shrink: Shrink,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generative: Option<ProviderTotals>,
}

/// Aggregates successful results; failed ones are only counted.
pub fn report_stats(results: &[RecordResult]) -> Summary {
    let ok: Vec<&RecordResult> = results.iter().filter(|r| r.ok).collect();
    let lengths = ok.iter().map(|r| &r.lengths);
    let bytes = ok.iter().map(|r| &r.bytes);
    let generative = {
        let g: Vec<_> = ok.iter().filter_map(|r| r.generative.as_ref()).collect();
        (!g.is_empty()).then(|| {
            let nodes: usize = g.iter().map(|c| c.nodes).sum();
            let skipped: usize = g.iter().map(|c| c.skipped).sum();
            ProviderTotals {
                records: g.len(),
                calls: g.iter().map(|c| c.calls).sum(),
                nodes,
                skipped,
                skipped_fraction: if nodes == 0 {
                    0.0
                } else {
                    skipped as f64 / nodes as f64
                },
            }
        })
    };
    let mut units: Vec<&str> = ok.iter().map(|r| r.unit.as_str()).collect();
    units.dedup();
    Summary {
        records: results.len(),
        ok: ok.len(),
        failed: results.len() - ok.len(),
        unit: match units.as_slice() {
            [u] => u.to_string(),
            [] => String::new(),
            _ => "mixed".into(),
        },
        lengths: StageDistributions::of(lengths.clone()),
        bytes: StageDistributions::of(bytes.clone()),
        shrink: Shrink::of(lengths),
        byte_shrink: Shrink::of(bytes),
        generative,
    }
}
