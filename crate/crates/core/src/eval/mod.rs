//! Relevance judgments, run files and retrieval metrics.

mod infap;
mod medr;
mod qrels;
mod run;
mod signif;

use std::collections::BTreeMap;

pub use infap::{evaluate_run, xinfap, xinfap_topic, InfApParams, DEFAULT_DEPTH, DEFAULT_EPSILON};
pub use medr::{lower_median, medr, parse_targets, MedrReport};
pub use qrels::{QrelEntry, Qrels, StratumStats, TopicQrels, UNSAMPLED};
pub use run::{RunEntry, RunFile};
pub use signif::{
    exact_p_value, monte_carlo_p_value, randomization_test, DEFAULT_ITERATIONS, EXACT_MAX_TOPICS,
};

/// Per-topic values of one metric and their arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: String,
    pub depth: Option<usize>,
    pub per_topic: BTreeMap<String, f64>,
    pub mean: f64,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, depth: Option<usize>, per_topic: BTreeMap<String, f64>) -> Self {
        let mean = if per_topic.is_empty() {
            0.0
        } else {
            per_topic.values().sum::<f64>() / per_topic.len() as f64
        };
        MetricReport {
            metric: metric.into(),
            depth,
            per_topic,
            mean,
        }
    }

    /// `metric<TAB>topic<TAB>value` lines, topic-sorted, then `metric<TAB>all<TAB>mean`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (topic, v) in &self.per_topic {
            out.push_str(&format!("{}\t{topic}\t{v:.6}\n", self.metric));
        }
        out.push_str(&format!("{}\tall\t{:.6}\n", self.metric, self.mean));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_mean_and_tsv() {
        let per: BTreeMap<String, f64> = [("2".to_string(), 0.5), ("1".to_string(), 0.25)].into();
        let r = MetricReport::new("xinfAP", Some(1000), per);
        assert_eq!(r.mean, 0.375);
        assert_eq!(r.to_tsv(), "xinfAP\t1\t0.250000\nxinfAP\t2\t0.500000\nxinfAP\tall\t0.375000\n");
    }
}
