use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{MetricReport, Qrels, RunEntry, RunFile, TopicQrels};
use crate::{Error, Result};

pub const DEFAULT_DEPTH: usize = 1000;
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfApParams {
    pub depth: usize,
    /// Smoothing added to the per-stratum precision estimate.
    pub epsilon: f64,
}

impl Default for InfApParams {
    fn default() -> Self {
        InfApParams {
            depth: DEFAULT_DEPTH,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Above {
    pooled: usize,
    rel: usize,
    nonrel: usize,
}

/// Extended inferred AP of one ranked list against stratified judgments.
pub fn xinfap(run: &[RunEntry], qrels: &TopicQrels, params: InfApParams) -> f64 {
    let strata = qrels.strata();
    let r_hat: f64 = strata
        .values()
        .filter(|s| s.relevant > 0)
        .map(|s| s.relevant as f64 / s.sampling_rate())
        .sum();
    if r_hat == 0.0 {
        return 0.0;
    }
    let slot: BTreeMap<u32, usize> = strata.keys().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut above = vec![Above::default(); slot.len()];
    let eps = params.epsilon;
    let mut sum = 0.0;
    for (i, entry) in run.iter().take(params.depth).enumerate() {
        let k = i + 1;
        let Some(judgment) = qrels.get(&entry.video_id) else {
            continue;
        };
        if judgment.is_relevant() {
            if k == 1 {
                sum += 1.0;
            } else {
                let km1 = (k - 1) as f64;
                let mut p_hat = 0.0;
                for a in above.iter().filter(|a| a.pooled > 0) {
                    let num = a.rel as f64 + eps;
                    let den = (a.rel + a.nonrel) as f64 + 2.0 * eps;
                    if den > 0.0 {
                        p_hat += (a.pooled as f64 / km1) * (num / den);
                    }
                }
                sum += 1.0 / k as f64 + (km1 / k as f64) * p_hat;
            }
        }
        let a = &mut above[slot[&judgment.stratum]];
        a.pooled += 1;
        if judgment.is_relevant() {
            a.rel += 1;
        } else if judgment.is_judged() {
            a.nonrel += 1;
        }
    }
    sum / r_hat
}

/// xinfAP for one topic; the topic must be present in both inputs.
pub fn xinfap_topic(run: &RunFile, qrels: &Qrels, topic: &str, params: InfApParams) -> Result<f64> {
    let judgments = qrels
        .topic(topic)
        .ok_or_else(|| Error::Eval(format!("topic {topic} is absent from the judgments")))?;
    let entries = run
        .topic(topic)
        .ok_or_else(|| Error::Eval(format!("topic {topic} is absent from the run")))?;
    Ok(xinfap(entries, judgments, params))
}

/// xinfAP of every topic in the run; a run topic without judgments is an error.
pub fn evaluate_run(run: &RunFile, qrels: &Qrels, params: InfApParams) -> Result<MetricReport> {
    let topics: Vec<(&str, &[RunEntry])> = run.topics().collect();
    let values = topics
        .par_iter()
        .map(|&(topic, entries)| {
            let judgments = qrels
                .topic(topic)
                .ok_or_else(|| Error::Eval(format!("topic {topic} is absent from the judgments")))?;
            Ok((topic.to_string(), xinfap(entries, judgments, params)))
        })
        .collect::<Result<BTreeMap<String, f64>>>()?;
    for (topic, _) in qrels.topics() {
        if run.topic(topic).is_none() {
            log::warn!("judged topic {topic} has no entries in the run and is not averaged");
        }
    }
    Ok(MetricReport::new("xinfAP", Some(params.depth), values))
}
