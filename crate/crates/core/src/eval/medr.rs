use std::collections::BTreeMap;

use super::RunFile;
use crate::{Error, Result};

/// Rank of each topic's known target and the lower median across topics.
#[derive(Debug, Clone, PartialEq)]
pub struct MedrReport {
    pub ranks: BTreeMap<String, usize>,
    pub medr: usize,
}

impl MedrReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (topic, r) in &self.ranks {
            out.push_str(&format!("rank\t{topic}\t{r}\n"));
        }
        out.push_str(&format!("medR\tall\t{}\n", self.medr));
        out
    }
}

/// Lower of the two central values for even lengths.
pub fn lower_median(values: &[usize]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    Some(v[(v.len() - 1) / 2])
}

/// `topic video_id` lines, one target per topic.
pub fn parse_targets(text: &str, source_name: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [topic, target] = fields[..] else {
            return Err(Error::parse(source_name, i + 1, "expected 2 fields (topic video_id)"));
        };
        if out.insert(topic.to_string(), target.to_string()).is_some() {
            return Err(Error::parse(source_name, i + 1, format!("second target for topic {topic}")));
        }
    }
    Ok(out)
}

pub fn medr(run: &RunFile, targets: &BTreeMap<String, String>) -> Result<MedrReport> {
    let mut ranks = BTreeMap::new();
    for (topic, target) in targets {
        let entries = run
            .topic(topic)
            .ok_or_else(|| Error::Eval(format!("topic {topic} is absent from the run")))?;
        let rank = entries
            .iter()
            .find(|e| &e.video_id == target)
            .map(|e| e.rank)
            .ok_or_else(|| Error::Eval(format!("target {target} of topic {topic} is not ranked")))?;
        ranks.insert(topic.clone(), rank);
    }
    let values: Vec<usize> = ranks.values().copied().collect();
    let medr = lower_median(&values).ok_or_else(|| Error::Eval("no targets".into()))?;
    Ok(MedrReport { ranks, medr })
}
