use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::fsutil::{read_to_string, write_atomic};
use crate::index::RankedList;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub video_id: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// TREC run: `topic Q0 video_id rank score tag`, ranks consecutive from 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    topics: BTreeMap<String, Vec<RunEntry>>,
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

impl RunFile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds (or replaces) the topic `list.qid` with the ranked entries.
    pub fn insert_ranked(&mut self, list: &RankedList, tag: &str) -> Result<()> {
        if !is_token(tag) || !is_token(&list.qid) {
            return Err(Error::InvalidArgument(format!(
                "run topic {:?} and tag {tag:?} must be non-empty without whitespace",
                list.qid
            )));
        }
        let entries = list
            .entries
            .iter()
            .map(|e| RunEntry {
                video_id: e.video_id.clone(),
                rank: e.rank,
                score: e.score,
                tag: tag.to_string(),
            })
            .collect();
        self.topics.insert(list.qid.clone(), entries);
        Ok(())
    }

    pub fn parse_str(text: &str, source_name: &str) -> Result<Self> {
        let mut topics: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
        let mut seen: HashMap<String, HashSet<String>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [topic, _q0, doc, rank, score, tag] = fields[..] else {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("expected 6 fields (topic Q0 video_id rank score tag), got {}", fields.len()),
                ));
            };
            let rank: usize = rank
                .parse()
                .map_err(|_| Error::parse(source_name, lineno, format!("bad rank {rank:?}")))?;
            let score: f64 = score
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| Error::parse(source_name, lineno, format!("bad score {score:?}")))?;
            let entries = topics.entry(topic.to_string()).or_default();
            let expected = entries.len() + 1;
            if rank != expected {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("topic {topic}: expected rank {expected}, got {rank}"),
                ));
            }
            if !seen.entry(topic.to_string()).or_default().insert(doc.to_string()) {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("topic {topic}: duplicate video {doc}"),
                ));
            }
            entries.push(RunEntry {
                video_id: doc.to_string(),
                rank,
                score,
                tag: tag.to_string(),
            });
        }
        Ok(RunFile { topics })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_str(&read_to_string(path)?, &path.display().to_string())
    }

    /// Topic-sorted TREC text with six-decimal scores.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (topic, entries) in &self.topics {
            for e in entries {
                out.push_str(&format!(
                    "{topic} Q0 {} {} {:.6} {}\n",
                    e.video_id, e.rank, e.score, e.tag
                ));
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_trec_string().as_bytes())
    }

    pub fn topic(&self, topic: &str) -> Option<&[RunEntry]> {
        self.topics.get(topic).map(Vec::as_slice)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &[RunEntry])> {
        self.topics.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }
}
