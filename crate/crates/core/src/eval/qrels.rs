use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::fsutil::read_to_string;
use crate::{Error, Result};

/// Relevance value of a pooled document that was not sampled for judging.
pub const UNSAMPLED: i32 = -1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrelEntry {
    pub stratum: u32,
    pub video_id: String,
    /// -1 pooled but unsampled, 0 judged non-relevant, >= 1 judged relevant.
    pub rel: i32,
}

impl QrelEntry {
    pub fn is_judged(&self) -> bool {
        self.rel >= 0
    }

    pub fn is_relevant(&self) -> bool {
        self.rel >= 1
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StratumStats {
    pub judged: usize,
    pub unsampled: usize,
    pub relevant: usize,
}

impl StratumStats {
    /// Fraction of the stratum's pooled documents that were judged.
    pub fn sampling_rate(&self) -> f64 {
        self.judged as f64 / (self.judged + self.unsampled) as f64
    }
}

/// Stratified judgments for one topic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopicQrels {
    entries: Vec<QrelEntry>,
    by_doc: HashMap<String, usize>,
}

impl TopicQrels {
    /// Builds a topic's judgments; fails on duplicate documents or on a
    /// stratum that has unsampled entries but nothing judged.
    pub fn from_entries(entries: Vec<QrelEntry>) -> std::result::Result<Self, String> {
        let mut t = TopicQrels::default();
        for e in entries {
            t.push(e)?;
        }
        t.check_strata()?;
        Ok(t)
    }

    fn push(&mut self, e: QrelEntry) -> std::result::Result<(), String> {
        if e.rel < UNSAMPLED {
            return Err(format!("relevance {} is below -1", e.rel));
        }
        if self.by_doc.contains_key(&e.video_id) {
            return Err(format!("duplicate judgment for {}", e.video_id));
        }
        self.by_doc.insert(e.video_id.clone(), self.entries.len());
        self.entries.push(e);
        Ok(())
    }

    fn check_strata(&self) -> std::result::Result<(), String> {
        for (s, st) in self.strata() {
            if st.judged == 0 && st.unsampled > 0 {
                return Err(format!("stratum {s} has unsampled entries but none judged"));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[QrelEntry] {
        &self.entries
    }

    pub fn get(&self, video_id: &str) -> Option<&QrelEntry> {
        self.by_doc.get(video_id).map(|&i| &self.entries[i])
    }

    pub fn strata(&self) -> BTreeMap<u32, StratumStats> {
        let mut out: BTreeMap<u32, StratumStats> = BTreeMap::new();
        for e in &self.entries {
            let st = out.entry(e.stratum).or_default();
            if e.is_judged() {
                st.judged += 1;
                if e.is_relevant() {
                    st.relevant += 1;
                }
            } else {
                st.unsampled += 1;
            }
        }
        out
    }
}

/// Judgments for all topics, from `topic stratum video_id rel` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    topics: BTreeMap<String, TopicQrels>,
}

impl Qrels {
    pub fn parse_str(text: &str, source_name: &str) -> Result<Self> {
        let mut topics: BTreeMap<String, TopicQrels> = BTreeMap::new();
        let mut first_line: HashMap<(String, u32), usize> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [topic, stratum, doc, rel] = fields[..] else {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("expected 4 fields (topic stratum video_id rel), got {}", fields.len()),
                ));
            };
            let stratum: u32 = stratum
                .parse()
                .map_err(|_| Error::parse(source_name, lineno, format!("bad stratum {stratum:?}")))?;
            let rel: i32 = rel
                .parse()
                .map_err(|_| Error::parse(source_name, lineno, format!("bad relevance {rel:?}")))?;
            first_line.entry((topic.to_string(), stratum)).or_insert(lineno);
            topics
                .entry(topic.to_string())
                .or_default()
                .push(QrelEntry {
                    stratum,
                    video_id: doc.to_string(),
                    rel,
                })
                .map_err(|r| Error::parse(source_name, lineno, format!("topic {topic}: {r}")))?;
        }
        for (topic, t) in &topics {
            for (s, st) in t.strata() {
                if st.judged == 0 && st.unsampled > 0 {
                    let line = first_line[&(topic.clone(), s)];
                    return Err(Error::parse(
                        source_name,
                        line,
                        format!("topic {topic} stratum {s} has unsampled entries but none judged"),
                    ));
                }
            }
        }
        Ok(Qrels { topics })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_str(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn insert(&mut self, topic: impl Into<String>, judgments: TopicQrels) {
        self.topics.insert(topic.into(), judgments);
    }

    pub fn topic(&self, topic: &str) -> Option<&TopicQrels> {
        self.topics.get(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &TopicQrels)> {
        self.topics.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }
}
