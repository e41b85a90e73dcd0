//! Consistency checking of paraphrases against QA pairs from the user query.
//!
//! Each paraphrase is scored by how many QA pairs it agrees with. Within each
//! transformation, the paraphrases reaching the maximum count are valid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gateway::Provider;
use crate::paraphrase::{ParaphraseBundle, ParaphraseKind, ParaphrasedQuery, UserQuery};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QaKind {
    #[serde(rename = "open")]
    Open,
    #[serde(rename = "yesno")]
    YesNo,
}

/// The aspect of the user query a QA pair probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Person,
    Action,
    Object,
    Location,
    Time,
    Colour,
    Quantity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    #[serde(rename = "q")]
    pub question: String,
    #[serde(rename = "a")]
    pub answer: String,
    pub kind: QaKind,
    pub aspect: Aspect,
}

impl QaPair {
    pub fn yes_no(question: impl Into<String>, answer: impl Into<String>) -> Self {
        QaPair {
            question: question.into(),
            answer: answer.into(),
            kind: QaKind::YesNo,
            aspect: Aspect::Object,
        }
    }
}

/// Per-pair alignment flags and their total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentCount {
    pub per_pair: Vec<bool>,
    pub count: usize,
}

impl AlignmentCount {
    pub fn from_flags(per_pair: Vec<bool>) -> Self {
        let count = per_pair.iter().filter(|&&b| b).count();
        AlignmentCount { per_pair, count }
    }

    /// Accepts a reported count only if it agrees with the flags.
    pub fn checked(per_pair: Vec<bool>, count: usize) -> std::result::Result<Self, String> {
        let actual = per_pair.iter().filter(|&&b| b).count();
        if actual != count {
            return Err(format!("count {count} disagrees with {actual} aligned flags"));
        }
        Ok(AlignmentCount { per_pair, count })
    }
}

/// The argmax set of one transformation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidSet {
    pub kind: ParaphraseKind,
    pub max_count: usize,
    pub member_ordinals: Vec<usize>,
}

pub fn generate_qa(provider: &dyn Provider, query: &UserQuery) -> Result<Vec<QaPair>> {
    if query.text.trim().is_empty() {
        return Err(Error::InvalidArgument("query text must be non-empty".into()));
    }
    let pairs = provider.qa_generate(&query.text)?;
    if pairs.is_empty() {
        return Err(Error::protocol("qa_generate", "empty pair list"));
    }
    Ok(pairs)
}

/// Counts the QA pairs `p` agrees with and records the count on `p`.
pub fn score_paraphrase(
    provider: &dyn Provider,
    p: &mut ParaphrasedQuery,
    qa: &[QaPair],
) -> Result<AlignmentCount> {
    if qa.is_empty() {
        return Err(Error::InvalidArgument("no QA pairs to verify against".into()));
    }
    let candidate = p.candidate().ok_or_else(|| {
        Error::InvalidArgument(format!("{} entry {} has no payload", p.kind, p.ordinal))
    })?;
    let count = provider.qa_verify(candidate, qa)?;
    p.verified_count = Some(count.count);
    Ok(count)
}

/// All positions holding the maximum count, ascending. An all-zero vector
/// keeps every position; an empty one yields an empty set.
pub fn select_valid(kind: ParaphraseKind, counts: &[usize]) -> ValidSet {
    let max_count = counts.iter().copied().max().unwrap_or(0);
    ValidSet {
        kind,
        max_count,
        member_ordinals: counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == max_count)
            .map(|(i, _)| i)
            .collect(),
    }
}

/// Sets `valid` on every entry from its `verified_count`. Entries without a
/// count (failed verification) are never valid.
pub fn apply_selection(kind: ParaphraseKind, entries: &mut [ParaphrasedQuery]) -> ValidSet {
    let scored: Vec<(usize, usize)> = entries
        .iter()
        .filter_map(|p| p.verified_count.map(|c| (p.ordinal, c)))
        .collect();
    let local = select_valid(kind, &scored.iter().map(|&(_, c)| c).collect::<Vec<_>>());
    let members: Vec<usize> = local.member_ordinals.iter().map(|&i| scored[i].0).collect();
    for p in entries.iter_mut() {
        p.valid = Some(members.binary_search(&p.ordinal).is_ok());
    }
    ValidSet {
        kind,
        max_count: local.max_count,
        member_ordinals: members,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyFailure {
    pub kind: ParaphraseKind,
    pub ordinal: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub sets: Vec<ValidSet>,
    pub failures: Vec<VerifyFailure>,
}

impl VerifyOutcome {
    pub fn set(&self, kind: ParaphraseKind) -> &ValidSet {
        self.sets.iter().find(|s| s.kind == kind).expect("one set per kind")
    }
}

/// Scores every paraphrase in `bundle` and marks the argmax sets valid.
///
/// A paraphrase whose verification call fails is marked invalid with the
/// error recorded; the rest of its transformation is unaffected.
pub fn verify_bundle(provider: &dyn Provider, bundle: &mut ParaphraseBundle) -> Result<VerifyOutcome> {
    if bundle.qa.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "bundle {} has no QA pairs",
            bundle.query.qid
        )));
    }
    let qa = bundle.qa.clone();
    let mut sets = Vec::with_capacity(3);
    let mut failures = Vec::new();
    for kind in ParaphraseKind::ALL {
        let entries = bundle.entries_mut(kind);
        let errors: Vec<Option<String>> = entries
            .par_iter_mut()
            .map(|p| {
                p.verified_count = None;
                p.error = None;
                score_paraphrase(provider, p, &qa).err().map(|e| e.to_string())
            })
            .collect();
        for (p, err) in entries.iter_mut().zip(errors) {
            if let Some(error) = err {
                log::warn!("{kind} paraphrase {} failed verification: {error}", p.ordinal);
                failures.push(VerifyFailure {
                    kind,
                    ordinal: p.ordinal,
                    error: error.clone(),
                });
                p.error = Some(error);
            }
        }
        sets.push(apply_selection(kind, entries));
    }
    Ok(VerifyOutcome { sets, failures })
}

/// Tab-separated audit of a verified bundle: ordinal, kind, count, valid.
pub fn audit_tsv(bundle: &ParaphraseBundle) -> String {
    let mut out = String::from("ordinal\tkind\tcount\tvalid\n");
    for kind in ParaphraseKind::ALL {
        for p in bundle.entries(kind) {
            let count = p.verified_count.map_or_else(|| "NA".to_string(), |c| c.to_string());
            let valid = p.valid.map_or("NA", |v| if v { "true" } else { "false" });
            out.push_str(&format!("{}\t{kind}\t{count}\t{valid}\n", p.ordinal));
        }
    }
    out
}
