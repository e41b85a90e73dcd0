//! Per-transformation averaging and the weighted cross-transformation ensemble.

use serde::{Deserialize, Serialize};

use crate::index::{top_k, EmbeddingStore, RankedList, ScoreTag, ScoreVector};
use crate::paraphrase::ParaphraseKind;
use crate::{Error, Result};

/// Rescales to [0, 1] over the whole list; a constant list maps to zeros.
pub fn minmax_normalize(sv: &ScoreVector) -> ScoreVector {
    ScoreVector {
        qid: sv.qid.clone(),
        tag: sv.tag,
        values: minmax(&sv.values),
    }
}

fn minmax(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - lo) / range).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleWeights {
    pub user: f64,
    pub t2t: f64,
    pub t2i: f64,
    pub i2t: f64,
}

impl Default for EnsembleWeights {
    fn default() -> Self {
        EnsembleWeights {
            user: 1.0,
            t2t: 1.0,
            t2i: 0.5,
            i2t: 1.0,
        }
    }
}

impl EnsembleWeights {
    pub fn new(user: f64, t2t: f64, t2i: f64, i2t: f64) -> Result<Self> {
        let w = EnsembleWeights { user, t2t, t2i, i2t };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("user", self.user), ("t2t", self.t2t), ("t2i", self.t2i), ("i2t", self.i2t)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("weight {name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn for_kind(&self, kind: ParaphraseKind) -> f64 {
        match kind {
            ParaphraseKind::T2t => self.t2t,
            ParaphraseKind::T2i => self.t2i,
            ParaphraseKind::I2t => self.i2t,
        }
    }
}

/// Normalized mean of the valid members of one transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationScore {
    pub kind: ParaphraseKind,
    pub score: ScoreVector,
    pub n_members: usize,
}

/// Equal-weight mean of `members`, then min-max. `Ok(None)` when there are
/// no members: the transformation is absent, which is not the same as zero.
pub fn average_valid(kind: ParaphraseKind, members: &[ScoreVector]) -> Result<Option<TransformationScore>> {
    let Some(first) = members.first() else {
        return Ok(None);
    };
    let n = first.len();
    if members.iter().any(|m| m.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "{kind} members are not aligned to one store"
        )));
    }
    let mut sum = vec![0.0f64; n];
    for m in members {
        for (s, v) in sum.iter_mut().zip(&m.values) {
            *s += v;
        }
    }
    let count = members.len() as f64;
    let mean: Vec<f64> = sum.into_iter().map(|s| s / count).collect();
    Ok(Some(TransformationScore {
        kind,
        score: ScoreVector::new(first.qid.clone(), kind.into(), minmax(&mean)),
        n_members: members.len(),
    }))
}

/// `w_user * norm(user) + sum over present transformations of w_kind * score`.
pub fn weighted_ensemble(
    user: Option<&ScoreVector>,
    t2t: Option<&TransformationScore>,
    t2i: Option<&TransformationScore>,
    i2t: Option<&TransformationScore>,
    weights: &EnsembleWeights,
) -> Result<ScoreVector> {
    weights.validate()?;
    let user_norm = user.map(minmax_normalize);
    let mut terms: Vec<(f64, &ScoreVector)> = Vec::with_capacity(4);
    if let Some(u) = &user_norm {
        terms.push((weights.user, u));
    }
    for (expected, t) in [
        (ParaphraseKind::T2t, t2t),
        (ParaphraseKind::T2i, t2i),
        (ParaphraseKind::I2t, i2t),
    ] {
        if let Some(t) = t {
            if t.kind != expected {
                return Err(Error::InvalidArgument(format!(
                    "{} score passed in the {expected} slot",
                    t.kind
                )));
            }
            terms.push((weights.for_kind(t.kind), &t.score));
        }
    }
    let Some(&(_, first)) = terms.first() else {
        return Err(Error::InvalidArgument("ensemble needs at least one score list".into()));
    };
    let n = first.len();
    if terms.iter().any(|(_, sv)| sv.len() != n) {
        return Err(Error::InvalidArgument("ensemble inputs are not aligned".into()));
    }
    let mut values = vec![0.0f64; n];
    for (w, sv) in &terms {
        for (acc, v) in values.iter_mut().zip(&sv.values) {
            *acc += w * v;
        }
    }
    Ok(ScoreVector::new(first.qid.clone(), ScoreTag::Fused, values))
}

/// Final ranking of a fused score list.
pub fn argsort_rank(sv: &ScoreVector, store: &EmbeddingStore, depth: usize) -> Result<RankedList> {
    top_k(sv, store, depth)
}
