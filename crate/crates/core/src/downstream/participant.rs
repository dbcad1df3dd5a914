//! Participant-level features: one block per roster stimulus, either the
//! scanpath embedding or the expert fixation statistics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::lasso::{lasso_cv, EvalReport, LassoConfig};
use crate::error::{Error, Result};
use crate::fixation::{expert_features, ivt_labels, ExpertFeatures, IvtParams};
use crate::gaze::Scanpath;
use crate::model::ObfModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantRecord {
    pub participant_id: String,
    /// `true` is the positive (clinical) class.
    pub label: bool,
    /// One slot per roster stimulus, in roster order.
    pub scanpaths: Vec<Option<Scanpath>>,
}

/// Sorted distinct stimulus ids of a corpus.
pub fn roster(corpus: &[Scanpath]) -> Vec<String> {
    let mut ids: Vec<String> = corpus.iter().map(|s| s.stimulus_id.clone()).collect();
    ids.sort();
    ids.dedup();
    ids
}

/// Groups a corpus into one record per labeled participant, sorted by id.
/// The first scanpath of a (participant, stimulus) pair is kept; scanpaths
/// of stimuli outside the roster are ignored.
pub fn participant_records(
    corpus: &[Scanpath],
    roster: &[String],
    labels: &BTreeMap<String, bool>,
) -> Result<Vec<ParticipantRecord>> {
    let slot: BTreeMap<&str, usize> = roster
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut records: BTreeMap<&str, ParticipantRecord> = labels
        .iter()
        .map(|(p, &label)| {
            (
                p.as_str(),
                ParticipantRecord {
                    participant_id: p.clone(),
                    label,
                    scanpaths: vec![None; roster.len()],
                },
            )
        })
        .collect();
    for sp in corpus {
        let rec = records.get_mut(sp.participant_id.as_str()).ok_or_else(|| {
            Error::Invalid(format!("participant `{}` has no label", sp.participant_id))
        })?;
        if let Some(&i) = slot.get(sp.stimulus_id.as_str()) {
            rec.scanpaths[i].get_or_insert_with(|| sp.clone());
        }
    }
    Ok(records.into_values().collect())
}

/// Concatenated embeddings in roster order. Missing scanpaths, and ones
/// too short to encode, contribute a zero block.
pub fn participant_vector(model: &ObfModel, rec: &ParticipantRecord) -> Result<Vec<f64>> {
    let dim = model.embedding_dim();
    let mut out = Vec::with_capacity(rec.scanpaths.len() * dim);
    for sp in &rec.scanpaths {
        match sp.as_ref().map(|s| model.encode(&s.points)) {
            Some(Ok(e)) => out.extend(e),
            Some(Err(Error::TooShort { .. })) | None => out.extend(core::iter::repeat_n(0.0, dim)),
            Some(Err(e)) => return Err(e),
        }
    }
    Ok(out)
}

/// Expert fixation statistics in roster order, zero-filled like
/// [`participant_vector`].
pub fn expert_vector(rec: &ParticipantRecord, ivt: &IvtParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(rec.scanpaths.len() * ExpertFeatures::LEN);
    for sp in &rec.scanpaths {
        let feats = sp.as_ref().and_then(|s| {
            let labels = ivt_labels(&s.points, ivt).ok()?;
            expert_features(&s.points, &labels).ok()
        });
        match feats {
            Some(f) => out.extend(f.to_array()),
            None => out.extend([0.0; ExpertFeatures::LEN]),
        }
    }
    out
}

/// The cross-validation protocol of [`lasso_cv`] on expert features; with
/// the same `cfg` the folds match the embedding run.
pub fn expert_baseline(
    records: &[ParticipantRecord],
    ivt: &IvtParams,
    cfg: &LassoConfig,
) -> Result<EvalReport> {
    let x: Vec<Vec<f64>> = records.iter().map(|r| expert_vector(r, ivt)).collect();
    let y: Vec<bool> = records.iter().map(|r| r.label).collect();
    lasso_cv(&x, &y, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Backbone, ModelConfig, TaskSet};

    fn sp(p: &str, s: &str, n: usize) -> Scanpath {
        Scanpath {
            points: (0..n).map(|i| [libm::sin(i as f64 * 0.1), 0.5]).collect(),
            source_tag: "t".into(),
            participant_id: p.into(),
            stimulus_id: s.into(),
            screen_halfextent_deg: [20.0, 12.0],
        }
    }

    #[test]
    fn vector_has_roster_blocks_with_zero_fill() {
        let corpus = vec![sp("a", "s1", 120), sp("a", "s2", 120), sp("b", "s2", 120)];
        let ros = roster(&corpus);
        let labels = BTreeMap::from([("a".into(), true), ("b".into(), false)]);
        let recs = participant_records(&corpus, &ros, &labels).unwrap();
        let cfg = ModelConfig {
            backbone: Backbone::Gru,
            hidden: 8,
            ..Default::default()
        };
        let model = ObfModel::new(cfg, TaskSet::none(), 0).unwrap();
        let dim = model.embedding_dim();
        let va = participant_vector(&model, &recs[0]).unwrap();
        let vb = participant_vector(&model, &recs[1]).unwrap();
        assert_eq!(va.len(), 2 * dim);
        assert_eq!(vb.len(), 2 * dim);
        assert!(vb[..dim].iter().all(|&v| v == 0.0));
        assert!(va[..dim].iter().any(|&v| v != 0.0));
        assert_eq!(vb, participant_vector(&model, &recs[1]).unwrap());
        assert_eq!(
            expert_vector(&recs[1], &IvtParams::default()).len(),
            2 * ExpertFeatures::LEN
        );
    }

    #[test]
    fn unlabeled_participant_is_rejected() {
        let corpus = vec![sp("a", "s1", 50)];
        let err = participant_records(&corpus, &roster(&corpus), &BTreeMap::new());
        assert!(err.is_err());
    }
}
