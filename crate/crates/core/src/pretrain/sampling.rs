//! Segment sampling and single-source batch planning.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::fixation::{self, FixationLabels, SampleMask};
use crate::gaze::Scanpath;
use crate::rng;

use super::PretrainConfig;

/// An input segment, the segment right after it, and the fixation targets
/// of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPair {
    pub x: Vec<[f64; 2]>,
    pub future: Vec<[f64; 2]>,
    pub fi: FixationLabels,
    pub mask: SampleMask,
}

/// Two short segments and whether they come from the same scanpath.
#[derive(Debug, Clone, PartialEq)]
pub struct ClPair {
    pub x1: Vec<[f64; 2]>,
    pub x2: Vec<[f64; 2]>,
    pub same_source: bool,
}

pub fn sample_segment_pair<R: RngCore + ?Sized>(
    sp: &Scanpath,
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<SegmentPair> {
    let (lo, hi) = cfg.input_len_samples();
    let horizon = cfg.pc_horizon_samples();
    let needed = lo + horizon;
    if sp.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: sp.len(),
        });
    }
    let t = rng::uniform_usize(rng, lo, hi.min(sp.len() - horizon));
    let start = rng::uniform_usize(rng, 0, sp.len() - horizon - t);
    let x = sp.points[start..start + t].to_vec();
    let future = sp.points[start + t..start + t + horizon].to_vec();
    let fi = fixation::ivt_labels(&x, &cfg.ivt)?;
    let mask = fixation::balanced_mask(&fi, rng);
    Ok(SegmentPair {
        x,
        future,
        fi,
        mask,
    })
}

fn cl_segment_len<R: RngCore + ?Sized>(len: usize, cfg: &PretrainConfig, rng: &mut R) -> usize {
    let (a, b) = cfg.cl_frac;
    let lo = libm::ceil(a * len as f64) as usize;
    let hi = libm::floor(b * len as f64) as usize;
    rng::uniform_usize(rng, lo.max(1), hi.max(lo).max(1)).min(len)
}

fn cut<R: RngCore + ?Sized>(sp: &Scanpath, len: usize, rng: &mut R) -> (usize, Vec<[f64; 2]>) {
    let start = rng::uniform_usize(rng, 0, sp.len() - len);
    (start, sp.points[start..start + len].to_vec())
}

/// One contrastive pair per scanpath in the batch: with probability 1/2 two
/// segments of that scanpath (distinct starts), otherwise one of it and one
/// of another scanpath of the batch.
pub fn sample_cl_pairs<R: RngCore + ?Sized>(
    batch: &[&Scanpath],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<Vec<ClPair>> {
    if batch.len() < 2 {
        return Err(Error::Invalid(
            "contrastive pairs need at least two scanpaths".into(),
        ));
    }
    if let Some(other) = batch.iter().find(|s| s.source_tag != batch[0].source_tag) {
        return Err(Error::MixedSources(
            batch[0].source_tag.clone(),
            other.source_tag.clone(),
        ));
    }
    let mut pairs = Vec::with_capacity(batch.len());
    for (i, sp) in batch.iter().enumerate() {
        let same = rng.random_bool(0.5);
        let len1 = cl_segment_len(sp.len(), cfg, rng);
        let (s1, x1) = cut(sp, len1, rng);
        let x2 = if same {
            let len2 = cl_segment_len(sp.len(), cfg, rng);
            let room = sp.len() - len2;
            let mut s2 = rng::uniform_usize(rng, 0, room);
            while s2 == s1 && room > 0 {
                s2 = rng::uniform_usize(rng, 0, room);
            }
            sp.points[s2..s2 + len2].to_vec()
        } else {
            let mut j = rng::uniform_usize(rng, 0, batch.len() - 2);
            if j >= i {
                j += 1;
            }
            let other = batch[j];
            let len2 = cl_segment_len(other.len(), cfg, rng);
            cut(other, len2, rng).1
        };
        pairs.push(ClPair {
            x1,
            x2,
            same_source: same,
        });
    }
    Ok(pairs)
}

/// Splits scanpath indices into shuffled mini-batches that each hold a
/// single source. A trailing batch of one is merged into the previous batch
/// of its source.
pub fn plan_batches<R: RngCore + ?Sized>(
    sources: &[&str],
    batch: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in sources.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut batches = Vec::new();
    for (_, mut idx) in groups {
        idx.shuffle(rng);
        let mut chunks: Vec<Vec<usize>> = idx.chunks(batch.max(1)).map(<[usize]>::to_vec).collect();
        if chunks.len() > 1 && chunks.last().is_some_and(|c| c.len() == 1) {
            let last = chunks.pop().unwrap();
            chunks.last_mut().unwrap().extend(last);
        }
        batches.extend(chunks);
    }
    batches.shuffle(rng);
    batches
}
