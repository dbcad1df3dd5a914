//! I-VT fixation identification, the class-balancing sample mask, and the
//! expert scanpath features used as a downstream baseline.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::gaze::{distance, is_sentinel};
use crate::CANONICAL_HZ;

pub const DEFAULT_VELOCITY_THRESHOLD_DEGPS: f64 = 100.0;
pub const DEFAULT_MIN_FIXATION_MS: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvtParams {
    pub velocity_threshold_degps: f64,
    pub min_fixation_ms: f64,
}

impl Default for IvtParams {
    fn default() -> Self {
        Self {
            velocity_threshold_degps: DEFAULT_VELOCITY_THRESHOLD_DEGPS,
            min_fixation_ms: DEFAULT_MIN_FIXATION_MS,
        }
    }
}

impl IvtParams {
    /// Shortest fixation run, in samples, that survives the duration rule.
    pub fn min_fixation_samples(&self) -> usize {
        let n = self.min_fixation_ms * CANONICAL_HZ / 1000.0;
        libm::ceil(n - 1e-9).max(0.0) as usize
    }
}

/// Per-sample labels, 1 = fixation, 0 = saccade.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FixationLabels(pub Vec<u8>);

impl FixationLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn fixation_count(&self) -> usize {
        self.0.iter().filter(|&&l| l == 1).count()
    }

    /// Maximal runs of fixation samples as `(start, len)`.
    pub fn fixation_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < self.0.len() {
            if self.0[i] == 1 {
                let start = i;
                while i < self.0.len() && self.0[i] == 1 {
                    i += 1;
                }
                runs.push((start, i - start));
            } else {
                i += 1;
            }
        }
        runs
    }
}

/// Binary mask selecting equally many fixation and saccade samples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleMask(pub Vec<u8>);

impl SampleMask {
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&m| m == 1).count()
    }

    pub fn is_balanced(&self, labels: &FixationLabels) -> bool {
        if self.0.len() != labels.len() {
            return false;
        }
        let (mut fix, mut sac) = (0usize, 0usize);
        for (&m, &l) in self.0.iter().zip(&labels.0) {
            if m == 1 {
                if l == 1 {
                    fix += 1;
                } else {
                    sac += 1;
                }
            }
        }
        fix == sac
    }
}

/// Gaze speed in deg/s. Differences touching a sentinel sample are
/// reported as `+inf` (saccade speed, excluded from statistics).
pub fn velocity(points: &[[f64; 2]]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: points.len(),
        });
    }
    let mut v = vec![0.0; points.len()];
    for i in 1..points.len() {
        let (a, b) = (points[i - 1], points[i]);
        v[i] = if is_sentinel(a) || is_sentinel(b) {
            f64::INFINITY
        } else {
            CANONICAL_HZ * distance(a, b)
        };
    }
    v[0] = v[1];
    Ok(v)
}

pub fn ivt_labels(points: &[[f64; 2]], params: &IvtParams) -> Result<FixationLabels> {
    let v = velocity(points)?;
    let mut labels: Vec<u8> = v
        .iter()
        .zip(points)
        .map(|(&s, &p)| u8::from(!is_sentinel(p) && s < params.velocity_threshold_degps))
        .collect();
    let min_len = params.min_fixation_samples();
    let mut i = 0;
    while i < labels.len() {
        if labels[i] == 1 {
            let start = i;
            while i < labels.len() && labels[i] == 1 {
                i += 1;
            }
            if i - start < min_len {
                labels[start..i].iter_mut().for_each(|l| *l = 0);
            }
        } else {
            i += 1;
        }
    }
    Ok(FixationLabels(labels))
}

/// Selects `min(#fix, #sac)` samples of each class uniformly without
/// replacement.
pub fn balanced_mask<R: RngCore + ?Sized>(labels: &FixationLabels, rng: &mut R) -> SampleMask {
    let fix: Vec<usize> = (0..labels.len()).filter(|&i| labels.0[i] == 1).collect();
    let sac: Vec<usize> = (0..labels.len()).filter(|&i| labels.0[i] != 1).collect();
    let c = fix.len().min(sac.len());
    let mut mask = vec![0u8; labels.len()];
    if c > 0 {
        for pool in [&fix, &sac] {
            for k in index::sample(rng, pool.len(), c) {
                mask[pool[k]] = 1;
            }
        }
    }
    SampleMask(mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExpertFeatures {
    pub n_fixations: usize,
    pub total_fixation_duration_s: f64,
    pub mean_saccade_speed_degps: f64,
    pub max_saccade_speed_degps: f64,
    pub mean_fixation_speed_degps: f64,
}

impl ExpertFeatures {
    pub const LEN: usize = 5;

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.n_fixations as f64,
            self.total_fixation_duration_s,
            self.mean_saccade_speed_degps,
            self.max_saccade_speed_degps,
            self.mean_fixation_speed_degps,
        ]
    }
}

pub fn expert_features(points: &[[f64; 2]], labels: &FixationLabels) -> Result<ExpertFeatures> {
    if labels.len() != points.len() {
        return Err(Error::Shape(alloc::format!(
            "{} labels for {} points",
            labels.len(),
            points.len()
        )));
    }
    let v = velocity(points)?;
    let (mut fix_sum, mut fix_n) = (0.0, 0usize);
    let (mut sac_sum, mut sac_n, mut sac_max) = (0.0, 0usize, 0.0f64);
    for (&s, &l) in v.iter().zip(&labels.0) {
        if !s.is_finite() {
            continue;
        }
        if l == 1 {
            fix_sum += s;
            fix_n += 1;
        } else {
            sac_sum += s;
            sac_n += 1;
            sac_max = sac_max.max(s);
        }
    }
    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
    Ok(ExpertFeatures {
        n_fixations: labels.fixation_runs().len(),
        total_fixation_duration_s: labels.fixation_count() as f64 / CANONICAL_HZ,
        mean_saccade_speed_degps: mean(sac_sum, sac_n),
        max_saccade_speed_degps: sac_max,
        mean_fixation_speed_degps: mean(fix_sum, fix_n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::OFFSCREEN_SENTINEL;

    fn still(n: usize) -> Vec<[f64; 2]> {
        vec![[1.0, -2.0]; n]
    }

    #[test]
    fn velocity_basics() {
        assert!(velocity(&still(5)).unwrap().iter().all(|&v| v == 0.0));
        let pts: Vec<[f64; 2]> = (0..4).map(|i| [2.0 * i as f64, 0.0]).collect();
        let v = velocity(&pts).unwrap();
        assert!(v.iter().all(|&s| (s - 120.0).abs() < 1e-12));
        let pts = [[0.0, 0.0], [0.0, 3.0], [0.0, 3.5]];
        let v = velocity(&pts).unwrap();
        assert_eq!(v[0], v[1]);
        assert!(velocity(&[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn min_fixation_is_twelve_samples() {
        assert_eq!(IvtParams::default().min_fixation_samples(), 12);
    }

    #[test]
    fn one_second_still_is_all_fixation() {
        let l = ivt_labels(&still(60), &IvtParams::default()).unwrap();
        assert!(l.0.iter().all(|&x| x == 1));
    }

    #[test]
    fn fast_motion_is_all_saccade() {
        let step = 100.0 / 60.0 + 0.01;
        let pts: Vec<[f64; 2]> = (0..40).map(|i| [step * i as f64, 0.0]).collect();
        let l = ivt_labels(&pts, &IvtParams::default()).unwrap();
        assert!(l.0.iter().all(|&x| x == 0));
    }

    #[test]
    fn short_still_run_is_relabelled() {
        // 6 saccade samples, 6 still samples (100 ms), 6 saccade samples
        let mut pts = Vec::new();
        let mut x = 0.0;
        for _ in 0..6 {
            x += 3.0;
            pts.push([x, 0.0]);
        }
        for _ in 0..6 {
            pts.push([x, 0.0]);
        }
        for _ in 0..6 {
            x += 3.0;
            pts.push([x, 0.0]);
        }
        let l = ivt_labels(&pts, &IvtParams::default()).unwrap();
        assert!(l.0.iter().all(|&x| x == 0));
    }

    #[test]
    fn threshold_tie_is_saccade() {
        let step = 100.0 / 60.0;
        let pts: Vec<[f64; 2]> = (0..30).map(|i| [step * i as f64, 0.0]).collect();
        let v = velocity(&pts).unwrap();
        let params = IvtParams {
            velocity_threshold_degps: v[1],
            ..IvtParams::default()
        };
        assert!(ivt_labels(&pts, &params).unwrap().0.iter().all(|&x| x == 0));
    }

    #[test]
    fn sentinels_are_saccades() {
        let mut pts = still(40);
        pts[20] = [OFFSCREEN_SENTINEL, OFFSCREEN_SENTINEL];
        let l = ivt_labels(&pts, &IvtParams::default()).unwrap();
        assert_eq!(l.0[20], 0);
        assert_eq!(l.0[21], 0);
        assert_eq!(&l.0[..20], &[1u8; 20][..]);
        assert_eq!(&l.0[22..], &[1u8; 18][..]);
    }

    #[test]
    fn mask_ninety_ten() {
        let mut labels = vec![1u8; 90];
        labels.extend([0u8; 10]);
        let labels = FixationLabels(labels);
        let m = balanced_mask(&labels, &mut rng::seeded(1));
        assert_eq!(m.count(), 20);
        assert!(m.is_balanced(&labels));
        assert_eq!(m.0[90..].iter().filter(|&&x| x == 1).count(), 10);
    }

    #[test]
    fn mask_single_class_is_empty() {
        let labels = FixationLabels(vec![1; 30]);
        assert_eq!(balanced_mask(&labels, &mut rng::seeded(1)).count(), 0);
    }

    #[test]
    fn mask_even_split_may_take_everything() {
        let labels = FixationLabels((0..40).map(|i| (i % 2) as u8).collect());
        let m = balanced_mask(&labels, &mut rng::seeded(9));
        assert_eq!(m.count(), 40);
    }

    #[test]
    fn expert_features_still_second() {
        let pts = still(60);
        let l = ivt_labels(&pts, &IvtParams::default()).unwrap();
        let f = expert_features(&pts, &l).unwrap();
        assert_eq!(
            f,
            ExpertFeatures {
                n_fixations: 1,
                total_fixation_duration_s: 1.0,
                ..ExpertFeatures::default()
            }
        );
    }

    #[test]
    fn expert_features_two_runs() {
        let mut pts = still(20);
        pts.extend(vec![[10.0, -2.0]; 20]);
        let l = ivt_labels(&pts, &IvtParams::default()).unwrap();
        let f = expert_features(&pts, &l).unwrap();
        assert_eq!(f.n_fixations, 2);
        assert_eq!(l.fixation_count(), 39);
        assert!((f.max_saccade_speed_degps - 540.0).abs() < 1e-9);
    }

    #[test]
    fn expert_features_all_saccade() {
        let pts: Vec<[f64; 2]> = (0..30).map(|i| [3.0 * i as f64, 0.0]).collect();
        let l = ivt_labels(&pts, &IvtParams::default()).unwrap();
        let f = expert_features(&pts, &l).unwrap();
        assert_eq!(f.n_fixations, 0);
        assert_eq!(f.total_fixation_duration_s, 0.0);
        assert_eq!(f.mean_fixation_speed_degps, 0.0);
    }
}
