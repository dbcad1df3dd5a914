//! Synthetic scanpaths with known fixation/saccade labels.
//!
//! Every stimulus gets a layout of cluster centers; a scanpath walks back
//! and forth along that layout, holding still (with per-sample jitter) at
//! each visited center and sweeping linearly between them. Participants
//! differ in jitter, dwell time and a constant spatial offset, so both the
//! stimulus and the scanpath identity are learnable.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::fixation::{FixationLabels, DEFAULT_MIN_FIXATION_MS, DEFAULT_VELOCITY_THRESHOLD_DEGPS};
use crate::gaze::{self, RawRecording, RawSample, Scanpath, ScreenGeometry};
use crate::{math, rng, CANONICAL_HZ};

/// Saccade sweeps move at least this factor faster than the I-VT threshold.
const SACCADE_SPEED_MARGIN: f64 = 1.25;
/// Layout centers keep this distance (deg) from the screen edge.
const EDGE_MARGIN_DEG: f64 = 1.0;
const LAYOUT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_participants: usize,
    pub n_stimuli: usize,
    pub scanpaths_per_pair: usize,
    pub duration_s: f64,
    pub fixation_ms: (f64, f64),
    pub saccade_ms: (f64, f64),
    pub amplitude_deg: (f64, f64),
    pub jitter_sd_deg: f64,
    /// Scatter of fixation targets around their cluster center.
    pub target_spread_deg: f64,
    pub clusters_per_stimulus: usize,
    pub jitter_scale_range: (f64, f64),
    pub dwell_bias_range: (f64, f64),
    /// Half-width of the uniform per-participant spatial offset.
    pub participant_offset_deg: f64,
    /// Dwell multiplier applied to participants with label 1.
    pub class_dwell_factor: f64,
    pub positive_fraction: f64,
    pub geometry: ScreenGeometry,
    pub source_tag: String,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_participants: 10,
            n_stimuli: 20,
            scanpaths_per_pair: 1,
            duration_s: 12.0,
            fixation_ms: (250.0, 600.0),
            saccade_ms: (20.0, 60.0),
            amplitude_deg: (4.0, 12.0),
            jitter_sd_deg: 0.15,
            target_spread_deg: 0.3,
            clusters_per_stimulus: 6,
            jitter_scale_range: (0.5, 1.5),
            dwell_bias_range: (0.75, 1.35),
            participant_offset_deg: 1.0,
            class_dwell_factor: 1.0,
            positive_fraction: 0.5,
            geometry: ScreenGeometry {
                width_px: 1920,
                height_px: 1080,
                width_mm: 480.0,
                height_mm: 270.0,
                viewing_distance_mm: 650.0,
            },
            source_tag: "synth".into(),
            seed: 0,
        }
    }
}

fn ordered_positive(r: (f64, f64)) -> bool {
    r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite()
}

impl SynthConfig {
    /// Per-axis bound on how far a fixation target strays from its
    /// cluster center.
    fn target_clamp(&self) -> f64 {
        2.0 * self.target_spread_deg
    }

    /// Smallest amplitude whose one-sample sweep still clears the velocity
    /// threshold with margin.
    pub fn min_sweepable_amplitude() -> f64 {
        DEFAULT_VELOCITY_THRESHOLD_DEGPS * SACCADE_SPEED_MARGIN / CANONICAL_HZ
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_participants == 0 || self.n_stimuli == 0 || self.scanpaths_per_pair == 0 {
            return bad("participant, stimulus and scanpath counts must be positive".into());
        }
        if self.clusters_per_stimulus < 2 {
            return bad("`clusters_per_stimulus` must be at least 2".into());
        }
        if !(self.duration_s > 0.0) {
            return bad("`duration_s` must be positive".into());
        }
        for (k, r) in [
            ("fixation_ms", self.fixation_ms),
            ("saccade_ms", self.saccade_ms),
            ("amplitude_deg", self.amplitude_deg),
            ("jitter_scale_range", self.jitter_scale_range),
            ("dwell_bias_range", self.dwell_bias_range),
        ] {
            if !ordered_positive(r) {
                return bad(format!("`{k}` must be a positive, ordered range"));
            }
        }
        // targets move off their centers by at most the clamp on each axis
        let lowest = self.amplitude_deg.0 - 2.0 * core::f64::consts::SQRT_2 * self.target_clamp();
        if lowest <= Self::min_sweepable_amplitude() {
            return bad(format!(
                "smallest amplitude {:.2} deg (after target scatter) cannot exceed the velocity threshold; need > {:.2}",
                lowest,
                Self::min_sweepable_amplitude()
            ));
        }
        if !(self.jitter_sd_deg >= 0.0
            && self.target_spread_deg >= 0.0
            && self.participant_offset_deg >= 0.0)
        {
            return bad("spreads and offsets must be non-negative".into());
        }
        if !(self.class_dwell_factor > 0.0) || !(0.0..=1.0).contains(&self.positive_fraction) {
            return bad(
                "`class_dwell_factor` must be positive and `positive_fraction` in [0, 1]".into(),
            );
        }
        self.geometry.validate()
    }

    pub fn participant_id(p: usize) -> String {
        format!("p{p:03}")
    }

    pub fn stimulus_id(s: usize) -> String {
        format!("s{s:04}")
    }
}

/// Cluster centers of one stimulus, consecutive centers an in-range
/// amplitude apart.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusLayout {
    pub centers: Vec<[f64; 2]>,
}

pub fn stimulus_layout(cfg: &SynthConfig, stimulus: usize) -> Result<StimulusLayout> {
    let half = cfg.geometry.halfextent_deg();
    let lim = [half[0] - EDGE_MARGIN_DEG, half[1] - EDGE_MARGIN_DEG];
    let diag = 2.0 * math::hypot(lim[0], lim[1]);
    if lim[0] <= 0.0 || lim[1] <= 0.0 || cfg.amplitude_deg.0 >= diag {
        return Err(Error::Config(format!(
            "amplitudes from {} deg do not fit a {:.1} x {:.1} deg screen",
            cfg.amplitude_deg.0,
            2.0 * half[0],
            2.0 * half[1]
        )));
    }
    let mut r = rng::derived(cfg.seed, &format!("stimulus/{stimulus}"));
    let inside = |p: [f64; 2]| p[0].abs() <= lim[0] && p[1].abs() <= lim[1];
    let mut centers = Vec::with_capacity(cfg.clusters_per_stimulus);
    centers.push([
        rng::uniform(&mut r, -lim[0], lim[0]),
        rng::uniform(&mut r, -lim[1], lim[1]),
    ]);
    while centers.len() < cfg.clusters_per_stimulus {
        let last = *centers.last().unwrap();
        let next = (0..LAYOUT_ATTEMPTS).find_map(|_| {
            let a = rng::uniform(&mut r, cfg.amplitude_deg.0, cfg.amplitude_deg.1);
            let th = rng::uniform(&mut r, 0.0, core::f64::consts::TAU);
            let p = [last[0] + a * libm::cos(th), last[1] + a * libm::sin(th)];
            inside(p).then_some(p)
        });
        match next {
            Some(p) => centers.push(p),
            None => {
                return Err(Error::Config(format!(
                    "cannot place a saccade of {:?} deg inside the screen",
                    cfg.amplitude_deg
                )))
            }
        }
    }
    Ok(StimulusLayout { centers })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticipantStyle {
    pub jitter_scale: f64,
    pub dwell_bias: f64,
    pub offset_deg: [f64; 2],
    pub label: u8,
}

pub fn participant_style(cfg: &SynthConfig, participant: usize) -> ParticipantStyle {
    let mut r = rng::derived(cfg.seed, &format!("participant/{participant}"));
    let label = u8::from(r.random_bool(cfg.positive_fraction));
    let o = cfg.participant_offset_deg;
    let class = if label == 1 {
        cfg.class_dwell_factor
    } else {
        1.0
    };
    ParticipantStyle {
        jitter_scale: rng::uniform(&mut r, cfg.jitter_scale_range.0, cfg.jitter_scale_range.1),
        dwell_bias: rng::uniform(&mut r, cfg.dwell_bias_range.0, cfg.dwell_bias_range.1) * class,
        offset_deg: [rng::uniform(&mut r, -o, o), rng::uniform(&mut r, -o, o)],
        label,
    }
}

fn min_fixation_samples() -> usize {
    libm::ceil(DEFAULT_MIN_FIXATION_MS * CANONICAL_HZ / 1000.0 - 1e-9) as usize
}

/// Number of samples for a phase of `ms` milliseconds.
fn ms_to_samples(ms: f64) -> usize {
    libm::round(ms * CANONICAL_HZ / 1000.0).max(1.0) as usize
}

/// One scanpath and its exact phase labels (1 = fixation).
pub fn synth_scanpath<R: RngCore + ?Sized>(
    cfg: &SynthConfig,
    participant: usize,
    stimulus: usize,
    rng: &mut R,
) -> Result<(Scanpath, FixationLabels)> {
    cfg.validate()?;
    let layout = stimulus_layout(cfg, stimulus)?;
    let style = participant_style(cfg, participant);
    let n = libm::round(cfg.duration_s * CANONICAL_HZ) as usize;
    let k = layout.centers.len();
    let jitter = cfg.jitter_sd_deg * style.jitter_scale;
    let clamp = cfg.target_clamp();

    // back-and-forth walk along the layout from a random start
    let mut idx = rng::uniform_usize(rng, 0, k - 1);
    let mut forward = rng.random_bool(0.5);
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(n);
    let mut labels: Vec<u8> = Vec::with_capacity(n);
    let mut prev_target: Option<[f64; 2]> = None;
    while points.len() < n {
        let c = layout.centers[idx];
        let spread = |r: &mut R| (cfg.target_spread_deg * rng::normal(r)).clamp(-clamp, clamp);
        let target = [
            c[0] + style.offset_deg[0] + spread(rng),
            c[1] + style.offset_deg[1] + spread(rng),
        ];
        if let Some(from) = prev_target {
            let amp = gaze::distance(from, target);
            let fastest = libm::floor(
                amp * CANONICAL_HZ / (DEFAULT_VELOCITY_THRESHOLD_DEGPS * SACCADE_SPEED_MARGIN),
            ) as usize;
            let ms = rng::uniform(rng, cfg.saccade_ms.0, cfg.saccade_ms.1);
            let steps = ms_to_samples(ms).min(fastest.max(1));
            let start = *points.last().unwrap();
            for s in 1..=steps {
                let f = s as f64 / steps as f64;
                points.push([
                    start[0] + f * (target[0] - start[0]),
                    start[1] + f * (target[1] - start[1]),
                ]);
                labels.push(0);
            }
        }
        let ms = rng::uniform(rng, cfg.fixation_ms.0, cfg.fixation_ms.1) * style.dwell_bias;
        let dwell = ms_to_samples(ms).max(min_fixation_samples());
        for _ in 0..dwell {
            points.push([
                target[0] + jitter * rng::normal(rng),
                target[1] + jitter * rng::normal(rng),
            ]);
            labels.push(1);
        }
        prev_target = Some(*points.last().unwrap());
        if (forward && idx + 1 == k) || (!forward && idx == 0) {
            forward = !forward;
        }
        idx = if forward { idx + 1 } else { idx - 1 };
    }
    points.truncate(n);
    labels.truncate(n);
    let sp = Scanpath {
        points,
        source_tag: cfg.source_tag.clone(),
        participant_id: SynthConfig::participant_id(participant),
        stimulus_id: SynthConfig::stimulus_id(stimulus),
        screen_halfextent_deg: cfg.geometry.halfextent_deg(),
    };
    Ok((sp, FixationLabels(labels)))
}

/// Scanpath of every (participant, stimulus, repetition), each from its own
/// derived random stream, in participant-major order.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<Vec<(Scanpath, FixationLabels)>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.n_participants * cfg.n_stimuli * cfg.scanpaths_per_pair);
    for p in 0..cfg.n_participants {
        for s in 0..cfg.n_stimuli {
            for rep in 0..cfg.scanpaths_per_pair {
                let mut r = rng::derived(cfg.seed, &format!("scanpath/{p}/{s}/{rep}"));
                out.push(synth_scanpath(cfg, p, s, &mut r)?);
            }
        }
    }
    Ok(out)
}

/// A smooth gaze trajectory (sum of slow sinusoids, in degrees) used to
/// check the canonicalization error at high native rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSignal {
    /// `(amplitude_deg, frequency_hz, phase_rad)` per component and axis.
    pub components: [Vec<(f64, f64, f64)>; 2],
}

impl SmoothSignal {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R, amplitude_deg: f64, max_hz: f64) -> Self {
        let mut axis = || {
            (0..3)
                .map(|_| {
                    (
                        rng::uniform(rng, 0.2, 1.0) * amplitude_deg / 3.0,
                        rng::uniform(rng, 0.05, max_hz),
                        rng::uniform(rng, 0.0, core::f64::consts::TAU),
                    )
                })
                .collect::<Vec<_>>()
        };
        let x = axis();
        let y = axis();
        Self { components: [x, y] }
    }

    pub fn at(&self, t_s: f64) -> [f64; 2] {
        let eval = |c: &[(f64, f64, f64)]| {
            c.iter()
                .map(|&(a, f, ph)| a * libm::sin(core::f64::consts::TAU * f * t_s + ph))
                .sum::<f64>()
        };
        [eval(&self.components[0]), eval(&self.components[1])]
    }

    /// Monocular recording of the signal at `hz` for `duration_s`.
    pub fn record(&self, geometry: ScreenGeometry, hz: f64, duration_s: f64) -> RawRecording {
        let n = libm::floor(duration_s * hz) as usize + 1;
        let samples = (0..n)
            .map(|i| {
                let t_ms = i as f64 * 1000.0 / hz;
                let px = gaze::deg_to_px(self.at(t_ms / 1000.0), &geometry);
                RawSample {
                    t_ms,
                    left: Some(px),
                    right: None,
                    valid: true,
                }
            })
            .collect();
        RawRecording {
            samples,
            geometry,
            source_tag: "smooth".into(),
            participant_id: "p".into(),
            stimulus_id: "s".into(),
            native_hz: hz,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixation::{ivt_labels, IvtParams};

    #[test]
    fn zero_jitter_single_cluster_is_piecewise_constant() {
        let cfg = SynthConfig {
            jitter_sd_deg: 0.0,
            target_spread_deg: 0.0,
            clusters_per_stimulus: 2,
            ..SynthConfig::default()
        };
        let (sp, labels) = synth_scanpath(&cfg, 0, 0, &mut rng::seeded(3)).unwrap();
        for w in sp.points.windows(2).zip(&labels.0[1..]) {
            if *w.1 == 1 {
                assert_eq!(w.0[0], w.0[1]);
            }
        }
    }

    #[test]
    fn generator_labels_agree_with_ivt() {
        let cfg = SynthConfig::default();
        let mut agree = 0;
        let mut total = 0;
        for (sp, truth) in synth_corpus(&SynthConfig {
            n_participants: 3,
            n_stimuli: 5,
            ..cfg
        })
        .unwrap()
        {
            let got = ivt_labels(&sp.points, &IvtParams::default()).unwrap();
            agree += got.0.iter().zip(&truth.0).filter(|(a, b)| a == b).count();
            total += truth.len();
        }
        assert!(agree as f64 / total as f64 >= 0.99, "{agree}/{total}");
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = SynthConfig {
            n_participants: 2,
            n_stimuli: 2,
            ..SynthConfig::default()
        };
        assert_eq!(synth_corpus(&cfg).unwrap(), synth_corpus(&cfg).unwrap());
    }

    #[test]
    fn infeasible_amplitude_is_an_error() {
        let cfg = SynthConfig {
            amplitude_deg: (60.0, 80.0),
            ..SynthConfig::default()
        };
        assert!(synth_scanpath(&cfg, 0, 0, &mut rng::seeded(0)).is_err());
        let cfg = SynthConfig {
            amplitude_deg: (1.0, 3.0),
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
