//! Canonical gaze representation: binocular merge, pixel to visual-degree
//! conversion, 60 Hz resampling, gap filling, off-screen marking and the
//! affine/noise augmentations used during pre-training.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::{math, rng, CANONICAL_HZ, OFFSCREEN_SENTINEL};

/// Degrees beyond the screen edge after which a point counts as off-screen.
pub const OFFSCREEN_MARGIN_DEG: f64 = 10.0;

/// Recordings with more than this fraction of missing samples are dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.5;

const RAD_TO_DEG: f64 = 180.0 / core::f64::consts::PI;

/// Grid times closer than this (in ms) to an input time reuse its value.
const TIME_EPS_MS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenGeometry {
    pub width_px: u32,
    pub height_px: u32,
    pub width_mm: f64,
    pub height_mm: f64,
    pub viewing_distance_mm: f64,
}

impl ScreenGeometry {
    pub fn new(
        width_px: u32,
        height_px: u32,
        width_mm: f64,
        height_mm: f64,
        viewing_distance_mm: f64,
    ) -> Result<Self> {
        let g = Self {
            width_px,
            height_px,
            width_mm,
            height_mm,
            viewing_distance_mm,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.width_px == 0
            || self.height_px == 0
            || !positive(self.width_mm)
            || !positive(self.height_mm)
            || !positive(self.viewing_distance_mm)
        {
            return Err(Error::Config(format!("invalid screen geometry {self:?}")));
        }
        Ok(())
    }

    pub fn mm_per_px(&self) -> [f64; 2] {
        [
            self.width_mm / f64::from(self.width_px),
            self.height_mm / f64::from(self.height_px),
        ]
    }

    pub fn center_px(&self) -> [f64; 2] {
        [
            f64::from(self.width_px) / 2.0,
            f64::from(self.height_px) / 2.0,
        ]
    }

    /// Angular distance from the screen center to its edges.
    pub fn halfextent_deg(&self) -> [f64; 2] {
        let d = self.viewing_distance_mm;
        [
            libm::atan(self.width_mm / 2.0 / d) * RAD_TO_DEG,
            libm::atan(self.height_mm / 2.0 / d) * RAD_TO_DEG,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub t_ms: f64,
    pub left: Option<[f64; 2]>,
    pub right: Option<[f64; 2]>,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub samples: Vec<RawSample>,
    pub geometry: ScreenGeometry,
    pub source_tag: String,
    pub participant_id: String,
    pub stimulus_id: String,
    pub native_hz: f64,
}

/// A canonical 60 Hz scanpath in visual degrees, origin at the screen center.
#[derive(Debug, Clone, PartialEq)]
pub struct Scanpath {
    pub points: Vec<[f64; 2]>,
    pub source_tag: String,
    pub participant_id: String,
    pub stimulus_id: String,
    pub screen_halfextent_deg: [f64; 2],
}

impl Scanpath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.points.len() as f64 / CANONICAL_HZ
    }
}

#[inline]
pub fn is_sentinel(p: [f64; 2]) -> bool {
    p[0] == OFFSCREEN_SENTINEL && p[1] == OFFSCREEN_SENTINEL
}

pub fn px_to_deg(p: [f64; 2], g: &ScreenGeometry) -> Result<[f64; 2]> {
    if !p[0].is_finite() || !p[1].is_finite() {
        return Err(Error::NonFinite("gaze sample"));
    }
    let c = g.center_px();
    let mm = g.mm_per_px();
    let d = g.viewing_distance_mm;
    Ok([
        libm::atan((p[0] - c[0]) * mm[0] / d) * RAD_TO_DEG,
        libm::atan((p[1] - c[1]) * mm[1] / d) * RAD_TO_DEG,
    ])
}

/// Inverse of [`px_to_deg`].
pub fn deg_to_px(p: [f64; 2], g: &ScreenGeometry) -> [f64; 2] {
    let c = g.center_px();
    let mm = g.mm_per_px();
    let d = g.viewing_distance_mm;
    [
        c[0] + libm::tan(p[0] / RAD_TO_DEG) * d / mm[0],
        c[1] + libm::tan(p[1] / RAD_TO_DEG) * d / mm[1],
    ]
}

/// Mean of the available eyes; `None` when the sample is invalid or both
/// eyes are absent.
pub fn merge_binocular(s: &RawSample) -> Option<[f64; 2]> {
    if !s.valid {
        return None;
    }
    match (s.left, s.right) {
        (Some(l), Some(r)) => Some([(l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0]),
        (Some(e), None) | (None, Some(e)) => Some(e),
        (None, None) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GridPos {
    Exact(usize),
    Between(usize, f64),
}

fn grid_positions(ts: &[f64]) -> Result<Vec<GridPos>> {
    if ts.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: ts.len(),
        });
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid(
            "timestamps must be strictly increasing".into(),
        ));
    }
    let t0 = ts[0];
    let span = ts[ts.len() - 1] - t0;
    let step = 1000.0 / CANONICAL_HZ;
    let n = libm::floor(span / step + 1e-9) as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let g = t0 + k as f64 * step;
        while j + 2 < ts.len() && ts[j + 1] <= g {
            j += 1;
        }
        let pos = if (g - ts[j]).abs() <= TIME_EPS_MS {
            GridPos::Exact(j)
        } else if (ts[j + 1] - g).abs() <= TIME_EPS_MS {
            GridPos::Exact(j + 1)
        } else {
            GridPos::Between(j, (g - ts[j]) / (ts[j + 1] - ts[j]))
        };
        out.push(pos);
    }
    Ok(out)
}

/// Linear interpolation of `vs` (sampled at `ts`, in ms) onto the 60 Hz grid
/// starting at `ts[0]`.
pub fn resample_60hz(ts: &[f64], vs: &[f64]) -> Result<Vec<f64>> {
    if ts.len() != vs.len() {
        return Err(Error::Shape(format!(
            "{} times vs {} values",
            ts.len(),
            vs.len()
        )));
    }
    Ok(grid_positions(ts)?
        .into_iter()
        .map(|p| match p {
            GridPos::Exact(j) => vs[j],
            GridPos::Between(j, w) => vs[j] + w * (vs[j + 1] - vs[j]),
        })
        .collect())
}

/// Resampling of gappy 2-D points: a grid point between two samples is
/// missing unless both neighbours are present.
fn resample_points(ts: &[f64], ps: &[Option<[f64; 2]>]) -> Result<Vec<Option<[f64; 2]>>> {
    Ok(grid_positions(ts)?
        .into_iter()
        .map(|p| match p {
            GridPos::Exact(j) => ps[j],
            GridPos::Between(j, w) => match (ps[j], ps[j + 1]) {
                (Some(a), Some(b)) => Some([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]),
                _ => None,
            },
        })
        .collect())
}

/// Interior gaps are interpolated linearly, leading and trailing gaps hold
/// the nearest valid value. Returns the filled sequence and the fraction of
/// entries that were missing.
pub fn fill_missing(vs: &[Option<f64>]) -> Result<(Vec<f64>, f64)> {
    if vs.is_empty() {
        return Ok((Vec::new(), 0.0));
    }
    let valid: Vec<usize> = (0..vs.len()).filter(|&i| vs[i].is_some()).collect();
    if valid.is_empty() {
        return Err(Error::AllMissing);
    }
    let fraction = (vs.len() - valid.len()) as f64 / vs.len() as f64;
    let mut out = Vec::with_capacity(vs.len());
    let first = valid[0];
    let last = valid[valid.len() - 1];
    let mut next = 0; // index into `valid` of the next anchor at or after i
    for (i, v) in vs.iter().enumerate() {
        while next < valid.len() && valid[next] < i {
            next += 1;
        }
        let value = match v {
            Some(x) => *x,
            None if i < first => vs[first].unwrap(),
            None if i > last => vs[last].unwrap(),
            None => {
                let (a, b) = (valid[next - 1], valid[next]);
                let (va, vb) = (vs[a].unwrap(), vs[b].unwrap());
                va + (vb - va) * (i - a) as f64 / (b - a) as f64
            }
        };
        out.push(value);
    }
    Ok((out, fraction))
}

fn fill_missing_points(ps: &[Option<[f64; 2]>]) -> Result<Vec<[f64; 2]>> {
    let xs: Vec<Option<f64>> = ps.iter().map(|p| p.map(|p| p[0])).collect();
    let ys: Vec<Option<f64>> = ps.iter().map(|p| p.map(|p| p[1])).collect();
    let (xs, _) = fill_missing(&xs)?;
    let (ys, _) = fill_missing(&ys)?;
    Ok(xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect())
}

/// Replaces points more than [`OFFSCREEN_MARGIN_DEG`] beyond the screen edge
/// with the sentinel `(-180, -180)`.
pub fn mark_offscreen(points: &mut [[f64; 2]], halfextent_deg: [f64; 2]) {
    let lim_x = halfextent_deg[0] + OFFSCREEN_MARGIN_DEG;
    let lim_y = halfextent_deg[1] + OFFSCREEN_MARGIN_DEG;
    for p in points.iter_mut() {
        if p[0].abs() > lim_x || p[1].abs() > lim_y {
            *p = [OFFSCREEN_SENTINEL, OFFSCREEN_SENTINEL];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Discarded {
    /// Fraction of samples missing after the binocular merge.
    TooMuchMissing(f64),
    TooFewSamples(usize),
    Corrupt(String),
}

impl core::fmt::Display for Discarded {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::TooMuchMissing(frac) => write!(f, "missing fraction {frac:.3} exceeds 0.5"),
            Self::TooFewSamples(n) => write!(f, "only {n} usable samples"),
            Self::Corrupt(why) => write!(f, "corrupt recording: {why}"),
        }
    }
}

/// Merge, convert to degrees, resample to 60 Hz, fill gaps, mark off-screen
/// points, in that order.
pub fn preprocess(r: &RawRecording) -> core::result::Result<Scanpath, Discarded> {
    r.geometry
        .validate()
        .map_err(|e| Discarded::Corrupt(format!("{e}")))?;
    if r.samples.len() < 2 {
        return Err(Discarded::TooFewSamples(r.samples.len()));
    }
    let merged: Vec<Option<[f64; 2]>> = r.samples.iter().map(merge_binocular).collect();
    let missing = merged.iter().filter(|p| p.is_none()).count();
    let fraction = missing as f64 / merged.len() as f64;
    if fraction > MAX_MISSING_FRACTION {
        return Err(Discarded::TooMuchMissing(fraction));
    }
    let degrees = merged
        .iter()
        .map(|p| p.map(|p| px_to_deg(p, &r.geometry)).transpose())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Discarded::Corrupt(format!("{e}")))?;
    let ts: Vec<f64> = r.samples.iter().map(|s| s.t_ms).collect();
    let grid = resample_points(&ts, &degrees).map_err(|e| Discarded::Corrupt(format!("{e}")))?;
    let mut points = match fill_missing_points(&grid) {
        Ok(p) => p,
        Err(_) => return Err(Discarded::TooMuchMissing(1.0)),
    };
    let halfextent = r.geometry.halfextent_deg();
    mark_offscreen(&mut points, halfextent);
    Ok(Scanpath {
        points,
        source_tag: r.source_tag.clone(),
        participant_id: r.participant_id.clone(),
        stimulus_id: r.stimulus_id.clone(),
        screen_halfextent_deg: halfextent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub offset_range_deg: (f64, f64),
    pub scale_range: (f64, f64),
    pub rotation_range_rad: (f64, f64),
    pub shear_range: (f64, f64),
    pub point_noise_sd_deg: f64,
    pub point_noise_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::identity()
    }
}

impl AugmentConfig {
    pub const fn identity() -> Self {
        Self {
            offset_range_deg: (0.0, 0.0),
            scale_range: (1.0, 1.0),
            rotation_range_rad: (0.0, 0.0),
            shear_range: (0.0, 0.0),
            point_noise_sd_deg: 0.0,
            point_noise_prob: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.offset_range_deg)
            || !ordered(self.scale_range)
            || !ordered(self.rotation_range_rad)
            || !ordered(self.shear_range)
        {
            return Err(Error::Config(
                "augmentation ranges must be finite and ordered".into(),
            ));
        }
        if !(self.point_noise_sd_deg >= 0.0) || !(0.0..=1.0).contains(&self.point_noise_prob) {
            return Err(Error::Config(
                "noise sd must be >= 0 and noise probability in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A drawn affine map `p -> A p + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl Affine {
    /// Scale, then shear `x' = x + s y`, then counter-clockwise rotation,
    /// then translation.
    pub fn compose(scale: f64, rotation_rad: f64, shear: f64, offset: [f64; 2]) -> Self {
        let (s, c) = (libm::sin(rotation_rad), libm::cos(rotation_rad));
        // R · Sh · (scale I)
        let sh = [[scale, shear * scale], [0.0, scale]];
        let a = [
            [c * sh[0][0] - s * sh[1][0], c * sh[0][1] - s * sh[1][1]],
            [s * sh[0][0] + c * sh[1][0], s * sh[0][1] + c * sh[1][1]],
        ];
        Self { a, b: offset }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * p[0] + self.a[0][1] * p[1] + self.b[0],
            self.a[1][0] * p[0] + self.a[1][1] * p[1] + self.b[1],
        ]
    }
}

pub fn augment<R: RngCore + ?Sized>(sp: &Scanpath, cfg: &AugmentConfig, rng: &mut R) -> Scanpath {
    let mut out = sp.clone();
    if cfg.is_identity() {
        return out;
    }
    let scale = rng::uniform(rng, cfg.scale_range.0, cfg.scale_range.1);
    let rot = rng::uniform(rng, cfg.rotation_range_rad.0, cfg.rotation_range_rad.1);
    let shear = rng::uniform(rng, cfg.shear_range.0, cfg.shear_range.1);
    let offset = [
        rng::uniform(rng, cfg.offset_range_deg.0, cfg.offset_range_deg.1),
        rng::uniform(rng, cfg.offset_range_deg.0, cfg.offset_range_deg.1),
    ];
    let map = Affine::compose(scale, rot, shear, offset);
    let noisy = cfg.point_noise_prob > 0.0 && cfg.point_noise_sd_deg > 0.0;
    for p in out.points.iter_mut() {
        if is_sentinel(*p) {
            continue;
        }
        *p = map.apply(*p);
        if noisy && rng.random::<f64>() < cfg.point_noise_prob {
            p[0] += cfg.point_noise_sd_deg * rng::normal(rng);
            p[1] += cfg.point_noise_sd_deg * rng::normal(rng);
        }
    }
    out
}

/// Euclidean distance in degrees.
#[inline]
pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    math::hypot(a[0] - b[0], a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn hd() -> ScreenGeometry {
        ScreenGeometry::new(1920, 1080, 480.0, 270.0, 650.0).unwrap()
    }

    fn recording(samples: Vec<RawSample>) -> RawRecording {
        RawRecording {
            samples,
            geometry: hd(),
            source_tag: "t".into(),
            participant_id: "p".into(),
            stimulus_id: "s".into(),
            native_hz: 60.0,
        }
    }

    fn mono(t_ms: f64, p: Option<[f64; 2]>) -> RawSample {
        RawSample {
            t_ms,
            left: p,
            right: None,
            valid: p.is_some(),
        }
    }

    #[test]
    fn center_pixel_maps_to_origin() {
        assert_eq!(px_to_deg([960.0, 540.0], &hd()).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn hundred_pixels_right_matches_arctangent() {
        // 0.25 mm/px, 650 mm away: 25 mm lateral offset
        let got = px_to_deg([1060.0, 540.0], &hd()).unwrap();
        let expected = libm::atan(25.0 / 650.0) * 180.0 / core::f64::consts::PI;
        assert!((got[0] - expected).abs() < 1e-12);
        assert!((expected - 2.2026).abs() < 1e-4);
        assert_eq!(got[1], 0.0);
    }

    #[test]
    fn symmetric_pixels_are_odd() {
        let a = px_to_deg([960.0 + 37.0, 540.0 - 12.0], &hd()).unwrap();
        let b = px_to_deg([960.0 - 37.0, 540.0 + 12.0], &hd()).unwrap();
        assert_eq!(a[0], -b[0]);
        assert_eq!(a[1], -b[1]);
    }

    #[test]
    fn non_finite_pixel_is_an_error() {
        assert!(px_to_deg([f64::NAN, 0.0], &hd()).is_err());
    }

    #[test]
    fn deg_to_px_inverts() {
        let p = [123.4, 987.6];
        let back = deg_to_px(px_to_deg(p, &hd()).unwrap(), &hd());
        assert!((back[0] - p[0]).abs() < 1e-9 && (back[1] - p[1]).abs() < 1e-9);
    }

    #[test]
    fn binocular_merge_cases() {
        let both = RawSample {
            t_ms: 0.0,
            left: Some([100.0, 100.0]),
            right: Some([200.0, 200.0]),
            valid: true,
        };
        assert_eq!(merge_binocular(&both), Some([150.0, 150.0]));
        let left = RawSample {
            right: None,
            ..both
        };
        assert_eq!(merge_binocular(&left), Some([100.0, 100.0]));
        let none = RawSample {
            left: None,
            right: None,
            ..both
        };
        assert_eq!(merge_binocular(&none), None);
    }

    #[test]
    fn resample_identity_at_60hz() {
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 1000.0 / 60.0).collect();
        let vs: Vec<f64> = (0..50).map(|k| (k * k) as f64).collect();
        assert_eq!(resample_60hz(&ts, &vs).unwrap(), vs);
    }

    #[test]
    fn resample_ramp_from_120hz() {
        let ts: Vec<f64> = (0..241).map(|k| k as f64 * 1000.0 / 120.0).collect();
        let out = resample_60hz(&ts, &ts).unwrap();
        assert_eq!(out.len(), 121);
        for (k, v) in out.iter().enumerate() {
            assert!((v - k as f64 * 1000.0 / 60.0).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_30hz_midpoints() {
        let ts: Vec<f64> = (0..4).map(|k| k as f64 * 1000.0 / 30.0).collect();
        let vs = [2.0, 6.0, -4.0, 0.0];
        let out = resample_60hz(&ts, &vs).unwrap();
        assert_eq!(out.len(), 7);
        assert!((out[1] - 4.0).abs() < 1e-12);
        assert!((out[3] - 1.0).abs() < 1e-12);
        assert!((out[5] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn resample_needs_two_samples() {
        assert!(matches!(
            resample_60hz(&[0.0], &[1.0]),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn fill_missing_cases() {
        let (v, f) = fill_missing(&[Some(1.0), Some(2.0)]).unwrap();
        assert_eq!((v, f), (vec![1.0, 2.0], 0.0));
        let (v, f) = fill_missing(&[Some(1.0), None, Some(3.0)]).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        let (v, _) = fill_missing(&[None, Some(5.0), None, None, Some(8.0), None]).unwrap();
        assert_eq!(v, vec![5.0, 5.0, 6.0, 7.0, 8.0, 8.0]);
        assert_eq!(fill_missing(&[None, None]), Err(Error::AllMissing));
    }

    #[test]
    fn offscreen_boundary_is_strict() {
        let he = [20.0, 12.0];
        let mut pts = vec![[1.0, 1.0], [30.1, 0.0], [30.0, 0.0], [0.0, -22.5]];
        mark_offscreen(&mut pts, he);
        assert_eq!(pts[0], [1.0, 1.0]);
        assert_eq!(pts[1], [OFFSCREEN_SENTINEL, OFFSCREEN_SENTINEL]);
        assert_eq!(pts[2], [30.0, 0.0]);
        assert_eq!(pts[3], [OFFSCREEN_SENTINEL, OFFSCREEN_SENTINEL]);
    }

    #[test]
    fn preprocess_discards_majority_missing() {
        let samples: Vec<RawSample> = (0..100)
            .map(|k| {
                let t = k as f64 * 1000.0 / 60.0;
                mono(t, (k >= 51).then_some([960.0, 540.0]))
            })
            .collect();
        let r = preprocess(&recording(samples));
        assert!(matches!(r, Err(Discarded::TooMuchMissing(f)) if (f - 0.51).abs() < 1e-12));
    }

    #[test]
    fn preprocess_clean_60hz_keeps_duration() {
        let samples: Vec<RawSample> = (0..120)
            .map(|k| mono(k as f64 * 1000.0 / 60.0, Some([900.0 + k as f64, 500.0])))
            .collect();
        let sp = preprocess(&recording(samples)).unwrap();
        assert_eq!(sp.len(), 120);
    }

    /// Golden: binocular 120 Hz input with a gap on a grid sample and an
    /// off-screen sample. The gap is filled from its raw neighbours before
    /// the off-screen point is replaced by the sentinel.
    #[test]
    fn preprocess_golden_composition() {
        let g = hd();
        let mut samples = Vec::new();
        for k in 0..9 {
            let t = k as f64 * 1000.0 / 120.0;
            let x = 960.0 + 40.0 * k as f64;
            let s = match k {
                4 => RawSample {
                    t_ms: t,
                    left: None,
                    right: None,
                    valid: false,
                },
                8 => RawSample {
                    t_ms: t,
                    left: Some([2780.0, 540.0]),
                    right: None,
                    valid: true,
                },
                _ => RawSample {
                    t_ms: t,
                    left: Some([x - 10.0, 540.0]),
                    right: Some([x + 10.0, 540.0]),
                    valid: true,
                },
            };
            samples.push(s);
        }
        let sp = preprocess(&RawRecording {
            geometry: g,
            ..recording(samples)
        })
        .unwrap();
        let deg = |x: f64| px_to_deg([x, 540.0], &g).unwrap()[0];
        // grid samples coincide with raw samples 0, 2, 4, 6, 8
        assert_eq!(sp.len(), 5);
        assert_eq!(sp.points[0], [0.0, 0.0]);
        assert!((sp.points[1][0] - deg(1040.0)).abs() < 1e-12);
        // raw sample 3 and 5 are valid but the grid point at sample 4 is not
        assert!((sp.points[2][0] - (deg(1040.0) + deg(1200.0)) / 2.0).abs() < 1e-12);
        assert!((sp.points[3][0] - deg(1200.0)).abs() < 1e-12);
        assert!(deg(2780.0) > 30.5);
        assert_eq!(sp.points[4], [OFFSCREEN_SENTINEL, OFFSCREEN_SENTINEL]);
    }

    #[test]
    fn identity_augment_is_identity() {
        let sp = Scanpath {
            points: vec![
                [1.0, 2.0],
                [OFFSCREEN_SENTINEL, OFFSCREEN_SENTINEL],
                [-3.0, 0.5],
            ],
            source_tag: "a".into(),
            participant_id: "b".into(),
            stimulus_id: "c".into(),
            screen_halfextent_deg: [20.0, 12.0],
        };
        let mut rng = rng::seeded(3);
        assert_eq!(augment(&sp, &AugmentConfig::identity(), &mut rng), sp);
        let shift = AugmentConfig {
            offset_range_deg: (1.0, 1.0),
            ..AugmentConfig::identity()
        };
        let out = augment(&sp, &shift, &mut rng);
        assert_eq!(out.points[0], [2.0, 3.0]);
        assert_eq!(out.points[1], [OFFSCREEN_SENTINEL, OFFSCREEN_SENTINEL]);
    }

    #[test]
    fn quarter_turn_is_counter_clockwise() {
        let m = Affine::compose(1.0, core::f64::consts::FRAC_PI_2, 0.0, [0.0, 0.0]);
        let p = m.apply([1.0, 0.0]);
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shear_moves_x_by_y() {
        let m = Affine::compose(1.0, 0.0, 0.5, [0.0, 0.0]);
        assert_eq!(m.apply([1.0, 2.0]), [2.0, 2.0]);
    }
}
