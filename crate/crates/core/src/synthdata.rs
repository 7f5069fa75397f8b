//! Synthetic two-modality video benchmark.
//!
//! Modality A shows a single bright dot moving one pixel per frame to the
//! left or right. Modality B is background except, in the sync modes, a 2×2
//! flash in the top-left corner, either on the frame where the dot crosses
//! the centre column (`same`) or one frame later (`next`). Both modalities
//! carry i.i.d. Gaussian noise.
//!
//! The class structure is chosen so that:
//! * the direction bit is invisible to any model that treats frames as an
//!   unordered set, because every right-moving clip is the exact time
//!   reversal of a left-moving one (noise included);
//! * the sync bit is invisible to any model that looks at each modality in
//!   isolation, because both classes share the same modality-A clips and the
//!   same multiset of modality-B frames.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ClipTensor;

/// Per-modality clips of one example plus its class.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiModalSample {
    pub clips: Vec<ClipTensor>,
    pub label: usize,
}

impl MultiModalSample {
    pub fn new(clips: Vec<ClipTensor>, label: usize) -> Result<Self> {
        let first = clips
            .first()
            .ok_or_else(|| Error::InvalidInput("sample without modalities".into()))?;
        if clips.iter().any(|c| !c.same_shape(first)) {
            return Err(Error::ShapeMismatch("modality clips differ in shape".into()));
        }
        Ok(Self { clips, label })
    }

    /// Every modality with its frame order reversed.
    pub fn reverse_frames(&self) -> Self {
        Self {
            clips: self.clips.iter().map(ClipTensor::reverse_frames).collect(),
            label: self.label,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Two classes: dot moves left or right.
    Direction,
    /// Two classes: flash on the crossing frame or one frame after it.
    Sync,
    /// Four classes: direction × sync.
    Full,
}

impl Mode {
    pub fn class_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            Mode::Direction => &["left", "right"],
            Mode::Sync => &["same", "next"],
            Mode::Full => &["left-same", "left-next", "right-same", "right-next"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Mode::Direction | Mode::Sync => 2,
            Mode::Full => 4,
        }
    }

    pub fn label(&self, direction: Direction, sync: Option<SyncTiming>) -> usize {
        let d = direction as usize;
        let s = sync.map_or(0, |s| s as usize);
        match self {
            Mode::Direction => d,
            Mode::Sync => s,
            Mode::Full => d * 2 + s,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direction" => Ok(Mode::Direction),
            "sync" => Ok(Mode::Sync),
            "full" => Ok(Mode::Full),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Direction => "direction",
            Mode::Sync => "sync",
            Mode::Full => "full",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left = 0,
    Right = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyncTiming {
    Same = 0,
    Next = 1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub mode: Mode,
    pub samples_per_class: usize,
    pub seed: u64,
    pub frames: usize,
    /// Height and width.
    pub size: usize,
    pub dot_intensity: f32,
    pub flash_intensity: f32,
    pub background: f32,
    pub noise_std: f32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            samples_per_class: 50,
            seed: 0,
            frames: 8,
            size: 16,
            dot_intensity: 1.0,
            flash_intensity: 1.0,
            background: 0.0,
            noise_std: 0.05,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 4 {
            return Err(Error::Gen(format!("need at least 4 frames, got {}", self.frames)));
        }
        if self.size < 8 {
            return Err(Error::Gen(format!("need size >= 8, got {}", self.size)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Gen(format!("bad noise std {}", self.noise_std)));
        }
        let c = self.center_col();
        if c + 2 < self.frames || c + self.frames - 2 >= self.size {
            return Err(Error::Gen(format!(
                "a {}-frame trajectory does not fit a {}-pixel row around the centre",
                self.frames, self.size
            )));
        }
        Ok(())
    }

    pub fn center_col(&self) -> usize {
        self.size / 2
    }

    /// Rows the dot may occupy, kept clear of the flash corner.
    pub fn dot_rows(&self) -> std::ops::Range<usize> {
        4..self.size - 2
    }

    /// Crossing frames that leave room for a flash on the following frame.
    pub fn crossing_frames(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.frames - 2
    }

    fn clip(&self) -> Result<ClipTensor> {
        ClipTensor::filled(1, self.frames, self.size, self.size, self.background as f64)
    }
}

/// Draws one noise clip (zero-mean, `noise_std`), already f32-representable.
fn noise_clip(gc: &GenConfig, rng: &mut impl Rng) -> Result<ClipTensor> {
    let mut x = ClipTensor::zeros(1, gc.frames, gc.size, gc.size)?;
    if gc.noise_std > 0.0 {
        let normal = Normal::new(0.0f32, gc.noise_std)
            .map_err(|e| Error::Gen(format!("noise distribution: {e}")))?;
        for v in x.data_mut() {
            *v = normal.sample(rng) as f64;
        }
    }
    Ok(x)
}

/// Column of the dot at frame `t`.
fn dot_col(direction: Direction, start_col: usize, t: usize) -> isize {
    match direction {
        Direction::Left => start_col as isize - t as isize,
        Direction::Right => start_col as isize + t as isize,
    }
}

/// Frame on which the dot sits on the centre column, if any.
pub fn crossing_frame(gc: &GenConfig, direction: Direction, start_col: usize) -> Option<usize> {
    let c = gc.center_col() as isize;
    (0..gc.frames).find(|&t| dot_col(direction, start_col, t) == c)
}

/// Adds `base` and `extra` in f32 so stored values stay f32-exact.
fn add_f32(base: f64, extra: f32) -> f64 {
    (base as f32 + extra) as f64
}

/// Renders a sample on top of caller-supplied noise clips.
pub fn render_with_noise(
    gc: &GenConfig,
    direction: Direction,
    sync: Option<SyncTiming>,
    row: usize,
    start_col: usize,
    noise_a: &ClipTensor,
    noise_b: &ClipTensor,
) -> Result<MultiModalSample> {
    gc.validate()?;
    let n = gc.size as isize;
    if row >= gc.size {
        return Err(Error::Gen(format!("row {row} outside {}-pixel frame", gc.size)));
    }
    for t in [0, gc.frames - 1] {
        let c = dot_col(direction, start_col, t);
        if c < 0 || c >= n {
            return Err(Error::Gen(format!(
                "dot leaves the frame at t={t} (column {c})"
            )));
        }
    }
    let want = (1, gc.frames, gc.size, gc.size);
    if noise_a.dims() != want || noise_b.dims() != want {
        return Err(Error::ShapeMismatch("noise clips do not match the config".into()));
    }

    let mut a = gc.clip()?;
    let mut b = gc.clip()?;
    for (dst, src) in [(&mut a, noise_a), (&mut b, noise_b)] {
        for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
            *d = add_f32(*d, s as f32);
        }
    }
    for t in 0..gc.frames {
        let c = dot_col(direction, start_col, t) as usize;
        a.set(t, 0, row, c, add_f32(gc.dot_intensity as f64, noise_a.get(t, 0, row, c) as f32));
    }
    if let Some(timing) = sync {
        let tau = crossing_frame(gc, direction, start_col).ok_or_else(|| {
            Error::Gen("dot never crosses the centre column".into())
        })?;
        let flash = tau + timing as usize;
        if flash >= gc.frames {
            return Err(Error::Gen(format!(
                "flash frame {flash} past the end of a {}-frame clip",
                gc.frames
            )));
        }
        for (y, x) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let v = add_f32(gc.flash_intensity as f64, noise_b.get(flash, 0, y, x) as f32);
            b.set(flash, 0, y, x, v);
        }
    }
    let label = gc.mode.label(direction, sync);
    MultiModalSample::new(vec![a, b], label)
}

/// Renders one sample with fresh noise drawn from `rng`.
pub fn render_clip(
    gc: &GenConfig,
    direction: Direction,
    sync: Option<SyncTiming>,
    row: usize,
    start_col: usize,
    rng: &mut impl Rng,
) -> Result<MultiModalSample> {
    let noise_a = noise_clip(gc, rng)?;
    let noise_b = noise_clip(gc, rng)?;
    render_with_noise(gc, direction, sync, row, start_col, &noise_a, &noise_b)
}

/// Start column that puts the crossing on frame `tau`.
fn start_for(gc: &GenConfig, direction: Direction, tau: usize) -> usize {
    match direction {
        Direction::Left => gc.center_col() + tau,
        Direction::Right => gc.center_col() - tau,
    }
}

/// The `j`-th group of samples, one per class, from its own RNG stream.
pub fn generate_group(gc: &GenConfig, j: u64) -> Result<Vec<MultiModalSample>> {
    gc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(gc.seed);
    rng.set_stream(j);
    let row = rng.random_range(gc.dot_rows());
    let tau = rng.random_range(gc.crossing_frames());
    let noise_a = noise_clip(gc, &mut rng)?;
    let noise_b = noise_clip(gc, &mut rng)?;
    let left = Direction::Left;
    let right = Direction::Right;
    match gc.mode {
        Mode::Direction => {
            let l = render_with_noise(gc, left, None, row, start_for(gc, left, tau), &noise_a, &noise_b)?;
            let mut r = l.reverse_frames();
            r.label = gc.mode.label(right, None);
            Ok(vec![l, r])
        }
        Mode::Sync => {
            let dir = if rng.random::<bool>() { right } else { left };
            let start = start_for(gc, dir, tau);
            [SyncTiming::Same, SyncTiming::Next]
                .into_iter()
                .map(|s| render_with_noise(gc, dir, Some(s), row, start, &noise_a, &noise_b))
                .collect()
        }
        Mode::Full => {
            // right-moving clips reuse the left clip's noise, reversed in time
            let (ra, rb) = (noise_a.reverse_frames(), noise_b.reverse_frames());
            let tau_r = gc.frames - 1 - tau;
            let mut out = Vec::with_capacity(4);
            for s in [SyncTiming::Same, SyncTiming::Next] {
                out.push(render_with_noise(gc, left, Some(s), row, start_for(gc, left, tau), &noise_a, &noise_b)?);
            }
            for s in [SyncTiming::Same, SyncTiming::Next] {
                out.push(render_with_noise(gc, right, Some(s), row, start_for(gc, right, tau_r), &ra, &rb)?);
            }
            Ok(out)
        }
    }
}

/// All samples of a dataset in manifest order (class-major).
pub fn generate_samples(gc: &GenConfig) -> Result<Vec<MultiModalSample>> {
    let k = gc.mode.num_classes();
    let mut by_class: Vec<Vec<MultiModalSample>> = vec![Vec::new(); k];
    for j in 0..gc.samples_per_class {
        for s in generate_group(gc, j as u64)? {
            by_class[s.label].push(s);
        }
    }
    Ok(by_class.into_iter().flatten().collect())
}

/// Keeps frames `0, stride, 2·stride, …`.
pub fn temporal_stride_sample(raw: &ClipTensor, stride: usize) -> Result<ClipTensor> {
    if stride == 0 {
        return Err(Error::InvalidInput("temporal stride must be >= 1".into()));
    }
    let (c, t, h, w) = raw.dims();
    let kept = t.div_ceil(stride);
    let mut out = ClipTensor::zeros(c, kept, h, w)?;
    for (dst, src) in (0..t).step_by(stride).enumerate() {
        out.frame_mut(dst).copy_from_slice(raw.frame(src));
    }
    Ok(out)
}

pub const CLIP_MAGIC: &[u8; 4] = b"DFSB";
pub const CLIP_VERSION: u32 = 1;
/// Magic plus seven u32 fields.
pub const CLIP_HEADER_LEN: usize = 32;

/// Clip file image: header, then one f32 block per modality in tensor layout.
pub fn encode_clip(sample: &MultiModalSample) -> Result<Vec<u8>> {
    let first = sample
        .clips
        .first()
        .ok_or_else(|| Error::InvalidInput("sample without modalities".into()))?;
    let (c, t, h, w) = first.dims();
    let mut buf = Vec::with_capacity(CLIP_HEADER_LEN + sample.clips.len() * first.len() * 4);
    buf.extend_from_slice(CLIP_MAGIC);
    for v in [CLIP_VERSION as usize, sample.clips.len(), c, t, h, w, sample.label] {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for clip in &sample.clips {
        if !clip.same_shape(first) {
            return Err(Error::ShapeMismatch("modality clips differ in shape".into()));
        }
        for &v in clip.data() {
            let f = v as f32;
            if f as f64 != v && !v.is_nan() {
                return Err(Error::Format(format!("value {v} is not representable as f32")));
            }
            buf.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_clip(bytes: &[u8]) -> Result<MultiModalSample> {
    if bytes.len() < CLIP_HEADER_LEN {
        return Err(Error::Format(format!("clip file of {} bytes has no header", bytes.len())));
    }
    if &bytes[..4] != CLIP_MAGIC {
        return Err(Error::Format("bad clip magic".into()));
    }
    let field = |i: usize| {
        u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize
    };
    let version = field(0);
    if version != CLIP_VERSION as usize {
        return Err(Error::Format(format!("unsupported clip version {version}")));
    }
    let (n, c, t, h, w, label) = (field(1), field(2), field(3), field(4), field(5), field(6));
    if n == 0 || c == 0 || t == 0 || h == 0 || w == 0 {
        return Err(Error::Format(format!("zero dimension in ({n},{c},{t},{h},{w})")));
    }
    let per = c
        .checked_mul(t)
        .and_then(|v| v.checked_mul(h))
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let payload = bytes.len() - CLIP_HEADER_LEN;
    if n.checked_mul(per).and_then(|v| v.checked_mul(4)) != Some(payload) {
        return Err(Error::Format(format!(
            "header declares {n}×{per} values, payload has {payload} bytes"
        )));
    }
    let body = &bytes[CLIP_HEADER_LEN..];
    let clips = (0..n)
        .map(|m| {
            let data = body[m * per * 4..(m + 1) * per * 4]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect();
            ClipTensor::from_vec(c, t, h, w, data)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiModalSample::new(clips, label)
}

pub fn write_clip_file(sample: &MultiModalSample, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_clip(sample)?).map_err(|e| Error::io(path, e))
}

pub fn read_clip_file(path: impl AsRef<Path>) -> Result<MultiModalSample> {
    let path = path.as_ref();
    decode_clip(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub mode: Mode,
    pub seed: u64,
    pub classes: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

/// Writes every sample plus `manifest.json` into `out_dir`.
pub fn generate_dataset(gc: &GenConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let classes = gc.mode.class_names();
    let samples = generate_samples(gc)?;
    let mut counters = vec![0usize; classes.len()];
    let mut files = Vec::with_capacity(samples.len());
    for s in &samples {
        let name = format!("{}_{:05}.dfsb", classes[s.label], counters[s.label]);
        counters[s.label] += 1;
        write_clip_file(s, dir.join(&name))?;
        files.push(ManifestEntry {
            path: name,
            label: s.label,
        });
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        mode: gc.mode,
        seed: gc.seed,
        classes,
        files,
    };
    let path = dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn manifest_path(dir: impl AsRef<Path>) -> PathBuf {
    dir.as_ref().join(MANIFEST_NAME)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = manifest_path(dir);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Reads the manifest and every listed clip, checking labels on the way.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<MultiModalSample>)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let k = manifest.classes.len();
    let samples = manifest
        .files
        .iter()
        .map(|entry| {
            let s = read_clip_file(dir.join(&entry.path))?;
            if entry.label >= k || s.label != entry.label {
                return Err(Error::Format(format!(
                    "{}: label {} (file says {}) for {k} classes",
                    entry.path, entry.label, s.label
                )));
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(mode: Mode) -> GenConfig {
        GenConfig {
            mode,
            noise_std: 0.0,
            samples_per_class: 6,
            seed: 42,
            ..GenConfig::default()
        }
    }

    fn bright(x: &ClipTensor) -> usize {
        x.data().iter().filter(|&&v| v > 0.5).count()
    }

    #[test]
    fn one_dot_per_frame() {
        for mode in [Mode::Direction, Mode::Sync, Mode::Full] {
            for s in generate_samples(&quiet(mode)).unwrap() {
                assert_eq!(bright(&s.clips[0]), 8);
            }
        }
    }

    #[test]
    fn reversed_left_is_a_valid_right() {
        let gc = quiet(Mode::Direction);
        let samples = generate_samples(&gc).unwrap();
        let (left, right) = samples.split_at(gc.samples_per_class);
        for (l, r) in left.iter().zip(right) {
            assert_eq!(l.label, 0);
            assert_eq!(r.label, 1);
            assert_eq!(l.reverse_frames().clips, r.clips);
            // each frame of r has its dot one column right of the previous one
            let col = |t: usize| {
                (0..16)
                    .find(|&c| (0..16).any(|y| r.clips[0].get(t, 0, y, c) > 0.5))
                    .unwrap()
            };
            for t in 1..8 {
                assert_eq!(col(t), col(t - 1) + 1);
            }
        }
    }

    #[test]
    fn sync_pairs_share_modality_a() {
        let gc = quiet(Mode::Sync);
        for j in 0..4 {
            let g = generate_group(&gc, j).unwrap();
            assert_eq!(g[0].clips[0], g[1].clips[0]);
            assert_ne!(g[0].clips[1], g[1].clips[1]);
            let flash_frame = |s: &MultiModalSample| {
                (0..8).find(|&t| s.clips[1].get(t, 0, 0, 0) > 0.5).unwrap()
            };
            assert_eq!(flash_frame(&g[1]), flash_frame(&g[0]) + 1);
        }
    }

    #[test]
    fn full_mode_flash_follows_crossing() {
        let gc = quiet(Mode::Full);
        for s in generate_samples(&gc).unwrap() {
            let a = &s.clips[0];
            let tau = (0..8)
                .find(|&t| (0..16).any(|y| a.get(t, 0, y, gc.center_col()) > 0.5))
                .unwrap();
            let flash = (0..8).find(|&t| s.clips[1].get(t, 0, 0, 0) > 0.5).unwrap();
            assert_eq!(flash, tau + s.label % 2, "label {}", s.label);
        }
    }

    #[test]
    fn noise_is_paired_under_reversal_in_full_mode() {
        let gc = GenConfig { noise_std: 0.05, ..quiet(Mode::Full) };
        let g = generate_group(&gc, 3).unwrap();
        // left-same reversed and right-same share modality A exactly
        assert_eq!(g[0].clips[0].reverse_frames(), g[2].clips[0]);
    }

    #[test]
    fn render_rejects_out_of_bounds() {
        let gc = quiet(Mode::Direction);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = render_clip(&gc, Direction::Left, None, 5, 3, &mut rng);
        assert!(matches!(r, Err(Error::Gen(_))));
        let r = render_clip(&gc, Direction::Right, None, 5, 12, &mut rng);
        assert!(matches!(r, Err(Error::Gen(_))));
        // crossing on the last frame leaves no room for a late flash
        let r = render_clip(&gc, Direction::Right, Some(SyncTiming::Next), 5, 1, &mut rng);
        assert!(matches!(r, Err(Error::Gen(_))));
    }

    #[test]
    fn stride_sampling() {
        let raw = ClipTensor::from_fn(1, 64, 2, 2, |t, _, _, _| t as f64).unwrap();
        assert_eq!(temporal_stride_sample(&raw, 1).unwrap(), raw);
        let s = temporal_stride_sample(&raw, 8).unwrap();
        let kept: Vec<f64> = (0..s.frames()).map(|t| s.get(t, 0, 0, 0)).collect();
        assert_eq!(kept, vec![0.0, 8.0, 16.0, 24.0, 32.0, 40.0, 48.0, 56.0]);
        let raw = ClipTensor::from_fn(1, 10, 1, 1, |t, _, _, _| t as f64).unwrap();
        let s = temporal_stride_sample(&raw, 8).unwrap();
        assert_eq!(s.data(), &[0.0, 8.0]);
    }

    #[test]
    fn clip_file_size_and_round_trip() {
        let gc = GenConfig { seed: 1, ..GenConfig::default() };
        let s = &generate_group(&gc, 0).unwrap()[0];
        let bytes = encode_clip(s).unwrap();
        assert_eq!(bytes.len(), 32 + 2 * 8 * 16 * 16 * 4);
        assert_eq!(&decode_clip(&bytes).unwrap(), s);
    }

    #[test]
    fn clip_format_errors() {
        let s = &generate_group(&quiet(Mode::Sync), 0).unwrap()[0];
        let good = encode_clip(s).unwrap();
        assert!(matches!(decode_clip(&good[..good.len() - 4]), Err(Error::Format(_))));
        assert!(matches!(decode_clip(&good[..10]), Err(Error::Format(_))));
        let mut bad = good.clone();
        bad[0] = b'Z';
        assert!(matches!(decode_clip(&bad), Err(Error::Format(_))));
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(decode_clip(&bad), Err(Error::Format(_))));
        let mut bad = good;
        bad[16] = 9; // T
        assert!(matches!(decode_clip(&bad), Err(Error::Format(_))));

        let odd = MultiModalSample::new(vec![ClipTensor::filled(1, 1, 1, 1, 0.1).unwrap()], 0).unwrap();
        assert!(matches!(encode_clip(&odd), Err(Error::Format(_))));
    }

    #[test]
    fn dataset_is_deterministic_and_balanced() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let gc = GenConfig { mode: Mode::Direction, samples_per_class: 10, seed: 5, ..GenConfig::default() };
        let m = generate_dataset(&gc, a.path()).unwrap();
        generate_dataset(&gc, b.path()).unwrap();
        assert_eq!(m.files.len(), 20);
        assert_eq!(m.classes.len(), 2);
        for k in 0..2 {
            assert_eq!(m.files.iter().filter(|f| f.label == k).count(), 10);
        }
        for name in m.files.iter().map(|f| f.path.clone()).chain([MANIFEST_NAME.to_string()]) {
            assert_eq!(
                fs::read(a.path().join(&name)).unwrap(),
                fs::read(b.path().join(&name)).unwrap()
            );
        }
        let (m2, samples) = load_dataset(a.path()).unwrap();
        assert_eq!(m2, m);
        assert_eq!(samples, generate_samples(&gc).unwrap());
    }

    #[test]
    fn manifest_json_shape() {
        let m = DatasetManifest {
            version: 1,
            mode: Mode::Sync,
            seed: 3,
            classes: Mode::Sync.class_names(),
            files: vec![ManifestEntry { path: "same_00000.dfsb".into(), label: 0 }],
        };
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["mode"], "sync");
        assert_eq!(v["files"][0]["label"], 0);
        assert_eq!(v["classes"][1], "next");
    }
}
