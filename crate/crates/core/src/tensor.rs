//! Dense clip tensors.
//!
//! A [`ClipTensor`] holds `C` channels over `T` frames of `H × W` maps. The
//! frame index is outermost, so the slab of one frame (`C·H·W` values) is
//! contiguous and a shift along time is a block copy.

use std::ops::Range;

use crate::error::{Error, Result};

/// Half-open channel interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelRange {
    pub start: usize,
    pub end: usize,
}

impl ChannelRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, channels: usize) -> Result<()> {
        if self.start > self.end || self.end > channels {
            return Err(Error::Range(format!(
                "channel range [{}, {}) invalid for {} channels",
                self.start, self.end, channels
            )));
        }
        Ok(())
    }
}

impl From<Range<usize>> for ChannelRange {
    fn from(r: Range<usize>) -> Self {
        Self::new(r.start, r.end)
    }
}

/// Rank-4 feature volume laid out as `index(t, c, h, w) = t·CHW + c·HW + h·W + w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipTensor {
    channels: usize,
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ClipTensor {
    /// Tensor of the given shape with every element set to `fill`.
    pub fn filled(c: usize, t: usize, h: usize, w: usize, fill: f64) -> Result<Self> {
        check_dims(c, t, h, w)?;
        Ok(Self {
            channels: c,
            frames: t,
            height: h,
            width: w,
            data: vec![fill; c * t * h * w],
        })
    }

    pub fn zeros(c: usize, t: usize, h: usize, w: usize) -> Result<Self> {
        Self::filled(c, t, h, w, 0.0)
    }

    /// Wraps an existing buffer, which must already be in canonical layout.
    pub fn from_vec(c: usize, t: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(c, t, h, w)?;
        if data.len() != c * t * h * w {
            return Err(Error::InvalidDims(format!(
                "buffer of {} values for shape ({c},{t},{h},{w})",
                data.len()
            )));
        }
        Ok(Self {
            channels: c,
            frames: t,
            height: h,
            width: w,
            data,
        })
    }

    /// Builds a tensor from a function of `(t, c, h, w)`.
    pub fn from_fn(
        c: usize,
        t: usize,
        h: usize,
        w: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(c, t, h, w)?;
        let mut data = Vec::with_capacity(c * t * h * w);
        for ti in 0..t {
            for ci in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        data.push(f(ti, ci, hi, wi));
                    }
                }
            }
        }
        Ok(Self {
            channels: c,
            frames: t,
            height: h,
            width: w,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(C, T, H, W)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.channels, self.frames, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.plane_len()
    }

    pub fn index(&self, t: usize, c: usize, h: usize, w: usize) -> usize {
        t * self.frame_len() + c * self.plane_len() + h * self.width + w
    }

    pub fn get(&self, t: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.index(t, c, h, w)]
    }

    pub fn set(&mut self, t: usize, c: usize, h: usize, w: usize, v: f64) {
        let i = self.index(t, c, h, w);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// The contiguous `C·H·W` slab of frame `t`.
    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    /// Values of channels `r` within frame `t`, contiguous.
    pub fn band(&self, t: usize, r: ChannelRange) -> &[f64] {
        let base = t * self.frame_len();
        let p = self.plane_len();
        &self.data[base + r.start * p..base + r.end * p]
    }

    pub fn band_mut(&mut self, t: usize, r: ChannelRange) -> &mut [f64] {
        let base = t * self.frame_len();
        let p = self.plane_len();
        &mut self.data[base + r.start * p..base + r.end * p]
    }

    pub fn same_shape(&self, other: &ClipTensor) -> bool {
        self.dims() == other.dims()
    }

    /// Copy of channels `r`, all frames.
    pub fn slice_channels(&self, r: impl Into<ChannelRange>) -> Result<ClipTensor> {
        let r = r.into();
        r.check(self.channels)?;
        if r.is_empty() {
            return Err(Error::Range(
                "empty channel slice has no tensor representation".into(),
            ));
        }
        let mut data = Vec::with_capacity(r.len() * self.frames * self.plane_len());
        for t in 0..self.frames {
            data.extend_from_slice(self.band(t, r));
        }
        Ok(ClipTensor {
            channels: r.len(),
            frames: self.frames,
            height: self.height,
            width: self.width,
            data,
        })
    }

    /// Channel-axis concatenation preserving list order.
    pub fn concat_channels(parts: &[&ClipTensor]) -> Result<ClipTensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("concat of an empty list".into()))?;
        let (t, h, w) = (first.frames, first.height, first.width);
        for p in parts {
            if (p.frames, p.height, p.width) != (t, h, w) {
                return Err(Error::ShapeMismatch(format!(
                    "concat part (T,H,W)=({},{},{}) vs ({t},{h},{w})",
                    p.frames, p.height, p.width
                )));
            }
        }
        let channels: usize = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(channels * t * h * w);
        for ti in 0..t {
            for p in parts {
                data.extend_from_slice(p.frame(ti));
            }
        }
        Ok(ClipTensor {
            channels,
            frames: t,
            height: h,
            width: w,
            data,
        })
    }

    /// Copy with frame order reversed.
    pub fn reverse_frames(&self) -> ClipTensor {
        let mut out = self.clone();
        for t in 0..self.frames {
            out.frame_mut(t)
                .copy_from_slice(self.frame(self.frames - 1 - t));
        }
        out
    }

    /// Euclidean inner product over all elements.
    pub fn dot(&self, other: &ClipTensor) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch(format!(
                "dot of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }
}

fn check_dims(c: usize, t: usize, h: usize, w: usize) -> Result<()> {
    if c == 0 || t == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidDims(format!(
            "all dims must be >= 1, got ({c},{t},{h},{w})"
        )));
    }
    Ok(())
}

/// Tensor of shape `(c, t, h, w)` filled with `fill`.
pub fn make_clip(c: usize, t: usize, h: usize, w: usize, fill: f64) -> Result<ClipTensor> {
    ClipTensor::filled(c, t, h, w, fill)
}

pub fn slice_channels(x: &ClipTensor, r: impl Into<ChannelRange>) -> Result<ClipTensor> {
    x.slice_channels(r)
}

pub fn concat_channels(parts: &[&ClipTensor]) -> Result<ClipTensor> {
    ClipTensor::concat_channels(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labeled(c: usize, t: usize) -> ClipTensor {
        // value encodes (t, c) so channel identity is visible after slicing
        ClipTensor::from_fn(c, t, 2, 2, |ti, ci, h, w| {
            (ti * 100 + ci * 10) as f64 + (h * 2 + w) as f64 * 0.1
        })
        .unwrap()
    }

    #[test]
    fn make_clip_examples() {
        let x = make_clip(1, 1, 1, 1, 0.0).unwrap();
        assert_eq!(x.data(), &[0.0]);
        let x = make_clip(2, 3, 4, 4, 1.0).unwrap();
        assert_eq!(x.len(), 96);
        assert!(x.data().iter().all(|&v| v == 1.0));
        let x = make_clip(8, 8, 16, 16, 0.0).unwrap();
        assert_eq!(x.len(), 16384);
        assert!(x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn make_clip_rejects_zero_dims() {
        for dims in [(0, 1, 1, 1), (1, 0, 1, 1), (1, 1, 0, 1), (1, 1, 1, 0)] {
            let r = make_clip(dims.0, dims.1, dims.2, dims.3, 0.0);
            assert!(matches!(r, Err(Error::InvalidDims(_))));
        }
    }

    #[test]
    fn slice_examples() {
        let x = labeled(4, 3);
        let d = x.slice_channels(3..4).unwrap();
        assert_eq!(d.channels(), 1);
        for t in 0..3 {
            assert_eq!(d.band(t, (0..1).into()), x.band(t, (3..4).into()));
        }
        assert_eq!(x.slice_channels(0..4).unwrap(), x);
        let bc = x.slice_channels(1..3).unwrap();
        assert_eq!(bc.get(2, 0, 1, 1), x.get(2, 1, 1, 1));
        assert_eq!(bc.get(2, 1, 0, 1), x.get(2, 2, 0, 1));
    }

    #[test]
    fn slice_out_of_range() {
        let x = labeled(4, 1);
        assert!(matches!(x.slice_channels(2..5), Err(Error::Range(_))));
        assert!(matches!(
            x.slice_channels(ChannelRange::new(3, 2)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn concat_examples() {
        let x = labeled(3, 2);
        let ab = x.slice_channels(0..2).unwrap();
        let c = x.slice_channels(2..3).unwrap();
        assert_eq!(concat_channels(&[&ab, &c]).unwrap(), x);
        assert_eq!(concat_channels(&[&x]).unwrap(), x);
    }

    #[test]
    fn concat_shape_mismatch() {
        let a = make_clip(1, 2, 2, 2, 0.0).unwrap();
        let b = make_clip(1, 3, 2, 2, 0.0).unwrap();
        assert!(matches!(
            concat_channels(&[&a, &b]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(concat_channels(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn slices_stay_inside_their_band() {
        // canary channels on both sides must never appear in the slice
        let canary = -7.25;
        let x = ClipTensor::from_fn(6, 3, 3, 2, |t, c, h, w| {
            if c == 0 || c == 5 {
                canary
            } else {
                (t * 1000 + c * 100 + h * 10 + w) as f64
            }
        })
        .unwrap();
        let mid = x.slice_channels(1..5).unwrap();
        assert!(mid.data().iter().all(|&v| v != canary));
        let glued = concat_channels(&[
            &x.slice_channels(0..1).unwrap(),
            &mid,
            &x.slice_channels(5..6).unwrap(),
        ])
        .unwrap();
        assert_eq!(glued, x);
    }

    proptest! {
        #[test]
        fn slice_concat_round_trip(
            c in 1usize..10, t in 1usize..5, h in 1usize..5, w in 1usize..5,
            k_seed in 0usize..100, seed in any::<u64>()
        ) {
            let mut s = seed;
            let x = ClipTensor::from_fn(c, t, h, w, |_, _, _, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }).unwrap();
            let k = k_seed % (c + 1);
            let back = if k == 0 || k == c {
                x.clone()
            } else {
                let lo = x.slice_channels(0..k).unwrap();
                let hi = x.slice_channels(k..c).unwrap();
                concat_channels(&[&lo, &hi]).unwrap()
            };
            prop_assert_eq!(back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }

        #[test]
        fn layout_law(c in 1usize..6, t in 1usize..6, h in 1usize..6, w in 1usize..6) {
            let x = ClipTensor::from_fn(c, t, h, w, |ti, ci, hi, wi| {
                (((ti * 7 + ci) * 11 + hi) * 13 + wi) as f64
            }).unwrap();
            for ti in 0..t { for ci in 0..c { for hi in 0..h { for wi in 0..w {
                let flat = ti * (c * h * w) + ci * (h * w) + hi * w + wi;
                prop_assert_eq!(x.data()[flat], (((ti * 7 + ci) * 11 + hi) * 13 + wi) as f64);
            }}}}
        }
    }
}
