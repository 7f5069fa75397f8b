//! Dual feature shift: modality band exchange followed by bidirectional
//! temporal shift, plus the adjoint maps used in backpropagation.
//!
//! Both shifts are pure channel-band copies and execute no multiplications.
//! With `C` channels at a site, the modality band is the last `k` channels
//! `[C-k, C)` and the temporal band is the first `2i` channels `[0, 2i)`:
//! `[0, i)` is taken from the previous frame and `[i, 2i)` from the next one.
//! Bands that would read past either end of the clip are zero-filled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ChannelRange, ClipTensor};

/// Non-negative rational `num/den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u32,
    pub den: u32,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const EIGHTH: Fraction = Fraction { num: 1, den: 8 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::Config("fraction with zero denominator".into()));
        }
        Ok(Self { num, den })
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// Band width for `channels`: `max(1, floor(channels·num/den))`, or 0 when
    /// the fraction is zero (mechanism disabled).
    pub fn band_width(&self, channels: usize) -> usize {
        if self.num == 0 {
            return 0;
        }
        (channels * self.num as usize / self.den as usize).max(1)
    }
}

/// Shift widths and the stage gaps where the dual shift runs.
///
/// Site `s` is the gap between stage `s` and stage `s + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub k_fraction: Fraction,
    pub i_fraction: Fraction,
    pub sites: Vec<usize>,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            k_fraction: Fraction::EIGHTH,
            i_fraction: Fraction::EIGHTH,
            sites: vec![1, 2, 3, 4],
        }
    }
}

impl ShiftConfig {
    /// No shift sites at all.
    pub fn none() -> Self {
        Self {
            k_fraction: Fraction::ZERO,
            i_fraction: Fraction::ZERO,
            sites: Vec::new(),
        }
    }

    pub fn has_site(&self, site: usize) -> bool {
        self.sites.contains(&site)
    }

    /// `(k, i)` for a site with `channels` channels.
    pub fn bands(&self, channels: usize) -> Result<(usize, usize)> {
        let k = self.k_fraction.band_width(channels);
        let i = self.i_fraction.band_width(channels);
        if 2 * i + k > channels {
            return Err(Error::Config(format!(
                "temporal band [0,{}) overlaps modality band [{},{}) at {} channels",
                2 * i,
                channels.saturating_sub(k),
                channels,
                channels
            )));
        }
        Ok((k, i))
    }

    /// Sites must lie in `1..stages` and be listed at most once.
    pub fn validate(&self, stages: usize) -> Result<()> {
        if self.k_fraction.den == 0 || self.i_fraction.den == 0 {
            return Err(Error::Config("fraction with zero denominator".into()));
        }
        for (n, &s) in self.sites.iter().enumerate() {
            if s == 0 || s >= stages {
                return Err(Error::Config(format!(
                    "shift site {s} outside 1..{}",
                    stages - 1
                )));
            }
            if self.sites[..n].contains(&s) {
                return Err(Error::Config(format!("shift site {s} listed twice")));
            }
        }
        Ok(())
    }

    /// Bitmask with bit `s` set for every site `s`.
    pub fn site_mask(&self) -> u32 {
        self.sites.iter().fold(0, |m, &s| m | (1 << s))
    }

    pub fn sites_from_mask(mask: u32) -> Vec<usize> {
        (0..32).filter(|s| mask & (1 << s) != 0).collect()
    }
}

fn check_same_shape(xs: &[&ClipTensor]) -> Result<()> {
    let first = xs[0];
    for x in &xs[1..] {
        if !x.same_shape(first) {
            return Err(Error::ShapeMismatch(format!(
                "modality shapes {:?} and {:?} differ",
                first.dims(),
                x.dims()
            )));
        }
    }
    Ok(())
}

fn check_k(k: usize, channels: usize) -> Result<()> {
    if k > channels {
        return Err(Error::Range(format!(
            "modality band k={k} exceeds {channels} channels"
        )));
    }
    Ok(())
}

fn check_i(i: usize, channels: usize) -> Result<()> {
    if 2 * i > channels {
        return Err(Error::Range(format!(
            "temporal band 2i={} exceeds {channels} channels",
            2 * i
        )));
    }
    Ok(())
}

/// Exchanges the last `k` channels of two modalities, frame by frame.
pub fn modality_shift_pair(
    xp: &ClipTensor,
    xq: &ClipTensor,
    k: usize,
) -> Result<(ClipTensor, ClipTensor)> {
    let mut out = rotate_band(&[xp, xq], k, 1)?;
    let q = out.pop().expect("two outputs");
    let p = out.pop().expect("two outputs");
    Ok((p, q))
}

/// Cyclic rotation of the last-`k` band: output `p` takes the band of
/// modality `(p + 1) mod N`. For `N = 2` this is the pairwise exchange.
pub fn modality_shift_group(xs: &[ClipTensor], k: usize) -> Result<Vec<ClipTensor>> {
    rotate_band(&xs.iter().collect::<Vec<_>>(), k, 1)
}

/// Adjoint of [`modality_shift_group`]: output `p` takes the band of
/// `(p - 1) mod N`.
pub fn modality_shift_backward(gs: &[ClipTensor], k: usize) -> Result<Vec<ClipTensor>> {
    if gs.is_empty() {
        return Err(Error::InvalidInput("no modalities".into()));
    }
    let n = gs.len();
    rotate_band(&gs.iter().collect::<Vec<_>>(), k, n - 1)
}

/// [`modality_shift_group`] written into caller-owned outputs of the same
/// shapes, which are overwritten entirely.
pub fn modality_shift_into(xs: &[&ClipTensor], k: usize, out: &mut [ClipTensor]) -> Result<()> {
    check_group(xs, k)?;
    if out.len() != xs.len() || out.iter().any(|o| !o.same_shape(xs[0])) {
        return Err(Error::ShapeMismatch(
            "output buffers must match the input modalities".into(),
        ));
    }
    for (dst, &src) in out.iter_mut().zip(xs) {
        dst.data_mut().copy_from_slice(src.data());
    }
    write_rotated_bands(xs, k, 1, out);
    Ok(())
}

fn check_group(xs: &[&ClipTensor], k: usize) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "modality shift needs at least 2 modalities, got {}",
            xs.len()
        )));
    }
    check_same_shape(xs)?;
    check_k(k, xs[0].channels())
}

fn rotate_band(xs: &[&ClipTensor], k: usize, offset: usize) -> Result<Vec<ClipTensor>> {
    check_group(xs, k)?;
    let mut out: Vec<ClipTensor> = xs.iter().map(|&x| x.clone()).collect();
    write_rotated_bands(xs, k, offset, &mut out);
    Ok(out)
}

fn write_rotated_bands(xs: &[&ClipTensor], k: usize, offset: usize, out: &mut [ClipTensor]) {
    if k == 0 {
        return;
    }
    let c = xs[0].channels();
    let band = ChannelRange::new(c - k, c);
    let n = xs.len();
    for (p, dst) in out.iter_mut().enumerate() {
        let src = xs[(p + offset) % n];
        for t in 0..src.frames() {
            dst.band_mut(t, band).copy_from_slice(src.band(t, band));
        }
    }
}

/// Bidirectional temporal shift of the first `2i` channels.
///
/// Frame `t` takes channels `[0, i)` from frame `t-1` and `[i, 2i)` from
/// frame `t+1`; missing neighbours contribute zeros.
pub fn temporal_shift(x: &ClipTensor, i: usize) -> Result<ClipTensor> {
    shift_bands(x, i, false)
}

/// Adjoint of [`temporal_shift`]: the same copy with directions exchanged.
pub fn temporal_shift_backward(g: &ClipTensor, i: usize) -> Result<ClipTensor> {
    shift_bands(g, i, true)
}

/// [`temporal_shift`] written into a caller-owned output of the same shape,
/// which is overwritten entirely.
pub fn temporal_shift_into(x: &ClipTensor, i: usize, out: &mut ClipTensor) -> Result<()> {
    check_i(i, x.channels())?;
    if !out.same_shape(x) {
        return Err(Error::ShapeMismatch(format!(
            "output {:?} does not match input {:?}",
            out.dims(),
            x.dims()
        )));
    }
    out.data_mut().copy_from_slice(x.data());
    write_shifted_bands(x, i, false, out);
    Ok(())
}

fn shift_bands(x: &ClipTensor, i: usize, reverse: bool) -> Result<ClipTensor> {
    check_i(i, x.channels())?;
    let mut out = x.clone();
    write_shifted_bands(x, i, reverse, &mut out);
    Ok(out)
}

fn write_shifted_bands(x: &ClipTensor, i: usize, reverse: bool, out: &mut ClipTensor) {
    if i == 0 {
        return;
    }
    let frames = x.frames();
    let (from_past, from_future) = if reverse {
        (ChannelRange::new(i, 2 * i), ChannelRange::new(0, i))
    } else {
        (ChannelRange::new(0, i), ChannelRange::new(i, 2 * i))
    };
    for t in 0..frames {
        let dst = out.band_mut(t, from_past);
        if t == 0 {
            dst.fill(0.0);
        } else {
            dst.copy_from_slice(x.band(t - 1, from_past));
        }
        let dst = out.band_mut(t, from_future);
        if t + 1 == frames {
            dst.fill(0.0);
        } else {
            dst.copy_from_slice(x.band(t + 1, from_future));
        }
    }
}

/// Modality shift then temporal shift at `site`.
///
/// With a single modality there is no partner to exchange with, so only the
/// temporal shift runs.
pub fn dual_shift(xs: &[ClipTensor], cfg: &ShiftConfig, site: usize) -> Result<Vec<ClipTensor>> {
    let (k, i) = site_bands(xs, cfg, site)?;
    let mixed = if xs.len() >= 2 {
        modality_shift_group(xs, k)?
    } else {
        xs.to_vec()
    };
    mixed.iter().map(|x| temporal_shift(x, i)).collect()
}

/// Adjoint of [`dual_shift`]: temporal adjoint first, then modality adjoint.
pub fn dual_shift_backward(
    gs: &[ClipTensor],
    cfg: &ShiftConfig,
    site: usize,
) -> Result<Vec<ClipTensor>> {
    let (k, i) = site_bands(gs, cfg, site)?;
    let unshifted: Vec<ClipTensor> = gs
        .iter()
        .map(|g| temporal_shift_backward(g, i))
        .collect::<Result<_>>()?;
    if unshifted.len() >= 2 {
        modality_shift_backward(&unshifted, k)
    } else {
        Ok(unshifted)
    }
}

fn site_bands(xs: &[ClipTensor], cfg: &ShiftConfig, site: usize) -> Result<(usize, usize)> {
    if !cfg.has_site(site) {
        return Err(Error::Config(format!("site {site} is not a shift site")));
    }
    let first = xs
        .first()
        .ok_or_else(|| Error::InvalidInput("no modalities".into()))?;
    let refs: Vec<&ClipTensor> = xs.iter().collect();
    check_same_shape(&refs)?;
    cfg.bands(first.channels())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::count_mult_ops;

    /// Channel `c` of frame `t` in modality `m` holds `m·1000 + t·10 + c + 1`
    /// at every pixel, so 0 is unambiguous as a zero-fill marker.
    fn symbolic(m: usize, c: usize, t: usize) -> ClipTensor {
        ClipTensor::from_fn(c, t, 2, 2, |ti, ci, _, _| {
            (m * 1000 + ti * 10 + ci + 1) as f64
        })
        .unwrap()
    }

    fn channel_ids(x: &ClipTensor, t: usize) -> Vec<f64> {
        (0..x.channels()).map(|c| x.get(t, c, 0, 0)).collect()
    }

    fn sym(m: usize, t: usize, c: usize) -> f64 {
        (m * 1000 + t * 10 + c + 1) as f64
    }

    #[test]
    fn pair_swaps_last_band() {
        let p = symbolic(1, 8, 2);
        let q = symbolic(2, 8, 2);
        let (pp, qq) = modality_shift_pair(&p, &q, 1).unwrap();
        for t in 0..2 {
            let mut want_p: Vec<f64> = (0..7).map(|c| sym(1, t, c)).collect();
            want_p.push(sym(2, t, 7));
            let mut want_q: Vec<f64> = (0..7).map(|c| sym(2, t, c)).collect();
            want_q.push(sym(1, t, 7));
            assert_eq!(channel_ids(&pp, t), want_p);
            assert_eq!(channel_ids(&qq, t), want_q);
        }
    }

    #[test]
    fn pair_k0_and_involution() {
        let p = symbolic(1, 8, 3);
        let q = symbolic(2, 8, 3);
        let (a, b) = modality_shift_pair(&p, &q, 0).unwrap();
        assert_eq!((a, b), (p.clone(), q.clone()));
        let (a, b) = modality_shift_pair(&p, &q, 3).unwrap();
        let (a, b) = modality_shift_pair(&a, &b, 3).unwrap();
        assert_eq!((a, b), (p, q));
    }

    #[test]
    fn pair_errors() {
        let p = symbolic(1, 4, 2);
        let q = symbolic(2, 4, 3);
        assert!(matches!(
            modality_shift_pair(&p, &q, 1),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            modality_shift_pair(&p, &p, 5),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn group_needs_two() {
        assert!(matches!(
            modality_shift_group(&[symbolic(0, 4, 2)], 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn group_of_two_matches_pair() {
        let p = symbolic(1, 6, 2);
        let q = symbolic(2, 6, 2);
        let g = modality_shift_group(&[p.clone(), q.clone()], 2).unwrap();
        let (a, b) = modality_shift_pair(&p, &q, 2).unwrap();
        assert_eq!(g, vec![a, b]);
    }

    #[test]
    fn group_of_three_rotates() {
        let xs: Vec<ClipTensor> = (0..3).map(|m| symbolic(m, 4, 2)).collect();
        let out = modality_shift_group(&xs, 1).unwrap();
        // last channels (a, b, c) become (b, c, a)
        for t in 0..2 {
            let last: Vec<f64> = out.iter().map(|x| x.get(t, 3, 1, 1)).collect();
            assert_eq!(last, vec![sym(1, t, 3), sym(2, t, 3), sym(0, t, 3)]);
            for (m, x) in out.iter().enumerate() {
                for c in 0..3 {
                    assert_eq!(x.get(t, c, 0, 1), sym(m, t, c));
                }
            }
        }
        let mut cur = xs.clone();
        for _ in 0..3 {
            cur = modality_shift_group(&cur, 1).unwrap();
        }
        assert_eq!(cur, xs);
    }

    #[test]
    fn temporal_examples() {
        // C=4, i=1, T=3 with channels (A, B, C, D)
        let x = symbolic(0, 4, 3);
        let y = temporal_shift(&x, 1).unwrap();
        let (a, b, c, d) = (0, 1, 2, 3);
        assert_eq!(
            channel_ids(&y, 1),
            vec![sym(0, 0, a), sym(0, 2, b), sym(0, 1, c), sym(0, 1, d)]
        );
        assert_eq!(
            channel_ids(&y, 0),
            vec![0.0, sym(0, 1, b), sym(0, 0, c), sym(0, 0, d)]
        );
        assert_eq!(
            channel_ids(&y, 2),
            vec![sym(0, 1, a), 0.0, sym(0, 2, c), sym(0, 2, d)]
        );
        assert_eq!(temporal_shift(&x, 0).unwrap(), x);
        assert!(matches!(temporal_shift(&x, 3), Err(Error::Range(_))));
    }

    #[test]
    fn temporal_backward_small_transpose() {
        // C=2, i=1, T=2: gout ((g1a, g1b), (g2a, g2b)) -> ((g2a, 0), (0, g1b))
        let g = ClipTensor::from_vec(2, 2, 1, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let gin = temporal_shift_backward(&g, 1).unwrap();
        assert_eq!(gin.data(), &[3.0, 0.0, 0.0, 2.0]);
        assert_eq!(temporal_shift_backward(&g, 0).unwrap(), g);
        assert!(matches!(
            temporal_shift_backward(&g, 2),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn modality_backward_is_forward_for_pairs() {
        let gs = vec![symbolic(1, 8, 2), symbolic(2, 8, 2)];
        assert_eq!(
            modality_shift_backward(&gs, 2).unwrap(),
            modality_shift_group(&gs, 2).unwrap()
        );
        assert_eq!(modality_shift_backward(&gs, 0).unwrap(), gs);
    }

    #[test]
    fn dual_shift_composition() {
        // C=8, k=1, i=1, T=3: modality exchange on channel 7, then temporal shift
        let cfg = ShiftConfig {
            k_fraction: Fraction::EIGHTH,
            i_fraction: Fraction::EIGHTH,
            sites: vec![1],
        };
        let xs = vec![symbolic(1, 8, 3), symbolic(2, 8, 3)];
        let out = dual_shift(&xs, &cfg, 1).unwrap();
        for (m, other) in [(1usize, 2usize), (2, 1)] {
            let y = &out[m - 1];
            for t in 0..3 {
                let mut want = Vec::new();
                want.push(if t == 0 { 0.0 } else { sym(m, t - 1, 0) });
                want.push(if t == 2 { 0.0 } else { sym(m, t + 1, 1) });
                for c in 2..7 {
                    want.push(sym(m, t, c));
                }
                want.push(sym(other, t, 7));
                assert_eq!(channel_ids(y, t), want, "modality {m} frame {t}");
            }
        }
    }

    #[test]
    fn dual_shift_identity_and_symmetry() {
        let off = ShiftConfig {
            k_fraction: Fraction::ZERO,
            i_fraction: Fraction::ZERO,
            sites: vec![2],
        };
        let xs = vec![symbolic(1, 8, 3), symbolic(2, 8, 3)];
        assert_eq!(dual_shift(&xs, &off, 2).unwrap(), xs);

        let same = vec![symbolic(3, 16, 4), symbolic(3, 16, 4)];
        let out = dual_shift(&same, &ShiftConfig::default(), 1).unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn dual_shift_rejects_overlap_and_unknown_site() {
        let cfg = ShiftConfig {
            k_fraction: Fraction { num: 1, den: 2 },
            i_fraction: Fraction { num: 1, den: 2 },
            sites: vec![1],
        };
        let xs = vec![symbolic(1, 4, 2), symbolic(2, 4, 2)];
        assert!(matches!(dual_shift(&xs, &cfg, 1), Err(Error::Config(_))));
        assert!(matches!(
            dual_shift(&xs, &ShiftConfig::default(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn band_rounding() {
        assert_eq!(Fraction::EIGHTH.band_width(16), 2);
        assert_eq!(Fraction::EIGHTH.band_width(7), 1);
        assert_eq!(Fraction::EIGHTH.band_width(64), 8);
        assert_eq!(Fraction::ZERO.band_width(64), 0);
        assert_eq!(ShiftConfig::default().bands(8).unwrap(), (1, 1));
        assert!(ShiftConfig::default().bands(2).is_err());
    }

    #[test]
    fn site_mask_round_trip() {
        let cfg = ShiftConfig::default();
        assert_eq!(cfg.site_mask(), 0b11110);
        assert_eq!(ShiftConfig::sites_from_mask(cfg.site_mask()), cfg.sites);
    }

    #[test]
    fn validate_sites() {
        let mut cfg = ShiftConfig::default();
        assert!(cfg.validate(5).is_ok());
        cfg.sites = vec![5];
        assert!(cfg.validate(5).is_err());
        cfg.sites = vec![1, 1];
        assert!(cfg.validate(5).is_err());
    }

    #[test]
    fn shifts_do_not_multiply() {
        let xs = vec![symbolic(1, 16, 4), symbolic(2, 16, 4)];
        let (_, n) = count_mult_ops(|| modality_shift_pair(&xs[0], &xs[1], 2).unwrap());
        assert_eq!(n, 0);
        let (_, n) = count_mult_ops(|| temporal_shift(&xs[0], 2).unwrap());
        assert_eq!(n, 0);
        let (_, n) = count_mult_ops(|| dual_shift(&xs, &ShiftConfig::default(), 3).unwrap());
        assert_eq!(n, 0);
    }

    #[test]
    fn into_variants_match_allocating_kernels() {
        let a = ClipTensor::from_fn(8, 3, 2, 2, |t, c, h, w| (t * 100 + c * 10 + h * 2 + w) as f64).unwrap();
        let b = a.reverse_frames();
        let mut out = vec![ClipTensor::filled(8, 3, 2, 2, f64::NAN).unwrap(); 2];
        modality_shift_into(&[&a, &b], 2, &mut out).unwrap();
        let (p, q) = modality_shift_pair(&a, &b, 2).unwrap();
        assert_eq!(out, vec![p, q]);
        let mut t = ClipTensor::filled(8, 3, 2, 2, f64::NAN).unwrap();
        temporal_shift_into(&a, 2, &mut t).unwrap();
        assert_eq!(t, temporal_shift(&a, 2).unwrap());

        let mut wrong = ClipTensor::zeros(8, 2, 2, 2).unwrap();
        assert!(matches!(temporal_shift_into(&a, 2, &mut wrong), Err(Error::ShapeMismatch(_))));
        assert!(modality_shift_into(&[&a, &b], 2, &mut out[..1]).is_err());
        let (_, n) = count_mult_ops(|| temporal_shift_into(&a, 1, &mut t).unwrap());
        assert_eq!(n, 0);
    }
}
