//! 3×3 convolution with zero padding 1, applied frame by frame to a clip.
//!
//! All frames are lowered into one column matrix so that a stage costs a
//! single GEMM. Padded taps are multiplied like any other tap, so the number
//! of executed multiplications is `out_h·out_w·9·C_in·C_out` per frame; that
//! is also the accounting rule used by [`crate::model::mac_count`].

use crate::error::{Error, Result};
use crate::tensor::ClipTensor;
use crate::trace::record_mults;

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// Output extent of a padded 3×3 convolution: `ceil(len / stride)`.
pub fn out_extent(len: usize, stride: usize) -> usize {
    (len - 1) / stride + 1
}

/// Weights `(C_out, C_in, 3, 3)` row-major and one bias per output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            weight: vec![0.0; out_channels * in_channels * TAPS],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn weight_index(&self, co: usize, ci: usize, ky: usize, kx: usize) -> usize {
        ((co * self.in_channels + ci) * KERNEL + ky) * KERNEL + kx
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn check_input(&self, x: &ClipTensor) -> Result<()> {
        if x.channels() != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        Ok(())
    }
}

/// Column matrix `(C_in·9, T·P)` where `P = out_h·out_w`.
fn im2col(x: &ClipTensor, stride: usize, oh: usize, ow: usize) -> Vec<f64> {
    let (cin, frames, h, w) = x.dims();
    let p = oh * ow;
    let cols_n = frames * p;
    let mut cols = vec![0.0; cin * TAPS * cols_n];
    for t in 0..frames {
        let frame = x.frame(t);
        for ci in 0..cin {
            let plane = &frame[ci * h * w..(ci + 1) * h * w];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = (ci * TAPS + ky * KERNEL + kx) * cols_n + t * p;
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - 1;
                            if ix >= 0 && (ix as usize) < w {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds a column-matrix gradient back onto the input grid.
fn col2im(dcols: &[f64], dims: (usize, usize, usize, usize), stride: usize, oh: usize, ow: usize) -> ClipTensor {
    let (cin, frames, h, w) = dims;
    let p = oh * ow;
    let cols_n = frames * p;
    let mut dx = ClipTensor::zeros(cin, frames, h, w).expect("dims checked by caller");
    for t in 0..frames {
        let frame = dx.frame_mut(t);
        for ci in 0..cin {
            let plane = &mut frame[ci * h * w..(ci + 1) * h * w];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = (ci * TAPS + ky * KERNEL + kx) * cols_n + t * p;
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &dcols[row + oy * ow..row + (oy + 1) * ow];
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, &g) in src.iter().enumerate() {
                            let ix = (ox * stride + kx) as isize - 1;
                            if ix >= 0 && (ix as usize) < w {
                                dst[ix as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

/// `c (m×n) = beta·c + a (m×k) · b (k×n)`, all row-major unless strides say otherwise.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every index touched is bounded by the strides and extents,
    // which the callers derive from the lengths of `a`, `b` and `c`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Cross-correlation plus bias on every frame of `x` (no activation).
pub fn conv2d_forward(x: &ClipTensor, params: &ConvParams, stride: usize) -> Result<ClipTensor> {
    params.check_input(x)?;
    if stride != 1 && stride != 2 {
        return Err(Error::Config(format!("stride {stride} not in {{1, 2}}")));
    }
    let (cin, frames, h, w) = x.dims();
    let cout = params.out_channels;
    let (oh, ow) = (out_extent(h, stride), out_extent(w, stride));
    let p = oh * ow;
    let cols_n = frames * p;
    let kdim = cin * TAPS;
    let cols = im2col(x, stride, oh, ow);

    let mut prod = vec![0.0; cout * cols_n];
    gemm(
        cout,
        kdim,
        cols_n,
        &params.weight,
        (kdim as isize, 1),
        &cols,
        (cols_n as isize, 1),
        0.0,
        &mut prod,
    );
    record_mults((cout * kdim * cols_n) as u64);

    let mut out = ClipTensor::zeros(cout, frames, oh, ow)?;
    for t in 0..frames {
        let frame = out.frame_mut(t);
        for co in 0..cout {
            let src = &prod[co * cols_n + t * p..co * cols_n + (t + 1) * p];
            let b = params.bias[co];
            for (d, &s) in frame[co * p..(co + 1) * p].iter_mut().zip(src) {
                *d = s + b;
            }
        }
    }
    Ok(out)
}

/// Accumulates parameter gradients into `grads` and optionally returns the
/// input gradient. `gout` is the gradient of the pre-activation output.
pub fn conv2d_backward(
    x: &ClipTensor,
    gout: &ClipTensor,
    params: &ConvParams,
    stride: usize,
    grads: &mut ConvParams,
    want_input_grad: bool,
) -> Result<Option<ClipTensor>> {
    params.check_input(x)?;
    let (cin, frames, h, w) = x.dims();
    let cout = params.out_channels;
    let (oh, ow) = (out_extent(h, stride), out_extent(w, stride));
    if gout.dims() != (cout, frames, oh, ow) {
        return Err(Error::ShapeMismatch(format!(
            "output gradient {:?} vs expected {:?}",
            gout.dims(),
            (cout, frames, oh, ow)
        )));
    }
    let p = oh * ow;
    let cols_n = frames * p;
    let kdim = cin * TAPS;

    // gradient laid out as (C_out, T·P) to match the forward product
    let mut g = vec![0.0; cout * cols_n];
    for t in 0..frames {
        let frame = gout.frame(t);
        for co in 0..cout {
            g[co * cols_n + t * p..co * cols_n + (t + 1) * p]
                .copy_from_slice(&frame[co * p..(co + 1) * p]);
        }
    }
    for co in 0..cout {
        grads.bias[co] += g[co * cols_n..(co + 1) * cols_n].iter().sum::<f64>();
    }

    let cols = im2col(x, stride, oh, ow);
    // dW (C_out × kdim) += G (C_out × n) · colsᵀ (n × kdim)
    gemm(
        cout,
        cols_n,
        kdim,
        &g,
        (cols_n as isize, 1),
        &cols,
        (1, cols_n as isize),
        1.0,
        &mut grads.weight,
    );
    if !want_input_grad {
        return Ok(None);
    }
    // dcols (kdim × n) = Wᵀ (kdim × C_out) · G (C_out × n)
    let mut dcols = vec![0.0; kdim * cols_n];
    gemm(
        kdim,
        cout,
        cols_n,
        &params.weight,
        (1, kdim as isize),
        &g,
        (cols_n as isize, 1),
        0.0,
        &mut dcols,
    );
    Ok(Some(col2im(&dcols, (cin, frames, h, w), stride, oh, ow)))
}
