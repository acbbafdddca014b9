//! Bilinear resampling with the half-pixel (align-corners = false) convention:
//! output index `d` samples source coordinate `(d + 0.5)·in/out − 0.5`,
//! clamped to `[0, in − 1]`.

use super::{chw, Tensor};
use crate::error::{Error, Result};

/// Per-axis interpolation taps: output `d` blends `lo[d]` and `hi[d]` with
/// weight `frac[d]` on `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisTaps {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub frac: Vec<f64>,
}

impl AxisTaps {
    fn from_coords(in_len: usize, coords: impl Iterator<Item = f64>) -> Self {
        let max = (in_len - 1) as f64;
        let mut taps = AxisTaps {
            lo: Vec::new(),
            hi: Vec::new(),
            frac: Vec::new(),
        };
        for src in coords {
            let s = src.clamp(0.0, max);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(in_len - 1);
            taps.lo.push(lo);
            taps.hi.push(hi);
            taps.frac.push(s - lo as f64);
        }
        taps
    }

    /// Integer upscaling by `factor`: source = `(d + 0.5)/factor − 0.5`.
    pub fn upsample(in_len: usize, factor: usize) -> Self {
        let f = factor as f64;
        Self::from_coords(
            in_len,
            (0..in_len * factor).map(|d| (d as f64 + 0.5) / f - 0.5),
        )
    }

    /// Arbitrary resize from `in_len` to `out_len` samples.
    pub fn resize(in_len: usize, out_len: usize) -> Self {
        let (i, o) = (in_len as f64, out_len as f64);
        Self::from_coords(in_len, (0..out_len).map(|d| (d as f64 + 0.5) * i / o - 0.5))
    }

    pub fn out_len(&self) -> usize {
        self.lo.len()
    }

    /// Resample one `in_h×in_w` plane into `out` (`rows.out_len()×cols.out_len()`).
    pub fn apply_plane(rows: &AxisTaps, cols: &AxisTaps, in_w: usize, plane: &[f64], out: &mut [f64]) {
        let ow = cols.out_len();
        for (oy, ((&y0, &y1), &fy)) in rows.lo.iter().zip(&rows.hi).zip(&rows.frac).enumerate() {
            let r0 = &plane[y0 * in_w..(y0 + 1) * in_w];
            let r1 = &plane[y1 * in_w..(y1 + 1) * in_w];
            for (ox, ((&x0, &x1), &fx)) in cols.lo.iter().zip(&cols.hi).zip(&cols.frac).enumerate() {
                let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
                out[oy * ow + ox] = top + (bot - top) * fy;
            }
        }
    }

    /// Adjoint of [`AxisTaps::apply_plane`]: accumulate output gradients into
    /// the source plane gradient.
    pub fn adjoint_plane(rows: &AxisTaps, cols: &AxisTaps, in_w: usize, grad: &[f64], acc: &mut [f64]) {
        let ow = cols.out_len();
        for (oy, ((&y0, &y1), &fy)) in rows.lo.iter().zip(&rows.hi).zip(&rows.frac).enumerate() {
            for (ox, ((&x0, &x1), &fx)) in cols.lo.iter().zip(&cols.hi).zip(&cols.frac).enumerate() {
                let g = grad[oy * ow + ox];
                acc[y0 * in_w + x0] += g * (1.0 - fy) * (1.0 - fx);
                acc[y0 * in_w + x1] += g * (1.0 - fy) * fx;
                acc[y1 * in_w + x0] += g * fy * (1.0 - fx);
                acc[y1 * in_w + x1] += g * fy * fx;
            }
        }
    }
}

fn apply(input: &Tensor, rows: &AxisTaps, cols: &AxisTaps) -> Result<Tensor> {
    let (c, h, w) = chw(input)?;
    let (oh, ow) = (rows.out_len(), cols.out_len());
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        AxisTaps::apply_plane(
            rows,
            cols,
            w,
            &input.data()[ch * h * w..(ch + 1) * h * w],
            &mut out[ch * oh * ow..(ch + 1) * oh * ow],
        );
    }
    Tensor::new(vec![c, oh, ow], out)
}

fn adjoint(grad: &Tensor, rows: &AxisTaps, cols: &AxisTaps, h: usize, w: usize) -> Result<Tensor> {
    let (c, gh, gw) = chw(grad)?;
    if (gh, gw) != (rows.out_len(), cols.out_len()) {
        return Err(Error::dim("resample gradient has the wrong spatial size"));
    }
    let mut acc = vec![0.0; c * h * w];
    for ch in 0..c {
        AxisTaps::adjoint_plane(
            rows,
            cols,
            w,
            &grad.data()[ch * gh * gw..(ch + 1) * gh * gw],
            &mut acc[ch * h * w..(ch + 1) * h * w],
        );
    }
    Tensor::new(vec![c, h, w], acc)
}

pub fn bilinear_upsample(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::dim("upsample factor must be ≥ 1"));
    }
    let (_, h, w) = chw(input)?;
    apply(input, &AxisTaps::upsample(h, factor), &AxisTaps::upsample(w, factor))
}

/// Gradient of [`bilinear_upsample`] with respect to its input.
pub fn bilinear_upsample_backward(grad: &Tensor, h: usize, w: usize, factor: usize) -> Result<Tensor> {
    adjoint(grad, &AxisTaps::upsample(h, factor), &AxisTaps::upsample(w, factor), h, w)
}

pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::dim("resize target must be positive"));
    }
    let (_, h, w) = chw(input)?;
    apply(input, &AxisTaps::resize(h, out_h), &AxisTaps::resize(w, out_w))
}

pub fn resize_bilinear_backward(grad: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (_, oh, ow) = chw(grad)?;
    adjoint(grad, &AxisTaps::resize(h, oh), &AxisTaps::resize(w, ow), h, w)
}
