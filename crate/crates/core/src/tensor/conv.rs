use serde::{Deserialize, Serialize};

use super::{chw, gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    /// Zero padding so that `out = ceil(in / stride)`; an odd total puts the
    /// extra row/column on the bottom/right.
    Same,
}

/// Resolved geometry of a 2-D cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub s_h: usize,
    pub s_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn same_pad(len: usize, k: usize, s: usize) -> (usize, usize) {
    let out = len.div_ceil(s);
    let total = ((out - 1) * s + k).saturating_sub(len);
    (total / 2, total - total / 2)
}

impl ConvGeometry {
    pub fn new(
        (c_in, h, w): (usize, usize, usize),
        (k_h, k_w): (usize, usize),
        (s_h, s_w): (usize, usize),
        padding: Padding,
    ) -> Result<Self> {
        if k_h == 0 || k_w == 0 {
            return Err(Error::dim("kernel size must be positive"));
        }
        if s_h == 0 || s_w == 0 {
            return Err(Error::dim("stride must be positive"));
        }
        let ((pt, pb), (pl, pr)) = match padding {
            Padding::Valid => ((0, 0), (0, 0)),
            Padding::Same => (same_pad(h, k_h, s_h), same_pad(w, k_w, s_w)),
        };
        let (ph, pw) = (h + pt + pb, w + pl + pr);
        if k_h > ph || k_w > pw {
            return Err(Error::dim(format!(
                "kernel {k_h}×{k_w} larger than padded input {ph}×{pw}"
            )));
        }
        Ok(Self {
            c_in,
            h,
            w,
            k_h,
            k_w,
            s_h,
            s_w,
            pad_top: pt,
            pad_left: pl,
            out_h: (ph - k_h) / s_h + 1,
            out_w: (pw - k_w) / s_w + 1,
        })
    }

    /// Rows of the im2col matrix (`C_in·K_h·K_w`).
    pub fn patch_len(&self) -> usize {
        self.c_in * self.k_h * self.k_w
    }

    /// Columns of the im2col matrix (`H'·W'`).
    pub fn out_len(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn in_len(&self) -> usize {
        self.c_in * self.h * self.w
    }
}

/// Unfold one `C×H×W` sample into a `(C·K_h·K_w) × (H'·W')` matrix;
/// out-of-image taps read as zero.
pub fn im2col(g: &ConvGeometry, input: &[f64], cols: &mut [f64]) {
    let ol = g.out_len();
    debug_assert_eq!(input.len(), g.in_len());
    debug_assert_eq!(cols.len(), g.patch_len() * ol);
    for c in 0..g.c_in {
        let plane = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k_h {
            for kx in 0..g.k_w {
                let row = (c * g.k_h + ky) * g.k_w + kx;
                let dst = &mut cols[row * ol..(row + 1) * ol];
                for oy in 0..g.out_h {
                    let iy = (oy * g.s_h + ky) as isize - g.pad_top as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in line.iter_mut().enumerate() {
                        let ix = (ox * g.s_w + kx) as isize - g.pad_left as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into an image buffer.
pub fn col2im(g: &ConvGeometry, cols: &[f64], out: &mut [f64]) {
    let ol = g.out_len();
    debug_assert_eq!(out.len(), g.in_len());
    for c in 0..g.c_in {
        for ky in 0..g.k_h {
            for kx in 0..g.k_w {
                let row = (c * g.k_h + ky) * g.k_w + kx;
                let src = &cols[row * ol..(row + 1) * ol];
                for oy in 0..g.out_h {
                    let iy = (oy * g.s_h + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let base = (c * g.h + iy as usize) * g.w;
                    for ox in 0..g.out_w {
                        let ix = (ox * g.s_w + kx) as isize - g.pad_left as isize;
                        if ix >= 0 && ix < g.w as isize {
                            out[base + ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation (no kernel flip) of a `C_in×H×W` input with
/// `C_out×C_in×K_h×K_w` kernels.
pub fn conv2d(
    input: &Tensor,
    kernels: &Tensor,
    stride: (usize, usize),
    padding: Padding,
) -> Result<Tensor> {
    let (c, h, w) = chw(input)?;
    let [c_out, kc, kh, kw] = *kernels.shape() else {
        return Err(Error::dim(format!(
            "kernels must be C_out×C_in×K_h×K_w, got {:?}",
            kernels.shape()
        )));
    };
    if kc != c {
        return Err(Error::dim(format!(
            "input has {c} channels but kernels expect {kc}"
        )));
    }
    let g = ConvGeometry::new((c, h, w), (kh, kw), stride, padding)?;
    let mut cols = vec![0.0; g.patch_len() * g.out_len()];
    im2col(&g, input.data(), &mut cols);
    let mut out = vec![0.0; c_out * g.out_len()];
    gemm(
        c_out,
        g.patch_len(),
        g.out_len(),
        kernels.data(),
        false,
        &cols,
        false,
        &mut out,
        0.0,
    );
    Tensor::new(vec![c_out, g.out_h, g.out_w], out)
}
