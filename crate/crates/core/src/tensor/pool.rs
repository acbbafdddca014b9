use super::{chw, Tensor};
use crate::error::{Error, Result};

/// Max-pool window placement. Trailing rows/columns that do not fill a whole
/// window are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeometry {
    pub h: usize,
    pub w: usize,
    pub win_h: usize,
    pub win_w: usize,
    pub s_h: usize,
    pub s_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl PoolGeometry {
    pub fn new(
        (h, w): (usize, usize),
        (win_h, win_w): (usize, usize),
        (s_h, s_w): (usize, usize),
    ) -> Result<Self> {
        if win_h == 0 || win_w == 0 {
            return Err(Error::dim("pool window must be positive"));
        }
        if s_h == 0 || s_w == 0 {
            return Err(Error::dim("pool stride must be positive"));
        }
        if win_h > h || win_w > w {
            return Err(Error::dim(format!(
                "pool window {win_h}×{win_w} larger than input {h}×{w}"
            )));
        }
        Ok(Self {
            h,
            w,
            win_h,
            win_w,
            s_h,
            s_w,
            out_h: (h - win_h) / s_h + 1,
            out_w: (w - win_w) / s_w + 1,
        })
    }

    /// Pool one `H×W` plane, writing maxima and their in-plane flat indices.
    /// Ties resolve to the first position in raster order.
    pub fn pool_plane(&self, plane: &[f64], out: &mut [f64], arg: &mut [usize]) {
        for oy in 0..self.out_h {
            for ox in 0..self.out_w {
                let (y0, x0) = (oy * self.s_h, ox * self.s_w);
                let mut best = y0 * self.w + x0;
                for y in y0..y0 + self.win_h {
                    for x in x0..x0 + self.win_w {
                        let i = y * self.w + x;
                        if plane[i] > plane[best] {
                            best = i;
                        }
                    }
                }
                let o = oy * self.out_w + ox;
                out[o] = plane[best];
                arg[o] = best;
            }
        }
    }
}

/// Max pooling over a `C×H×W` tensor. The returned argmax map holds, for each
/// output cell, the flat index into the input's data.
pub fn maxpool2d(
    input: &Tensor,
    window: (usize, usize),
    stride: (usize, usize),
) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = chw(input)?;
    let g = PoolGeometry::new((h, w), window, stride)?;
    let ol = g.out_h * g.out_w;
    let mut out = vec![0.0; c * ol];
    let mut arg = vec![0usize; c * ol];
    for ch in 0..c {
        let plane = &input.data()[ch * h * w..(ch + 1) * h * w];
        g.pool_plane(
            plane,
            &mut out[ch * ol..(ch + 1) * ol],
            &mut arg[ch * ol..(ch + 1) * ol],
        );
        for a in &mut arg[ch * ol..(ch + 1) * ol] {
            *a += ch * h * w;
        }
    }
    Ok((Tensor::new(vec![c, g.out_h, g.out_w], out)?, arg))
}
