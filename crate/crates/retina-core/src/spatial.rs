//! Streaming 2-D convolution with Gaussian kernel construction.
//!
//! The streaming engine models the hardware register-bank/line-buffer
//! structure: pixels enter in raster order, `size - 1` row buffers plus a
//! `size x size` window register bank assemble the zero-padded neighborhood,
//! and one output leaves per input after the warm-up latency. Its contract
//! is bit-identical equivalence with direct zero-padded convolution in the
//! same arithmetic, for both f64 and fixed-point samples.

use crate::arith::Sample;
use crate::error::RetinaError;
use crate::fixedpoint::FxpCtx;
use crate::frame::Frame;

pub const MAX_KERNEL: usize = 5;

/// Square convolution kernel, size 3 or 5, weights stored row-major in a
/// fixed 5x5 bank.
#[derive(Debug, Clone, Copy)]
pub struct Kernel<T> {
    size: usize,
    weights: [[T; MAX_KERNEL]; MAX_KERNEL],
}

impl<T: Sample> Kernel<T> {
    pub fn from_weights(size: usize, rows: &[&[T]]) -> Result<Self, RetinaError> {
        if size != 3 && size != 5 {
            return Err(RetinaError::InvalidKernelSize(size));
        }
        let mut weights = [[T::zero(); MAX_KERNEL]; MAX_KERNEL];
        for (i, row) in rows.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                weights[i][j] = w;
            }
        }
        Ok(Kernel { size, weights })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights[i][j]
    }

    pub fn radius(&self) -> usize {
        (self.size - 1) / 2
    }
}

impl Kernel<f64> {
    /// Normalized Gaussian: weights proportional to
    /// exp(-((i-c)^2 + (j-c)^2) / (2 sigma_px^2)), unit sum.
    pub fn gaussian(sigma_deg: f64, pixels_per_degree: f64, size: usize) -> Result<Self, RetinaError> {
        if size != 3 && size != 5 {
            return Err(RetinaError::InvalidKernelSize(size));
        }
        if sigma_deg <= 0.0 || pixels_per_degree <= 0.0 {
            return Err(RetinaError::InvalidParameter(format!(
                "gaussian kernel needs sigma_deg > 0 and pixels_per_degree > 0, got {sigma_deg}, {pixels_per_degree}"
            )));
        }
        let sigma_px = sigma_deg * pixels_per_degree;
        let c = (size - 1) as f64 / 2.0;
        let mut weights = [[0.0; MAX_KERNEL]; MAX_KERNEL];
        let mut sum = 0.0;
        for i in 0..size {
            for j in 0..size {
                let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
                let w = (-d2 / (2.0 * sigma_px * sigma_px)).exp();
                weights[i][j] = w;
                sum += w;
            }
        }
        for row in weights.iter_mut().take(size) {
            for w in row.iter_mut().take(size) {
                *w /= sum;
            }
        }
        Ok(Kernel { size, weights })
    }

    /// Identity kernel (center 1, rest 0), the sigma -> 0 limit.
    pub fn delta(size: usize) -> Result<Self, RetinaError> {
        if size != 3 && size != 5 {
            return Err(RetinaError::InvalidKernelSize(size));
        }
        let mut weights = [[0.0; MAX_KERNEL]; MAX_KERNEL];
        weights[(size - 1) / 2][(size - 1) / 2] = 1.0;
        Ok(Kernel { size, weights })
    }

    pub fn sum(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.size {
            for j in 0..self.size {
                s += self.weights[i][j];
            }
        }
        s
    }

    /// Quantize weights into the datapath format. Stored kernel constants
    /// round to nearest; an all-zero result is reported as degenerate.
    pub fn quantize(&self, ctx: &FxpCtx) -> Result<Kernel<i64>, RetinaError> {
        let fmt = ctx.format();
        let mut weights = [[0i64; MAX_KERNEL]; MAX_KERNEL];
        let mut any = false;
        for i in 0..self.size {
            for j in 0..self.size {
                let raw = (self.weights[i][j] * fmt.scale()).round() as i64;
                let raw = raw.clamp(fmt.raw_min(), fmt.raw_max());
                weights[i][j] = raw;
                any |= raw != 0;
            }
        }
        if !any {
            return Err(RetinaError::DegenerateKernel {
                sigma_px: f64::NAN,
            });
        }
        Ok(Kernel {
            size: self.size,
            weights,
        })
    }
}

/// Direct zero-padded convolution; the independent oracle for the streaming
/// engine. Every tap participates, padded samples as explicit zeros, so the
/// operation order matches the register bank exactly.
pub fn conv2d_direct<T: Sample>(
    ctx: &T::Ctx,
    input: &Frame<T>,
    kernel: &Kernel<T>,
    out: &mut Frame<T>,
) {
    assert!(
        input.same_geometry(out),
        "conv2d_direct: output geometry mismatch"
    );
    let (w, h) = (input.width(), input.height());
    let k = kernel.size();
    let p = kernel.radius();
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::acc_zero();
            for ki in 0..k {
                for kj in 0..k {
                    let sy = y as isize + ki as isize - p as isize;
                    let sx = x as isize + kj as isize - p as isize;
                    let v = if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                        input.get(sx as usize, sy as usize)
                    } else {
                        T::zero()
                    };
                    acc = T::mac(acc, v, kernel.weight(ki, kj));
                }
            }
            out.set(x, y, T::acc_finish(ctx, acc));
        }
    }
}

/// Line-buffer state: `size - 1` row buffers, the window register bank and
/// the raster position. After warm-up the window holds exactly the
/// zero-padded neighborhood of the current output pixel.
#[derive(Debug, Clone)]
pub struct LineBufferState<T> {
    size: usize,
    width: usize,
    height: usize,
    rows: Vec<Vec<T>>,
    head: usize,
    window: [[T; MAX_KERNEL]; MAX_KERNEL],
    cur_row: usize,
    cur_col: usize,
    scratch: Vec<T>,
}

impl<T: Sample> LineBufferState<T> {
    pub fn new(size: usize, width: usize, height: usize) -> Result<Self, RetinaError> {
        if size != 3 && size != 5 {
            return Err(RetinaError::InvalidKernelSize(size));
        }
        if width < size || height < size {
            return Err(RetinaError::FrameTooSmall {
                width,
                height,
                kernel: size,
            });
        }
        Ok(LineBufferState {
            size,
            width,
            height,
            rows: vec![vec![T::zero(); width]; size - 1],
            head: 0,
            window: [[T::zero(); MAX_KERNEL]; MAX_KERNEL],
            cur_row: 0,
            cur_col: 0,
            scratch: vec![T::zero(); width],
        })
    }

    fn reset(&mut self) {
        for row in &mut self.rows {
            row.fill(T::zero());
        }
        self.head = 0;
        self.cur_row = 0;
        self.cur_col = 0;
    }

    /// Stream one frame through the register bank in raster order,
    /// flushing `radius` extra zero rows/columns at the boundaries.
    pub fn process_frame(
        &mut self,
        ctx: &T::Ctx,
        input: &Frame<T>,
        kernel: &Kernel<T>,
        out: &mut Frame<T>,
    ) {
        assert_eq!(kernel.size(), self.size, "kernel size mismatch");
        assert!(
            input.width() == self.width && input.height() == self.height,
            "line buffer geometry mismatch"
        );
        assert!(input.same_geometry(out), "output geometry mismatch");
        self.reset();
        let k = self.size;
        let p = (k - 1) / 2;
        let (w, h) = (self.width, self.height);
        for ri in 0..h + p {
            self.cur_row = ri;
            let in_row = if ri < h { Some(input.row(ri)) } else { None };
            self.window = [[T::zero(); MAX_KERNEL]; MAX_KERNEL];
            for ci in 0..w + p {
                self.cur_col = ci;
                // shift the register bank left
                for i in 0..k {
                    for j in 0..k - 1 {
                        self.window[i][j] = self.window[i][j + 1];
                    }
                }
                // new rightmost column: k-1 buffered rows plus the incoming pixel
                for i in 0..k - 1 {
                    self.window[i][k - 1] = if ci < w {
                        self.rows[(self.head + i) % (k - 1)][ci]
                    } else {
                        T::zero()
                    };
                }
                let v = match in_row {
                    Some(row) if ci < w => row[ci],
                    _ => T::zero(),
                };
                self.window[k - 1][k - 1] = v;
                if ci < w {
                    self.scratch[ci] = v;
                }
                if ri >= p && ci >= p {
                    let y = match k {
                        3 => dot_window::<T, 3>(ctx, &self.window, kernel),
                        _ => dot_window::<T, 5>(ctx, &self.window, kernel),
                    };
                    out.set(ci - p, ri - p, y);
                }
            }
            // the finished row replaces the oldest buffer
            std::mem::swap(&mut self.rows[self.head], &mut self.scratch);
            self.head = (self.head + 1) % (k - 1);
        }
    }
}

#[inline]
fn dot_window<T: Sample, const K: usize>(
    ctx: &T::Ctx,
    window: &[[T; MAX_KERNEL]; MAX_KERNEL],
    kernel: &Kernel<T>,
) -> T {
    let mut acc = T::acc_zero();
    for i in 0..K {
        for j in 0..K {
            acc = T::mac(acc, window[i][j], kernel.weights[i][j]);
        }
    }
    T::acc_finish(ctx, acc)
}

/// One-shot streaming convolution (allocates the line-buffer state).
pub fn conv2d_stream<T: Sample>(
    ctx: &T::Ctx,
    input: &Frame<T>,
    kernel: &Kernel<T>,
) -> Result<Frame<T>, RetinaError> {
    let mut state = LineBufferState::new(kernel.size(), input.width(), input.height())?;
    let mut out = Frame::new(input.width(), input.height());
    state.process_frame(ctx, input, kernel, &mut out);
    Ok(out)
}

/// Convolution strategy: the pipeline streams through line buffers, the
/// reference model evaluates directly.
#[derive(Debug, Clone)]
pub enum ConvEngine<T> {
    Direct,
    Stream(LineBufferState<T>),
}

impl<T: Sample> ConvEngine<T> {
    pub fn direct() -> Self {
        ConvEngine::Direct
    }

    pub fn stream(size: usize, width: usize, height: usize) -> Result<Self, RetinaError> {
        Ok(ConvEngine::Stream(LineBufferState::new(size, width, height)?))
    }

    pub fn apply(
        &mut self,
        ctx: &T::Ctx,
        input: &Frame<T>,
        kernel: &Kernel<T>,
        out: &mut Frame<T>,
    ) {
        match self {
            ConvEngine::Direct => conv2d_direct(ctx, input, kernel, out),
            ConvEngine::Stream(state) => state.process_frame(ctx, input, kernel, out),
        }
    }
}
