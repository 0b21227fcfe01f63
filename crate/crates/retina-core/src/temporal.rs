//! Per-pixel first-order recursive temporal filters.
//!
//! The low-pass is the exact pole mapping of a leaky integrator:
//! `y[n] = b*x[n] + a*y[n-1]` with `a = exp(-dt/tau)` and `b = 1 - a`, so DC
//! gain is one. The partial high-pass subtracts a weighted low-pass from the
//! identity: `y[n] = x[n] - w*lowpass(x)[n]`; `w = 1` gives a fully
//! transient (phasic) response, `w < 1` a sustained (tonic) one.

use crate::arith::Sample;
use crate::fixedpoint::FxpCtx;
use crate::frame::Frame;

/// First-order exponential low-pass with per-pixel state. The fixed-point
/// reduction carries its quantization residue per pixel (first-order error
/// feedback), so the bank settles on its exact DC fixed point.
#[derive(Debug, Clone)]
pub struct LowPassBank<T> {
    coeff_a: T,
    coeff_b: T,
    state: Frame<T>,
    rem: Vec<i64>,
}

/// Pole/gain pair for a time constant, reference arithmetic. `tau <= 0`
/// degenerates to a passthrough (a = 0), which is what a time constant
/// quantized to zero means downstream.
pub fn lowpass_coeffs(tau_s: f64, dt_s: f64) -> (f64, f64) {
    assert!(dt_s > 0.0, "sampling interval must be positive");
    if tau_s <= 0.0 {
        return (0.0, 1.0);
    }
    let a = (-dt_s / tau_s).exp();
    (a, 1.0 - a)
}

impl LowPassBank<f64> {
    pub fn new(tau_s: f64, dt_s: f64, width: usize, height: usize) -> Self {
        let (a, b) = lowpass_coeffs(tau_s, dt_s);
        LowPassBank {
            coeff_a: a,
            coeff_b: b,
            state: Frame::new(width, height),
            rem: vec![0; width * height],
        }
    }
}

impl LowPassBank<i64> {
    /// Coefficients are stored datapath constants: the pole is computed from
    /// the (already quantized) time constant, then quantized itself; the
    /// gain is its exact one's complement so the pair sums to one.
    pub fn new_fixed(ctx: &FxpCtx, tau_s: f64, dt_s: f64, width: usize, height: usize) -> Self {
        let (a, _) = lowpass_coeffs(tau_s, dt_s);
        let a_raw = ctx.quantize_raw(a);
        let b_raw = ctx.one_raw() - a_raw;
        LowPassBank {
            coeff_a: a_raw,
            coeff_b: b_raw,
            state: Frame::new(width, height),
            rem: vec![0; width * height],
        }
    }
}

impl<T: Sample> LowPassBank<T> {
    pub fn coeff_a(&self) -> T {
        self.coeff_a
    }

    pub fn coeff_b(&self) -> T {
        self.coeff_b
    }

    pub fn reset(&mut self) {
        self.state.fill(T::zero());
        self.rem.fill(0);
    }

    /// Preload the state, e.g. to start at a DC fixed point.
    pub fn preload(&mut self, value: T) {
        self.state.fill(value);
        self.rem.fill(0);
    }

    pub fn step_into(&mut self, ctx: &T::Ctx, input: &Frame<T>, out: &mut Frame<T>) {
        assert!(input.same_geometry(&self.state), "low-pass geometry mismatch");
        assert!(input.same_geometry(out), "low-pass output geometry mismatch");
        let st = self.state.as_mut_slice();
        let xs = input.as_slice();
        let ys = out.as_mut_slice();
        for i in 0..xs.len() {
            let acc = T::mac(T::mac(T::acc_zero(), xs[i], self.coeff_b), st[i], self.coeff_a);
            let y = T::acc_finish_fb(ctx, acc, &mut self.rem[i]);
            st[i] = y;
            ys[i] = y;
        }
    }

    pub fn step(&mut self, ctx: &T::Ctx, input: &Frame<T>) -> Frame<T> {
        let mut out = Frame::new(input.width(), input.height());
        self.step_into(ctx, input, &mut out);
        out
    }
}

/// Partial high-pass: identity minus `w` times an inner low-pass.
#[derive(Debug, Clone)]
pub struct HighPassBank<T> {
    weight: T,
    inner: LowPassBank<T>,
}

impl HighPassBank<f64> {
    pub fn new(weight: f64, tau_s: f64, dt_s: f64, width: usize, height: usize) -> Self {
        HighPassBank {
            weight,
            inner: LowPassBank::new(tau_s, dt_s, width, height),
        }
    }
}

impl HighPassBank<i64> {
    pub fn new_fixed(
        ctx: &FxpCtx,
        weight: f64,
        tau_s: f64,
        dt_s: f64,
        width: usize,
        height: usize,
    ) -> Self {
        HighPassBank {
            weight: ctx.quantize_raw(weight),
            inner: LowPassBank::new_fixed(ctx, tau_s, dt_s, width, height),
        }
    }
}

impl<T: Sample> HighPassBank<T> {
    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn reset(&mut self) {
        self.inner.reset();
    }

    pub fn step_into(&mut self, ctx: &T::Ctx, input: &Frame<T>, out: &mut Frame<T>) {
        assert!(
            input.same_geometry(&self.inner.state),
            "high-pass geometry mismatch"
        );
        assert!(input.same_geometry(out), "high-pass output geometry mismatch");
        let st = self.inner.state.as_mut_slice();
        let rem = &mut self.inner.rem;
        let xs = input.as_slice();
        let ys = out.as_mut_slice();
        let (a, b, w) = (self.inner.coeff_a, self.inner.coeff_b, self.weight);
        for i in 0..xs.len() {
            let acc = T::mac(T::mac(T::acc_zero(), xs[i], b), st[i], a);
            let low = T::acc_finish_fb(ctx, acc, &mut rem[i]);
            st[i] = low;
            ys[i] = T::sub(ctx, xs[i], T::mul(ctx, w, low));
        }
    }

    pub fn step(&mut self, ctx: &T::Ctx, input: &Frame<T>) -> Frame<T> {
        let mut out = Frame::new(input.width(), input.height());
        self.step_into(ctx, input, &mut out);
        out
    }
}
