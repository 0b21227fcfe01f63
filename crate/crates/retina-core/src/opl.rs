//! Outer retinal layer: center path (3x3 gaussian -> temporal low-pass ->
//! partial high-pass), surround path (5x5 gaussian -> temporal low-pass),
//! and the weighted difference `i_opl = lambda * (c - omega * s)`.
//!
//! Stage order is fixed: spatial, temporal low-pass, high-pass on the
//! center; then spatial, temporal low-pass on the surround. The center and
//! surround taps are exposed alongside the difference so each can be dumped
//! and compared independently.

use crate::arith::Sample;
use crate::error::RetinaError;
use crate::fixedpoint::FxpCtx;
use crate::frame::Frame;
use crate::spatial::{ConvEngine, Kernel};
use crate::temporal::{HighPassBank, LowPassBank};

/// Outer-layer parameters. Spatial constants are in degrees of visual
/// field, time constants in seconds.
#[derive(Debug, Clone, Copy)]
pub struct OplParams {
    pub sigma_c: f64,
    pub tau_c: f64,
    pub tau_u: f64,
    /// Center high-pass weight; 1 = phasic, < 1 = tonic.
    pub w_c: f64,
    pub sigma_s: f64,
    pub tau_s: f64,
    pub lambda_opl: f64,
    pub omega_opl: f64,
}

/// One outer-layer stage instance: line buffers (or direct convolution),
/// the two low-pass banks and the center high-pass.
#[derive(Debug, Clone)]
pub struct OplStage<T: Sample> {
    kernel_center: Kernel<T>,
    conv_center: ConvEngine<T>,
    lp_center: LowPassBank<T>,
    hp_center: HighPassBank<T>,
    kernel_surround: Kernel<T>,
    conv_surround: ConvEngine<T>,
    lp_surround: LowPassBank<T>,
    lambda: T,
    omega: T,
    scratch: Frame<T>,
}

impl OplStage<f64> {
    pub fn new_reference(
        params: &OplParams,
        pixels_per_degree: f64,
        dt_s: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, RetinaError> {
        Ok(OplStage {
            kernel_center: Kernel::gaussian(params.sigma_c, pixels_per_degree, 3)?,
            conv_center: ConvEngine::direct(),
            lp_center: LowPassBank::new(params.tau_c, dt_s, width, height),
            hp_center: HighPassBank::new(params.w_c, params.tau_u, dt_s, width, height),
            kernel_surround: Kernel::gaussian(params.sigma_s, pixels_per_degree, 5)?,
            conv_surround: ConvEngine::direct(),
            lp_surround: LowPassBank::new(params.tau_s, dt_s, width, height),
            lambda: params.lambda_opl,
            omega: params.omega_opl,
            scratch: Frame::new(width, height),
        })
    }
}

impl OplStage<i64> {
    /// Fixed-point stage; `params` should already carry quantized values.
    pub fn new_fixed(
        ctx: &FxpCtx,
        params: &OplParams,
        pixels_per_degree: f64,
        dt_s: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, RetinaError> {
        Ok(OplStage {
            kernel_center: Kernel::gaussian(params.sigma_c, pixels_per_degree, 3)?.quantize(ctx)?,
            conv_center: ConvEngine::stream(3, width, height)?,
            lp_center: LowPassBank::new_fixed(ctx, params.tau_c, dt_s, width, height),
            hp_center: HighPassBank::new_fixed(ctx, params.w_c, params.tau_u, dt_s, width, height),
            kernel_surround: Kernel::gaussian(params.sigma_s, pixels_per_degree, 5)?
                .quantize(ctx)?,
            conv_surround: ConvEngine::stream(5, width, height)?,
            lp_surround: LowPassBank::new_fixed(ctx, params.tau_s, dt_s, width, height),
            lambda: ctx.quantize_raw(params.lambda_opl),
            omega: ctx.quantize_raw(params.omega_opl),
            scratch: Frame::new(width, height),
        })
    }
}

impl<T: Sample> OplStage<T> {
    pub fn reset(&mut self) {
        self.lp_center.reset();
        self.hp_center.reset();
        self.lp_surround.reset();
    }

    /// Run one frame: writes the center, surround and difference frames.
    pub fn step_into(
        &mut self,
        ctx: &T::Ctx,
        luminance: &Frame<T>,
        center: &mut Frame<T>,
        surround: &mut Frame<T>,
        i_opl: &mut Frame<T>,
    ) {
        self.conv_center
            .apply(ctx, luminance, &self.kernel_center, i_opl);
        self.lp_center.step_into(ctx, i_opl, &mut self.scratch);
        self.hp_center.step_into(ctx, &self.scratch, center);
        self.conv_surround
            .apply(ctx, center, &self.kernel_surround, &mut self.scratch);
        self.lp_surround.step_into(ctx, &self.scratch, surround);
        let cs = center.as_slice();
        let ss = surround.as_slice();
        let os = i_opl.as_mut_slice();
        for i in 0..cs.len() {
            os[i] = T::mul(ctx, self.lambda, T::sub(ctx, cs[i], T::mul(ctx, self.omega, ss[i])));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> OplParams {
        OplParams {
            sigma_c: 0.05,
            tau_c: 0.01,
            tau_u: 0.01,
            w_c: 1.0,
            sigma_s: 0.15,
            tau_s: 0.01,
            lambda_opl: 1.0,
            omega_opl: 0.5,
        }
    }

    fn run_uniform(stage: &mut OplStage<f64>, v: f64, frames: usize, w: usize, h: usize) -> (f64, f64, f64) {
        let input = Frame::filled(w, h, v);
        let mut c = Frame::new(w, h);
        let mut s = Frame::new(w, h);
        let mut o = Frame::new(w, h);
        for _ in 0..frames {
            stage.step_into(&(), &input, &mut c, &mut s, &mut o);
        }
        let (px, py) = (w / 2, h / 2);
        (c.get(px, py), s.get(px, py), o.get(px, py))
    }

    #[test]
    fn zero_input_zero_output() {
        let mut stage = OplStage::new_reference(&params(), 20.0, 0.005, 8, 8).unwrap();
        let (c, s, o) = run_uniform(&mut stage, 0.0, 5, 8, 8);
        assert_eq!((c, s, o), (0.0, 0.0, 0.0));
    }

    #[test]
    fn phasic_center_rejects_dc() {
        let mut stage = OplStage::new_reference(&params(), 20.0, 0.005, 16, 16).unwrap();
        // 10x the largest time constant at dt = 5 ms is 20 frames; settle longer
        let (c, _, o) = run_uniform(&mut stage, 0.8, 400, 16, 16);
        assert!(c.abs() < 1e-9, "center settled at {c}");
        assert!(o.abs() < 1e-9, "difference settled at {o}");
    }

    #[test]
    fn tonic_dc_gain_composition() {
        let mut p = params();
        p.w_c = 0.0;
        let mut stage = OplStage::new_reference(&p, 20.0, 0.005, 16, 16).unwrap();
        let v = 0.8;
        let (c, s, o) = run_uniform(&mut stage, v, 800, 16, 16);
        assert!((c - v).abs() < 1e-6, "center {c}");
        assert!((s - v).abs() < 1e-6, "surround {s}");
        assert!((o - 0.5 * v).abs() < 1e-6, "difference {o}");
    }

    #[test]
    fn partial_weight_steady_state() {
        let mut p = params();
        p.w_c = 0.5;
        let mut stage = OplStage::new_reference(&p, 20.0, 0.005, 16, 16).unwrap();
        let v = 0.6;
        let (c, _, o) = run_uniform(&mut stage, v, 800, 16, 16);
        assert!((c - 0.5 * v).abs() < 1e-6);
        let want = 1.0 * (1.0 - 0.5) * 0.5 * v;
        assert!((o - want).abs() < 1e-6, "difference {o} vs {want}");
    }

    #[test]
    fn uniform_flicker_produces_oscillation() {
        let mut stage = OplStage::new_reference(&params(), 20.0, 0.005, 8, 8).unwrap();
        let mut c = Frame::new(8, 8);
        let mut s = Frame::new(8, 8);
        let mut o = Frame::new(8, 8);
        let mut min = f64::MAX;
        let mut max = f64::MIN;
        for k in 0..800 {
            let t = k as f64 / 200.0;
            let v = 0.5 + 0.25 * (2.0 * std::f64::consts::PI * 2.0 * t).sin();
            let input = Frame::filled(8, 8, v);
            stage.step_into(&(), &input, &mut c, &mut s, &mut o);
            if k >= 400 {
                min = min.min(o.get(4, 4));
                max = max.max(o.get(4, 4));
            }
        }
        assert!(max - min > 1e-3, "flicker amplitude {}", max - min);
    }

    #[test]
    fn impulse_center_is_biphasic() {
        let mut stage = OplStage::new_reference(&params(), 20.0, 0.005, 8, 8).unwrap();
        let mut c = Frame::new(8, 8);
        let mut s = Frame::new(8, 8);
        let mut o = Frame::new(8, 8);
        let mut trace = Vec::new();
        for k in 0..200 {
            let v = if k == 2 { 1.0 } else { 0.0 };
            let input = Frame::filled(8, 8, v);
            stage.step_into(&(), &input, &mut c, &mut s, &mut o);
            trace.push(c.get(4, 4));
        }
        let peak = trace
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        assert!(trace[peak] > 0.0);
        let mut crossings = 0;
        let mut sign = 1i32;
        for &v in &trace[peak..] {
            let s = if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            };
            if s != 0 && s != sign {
                crossings += 1;
                sign = s;
            }
        }
        assert_eq!(crossings, 1, "trace should cross zero exactly once");
    }
}
