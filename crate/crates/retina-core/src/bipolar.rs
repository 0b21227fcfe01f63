//! Bipolar-level contrast gain control: shunting-conductance integration of
//! the outer-layer current with spatio-temporally smoothed quadratic
//! feedback.
//!
//! Per pixel and frame, in order:
//!
//! ```text
//! g      = g0 + prev_feedback
//! att    = exp(-steps * g)
//! target = inputamp * i_opl / g
//! v_bip  = (prev_v - target) * att + target        (exponential Euler)
//! fb_raw = lowpass_tau_a(lambda_a * prev_v^2)
//! feedback = conv5x5(fb_raw)
//! ```
//!
//! The feedback square uses the previous frame's membrane value (one-frame
//! delay), and the spatial smoothing runs after the temporal filter. The
//! fixed-point path computes the division as a reciprocal-table multiply
//! and the exponential from the shared knot table; the reference model uses
//! exact division and `exp`.

use crate::arith::Sample;
use crate::error::RetinaError;
use crate::fixedpoint::{FxpCtx, RecipTable};
use crate::frame::Frame;
use crate::spatial::{ConvEngine, Kernel};
use crate::temporal::LowPassBank;

#[derive(Debug, Clone, Copy)]
pub struct BipolarParams {
    pub sigma_a: f64,
    pub tau_a: f64,
    /// Conductance floor; keeps the division well defined.
    pub g0_a: f64,
    /// Feedback strength; zero reduces the stage to a fixed leak.
    pub lambda_a: f64,
    /// Input gain applied before the shunting division.
    pub inputamp: f64,
    /// Integration interval in seconds (one frame).
    pub dt: f64,
}

impl BipolarParams {
    pub fn validate(&self) -> Result<(), RetinaError> {
        if self.g0_a <= 0.0 {
            return Err(RetinaError::InvalidParameter(format!(
                "g0_a must be positive, got {}",
                self.g0_a
            )));
        }
        if self.lambda_a < 0.0 {
            return Err(RetinaError::InvalidParameter(format!(
                "lambda_a must be non-negative, got {}",
                self.lambda_a
            )));
        }
        if self.dt <= 0.0 {
            return Err(RetinaError::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Reference (double precision) bipolar stage.
#[derive(Debug, Clone)]
pub struct ReferenceBipolar {
    params: BipolarParams,
    kernel: Kernel<f64>,
    conv: ConvEngine<f64>,
    lp_feedback: LowPassBank<f64>,
    prev_v: Frame<f64>,
    prev_feedback: Frame<f64>,
    scratch: Frame<f64>,
    filtered: Frame<f64>,
    smoothed: Frame<f64>,
}

impl ReferenceBipolar {
    pub fn new(
        params: &BipolarParams,
        pixels_per_degree: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, RetinaError> {
        params.validate()?;
        Ok(ReferenceBipolar {
            params: *params,
            kernel: Kernel::gaussian(params.sigma_a, pixels_per_degree, 5)?,
            conv: ConvEngine::direct(),
            lp_feedback: LowPassBank::new(params.tau_a, params.dt, width, height),
            prev_v: Frame::new(width, height),
            prev_feedback: Frame::new(width, height),
            scratch: Frame::new(width, height),
            filtered: Frame::new(width, height),
            smoothed: Frame::new(width, height),
        })
    }

    pub fn reset(&mut self) {
        self.lp_feedback.reset();
        self.prev_v.fill(0.0);
        self.prev_feedback.fill(0.0);
    }

    pub fn step_into(&mut self, i_opl: &Frame<f64>, v_bip: &mut Frame<f64>) {
        assert!(i_opl.same_geometry(&self.prev_v), "bipolar geometry mismatch");
        let p = &self.params;
        let xs = i_opl.as_slice();
        let vs = v_bip.as_mut_slice();
        let pv = self.prev_v.as_slice();
        let fb = self.prev_feedback.as_slice();
        let sq = self.scratch.as_mut_slice();
        for i in 0..xs.len() {
            let g = p.g0_a + fb[i];
            let att = (-p.dt * g).exp();
            let target = p.inputamp * xs[i] / g;
            vs[i] = (pv[i] - target) * att + target;
            // feedback uses the previous membrane value
            sq[i] = p.lambda_a * pv[i] * pv[i];
        }
        self.lp_feedback
            .step_into(&(), &self.scratch, &mut self.filtered);
        self.conv
            .apply(&(), &self.filtered, &self.kernel, &mut self.smoothed);
        self.prev_feedback
            .as_mut_slice()
            .copy_from_slice(self.smoothed.as_slice());
        self.prev_v.as_mut_slice().copy_from_slice(vs);
    }

    pub fn step(&mut self, i_opl: &Frame<f64>) -> Frame<f64> {
        let mut out = Frame::new(i_opl.width(), i_opl.height());
        self.step_into(i_opl, &mut out);
        out
    }
}

/// Fixed-point bipolar stage.
#[derive(Debug)]
pub struct FixedBipolar {
    g0: i64,
    lambda_a: i64,
    inputamp: i64,
    steps: i64,
    kernel: Kernel<i64>,
    conv: ConvEngine<i64>,
    lp_feedback: LowPassBank<i64>,
    recip: RecipTable,
    prev_v: Frame<i64>,
    membrane_rem: Vec<i64>,
    prev_feedback: Frame<i64>,
    scratch: Frame<i64>,
    filtered: Frame<i64>,
    smoothed: Frame<i64>,
}

impl FixedBipolar {
    /// `params` should already carry quantized values.
    pub fn new(
        ctx: &FxpCtx,
        params: &BipolarParams,
        pixels_per_degree: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, RetinaError> {
        params.validate()?;
        Ok(FixedBipolar {
            g0: ctx.quantize_raw(params.g0_a),
            lambda_a: ctx.quantize_raw(params.lambda_a),
            inputamp: ctx.quantize_raw(params.inputamp),
            steps: ctx.quantize_raw(params.dt),
            kernel: Kernel::gaussian(params.sigma_a, pixels_per_degree, 5)?.quantize(ctx)?,
            conv: ConvEngine::stream(5, width, height)?,
            lp_feedback: LowPassBank::new_fixed(ctx, params.tau_a, params.dt, width, height),
            recip: RecipTable::new(ctx.format(), params.g0_a)?,
            prev_v: Frame::new(width, height),
            membrane_rem: vec![0; width * height],
            prev_feedback: Frame::new(width, height),
            scratch: Frame::new(width, height),
            filtered: Frame::new(width, height),
            smoothed: Frame::new(width, height),
        })
    }

    pub fn reset(&mut self) {
        self.lp_feedback.reset();
        self.prev_v.fill(0);
        self.membrane_rem.fill(0);
        self.prev_feedback.fill(0);
    }

    pub fn step_into(&mut self, ctx: &FxpCtx, i_opl: &Frame<i64>, v_bip: &mut Frame<i64>) {
        assert!(i_opl.same_geometry(&self.prev_v), "bipolar geometry mismatch");
        let xs = i_opl.as_slice();
        let vs = v_bip.as_mut_slice();
        let pv = self.prev_v.as_slice();
        let fb = self.prev_feedback.as_slice();
        let sq = self.scratch.as_mut_slice();
        for i in 0..xs.len() {
            // the feedback frame is non-negative by construction, so
            // g >= g0 > 0 and steps * g >= 0
            let g = ctx.add_raw(self.g0, fb[i]);
            let att = ctx.exp_neg_raw(ctx.mul_raw(self.steps, g));
            let target = self.recip.div_by(ctx, ctx.mul_raw(self.inputamp, xs[i]), g);
            // (prev - target) * att + target in one reduction, with the
            // residue fed back so the membrane settles exactly on target
            let acc = <i64 as Sample>::mac(
                <i64 as Sample>::acc_shift_in(ctx, target),
                ctx.sub_raw(pv[i], target),
                att,
            );
            vs[i] = <i64 as Sample>::acc_finish_fb(ctx, acc, &mut self.membrane_rem[i]);
            sq[i] = ctx.mul_raw(self.lambda_a, ctx.mul_raw(pv[i], pv[i]));
        }
        self.lp_feedback
            .step_into(ctx, &self.scratch, &mut self.filtered);
        self.conv
            .apply(ctx, &self.filtered, &self.kernel, &mut self.smoothed);
        self.prev_feedback
            .as_mut_slice()
            .copy_from_slice(self.smoothed.as_slice());
        self.prev_v.as_mut_slice().copy_from_slice(vs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda_a: f64, inputamp: f64) -> BipolarParams {
        BipolarParams {
            sigma_a: 0.05,
            tau_a: 0.005,
            g0_a: 50.0,
            lambda_a,
            inputamp,
            dt: 0.005,
        }
    }

    #[test]
    fn zero_input_decays_geometrically() {
        let p = params(0.0, 1.0);
        let mut stage = ReferenceBipolar::new(&p, 20.0, 6, 6).unwrap();
        // drive to a nonzero state first
        let drive = Frame::filled(6, 6, 0.4);
        for _ in 0..50 {
            stage.step(&drive);
        }
        let zero = Frame::filled(6, 6, 0.0);
        let att = (-p.dt * p.g0_a).exp();
        let mut prev = stage.step(&zero).get(3, 3);
        for _ in 0..20 {
            let v = stage.step(&zero).get(3, 3);
            assert!((v - prev * att).abs() < 1e-12);
            prev = v;
        }
    }

    #[test]
    fn steady_state_is_input_over_leak() {
        let p = params(0.0, 1.0);
        let mut stage = ReferenceBipolar::new(&p, 20.0, 6, 6).unwrap();
        let k = 0.3;
        let drive = Frame::filled(6, 6, k);
        let mut v = 0.0;
        for _ in 0..2000 {
            v = stage.step(&drive).get(3, 3);
        }
        assert!((v - p.inputamp * k / p.g0_a).abs() < 1e-12, "settled at {v}");
    }

    #[test]
    fn linear_when_feedback_disabled() {
        let p = params(0.0, 50.0);
        let mut a = ReferenceBipolar::new(&p, 20.0, 6, 6).unwrap();
        let mut b = ReferenceBipolar::new(&p, 20.0, 6, 6).unwrap();
        let mut ab = ReferenceBipolar::new(&p, 20.0, 6, 6).unwrap();
        let mut seed = 9u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed % 2001) as f64 / 1000.0 - 1.0
        };
        for _ in 0..60 {
            let (xa, xb) = (next() * 0.02, next() * 0.02);
            let va = a.step(&Frame::filled(6, 6, xa)).get(2, 2);
            let vb = b.step(&Frame::filled(6, 6, xb)).get(2, 2);
            let vab = ab.step(&Frame::filled(6, 6, xa + xb)).get(2, 2);
            assert!((vab - (va + vb)).abs() < 1e-9, "superposition violated");
        }
    }

    #[test]
    fn exponential_euler_matches_analytic_and_refined_explicit_euler() {
        // One step with frozen coefficients. The scheme equals the analytic
        // solution by construction; explicit Euler converges to both at
        // rate x^2/(2n) per step, so the substep count sets the tolerance.
        let (dt, g, i_in, v0, amp) = (0.005f64, 80.0f64, 0.6f64, -0.35f64, 1.0f64);
        let target = amp * i_in / g;
        let scheme = (v0 - target) * (-dt * g).exp() + target;
        let analytic = target + (v0 - target) * (-g * dt).exp();
        assert_eq!(scheme, analytic);

        let euler = |n: u64| {
            let h = dt / n as f64;
            let mut v: f64 = v0;
            for _ in 0..n {
                v += (amp * i_in - g * v) * h;
            }
            v
        };
        // x = g*dt = 0.4; |error| ~ e^-x * x^2/(2n) * |v0 - target|
        let coarse = euler(1000);
        let bound_1000 = (0.4f64).powi(2) / 2000.0 * (v0 - target).abs() * 1.1;
        assert!((coarse - scheme).abs() <= bound_1000, "explicit Euler at 1000 substeps off by {}", (coarse - scheme).abs());
        let fine = euler(200_000);
        assert!((fine - scheme).abs() <= 1e-6, "refined explicit Euler off by {}", (fine - scheme).abs());
    }

    #[test]
    fn shunting_feedback_reduces_gain_monotonically() {
        // larger standing feedback -> smaller settled |v| for the same input
        let p = params(0.0, 1.0);
        let mut seed = 1234u64;
        for _ in 0..20 {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            let fb_small = (seed % 100) as f64 / 10.0;
            let fb_large = fb_small + 5.0 + (seed % 7) as f64;
            let settle = |fb: f64| {
                let g = p.g0_a + fb;
                p.inputamp * 0.4 / g
            };
            assert!(settle(fb_large).abs() < settle(fb_small).abs());
        }
    }

    #[test]
    fn gain_drops_for_high_amplitude_input() {
        // feedback enabled: steady-state v/i gain must shrink as the input grows
        let p = params(10.0, 50.0);
        let gain_at = |amp: f64| {
            let mut stage = ReferenceBipolar::new(&p, 20.0, 8, 8).unwrap();
            let drive = Frame::filled(8, 8, amp);
            let mut v = 0.0;
            for _ in 0..3000 {
                v = stage.step(&drive).get(4, 4);
            }
            v / amp
        };
        let low = gain_at(0.05);
        let high = gain_at(0.8);
        assert!(
            high < low,
            "contrast gain control signature missing: {high} !< {low}"
        );
    }

    #[test]
    fn fixed_tracks_reference_with_quantized_params() {
        let p = params(0.0, 50.0);
        let ctx = FxpCtx::new(crate::fixedpoint::FixedPointFormat::default());
        let mut fixed = FixedBipolar::new(&ctx, &p, 20.0, 6, 6).unwrap();
        let mut reference = ReferenceBipolar::new(&p, 20.0, 6, 6).unwrap();
        let mut worst = 0.0f64;
        for k in 0..200 {
            let x = 0.3 * ((k as f64) / 20.0).sin();
            let xq = ctx.quantize_raw(x);
            let input_f = Frame::filled(6, 6, ctx.to_real(xq));
            let input_q = Frame::filled(6, 6, xq);
            let vr = reference.step(&input_f).get(3, 3);
            let mut vq = Frame::new(6, 6);
            fixed.step_into(&ctx, &input_q, &mut vq);
            worst = worst.max((ctx.to_real(vq.get(3, 3)) - vr).abs());
        }
        assert!(worst < 0.01, "fixed/reference divergence {worst}");
    }

    #[test]
    fn attenuation_stays_in_unit_interval() {
        let p = params(10.0, 50.0);
        let ctx = FxpCtx::new(crate::fixedpoint::FixedPointFormat::default());
        let mut fixed = FixedBipolar::new(&ctx, &p, 20.0, 6, 6).unwrap();
        let mut vq = Frame::new(6, 6);
        for k in 0..100 {
            let x = ctx.quantize_raw(if k % 3 == 0 { 0.9 } else { -0.6 });
            fixed.step_into(&ctx, &Frame::filled(6, 6, x), &mut vq);
        }
        // attenuation in (0, 1] is implied by bounded state: |v| can never
        // exceed max(|target|, |prev_v|)
        for &v in vq.as_slice() {
            assert!(ctx.to_real(v).abs() <= 1.0);
        }
    }
}
