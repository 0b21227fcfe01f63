//! The fixed-point streaming pipeline: quantized luminance in, layer taps
//! and ON/OFF spike events out, one frame at a time.
//!
//! Every stage owns its own arithmetic context, so saturation events can be
//! attributed per stage. Both polarities run side by side on the shared
//! bipolar output; events are emitted in row-major order, ON block first.

use crate::bipolar::FixedBipolar;
use crate::error::RetinaError;
use crate::fixedpoint::{FixedPointFormat, FxpCtx};
use crate::frame::Frame;
use crate::ganglion::{FixedGanglion, SpikeEvent};
use crate::opl::OplStage;
use crate::params::RetinaParams;

/// Saturation counts attributed per stage, cumulative since construction
/// or the last reset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaturationCounts {
    pub luminance: u64,
    pub opl: u64,
    pub bipolar: u64,
    pub ganglion_on: u64,
    pub ganglion_off: u64,
}

impl SaturationCounts {
    pub fn total(&self) -> u64 {
        self.luminance + self.opl + self.bipolar + self.ganglion_on + self.ganglion_off
    }
}

/// Borrowed view of every tap after one frame step.
pub struct FixedStepOutput<'a> {
    pub luminance: &'a Frame<i64>,
    pub center: &'a Frame<i64>,
    pub surround: &'a Frame<i64>,
    pub i_opl: &'a Frame<i64>,
    pub v_bip: &'a Frame<i64>,
    pub i_gang_on: &'a Frame<i64>,
    pub i_gang_off: &'a Frame<i64>,
    pub v_m_on: &'a Frame<i64>,
    pub v_m_off: &'a Frame<i64>,
    /// Events of this frame, ON block then OFF block, row-major within each.
    pub spikes: &'a [SpikeEvent],
}

pub struct FixedPipeline {
    format: FixedPointFormat,
    width: usize,
    height: usize,
    frame_index: u32,
    ctx_lum: FxpCtx,
    ctx_opl: FxpCtx,
    ctx_bip: FxpCtx,
    ctx_gang_on: FxpCtx,
    ctx_gang_off: FxpCtx,
    opl: OplStage<i64>,
    bipolar: FixedBipolar,
    gang_on: FixedGanglion,
    gang_off: FixedGanglion,
    lum_q: Frame<i64>,
    center: Frame<i64>,
    surround: Frame<i64>,
    i_opl: Frame<i64>,
    v_bip: Frame<i64>,
    spikes: Vec<SpikeEvent>,
}

/// Wide accumulators cap the practical mantissa width; enough for any
/// hardware-plausible datapath.
const MAX_PIPELINE_TOTAL_BITS: u32 = 32;

impl FixedPipeline {
    /// Quantizes the parameters itself; pass the requested (floating)
    /// values.
    pub fn new(params: &RetinaParams) -> Result<Self, RetinaError> {
        params.validate()?;
        let format = params.format()?;
        if format.total_bits() > MAX_PIPELINE_TOTAL_BITS {
            return Err(RetinaError::InvalidParameter(format!(
                "pipeline datapath supports at most {MAX_PIPELINE_TOTAL_BITS} total bits, got {}",
                format.total_bits()
            )));
        }
        let q = params.quantized()?;
        let (w, h) = (q.width, q.height);
        let dt = q.dt();
        let ctx_lum = FxpCtx::new(format);
        let ctx_opl = FxpCtx::new(format);
        let ctx_bip = FxpCtx::new(format);
        let ctx_gang_on = FxpCtx::new(format);
        let ctx_gang_off = FxpCtx::new(format);
        let opl = OplStage::new_fixed(&ctx_opl, &q.opl(), q.pixels_per_degree, dt, w, h)?;
        // the stored integration interval is itself a quantized constant
        let mut bip_params = q.bipolar();
        bip_params.dt = crate::fixedpoint::quantize(dt, format).to_real();
        let bipolar = FixedBipolar::new(&ctx_bip, &bip_params, q.pixels_per_degree, w, h)?;
        let mut on_params = q.ganglion();
        on_params.xi = 1;
        let mut off_params = on_params;
        off_params.xi = -1;
        let gang_on = FixedGanglion::new(&ctx_gang_on, &on_params, w, h)?;
        let gang_off = FixedGanglion::new(&ctx_gang_off, &off_params, w, h)?;
        Ok(FixedPipeline {
            format,
            width: w,
            height: h,
            frame_index: 0,
            ctx_lum,
            ctx_opl,
            ctx_bip,
            ctx_gang_on,
            ctx_gang_off,
            opl,
            bipolar,
            gang_on,
            gang_off,
            lum_q: Frame::new(w, h),
            center: Frame::new(w, h),
            surround: Frame::new(w, h),
            i_opl: Frame::new(w, h),
            v_bip: Frame::new(w, h),
            spikes: Vec::new(),
        })
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame_index(&self) -> u32 {
        self.frame_index
    }

    #[inline]
    pub fn to_real(&self, raw: i64) -> f64 {
        raw as f64 / self.format.scale()
    }

    pub fn saturation_counts(&self) -> SaturationCounts {
        SaturationCounts {
            luminance: self.ctx_lum.saturation_count(),
            opl: self.ctx_opl.saturation_count(),
            bipolar: self.ctx_bip.saturation_count(),
            ganglion_on: self.ctx_gang_on.saturation_count(),
            ganglion_off: self.ctx_gang_off.saturation_count(),
        }
    }

    /// Feed one luminance frame (samples in [0, 1]) and advance every stage.
    pub fn step(&mut self, luminance: &Frame<f64>) -> Result<FixedStepOutput<'_>, RetinaError> {
        if luminance.width() != self.width || luminance.height() != self.height {
            return Err(RetinaError::GeometryMismatch {
                expected_width: self.width,
                expected_height: self.height,
                width: luminance.width(),
                height: luminance.height(),
            });
        }
        for (dst, &src) in self
            .lum_q
            .as_mut_slice()
            .iter_mut()
            .zip(luminance.as_slice())
        {
            *dst = self.ctx_lum.quantize_raw(src);
        }
        self.opl.step_into(
            &self.ctx_opl,
            &self.lum_q,
            &mut self.center,
            &mut self.surround,
            &mut self.i_opl,
        );
        self.bipolar
            .step_into(&self.ctx_bip, &self.i_opl, &mut self.v_bip);
        self.gang_on.current_step(&self.ctx_gang_on, &self.v_bip);
        self.gang_off.current_step(&self.ctx_gang_off, &self.v_bip);
        self.spikes.clear();
        self.gang_on
            .spike_step(&self.ctx_gang_on, self.frame_index, &mut self.spikes);
        self.gang_off
            .spike_step(&self.ctx_gang_off, self.frame_index, &mut self.spikes);
        self.frame_index += 1;
        Ok(FixedStepOutput {
            luminance: &self.lum_q,
            center: &self.center,
            surround: &self.surround,
            i_opl: &self.i_opl,
            v_bip: &self.v_bip,
            i_gang_on: self.gang_on.i_gang(),
            i_gang_off: self.gang_off.i_gang(),
            v_m_on: self.gang_on.v_m(),
            v_m_off: self.gang_off.v_m(),
            spikes: &self.spikes,
        })
    }
}
