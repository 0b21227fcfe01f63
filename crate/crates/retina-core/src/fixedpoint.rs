//! Signed fixed-point number system with saturating arithmetic, quantization
//! and a table-based exponential.
//!
//! A value is an integer mantissa `raw` interpreted as `raw * 2^-frac_bits`.
//! Scalar quantization and multiplication truncate toward negative infinity
//! (floor); out-of-range results saturate to the format bounds and are
//! reported via a per-value flag ([`FixedPointValue`]) or a per-context
//! counter ([`FxpCtx`]), never by aborting. Multiply-accumulate reductions
//! ([`Sample::acc_finish`]) round to nearest instead: a floor-only recursive
//! filter parks up to `ceil(1/b)` steps away from its fixed point, which
//! breaks the unit-DC-gain bound of the temporal banks. Stored constant
//! tables (the exponential knots and reciprocal entries) are generated with
//! round-to-nearest, as synthesized hardware constants are.

use std::cell::Cell;

use crate::arith::Sample;
use crate::error::RetinaError;

/// Bit layout of a fixed-point signal: `total_bits` two's-complement bits,
/// of which `frac_bits` are fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl Default for FixedPointFormat {
    /// 19-bit datapath with 10 fractional bits.
    fn default() -> Self {
        FixedPointFormat {
            total_bits: 19,
            frac_bits: 10,
        }
    }
}

impl FixedPointFormat {
    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self, RetinaError> {
        if !(2..=64).contains(&total_bits) || frac_bits >= total_bits {
            return Err(RetinaError::InvalidFormat {
                total_bits,
                frac_bits,
            });
        }
        Ok(FixedPointFormat {
            total_bits,
            frac_bits,
        })
    }

    #[inline]
    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    #[inline]
    pub fn raw_max(&self) -> i64 {
        ((1i128 << (self.total_bits - 1)) - 1) as i64
    }

    #[inline]
    pub fn raw_min(&self) -> i64 {
        (-(1i128 << (self.total_bits - 1))) as i64
    }

    /// 2^frac_bits, exact in f64 for every legal format.
    #[inline]
    pub fn scale(&self) -> f64 {
        (1u128 << self.frac_bits) as f64
    }

    /// Size of one quantization step, 2^-frac_bits.
    #[inline]
    pub fn step(&self) -> f64 {
        1.0 / self.scale()
    }

    pub fn max_value(&self) -> f64 {
        self.raw_max() as f64 / self.scale()
    }

    pub fn min_value(&self) -> f64 {
        self.raw_min() as f64 / self.scale()
    }
}

/// One fixed-point sample: mantissa, format and a sticky saturation flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointValue {
    raw: i64,
    format: FixedPointFormat,
    saturated: bool,
}

/// Quantize a real value: floor(x * 2^frac_bits) * 2^-frac_bits, saturating
/// at the format bounds. NaN maps to zero with the saturation flag set.
pub fn quantize(x: f64, format: FixedPointFormat) -> FixedPointValue {
    let (raw, saturated) = quantize_raw(x, format);
    FixedPointValue {
        raw,
        format,
        saturated,
    }
}

fn quantize_raw(x: f64, format: FixedPointFormat) -> (i64, bool) {
    if x.is_nan() {
        return (0, true);
    }
    let scaled = (x * format.scale()).floor();
    // f64 -> i128 casts saturate, so the clamp below is exact even for
    // values far outside the format.
    let wide = scaled as i128;
    let lo = format.raw_min() as i128;
    let hi = format.raw_max() as i128;
    if wide < lo {
        (format.raw_min(), true)
    } else if wide > hi {
        (format.raw_max(), true)
    } else {
        (wide as i64, false)
    }
}

impl FixedPointValue {
    pub fn from_raw(raw: i64, format: FixedPointFormat) -> Self {
        assert!(
            raw >= format.raw_min() && raw <= format.raw_max(),
            "raw mantissa {raw} does not fit a {}-bit format",
            format.total_bits
        );
        FixedPointValue {
            raw,
            format,
            saturated: false,
        }
    }

    #[inline]
    pub fn raw(&self) -> i64 {
        self.raw
    }

    #[inline]
    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    #[inline]
    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    #[inline]
    pub fn to_real(&self) -> f64 {
        self.raw as f64 / self.format.scale()
    }

    fn check_format(&self, other: &FixedPointValue, op: &str) {
        assert_eq!(
            self.format, other.format,
            "fixed-point format mismatch in {op}: operands use different layouts"
        );
    }

    /// Saturating addition; saturation flags propagate.
    pub fn add(&self, other: &FixedPointValue) -> FixedPointValue {
        self.check_format(other, "add");
        let wide = self.raw as i128 + other.raw as i128;
        let (raw, clamped) = clamp_wide(wide, self.format);
        FixedPointValue {
            raw,
            format: self.format,
            saturated: clamped || self.saturated || other.saturated,
        }
    }

    pub fn sub(&self, other: &FixedPointValue) -> FixedPointValue {
        self.check_format(other, "sub");
        let wide = self.raw as i128 - other.raw as i128;
        let (raw, clamped) = clamp_wide(wide, self.format);
        FixedPointValue {
            raw,
            format: self.format,
            saturated: clamped || self.saturated || other.saturated,
        }
    }

    /// Full-precision product truncated (floor) back to the format, then
    /// saturated.
    pub fn mul(&self, other: &FixedPointValue) -> FixedPointValue {
        self.check_format(other, "mul");
        let wide = (self.raw as i128 * other.raw as i128) >> self.format.frac_bits;
        let (raw, clamped) = clamp_wide(wide, self.format);
        FixedPointValue {
            raw,
            format: self.format,
            saturated: clamped || self.saturated || other.saturated,
        }
    }

    /// e^-x via the shared 256-segment lookup table. `x` must be
    /// non-negative; inputs above 8 return zero.
    pub fn exp_neg(&self) -> Result<FixedPointValue, RetinaError> {
        if self.raw < 0 {
            return Err(RetinaError::NegativeExpInput {
                value: self.to_real(),
            });
        }
        let ctx = FxpCtx::new(self.format);
        Ok(FixedPointValue {
            raw: ctx.exp_neg_raw(self.raw),
            format: self.format,
            saturated: self.saturated,
        })
    }
}

#[inline]
fn clamp_wide_k(wide: i128, lo: i64, hi: i64) -> (i64, bool) {
    if wide < lo as i128 {
        (lo, true)
    } else if wide > hi as i128 {
        (hi, true)
    } else {
        (wide as i64, false)
    }
}

#[inline]
fn clamp_wide(wide: i128, format: FixedPointFormat) -> (i64, bool) {
    clamp_wide_k(wide, format.raw_min(), format.raw_max())
}

/// Exponential table domain: [0, 8] split into 256 linear segments.
const EXP_SEGMENTS: usize = 256;
const EXP_DOMAIN: f64 = 8.0;
// Segment width is 1/32, so positions scale by 32 = 2^5.
const EXP_POS_SHIFT: u32 = 5;

/// Shared arithmetic context for one fixed-point pipeline stage: format,
/// saturation counter and the exponential knot table.
pub struct FxpCtx {
    format: FixedPointFormat,
    raw_min: i64,
    raw_max: i64,
    saturations: Cell<u64>,
    exp_knots: Vec<i64>,
}

impl FxpCtx {
    pub fn new(format: FixedPointFormat) -> Self {
        let mut exp_knots = Vec::with_capacity(EXP_SEGMENTS + 1);
        for i in 0..=EXP_SEGMENTS {
            let x = EXP_DOMAIN * i as f64 / EXP_SEGMENTS as f64;
            let knot = ((-x).exp() * format.scale()).round() as i64;
            exp_knots.push(knot.min(format.raw_max()));
        }
        FxpCtx {
            format,
            raw_min: format.raw_min(),
            raw_max: format.raw_max(),
            saturations: Cell::new(0),
            exp_knots,
        }
    }

    #[inline]
    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn saturation_count(&self) -> u64 {
        self.saturations.get()
    }

    pub fn reset_saturations(&self) {
        self.saturations.set(0);
    }

    #[inline]
    fn clamp(&self, wide: i128) -> i64 {
        let (raw, clamped) = clamp_wide_k(wide, self.raw_min, self.raw_max);
        if clamped {
            self.saturations.set(self.saturations.get() + 1);
        }
        raw
    }

    #[inline]
    pub fn add_raw(&self, a: i64, b: i64) -> i64 {
        self.clamp(a as i128 + b as i128)
    }

    #[inline]
    pub fn sub_raw(&self, a: i64, b: i64) -> i64 {
        self.clamp(a as i128 - b as i128)
    }

    #[inline]
    pub fn mul_raw(&self, a: i64, b: i64) -> i64 {
        self.clamp((a as i128 * b as i128) >> self.format.frac_bits)
    }

    /// Quantize a real constant into this context, counting saturation.
    pub fn quantize_raw(&self, x: f64) -> i64 {
        let (raw, saturated) = quantize_raw(x, self.format);
        if saturated {
            self.saturations.set(self.saturations.get() + 1);
        }
        raw
    }

    #[inline]
    pub fn to_real(&self, raw: i64) -> f64 {
        raw as f64 / self.format.scale()
    }

    /// Mantissa of 1.0 (saturates for formats without integer headroom).
    #[inline]
    pub fn one_raw(&self) -> i64 {
        let one = 1i128 << self.format.frac_bits;
        self.clamp(one)
    }

    /// e^-x by linear interpolation between the stored knots. The caller
    /// guarantees `raw >= 0`; inputs above the table domain return zero.
    #[inline]
    pub fn exp_neg_raw(&self, raw: i64) -> i64 {
        debug_assert!(raw >= 0, "exp_neg_raw requires a non-negative input");
        let frac = self.format.frac_bits;
        let pos = (raw as i128) << EXP_POS_SHIFT;
        let idx = (pos >> frac) as usize;
        if idx > EXP_SEGMENTS {
            return 0;
        }
        let rem = pos - ((idx as i128) << frac);
        if idx == EXP_SEGMENTS {
            return if rem == 0 { self.exp_knots[idx] } else { 0 };
        }
        let y0 = self.exp_knots[idx] as i128;
        let y1 = self.exp_knots[idx + 1] as i128;
        // dy is negative; the arithmetic shift floors the interpolated step.
        let interp = y0 + (((y1 - y0) * rem) >> frac);
        interp as i64
    }
}

impl Sample for i64 {
    type Ctx = FxpCtx;
    type Acc = i128;

    #[inline(always)]
    fn zero() -> i64 {
        0
    }

    #[inline(always)]
    fn add(ctx: &FxpCtx, a: i64, b: i64) -> i64 {
        ctx.add_raw(a, b)
    }

    #[inline(always)]
    fn sub(ctx: &FxpCtx, a: i64, b: i64) -> i64 {
        ctx.sub_raw(a, b)
    }

    #[inline(always)]
    fn mul(ctx: &FxpCtx, a: i64, b: i64) -> i64 {
        ctx.mul_raw(a, b)
    }

    #[inline(always)]
    fn acc_zero() -> i128 {
        0
    }

    #[inline(always)]
    fn mac(acc: i128, x: i64, w: i64) -> i128 {
        acc + x as i128 * w as i128
    }

    #[inline(always)]
    fn acc_shift_in(ctx: &FxpCtx, v: i64) -> i128 {
        (v as i128) << ctx.format.frac_bits
    }

    #[inline(always)]
    fn acc_finish(ctx: &FxpCtx, acc: i128) -> i64 {
        let frac = ctx.format.frac_bits;
        let half = if frac > 0 { 1i128 << (frac - 1) } else { 0 };
        ctx.clamp((acc + half) >> frac)
    }

    #[inline(always)]
    fn acc_finish_fb(ctx: &FxpCtx, acc: i128, rem: &mut i64) -> i64 {
        let frac = ctx.format.frac_bits;
        let half = if frac > 0 { 1i128 << (frac - 1) } else { 0 };
        let fed = acc + *rem as i128;
        let shifted = (fed + half) >> frac;
        let y = ctx.clamp(shifted);
        // anti-windup: drop the residue whenever the output clamps
        *rem = if y as i128 == shifted {
            (fed - ((y as i128) << frac)) as i64
        } else {
            0
        };
        y
    }
}

/// Reciprocal lookup for the shunting division: 1/g as a guard-precision
/// constant table with linear interpolation, so a divide becomes one
/// multiply and a shift.
#[derive(Debug, Clone)]
pub struct RecipTable {
    format: FixedPointFormat,
    /// Knot spacing in mantissa units is 2^shift_ulps.
    shift_ulps: u32,
    entries: Vec<i64>,
}

/// Extra precision bits carried by the reciprocal entries.
const RECIP_GUARD: u32 = 24;
const RECIP_MAX_ENTRIES: usize = 1 << 22;

impl RecipTable {
    /// Build the table covering `[g_min, format max]`. `g_min` must be
    /// strictly positive after quantization.
    pub fn new(format: FixedPointFormat, g_min: f64) -> Result<Self, RetinaError> {
        let (g_min_raw, _) = quantize_raw(g_min, format);
        if g_min_raw <= 0 {
            return Err(RetinaError::InvalidParameter(format!(
                "reciprocal domain lower bound {g_min} quantizes to zero"
            )));
        }
        // Knots at least 16x finer than the smallest divisor keep the
        // interpolation error well below the 2^-8 relative budget.
        let lead = 63 - (g_min_raw as u64).leading_zeros();
        let shift_ulps = lead.saturating_sub(4);
        let count = ((format.raw_max() >> shift_ulps) as usize) + 2;
        if count > RECIP_MAX_ENTRIES {
            return Err(RetinaError::InvalidParameter(format!(
                "reciprocal table would need {count} entries; narrow the format or raise g_min"
            )));
        }
        let frac = format.frac_bits();
        let mut entries = Vec::with_capacity(count);
        for j in 0..count {
            if j == 0 {
                entries.push(0); // never addressed: g >= g_min > 16 knots in
                continue;
            }
            let denom = (j as i128) << shift_ulps;
            let num = 1i128 << (RECIP_GUARD + frac);
            // round-to-nearest stored constant
            entries.push(((num + denom / 2) / denom) as i64);
        }
        Ok(RecipTable {
            format,
            shift_ulps,
            entries,
        })
    }

    /// `x / g` as `(x * recip(g)) >> guard`, rounded to nearest at the final
    /// shift. `g_raw` must lie in the table domain (guaranteed by the
    /// shunting invariant g >= g0 > 0).
    #[inline]
    pub fn div_by(&self, ctx: &FxpCtx, x_raw: i64, g_raw: i64) -> i64 {
        debug_assert!(g_raw > 0, "divisor must be positive");
        let idx = (g_raw >> self.shift_ulps) as usize;
        let idx = idx.min(self.entries.len() - 2);
        let rem = (g_raw as i128) - ((idx as i128) << self.shift_ulps);
        let r0 = self.entries[idx] as i128;
        let r1 = self.entries[idx + 1] as i128;
        let recip = r0 + (((r1 - r0) * rem) >> self.shift_ulps);
        let prod = x_raw as i128 * recip;
        let half = 1i128 << (RECIP_GUARD - 1);
        ctx.clamp((prod + half) >> RECIP_GUARD)
    }

    #[inline]
    pub fn format(&self) -> FixedPointFormat {
        self.format
    }
}
