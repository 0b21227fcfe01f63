//! Arithmetic abstraction shared by the linear stages.
//!
//! `Sample` is implemented for `f64` (reference arithmetic) and for `i64`
//! fixed-point mantissas (pipeline arithmetic, see [`crate::fixedpoint`]).
//! Multiply-accumulate chains run in a wide accumulator and are reduced to
//! the sample width exactly once, which is how the hardware's
//! multiplier-adder units behave. Both implementations must execute the
//! same operations in the same order so that streaming and direct
//! evaluation stay bit-identical within each arithmetic.

pub trait Sample:
    Copy + Default + PartialEq + PartialOrd + std::fmt::Debug + Send + Sync + 'static
{
    /// Per-pipeline arithmetic context: `()` for f64, quantization state
    /// and saturation counting for fixed point.
    type Ctx;
    /// Wide accumulator for multiply-accumulate chains.
    type Acc: Copy;

    fn zero() -> Self;
    fn add(ctx: &Self::Ctx, a: Self, b: Self) -> Self;
    fn sub(ctx: &Self::Ctx, a: Self, b: Self) -> Self;
    fn mul(ctx: &Self::Ctx, a: Self, b: Self) -> Self;

    fn acc_zero() -> Self::Acc;
    fn mac(acc: Self::Acc, x: Self, w: Self) -> Self::Acc;
    /// Lift a sample into the accumulator domain, so additive terms can
    /// join a product chain before the single reduction.
    fn acc_shift_in(ctx: &Self::Ctx, v: Self) -> Self::Acc;
    /// Reduce the accumulator back to sample width (one round-to-nearest
    /// step in fixed point, identity for f64).
    fn acc_finish(ctx: &Self::Ctx, acc: Self::Acc) -> Self;
    /// Reduce with first-order error feedback: the quantization residue is
    /// carried in `rem` and fed back into the next reduction, so recursive
    /// filters settle on their exact fixed points instead of parking a few
    /// steps away. No-op for f64.
    fn acc_finish_fb(ctx: &Self::Ctx, acc: Self::Acc, rem: &mut i64) -> Self;
}

impl Sample for f64 {
    type Ctx = ();
    type Acc = f64;

    #[inline(always)]
    fn zero() -> f64 {
        0.0
    }

    #[inline(always)]
    fn add(_: &(), a: f64, b: f64) -> f64 {
        a + b
    }

    #[inline(always)]
    fn sub(_: &(), a: f64, b: f64) -> f64 {
        a - b
    }

    #[inline(always)]
    fn mul(_: &(), a: f64, b: f64) -> f64 {
        a * b
    }

    #[inline(always)]
    fn acc_zero() -> f64 {
        0.0
    }

    #[inline(always)]
    fn mac(acc: f64, x: f64, w: f64) -> f64 {
        acc + x * w
    }

    #[inline(always)]
    fn acc_shift_in(_: &(), v: f64) -> f64 {
        v
    }

    #[inline(always)]
    fn acc_finish(_: &(), acc: f64) -> f64 {
        acc
    }

    #[inline(always)]
    fn acc_finish_fb(_: &(), acc: f64, _rem: &mut i64) -> f64 {
        acc
    }
}
