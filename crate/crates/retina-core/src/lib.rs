//! Digital retina emulator core.
//!
//! A grayscale video stream is turned into ON/OFF ganglion spike trains by a
//! fixed-point streaming pipeline (quantized arithmetic, line-buffer
//! convolution, table-based exponentials), and the same stage graph is
//! available as a double-precision reference model so the two can be compared
//! signal-for-signal and spike-for-spike.
//!
//! Stage graph, per frame:
//!
//! ```text
//! luminance -> [3x3 gaussian] -> [temporal low-pass] -> [partial high-pass] = C
//! C -> [5x5 gaussian] -> [temporal low-pass] = S
//! I_opl = lambda * (C - omega * S)
//! I_opl -> [shunting membrane integration with smoothed squared feedback] = V_bip
//! V_bip -> [temporal high-pass] -> [rectifying nonlinearity] = I_gang (per polarity)
//! I_gang -> [leaky integrate-and-fire with refractory period] -> spikes
//! ```

pub mod arith;
pub mod bipolar;
pub mod error;
pub mod fixedpoint;
pub mod frame;
pub mod ganglion;
pub mod io;
pub mod metrics;
pub mod opl;
pub mod params;
pub mod pipeline;
pub mod reference;
pub mod spatial;
pub mod stimulus;
pub mod temporal;

pub use error::RetinaError;
pub use fixedpoint::{quantize, FixedPointFormat, FixedPointValue, FxpCtx};
pub use frame::Frame;
pub use ganglion::{Polarity, SpikeEvent};
pub use params::RetinaParams;
pub use pipeline::FixedPipeline;
pub use reference::{run_reference, ReferencePipeline, ReferenceRun};
pub use stimulus::{ChirpSpec, FrameStream};
