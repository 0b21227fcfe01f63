//! Luminance input generation: chirp, pulse, impulse and uniform profiles.
//!
//! All generators are pure functions of their spec, so identical specs
//! produce bit-identical streams.

use crate::error::RetinaError;
use crate::frame::Frame;

/// Ordered sequence of 2-D luminance frames, samples in [0, 1].
#[derive(Debug, Clone)]
pub struct FrameStream {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub frames: Vec<Frame<f64>>,
}

impl FrameStream {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn validate(&self) -> Result<(), RetinaError> {
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.width() != self.width || frame.height() != self.height {
                return Err(RetinaError::GeometryMismatch {
                    expected_width: self.width,
                    expected_height: self.height,
                    width: frame.width(),
                    height: frame.height(),
                });
            }
            for &v in frame.as_slice() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(RetinaError::InvalidStimulus(format!(
                        "sample {v} out of [0,1] in frame {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_geometry(width: usize, height: usize, fps: f64) -> Result<(), RetinaError> {
    if width == 0 || height == 0 {
        return Err(RetinaError::InvalidStimulus(format!(
            "zero-area geometry {width}x{height}"
        )));
    }
    if fps <= 0.0 || !fps.is_finite() {
        return Err(RetinaError::InvalidStimulus(format!("fps must be positive, got {fps}")));
    }
    Ok(())
}

/// Build a spatially uniform stream from a temporal luminance profile.
/// Samples are clamped to [0, 1].
pub fn make_uniform(
    profile: impl Fn(f64) -> f64,
    duration_s: f64,
    width: usize,
    height: usize,
    fps: f64,
) -> Result<FrameStream, RetinaError> {
    check_geometry(width, height, fps)?;
    if duration_s <= 0.0 {
        return Err(RetinaError::InvalidStimulus(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let count = (duration_s * fps).round() as usize;
    let mut frames = Vec::with_capacity(count);
    for k in 0..count {
        let t = k as f64 / fps;
        let v = profile(t).clamp(0.0, 1.0);
        frames.push(Frame::filled(width, height, v));
    }
    Ok(FrameStream {
        width,
        height,
        fps,
        frames,
    })
}

/// Linear frequency sweep segment: start/end frequency over a duration.
#[derive(Debug, Clone, Copy)]
pub struct FreqSweep {
    pub start_hz: f64,
    pub end_hz: f64,
    pub duration_s: f64,
    pub amplitude: f64,
}

/// Amplitude ramp segment: fixed frequency, amplitude growing 0 -> max.
#[derive(Debug, Clone, Copy)]
pub struct AmpSweep {
    pub freq_hz: f64,
    pub max_amplitude: f64,
    pub duration_s: f64,
}

/// Chirp profile: baseline, OFF-ON-OFF pulse, frequency sweep, amplitude
/// sweep, then baseline until the total duration.
#[derive(Debug, Clone, Copy)]
pub struct ChirpSpec {
    pub baseline: f64,
    pub lead_in_s: f64,
    pub pulse_low: f64,
    pub pulse_high: f64,
    /// OFF, ON, OFF segment durations.
    pub pulse_durations_s: [f64; 3],
    pub freq_sweep: FreqSweep,
    pub amp_sweep: AmpSweep,
    pub total_s: f64,
}

impl Default for ChirpSpec {
    fn default() -> Self {
        ChirpSpec {
            baseline: 0.5,
            lead_in_s: 0.5,
            pulse_low: 0.0,
            pulse_high: 1.0,
            pulse_durations_s: [0.5, 0.5, 0.5],
            freq_sweep: FreqSweep {
                start_hz: 1.0,
                end_hz: 10.0,
                duration_s: 2.0,
                amplitude: 0.25,
            },
            amp_sweep: AmpSweep {
                freq_hz: 5.0,
                max_amplitude: 0.5,
                duration_s: 2.0,
            },
            total_s: 7.0,
        }
    }
}

impl ChirpSpec {
    pub fn validate(&self) -> Result<(), RetinaError> {
        let durs = [
            self.lead_in_s,
            self.pulse_durations_s[0],
            self.pulse_durations_s[1],
            self.pulse_durations_s[2],
            self.freq_sweep.duration_s,
            self.amp_sweep.duration_s,
            self.total_s,
        ];
        if durs.iter().any(|d| *d <= 0.0 || !d.is_finite()) {
            return Err(RetinaError::InvalidStimulus(
                "all chirp durations must be positive".into(),
            ));
        }
        if self.freq_sweep.start_hz > self.freq_sweep.end_hz {
            return Err(RetinaError::InvalidStimulus(format!(
                "frequency sweep must not decrease: {} -> {}",
                self.freq_sweep.start_hz, self.freq_sweep.end_hz
            )));
        }
        Ok(())
    }

    /// Luminance at time `t`, before clamping.
    pub fn value_at(&self, t: f64) -> f64 {
        let t0 = self.lead_in_s;
        let t1 = t0 + self.pulse_durations_s[0];
        let t2 = t1 + self.pulse_durations_s[1];
        let t3 = t2 + self.pulse_durations_s[2];
        let t4 = t3 + self.freq_sweep.duration_s;
        let t5 = t4 + self.amp_sweep.duration_s;
        if t < t0 {
            self.baseline
        } else if t < t1 {
            self.pulse_low
        } else if t < t2 {
            self.pulse_high
        } else if t < t3 {
            self.pulse_low
        } else if t < t4 {
            let u = t - t3;
            let sweep = &self.freq_sweep;
            let phase = 2.0
                * std::f64::consts::PI
                * (sweep.start_hz * u
                    + (sweep.end_hz - sweep.start_hz) * u * u / (2.0 * sweep.duration_s));
            self.baseline + sweep.amplitude * phase.sin()
        } else if t < t5 {
            let u = t - t4;
            let sweep = &self.amp_sweep;
            let amp = sweep.max_amplitude * u / sweep.duration_s;
            self.baseline + amp * (2.0 * std::f64::consts::PI * sweep.freq_hz * u).sin()
        } else {
            self.baseline
        }
    }
}

pub fn make_chirp(
    spec: &ChirpSpec,
    width: usize,
    height: usize,
    fps: f64,
) -> Result<FrameStream, RetinaError> {
    spec.validate()?;
    make_uniform(|t| spec.value_at(t), spec.total_s, width, height, fps)
}

pub fn make_pulse(
    low: f64,
    high: f64,
    t_on: f64,
    t_off: f64,
    duration_s: f64,
    width: usize,
    height: usize,
    fps: f64,
) -> Result<FrameStream, RetinaError> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low > high {
        return Err(RetinaError::InvalidStimulus(format!(
            "pulse levels must satisfy 0 <= low <= high <= 1, got {low}, {high}"
        )));
    }
    if !(0.0 <= t_on && t_on < t_off && t_off <= duration_s) {
        return Err(RetinaError::InvalidStimulus(format!(
            "pulse timing must satisfy 0 <= t_on < t_off <= duration, got {t_on}, {t_off}, {duration_s}"
        )));
    }
    make_uniform(
        |t| if t >= t_on && t < t_off { high } else { low },
        duration_s,
        width,
        height,
        fps,
    )
}

pub fn make_impulse(
    amplitude: f64,
    t_hit: f64,
    duration_s: f64,
    width: usize,
    height: usize,
    fps: f64,
) -> Result<FrameStream, RetinaError> {
    if !(0.0..=1.0).contains(&amplitude) {
        return Err(RetinaError::InvalidStimulus(format!(
            "impulse amplitude must be in [0,1], got {amplitude}"
        )));
    }
    if !(0.0..duration_s).contains(&t_hit) {
        return Err(RetinaError::InvalidStimulus(format!(
            "impulse time {t_hit} outside [0, {duration_s})"
        )));
    }
    let hit = (t_hit * fps).floor() as usize;
    make_uniform(
        move |t| {
            let k = (t * fps).round() as usize;
            if k == hit {
                amplitude
            } else {
                0.0
            }
        },
        duration_s,
        width,
        height,
        fps,
    )
}
