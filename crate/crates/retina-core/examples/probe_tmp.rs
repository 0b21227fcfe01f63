use retina_core::stimulus::ChirpSpec;
use retina_core::{Frame, FixedPipeline, Polarity, ReferencePipeline, RetinaParams};
use std::collections::HashSet;

fn main() {
    let mut params = RetinaParams::default();
    params.width = 32;
    params.height = 32;
    params.tau_step = 2.0;
    let qparams = params.quantized().unwrap();
    let spec = ChirpSpec::default();
    let n = (spec.total_s * params.fps).round() as usize;
    let mut fixed = FixedPipeline::new(&params).unwrap();
    let mut refq = ReferencePipeline::new(&qparams).unwrap();
    let mut fixed_off: HashSet<(u32, u16, u16)> = HashSet::new();
    let mut ref_off: Vec<(u32, u16, u16)> = Vec::new();
    let mut frame = Frame::new(32, 32);
    for k in 0..n {
        let t = k as f64 / params.fps;
        frame.fill(spec.value_at(t).clamp(0.0, 1.0));
        let of = fixed.step(&frame).unwrap();
        for e in of.spikes.iter().filter(|e| e.polarity == Polarity::Off) {
            fixed_off.insert((e.frame, e.x, e.y));
        }
        let orr = refq.step(&frame).unwrap();
        for e in orr.spikes.iter().filter(|e| e.polarity == Polarity::Off) {
            ref_off.push((e.frame, e.x, e.y));
        }
    }
    let mut unmatched: Vec<(u32, u16, u16)> = ref_off
        .iter()
        .filter(|(f, x, y)| {
            !(f.saturating_sub(1)..=f + 1).any(|ff| fixed_off.contains(&(ff, *x, *y)))
        })
        .cloned()
        .collect();
    unmatched.sort();
    println!("total ref OFF {} unmatched {}", ref_off.len(), unmatched.len());
    // summarize: distance from border, frame histogram
    let mut border = 0;
    let mut interior = 0;
    let mut frames: Vec<u32> = vec![];
    for &(f, x, y) in &unmatched {
        let d = x.min(31 - x).min(y).min(31 - y);
        if d <= 3 { border += 1 } else { interior += 1 }
        frames.push(f);
    }
    frames.dedup();
    println!("border(d<=3)={} interior={} frames={:?}", border, interior, &frames[..frames.len().min(40)]);
}
