//! Quantitative comparison between runs: variance explained,
//! cross-correlation peak lag and spike-train agreement.

use std::collections::HashMap;

use crate::error::RetinaError;
use crate::ganglion::{Polarity, SpikeEvent};

/// Summary of one trace-vs-trace comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceComparison {
    pub variance_explained: f64,
    pub best_lag: i64,
    pub rms_error: f64,
}

/// `1 - sum((ref-test)^2) / sum((ref-mean(ref))^2)`. Scale- and
/// translation-sensitive by definition; a constant reference is an error.
pub fn variance_explained(reference: &[f64], test: &[f64]) -> Result<f64, RetinaError> {
    if reference.len() != test.len() {
        return Err(RetinaError::TraceLengthMismatch {
            a: reference.len(),
            b: test.len(),
        });
    }
    if reference.len() < 2 {
        return Err(RetinaError::TraceLengthMismatch {
            a: reference.len(),
            b: 2,
        });
    }
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let ss_tot: f64 = reference.iter().map(|r| (r - mean) * (r - mean)).sum();
    if ss_tot == 0.0 {
        return Err(RetinaError::ConstantReference);
    }
    let ss_res: f64 = reference
        .iter()
        .zip(test)
        .map(|(r, t)| (r - t) * (r - t))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rms_error(reference: &[f64], test: &[f64]) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    let ss: f64 = reference
        .iter()
        .zip(test)
        .map(|(r, t)| (r - t) * (r - t))
        .sum();
    (ss / reference.len() as f64).sqrt()
}

/// Lag (in frames) maximizing the normalized cross-correlation between two
/// mean-subtracted traces, zero-filled at the ends. Positive lag means
/// `test` is delayed relative to `reference`. Ties break toward zero lag,
/// then toward the negative side.
pub fn xcorr_peak_lag(
    reference: &[f64],
    test: &[f64],
    max_lag: usize,
) -> Result<i64, RetinaError> {
    if reference.len() != test.len() {
        return Err(RetinaError::TraceLengthMismatch {
            a: reference.len(),
            b: test.len(),
        });
    }
    let n = reference.len();
    if max_lag >= n / 2 {
        return Err(RetinaError::LagOutOfRange { max_lag, len: n });
    }
    let mean_r = reference.iter().sum::<f64>() / n as f64;
    let mean_t = test.iter().sum::<f64>() / n as f64;
    let r: Vec<f64> = reference.iter().map(|v| v - mean_r).collect();
    let t: Vec<f64> = test.iter().map(|v| v - mean_t).collect();
    let er: f64 = r.iter().map(|v| v * v).sum();
    let et: f64 = t.iter().map(|v| v * v).sum();
    if er == 0.0 || et == 0.0 {
        return Err(RetinaError::ZeroVariance);
    }
    let norm = (er * et).sqrt();
    let corr_at = |lag: i64| -> f64 {
        let mut s = 0.0;
        for i in 0..n as i64 {
            let j = i + lag;
            if j >= 0 && j < n as i64 {
                s += r[i as usize] * t[j as usize];
            }
        }
        s / norm
    };
    // visit lags by increasing |lag|, negative first, so strict improvement
    // implements the tie-break rule
    let mut best_lag = 0i64;
    let mut best = corr_at(0);
    for mag in 1..=max_lag as i64 {
        for lag in [-mag, mag] {
            let c = corr_at(lag);
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
    }
    Ok(best_lag)
}

pub fn compare_traces(
    reference: &[f64],
    test: &[f64],
    max_lag: usize,
) -> Result<TraceComparison, RetinaError> {
    Ok(TraceComparison {
        variance_explained: variance_explained(reference, test)?,
        best_lag: xcorr_peak_lag(reference, test, max_lag)?,
        rms_error: rms_error(reference, test),
    })
}

/// Spike times grouped per (pixel, polarity), in emission order.
#[derive(Debug, Clone, Default)]
pub struct SpikeTrains {
    trains: HashMap<(u16, u16, Polarity), Vec<u32>>,
    len: usize,
}

impl SpikeTrains {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: &[SpikeEvent]) -> Self {
        let mut s = Self::new();
        for e in events {
            s.push(e);
        }
        s
    }

    pub fn push(&mut self, e: &SpikeEvent) {
        self.trains
            .entry((e.x, e.y, e.polarity))
            .or_default()
            .push(e.frame);
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Greedy one-to-one matching of two sorted spike time lists within
/// `slack` frames; returns the number of matches.
fn match_trains(a: &[u32], b: &[u32], slack: u32) -> usize {
    let (mut i, mut j, mut matched) = (0usize, 0usize, 0usize);
    while i < a.len() && j < b.len() {
        let (ta, tb) = (a[i] as i64, b[j] as i64);
        if (ta - tb).abs() <= slack as i64 {
            matched += 1;
            i += 1;
            j += 1;
        } else if ta < tb {
            i += 1;
        } else {
            j += 1;
        }
    }
    matched
}

/// Fraction of spikes in `a` with a one-to-one match in `b` at the same
/// pixel and polarity within `slack` frames, matched greedily in time
/// order. Two empty sets agree perfectly.
pub fn spike_agreement(a: &SpikeTrains, b: &SpikeTrains, slack: u32) -> f64 {
    if a.len == 0 {
        return 1.0;
    }
    let empty: Vec<u32> = Vec::new();
    let mut matched = 0usize;
    for (key, ta) in &a.trains {
        let tb = b.trains.get(key).unwrap_or(&empty);
        matched += match_trains(ta, tb, slack);
    }
    matched as f64 / a.len as f64
}

/// Convenience wrapper over raw event slices.
pub fn spike_agreement_events(a: &[SpikeEvent], b: &[SpikeEvent], slack: u32) -> f64 {
    spike_agreement(
        &SpikeTrains::from_events(a),
        &SpikeTrains::from_events(b),
        slack,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_explained_identity_and_mean() {
        let r = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        assert_eq!(variance_explained(&r, &r).unwrap(), 1.0);
        let mean = [0.5; 6];
        assert_eq!(variance_explained(&r, &mean).unwrap(), 0.0);
    }

    #[test]
    fn variance_explained_one_flipped_sample() {
        // alternating 0/1 trace, one sample flipped: ss_res = 1,
        // ss_tot = n/4
        let n = 16;
        let r: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let mut t = r.clone();
        t[5] = 1.0 - t[5];
        let want = 1.0 - 1.0 / (n as f64 / 4.0);
        let got = variance_explained(&r, &t).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn variance_explained_errors() {
        assert!(matches!(
            variance_explained(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(RetinaError::ConstantReference)
        ));
        assert!(variance_explained(&[1.0], &[1.0]).is_err());
        assert!(variance_explained(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn xcorr_zero_for_identical() {
        let r: Vec<f64> = (0..64).map(|i| ((i as f64) * 0.3).sin()).collect();
        assert_eq!(xcorr_peak_lag(&r, &r, 10).unwrap(), 0);
    }

    #[test]
    fn xcorr_detects_constructed_shift() {
        let n = 128;
        let r: Vec<f64> = (0..n)
            .map(|i| ((i as f64) * 0.21).sin() + 0.4 * ((i as f64) * 0.07).cos())
            .collect();
        // test delayed by 3: test[n] = ref[n-3]
        let mut t = vec![0.0; n];
        for i in 3..n {
            t[i] = r[i - 3];
        }
        assert_eq!(xcorr_peak_lag(&r, &t, 10).unwrap(), 3);
        // and the opposite direction
        let mut u = vec![0.0; n];
        for i in 0..n - 3 {
            u[i] = r[i + 3];
        }
        assert_eq!(xcorr_peak_lag(&r, &u, 10).unwrap(), -3);
    }

    #[test]
    fn xcorr_amplitude_mismatch_keeps_peak() {
        let n = 128;
        let r: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.17).sin()).collect();
        let t: Vec<f64> = r.iter().map(|v| 37.0 * v).collect();
        assert_eq!(xcorr_peak_lag(&r, &t, 12).unwrap(), 0);
    }

    #[test]
    fn xcorr_errors() {
        let r = [0.0, 1.0, 0.0, 1.0];
        assert!(matches!(
            xcorr_peak_lag(&r, &r, 2),
            Err(RetinaError::LagOutOfRange { .. })
        ));
        let z = [0.0; 8];
        let s = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        assert!(matches!(
            xcorr_peak_lag(&z, &s, 2),
            Err(RetinaError::ZeroVariance)
        ));
    }

    fn ev(frame: u32, x: u16, y: u16, polarity: Polarity) -> SpikeEvent {
        SpikeEvent {
            frame,
            x,
            y,
            polarity,
        }
    }

    #[test]
    fn agreement_identical_and_disjoint() {
        let a = vec![
            ev(3, 1, 1, Polarity::On),
            ev(7, 1, 1, Polarity::On),
            ev(4, 2, 0, Polarity::Off),
        ];
        assert_eq!(spike_agreement_events(&a, &a, 0), 1.0);
        let b = vec![ev(3, 5, 5, Polarity::On), ev(4, 6, 6, Polarity::Off)];
        assert_eq!(spike_agreement_events(&a, &b, 3), 0.0);
        assert_eq!(spike_agreement_events(&[], &[], 1), 1.0);
    }

    #[test]
    fn agreement_slack_boundary() {
        let a = vec![ev(10, 0, 0, Polarity::On)];
        let b = vec![ev(12, 0, 0, Polarity::On)];
        assert_eq!(spike_agreement_events(&a, &b, 2), 1.0);
        assert_eq!(spike_agreement_events(&a, &b, 1), 0.0);
    }

    #[test]
    fn agreement_polarity_must_match() {
        let a = vec![ev(5, 0, 0, Polarity::On)];
        let b = vec![ev(5, 0, 0, Polarity::Off)];
        assert_eq!(spike_agreement_events(&a, &b, 2), 0.0);
    }

    #[test]
    fn agreement_is_one_to_one() {
        // one b spike cannot match two a spikes
        let a = vec![ev(10, 0, 0, Polarity::On), ev(11, 0, 0, Polarity::On)];
        let b = vec![ev(10, 0, 0, Polarity::On)];
        assert_eq!(spike_agreement_events(&a, &b, 1), 0.5);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_events(max: usize) -> impl Strategy<Value = Vec<SpikeEvent>> {
        proptest::collection::vec(
            (0u32..40, 0u16..3, 0u16..3, proptest::bool::ANY),
            0..max,
        )
        .prop_map(|raw| {
            let mut evs: Vec<SpikeEvent> = raw
                .into_iter()
                .map(|(frame, x, y, on)| SpikeEvent {
                    frame,
                    x,
                    y,
                    polarity: if on { Polarity::On } else { Polarity::Off },
                })
                .collect();
            evs.sort_by_key(|e| (e.frame, e.y, e.x));
            evs.dedup_by_key(|e| (e.frame, e.x, e.y, e.polarity));
            evs
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn agreement_symmetric_for_equal_counts(a in arb_events(24), b in arb_events(24), slack in 0u32..4) {
            let (sa, sb) = (SpikeTrains::from_events(&a), SpikeTrains::from_events(&b));
            let ab = spike_agreement(&sa, &sb, slack);
            let ba = spike_agreement(&sb, &sa, slack);
            // matched counts are symmetric; fractions coincide when sizes do
            if a.len() == b.len() {
                prop_assert!((ab - ba).abs() < 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((0.0..=1.0).contains(&ba));
        }

        #[test]
        fn agreement_matched_count_symmetric(a in arb_events(24), b in arb_events(24), slack in 0u32..4) {
            let (sa, sb) = (SpikeTrains::from_events(&a), SpikeTrains::from_events(&b));
            let ab = spike_agreement(&sa, &sb, slack) * a.len().max(1) as f64;
            let ba = spike_agreement(&sb, &sa, slack) * b.len().max(1) as f64;
            if !a.is_empty() && !b.is_empty() {
                prop_assert!((ab - ba).abs() < 1e-9, "matched counts differ: {ab} vs {ba}");
            }
        }
    }
}
