//! Measurement channel (decimation, windowing, noise, mean removal) and
//! the transport-delay block.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::DataWindow;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOptions {
    /// Keep every `decimation`-th raw sample.
    pub decimation: usize,
    /// Length of the returned window in seconds.
    pub window_length: f64,
    /// Offset of the window start from the start of the raw record.
    pub window_offset: f64,
    /// Standard deviation of additive white Gaussian noise.
    pub noise_std: f64,
    /// Channels that receive noise; `None` means all channels.
    pub noise_channels: Option<Vec<String>>,
    /// Samples strictly before this time form the mean-removal baseline.
    pub disturbance_start: f64,
    pub seed: u64,
}

impl Default for MeasurementOptions {
    fn default() -> Self {
        Self {
            decimation: 10,
            window_length: 20.0,
            window_offset: 0.0,
            noise_std: 0.0,
            noise_channels: None,
            disturbance_start: 0.0,
            seed: 0,
        }
    }
}

/// Decimates, windows, adds noise and removes the pre-disturbance mean.
///
/// No anti-alias filter is applied before decimation; content above the
/// decimated Nyquist frequency folds back into the band.
pub fn measurement_channel(raw: &DataWindow, opts: &MeasurementOptions) -> Result<DataWindow> {
    if opts.decimation == 0 {
        return Err(invalid("decimation factor must be at least 1"));
    }
    if !(opts.noise_std >= 0.0) {
        return Err(invalid("noise standard deviation must be non-negative"));
    }
    if !(opts.window_length > 0.0) || !(opts.window_offset >= 0.0) {
        return Err(invalid(
            "window length must be positive and offset non-negative",
        ));
    }
    let ts = raw.sample_time() * opts.decimation as f64;
    let decimated_len = raw.len().div_ceil(opts.decimation);
    let first = (opts.window_offset / ts).round() as usize;
    let count = (opts.window_length / ts).round() as usize;
    if count == 0 || first + count > decimated_len {
        return Err(invalid(format!(
            "requested window ({} s from {} s) is longer than the data ({} s)",
            opts.window_length,
            opts.window_offset,
            decimated_len as f64 * ts
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = Normal::new(0.0, opts.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| invalid(e.to_string()))?;
    let start_time = raw.start_time() + first as f64 * ts;
    let mut channels = Vec::with_capacity(raw.channel_count());
    for (name, ch) in raw.names().iter().zip(raw.channels()) {
        let mut v: Vec<f64> = ch
            .iter()
            .step_by(opts.decimation)
            .skip(first)
            .take(count)
            .copied()
            .collect();
        let noisy = opts.noise_std > 0.0
            && opts
                .noise_channels
                .as_ref()
                .is_none_or(|list| list.iter().any(|n| n == name));
        if noisy {
            for x in v.iter_mut() {
                *x += normal.sample(&mut rng);
            }
        }
        let pre: Vec<f64> = v
            .iter()
            .enumerate()
            .filter(|(k, _)| start_time + *k as f64 * ts < opts.disturbance_start - 1e-9 * ts)
            .map(|(_, x)| *x)
            .collect();
        if !pre.is_empty() {
            let mean = pre.iter().sum::<f64>() / pre.len() as f64;
            for x in v.iter_mut() {
                *x -= mean;
            }
        }
        channels.push(v);
    }
    DataWindow::new(ts, start_time, raw.names().to_vec(), channels)
}

/// Whole-sample shift for a delay: nearest integer, ties toward +inf.
pub fn delay_samples(delay: f64, sample_time: f64) -> usize {
    let x = delay / sample_time;
    // guard against representation error just below a half-integer tie
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Delays every channel by `delay_samples(delay, T)` samples, zero-padding
/// the front.
pub fn delay_block(signal: &DataWindow, delay: f64) -> Result<DataWindow> {
    if !(delay >= 0.0) {
        return Err(invalid("delay must be non-negative"));
    }
    let shift = delay_samples(delay, signal.sample_time());
    let channels = signal
        .channels()
        .iter()
        .map(|ch| {
            let len = ch.len();
            let mut v = vec![0.0; len];
            if shift < len {
                v[shift..].copy_from_slice(&ch[..len - shift]);
            }
            v
        })
        .collect();
    DataWindow::new(
        signal.sample_time(),
        signal.start_time(),
        signal.names().to_vec(),
        channels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize, ts: f64) -> DataWindow {
        DataWindow::new(
            ts,
            0.0,
            vec!["x".into()],
            vec![(0..len).map(|k| k as f64).collect()],
        )
        .unwrap()
    }

    #[test]
    fn decimation_by_ten_and_twenty_second_window() {
        let raw = ramp(7000, 0.0032);
        let out = measurement_channel(&raw, &MeasurementOptions::default()).unwrap();
        assert!((out.sample_time() - 0.032).abs() < 1e-15);
        assert_eq!(out.len(), 625);
        assert_eq!(out.channels()[0][1], 10.0);
    }

    #[test]
    fn identity_up_to_mean_removal() {
        let raw =
            DataWindow::new(0.1, 0.0, vec!["x".into()], vec![vec![2.0, 2.0, 3.0, 5.0]]).unwrap();
        let opts = MeasurementOptions {
            decimation: 1,
            window_length: 0.4,
            disturbance_start: 0.15,
            ..Default::default()
        };
        let out = measurement_channel(&raw, &opts).unwrap();
        assert_eq!(out.channels()[0], vec![0.0, 0.0, 1.0, 3.0]);
    }

    #[test]
    fn window_longer_than_data_rejected() {
        let raw = ramp(100, 0.0032);
        assert!(measurement_channel(&raw, &MeasurementOptions::default()).is_err());
        let opts = MeasurementOptions {
            decimation: 0,
            ..Default::default()
        };
        assert!(measurement_channel(&raw, &opts).is_err());
    }

    #[test]
    fn delay_shifts() {
        let w = DataWindow::new(
            0.1,
            0.0,
            vec!["x".into()],
            vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]],
        )
        .unwrap();
        assert_eq!(delay_block(&w, 0.0).unwrap(), w);
        let d = delay_block(&w, 0.3).unwrap();
        assert_eq!(d.channels()[0], vec![0.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(delay_block(&w, -0.1).is_err());
        assert_eq!(delay_samples(0.15, 0.032), 5);
        assert_eq!(delay_samples(0.05, 0.1), 1); // tie rounds up
        assert_eq!(delay_samples(0.001, 0.032), 0);
    }
}
