//! Damping metrics on sampled signals.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::window::DataWindow;

/// Index range of the samples whose time lies in `[from, to]`.
fn sample_range<T: Real>(len: usize, ts: T, start: T, from: T, to: T) -> Result<(usize, usize)> {
    if !(to > from) {
        return Err(invalid(format!("empty interval [{from}, {to}]")));
    }
    let eps = T::lit(1e-9);
    let first = ((from - start) / ts - eps).ceil().max(T::zero());
    let last = ((to - start) / ts + eps).floor();
    let first = first.as_f64() as usize;
    if !(last >= T::zero()) || first >= len {
        return Err(invalid(format!(
            "interval [{from}, {to}] lies outside the signal"
        )));
    }
    let last = (last.as_f64() as usize).min(len - 1);
    if last <= first {
        return Err(invalid(format!(
            "interval [{from}, {to}] holds fewer than two samples"
        )));
    }
    Ok((first, last))
}

/// Trapezoidal integral of `|x|` over the samples in `[from, to]`.
pub fn auc<T: Real>(signal: &[T], sample_time: T, start_time: T, from: T, to: T) -> Result<T> {
    let (i0, i1) = sample_range(signal.len(), sample_time, start_time, from, to)?;
    let half = T::lit(0.5);
    let mut s = T::zero();
    for k in i0..i1 {
        s += (signal[k].abs() + signal[k + 1].abs()) * half;
    }
    Ok(s * sample_time)
}

/// Area under `|channel|` of a window between `from` and `to` seconds.
pub fn metric_auc<T: Real>(window: &DataWindow<T>, channel: &str, from: T, to: T) -> Result<T> {
    auc(
        window.channel(channel)?,
        window.sample_time(),
        window.start_time(),
        from,
        to,
    )
}

/// `||reference - delayed|| / ||reference||`.
pub fn metric_relative_error<T: Real>(reference: &[T], delayed: &[T]) -> Result<T> {
    if reference.len() != delayed.len() {
        return Err(invalid(format!(
            "signals have {} and {} samples",
            reference.len(),
            delayed.len()
        )));
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for (r, d) in reference.iter().zip(delayed) {
        num += (*r - *d) * (*r - *d);
        den += *r * *r;
    }
    if !(den > T::zero()) {
        return Err(invalid("reference signal has zero norm"));
    }
    Ok((num / den).sqrt())
}

/// `|x|` at the sample nearest `at_time`.
pub fn peak<T: Real>(signal: &[T], sample_time: T, start_time: T, at_time: T) -> Result<T> {
    let pos = (at_time - start_time) / sample_time;
    let last = T::lit((signal.len().max(1) - 1) as f64);
    let half = T::lit(0.5);
    if signal.is_empty() || pos < -half || pos > last + half {
        return Err(invalid(format!("time {at_time} is outside the signal")));
    }
    let k = (pos + half).floor().max(T::zero()).min(last).as_f64() as usize;
    Ok(signal[k].abs())
}

pub fn metric_peak<T: Real>(window: &DataWindow<T>, channel: &str, at_time: T) -> Result<T> {
    peak(
        window.channel(channel)?,
        window.sample_time(),
        window.start_time(),
        at_time,
    )
}

/// `100 (1 - with / without)`.
pub fn reduction_percent(without: f64, with: f64) -> f64 {
    100.0 * (1.0 - with / without)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_of_constant() {
        let x = vec![1.0f64; 21];
        assert!((auc(&x, 0.1, 0.0, 0.0, 2.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(auc(&vec![0.0f64; 21], 0.1, 0.0, 0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn auc_empty_interval() {
        let x = vec![1.0f64; 21];
        assert!(auc(&x, 0.1, 0.0, 1.0, 1.0).is_err());
        assert!(auc(&x, 0.1, 0.0, 5.0, 6.0).is_err());
    }

    #[test]
    fn relative_error_cases() {
        assert_eq!(
            metric_relative_error(&[3.0, 4.0], &[3.0, 0.0]).unwrap(),
            0.8
        );
        assert_eq!(
            metric_relative_error(&[3.0, 4.0], &[0.0, 0.0]).unwrap(),
            1.0
        );
        assert!(metric_relative_error(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(metric_relative_error(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn peak_nearest_sample() {
        let ramp: Vec<f64> = (0..5).map(|k| k as f64 * 0.3).collect();
        assert!((peak(&ramp, 0.3, 0.0, 1.0).unwrap() - 0.9).abs() < 1e-12);
        assert!(peak(&ramp, 0.3, 0.0, 3.0).is_err());
    }
}
