//! Modes of the identified model, residue-based control-loop ranking and
//! an FFT cross-check of the dominant oscillation frequency.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ident::MimoTfModel;
use crate::lti::{bilinear_pole_d2c, partial_fractions, tustin_d2c};

/// Electromechanical band of inter-area oscillations.
pub const INTER_AREA_BAND: (f64, f64) = (0.1, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeInfo {
    pub discrete_pole: Complex64,
    pub continuous_pole: Complex64,
    pub frequency_hz: f64,
    pub damping_ratio: f64,
}

impl ModeInfo {
    pub fn from_discrete(z: Complex64, sample_time: f64) -> Result<Self> {
        let s = bilinear_pole_d2c(z, sample_time)?;
        let mag = s.norm();
        Ok(Self {
            discrete_pole: z,
            continuous_pole: s,
            frequency_hz: s.im.abs() / (2.0 * PI),
            damping_ratio: if mag > 0.0 { -s.re / mag } else { 0.0 },
        })
    }

    pub fn is_oscillatory(&self) -> bool {
        self.continuous_pole.im != 0.0
    }
}

/// One entry per conjugate pair (upper half-plane representative) plus the
/// real poles, sorted by frequency.
pub fn extract_modes(model: &MimoTfModel) -> Result<Vec<ModeInfo>> {
    let mut modes = model
        .poles()?
        .into_iter()
        .filter(|z| z.im >= 0.0)
        .map(|z| ModeInfo::from_discrete(z, model.sample_time()))
        .collect::<Result<Vec<_>>>()?;
    modes.sort_by(|a, b| {
        a.frequency_hz
            .partial_cmp(&b.frequency_hz)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                a.damping_ratio
                    .partial_cmp(&b.damping_ratio)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    Ok(modes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueTable {
    pub mode: ModeInfo,
    pub outputs: Vec<String>,
    pub inputs: Vec<String>,
    /// Complex residues of the continuous loop functions at the mode pole.
    pub raw: Vec<Vec<Complex64>>,
    /// `|raw| / max |raw|`; the largest entry is exactly 1.
    pub normalized: Vec<Vec<f64>>,
    pub argmax: (usize, usize),
}

impl ResidueTable {
    /// Builds a table from raw residues, normalizing by the largest magnitude.
    pub fn from_raw(
        mode: ModeInfo,
        outputs: Vec<String>,
        inputs: Vec<String>,
        raw: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        let mags: Vec<Vec<f64>> = raw
            .iter()
            .map(|row| row.iter().map(|r| r.norm()).collect())
            .collect();
        let argmax = argmax_rowmajor(&mags).ok_or_else(|| invalid("empty residue table"))?;
        let peak = mags[argmax.0][argmax.1];
        if !(peak > 0.0) {
            return Err(Error::IllConditioned(
                "all residues vanish at the selected mode".into(),
            ));
        }
        let mut normalized: Vec<Vec<f64>> = mags
            .iter()
            .map(|row| row.iter().map(|v| v / peak).collect())
            .collect();
        normalized[argmax.0][argmax.1] = 1.0;
        Ok(Self {
            mode,
            outputs,
            inputs,
            raw,
            normalized,
            argmax,
        })
    }

    /// Sum of squared residue magnitudes over all loops.
    pub fn energy(&self) -> f64 {
        self.raw.iter().flatten().map(|r| r.norm_sqr()).sum()
    }
}

/// Argmax with ties resolved to the lowest row, then the lowest column.
fn argmax_rowmajor(v: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (i, row) in v.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if best.is_none_or(|(_, b)| *x > b) {
                best = Some(((i, j), *x));
            }
        }
    }
    best.map(|(ij, _)| ij)
}

/// Residue of every continuous-domain loop function at `mode`.
pub fn residue_table(model: &MimoTfModel, mode: &ModeInfo) -> Result<ResidueTable> {
    let target = mode.continuous_pole;
    let tol = 1e-6 * target.norm().max(1.0);
    let mut raw = Vec::with_capacity(model.outputs().len());
    for m in 0..model.outputs().len() {
        let mut row = Vec::with_capacity(model.inputs().len());
        for p in 0..model.inputs().len() {
            let g = tustin_d2c(&model.loop_tf(m, p)?)?;
            let pf = partial_fractions(&g)?;
            let r = pf.residue_at(target, tol).ok_or_else(|| {
                invalid(format!(
                    "pole {:.6}{:+.6}i is not a root of the model denominator",
                    target.re, target.im
                ))
            })?;
            row.push(r);
        }
        raw.push(row);
    }
    ResidueTable::from_raw(
        *mode,
        model.outputs().to_vec(),
        model.inputs().to_vec(),
        raw,
    )
}

/// In-band oscillatory mode with the largest aggregate residue energy;
/// ties go to the lower frequency.
pub fn inter_area_mode(
    model: &MimoTfModel,
    modes: &[ModeInfo],
    band: (f64, f64),
) -> Result<(ModeInfo, ResidueTable)> {
    let mut best: Option<(ModeInfo, ResidueTable, f64)> = None;
    for mode in modes
        .iter()
        .filter(|m| m.is_oscillatory() && m.frequency_hz >= band.0 && m.frequency_hz <= band.1)
    {
        let table = residue_table(model, mode)?;
        let e = table.energy();
        let better = match &best {
            None => true,
            Some((bm, _, be)) => e > *be || (e == *be && mode.frequency_hz < bm.frequency_hz),
        };
        if better {
            best = Some((*mode, table, e));
        }
    }
    best.map(|(m, t, _)| (m, t)).ok_or_else(|| {
        Error::IllConditioned(format!(
            "no oscillatory mode between {} and {} Hz (identification likely failed)",
            band.0, band.1
        ))
    })
}

/// Oscillatory modes whose frequency lies inside `band`.
pub fn modes_in_band(modes: &[ModeInfo], band: (f64, f64)) -> Vec<ModeInfo> {
    modes
        .iter()
        .filter(|m| m.is_oscillatory() && m.frequency_hz >= band.0 && m.frequency_hz <= band.1)
        .copied()
        .collect()
}

/// `(output index, input index)` of the largest normalized residue.
pub fn select_loop(table: &ResidueTable) -> (usize, usize) {
    argmax_rowmajor(&table.normalized).unwrap_or((0, 0))
}

/// Zero-padding factor applied before the FFT.
pub const FFT_PADDING: usize = 8;

/// Frequency of the largest spectral peak inside `band`.
///
/// The mean is removed, a Hann window applied and the record zero-padded
/// eightfold; the peak bin is refined by a parabola through it and its two
/// neighbours.
pub fn fft_dominant_frequency(signal: &[f64], sample_time: f64, band: (f64, f64)) -> Result<f64> {
    let n = signal.len();
    if !(band.0 > 0.0 && band.1 > band.0) {
        return Err(invalid("frequency band must satisfy 0 < low < high"));
    }
    let duration = n as f64 * sample_time;
    if duration < 2.0 / band.0 {
        return Err(invalid(format!(
            "window of {duration:.3} s holds fewer than two cycles of {} Hz",
            band.0
        )));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let scale: f64 = signal
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let nfft = n * FFT_PADDING;
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); nfft];
    for (k, x) in signal.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / (n as f64 - 1.0).max(1.0)).cos();
        buf[k] = Complex64::new((x - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let mag: Vec<f64> = buf[..nfft / 2 + 1].iter().map(|c| c.norm()).collect();
    let df = 1.0 / (nfft as f64 * sample_time);
    let lo = (band.0 / df).ceil().max(1.0) as usize;
    let hi = ((band.1 / df).floor() as usize).min(mag.len() - 2);
    let mut peak: Option<usize> = None;
    for i in lo..=hi {
        if mag[i] >= mag[i - 1] && mag[i] >= mag[i + 1] && peak.is_none_or(|p| mag[i] > mag[p]) {
            peak = Some(i);
        }
    }
    let i = peak
        .filter(|&i| mag[i] > 1e-9 * scale)
        .ok_or_else(|| invalid("no spectral peak inside the band"))?;
    let (a, b, c) = (mag[i - 1], mag[i], mag[i + 1]);
    let denom = a - 2.0 * b + c;
    let delta = if denom != 0.0 {
        0.5 * (a - c) / denom
    } else {
        0.0
    };
    Ok((i as f64 + delta.clamp(-0.5, 0.5)) * df)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn damped(f: f64, zeta: f64, ts: f64, n: usize) -> Vec<f64> {
        let w = 2.0 * PI * f;
        (0..n)
            .map(|k| {
                let t = k as f64 * ts;
                (-zeta * w * t).exp() * (w * (1.0 - zeta * zeta).sqrt() * t).sin()
            })
            .collect()
    }

    #[test]
    fn damped_sinusoid_frequency() {
        let x = damped(0.64, 0.05, 0.032, 625);
        let f = fft_dominant_frequency(&x, 0.032, INTER_AREA_BAND).unwrap();
        assert!((f - 0.64).abs() < 0.02, "{f}");
    }

    #[test]
    fn dc_only_has_no_peak() {
        let x = vec![3.0; 625];
        assert!(fft_dominant_frequency(&x, 0.032, INTER_AREA_BAND).is_err());
    }

    #[test]
    fn stronger_component_wins() {
        let x: Vec<f64> = (0..625)
            .map(|k| {
                let t = k as f64 * 0.032;
                (2.0 * PI * 0.3 * t).sin() + 0.2 * (2.0 * PI * 0.8 * t).sin()
            })
            .collect();
        let f = fft_dominant_frequency(&x, 0.032, INTER_AREA_BAND).unwrap();
        assert!((f - 0.3).abs() < 0.01, "{f}");
    }

    #[test]
    fn short_window_rejected() {
        let x = vec![0.0; 100];
        assert!(fft_dominant_frequency(&x, 0.032, INTER_AREA_BAND).is_err());
    }

    #[test]
    fn unit_circle_pole_is_undamped() {
        let th = 0.3f64;
        let m = ModeInfo::from_discrete(Complex64::new(th.cos(), th.sin()), 0.05).unwrap();
        assert!(m.continuous_pole.re.abs() < 1e-12);
        assert!(m.damping_ratio.abs() < 1e-12);
    }

    #[test]
    fn tie_break_prefers_first() {
        let mode = ModeInfo::from_discrete(Complex64::new(0.9, 0.1), 0.1).unwrap();
        let raw = vec![vec![Complex64::new(1.0, 0.0); 3]; 2];
        let t = ResidueTable::from_raw(
            mode,
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into(), "z".into()],
            raw,
        )
        .unwrap();
        assert_eq!(select_loop(&t), (0, 0));
    }
}
