//! Desk-scale plants standing in for the real-time simulator: the coupled
//! two-input/two-output example and linear multi-machine swing surrogates,
//! plus disturbance injection, the measurement channel and the transport
//! delay block.

mod measure;
mod swing;

pub use measure::{delay_block, delay_samples, measurement_channel, MeasurementOptions};
pub use swing::{
    build_swing_surrogate, preset, preset_names, Branch, SwingPreset, SwingSurrogateParams,
    TieLine, TieTerm,
};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lti::{simulate_dt, Domain, StateSpace};
use crate::{DataWindow, StateSpaceModel};

/// A state-space plant together with its channel names.
///
/// The first `tie_outputs` outputs are tie-line power deviations (the
/// signals used for identification); any further outputs are monitoring
/// channels such as machine speed deviations.
#[derive(Debug, Clone)]
pub struct Plant {
    pub model: StateSpaceModel,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tie_outputs: usize,
}

impl Plant {
    pub fn new(
        model: StateSpaceModel,
        inputs: Vec<String>,
        outputs: Vec<String>,
        tie_outputs: usize,
    ) -> Result<Self> {
        if inputs.len() != model.inputs() || outputs.len() != model.outputs() {
            return Err(invalid("channel names do not match model dimensions"));
        }
        if tie_outputs > outputs.len() {
            return Err(invalid("more tie outputs than outputs"));
        }
        Ok(Self {
            model,
            inputs,
            outputs,
            tie_outputs,
        })
    }

    pub fn tie_names(&self) -> &[String] {
        &self.outputs[..self.tie_outputs]
    }

    pub fn input_index(&self, name: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(format!("unknown input channel '{name}'")))
    }

    pub fn output_index(&self, name: &str) -> Result<usize> {
        self.outputs
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(format!("unknown output channel '{name}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledExampleParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Two-input/two-output example:
/// `y1'' + a1 y1' + a0 (y1 + y2) = u1`, `y2' + a2 (y2 - y1) = u2`.
pub fn build_coupled_example(params: CoupledExampleParams) -> Result<Plant> {
    let CoupledExampleParams { a0, a1, a2 } = params;
    if !(a0 > 0.0 && a1 > 0.0 && a2 > 0.0) {
        return Err(invalid(format!(
            "coupled example coefficients must be positive, got a0={a0}, a1={a1}, a2={a2}"
        )));
    }
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        -a0, -a1, 0.0, -a0,
        0.0, 0.0, 0.0, 1.0,
        a2, 0.0, 0.0, -a2,
    ]);
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        0.0, 0.0,
        1.0, 0.0,
        0.0, 0.0,
        0.0, 1.0,
    ]);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(2, 4, &[
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    ]);
    let model = StateSpace::new(a, b, c, DMatrix::zeros(2, 2), Domain::Continuous)?;
    Plant::new(
        model,
        vec!["u_1".into(), "u_2".into()],
        vec!["y_1".into(), "y_2".into()],
        2,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    Pulse,
    Step,
    /// Low-pass filtered Gaussian noise active over the disturbance interval.
    NoiseProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    /// Name of the plant input that receives the disturbance.
    pub channel: String,
    pub start: f64,
    pub duration: f64,
    pub amplitude: f64,
    /// Seed for the noise probe; ignored by the other kinds.
    #[serde(default)]
    pub seed: u64,
}

impl DisturbanceSpec {
    /// Rectangular input pulse of 0.05 pu for 0.05 s.
    pub fn default_pulse(channel: &str, start: f64) -> Self {
        Self {
            kind: DisturbanceKind::Pulse,
            channel: channel.to_string(),
            start,
            duration: 0.05,
            amplitude: 0.05,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(invalid("disturbance duration must be positive"));
        }
        if !(self.start >= 0.0) {
            return Err(invalid("disturbance start must be non-negative"));
        }
        if !self.amplitude.is_finite() {
            return Err(invalid("disturbance amplitude must be finite"));
        }
        Ok(())
    }

    /// Input samples realizing the disturbance on a grid of `len` samples.
    pub fn samples(&self, len: usize, sample_time: f64) -> Vec<f64> {
        let eps = 1e-9 * sample_time;
        let end = self.start + self.duration;
        let active = |t: f64| t + eps >= self.start && t + eps < end;
        match self.kind {
            DisturbanceKind::Pulse => (0..len)
                .map(|k| {
                    if active(k as f64 * sample_time) {
                        self.amplitude
                    } else {
                        0.0
                    }
                })
                .collect(),
            DisturbanceKind::Step => (0..len)
                .map(|k| {
                    if k as f64 * sample_time + eps >= self.start {
                        self.amplitude
                    } else {
                        0.0
                    }
                })
                .collect(),
            DisturbanceKind::NoiseProbe => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                // first-order low-pass with a 0.5 s time constant
                let alpha = sample_time / (0.5 + sample_time);
                let mut state = 0.0;
                (0..len)
                    .map(|k| {
                        if active(k as f64 * sample_time) {
                            state += alpha * (normal.sample(&mut rng) - state);
                            self.amplitude * state
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Simulates the plant under `spec` and returns inputs followed by outputs.
///
/// Continuous plants are discretized with the bilinear transform at
/// `sample_time`; discrete plants must already run at that rate.
pub fn apply_disturbance(
    plant: &Plant,
    spec: &DisturbanceSpec,
    horizon: f64,
    sample_time: f64,
) -> Result<DataWindow> {
    spec.validate()?;
    if !(sample_time > 0.0) {
        return Err(invalid("sample time must be positive"));
    }
    if horizon + 1e-12 < spec.start + spec.duration {
        return Err(invalid(format!(
            "horizon {horizon} s ends before the disturbance ({} s + {} s)",
            spec.start, spec.duration
        )));
    }
    let target = plant.input_index(&spec.channel)?;
    let model = match plant.model.domain() {
        Domain::Continuous => plant.model.tustin(sample_time)?,
        Domain::Discrete { sample_time: ts } => {
            if (ts - sample_time).abs() > 1e-9 * sample_time {
                return Err(invalid(format!(
                    "discrete plant runs at {ts} s, requested {sample_time} s"
                )));
            }
            plant.model.clone()
        }
    };
    let len = (horizon / sample_time).round() as usize + 1;
    let mut inputs = vec![vec![0.0; len]; plant.inputs.len()];
    inputs[target] = spec.samples(len, sample_time);
    let u = DataWindow::new(sample_time, 0.0, plant.inputs.clone(), inputs)?;
    let y = simulate_dt(&model, &u, &vec![0.0; model.states()])?;
    let y = y.with_names(plant.outputs.clone())?;
    u.merge(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_example_matrix_rows() {
        let p = build_coupled_example(CoupledExampleParams {
            a0: 1.0,
            a1: 1.0,
            a2: 1.0,
        })
        .unwrap();
        let a = p.model.a();
        assert_eq!(
            a.row(1).iter().copied().collect::<Vec<_>>(),
            vec![-1.0, -1.0, 0.0, -1.0]
        );
        assert_eq!(
            a.row(3).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0, 0.0, -1.0]
        );
        assert!(p.model.d().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn coupled_example_rejects_nonpositive() {
        let r = build_coupled_example(CoupledExampleParams {
            a0: 1.0,
            a1: 0.0,
            a2: 1.0,
        });
        assert!(r.is_err());
    }

    #[test]
    fn zero_amplitude_gives_zero_outputs() {
        let p = build_coupled_example(CoupledExampleParams {
            a0: 1.0,
            a1: 1.0,
            a2: 1.0,
        })
        .unwrap();
        let mut spec = DisturbanceSpec::default_pulse("u_1", 0.5);
        spec.amplitude = 0.0;
        let w = apply_disturbance(&p, &spec, 5.0, 0.01).unwrap();
        for name in ["y_1", "y_2"] {
            assert!(w.channel(name).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn pulse_on_one_input_reaches_both_outputs() {
        let p = build_coupled_example(CoupledExampleParams {
            a0: 1.0,
            a1: 1.0,
            a2: 1.0,
        })
        .unwrap();
        let spec = DisturbanceSpec::default_pulse("u_1", 0.5);
        let w = apply_disturbance(&p, &spec, 10.0, 0.01).unwrap();
        assert!(w.energy("y_1").unwrap() > 0.0);
        assert!(w.energy("y_2").unwrap() > 0.0);
    }

    #[test]
    fn disturbance_errors() {
        let p = build_coupled_example(CoupledExampleParams {
            a0: 1.0,
            a1: 1.0,
            a2: 1.0,
        })
        .unwrap();
        let spec = DisturbanceSpec::default_pulse("u_9", 0.5);
        assert!(apply_disturbance(&p, &spec, 5.0, 0.01).is_err());
        let spec = DisturbanceSpec::default_pulse("u_1", 4.99);
        assert!(apply_disturbance(&p, &spec, 5.0, 0.01).is_err());
        let mut spec = DisturbanceSpec::default_pulse("u_1", 1.0);
        spec.duration = 0.0;
        assert!(apply_disturbance(&p, &spec, 5.0, 0.01).is_err());
    }

    #[test]
    fn pulse_samples_cover_interval() {
        let spec = DisturbanceSpec::default_pulse("u_1", 0.1);
        let s = spec.samples(10, 0.025);
        // active at t = 0.1, 0.125 (0.15 is the excluded end)
        assert_eq!(s, vec![0.0, 0.0, 0.0, 0.0, 0.05, 0.05, 0.0, 0.0, 0.0, 0.0]);
    }
}
