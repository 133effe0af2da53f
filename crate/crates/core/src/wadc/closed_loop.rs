//! Controller assembly on an identified loop and closed-loop simulation
//! against a plant.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dlqr::{dlqr_for_loop_with, symmetrize, DlqrDesign, DlqrOptions};
use super::kalman::{kalman_gain, kalman_predict, steady_state_prior, KalmanState};
use crate::error::{invalid, Error, Result};
use crate::ident::MimoTfModel;
use crate::lti::{tf_to_ss_controllable, Domain};
use crate::plant::{delay_samples, DisturbanceSpec, Plant};
use crate::{DataWindow, StateSpaceModel};

/// Name of the controller output channel in simulation traces.
pub const CONTROL_CHANNEL: &str = "u_wadc";

/// Tuning knobs of the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WadcOptions {
    /// `R = rho I` in the LQR cost.
    pub rho: f64,
    /// Process-noise covariance `Qn = process_noise I`.
    pub process_noise: f64,
    /// Measurement-noise covariance `Rn`.
    pub measurement_noise: f64,
    /// Symmetric bound on the controller output; `None` disables it.
    pub output_limit: Option<f64>,
    /// Transport delay of the measurement path in seconds.
    pub loop_delay: f64,
    /// Relative-change tolerance of the Riccati recursion. Canonical-form
    /// realizations of higher order are badly scaled and the iteration
    /// stalls at a roundoff floor around 1e-10, so the default is looser
    /// than the bare solver's.
    pub riccati_tol: f64,
    pub riccati_max_iters: usize,
}

impl Default for WadcOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            process_noise: 1e-6,
            measurement_noise: 1e-4,
            output_limit: Some(0.1),
            loop_delay: 0.0,
            riccati_tol: 1e-9,
            riccati_max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WadcDesign {
    /// `(output index, input index)` into the identified model.
    pub selected: (usize, usize),
    pub output: String,
    pub input: String,
    /// Discrete realization of the selected loop.
    pub realization: StateSpaceModel,
    pub dlqr: DlqrDesign<f64>,
    /// Filter template: zero estimate, steady-state prior covariance.
    pub kalman: KalmanState<f64>,
    pub output_limit: Option<f64>,
    pub loop_delay: f64,
}

impl WadcDesign {
    pub fn sample_time(&self) -> f64 {
        match self.realization.domain() {
            Domain::Discrete { sample_time } => sample_time,
            Domain::Continuous => f64::NAN,
        }
    }

    pub fn gain(&self) -> Vec<f64> {
        self.dlqr.gain.iter().copied().collect()
    }

    /// Same design with a different loop delay.
    pub fn with_delay(&self, delay: f64) -> Self {
        Self {
            loop_delay: delay,
            ..self.clone()
        }
    }
}

/// Serializable form of a [`WadcDesign`]; matrices are stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WadcDesignRecord {
    pub selected: (usize, usize),
    pub output: String,
    pub input: String,
    pub sample_time: f64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub gain: Vec<f64>,
    pub riccati: Vec<Vec<f64>>,
    pub rho: f64,
    pub riccati_iterations: usize,
    pub riccati_residual: f64,
    pub process_noise: Vec<Vec<f64>>,
    pub measurement_noise: f64,
    pub prior_covariance: Vec<Vec<f64>>,
    pub output_limit: Option<f64>,
    pub loop_delay: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(invalid(format!("{what}: every row needs {ncols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl WadcDesign {
    pub fn to_record(&self) -> WadcDesignRecord {
        let r = &self.realization;
        WadcDesignRecord {
            selected: self.selected,
            output: self.output.clone(),
            input: self.input.clone(),
            sample_time: self.sample_time(),
            a: rows(r.a()),
            b: rows(r.b()),
            c: rows(r.c()),
            d: rows(r.d()),
            gain: self.gain(),
            riccati: rows(&self.dlqr.riccati),
            rho: self.dlqr.r[(0, 0)],
            riccati_iterations: self.dlqr.iterations,
            riccati_residual: self.dlqr.residual,
            process_noise: rows(&self.kalman.qn),
            measurement_noise: self.kalman.rn[(0, 0)],
            prior_covariance: rows(&self.kalman.covariance),
            output_limit: self.output_limit,
            loop_delay: self.loop_delay,
        }
    }

    pub fn from_record(rec: &WadcDesignRecord) -> Result<Self> {
        let n = rec.a.len();
        if n == 0 {
            return Err(invalid("design record has no states"));
        }
        let a = from_rows(&rec.a, n, "a")?;
        let b = from_rows(&rec.b, 1, "b")?;
        let c = from_rows(&rec.c, n, "c")?;
        let d = from_rows(&rec.d, 1, "d")?;
        let realization = StateSpaceModel::new(a, b, c, d, Domain::discrete(rec.sample_time)?)?;
        if rec.gain.len() != n || rec.c.len() != 1 {
            return Err(invalid("design record is not a single loop of matching order"));
        }
        let dlqr = DlqrDesign {
            gain: DMatrix::from_row_slice(1, n, &rec.gain),
            riccati: from_rows(&rec.riccati, n, "riccati")?,
            q: realization.c().transpose() * realization.c(),
            r: DMatrix::from_element(1, 1, rec.rho),
            iterations: rec.riccati_iterations,
            residual: rec.riccati_residual,
        };
        let kalman = KalmanState::new(
            DVector::zeros(n),
            from_rows(&rec.prior_covariance, n, "prior_covariance")?,
            from_rows(&rec.process_noise, n, "process_noise")?,
            DMatrix::from_element(1, 1, rec.measurement_noise),
            realization.c().clone(),
        )?;
        Ok(Self {
            selected: rec.selected,
            output: rec.output.clone(),
            input: rec.input.clone(),
            realization,
            dlqr,
            kalman,
            output_limit: rec.output_limit,
            loop_delay: rec.loop_delay,
        })
    }
}

/// Realizes loop `(m, p)` of `model` in controllable canonical form and
/// designs the DLQR gain and Kalman filter on it.
pub fn design_wadc(
    model: &MimoTfModel,
    selected: (usize, usize),
    opts: &WadcOptions,
) -> Result<WadcDesign> {
    let (m, p) = selected;
    if m >= model.outputs().len() || p >= model.inputs().len() {
        return Err(invalid(format!("loop ({m}, {p}) is outside the model")));
    }
    if !(opts.process_noise >= 0.0 && opts.measurement_noise > 0.0) {
        return Err(invalid(
            "process noise must be non-negative and measurement noise positive",
        ));
    }
    if let Some(l) = opts.output_limit {
        if !(l > 0.0) {
            return Err(invalid("output limit must be positive"));
        }
    }
    if !(opts.loop_delay >= 0.0) {
        return Err(invalid("loop delay must be non-negative"));
    }
    let realization = tf_to_ss_controllable(&model.loop_tf(m, p)?)?;
    let n = realization.states();
    if n == 0 {
        return Err(invalid("selected loop has no dynamics (order 0)"));
    }
    let dlqr = dlqr_for_loop_with(
        &realization,
        opts.rho,
        DlqrOptions {
            tol: opts.riccati_tol,
            max_iters: opts.riccati_max_iters,
        },
    )?;
    let qn = DMatrix::identity(n, n) * opts.process_noise;
    let rn = DMatrix::from_element(1, 1, opts.measurement_noise);
    let h = realization.c().clone();
    let prior = steady_state_prior(&realization, &qn, &rn, &h, 2000)?;
    let kalman = KalmanState::new(DVector::zeros(n), prior, qn, rn, h)?;
    Ok(WadcDesign {
        selected,
        output: model.outputs()[m].clone(),
        input: model.inputs()[p].clone(),
        realization,
        dlqr,
        kalman,
        output_limit: opts.output_limit,
        loop_delay: opts.loop_delay,
    })
}

/// Closed-loop run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    /// Standard deviation of white noise added to the measured signal.
    pub noise_std: f64,
    pub seed: u64,
    /// When false the controller output is held at zero.
    pub enabled: bool,
}

impl SimOptions {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            noise_std: 0.0,
            seed: 0,
            enabled: true,
        }
    }
}

/// Plant discretized with zero-order hold at `sample_time`.
fn discrete_plant(plant: &Plant, sample_time: f64) -> Result<StateSpaceModel> {
    match plant.model.domain() {
        Domain::Continuous => plant.model.zoh(sample_time),
        Domain::Discrete { sample_time: ts } => {
            if (ts - sample_time).abs() > 1e-9 * sample_time {
                return Err(invalid(format!(
                    "plant runs at {ts} s but the controller at {sample_time} s"
                )));
            }
            Ok(plant.model.clone())
        }
    }
}

/// Simulates plant and controller together.
///
/// Each step measures the selected output (plus optional noise), delays it,
/// corrects the filter, applies `u = -K x` (saturated) on top of the
/// disturbance at the selected input, advances the plant and predicts the
/// filter. The returned window holds all plant inputs and outputs and the
/// controller output.
pub fn closed_loop_sim(
    plant: &Plant,
    design: &WadcDesign,
    disturbance: &DisturbanceSpec,
    opts: &SimOptions,
) -> Result<DataWindow> {
    disturbance.validate()?;
    let ts = design.sample_time();
    if !ts.is_finite() {
        return Err(invalid("controller realization must be discrete"));
    }
    if opts.horizon + 1e-12 < disturbance.start + disturbance.duration {
        return Err(invalid(format!(
            "horizon {} s ends before the disturbance",
            opts.horizon
        )));
    }
    if !(opts.noise_std >= 0.0) {
        return Err(invalid("noise standard deviation must be non-negative"));
    }
    let model = discrete_plant(plant, ts)?;
    let meas = plant.output_index(&design.output)?;
    let act = plant.input_index(&design.input)?;
    let dist = plant.input_index(&disturbance.channel)?;
    if model.d()[(meas, act)] != 0.0 {
        return Err(invalid(
            "plant feedthrough from the control input to the measured output is not supported",
        ));
    }

    let len = (opts.horizon / ts).round() as usize + 1;
    let dist_samples = disturbance.samples(len, ts);
    let shift = delay_samples(design.loop_delay, ts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let (a, b, c, d) = (model.a(), model.b(), model.c(), model.d());
    let real = &design.realization;
    let k_gain = design.dlqr.gain.row(0).transpose();
    let d_loop = real.d()[(0, 0)];
    let n = real.states();

    let mut x = DVector::zeros(model.states());
    let mut filter = design.kalman.clone();
    let mut buffer = vec![0.0; shift + 1];
    let mut u_tr = vec![vec![0.0; len]; plant.inputs.len()];
    let mut y_tr = vec![vec![0.0; len]; plant.outputs.len()];
    let mut ctrl = vec![0.0; len];

    for t in 0..len {
        let mut u = DVector::zeros(plant.inputs.len());
        u[dist] += dist_samples[t];
        let y = c * &x + d * &u;
        let mut z = y[meas];
        if opts.noise_std > 0.0 {
            z += opts.noise_std * normal.sample(&mut rng);
        }
        buffer[t % (shift + 1)] = z;
        let delayed = if t >= shift {
            buffer[(t - shift) % (shift + 1)]
        } else {
            0.0
        };

        let mut uc = 0.0;
        if opts.enabled {
            // corrector with the loop feedthrough resolved: the measurement
            // model is z = Hx + D u with u = -K x
            let g = kalman_gain(&filter)?;
            let prior = filter.estimate.clone();
            let innov = delayed - (&filter.h * &prior)[0];
            let base = &prior + &g * innov;
            let lhs = DMatrix::identity(n, n) - &g * (k_gain.transpose() * d_loop);
            let mut est = lhs.lu().solve(&base).ok_or_else(|| {
                Error::IllConditioned("controller feedthrough loop is singular".into())
            })?;
            uc = -k_gain.dot(&est);
            if let Some(limit) = design.output_limit {
                if uc.abs() > limit {
                    uc = uc.clamp(-limit, limit);
                    est = &prior + &g * (innov - d_loop * uc);
                }
            }
            filter.estimate = est;
            filter.covariance =
                symmetrize(&((DMatrix::identity(n, n) - &g * &filter.h) * &filter.covariance));
            filter = kalman_predict(&filter, real, &DVector::from_element(1, uc))?;
        }
        u[act] += uc;
        let y = c * &x + d * &u;
        for (i, v) in u.iter().enumerate() {
            u_tr[i][t] = *v;
        }
        for (i, v) in y.iter().enumerate() {
            y_tr[i][t] = *v;
        }
        ctrl[t] = uc;
        x = a * &x + b * &u;
    }

    let mut names = plant.inputs.clone();
    names.extend(plant.outputs.iter().cloned());
    names.push(CONTROL_CHANNEL.to_string());
    let mut channels = u_tr;
    channels.extend(y_tr);
    channels.push(ctrl);
    DataWindow::new(ts, 0.0, names, channels)
}
