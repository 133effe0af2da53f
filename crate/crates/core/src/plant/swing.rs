//! Linearized multi-machine swing model.
//!
//! States are `(delta_1..delta_n, omega_1..omega_n)` with
//! `delta_i' = omega_i` and
//! `M_i omega_i' = -D_i omega_i - sum_j Dr_ij omega_j - sum_j Ks_ij delta_j + g_i u_i`.
//! `Dr` is a Laplacian of relative (branch) damping; it acts on speed
//! differences only and stands in for local stabilizers that damp the
//! intra-group modes.
//! Tie-line outputs are weighted angle differences across the cut between
//! coherent groups. Speed deviations relative to the centre of inertia
//! are appended as monitoring outputs; the common-mode speed is
//! unobservable from the tie-lines and is left to frequency control.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Plant;
use crate::error::{invalid, Error, Result};
use crate::lti::{Domain, StateSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieTerm {
    /// 1-based machine indices.
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieLine {
    pub name: String,
    pub terms: Vec<TieTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Synchronizing coefficient (pu torque per rad).
    pub k: f64,
    /// Damping of the speed difference across the branch.
    #[serde(default)]
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwingSurrogateParams {
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    pub input_gain: Vec<f64>,
    /// Symmetric synchronizing-coefficient matrix with zero row sums.
    pub sync: DMatrix<f64>,
    /// Relative-damping Laplacian (symmetric, zero row sums).
    pub relative_damping: DMatrix<f64>,
    pub ties: Vec<TieLine>,
    /// Append one speed-deviation output per machine, measured against the
    /// inertia-weighted mean speed.
    pub speed_outputs: bool,
}

impl SwingSurrogateParams {
    pub fn machines(&self) -> usize {
        self.inertia.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.machines();
        if n == 0 {
            return Err(invalid("swing surrogate needs at least one machine"));
        }
        if self.damping.len() != n || self.input_gain.len() != n {
            return Err(invalid(format!(
                "expected {n} damping and input-gain entries, got {} and {}",
                self.damping.len(),
                self.input_gain.len()
            )));
        }
        if let Some(m) = self.inertia.iter().find(|m| !(**m > 0.0)) {
            return Err(invalid(format!("inertia must be positive, got {m}")));
        }
        if let Some(d) = self.damping.iter().find(|d| !(**d >= 0.0)) {
            return Err(invalid(format!("damping must be non-negative, got {d}")));
        }
        check_laplacian(&self.sync, n, "synchronizing")?;
        check_laplacian(&self.relative_damping, n, "relative-damping")?;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.relative_damping[(i, j)] > 0.0 {
                    return Err(invalid("relative damping must be non-negative per branch"));
                }
            }
        }
        if self.ties.is_empty() && n > 1 {
            return Err(invalid("at least one tie-line output is required"));
        }
        for tie in &self.ties {
            for t in &tie.terms {
                if t.from == 0 || t.to == 0 || t.from > n || t.to > n {
                    return Err(invalid(format!(
                        "tie '{}' references machine outside 1..={n}",
                        tie.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_laplacian(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(invalid(format!("{what} matrix must be {n}x{n}")));
    }
    let scale = m.amax().max(1.0);
    for i in 0..n {
        let row_sum: f64 = m.row(i).sum();
        if row_sum.abs() > 1e-9 * scale {
            return Err(invalid(format!(
                "{what} matrix row {} sums to {row_sum}, expected 0",
                i + 1
            )));
        }
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(invalid(format!("{what} matrix must be symmetric")));
            }
        }
    }
    Ok(())
}

/// Builds the continuous `2n`-state swing model.
pub fn build_swing_surrogate(params: &SwingSurrogateParams) -> Result<Plant> {
    params.validate()?;
    let n = params.machines();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        let m = params.inertia[i];
        for j in 0..n {
            a[(n + i, j)] = -params.sync[(i, j)] / m;
            a[(n + i, n + j)] = -params.relative_damping[(i, j)] / m;
        }
        a[(n + i, n + i)] -= params.damping[i] / m;
        b[(n + i, i)] = params.input_gain[i] / m;
    }
    let speed_rows = if params.speed_outputs { n } else { 0 };
    let rows = params.ties.len() + speed_rows;
    let mut c = DMatrix::zeros(rows, 2 * n);
    let mut outputs = Vec::with_capacity(rows);
    for (r, tie) in params.ties.iter().enumerate() {
        for t in &tie.terms {
            c[(r, t.from - 1)] += t.weight;
            c[(r, t.to - 1)] -= t.weight;
        }
        outputs.push(format!("dP_{}", tie.name));
    }
    if params.speed_outputs {
        let total_inertia: f64 = params.inertia.iter().sum();
        for i in 0..n {
            let row = params.ties.len() + i;
            for j in 0..n {
                c[(row, n + j)] = -params.inertia[j] / total_inertia;
            }
            c[(row, n + i)] += 1.0;
            outputs.push(format!("dw_{}", i + 1));
        }
    }
    let model = StateSpace::new(a, b, c, DMatrix::zeros(rows, n), Domain::Continuous)?;
    let inputs = (1..=n).map(|i| format!("u_{i}")).collect();
    Plant::new(model, inputs, outputs, params.ties.len())
}

/// On-disk preset: machines, branch list and tie-line definitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwingPreset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    pub input_gain: Vec<f64>,
    #[serde(rename = "branch")]
    pub branches: Vec<Branch>,
    #[serde(rename = "tie")]
    pub ties: Vec<TieLine>,
    /// Coherent groups (1-based machine indices), informational.
    #[serde(default)]
    pub groups: Vec<Vec<usize>>,
}

impl SwingPreset {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn params(&self) -> Result<SwingSurrogateParams> {
        let n = self.inertia.len();
        let mut sync = DMatrix::zeros(n, n);
        let mut relative_damping = DMatrix::zeros(n, n);
        for br in &self.branches {
            if br.from == 0 || br.to == 0 || br.from > n || br.to > n || br.from == br.to {
                return Err(invalid(format!(
                    "branch {}-{} is not between two distinct machines in 1..={n}",
                    br.from, br.to
                )));
            }
            let (i, j) = (br.from - 1, br.to - 1);
            sync[(i, i)] += br.k;
            sync[(j, j)] += br.k;
            sync[(i, j)] -= br.k;
            sync[(j, i)] -= br.k;
            relative_damping[(i, i)] += br.d;
            relative_damping[(j, j)] += br.d;
            relative_damping[(i, j)] -= br.d;
            relative_damping[(j, i)] -= br.d;
        }
        Ok(SwingSurrogateParams {
            inertia: self.inertia.clone(),
            damping: self.damping.clone(),
            input_gain: self.input_gain.clone(),
            sync,
            relative_damping,
            ties: self.ties.clone(),
            speed_outputs: true,
        })
    }

    pub fn build(&self) -> Result<Plant> {
        build_swing_surrogate(&self.params()?)
    }
}

const TWO_AREA: &str = include_str!("../../presets/two_area.toml");
const TEN_MACHINE: &str = include_str!("../../presets/ten_machine.toml");

pub fn preset_names() -> &'static [&'static str] {
    &["two-area", "ten-machine"]
}

/// Shipped preset by name.
pub fn preset(name: &str) -> Result<SwingPreset> {
    match name {
        "two-area" => SwingPreset::from_toml(TWO_AREA),
        "ten-machine" => SwingPreset::from_toml(TEN_MACHINE),
        other => Err(invalid(format!(
            "unknown plant preset '{other}' (known: {})",
            preset_names().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_machine_has_no_swing_mode() {
        let params = SwingSurrogateParams {
            inertia: vec![2.0],
            damping: vec![0.5],
            input_gain: vec![1.0],
            sync: DMatrix::zeros(1, 1),
            relative_damping: DMatrix::zeros(1, 1),
            ties: vec![],
            speed_outputs: true,
        };
        let plant = build_swing_surrogate(&params).unwrap();
        let mut eig: Vec<f64> = plant
            .model
            .poles()
            .iter()
            .map(|z| {
                assert_eq!(z.im, 0.0);
                z.re
            })
            .collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eig[0] + 0.25).abs() < 1e-12);
        assert!(eig[1].abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sync_matrix() {
        let mut params = preset("two-area").unwrap().params().unwrap();
        params.sync[(0, 0)] += 1.0;
        assert!(build_swing_surrogate(&params).is_err());
        let mut params = preset("two-area").unwrap().params().unwrap();
        params.inertia[0] = 0.0;
        assert!(build_swing_surrogate(&params).is_err());
        let mut params = preset("two-area").unwrap().params().unwrap();
        params.ties.clear();
        assert!(build_swing_surrogate(&params).is_err());
    }

    #[test]
    fn presets_parse() {
        for name in preset_names() {
            let p = preset(name).unwrap().build().unwrap();
            assert!(p.tie_outputs >= 1);
        }
        assert!(preset("nope").is_err());
    }
}
