//! Pipeline configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::ident::RefineOptions;
use crate::plant::{preset, DisturbanceKind, DisturbanceSpec, Plant, SwingPreset};
use crate::wadc::WadcOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    /// Where artifacts are written; the CLI `--out` flag overrides it.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub plant: PlantConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub identification: IdentConfig,
    #[serde(default)]
    pub modes: ModesConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

/// Exactly one of `preset` and `file` names the plant. `data` replaces
/// the simulated probing experiments with recorded CSV windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub preset: Option<String>,
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub data: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Simulation step of the raw record.
    pub raw_sample_time: f64,
    pub decimation: usize,
    /// Identification window length in seconds.
    pub window_length: f64,
    pub window_offset: f64,
    /// Standard deviation of noise added to the measured outputs.
    pub noise_std: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            raw_sample_time: 0.0032,
            decimation: 10,
            window_length: 20.0,
            window_offset: 0.0,
            noise_std: 0.0,
        }
    }
}

impl SamplingConfig {
    pub fn sample_time(&self) -> f64 {
        self.raw_sample_time * self.decimation as f64
    }
}

/// One probing experiment per identified input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub kind: DisturbanceKind,
    pub start: f64,
    pub duration: f64,
    pub amplitude: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            kind: DisturbanceKind::NoiseProbe,
            start: 1.0,
            duration: 15.0,
            amplitude: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentConfig {
    /// Candidate orders; a single entry fixes the order.
    pub orders: Vec<usize>,
    /// Inputs to identify; empty means all plant inputs.
    pub inputs: Vec<String>,
    /// Outputs to identify; empty means all tie-line outputs.
    pub outputs: Vec<String>,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub stability_margin: f64,
    pub skip_refine: bool,
}

impl Default for IdentConfig {
    fn default() -> Self {
        let r = RefineOptions::default();
        Self {
            orders: vec![5],
            inputs: Vec::new(),
            outputs: Vec::new(),
            max_iters: r.max_iters,
            rel_tol: r.rel_tol,
            stability_margin: r.stability_margin,
            skip_refine: false,
        }
    }
}

impl IdentConfig {
    pub fn refine_options(&self) -> RefineOptions {
        RefineOptions {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            stability_margin: self.stability_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    /// Inter-area band in Hz.
    pub band: [f64; 2],
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self { band: [0.1, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// When false the closed-loop runs keep the controller output at zero.
    pub enabled: bool,
    pub rho: f64,
    pub process_noise: f64,
    pub measurement_noise: f64,
    pub saturate: bool,
    pub output_limit: f64,
    pub loop_delay: f64,
    pub riccati_tol: f64,
    pub riccati_max_iters: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let w = WadcOptions::default();
        Self {
            enabled: true,
            rho: w.rho,
            process_noise: w.process_noise,
            measurement_noise: w.measurement_noise,
            saturate: true,
            output_limit: w.output_limit.unwrap_or(0.1),
            loop_delay: w.loop_delay,
            riccati_tol: w.riccati_tol,
            riccati_max_iters: w.riccati_max_iters,
        }
    }
}

impl ControllerConfig {
    pub fn wadc_options(&self) -> WadcOptions {
        WadcOptions {
            rho: self.rho,
            process_noise: self.process_noise,
            measurement_noise: self.measurement_noise,
            output_limit: self.saturate.then_some(self.output_limit),
            loop_delay: self.loop_delay,
            riccati_tol: self.riccati_tol,
            riccati_max_iters: self.riccati_max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakSpec {
    pub channel: String,
    pub time: f64,
}

/// A disturbance scenario evaluated with and without the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    pub disturbance: DisturbanceSpec,
    /// Channels whose area under the curve is reported; empty means every
    /// tie-line output.
    #[serde(default)]
    pub channels: Vec<String>,
    #[serde(default)]
    pub peaks: Vec<PeakSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub horizon: f64,
    /// Noise added to the controller's measurement.
    pub noise_std: f64,
    /// Areas are integrated over `[auc_from, horizon]`; `None` starts at
    /// the disturbance.
    pub auc_from: Option<f64>,
    pub cases: Vec<CaseConfig>,
    /// Extra loop delays of the sweep in seconds (run on the first case).
    pub delays: Vec<f64>,
    /// Channel compared in the sweep; `None` means the measured output.
    pub sweep_channel: Option<String>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            horizon: 25.0,
            noise_std: 0.0,
            auc_from: None,
            cases: Vec::new(),
            delays: Vec::new(),
            sweep_channel: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative plant paths resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(f) = &cfg.plant.file {
            if f.is_relative() {
                cfg.plant.file = Some(base.join(f));
            }
        }
        for d in cfg.plant.data.iter_mut() {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }

    /// Default configuration for a shipped preset.
    pub fn for_preset(name: &str) -> Result<Self> {
        let text = match name {
            "two-area" => include_str!("../../configs/two_area.toml"),
            "ten-machine" => include_str!("../../configs/ten_machine.toml"),
            other => return Err(invalid(format!("no default config for preset '{other}'"))),
        };
        Self::from_toml_str(text)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.plant.preset, &self.plant.file) {
            (Some(_), Some(_)) => {
                return Err(invalid("plant: give either `preset` or `file`, not both"))
            }
            (None, None) if self.plant.data.is_empty() => {
                return Err(invalid("plant: need `preset`, `file` or recorded `data`"))
            }
            _ => {}
        }
        let s = &self.sampling;
        if !(s.raw_sample_time > 0.0) || !(s.window_length > 0.0) || !(s.window_offset >= 0.0) {
            return Err(invalid(
                "sampling: raw_sample_time and window_length must be positive",
            ));
        }
        if s.decimation < 1 {
            return Err(invalid("sampling: decimation must be at least 1"));
        }
        if !(s.noise_std >= 0.0) {
            return Err(invalid("sampling: noise_std must be non-negative"));
        }
        let p = &self.probe;
        if !(p.duration > 0.0) || !(p.start >= 0.0) || !p.amplitude.is_finite() {
            return Err(invalid("probe: duration must be positive and start non-negative"));
        }
        if self.identification.orders.is_empty() {
            return Err(invalid("identification: at least one order is required"));
        }
        let nyquist = 0.5 / s.sample_time();
        let [lo, hi] = self.modes.band;
        if !(lo > 0.0 && hi > lo && hi < nyquist) {
            return Err(invalid(format!(
                "modes: band [{lo}, {hi}] must lie within (0, {nyquist}) Hz"
            )));
        }
        let c = &self.controller;
        if !(c.rho > 0.0) || !(c.measurement_noise > 0.0) || !(c.process_noise >= 0.0) {
            return Err(invalid(
                "controller: rho and measurement_noise must be positive, process_noise non-negative",
            ));
        }
        if !(c.output_limit > 0.0) || !(c.loop_delay >= 0.0) {
            return Err(invalid(
                "controller: output_limit must be positive and loop_delay non-negative",
            ));
        }
        let e = &self.evaluation;
        if !(e.horizon > 0.0) || !(e.noise_std >= 0.0) {
            return Err(invalid("evaluation: horizon must be positive"));
        }
        for case in &e.cases {
            case.disturbance
                .validate()
                .map_err(|err| invalid(format!("evaluation case '{}': {err}", case.name)))?;
            if case.disturbance.start + case.disturbance.duration > e.horizon {
                return Err(invalid(format!(
                    "evaluation case '{}' ends after the horizon",
                    case.name
                )));
            }
        }
        if let Some(d) = e.delays.iter().find(|d| !(**d >= 0.0)) {
            return Err(invalid(format!("evaluation: delay {d} must be non-negative")));
        }
        Ok(())
    }

    /// The plant model, if the config names one.
    pub fn build_plant(&self) -> Result<Option<Plant>> {
        if let Some(name) = &self.plant.preset {
            return preset(name)?.build().map(Some);
        }
        if let Some(path) = &self.plant.file {
            let text = read_file(path)?;
            return SwingPreset::from_toml(&text)?.build().map(Some);
        }
        Ok(None)
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_validate() {
        for name in ["two-area", "ten-machine"] {
            PipelineConfig::for_preset(name).unwrap();
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let r = PipelineConfig::from_toml_str("[plant]\npreset = \"two-area\"\ncolour = 1\n");
        assert!(matches!(r, Err(Error::Parse(_))));
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = PipelineConfig::from_toml_str("[plant]\npreset = \"two-area\"\n").unwrap();
        assert_eq!(c.sampling.decimation, 10);
        assert!((c.sampling.sample_time() - 0.032).abs() < 1e-15);
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = [
            "[plant]\n",
            "[plant]\npreset = \"two-area\"\n[sampling]\ndecimation = 0\n",
            "[plant]\npreset = \"two-area\"\n[modes]\nband = [0.1, 50.0]\n",
            "[plant]\npreset = \"two-area\"\n[controller]\nrho = 0.0\n",
        ];
        for text in bad {
            assert!(PipelineConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::from_toml_str("[plant]\npreset = \"two-area\"\n").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 9;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
