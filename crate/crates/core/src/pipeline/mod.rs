//! End-to-end orchestration: probe the plant, identify a MIMO model, pick
//! the inter-area mode and control loop, design the controller and
//! evaluate it in closed loop.
//!
//! Every stage is exposed on its own so the CLI can stop early. Errors
//! carry the name of the stage that raised them.

mod config;
mod csv_io;
mod report;

pub use config::{
    CaseConfig, ControllerConfig, EvaluationConfig, IdentConfig, ModesConfig, PeakSpec,
    PipelineConfig, PlantConfig, ProbeConfig, SamplingConfig,
};
pub use csv_io::{csv_export, csv_from_str, csv_import, csv_to_string};
pub use report::{
    residues_csv, AucRow, CaseReport, ControllerSummary, DelayRow, DelaySweep, InterAreaSummary,
    ModelSummary, PeakRow, Provenance, RunReport, SelectedLoop,
};

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::ident::{identify, select_order, FitReport, IdentOptions, IdentificationData, MimoTfModel};
use crate::metrics::{metric_auc, metric_peak, metric_relative_error, reduction_percent};
use crate::modal::{
    extract_modes, fft_dominant_frequency, inter_area_mode, modes_in_band, select_loop, ModeInfo,
    ResidueTable,
};
use crate::plant::{apply_disturbance, measurement_channel, DisturbanceSpec, MeasurementOptions, Plant};
use crate::wadc::{closed_loop_sim, design_wadc, spectral_radius, SimOptions, WadcDesign};
use crate::DataWindow;

/// Identification windows: one probing experiment per identified input, or
/// the recorded CSV windows named in the config.
pub fn simulate(cfg: &PipelineConfig, plant: Option<&Plant>) -> Result<IdentificationData> {
    stage("simulate", || {
        let (inputs, outputs) = ident_channels(cfg, plant)?;
        let windows = if !cfg.plant.data.is_empty() {
            cfg.plant
                .data
                .iter()
                .map(|p| csv_import(p))
                .collect::<Result<Vec<_>>>()?
        } else {
            let plant = plant.ok_or_else(|| invalid("no plant to probe"))?;
            probe_windows(cfg, plant, &inputs, &outputs)?
        };
        IdentificationData::new(windows, inputs, outputs)
    })
}

fn ident_channels(cfg: &PipelineConfig, plant: Option<&Plant>) -> Result<(Vec<String>, Vec<String>)> {
    let id = &cfg.identification;
    let inputs = match (id.inputs.is_empty(), plant) {
        (false, _) => id.inputs.clone(),
        (true, Some(p)) => p.inputs.clone(),
        (true, None) => return Err(invalid("identification.inputs is required without a plant")),
    };
    let outputs = match (id.outputs.is_empty(), plant) {
        (false, _) => id.outputs.clone(),
        (true, Some(p)) => p.tie_names().to_vec(),
        (true, None) => return Err(invalid("identification.outputs is required without a plant")),
    };
    Ok((inputs, outputs))
}

fn probe_windows(
    cfg: &PipelineConfig,
    plant: &Plant,
    inputs: &[String],
    outputs: &[String],
) -> Result<Vec<DataWindow>> {
    let s = &cfg.sampling;
    let record = s.window_offset + s.window_length + s.sample_time();
    let probe = &cfg.probe;
    if probe.start + probe.duration > record {
        return Err(invalid(format!(
            "probe ends at {} s, after the {record} s record",
            probe.start + probe.duration
        )));
    }
    inputs
        .iter()
        .enumerate()
        .map(|(i, input)| {
            let spec = DisturbanceSpec {
                kind: probe.kind,
                channel: input.clone(),
                start: probe.start,
                duration: probe.duration,
                amplitude: probe.amplitude,
                seed: derive_seed(cfg.seed, 1, i),
            };
            let raw = apply_disturbance(plant, &spec, record, s.raw_sample_time)?;
            let opts = MeasurementOptions {
                decimation: s.decimation,
                window_length: s.window_length,
                window_offset: s.window_offset,
                noise_std: s.noise_std,
                noise_channels: Some(outputs.to_vec()),
                disturbance_start: probe.start,
                seed: derive_seed(cfg.seed, 2, i),
            };
            measurement_channel(&raw, &opts)
        })
        .collect()
}

fn derive_seed(seed: u64, stream: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream << 32)
        .wrapping_add(index as u64 + 1)
}

#[derive(Debug, Clone)]
pub struct Identified {
    pub model: MimoTfModel,
    pub fit: FitReport,
    pub candidates: Vec<FitReport>,
}

/// Fits at the single configured order, or runs the elbow rule over the
/// candidate list.
pub fn identify_stage(cfg: &PipelineConfig, data: &IdentificationData) -> Result<Identified> {
    stage("identify", || {
        let id = &cfg.identification;
        let opts = IdentOptions {
            refine: id.refine_options(),
            skip_refine: id.skip_refine,
        };
        let (k, candidates) = if id.orders.len() == 1 {
            (id.orders[0], Vec::new())
        } else {
            select_order(data, &id.orders, &opts)?
        };
        let (model, fit) = identify(data, k, &opts)?;
        info!(
            "identified order {k}, output error {:.3e}",
            fit.total_error
        );
        Ok(Identified {
            model,
            fit,
            candidates,
        })
    })
}

#[derive(Debug, Clone)]
pub struct ModalAnalysis {
    pub modes: Vec<ModeInfo>,
    pub inter_area: ModeInfo,
    pub in_band: usize,
    pub residues: ResidueTable,
    pub selected: (usize, usize),
}

/// Mode table, inter-area mode, residues and the selected loop.
pub fn modes_stage(cfg: &PipelineConfig, model: &MimoTfModel) -> Result<ModalAnalysis> {
    let (modes, inter_area, residues, in_band) = stage("modes", || {
        let band = (cfg.modes.band[0], cfg.modes.band[1]);
        let modes = extract_modes(model)?;
        let in_band = modes_in_band(&modes, band).len();
        let (mode, table) = inter_area_mode(model, &modes, band)?;
        info!(
            "inter-area mode {:.4} Hz, damping {:.4}",
            mode.frequency_hz, mode.damping_ratio
        );
        Ok((modes, mode, table, in_band))
    })?;
    let selected = stage("select-loop", || Ok(select_loop(&residues)))?;
    Ok(ModalAnalysis {
        modes,
        inter_area,
        in_band,
        residues,
        selected,
    })
}

pub fn design_stage(
    cfg: &PipelineConfig,
    model: &MimoTfModel,
    selected: (usize, usize),
) -> Result<WadcDesign> {
    stage("design", || {
        let d = design_wadc(model, selected, &cfg.controller.wadc_options())?;
        info!(
            "controller on {} -> {}: {} Riccati iterations",
            d.input, d.output, d.dlqr.iterations
        );
        Ok(d)
    })
}

/// Closed-loop traces of one case with and without the controller.
pub struct CaseRun {
    pub report: CaseReport,
    pub with: DataWindow,
    pub without: DataWindow,
}

fn sim_options(cfg: &PipelineConfig, enabled: bool) -> SimOptions {
    SimOptions {
        horizon: cfg.evaluation.horizon,
        noise_std: cfg.evaluation.noise_std,
        seed: derive_seed(cfg.seed, 3, 0),
        enabled,
    }
}

fn auc_interval(cfg: &PipelineConfig, case: &CaseConfig) -> (f64, f64) {
    (
        cfg.evaluation.auc_from.unwrap_or(case.disturbance.start),
        cfg.evaluation.horizon,
    )
}

pub fn evaluate_case(
    cfg: &PipelineConfig,
    plant: &Plant,
    design: &WadcDesign,
    case: &CaseConfig,
) -> Result<CaseRun> {
    stage("evaluate", || {
        let with = closed_loop_sim(
            plant,
            design,
            &case.disturbance,
            &sim_options(cfg, cfg.controller.enabled),
        )?;
        let without = closed_loop_sim(plant, design, &case.disturbance, &sim_options(cfg, false))?;
        let (from, to) = auc_interval(cfg, case);
        let channels: Vec<String> = if case.channels.is_empty() {
            plant.tie_names().to_vec()
        } else {
            case.channels.clone()
        };
        let auc = channels
            .iter()
            .map(|ch| {
                let a_without = metric_auc(&without, ch, from, to)?;
                let a_with = metric_auc(&with, ch, from, to)?;
                Ok(AucRow {
                    channel: ch.clone(),
                    without: a_without,
                    with: a_with,
                    reduction_percent: reduction_percent(a_without, a_with),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let peaks = case
            .peaks
            .iter()
            .map(|p| {
                let p_without = metric_peak(&without, &p.channel, p.time)?;
                let p_with = metric_peak(&with, &p.channel, p.time)?;
                Ok(PeakRow {
                    channel: p.channel.clone(),
                    time: p.time,
                    without: p_without,
                    with: p_with,
                    reduction_percent: reduction_percent(p_without, p_with),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for row in &auc {
            info!(
                "case {}: {} AUC reduced by {:.1}%",
                case.name, row.channel, row.reduction_percent
            );
        }
        Ok(CaseRun {
            report: CaseReport {
                name: case.name.clone(),
                disturbance: case.disturbance.clone(),
                auc_from: from,
                auc_to: to,
                auc,
                peaks,
                trace_without: trace_name(&case.name, "without"),
                trace_with: trace_name(&case.name, "with"),
            },
            with,
            without,
        })
    })
}

fn trace_name(case: &str, which: &str) -> String {
    let safe: String = case
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("traces/{safe}_{which}.csv")
}

/// Relative error of the sweep channel against the run with the smallest
/// delay, one closed-loop run per entry. Delays add to the design's own
/// loop delay. Runs execute in parallel; rows come back sorted by delay.
pub fn delay_sweep(
    cfg: &PipelineConfig,
    plant: &Plant,
    design: &WadcDesign,
    case: &CaseConfig,
    delays: &[f64],
) -> Result<(DelaySweep, Vec<DataWindow>)> {
    stage("delay-sweep", || {
        if delays.is_empty() {
            return Err(invalid("delay list is empty"));
        }
        if let Some(d) = delays.iter().find(|d| !(**d >= 0.0)) {
            return Err(invalid(format!("delay {d} must be non-negative")));
        }
        let channel = cfg
            .evaluation
            .sweep_channel
            .clone()
            .unwrap_or_else(|| design.output.clone());
        let mut sorted = delays.to_vec();
        sorted.sort_by(f64::total_cmp);
        let reference_delay = sorted[0];
        let opts = sim_options(cfg, cfg.controller.enabled);
        let traces = sorted
            .par_iter()
            .map(|d| {
                closed_loop_sim(
                    plant,
                    &design.with_delay(design.loop_delay + d),
                    &case.disturbance,
                    &opts,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let (from, to) = auc_interval(cfg, case);
        let reference = traces[0].channel(&channel)?;
        let rows = sorted
            .iter()
            .zip(&traces)
            .enumerate()
            .map(|(i, (d, tr))| {
                Ok(DelayRow {
                    delay: *d,
                    relative_error: metric_relative_error(reference, tr.channel(&channel)?)?,
                    auc: metric_auc(tr, &channel, from, to)?,
                    trace: format!("traces/delay_{i}.csv"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((
            DelaySweep {
                case: case.name.clone(),
                channel,
                reference_delay,
                auc_from: from,
                auc_to: to,
                rows,
            },
            traces,
        ))
    })
}

/// Everything a full run produces.
pub struct RunOutput {
    pub report: RunReport,
    pub probes: IdentificationData,
    pub model: MimoTfModel,
    pub design: WadcDesign,
    pub cases: Vec<CaseRun>,
    pub delay_traces: Vec<DataWindow>,
}

/// Runs every stage. Evaluation needs a plant model; with recorded data
/// alone the run stops after the design.
pub fn run(cfg: &PipelineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = unix_now();
    let plant = stage("simulate", || cfg.build_plant())?;
    let probes = simulate(cfg, plant.as_ref())?;
    let ident = identify_stage(cfg, &probes)?;
    let modal = modes_stage(cfg, &ident.model)?;
    let design = design_stage(cfg, &ident.model, modal.selected)?;

    let mut cases = Vec::new();
    let mut sweep = None;
    let mut delay_traces = Vec::new();
    if let Some(plant) = &plant {
        for case in &cfg.evaluation.cases {
            cases.push(evaluate_case(cfg, plant, &design, case)?);
        }
        if let (Some(first), false) = (cfg.evaluation.cases.first(), cfg.evaluation.delays.is_empty()) {
            let (table, traces) = delay_sweep(cfg, plant, &design, first, &cfg.evaluation.delays)?;
            sweep = Some(table);
            delay_traces = traces;
        }
    }

    let fft = stage("modes", || fft_check(cfg, &probes, &design, &cases))?;
    let (m, p) = modal.selected;
    let report = RunReport {
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: started,
            finished_unix: unix_now(),
        },
        model: ModelSummary {
            order: ident.model.order(),
            sample_time: ident.model.sample_time(),
            inputs: ident.model.inputs().to_vec(),
            outputs: ident.model.outputs().to_vec(),
            denominator: ident.model.denominator().coeffs().to_vec(),
            poles: ident.model.poles()?,
            fit: ident.fit,
            candidates: ident.candidates,
        },
        modes: modal.modes,
        inter_area: InterAreaSummary {
            mode: modal.inter_area,
            band_hz: cfg.modes.band,
            in_band: modal.in_band,
            fft_frequency_hz: fft.as_ref().map(|f| f.0),
            fft_source: fft.map(|f| f.1),
        },
        selected_loop: SelectedLoop {
            output: design.output.clone(),
            input: design.input.clone(),
            output_index: m,
            input_index: p,
            normalized_residue: modal.residues.normalized[m][p],
        },
        residues: modal.residues,
        controller: ControllerSummary {
            enabled: cfg.controller.enabled,
            gains: design.gain(),
            riccati_iterations: design.dlqr.iterations,
            closed_loop_spectral_radius: spectral_radius(
                &(design.realization.a() - design.realization.b() * &design.dlqr.gain),
            ),
            design: design.to_record(),
        },
        cases: cases.iter().map(|c| c.report.clone()).collect(),
        delay_sweep: sweep,
    };
    Ok(RunOutput {
        report,
        probes,
        model: ident.model,
        design,
        cases,
        delay_traces,
    })
}

/// Dominant frequency of the selected output in the first open-loop case,
/// falling back to the probing window of the selected input.
fn fft_check(
    cfg: &PipelineConfig,
    probes: &IdentificationData,
    design: &WadcDesign,
    cases: &[CaseRun],
) -> Result<Option<(f64, String)>> {
    let band = (cfg.modes.band[0], cfg.modes.band[1]);
    let (signal, ts, source) = if let Some(c) = cases.first() {
        let w = &c.without;
        let start = ((c.report.disturbance.start - w.start_time()) / w.sample_time()).ceil();
        let k0 = start.max(0.0) as usize;
        (
            w.channel(&design.output)?[k0.min(w.len())..].to_vec(),
            w.sample_time(),
            format!("{} without control, case {}", design.output, c.report.name),
        )
    } else {
        let p = design.selected.1;
        let w = &probes.windows[p.min(probes.windows.len() - 1)];
        (
            w.channel(&design.output)?.to_vec(),
            w.sample_time(),
            format!("{} in the {} probing window", design.output, design.input),
        )
    };
    match fft_dominant_frequency(&signal, ts, band) {
        Ok(f) => Ok(Some((f, source))),
        Err(e) => {
            log::warn!("FFT cross-check skipped: {e}");
            Ok(None)
        }
    }
}

/// Runs the pipeline and writes the report and traces under `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunReport> {
    let out = run(cfg)?;
    stage("write", || write_artifacts(&out, out_dir))?;
    Ok(out.report)
}

pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("traces"))?;
    let r = &out.report;
    std::fs::write(dir.join("report.json"), r.to_json())?;
    std::fs::write(dir.join("report.txt"), r.to_text())?;
    write_json(&dir.join("model.json"), &out.model.to_record())?;
    write_json(&dir.join("design.json"), &out.design.to_record())?;
    std::fs::write(dir.join("residues.csv"), residues_csv(&r.residues))?;
    for (w, input) in out.probes.windows.iter().zip(&out.probes.inputs) {
        csv_export(w, &dir.join(format!("traces/probe_{input}.csv")))?;
    }
    for c in &out.cases {
        csv_export(&c.with, &dir.join(&c.report.trace_with))?;
        csv_export(&c.without, &dir.join(&c.report.trace_without))?;
    }
    if let Some(sw) = &r.delay_sweep {
        for (row, tr) in sw.rows.iter().zip(&out.delay_traces) {
            csv_export(tr, &dir.join(&row.trace))?;
        }
    }
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| invalid(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}
