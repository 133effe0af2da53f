//! Run report: machine-readable JSON and a plain-text rendering.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ident::FitReport;
use crate::modal::{ModeInfo, ResidueTable};
use crate::plant::DisturbanceSpec;
use crate::wadc::WadcDesignRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    /// Seconds since the Unix epoch.
    pub started_unix: f64,
    pub finished_unix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub order: usize,
    pub sample_time: f64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Shared denominator, ascending powers of `z^-1`.
    pub denominator: Vec<f64>,
    pub poles: Vec<Complex64>,
    pub fit: FitReport,
    /// Fits of every candidate order tried.
    pub candidates: Vec<FitReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterAreaSummary {
    pub mode: ModeInfo,
    pub band_hz: [f64; 2],
    /// Number of oscillatory modes inside the band.
    pub in_band: usize,
    /// Dominant frequency of the open-loop trace of the selected output.
    pub fft_frequency_hz: Option<f64>,
    pub fft_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedLoop {
    pub output: String,
    pub input: String,
    pub output_index: usize,
    pub input_index: usize,
    pub normalized_residue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub enabled: bool,
    pub gains: Vec<f64>,
    pub riccati_iterations: usize,
    /// Spectral radius of `A - B K` on the loop realization.
    pub closed_loop_spectral_radius: f64,
    pub design: WadcDesignRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucRow {
    pub channel: String,
    pub without: f64,
    pub with: f64,
    pub reduction_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    pub channel: String,
    pub time: f64,
    pub without: f64,
    pub with: f64,
    pub reduction_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub disturbance: DisturbanceSpec,
    /// Integration interval of the areas.
    pub auc_from: f64,
    pub auc_to: f64,
    pub auc: Vec<AucRow>,
    pub peaks: Vec<PeakRow>,
    pub trace_without: String,
    pub trace_with: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRow {
    /// Delay added to the design's loop delay, in seconds.
    pub delay: f64,
    pub relative_error: f64,
    pub auc: f64,
    pub trace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySweep {
    pub case: String,
    pub channel: String,
    pub reference_delay: f64,
    pub auc_from: f64,
    pub auc_to: f64,
    /// Sorted by delay.
    pub rows: Vec<DelayRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub model: ModelSummary,
    pub modes: Vec<ModeInfo>,
    pub inter_area: InterAreaSummary,
    pub residues: ResidueTable,
    pub selected_loop: SelectedLoop,
    pub controller: ControllerSummary,
    pub cases: Vec<CaseReport>,
    pub delay_sweep: Option<DelaySweep>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Copy with the timestamps zeroed, for comparing runs.
    pub fn without_timestamps(&self) -> Self {
        let mut r = self.clone();
        r.provenance.started_unix = 0.0;
        r.provenance.finished_unix = 0.0;
        r
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.provenance;
        let _ = writeln!(s, "wadc run report");
        let _ = writeln!(s, "config sha256  {}", p.config_hash);
        let _ = writeln!(s, "seed           {}", p.seed);
        let _ = writeln!(
            s,
            "wall time      {:.2} s",
            p.finished_unix - p.started_unix
        );

        let m = &self.model;
        let _ = writeln!(s, "\nIdentified model");
        let _ = writeln!(
            s,
            "  order {}  T = {} s  {} inputs x {} outputs",
            m.order,
            m.sample_time,
            m.inputs.len(),
            m.outputs.len()
        );
        let _ = writeln!(
            s,
            "  output error {:.4e}  refinement iterations {}  converged {}",
            m.fit.total_error, m.fit.iterations, m.fit.converged
        );
        for c in &m.candidates {
            let _ = writeln!(s, "  candidate k = {:<3} error {:.4e}", c.order, c.total_error);
        }

        let _ = writeln!(s, "\nModes");
        let _ = writeln!(s, "  {:>10} {:>10} {:>24}", "f [Hz]", "zeta", "z");
        for md in &self.modes {
            let _ = writeln!(
                s,
                "  {:>10.4} {:>10.4} {:>11.6}{:+.6}i",
                md.frequency_hz, md.damping_ratio, md.discrete_pole.re, md.discrete_pole.im
            );
        }
        let ia = &self.inter_area;
        let _ = writeln!(
            s,
            "\nInter-area mode  {:.4} Hz, damping {:.4} ({} in-band)",
            ia.mode.frequency_hz, ia.mode.damping_ratio, ia.in_band
        );
        if let (Some(f), Some(src)) = (ia.fft_frequency_hz, &ia.fft_source) {
            let _ = writeln!(
                s,
                "  FFT check      {f:.4} Hz on {src} (difference {:.4} Hz)",
                (f - ia.mode.frequency_hz).abs()
            );
        }

        let r = &self.residues;
        let _ = writeln!(s, "\nNormalized residues (rows: outputs, columns: inputs)");
        let _ = write!(s, "  {:>8}", "");
        for i in &r.inputs {
            let _ = write!(s, " {i:>8}");
        }
        let _ = writeln!(s);
        for (o, row) in r.outputs.iter().zip(&r.normalized) {
            let _ = write!(s, "  {o:>8}");
            for v in row {
                let _ = write!(s, " {v:>8.4}");
            }
            let _ = writeln!(s);
        }
        let sl = &self.selected_loop;
        let _ = writeln!(s, "Selected loop  {} -> {}", sl.input, sl.output);

        let c = &self.controller;
        let _ = writeln!(s, "\nController (enabled: {})", c.enabled);
        let gains: Vec<String> = c.gains.iter().map(|g| format!("{g:.6}")).collect();
        let _ = writeln!(s, "  K = [{}]", gains.join(", "));
        let _ = writeln!(
            s,
            "  Riccati iterations {}  spectral radius of A - BK {:.6}",
            c.riccati_iterations, c.closed_loop_spectral_radius
        );

        for case in &self.cases {
            let _ = writeln!(
                s,
                "\nCase {}: {:?} on {} at {} s",
                case.name, case.disturbance.kind, case.disturbance.channel, case.disturbance.start
            );
            let _ = writeln!(
                s,
                "  {:>10} {:>14} {:>14} {:>12}",
                "AUC", "without", "with", "reduction"
            );
            for row in &case.auc {
                let _ = writeln!(
                    s,
                    "  {:>10} {:>14.6e} {:>14.6e} {:>11.2}%",
                    row.channel, row.without, row.with, row.reduction_percent
                );
            }
            for row in &case.peaks {
                let _ = writeln!(
                    s,
                    "  peak {} at {} s: {:.6e} without, {:.6e} with ({:.2}%)",
                    row.channel, row.time, row.without, row.with, row.reduction_percent
                );
            }
        }

        if let Some(sw) = &self.delay_sweep {
            let _ = writeln!(
                s,
                "\nDelay sweep on {} (case {}, reference {} s)",
                sw.channel, sw.case, sw.reference_delay
            );
            let _ = writeln!(s, "  {:>10} {:>16} {:>14}", "delay [s]", "relative error", "AUC");
            for row in &sw.rows {
                let _ = writeln!(
                    s,
                    "  {:>10.3} {:>16.6} {:>14.6e}",
                    row.delay, row.relative_error, row.auc
                );
            }
        }
        s
    }
}

/// Residue table as CSV: one row per output, magnitude and normalized
/// value per input.
pub fn residues_csv(table: &ResidueTable) -> String {
    let mut s = String::from("output");
    for i in &table.inputs {
        let _ = write!(s, ",{i}_re,{i}_im,{i}_normalized");
    }
    s.push('\n');
    for (o, (raw, norm)) in table
        .outputs
        .iter()
        .zip(table.raw.iter().zip(&table.normalized))
    {
        s.push_str(o);
        for (r, n) in raw.iter().zip(norm) {
            let _ = write!(s, ",{},{},{}", r.re, r.im, n);
        }
        s.push('\n');
    }
    s
}
