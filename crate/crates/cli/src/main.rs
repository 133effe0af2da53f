use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wadc_core::pipeline::{self, csv_export, residues_csv, write_json, PipelineConfig};
use wadc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "wadc", version, about = "Measurement-based wide-area damping control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the probing experiments and write the measured windows.
    Simulate(Common),
    /// Identify the MIMO transfer-function model.
    Identify(Common),
    /// Mode table and residues of the identified model.
    Modes(Common),
    /// Pick the control loop with the largest residue.
    SelectLoop(Common),
    /// Design the DLQR + Kalman controller.
    Design(Common),
    /// Full pipeline with closed-loop evaluation and report.
    Run(Common),
    /// Closed-loop runs over a list of added loop delays.
    DelaySweep {
        #[command(flatten)]
        common: Common,
        /// Delays in seconds, comma separated; defaults to the config list.
        #[arg(long, value_delimiter = ',')]
        delays: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Pipeline config file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Use the shipped config of a preset plant instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(PipelineConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => PipelineConfig::load(path)?,
            (None, Some(name)) => PipelineConfig::for_preset(name)?,
            (None, None) => unreachable!("clap requires one of them"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("wadc-out"));
        std::fs::create_dir_all(&out)?;
        Ok((cfg, out))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(c) => simulate(&c),
        Command::Identify(c) => identify(&c),
        Command::Modes(c) => modes(&c, false),
        Command::SelectLoop(c) => modes(&c, true),
        Command::Design(c) => design(&c),
        Command::Run(c) => run(&c),
        Command::DelaySweep { common, delays } => delay_sweep(&common, &delays),
    }
}

fn simulate(c: &Common) -> Result<()> {
    let (cfg, out) = c.load()?;
    let plant = cfg.build_plant().map_err(|e| e.in_stage("simulate"))?;
    let data = pipeline::simulate(&cfg, plant.as_ref())?;
    let dir = out.join("traces");
    std::fs::create_dir_all(&dir)?;
    for (w, input) in data.windows.iter().zip(&data.inputs) {
        let path = dir.join(format!("probe_{input}.csv"));
        csv_export(w, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn identified(cfg: &PipelineConfig) -> Result<pipeline::Identified> {
    let plant = cfg.build_plant().map_err(|e| e.in_stage("simulate"))?;
    let data = pipeline::simulate(cfg, plant.as_ref())?;
    pipeline::identify_stage(cfg, &data)
}

fn identify(c: &Common) -> Result<()> {
    let (cfg, out) = c.load()?;
    let id = identified(&cfg)?;
    write_json(&out.join("model.json"), &id.model.to_record())?;
    write_json(&out.join("fit.json"), &id.fit)?;
    println!(
        "order {}  output error {:.4e}  iterations {}",
        id.fit.order, id.fit.total_error, id.fit.iterations
    );
    for cand in &id.candidates {
        println!("  candidate k = {} error {:.4e}", cand.order, cand.total_error);
    }
    println!("wrote {}", out.join("model.json").display());
    Ok(())
}

fn modes(c: &Common, select_only: bool) -> Result<()> {
    let (cfg, out) = c.load()?;
    let id = identified(&cfg)?;
    let modal = pipeline::modes_stage(&cfg, &id.model)?;
    let (m, p) = modal.selected;
    let outputs = id.model.outputs();
    let inputs = id.model.inputs();
    if !select_only {
        println!("{:>10} {:>10}", "f [Hz]", "zeta");
        for md in &modal.modes {
            println!("{:>10.4} {:>10.4}", md.frequency_hz, md.damping_ratio);
        }
        println!(
            "inter-area mode {:.4} Hz, damping {:.4}",
            modal.inter_area.frequency_hz, modal.inter_area.damping_ratio
        );
        write_json(&out.join("modes.json"), &modal.modes)?;
        std::fs::write(out.join("residues.csv"), residues_csv(&modal.residues))?;
    }
    println!("selected loop {} -> {}", inputs[p], outputs[m]);
    write_json(
        &out.join("selected_loop.json"),
        &serde_json::json!({ "output": outputs[m], "input": inputs[p], "output_index": m, "input_index": p }),
    )?;
    Ok(())
}

fn design(c: &Common) -> Result<()> {
    let (cfg, out) = c.load()?;
    let id = identified(&cfg)?;
    let modal = pipeline::modes_stage(&cfg, &id.model)?;
    let d = pipeline::design_stage(&cfg, &id.model, modal.selected)?;
    write_json(&out.join("design.json"), &d.to_record())?;
    println!("loop {} -> {}", d.input, d.output);
    println!("K = {:?}", d.gain());
    println!("wrote {}", out.join("design.json").display());
    Ok(())
}

fn run(c: &Common) -> Result<()> {
    let (cfg, out) = c.load()?;
    let report = pipeline::run_pipeline(&cfg, &out)?;
    print!("{}", report.to_text());
    println!("\nartifacts in {}", out.display());
    Ok(())
}

fn delay_sweep(c: &Common, delays: &[f64]) -> Result<()> {
    let (cfg, out) = c.load()?;
    let delays = if delays.is_empty() {
        cfg.evaluation.delays.clone()
    } else {
        delays.to_vec()
    };
    let case = cfg
        .evaluation
        .cases
        .first()
        .ok_or_else(|| Error::InvalidInput("delay sweep needs at least one evaluation case".into()))?
        .clone();
    let plant = cfg
        .build_plant()
        .map_err(|e| e.in_stage("simulate"))?
        .ok_or_else(|| Error::InvalidInput("delay sweep needs a plant model".into()))?;
    let id = identified(&cfg)?;
    let modal = pipeline::modes_stage(&cfg, &id.model)?;
    let d = pipeline::design_stage(&cfg, &id.model, modal.selected)?;
    let (table, traces) = pipeline::delay_sweep(&cfg, &plant, &d, &case, &delays)?;
    write_sweep(&out, &table, &traces)?;
    println!("{:>10} {:>16} {:>14}", "delay [s]", "relative error", "AUC");
    for row in &table.rows {
        println!(
            "{:>10.3} {:>16.6} {:>14.6e}",
            row.delay, row.relative_error, row.auc
        );
    }
    Ok(())
}

fn write_sweep(
    out: &Path,
    table: &pipeline::DelaySweep,
    traces: &[wadc_core::DataWindow],
) -> Result<()> {
    std::fs::create_dir_all(out.join("traces"))?;
    write_json(&out.join("delay_sweep.json"), table)?;
    for (row, tr) in table.rows.iter().zip(traces) {
        csv_export(tr, &out.join(&row.trace))?;
    }
    Ok(())
}
