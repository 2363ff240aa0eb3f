//! Command-line front end: run scenarios, sweeps and generate traces.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cellswitch::harness::{self, write_json, Scenario};
use cellswitch::traffic::{synth_trace, TraceMetadata};
use cellswitch::{Error, Policy};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cellswitch",
    version,
    about = "Energy-aware small-cell switching experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Comma-separated subset of aao,es,mlc,thesis.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<Policy>>,
    #[arg(long)]
    b_th: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record per-policy wall-clock time (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

impl Overrides {
    fn apply(self, s: &mut Scenario) {
        if let Some(p) = self.policies {
            s.policies = p;
        }
        if let Some(b) = self.b_th {
            s.b_th = b;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if self.timing {
            s.record_wall_clock = true;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write results.csv, summary.csv, metadata.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a scenario for several small-cell counts and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated small-cell counts, ascending.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a synthetic trace CSV and a `.json` metadata sidecar.
    GenTrace {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 144)]
        slots: usize,
        #[arg(long)]
        sbs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &Path, overrides: Overrides) -> cellswitch::Result<Scenario> {
    let mut s = Scenario::from_path(config)?;
    overrides.apply(&mut s);
    s.validate()?;
    Ok(s)
}

fn execute(cli: Cli) -> cellswitch::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            overrides,
        } => {
            let scenario = load(&config, overrides)?;
            let run = harness::run_scenario(&scenario)?;
            harness::write_run(&out, &run)?;
            for r in &run.reports {
                println!(
                    "{:<7} energy {:.1} J  saved {:.1} J  co2 saved {:.6} kg",
                    r.policy.name(),
                    r.total_energy,
                    r.energy_saved_vs_aao,
                    r.co2_saved_kg
                );
            }
        }
        Command::Sweep {
            config,
            n,
            out,
            overrides,
        } => {
            let template = load(&config, overrides)?;
            let rows = harness::sweep(&n, &template)?;
            harness::write_sweep(&out, &template, &n, &rows)?;
            println!(
                "{} rows written to {}",
                rows.len(),
                out.join("sweep.csv").display()
            );
        }
        Command::GenTrace {
            seed,
            slots,
            sbs,
            out,
        } => {
            let scenario = Scenario::new(sbs);
            let kinds = scenario.kinds();
            let trace = synth_trace(seed, slots, sbs, &kinds)?;
            trace.write_csv(BufWriter::new(File::create(&out)?))?;
            let meta = TraceMetadata {
                source: "synthetic".into(),
                normalization: "none (generated in [0, 1])".into(),
                slot_minutes: trace.slot_minutes(),
                n_slots: slots,
                n_sbs: sbs,
                seed: Some(seed),
                mapping: None,
                raw_peaks: Vec::new(),
            };
            write_json(&(meta, kinds), &out.with_extension("json"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Contract(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
