use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use turbogen::config::RunConfig;
use turbogen::io::Precision;
use turbogen::pipeline::{self, memory_cap};
use turbogen::verify::{verify, Mutation, VerifyOptions};

#[derive(Parser)]
#[command(name = "turbogen", version, about = "Quantum-circuit synthetic turbulence: generate, measure, diagnose")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate both spin circuits and dump their amplitudes.
    Generate(Common),
    /// Derive density, momentum, velocity and spin fields from the amplitudes.
    Measure(Common),
    /// Compute spectra, vorticity statistics, Q-R invariants and structure functions.
    Diagnose(Common),
    /// Run the desk-scale conformance suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Qubits of the verification grid (at most 12).
        #[arg(long, default_value_t = 6)]
        qubits: u32,
        #[arg(long, value_enum, hide = true)]
        mutate: Option<MutationArg>,
    },
    /// Write the gate lists of both spin circuits.
    ExportCircuit(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed_up: Option<u64>,
    #[arg(long)]
    seed_down: Option<u64>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Single,
    Double,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    MomentumSign,
}

impl Common {
    fn load(&self) -> turbogen::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed_up {
            cfg.seed_up = s;
        }
        if let Some(s) = self.seed_down {
            cfg.seed_down = s;
        }
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.clone();
        }
        if let Some(p) = self.precision {
            cfg.output.precision = match p {
                PrecisionArg::Single => Precision::Single,
                PrecisionArg::Double => Precision::Double,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> turbogen::Result<bool> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = c.load()?;
            let report = pipeline::generate(&cfg, &cfg.output.dir, memory_cap()?)?;
            for comp in &report.components {
                println!(
                    "{}: seed {} gates {} |psi|^2 = {:.15}",
                    comp.spin, comp.seed, comp.gates, comp.norm_sqr
                );
            }
            println!("generated {} ({} qubits) in {:.1} s -> {}", report.grid, report.n_q, report.wall_seconds, cfg.output.dir.display());
        }
        Command::Measure(c) => {
            let cfg = c.load()?;
            let r = pipeline::measure(&cfg, &cfg.output.dir, memory_cap()?)?;
            println!(
                "support radius |psi+|^2 {} -> density {} (ratio {:.2}); max |Im rho| {:.1e}; {} regularized points",
                r.support_psi_plus, r.support_density, r.support_ratio, r.density_max_imag, r.regularized
            );
            println!("measured in {:.1} s -> {}", r.wall_seconds, cfg.output.dir.display());
        }
        Command::Diagnose(c) => {
            let cfg = c.load()?;
            let s = pipeline::diagnose(&cfg, &cfg.output.dir, memory_cap()?)?;
            print!("{}", turbogen::io::to_toml(&s)?);
        }
        Command::Verify { common, qubits, mutate } => {
            let cfg = common.load()?;
            let opts = VerifyOptions {
                qubits,
                mutation: mutate.map(|MutationArg::MomentumSign| Mutation::MomentumSign),
                ..Default::default()
            };
            let report = verify(&cfg, &opts)?;
            print!("{}", report.to_text());
            return Ok(report.passed());
        }
        Command::ExportCircuit(c) => {
            let cfg = c.load()?;
            for path in pipeline::export_circuits(&cfg, &cfg.output.dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
