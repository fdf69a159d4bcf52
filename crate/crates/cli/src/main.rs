use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topowave::{execute, preset_catalog, preset_toml, ExperimentKind, RunOptions};

#[derive(Parser)]
#[command(name = "topowave", version, about = "Giant atoms in an SSH waveguide: spectra, bound states, couplings and dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Real-space eigenvalues as a function of detuning
    Spectrum(RunArgs),
    /// Bound-state energies and photon amplitudes of one atom
    Boundstate(RunArgs),
    /// Bandgap (virtual-photon) couplings between atoms
    SwCouplings(RunArgs),
    /// Markovian coherent and dissipative couplings across a band
    MarkovScan(RunArgs),
    /// Atom populations over time
    Evolve(RunArgs),
    /// Photon occupation of every site over time
    PhotonMap(RunArgs),
    /// Excitation transfer between two atoms
    Transfer(RunArgs),
    /// List the built-in configs, or print one as TOML
    Presets {
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config file (TOML, or JSON when the extension is .json)
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Start from a built-in config instead of a file
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Prefix for every output file
    #[arg(long, value_name = "PREFIX")]
    out: Option<String>,
    /// Worker threads for parameter sweeps
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Seed used for disorder when the config gives none
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override a config leaf, e.g. waveguide.delta=0.2 or atoms.0.nodes.1.cell=12
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl From<RunArgs> for RunOptions {
    fn from(a: RunArgs) -> Self {
        RunOptions {
            config: a.config,
            preset: a.preset,
            out: a.out,
            jobs: a.jobs,
            seed: a.seed,
            set: a.set,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Boundstate(a) => (ExperimentKind::Boundstate, a),
        Command::SwCouplings(a) => (ExperimentKind::SwCouplings, a),
        Command::MarkovScan(a) => (ExperimentKind::MarkovScan, a),
        Command::Evolve(a) => (ExperimentKind::Evolve, a),
        Command::PhotonMap(a) => (ExperimentKind::PhotonMap, a),
        Command::Transfer(a) => (ExperimentKind::Transfer, a),
        Command::Presets { show } => {
            return match show {
                None => {
                    print!("{}", preset_catalog());
                    ExitCode::SUCCESS
                }
                Some(name) => match preset_toml(&name) {
                    Ok(text) => {
                        print!("{text}");
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        e.exit_code()
                    }
                },
            };
        }
    };
    match execute(kind, &args.into()) {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            for o in &manifest.outputs {
                println!("{} ({} rows)", o.path, o.rows);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
