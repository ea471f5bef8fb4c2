//! `wavessm` command line: data generation, training, evaluation and the
//! modal, polynomial-readout, oscillator and topology reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod commands;
mod manifest;

pub use manifest::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "wavessm", version, about = "Diagonal state-space models as oscillator networks")]
pub struct Cli {
    /// Seed for every random choice made by the command
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for batch-parallel work (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (for `train`, the checkpoint file)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print a machine-readable summary on stdout
    #[arg(long, global = true)]
    json: bool,

    /// Also write gnuplot script stubs next to the CSV reports
    #[arg(long, global = true)]
    gnuplot: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Generate the synthetic sinusoid-in-noise dataset
    GenData(GenDataArgs),
    /// Train a model and write a checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint on a data split
    Eval(EvalArgs),
    /// Modal energies, class-separation ranking, wave interactions and fields
    AnalyzeModes(AnalyzeArgs),
    /// Polynomial readout fit and margin-explained analysis
    CarlemanReport(CarlemanArgs),
    /// Simulate a ring oscillator network and write its phase raster
    Simulate(SimulateArgs),
    /// Coupling topology induced by an S4D spectrum
    Topology(TopologyArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDataArgs {
    /// JSON dataset spec; defaults are used for missing fields
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// JSON with optional `model` and `training` sections
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding train.csv and test.csv
    #[arg(long)]
    pub data: PathBuf,
    /// Train on these labels only, e.g. `1,2`
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<usize>>,
    /// Override the number of epochs
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSelection {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Which split to use
    #[arg(long, default_value = "test", value_parser = ["train", "test"])]
    pub split: String,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: DataSelection,
    /// Only report on correctly classified samples
    #[arg(long)]
    pub correct_only: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: DataSelection,
    /// Mode pair `i,j` (1-based) for interactions; repeatable
    #[arg(long = "pair", value_parser = parse_pair)]
    pub pairs: Vec<(usize, usize)>,
    /// Pair rendered in field.csv; without it the field is the phase raster
    #[arg(long, value_parser = parse_pair)]
    pub field_pair: Option<(usize, usize)>,
    /// Position within the split of the sample rendered in field.csv
    #[arg(long, default_value_t = 0)]
    pub field_sample: usize,
    /// Include misclassified samples
    #[arg(long)]
    pub all_samples: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: DataSelection,
    /// Truncation orders for the margin analysis
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub orders: Vec<usize>,
    /// Degree of the polynomial reported in fit.json
    #[arg(long, default_value_t = 8)]
    pub degree: usize,
    /// Fit domain, `lo:hi` or `auto`
    #[arg(long, default_value = "-4:4", allow_hyphen_values = true)]
    pub domain: String,
    /// Node weighting, `uniform` or `data`
    #[arg(long, default_value = "uniform")]
    pub weighting: String,
    /// Chebyshev sample nodes
    #[arg(long, default_value_t = 257)]
    pub nodes: usize,
    /// Include misclassified samples
    #[arg(long)]
    pub all_samples: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Number of oscillators
    #[arg(long = "N", default_value_t = 48)]
    pub n: usize,
    /// Links on each side of a node
    #[arg(long, default_value_t = 6)]
    pub neighborhood: usize,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Homogeneous phase lag in radians
    #[arg(long, default_value_t = 2.827433388230814, allow_hyphen_values = true)]
    pub lag: f64,
    /// Common natural frequency
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub omega: f64,
    /// Time per raster row
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 600)]
    pub steps: usize,
    /// Start from a traveling wave with this many cycles around the ring
    /// (plus small noise) instead of random phases
    #[arg(long)]
    pub wave: Option<usize>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyArgs {
    /// lin, inv or fout
    #[arg(long, default_value = "lin")]
    pub variant: String,
    #[arg(long = "N", default_value_t = 64)]
    pub n: usize,
    /// Index origin of the eigenvalue formula, `one` or `zero`
    #[arg(long, default_value = "one")]
    pub origin: String,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected i,j but got '{s}'"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad mode '{a}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad mode '{b}'"))?;
    if a == 0 || b == 0 {
        return Err("modes are 1-based".into());
    }
    Ok((a, b))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
