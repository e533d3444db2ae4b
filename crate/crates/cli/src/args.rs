use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

const EXPERIMENTS: &str = "\
Experiments:
  harvest-curve        capacitor charge over time for several vibration frequencies
  duration-sweep       superframe completion rate by beacon interval and slot count
  packet-size-sweep    completion rate by interval, packet scale and slot count
  contention-compare   usable-slot rate of slotted CSMA/CA against round robin
  oracle-check         simulated completion rates against the steady-state formula
  tsook-trace          pulse arrivals of interleaved TS-OOK transmissions
  frame                hex dump of an encoded MAC frame

Exit status: 0 success, 1 runtime failure, 2 usage error.";

#[derive(Debug, Parser)]
#[command(name = "nanomac", version, about = "Energy-harvesting nano-network MAC simulator", after_help = EXPERIMENTS)]
pub struct Cli {
    /// Worker threads for sweep points (default: one per core)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capacitor charge over time for several vibration frequencies
    HarvestCurve(HarvestArgs),
    /// Superframe completion rate by beacon interval and slot count
    DurationSweep(SweepArgs),
    /// Completion rate by interval, packet scale and slot count
    PacketSizeSweep(SweepArgs),
    /// Usable-slot rate of slotted CSMA/CA against round robin
    ContentionCompare(ContentionArgs),
    /// Simulated completion rates against the steady-state formula
    OracleCheck(OracleArgs),
    /// Pulse arrivals of interleaved TS-OOK transmissions
    TsookTrace(TsookArgs),
    /// Hex dump of an encoded MAC frame
    Frame(FrameArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::HarvestCurve(_) => "harvest-curve",
            Command::DurationSweep(_) => "duration-sweep",
            Command::PacketSizeSweep(_) => "packet-size-sweep",
            Command::ContentionCompare(_) => "contention-compare",
            Command::OracleCheck(_) => "oracle-check",
            Command::TsookTrace(_) => "tsook-trace",
            Command::Frame(_) => "frame",
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON file with experiment parameters; flags override it
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed; written into output file names
    #[arg(long)]
    pub seed: Option<u64>,

    /// Directory for output files
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    #[command(flatten)]
    pub common: Common,

    /// Cycle frequencies in Hz
    #[arg(long, value_delimiter = ',')]
    pub frequencies: Option<Vec<f64>>,

    /// Simulated time in seconds
    #[arg(long)]
    pub horizon: Option<u64>,

    /// Sampling step in seconds
    #[arg(long)]
    pub step: Option<u64>,

    /// Also write the event trace
    #[arg(long)]
    pub trace: bool,

    /// Also write an SVG plot
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,

    /// Beacon intervals in minutes
    #[arg(long, value_delimiter = ',')]
    pub durations: Option<Vec<u32>>,

    /// Concurrent slot counts, each in 1..=15
    #[arg(long, value_delimiter = ',')]
    pub slots: Option<Vec<usize>>,

    /// Packet scales, each in [0.5, 1.0]
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,

    /// Superframes simulated per grid point
    #[arg(long)]
    pub superframes: Option<u64>,

    /// Harvesting rate in pJ per minute
    #[arg(long)]
    pub harvest_rate: Option<f64>,

    /// Contend for slots with this backoff exponent instead of granting them
    /// through the beacon address list
    #[arg(long, value_name = "BE")]
    pub contention: Option<u8>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub grid: GridArgs,

    /// Also write the event trace
    #[arg(long)]
    pub trace: bool,

    /// Also write an SVG plot
    #[arg(long)]
    pub svg: bool,

    /// Also write the per-superframe ledger
    #[arg(long)]
    pub ledger: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct ContentionArgs {
    #[command(flatten)]
    pub common: Common,

    /// Number of nodes
    #[arg(long)]
    pub population: Option<usize>,

    /// Slot request rates in (0, 1]
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,

    /// Trials per request rate
    #[arg(long)]
    pub trials: Option<u64>,

    /// Backoff exponent, window 2^BE
    #[arg(long, value_name = "BE")]
    pub backoff_exponent: Option<u8>,

    /// Also write an SVG plot
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct TsookArgs {
    #[command(flatten)]
    pub common: Common,

    /// Bit strings, one per transmitter
    #[arg(long, value_delimiter = ',')]
    pub sequences: Option<Vec<String>>,

    /// Start offsets in femtoseconds, one per transmitter
    #[arg(long, value_delimiter = ',')]
    pub offsets: Option<Vec<u64>>,

    /// Transmitter-receiver distance in millimetres
    #[arg(long)]
    pub distance_mm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Beacon,
    Data,
    Ack,
    Command,
}

#[derive(Debug, Args)]
pub struct FrameArgs {
    /// Frame kind to encode
    #[arg(long, value_enum)]
    pub kind: KindArg,
}
