use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lhc_core::sketch::{DEFAULT_BATCH_WIDTH, DEFAULT_BLOCK_OVERPROVISION, DEFAULT_GAMMA};

/// Sweeps, size curves and aggregation rounds for sketch + index gradient compression.
#[derive(Debug, Parser)]
#[command(name = "homagg", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Base seed; every output is deterministic given it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Parameters per sketch input row.
    #[arg(long, global = true, default_value_t = DEFAULT_BATCH_WIDTH)]
    pub batch_width: u32,
    #[arg(long, global = true, value_enum, default_value_t = IndexArg::Bitmap)]
    pub index: IndexArg,
    /// Bloom false-positive rate. Defaults to the size-optimal rate for the data.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Cells per candidate when sizing from the data.
    #[arg(long, global = true, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Output file; stdout for CSV commands when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexArg {
    Bitmap,
    Bloom,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ValuesArg {
    Normal,
    Uniform,
    Int,
}

/// Synthetic gradient shape shared by `gen`, `sweep` and `throughput`.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Number of parameters.
    #[arg(long, default_value_t = 1 << 20)]
    pub n: usize,
    /// Named sparsity preset: ncf, lstm, vgg19 or bert.
    #[arg(long, conflicts_with = "sparsity")]
    pub preset: Option<String>,
    /// Fraction of zero parameters.
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[arg(long, value_enum, default_value_t = ValuesArg::Normal)]
    pub values: ValuesArg,
    /// Bit width of integer values.
    #[arg(long, default_value_t = 16)]
    pub bits: u32,
    /// Place zeros in contiguous runs of this length instead of uniformly.
    #[arg(long)]
    pub run: Option<usize>,
}

/// How many sketch rows to use.
#[derive(Debug, Clone, Args)]
pub struct SizeArgs {
    /// Explicit row count.
    #[arg(long, conflicts_with = "fraction")]
    pub rows: Option<u32>,
    /// Sketch cells as a fraction of the parameter count.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Split the sketch into independent blocks of this many rows.
    #[arg(long, num_args = 0..=1, default_missing_value = "4096")]
    pub block_rows: Option<u32>,
    /// Cells per candidate in blocked layout when sizing from the data.
    #[arg(long, default_value_t = DEFAULT_BLOCK_OVERPROVISION)]
    pub overprovision: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recovery quality across compressed sizes (CSV).
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// Sketch size grid as fractions of the original size, within (0, 2].
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        /// Seeds per grid point.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        block_rows: Option<u32>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Theoretical compressed size against the lower bound (CSV).
    Theory {
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        bit_widths: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1,9,99,999")]
        lambdas: Vec<f64>,
        /// Non-zero count n.
        #[arg(long, default_value_t = 1e4)]
        nonzeros: f64,
    },
    /// Wall-clock time of compress, merge and recover per size (CSV).
    Throughput {
        #[arg(long, value_delimiter = ',', default_value = "1000000,2000000,4000000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.304)]
        sparsity: f64,
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        /// Repetitions per size; the minimum is reported.
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Write a synthetic gradient file.
    Gen {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Compress a gradient file.
    Compress {
        input: PathBuf,
        #[command(flatten)]
        size: SizeArgs,
    },
    /// Recover a compressed file into a gradient file.
    Recover { input: PathBuf },
    /// Run the aggregator.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7070")]
        bind: SocketAddr,
        /// Submissions per round.
        #[arg(long)]
        workers: u16,
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        /// Exit after this many completed rounds.
        #[arg(long)]
        rounds: Option<u64>,
    },
    /// Take part in one aggregation round.
    Worker {
        #[arg(long)]
        server: SocketAddr,
        #[arg(long)]
        id: u16,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        round: u64,
        /// Expected non-zeros across all workers; sizes a shared Bloom filter.
        #[arg(long)]
        expected_nonzeros: Option<u64>,
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        #[command(flatten)]
        size: SizeArgs,
    },
    /// Aggregate gradient files in memory: compress, merge, recover.
    Allreduce {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        size: SizeArgs,
    },
}
