use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hopnet::approx::{Activation, DEFAULT_GRID, DEFAULT_INTERVAL, DEFAULT_WINDOW};
use hopnet::compress::DEFAULT_K;
use hopnet::protocol::DEFAULT_PAYLOAD_CAP;

mod error;
mod infer;
mod input;
mod keys;
mod serve;
mod tools;

use error::CliError;

/// Encrypted inference for small quantized networks.
#[derive(Parser, Debug)]
#[command(name = "hopnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate secret, public and evaluation keys.
    Keygen {
        /// Parameter file; the built-in defaults when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overwrite existing key files.
        #[arg(long)]
        force: bool,
    },
    /// Encrypt, evaluate and decrypt in one process.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Per-layer HOP CSV.
        #[arg(long)]
        hops_report: Option<PathBuf>,
        /// Largest input magnitude for the capacity check; max |x| of the input by default.
        #[arg(long)]
        input_bound: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate encrypted requests over TCP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        params: PathBuf,
        /// Public evaluation keys (`eval.key` from keygen).
        #[arg(long)]
        eval_keys: PathBuf,
        #[arg(long)]
        listen: String,
        #[arg(long, default_value_t = DEFAULT_PAYLOAD_CAP)]
        max_payload: u64,
        /// Exit after the first connection closes.
        #[arg(long)]
        once: bool,
    },
    /// Send an encrypted input to a server and decrypt the answer.
    Client {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        connect: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Power-of-two polynomial approximation of an activation.
    Approx {
        #[arg(long = "fn")]
        function: Activation,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = DEFAULT_INTERVAL)]
        interval: f64,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Exponent steps scanned around each rounded coefficient.
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: i32,
    },
    /// Prune and quantize a weights file; prints a sparsity report.
    Compress {
        #[arg(long)]
        model: PathBuf,
        /// Fraction of weights kept per layer.
        #[arg(long)]
        prune: Option<f64>,
        /// Fraction of surviving weights snapped to powers of two.
        #[arg(long)]
        quantize: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: u32,
        #[arg(long, default_value_t = hopnet::encode::DEFAULT_PRECISION_BITS)]
        precision: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Static HOP projection for a model or a built-in MNIST configuration.
    Hops {
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        config: Option<Config>,
        #[arg(long, default_value_t = 5)]
        maps: usize,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = hopnet::encode::DEFAULT_PRECISION_BITS)]
        precision: u32,
        /// Seed for the synthetic MNIST weights.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Config {
    /// Dense weights and square activations.
    Cryptonets,
    /// Pruned power-of-two weights and polynomial Swish.
    Faster,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Keygen { params, out, seed, force } => keys::keygen(params.as_deref(), &out, seed, force),
        Command::Infer { model, keys, input, hops_report, input_bound, seed } => {
            infer::infer(&model, &keys, &input, hops_report.as_deref(), input_bound, seed)
        }
        Command::Serve { model, params, eval_keys, listen, max_payload, once } => {
            serve::serve(&model, &params, &eval_keys, &listen, max_payload, once)
        }
        Command::Client { keys, input, connect, seed } => infer::client(&keys, &input, &connect, seed),
        Command::Approx { function, degree, interval, grid, window } => {
            tools::approx(function, degree, interval, grid, window)
        }
        Command::Compress { model, prune, quantize, k, precision, out } => {
            tools::compress(&model, prune, quantize, k, precision, out.as_deref())
        }
        Command::Hops { config, maps, model, precision, seed } => match (config, model) {
            (_, Some(model)) => tools::hops_model(&model, precision),
            (Some(config), None) => tools::hops_config(config == Config::Cryptonets, maps, precision, seed),
            (None, None) => Err(CliError::Usage("either --config or --model is required".into())),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
