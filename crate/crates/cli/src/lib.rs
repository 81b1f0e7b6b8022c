//! `rrgraph` command line. [`run`] is the whole program; `main` only wires
//! it to the process streams.

mod commands;
mod format;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_STRUCTURAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "rrgraph", version, about = "Divisors, ranks and spectra on rationally weighted graphs")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Debug, Clone, Args)]
struct Global {
    /// configurations a rank or enumeration may examine
    #[arg(long, global = true, default_value_t = 1_000_000)]
    budget: u64,
    /// seed for every randomized step
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// add truncated decimal columns with this many digits (lossy)
    #[arg(long, global = true)]
    decimal: Option<usize>,
    /// also write the table as CSV to this path
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// base vertex, overriding the graph file
    #[arg(long, global = true)]
    base: Option<String>,
    /// divisor files hold values `p/q` instead of integer multipliers
    #[arg(long, global = true)]
    raw: bool,
    /// worker threads for independent radii
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Vertex masses, quanta, canonical divisor and global invariants
    Info { graph: PathBuf },
    /// Base-reduced representative of a divisor and the firing that reaches it
    Reduce { graph: PathBuf, divisor: PathBuf },
    /// Whether a divisor is equivalent to an effective one
    Winnable {
        graph: PathBuf,
        divisor: PathBuf,
        /// compare with a brute-force search over firings with |f| ≤ B
        #[arg(long)]
        brute: Option<i64>,
    },
    /// Rank of a divisor with an obstruction
    Rank { graph: PathBuf, divisor: PathBuf },
    /// Riemann-Roch identity r(D) − r(K − D) = deg D + e
    RrCheck { graph: PathBuf, divisor: PathBuf },
    /// Rank through the minimum over total orders (at most 6 vertices)
    OrdersRank { graph: PathBuf, divisor: PathBuf },
    /// Spectrum of the probabilistic Laplacian and inequality probes
    Spectral {
        graph: PathBuf,
        #[arg(long, value_enum)]
        probe: Option<Probe>,
        /// ε for the energy split probe
        #[arg(long, default_value = "1")]
        eps: String,
        /// ball radius around the base for the probes
        #[arg(long, default_value_t = 1)]
        radius: usize,
        /// random test functions per probe
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
    /// Infinite weighted graph presets and their exhaustion by balls
    Family {
        /// ray-double-exp, ray-geometric, tree-double-exp or lollipop
        preset: String,
        /// preset parameter: ratio=p/q, core=<graph file>, attach=<vertex>
        #[arg(long = "param", value_parser = parse_kv)]
        params: Vec<(String, String)>,
        #[command(subcommand)]
        action: FamilyAction,
    },
    /// Poincaré threshold constant A and its maximizer
    #[command(name = "threshold-A")]
    ThresholdA {
        #[arg(long, default_value_t = 0.7)]
        a_min: f64,
        #[arg(long, default_value_t = 3.0)]
        a_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Probe {
    /// energy split inequality for random f on the ball
    Lemma33,
    /// escape bound from the ball through its outer shell
    Lemma34,
    /// harmonic extension of random integer data on the ball
    Extension,
}

#[derive(Debug, Subcommand)]
enum FamilyAction {
    /// ρ_n, e_n, ratio43 (and λ_n with --gaps) for n = 1..=N
    Series {
        #[arg(long)]
        to: usize,
        #[arg(long)]
        gaps: bool,
    },
    /// r_n((D)_l) for n = l..=N with the per-radius Riemann-Roch check
    Converge {
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        gaps: bool,
    },
    /// Stabilized candidate values and the Riemann-Roch residual
    RrReport {
        #[command(flatten)]
        window: Window,
        /// second divisor D′ for the tail bound
        #[arg(long, requires = "alt_radius")]
        alt_divisor: Option<PathBuf>,
        #[arg(long, requires = "alt_divisor")]
        alt_radius: Option<usize>,
    },
    /// Per-order minimization on a small ball and ν differences past N(ε)
    Orders {
        #[arg(long, default_value_t = 3)]
        radius: usize,
        #[arg(long, default_value = "1/4")]
        eps: String,
        #[arg(long)]
        divisor: Option<PathBuf>,
    },
    /// Zero extension of the gap eigenfunction of G_n into G_N
    Extension {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        to: usize,
    },
}

#[derive(Debug, Args)]
struct Window {
    /// divisor on the ball of radius l, vertices named by family ids
    #[arg(long)]
    divisor: PathBuf,
    /// l: the support must lie in V_{l−1}
    #[arg(long)]
    support_radius: usize,
    #[arg(long)]
    to: usize,
    /// equal trailing values needed for a stabilized verdict
    #[arg(long, default_value_t = 2)]
    stable: usize,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    Ok((k.to_string(), v.to_string()))
}

/// Failure of a command, already mapped to an exit code.
#[derive(Debug)]
pub(crate) struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<rrgraph::Error> for Failure {
    fn from(e: rrgraph::Error) -> Self {
        use rrgraph::Error::*;
        let code = match &e {
            Parse { .. } | Invalid(_) | Precondition(_) => EXIT_INPUT,
            BudgetExceeded(_) => EXIT_BUDGET,
            Structural(_) | SizeLimit(_) | NoConvergence(_) => EXIT_STRUCTURAL,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        // a closed stdout (`| head`) is not an error of the command
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return Failure { code: EXIT_OK, message: String::new() };
        }
        Failure { code: EXIT_INPUT, message: e.to_string() }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure { code: EXIT_INPUT, message: e.to_string() }
    }
}

/// Runs one command line. Tables go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match commands::dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            if !f.message.is_empty() {
                let _ = writeln!(err, "error: {}", f.message);
            }
            f.code
        }
    }
}
