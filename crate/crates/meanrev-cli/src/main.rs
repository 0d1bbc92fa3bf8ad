//! Flag parsing and config-file merging. Precedence: flags > config file >
//! defaults. The resolved configuration is saved to the output directory so
//! any run can be replayed exactly.

use clap::{Args, Parser, Subcommand};
use meanrev_cli::config::*;
use meanrev_cli::run;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "meanrev",
    about = "Sparse mean-reverting portfolio extraction, covariance selection, and convergence-trading backtests",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dense canonical decomposition ranked by predictability.
    Decompose(DecomposeArgs),
    /// Cardinality-constrained portfolios for k = 1..K.
    Sparse(SparseArgs),
    /// Penalized inverse-covariance estimation and dependence graph.
    Covsel(CovselArgs),
    /// Rolling-window convergence-trading backtest.
    Backtest(BacktestArgs),
    /// Seeded synthetic fixture panels.
    Synth(SynthArgs),
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> T {
    match path {
        None => T::default(),
        Some(p) => {
            let body = std::fs::read_to_string(p).unwrap_or_else(|e| {
                eprintln!("error: cannot read config {}: {e}", p.display());
                std::process::exit(2);
            });
            serde_json::from_str(&body).unwrap_or_else(|e| {
                eprintln!("error: malformed config {}: {e}", p.display());
                std::process::exit(2);
            })
        }
    }
}

macro_rules! merge {
    ($dst:expr, $($field:expr => $opt:expr),+ $(,)?) => {
        $(if let Some(v) = $opt { $field = v; })+
        let _ = &$dst;
    };
}

#[derive(Args)]
struct EstimationArgs {
    /// Transition estimator: ols | lasso | lasso-frac | endogenous.
    #[arg(long)]
    estimation: Option<TransitionArg>,
    /// Covariance estimator: sample | covsel.
    #[arg(long)]
    covariance: Option<CovarianceArg>,
    /// LASSO penalty for --estimation lasso.
    #[arg(long)]
    gamma: Option<f64>,
    /// Zero fraction for --estimation lasso-frac.
    #[arg(long)]
    zero_frac: Option<f64>,
    /// Noise level for --estimation endogenous.
    #[arg(long)]
    sigma: Option<f64>,
    /// Penalty for --covariance covsel.
    #[arg(long)]
    rho: Option<f64>,
    /// Disable per-window centering.
    #[arg(long)]
    no_center: bool,
}

impl EstimationArgs {
    fn apply(self, cfg: &mut EstimationConfig) {
        merge!(cfg,
            cfg.transition => self.estimation,
            cfg.covariance => self.covariance,
            cfg.gamma => self.gamma,
            cfg.zero_frac => self.zero_frac,
            cfg.sigma => self.sigma,
            cfg.rho => self.rho,
        );
        if self.no_center {
            cfg.center = false;
        }
    }
}

#[derive(Args)]
struct DecomposeArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// box-tiao | johansen.
    #[arg(long)]
    flavor: Option<FlavorArg>,
    /// Sampling interval in years.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    no_center: bool,
    /// First-difference the panel before decomposing.
    #[arg(long)]
    difference: bool,
    /// Forward-fill missing cells instead of dropping rows.
    #[arg(long)]
    forward_fill: bool,
    /// Emit the load report as JSON.
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct SparseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest cardinality (default: number of assets).
    #[arg(short, long)]
    k: Option<usize>,
    /// greedy | sdp | oracle.
    #[arg(long)]
    method: Option<MethodArg>,
    /// minimize (mean reversion) | maximize (momentum).
    #[arg(long)]
    sense: Option<SenseArg>,
    #[command(flatten)]
    estimation: EstimationArgs,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    difference: bool,
    #[arg(long)]
    forward_fill: bool,
    #[arg(long)]
    report: bool,
    /// Also run the other solver and emit a comparison table.
    #[arg(long)]
    compare: bool,
    /// Emit greedy sweep timings over growing asset counts.
    #[arg(long)]
    timing: bool,
    /// Backward swap refinement after the forward pass.
    #[arg(long)]
    refine: bool,
}

#[derive(Args)]
struct CovselArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Penalty on the l1 term.
    #[arg(long)]
    rho: Option<f64>,
    /// Comma-separated penalties for the sweep table.
    #[arg(long, value_delimiter = ',')]
    rho_sweep: Option<Vec<f64>>,
    /// Smallest cluster size worth reporting.
    #[arg(long)]
    min_cluster: Option<usize>,
    /// Exclude the diagonal from the penalty.
    #[arg(long)]
    no_diagonal_penalty: bool,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    forward_fill: bool,
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct BacktestArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Estimation window length in rows.
    #[arg(long)]
    window: Option<usize>,
    /// Window step in rows.
    #[arg(long)]
    step: Option<usize>,
    /// Out-of-sample rows traded per window (default: step).
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    method: Option<MethodArg>,
    #[command(flatten)]
    estimation: EstimationArgs,
    /// Round-trip bid-ask spread in price units.
    #[arg(long)]
    bid_ask: Option<f64>,
    /// Riskless rate per year.
    #[arg(long)]
    r: Option<f64>,
    /// Fund-flow parameter.
    #[arg(long)]
    f: Option<f64>,
    /// Initial wealth.
    #[arg(long)]
    w0: Option<f64>,
    /// Confidence level for leverage reporting.
    #[arg(long)]
    alpha_conf: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    forward_fill: bool,
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// var | walks | spread | block | coint | white.
    #[arg(long)]
    kind: Option<SynthKind>,
    /// RNG seed (required: synthetic generation is stochastic).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(short, long)]
    m: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Spectral radius for --kind var.
    #[arg(long)]
    radius: Option<f64>,
    /// VAR order (1 or 2) for --kind var.
    #[arg(long)]
    var_order: Option<usize>,
    #[arg(long)]
    sigma_walk: Option<f64>,
    #[arg(long)]
    sigma_spread: Option<f64>,
    /// OU speed for --kind spread / coint.
    #[arg(long)]
    lambda: Option<f64>,
    /// Walk drift scale for --kind spread.
    #[arg(long)]
    drift: Option<f64>,
    /// Block size for --kind block.
    #[arg(long)]
    block: Option<usize>,
    /// Within-block correlation for --kind block.
    #[arg(long)]
    correlation: Option<f64>,
}

fn require_path(value: PathBuf, what: &str) -> PathBuf {
    if value.as_os_str().is_empty() {
        eprintln!("error: {what} is required (flag or config file)");
        std::process::exit(2);
    }
    value
}

fn resolve(cli: Cli) -> RunConfig {
    match cli.command {
        Command::Decompose(a) => {
            let mut c: DecomposeConfig = load_config(&a.config);
            merge!(c,
                c.input => a.input,
                c.out => a.out,
                c.flavor => a.flavor,
                c.dt => a.dt,
            );
            if a.no_center {
                c.center = false;
            }
            c.difference |= a.difference;
            c.forward_fill |= a.forward_fill;
            c.report |= a.report;
            c.input = require_path(c.input, "--input");
            c.out = require_path(c.out, "--out");
            RunConfig::Decompose(c)
        }
        Command::Sparse(a) => {
            let mut c: SparseConfig = load_config(&a.config);
            merge!(c,
                c.input => a.input,
                c.out => a.out,
                c.k => a.k,
                c.method => a.method,
                c.sense => a.sense,
                c.dt => a.dt,
            );
            a.estimation.apply(&mut c.estimation);
            c.difference |= a.difference;
            c.forward_fill |= a.forward_fill;
            c.report |= a.report;
            c.compare |= a.compare;
            c.timing |= a.timing;
            c.refine |= a.refine;
            c.input = require_path(c.input, "--input");
            c.out = require_path(c.out, "--out");
            RunConfig::Sparse(c)
        }
        Command::Covsel(a) => {
            let mut c: CovselConfig = load_config(&a.config);
            merge!(c,
                c.input => a.input,
                c.out => a.out,
                c.rho => a.rho,
                c.rho_sweep => a.rho_sweep,
                c.min_cluster => a.min_cluster,
                c.dt => a.dt,
            );
            c.no_diagonal_penalty |= a.no_diagonal_penalty;
            c.forward_fill |= a.forward_fill;
            c.report |= a.report;
            c.input = require_path(c.input, "--input");
            c.out = require_path(c.out, "--out");
            RunConfig::Covsel(c)
        }
        Command::Backtest(a) => {
            let mut c: BacktestConfig = load_config(&a.config);
            merge!(c,
                c.input => a.input,
                c.out => a.out,
                c.window => a.window,
                c.step => a.step,
                c.horizon => a.horizon,
                c.k => a.k,
                c.method => a.method,
                c.bid_ask => a.bid_ask,
                c.r => a.r,
                c.f => a.f,
                c.w0 => a.w0,
                c.alpha_conf => a.alpha_conf,
                c.dt => a.dt,
            );
            a.estimation.apply(&mut c.estimation);
            c.forward_fill |= a.forward_fill;
            c.report |= a.report;
            c.input = require_path(c.input, "--input");
            c.out = require_path(c.out, "--out");
            RunConfig::Backtest(c)
        }
        Command::Synth(a) => {
            let mut c: SynthConfig = load_config(&a.config);
            let had_seed = a.seed.is_some() || a.config.is_some();
            merge!(c,
                c.out => a.out,
                c.kind => a.kind,
                c.seed => a.seed,
                c.n => a.n,
                c.m => a.m,
                c.dt => a.dt,
                c.radius => a.radius,
                c.var_order => a.var_order,
                c.sigma_walk => a.sigma_walk,
                c.sigma_spread => a.sigma_spread,
                c.lambda => a.lambda,
                c.drift => a.drift,
                c.block => a.block,
                c.correlation => a.correlation,
            );
            if !had_seed {
                eprintln!("error: --seed is required for synth (stochastic command)");
                std::process::exit(2);
            }
            c.out = require_path(c.out, "--out");
            RunConfig::Synth(c)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let config = resolve(cli);
    if let Err(e) = run(&config) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
