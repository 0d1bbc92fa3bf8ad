//! Run configuration: serializable, re-executable descriptions of each
//! subcommand. Precedence when resolving: command-line flags override the
//! config file, which overrides built-in defaults. Every run writes its
//! resolved config next to the outputs so it can be replayed exactly.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlavorArg {
    BoxTiao,
    Johansen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Greedy,
    Sdp,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SenseArg {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionArg {
    Ols,
    /// LASSO with an explicit penalty (--gamma).
    Lasso,
    /// LASSO with the penalty set to zero out a coefficient fraction (--zero-frac).
    LassoFrac,
    /// Endogenous model A'A = I - sigma Gamma^-1 (--sigma).
    Endogenous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceArg {
    Sample,
    /// Graphical-lasso precision at --rho, inverted.
    Covsel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Stationary VAR panel (--var-order 1 or 2).
    Var,
    /// Independent random walks.
    Walks,
    /// Planted two-asset OU spread among random walks.
    Spread,
    /// Gaussian panel with one correlated block.
    Block,
    /// Two cointegrated assets.
    Coint,
    /// I.i.d. noise panel.
    White,
}

fn default_dt() -> f64 {
    1.0 / 252.0
}

fn default_true() -> bool {
    true
}

/// Estimation knobs shared by the sparse and backtest commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    pub transition: TransitionArg,
    pub covariance: CovarianceArg,
    /// LASSO penalty (transition = lasso).
    pub gamma: f64,
    /// Target zero fraction (transition = lasso-frac).
    pub zero_frac: f64,
    /// Endogenous noise level (transition = endogenous).
    pub sigma: f64,
    /// Covariance-selection penalty (covariance = covsel).
    pub rho: f64,
    #[serde(default = "default_true")]
    pub center: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            transition: TransitionArg::Ols,
            covariance: CovarianceArg::Sample,
            gamma: 0.0,
            zero_frac: 0.2,
            sigma: 0.01,
            rho: 0.1,
            center: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    pub flavor: FlavorArg,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_true")]
    pub center: bool,
    /// First-difference the panel before decomposing.
    pub difference: bool,
    pub forward_fill: bool,
    pub report: bool,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            input: PathBuf::new(),
            out: PathBuf::new(),
            flavor: FlavorArg::BoxTiao,
            dt: default_dt(),
            center: true,
            difference: false,
            forward_fill: false,
            report: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    /// Largest cardinality in the ladder; 0 means every asset.
    pub k: usize,
    pub method: MethodArg,
    pub sense: SenseArg,
    pub estimation: EstimationConfig,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub difference: bool,
    pub forward_fill: bool,
    pub report: bool,
    /// Also run the other solver and emit a side-by-side table.
    pub compare: bool,
    /// Emit greedy sweep timings over growing asset counts.
    pub timing: bool,
    /// Backward swap refinement after the forward pass.
    pub refine: bool,
}

impl Default for SparseConfig {
    fn default() -> Self {
        SparseConfig {
            input: PathBuf::new(),
            out: PathBuf::new(),
            k: 0,
            method: MethodArg::Greedy,
            sense: SenseArg::Minimize,
            estimation: EstimationConfig::default(),
            dt: default_dt(),
            difference: false,
            forward_fill: false,
            report: false,
            compare: false,
            timing: false,
            refine: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CovselConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    pub rho: f64,
    /// Extra penalties for the sweep table.
    pub rho_sweep: Vec<f64>,
    /// Smallest cluster size worth reporting as a sub-panel.
    pub min_cluster: usize,
    /// Exclude the diagonal from the l1 penalty.
    pub no_diagonal_penalty: bool,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub forward_fill: bool,
    pub report: bool,
}

impl Default for CovselConfig {
    fn default() -> Self {
        CovselConfig {
            input: PathBuf::new(),
            out: PathBuf::new(),
            rho: 0.1,
            rho_sweep: Vec::new(),
            min_cluster: 2,
            no_diagonal_penalty: false,
            dt: default_dt(),
            forward_fill: false,
            report: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    /// Estimation window length in rows.
    pub window: usize,
    /// Window step; also the default trading horizon.
    pub step: usize,
    /// Out-of-sample rows traded per window (0 means `step`).
    pub horizon: usize,
    /// Largest portfolio cardinality; 0 means every asset.
    pub k: usize,
    pub method: MethodArg,
    pub estimation: EstimationConfig,
    pub bid_ask: f64,
    pub r: f64,
    pub f: f64,
    pub w0: f64,
    pub alpha_conf: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub forward_fill: bool,
    pub report: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            input: PathBuf::new(),
            out: PathBuf::new(),
            window: 100,
            step: 50,
            horizon: 0,
            k: 0,
            method: MethodArg::Greedy,
            estimation: EstimationConfig::default(),
            bid_ask: 0.0001,
            r: 0.0,
            f: 0.0,
            w0: 1.0,
            alpha_conf: 0.95,
            dt: default_dt(),
            forward_fill: false,
            report: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub out: PathBuf,
    pub kind: SynthKind,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// VAR spectral radius (kind = var).
    pub radius: f64,
    /// VAR order, 1 or 2 (kind = var).
    pub var_order: usize,
    /// Walk step volatility (kinds walks / spread / coint).
    pub sigma_walk: f64,
    /// Spread diffusion volatility and speed (kind = spread / coint).
    pub sigma_spread: f64,
    pub lambda: f64,
    /// Per-asset drift scale for non-planted walks (kind = spread).
    pub drift: f64,
    /// Block size and within-block correlation (kind = block).
    pub block: usize,
    pub correlation: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            out: PathBuf::new(),
            kind: SynthKind::Var,
            seed: 0,
            n: 8,
            m: 500,
            dt: default_dt(),
            radius: 0.7,
            var_order: 1,
            sigma_walk: 0.05,
            sigma_spread: 4.0,
            lambda: 10.0,
            drift: 0.02,
            block: 3,
            correlation: 0.6,
        }
    }
}

/// A full, replayable run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Decompose(DecomposeConfig),
    Sparse(SparseConfig),
    Covsel(CovselConfig),
    Backtest(BacktestConfig),
    Synth(SynthConfig),
}

impl RunConfig {
    pub fn out_dir(&self) -> &PathBuf {
        match self {
            RunConfig::Decompose(c) => &c.out,
            RunConfig::Sparse(c) => &c.out,
            RunConfig::Covsel(c) => &c.out,
            RunConfig::Backtest(c) => &c.out,
            RunConfig::Synth(c) => &c.out,
        }
    }
}
