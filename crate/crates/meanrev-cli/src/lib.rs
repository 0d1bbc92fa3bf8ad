//! Library surface of the CLI: resolved run configurations and the command
//! implementations. `main.rs` only parses flags and maps errors to exit
//! codes (0 success, 2 data errors, 3 numerical errors).
//!
//! Every command writes plain CSV plot data plus a JSON manifest describing
//! the axes, and saves its resolved `run_config.json`; re-running a saved
//! config on the same input produces byte-identical outputs (timing tables,
//! which measure wall-clock seconds, are the one documented exception).

pub mod config;

use config::*;
use meanrev::canonical::{basis_summary, box_tiao_from_model, johansen, CanonicalBasis};
use meanrev::covsel::{edge_list, graphical_lasso, is_chordal, GlassoOptions};
use meanrev::data::{load_panel, FillPolicy, LoadOptions, LoadReport, PanelMeta, TimePanel};
use meanrev::ou::{backtest, estimate_ou, OuFlag, ParamSchedule, TradeConfig};
use meanrev::sparse::{
    estimate_model, exhaustive_oracle, greedy_search, refine_swaps, sdp_relaxation,
    sparse_mean_reverting_ladder, CovarianceKind, EstimationOptions, Method, Sense, SparseProblem,
    SparsePortfolio, TransitionKind,
};
use meanrev::synth;
use meanrev::{Error, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use config::RunConfig;

/// Descriptor of one emitted file, collected into `manifest.json`.
#[derive(Debug, Clone, Serialize)]
struct OutputDesc {
    file: String,
    kind: String,
    x_axis: String,
    y_axis: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    input: Option<PanelMeta>,
    outputs: Vec<OutputDesc>,
}

struct OutDir {
    dir: PathBuf,
    outputs: Vec<OutputDesc>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutDir { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, kind: &str, x: &str, y: &str, content: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), content)?;
        self.outputs.push(OutputDesc {
            file: name.to_string(),
            kind: kind.to_string(),
            x_axis: x.to_string(),
            y_axis: y.to_string(),
        });
        Ok(())
    }

    fn write_json<S: Serialize>(&mut self, name: &str, kind: &str, value: &S) -> Result<()> {
        let body = serde_json::to_string_pretty(value)?;
        self.write(name, kind, "", "", &(body + "\n"))
    }

    fn finish(mut self, command: &str, input: Option<PanelMeta>, config: &RunConfig) -> Result<()> {
        let manifest = Manifest {
            command: command.to_string(),
            input,
            outputs: std::mem::take(&mut self.outputs),
        };
        let body = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(self.dir.join("manifest.json"), body + "\n")?;
        let cfg = serde_json::to_string_pretty(config)?;
        std::fs::write(self.dir.join("run_config.json"), cfg + "\n")?;
        Ok(())
    }
}

fn load_input(
    path: &Path,
    dt: f64,
    forward_fill: bool,
) -> Result<(TimePanel<f64>, LoadReport)> {
    let options = LoadOptions {
        fill: if forward_fill { FillPolicy::ForwardFill } else { FillPolicy::DropRow },
        dt,
        ..Default::default()
    };
    let loaded = load_panel::<f64, _>(path, &options)?;
    Ok((loaded.panel, loaded.report))
}

fn estimation_options(cfg: &EstimationConfig) -> EstimationOptions<f64> {
    EstimationOptions {
        transition: match cfg.transition {
            TransitionArg::Ols => TransitionKind::Ols,
            TransitionArg::Lasso => TransitionKind::Lasso { gamma: cfg.gamma },
            TransitionArg::LassoFrac => TransitionKind::LassoZeroFraction { target: cfg.zero_frac },
            TransitionArg::Endogenous => TransitionKind::Endogenous { sigma: cfg.sigma },
        },
        covariance: match cfg.covariance {
            CovarianceArg::Sample => CovarianceKind::Sample,
            CovarianceArg::Covsel => CovarianceKind::Covsel { rho: cfg.rho },
        },
        center: cfg.center,
    }
}

fn method_of(arg: MethodArg) -> Method {
    match arg {
        MethodArg::Greedy => Method::Greedy,
        MethodArg::Sdp => Method::Sdp,
        MethodArg::Oracle => Method::Oracle,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Execute a resolved run configuration.
pub fn run(config: &RunConfig) -> Result<()> {
    match config {
        RunConfig::Decompose(c) => cmd_decompose(c, config),
        RunConfig::Sparse(c) => cmd_sparse(c, config),
        RunConfig::Covsel(c) => cmd_covsel(c, config),
        RunConfig::Backtest(c) => cmd_backtest(c, config),
        RunConfig::Synth(c) => cmd_synth(c, config),
    }
}

fn basis_outputs(
    out: &mut OutDir,
    panel: &TimePanel<f64>,
    basis: &CanonicalBasis<f64>,
) -> Result<()> {
    let n = basis.dim();
    let labels = panel.labels();

    // per-portfolio tracks
    let mut tracks = String::from("step");
    for j in 0..n {
        write!(tracks, ",P{}", j + 1).unwrap();
    }
    tracks.push('\n');
    for i in 0..basis.portfolio_series.nrows() {
        write!(tracks, "{i}").unwrap();
        for j in 0..n {
            write!(tracks, ",{}", basis.portfolio_series[(i, j)]).unwrap();
        }
        tracks.push('\n');
    }
    out.write("tracks.csv", "portfolio tracks", "step", "price", &tracks)?;

    // weights table: rows are assets, columns portfolios
    let mut weights = String::from("asset");
    for j in 0..n {
        write!(weights, ",P{}", j + 1).unwrap();
    }
    weights.push('\n');
    for (r, label) in labels.iter().enumerate() {
        write!(weights, "{label}").unwrap();
        for j in 0..n {
            write!(weights, ",{}", basis.weights[(r, j)]).unwrap();
        }
        weights.push('\n');
    }
    out.write("weights.csv", "portfolio weights", "asset", "weight", &weights)?;

    // summary: the canonical table columns
    let stats = basis_summary(basis, panel.dt())?;
    let mut summary =
        String::from("portfolio,predictability,mean_reversion,half_life_years,p_value,volatility\n");
    for s in &stats {
        writeln!(
            summary,
            "P{},{},{},{},{},{}",
            s.index + 1,
            s.nu,
            s.lambda,
            fmt_opt(s.half_life_years),
            s.p_value,
            s.volatility
        )
        .unwrap();
    }
    out.write("summary.csv", "portfolio summary", "portfolio", "statistics", &summary)?;
    Ok(())
}

fn cmd_decompose(c: &DecomposeConfig, full: &RunConfig) -> Result<()> {
    let (mut panel, report) = load_input(&c.input, c.dt, c.forward_fill)?;
    if c.difference {
        panel = panel.difference()?;
    }
    let mut out = OutDir::create(&c.out)?;
    if c.report {
        out.write_json("load_report.json", "load report", &report)?;
    }

    let basis = match c.flavor {
        FlavorArg::BoxTiao => {
            let pair = meanrev::data::make_lagged_pair(&panel, c.center)?;
            let model = meanrev::estimate::ols_transition(&pair)?;
            box_tiao_from_model(&model, &pair)?
        }
        FlavorArg::Johansen => johansen(&panel)?,
    };
    basis_outputs(&mut out, &panel, &basis)?;
    out.finish("decompose", Some(panel.meta()), full)
}

fn cmd_sparse(c: &SparseConfig, full: &RunConfig) -> Result<()> {
    let (mut panel, report) = load_input(&c.input, c.dt, c.forward_fill)?;
    if c.difference {
        panel = panel.difference()?;
    }
    let n = panel.ncols();
    let k_max = if c.k == 0 { n } else { c.k.min(n) };
    let options = estimation_options(&c.estimation);
    let mut out = OutDir::create(&c.out)?;
    if c.report {
        out.write_json("load_report.json", "load report", &report)?;
    }

    let ladder = run_ladder(&panel, k_max, method_of(c.method), &options, c.sense, c.refine)?;

    // Table-2 shape: rows assets, one column per target cardinality
    let mut weights = String::from("asset");
    for k in 1..=k_max {
        write!(weights, ",k{k}").unwrap();
    }
    weights.push('\n');
    for (r, label) in panel.labels().iter().enumerate() {
        write!(weights, "{label}").unwrap();
        for p in &ladder {
            write!(weights, ",{}", p.weights[r]).unwrap();
        }
        weights.push('\n');
    }
    out.write("weights_by_k.csv", "sparse portfolio weights", "asset", "weight", &weights)?;

    let mut curve = String::from("k,nu,lambda,bound,certified,support\n");
    for (i, p) in ladder.iter().enumerate() {
        let support: Vec<String> =
            p.support.iter().map(|&j| panel.labels()[j].clone()).collect();
        writeln!(
            curve,
            "{},{},{},{},{},{}",
            i + 1,
            p.value,
            fmt_opt(p.lambda_ou),
            fmt_opt(p.bound),
            p.certified.map(|b| b.to_string()).unwrap_or_default(),
            support.join(" ")
        )
        .unwrap();
    }
    out.write("curve.csv", "predictability and mean reversion vs cardinality", "k", "nu,lambda", &curve)?;

    if c.compare {
        let other = match c.method {
            MethodArg::Sdp => Method::Greedy,
            _ => Method::Sdp,
        };
        let other_ladder = run_ladder(&panel, k_max, other, &options, c.sense, false)?;
        let (first, second) = match c.method {
            MethodArg::Sdp => ("sdp", "greedy"),
            MethodArg::Greedy => ("greedy", "sdp"),
            MethodArg::Oracle => ("oracle", "sdp"),
        };
        let mut cmp = format!("k,{first}_nu,{first}_lambda,{second}_nu,{second}_lambda,sdp_bound\n");
        for i in 0..k_max {
            let bound = ladder[i].bound.or(other_ladder[i].bound);
            writeln!(
                cmp,
                "{},{},{},{},{},{}",
                i + 1,
                ladder[i].value,
                fmt_opt(ladder[i].lambda_ou),
                other_ladder[i].value,
                fmt_opt(other_ladder[i].lambda_ou),
                fmt_opt(bound)
            )
            .unwrap();
        }
        out.write("comparison.csv", "solver comparison", "k", "nu,lambda", &cmp)?;
    }

    if c.timing {
        let mut timing = String::from("n,seconds\n");
        let mut sizes: Vec<usize> = vec![5, 10, 15, 20, 25, 30, 40, 50];
        sizes.retain(|&s| s <= n);
        if !sizes.contains(&n) && n >= 3 {
            sizes.push(n);
        }
        for &size in &sizes {
            let cols: Vec<usize> = (0..size).collect();
            let sub = panel.select_columns(&cols)?;
            let start = std::time::Instant::now();
            let _ = run_ladder(&sub, size, Method::Greedy, &options, c.sense, false)?;
            writeln!(timing, "{size},{}", start.elapsed().as_secs_f64()).unwrap();
        }
        out.write(
            "timing.csv",
            "full greedy sweep wall time (non-deterministic)",
            "n",
            "seconds",
            &timing,
        )?;
    }

    out.finish("sparse", Some(panel.meta()), full)
}

fn run_ladder(
    panel: &TimePanel<f64>,
    k_max: usize,
    method: Method,
    options: &EstimationOptions<f64>,
    sense: SenseArg,
    refine: bool,
) -> Result<Vec<SparsePortfolio<f64>>> {
    let mut ladder = match sense {
        SenseArg::Minimize => sparse_mean_reverting_ladder(panel, k_max, method, options)?,
        SenseArg::Maximize => {
            let model = estimate_model(panel, options)?;
            let pencil_a = model.predictability_matrix();
            let mut out = Vec::with_capacity(k_max);
            match method {
                Method::Greedy => {
                    let problem =
                        SparseProblem::new(pencil_a, model.gamma.clone(), k_max, Sense::Maximize)?;
                    out = greedy_search(&problem)?;
                }
                Method::Oracle | Method::Sdp => {
                    for k in 1..=k_max {
                        let problem = SparseProblem::new(
                            pencil_a.clone(),
                            model.gamma.clone(),
                            k,
                            Sense::Maximize,
                        )?;
                        out.push(match method {
                            Method::Oracle => exhaustive_oracle(&problem)?,
                            _ => sdp_relaxation(&problem, &Default::default())?.0,
                        });
                    }
                }
            }
            for p in &mut out {
                p.nu = Some(p.value);
                let track = panel.portfolio_track(&p.weights)?;
                p.lambda_ou = estimate_ou(track.as_slice(), panel.dt()).ok().map(|q| q.lambda);
            }
            out
        }
    };
    if refine {
        let model = estimate_model(panel, options)?;
        let pencil_a = model.predictability_matrix();
        let sense_core = match sense {
            SenseArg::Minimize => Sense::Minimize,
            SenseArg::Maximize => Sense::Maximize,
        };
        for (i, portfolio) in ladder.iter_mut().enumerate() {
            let problem =
                SparseProblem::new(pencil_a.clone(), model.gamma.clone(), i + 1, sense_core)?;
            let refined = refine_swaps(&problem, portfolio)?;
            *portfolio = refined;
            portfolio.nu = Some(portfolio.value);
            let track = panel.portfolio_track(&portfolio.weights)?;
            portfolio.lambda_ou = estimate_ou(track.as_slice(), panel.dt()).ok().map(|q| q.lambda);
        }
    }
    Ok(ladder)
}

fn cmd_covsel(c: &CovselConfig, full: &RunConfig) -> Result<()> {
    let (panel, report) = load_input(&c.input, c.dt, c.forward_fill)?;
    let mut out = OutDir::create(&c.out)?;
    if c.report {
        out.write_json("load_report.json", "load report", &report)?;
    }
    let sigma = meanrev::estimate::sample_covariance(&panel)?;
    let options = GlassoOptions { penalize_diagonal: !c.no_diagonal_penalty, ..Default::default() };
    let estimate = graphical_lasso(&sigma, c.rho, &options)?;

    let mut edges = String::from("from,to,from_label,to_label,weight,sign\n");
    for e in edge_list(&estimate) {
        writeln!(
            edges,
            "{},{},{},{},{},{}",
            e.from,
            e.to,
            panel.labels()[e.from],
            panel.labels()[e.to],
            e.weight,
            e.sign
        )
        .unwrap();
    }
    out.write("edges.csv", "conditional dependence edges", "from", "to", &edges)?;

    let mut clusters = String::from("cluster,member,label\n");
    for (ci, cluster) in estimate.clusters.iter().enumerate() {
        for &m in cluster {
            writeln!(clusters, "{},{},{}", ci, m, panel.labels()[m]).unwrap();
        }
    }
    out.write("clusters.csv", "graph clusters", "cluster", "member", &clusters)?;

    #[derive(Serialize)]
    struct ChordalReport {
        chordal: bool,
        elimination_order: Option<Vec<usize>>,
        edge_count: usize,
        kkt_residual: f64,
        converged: bool,
        clusters_at_least_min: usize,
    }
    let ordering = is_chordal(&estimate.graph);
    let big = estimate.clusters.iter().filter(|cl| cl.len() >= c.min_cluster).count();
    out.write_json(
        "chordal.json",
        "chordality report",
        &ChordalReport {
            chordal: ordering.is_some(),
            elimination_order: ordering,
            edge_count: estimate.graph.edge_count(),
            kkt_residual: estimate.kkt_residual,
            converged: estimate.converged,
            clusters_at_least_min: big,
        },
    )?;

    if !c.rho_sweep.is_empty() {
        let mut sweep = String::from("rho,edges,clusters,max_cluster,kkt_residual,converged\n");
        for &rho in &c.rho_sweep {
            let est = graphical_lasso(&sigma, rho, &options)?;
            let max_cluster = est.clusters.iter().map(Vec::len).max().unwrap_or(0);
            writeln!(
                sweep,
                "{},{},{},{},{},{}",
                rho,
                est.graph.edge_count(),
                est.clusters.len(),
                max_cluster,
                est.kkt_residual,
                est.converged
            )
            .unwrap();
        }
        out.write("rho_sweep.csv", "cluster counts per penalty", "rho", "clusters", &sweep)?;
    }

    out.finish("covsel", Some(panel.meta()), full)
}

fn cmd_backtest(c: &BacktestConfig, full: &RunConfig) -> Result<()> {
    let (panel, report) = load_input(&c.input, c.dt, c.forward_fill)?;
    let n = panel.ncols();
    let k_max = if c.k == 0 { n } else { c.k.min(n) };
    let horizon = if c.horizon == 0 { c.step } else { c.horizon };
    let options = estimation_options(&c.estimation);
    let mut out = OutDir::create(&c.out)?;
    if c.report {
        out.write_json("load_report.json", "load report", &report)?;
    }

    let windows = meanrev::data::rolling_windows(&panel, c.window, c.step)?;
    if windows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no usable windows: panel has {} rows for window {}",
            panel.nrows(),
            c.window
        )));
    }

    let frictionless = TradeConfig::<f64> {
        r: c.r,
        f: c.f,
        bid_ask: 0.0,
        w0: c.w0,
        alpha_conf: c.alpha_conf,
    };
    let with_cost = TradeConfig::<f64> { bid_ask: c.bid_ask, ..frictionless };

    // per k: Sharpe samples across windows, frictionless and with cost
    let mut sharpe_free: Vec<Vec<f64>> = vec![Vec::new(); k_max];
    let mut sharpe_cost: Vec<Vec<f64>> = vec![Vec::new(); k_max];
    let mut last_tracks: Option<String> = None;

    for (in_panel, out_panel) in &windows {
        let ladder = run_ladder(
            in_panel,
            k_max,
            method_of(c.method),
            &options,
            SenseArg::Minimize,
            false,
        )?;
        for (ki, portfolio) in ladder.iter().enumerate() {
            let in_track = in_panel.portfolio_track(&portfolio.weights)?;
            let params = estimate_ou(in_track.as_slice(), c.dt)?;
            let out_track_full = out_panel.portfolio_track(&portfolio.weights)?;
            let take = horizon.min(out_track_full.len());
            let out_track = &out_track_full.as_slice()[..take];
            if out_track.len() < 2 {
                continue;
            }
            let free = backtest(out_track, &ParamSchedule::Fixed(params), &frictionless)?;
            let costed = backtest(out_track, &ParamSchedule::Fixed(params), &with_cost)?;
            sharpe_free[ki].push(free.sharpe);
            sharpe_cost[ki].push(costed.sharpe);

            if ki + 1 == k_max {
                let mut tracks = String::from(
                    "step,price,wealth_frictionless,shares_frictionless,wealth_cost,shares_cost\n",
                );
                for t in 0..free.shares.len() {
                    writeln!(
                        tracks,
                        "{},{},{},{},{},{}",
                        t,
                        out_track[t],
                        free.wealth[t],
                        free.shares[t],
                        costed.wealth.get(t).cloned().unwrap_or(f64::NAN),
                        costed.shares.get(t).cloned().unwrap_or(f64::NAN)
                    )
                    .unwrap();
                }
                last_tracks = Some(tracks);
            }
            let _ = params.flag == OuFlag::Ok;
        }
    }

    let mut table =
        String::from("k,sharpe_mean,sharpe_std,sharpe_mean_cost,sharpe_std_cost,n_windows\n");
    for ki in 0..k_max {
        let (mf, sf) = meanrev::stats::mean_std(&sharpe_free[ki]);
        let (mc, sc_) = meanrev::stats::mean_std(&sharpe_cost[ki]);
        writeln!(table, "{},{},{},{},{},{}", ki + 1, mf, sf, mc, sc_, sharpe_free[ki].len())
            .unwrap();
    }
    out.write(
        "sharpe_by_k.csv",
        "out-of-sample Sharpe vs cardinality, plus/minus one standard deviation",
        "k",
        "sharpe",
        &table,
    )?;
    if let Some(tracks) = last_tracks {
        out.write("tracks.csv", "wealth and shares of the last window", "step", "wealth", &tracks)?;
    }

    out.finish("backtest", Some(panel.meta()), full)
}

fn cmd_synth(c: &SynthConfig, full: &RunConfig) -> Result<()> {
    let mut out = OutDir::create(&c.out)?;
    let panel: TimePanel<f64> = match c.kind {
        SynthKind::Var => synth::var_panel(c.n, c.m, c.var_order, c.radius, c.seed)?,
        SynthKind::Walks => synth::random_walk_panel(c.n, c.m, c.sigma_walk, c.seed)?,
        SynthKind::Spread => {
            let config = synth::PlantedSpreadConfig {
                n_assets: c.n,
                m: c.m,
                dt: c.dt,
                lambda: c.lambda,
                sigma_spread: c.sigma_spread,
                sigma_walk: c.sigma_walk,
                drift: c.drift,
                ..Default::default()
            };
            synth::planted_spread_panel(&config, c.seed)?
        }
        SynthKind::Block => synth::block_covariance_panel(c.n, c.block, c.m, c.correlation, c.seed)?.0,
        SynthKind::Coint => {
            synth::cointegrated_pair_panel(c.m, c.lambda, c.sigma_spread, c.sigma_walk, c.seed)?
        }
        SynthKind::White => synth::white_noise_panel(c.n, c.m, 1.0, c.seed)?,
    };
    let mut buf = Vec::new();
    panel.write_csv(&mut buf)?;
    let body = String::from_utf8(buf).expect("csv output is utf-8");
    out.write("panel.csv", "synthetic price panel", "date", "price", &body)?;
    out.finish("synth", Some(panel.meta()), full)
}
