//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage or configuration errors, 1 when the
//! data cannot be processed. Results go to files or standard output, all
//! diagnostics to standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    flag_windows, fluctuation_sweep_with, hankel_svd_projections, pca_baseline, pcfd,
    DetectionRule, SweepOptions,
};
use crate::decision::{evaluate_cohort, PatientRecord};
use crate::eigen::SolverOptions;
use crate::embedding::nearest_hankel;
use crate::error::StpcaError;
use crate::fit::fit_stpca_with;
use crate::io::{self, RunConfig};
use crate::series::{EmbeddingConfig, SeriesMatrix};
use crate::synth::{
    add_observation_noise, simulate_bifurcation_network, simulate_coupled_lorenz, BifNetConfig,
    LorenzConfig, NoiseSpec,
};

/// Offset between the trajectory seed and the observation-noise seed.
pub const NOISE_SEED_OFFSET: u64 = 1000;

pub const THREADS_ENV: &str = "STPCA_THREADS";

#[derive(Debug, Parser)]
#[command(name = "stpca", version, about = "Spatial-temporal PCA and early-warning analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic series CSV.
    Simulate(SimulateArgs),
    /// Fit one stPCA model and write W, Z and the latent series.
    Fit(FitArgs),
    /// Sliding-window fluctuation sweep (`position,fl`).
    Sweep(SweepArgs),
    /// Flag windows of a sweep CSV.
    Detect(DetectArgs),
    /// Normalized Fréchet distance between two curve CSVs.
    Pcfd(PcfdArgs),
    /// Hankel SVD (or PCA) component series.
    Project(ProjectArgs),
    /// Hourly discharge decisions for a patient cohort.
    Decide(DecideArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    Lorenz,
    Fold,
    Hopf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Variables (Lorenz) or nodes (fold, Hopf).
    #[arg(long)]
    n: Option<usize>,
    /// Samples (Lorenz) or sweep steps (fold, Hopf).
    #[arg(long)]
    m: Option<usize>,
    /// Observation noise SD for Lorenz, dynamical noise for the networks.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    coupling: Option<f64>,
    #[arg(long)]
    sample_every: Option<usize>,
    #[arg(long)]
    tau_star: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// TOML run configuration; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "L")]
    embedding_dim: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Divide each centered row by its standard deviation.
    #[arg(long)]
    scale_rows: bool,
    /// Skip row-mean removal.
    #[arg(long)]
    no_center: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    embed: EmbedArgs,
    /// Directory for w.csv, z.csv, latent.csv and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    embed: EmbedArgs,
    #[arg(long)]
    window_width: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Mean,
    Fold,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Sweep CSV (`position,fl`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    /// Fold-change factor.
    #[arg(long)]
    fc: Option<f64>,
    /// Baseline windows for the fold-change rule.
    #[arg(long)]
    baseline: Option<usize>,
    /// Writes `window,position,fl`; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PcfdArgs {
    first: PathBuf,
    second: PathBuf,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    embed: EmbedArgs,
    /// Number of components.
    #[arg(long, default_value_t = 2)]
    r: usize,
    /// Project the raw series with PCA instead of the stPCA Hankel matrix.
    #[arg(long)]
    pca: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DecideArgs {
    /// Long-format observations `subject_id,hour,indicator,value`.
    #[arg(long)]
    data: PathBuf,
    /// `indicator,lb,ub`.
    #[arg(long)]
    bounds: PathBuf,
    /// `subject_id,discharge_hour,outcome`.
    #[arg(long)]
    events: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedArgs,
    #[arg(long)]
    wl: Option<usize>,
    #[arg(long)]
    fc: Option<f64>,
    /// Comma-separated indicator names.
    #[arg(long, value_delimiter = ',')]
    items: Option<Vec<String>>,
    #[arg(long)]
    horizon: Option<i64>,
    /// Directory for decisions.csv and metrics.csv.
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Data(StpcaError),
}

impl From<StpcaError> for CliError {
    fn from(e: StpcaError) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: StpcaError) -> CliError {
    CliError::Usage(e.to_string())
}

/// Runs the CLI with process stdout/stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    // Results are buffered so the pool closure only captures `Send` data.
    let mut buf: Vec<u8> = Vec::new();
    let result = threads().and_then(|threads| match threads {
        Some(0) => dispatch(cli.command, false, &mut buf),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(cli.command, true, &mut buf))),
        None => dispatch(cli.command, true, &mut buf),
    });
    let _ = out.write_all(&buf);
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(CliError::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn threads() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn dispatch(cmd: Command, parallel: bool, out: &mut Vec<u8>) -> CliResult<()> {
    match cmd {
        Command::Simulate(a) => simulate(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Sweep(a) => sweep(a, parallel),
        Command::Detect(a) => detect(a, out),
        Command::Pcfd(a) => pcfd_cmd(a, out),
        Command::Project(a) => project(a, out),
        Command::Decide(a) => decide(a, parallel, out),
    }
}

fn emit(out: &mut dyn Write, key: &str, value: impl std::fmt::Display) -> CliResult<()> {
    writeln!(out, "{key},{value}").map_err(|e| CliError::Data(StpcaError::io("<stdout>", e)))
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            StpcaError::Io { .. } => CliError::Data(e),
            other => usage(other),
        })?,
        None => RunConfig::default(),
    };
    Ok(cfg)
}

fn resolve_embedding(args: &EmbedArgs, cfg: &mut RunConfig) -> CliResult<EmbeddingConfig> {
    if let Some(l) = args.embedding_dim {
        cfg.embedding.embedding_dim = l;
    }
    if let Some(lambda) = args.lambda {
        cfg.embedding.lambda = lambda;
    }
    if args.scale_rows {
        cfg.embedding.scale_rows = true;
    }
    if args.no_center {
        cfg.embedding.center_rows = false;
    }
    let e = cfg.embedding_config();
    if e.embedding_dim < 2 {
        return Err(CliError::Usage(format!("--L must be at least 2, got {}", e.embedding_dim)));
    }
    if !(0.0..=1.0).contains(&e.lambda) {
        return Err(CliError::Usage(format!("--lambda must lie in [0, 1], got {}", e.lambda)));
    }
    Ok(e)
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let series = match a.model {
        Model::Lorenz => {
            let d = LorenzConfig::default();
            let cfg = LorenzConfig {
                n: a.n.unwrap_or(d.n),
                m: a.m.unwrap_or(d.m),
                coupling: a.coupling.unwrap_or(d.coupling),
                sample_every: a.sample_every.unwrap_or(d.sample_every),
                seed: a.seed,
                ..d
            };
            cfg.validate().map_err(usage)?;
            let clean = simulate_coupled_lorenz(&cfg)?;
            let noise = NoiseSpec {
                intensity: a.noise,
                seed: a.seed.wrapping_add(NOISE_SEED_OFFSET),
            };
            add_observation_noise(&clean, &noise).map_err(usage)?
        }
        Model::Fold | Model::Hopf => {
            let d = match a.model {
                Model::Fold => BifNetConfig::fold(),
                _ => BifNetConfig::hopf(),
            };
            let cfg = BifNetConfig {
                nodes: a.n.unwrap_or(d.nodes),
                tau_steps: a.m.unwrap_or(d.tau_steps),
                tau_star: a.tau_star.unwrap_or(d.tau_star),
                coupling: a.coupling.unwrap_or(d.coupling),
                noise: if a.noise > 0.0 { a.noise } else { d.noise },
                seed: a.seed,
                ..d
            };
            cfg.validate().map_err(usage)?;
            let (series, tau_star) = simulate_bifurcation_network(&cfg)?;
            emit(out, "tau_star", tau_star)?;
            series
        }
    };
    io::write_series_csv(&a.out, &series)?;
    emit(out, "n", series.n())?;
    emit(out, "m", series.m())
}

fn load_series(path: &Path) -> CliResult<SeriesMatrix> {
    Ok(io::load_series_csv(path)?)
}

fn fit(a: FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load_config(a.embed.config.as_deref())?;
    let embed = resolve_embedding(&a.embed, &mut cfg)?;
    let x = load_series(&a.input)?;
    let r = fit_stpca_with(&x, &embed, &SolverOptions::default())?;
    let l = embed.embedding_dim;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| StpcaError::io(dir, e))?;
        let var_names: Vec<String> = x
            .variable_names()
            .map(<[String]>::to_vec)
            .unwrap_or_else(|| (1..=x.n()).map(|i| format!("v{i}")).collect());
        let row_names = |p: &str| (1..=l).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let time_names: Vec<String> = match x.time_index() {
            Some(t) => t.iter().map(|&v| io::format_f64(v)).collect(),
            None => (1..=x.m()).map(|j| format!("t{j}")).collect(),
        };
        io::write_matrix_csv(dir.join("w.csv"), "row", &row_names("W"), &var_names, &r.w)?;
        io::write_matrix_csv(dir.join("z.csv"), "row", &row_names("Z"), &time_names, &r.z)?;
        let index: Vec<f64> = (1..=r.z_extended.len()).map(|k| k as f64).collect();
        io::write_columns_csv(dir.join("latent.csv"), &["index", "z"], &[&index, &r.z_extended.values])?;
        io::write_table(
            dir.join("summary.csv"),
            &["key", "value"],
            &summary_rows(&r).into_iter().map(|(k, v)| vec![k.to_string(), v]).collect::<Vec<_>>(),
        )?;
    }
    for (k, v) in summary_rows(&r) {
        emit(out, k, v)?;
    }
    Ok(())
}

fn summary_rows(r: &crate::fit::StpcaResult) -> Vec<(&'static str, String)> {
    vec![
        ("alpha", io::format_f64(r.alpha)),
        ("embedding_error", io::format_f64(r.embedding_error)),
        ("latent_length", r.z_extended.len().to_string()),
        ("iterations", r.iterations.to_string()),
        ("converged", r.converged.to_string()),
        ("residual", io::format_f64(r.diagnostics.residual)),
        ("degenerate", r.diagnostics.degenerate.to_string()),
    ]
}

fn sweep(a: SweepArgs, parallel: bool) -> CliResult<()> {
    let mut cfg = load_config(a.embed.config.as_deref())?;
    let embed = resolve_embedding(&a.embed, &mut cfg)?;
    let width = a.window_width.unwrap_or(cfg.window.width);
    let stride = a.stride.unwrap_or(cfg.window.stride);
    if stride == 0 {
        return Err(CliError::Usage("--stride must be at least 1".into()));
    }
    if width < embed.embedding_dim {
        return Err(CliError::Usage(format!(
            "--window-width {width} is below --L {}",
            embed.embedding_dim
        )));
    }
    let x = load_series(&a.input)?;
    let opts = SweepOptions {
        parallel,
        ..SweepOptions::new(width, stride)
    };
    let s = fluctuation_sweep_with(&x, &embed, &opts)?;
    Ok(io::write_sweep_csv(&a.out, &s)?)
}

fn detect(a: DetectArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    match a.rule {
        Some(RuleArg::Mean) => cfg.detection.rule = "mean".into(),
        Some(RuleArg::Fold) => cfg.detection.rule = "fold-change".into(),
        None => {}
    }
    if let Some(fc) = a.fc {
        cfg.detection.factor = fc;
    }
    if let Some(b) = a.baseline {
        cfg.detection.baseline = b;
    }
    let rule = cfg.detection_rule().map_err(usage)?;
    if let DetectionRule::FoldChange { factor, baseline_len } = rule {
        if !(factor > 0.0) || baseline_len == 0 {
            return Err(CliError::Usage(format!(
                "fold-change needs --fc > 0 and --baseline >= 1, got {factor} and {baseline_len}"
            )));
        }
    }
    let (positions, fl) = io::load_sweep_csv(&a.input)?;
    let flagged = flag_windows(&fl, rule)?;
    let rows: Vec<Vec<String>> = flagged
        .iter()
        .map(|&k| vec![k.to_string(), io::format_f64(positions[k]), io::format_f64(fl[k])])
        .collect();
    let header = ["window", "position", "fl"];
    match &a.out {
        Some(path) => io::write_table(path, &header, &rows)?,
        None => {
            let mut lines = vec![header.join(",")];
            lines.extend(rows.iter().map(|r| r.join(",")));
            for line in lines {
                writeln!(out, "{line}").map_err(|e| CliError::Data(StpcaError::io("<stdout>", e)))?;
            }
        }
    }
    Ok(())
}

fn pcfd_cmd(a: PcfdArgs, out: &mut dyn Write) -> CliResult<()> {
    let first = io::load_curve_csv(&a.first)?;
    let second = io::load_curve_csv(&a.second)?;
    emit(out, "pcfd", io::format_f64(pcfd(&first, &second)?))
}

fn project(a: ProjectArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load_config(a.embed.config.as_deref())?;
    let embed = resolve_embedding(&a.embed, &mut cfg)?;
    if a.r == 0 {
        return Err(CliError::Usage("--r must be at least 1".into()));
    }
    let x = load_series(&a.input)?;
    let set = if a.pca {
        pca_baseline(&x, a.r)?
    } else {
        let fit = fit_stpca_with(&x, &embed, &SolverOptions::default())?;
        hankel_svd_projections(&nearest_hankel(&fit.z), a.r)?
    };
    let columns: Vec<Vec<f64>> = (0..a.r).map(|k| set.component(k)).collect();
    let names: Vec<String> = (1..=a.r).map(|k| format!("c{k}")).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    io::write_columns_csv(&a.out, &header, &refs)?;
    for (k, s) in set.singular_values.iter().enumerate() {
        emit(out, &format!("singular_value{}", k + 1), io::format_f64(*s))?;
    }
    for (k, p) in set.variance_proportions.iter().take(a.r).enumerate() {
        emit(out, &format!("proportion{}", k + 1), io::format_f64(*p))?;
    }
    Ok(())
}

fn decide(a: DecideArgs, parallel: bool, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load_config(a.embed.config.as_deref())?;
    let embed = resolve_embedding(&a.embed, &mut cfg)?;
    if let Some(wl) = a.wl {
        cfg.decision.wl = wl;
    }
    if let Some(fc) = a.fc {
        cfg.decision.fc = fc;
    }
    if let Some(items) = a.items {
        cfg.decision.items = items;
    }
    if let Some(h) = a.horizon {
        cfg.decision.horizon = h;
    }
    let dc = cfg.decision_config();
    dc.validate().map_err(usage)?;
    if cfg.decision.horizon < 0 {
        return Err(CliError::Usage("--horizon must be non-negative".into()));
    }

    let load = io::load_patient_records(&a.data, &a.bounds, a.events.as_deref())?;
    // A decision needs wl + 1 fluctuation values from windows of max(L, wl) hours.
    let needed = embed.embedding_dim.max(dc.wl) + dc.wl;
    let (usable, short): (Vec<PatientRecord>, Vec<PatientRecord>) = load
        .records
        .into_iter()
        .partition(|r| r.indicators.m() >= needed);
    let (evaluations, pooled) = evaluate_cohort(
        &usable,
        &embed,
        &dc,
        cfg.decision.horizon,
        &SolverOptions::default(),
        parallel,
    )?;

    std::fs::create_dir_all(&a.out).map_err(|e| StpcaError::io(&a.out, e))?;
    let mut decision_rows = Vec::new();
    let mut metric_rows = Vec::new();
    for e in &evaluations {
        for o in &e.scored.outcomes {
            decision_rows.push(vec![
                e.subject_id.clone(),
                o.t.to_string(),
                u8::from(o.decision).to_string(),
                io::format_f64(o.idx),
                o.itm_flg.to_string(),
                o.label.map_or("", |l| l.as_str()).to_string(),
            ]);
        }
        metric_rows.push(io::metrics_row(&e.subject_id, &e.scored.metrics));
    }
    metric_rows.push(io::metrics_row("pooled", &pooled));
    io::write_table(
        a.out.join("decisions.csv"),
        &["subject_id", "t", "decision", "idx", "itm_flg", "label"],
        &decision_rows,
    )?;
    io::write_table(a.out.join("metrics.csv"), &io::METRICS_HEADER, &metric_rows)?;

    emit(out, "retained", usable.len())?;
    emit(out, "dropped", load.dropped.len() + short.len())?;
    for d in &load.dropped {
        emit(out, &format!("dropped:{}", d.subject_id), &d.reason)?;
    }
    for r in &short {
        emit(out, &format!("dropped:{}", r.subject_id), "too short for window")?;
    }
    let pooled_row = io::metrics_row("pooled", &pooled);
    for (k, v) in io::METRICS_HEADER.iter().zip(&pooled_row).skip(1) {
        emit(out, k, v)?;
    }
    Ok(())
}
