use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smpx::bench::{
    fit_slope, run_experiment, series_from_csv, CheckpointChoice, ExperimentConfig, InstanceSource, Seeds, StepsizeChoice,
};
use smpx::instance::{generate, GeneratorParams, InstanceKind};
use smpx::solver::Method;
use smpx::{Error, Result};

/// Exit code of `verify` when a check fails.
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "smpx", version, about = "Stochastic Mirror-Prox experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance as JSON.
    Generate(GenerateArgs),
    /// Run an experiment and write CSV/JSON outputs.
    Run(ExperimentArgs),
    /// Run an experiment and check the final mean error against the bound.
    Verify(VerifyArgs),
    /// Fit the log-log slope of the mean error from a run's CSV.
    Slope(SlopeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// bilinear_simplex_spectahedron | sdf_system | eig_min | scalar_minimax
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated block sizes.
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<usize>>,
    /// Comma-separated scalar data (scalar_minimax).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    smooth: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML or JSON experiment file; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin generator name.
    #[arg(long, conflicts_with = "instance")]
    builtin: Option<String>,
    /// Instance file written by `generate`.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Generator seed for `--builtin`.
    #[arg(long)]
    instance_seed: Option<u64>,
    /// smp | rmsa
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Explicit constant stepsize.
    #[arg(long)]
    gamma: Option<f64>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed_base: Option<u64>,
    /// Comma-separated checkpoints.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Record wall times (outputs are then no longer byte-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Also require the fitted slope to be at least this value.
    #[arg(long, allow_hyphen_values = true)]
    slope_min: Option<f64>,
    /// Also require the fitted slope to be at most this value.
    #[arg(long, allow_hyphen_values = true)]
    slope_max: Option<f64>,
    /// First checkpoint of the slope fit.
    #[arg(long, default_value_t = 1)]
    slope_from: usize,
    /// Last checkpoint of the slope fit.
    #[arg(long, default_value_t = usize::MAX)]
    slope_to: usize,
}

#[derive(Args)]
struct SlopeArgs {
    /// CSV written by `run`.
    csv: PathBuf,
    #[arg(long, default_value_t = 1)]
    from: usize,
    #[arg(long, default_value_t = usize::MAX)]
    to: usize,
}

fn build_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let t = a.t.ok_or_else(|| Error::Config("`--t` is required without `--config`".into()))?;
            let src = InstanceSource { builtin: None, file: None, seed: 0, params: GeneratorParams::default() };
            ExperimentConfig::new(src, Method::Smp, t, Seeds::count(0, 1))
        }
    };
    if let Some(b) = &a.builtin {
        cfg.instance.builtin = Some(InstanceKind::parse(b)?);
        cfg.instance.file = None;
    }
    if let Some(f) = &a.instance {
        cfg.instance.file = Some(f.clone());
        cfg.instance.builtin = None;
    }
    if let Some(s) = a.instance_seed {
        cfg.instance.seed = s;
    }
    if let Some(s) = &a.solver {
        cfg.solver = match s.as_str() {
            "smp" => Method::Smp,
            "rmsa" => Method::Rmsa,
            other => return Err(Error::Config(format!("unknown solver `{other}`"))),
        };
    }
    if let Some(t) = a.t {
        cfg.t = t;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(g) = a.gamma {
        cfg.stepsize = StepsizeChoice::Gamma(g);
    }
    if let Some(n) = a.seeds {
        cfg.seeds.count = Some(n);
        cfg.seeds.list = None;
    }
    if let Some(b) = a.seed_base {
        cfg.seeds.base = b;
    }
    if let Some(c) = &a.checkpoints {
        cfg.checkpoints = CheckpointChoice::List(c.clone());
    }
    if a.csv.is_some() {
        cfg.output.csv = a.csv.clone();
    }
    if a.json.is_some() {
        cfg.output.json = a.json.clone();
    }
    cfg.timing |= a.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let kind = InstanceKind::parse(&a.kind)?;
    let mut p = GeneratorParams::default();
    if let Some(v) = a.n {
        p.n = v;
    }
    if let Some(v) = &a.blocks {
        p.blocks = v.clone();
    }
    if a.values.is_some() {
        p.values = a.values.clone();
    }
    if let Some(v) = a.dim {
        p.dim = v;
    }
    if let Some(v) = a.smooth {
        p.smooth = v;
    }
    if let Some(v) = a.noise {
        p.noise = v;
    }
    if let Some(v) = a.delta {
        p.delta = v;
    }
    let file = generate(kind, &p, a.seed)?;
    match &a.out {
        Some(path) => file.save(path),
        None => {
            print!("{}", file.to_json()?);
            Ok(())
        }
    }
}

fn cmd_run(a: &ExperimentArgs) -> Result<()> {
    let cfg = build_config(a)?;
    let out = run_experiment(&cfg)?;
    let last = out.summary.final_row();
    println!(
        "t={} seeds={} gamma={} mean_err_nash={} K0={}",
        last.t,
        out.summary.seeds,
        out.prepared.gamma,
        last.err_nash.mean,
        last.k0.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
    );
    if cfg.output.csv.is_none() && cfg.output.json.is_none() {
        print!("{}", smpx::bench::records_csv(&out.records, cfg.timing));
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let cfg = build_config(&a.experiment)?;
    let out = run_experiment(&cfg)?;
    let last = out.summary.final_row();
    let mut ok = true;
    match last.k0 {
        Some(k0) => {
            let pass = last.err_nash.mean <= k0;
            println!("{} mean Err_N {} <= K0 {}", verdict(pass), last.err_nash.mean, k0);
            ok &= pass;
        }
        None => println!("SKIP no bound for this solver"),
    }
    if a.slope_min.is_some() || a.slope_max.is_some() {
        let series = out.summary.err_nash_series().expect("summary keeps the series");
        let fit = fit_slope(series, (a.slope_from, a.slope_to))?;
        let (lo, hi) = (a.slope_min.unwrap_or(f64::NEG_INFINITY), a.slope_max.unwrap_or(f64::INFINITY));
        let pass = fit.slope >= lo && fit.slope <= hi;
        println!("{} slope {} (95% CI [{}, {}]) in [{lo}, {hi}]", verdict(pass), fit.slope, fit.ci_low, fit.ci_high);
        ok &= pass;
    }
    Ok(ok)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_slope(a: &SlopeArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.csv).map_err(|e| Error::Io(format!("{}: {e}", a.csv.display())))?;
    let fit = fit_slope(&series_from_csv(&text)?, (a.from, a.to))?;
    println!("slope {} ci [{}, {}] points {}", fit.slope, fit.ci_low, fit.ci_high, fit.points);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| true),
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Slope(a) => cmd_slope(a).map(|_| true),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_ACCEPTANCE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
