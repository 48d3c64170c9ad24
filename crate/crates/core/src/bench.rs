//! Experiment harness: configuration, seeded replication, summary statistics
//! and the CSV/JSON outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composite::{eig_as_composite, ConstantsAB, SdfScaled};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::instance::{generate, GeneratorParams, InstanceData, InstanceFile, InstanceKind};
use crate::rng::RandomStream;
use crate::solver::{
    bounds_for_stepsize, constant_stepsize, geometric_checkpoints, rmsa_run, rmsa_stepsize, smp_run, theoretical_bounds,
    Bounds, ErrorValues, Method, RunRecord, RunSeed, StepsizePolicy,
};
use crate::vi::{
    calibrate_noise, default_probes, err_nash_saddle, err_vi_lower, ExactOracle, NoiseCalibration, SaddleInstance,
    SignNoiseOracle, StochasticOracle, VIProblem,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SMPX_THREADS";

/// Points and samples used by `noise = "calibrated"`.
pub const CALIBRATION_PROBES: usize = 8;
pub const CALIBRATION_SAMPLES: usize = 4000;
const CALIBRATION_PROBE_SEED: u64 = 3;
const CALIBRATION_SAMPLE_SEED: u64 = 9;
/// Seed of the random probes for `Err_vi`.
const ERR_VI_PROBE_SEED: u64 = 17;
/// Resamples for the slope confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5eed;

/// Where the instance comes from: a builtin generator or an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<InstanceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Generator seed (builtin only).
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: GeneratorParams,
}

impl InstanceSource {
    pub fn builtin(kind: InstanceKind, params: GeneratorParams, seed: u64) -> Self {
        Self { builtin: Some(kind), file: None, seed, params }
    }

    pub fn load(&self) -> Result<InstanceFile> {
        match (&self.builtin, &self.file) {
            (Some(kind), None) => generate(*kind, &self.params, self.seed),
            (None, Some(path)) => InstanceFile::load(path),
            _ => Err(Error::Config("instance needs exactly one of `builtin` and `file`".into())),
        }
    }
}

/// The stochastic oracle handed to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// The instance's own randomized oracle (`Ξ_k` for eigenvalue kinds).
    #[default]
    Sampled,
    /// `F` itself.
    Exact,
    /// `F + σ ε` with Rademacher signs on vector entries and matrix diagonals.
    SignNoise(f64),
}

/// Noise level `M` used in the stepsize and the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    /// Monte-Carlo estimate of `max_z sqrt(E‖Ξ − F‖_*²)` over the calibration probes.
    #[default]
    Calibrated,
    /// The oracle's declared constant.
    Declared,
    /// Almost-sure bound on `‖Ξ − F‖_*` (eigenvalue kinds).
    AlmostSure,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepsizeChoice {
    /// `γ = min[α/(√3 L), (αΩ/M) sqrt(2/(21t))]` for SMP, `αΩ/(M̄√t)` for mirror SA.
    #[default]
    Auto,
    Gamma(f64),
}

/// `M̄` for the mirror SA stepsize.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupNormChoice {
    /// `max[sup ‖F‖_*, noise bound]` from the instance's certified bounds.
    #[default]
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointChoice {
    /// `1, 2, 4, ..., t`.
    #[default]
    Geometric,
    List(Vec<usize>),
}

/// Replications: run indices `list`, or `0..count`, all keyed by `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub base: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<u64>>,
}

impl Seeds {
    pub fn count(base: u64, count: usize) -> Self {
        Self { base, count: Some(count), list: None }
    }

    pub fn runs(&self) -> Result<Vec<u64>> {
        let runs = match (&self.count, &self.list) {
            (Some(c), None) => (0..*c as u64).collect(),
            (None, Some(l)) => l.clone(),
            _ => return Err(Error::Config("seeds need exactly one of `count` and `list`".into())),
        };
        if runs.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        Ok(runs)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

/// One experiment: an instance, a method, a horizon and a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    #[serde(default = "default_method")]
    pub solver: Method,
    pub t: usize,
    /// Oracle averaging size (eigenvalue kinds).
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub oracle: OracleChoice,
    #[serde(default)]
    pub noise: NoiseLevel,
    #[serde(default)]
    pub stepsize: StepsizeChoice,
    #[serde(default)]
    pub m_bar: SupNormChoice,
    pub seeds: Seeds,
    #[serde(default)]
    pub checkpoints: CheckpointChoice,
    /// Number of random probes (besides the center and extreme points) for
    /// the `Err_vi` lower bound; absent means no `Err_vi` column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err_vi_probes: Option<usize>,
    /// Record wall times; off by default so that outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub output: Outputs,
}

fn default_method() -> Method {
    Method::Smp
}

fn default_k() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSource, solver: Method, t: usize, seeds: Seeds) -> Self {
        Self {
            instance,
            solver,
            t,
            k: 1,
            oracle: OracleChoice::Sampled,
            noise: NoiseLevel::Calibrated,
            stepsize: StepsizeChoice::Auto,
            m_bar: SupNormChoice::Auto,
            seeds,
            checkpoints: CheckpointChoice::Geometric,
            err_vi_probes: None,
            timing: false,
            output: Outputs::default(),
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::Config("horizon t must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("averaging size k must be at least 1".into()));
        }
        self.seeds.runs()?;
        self.checkpoint_list()?;
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive and finite, got {v}")))
            }
        };
        if let StepsizeChoice::Gamma(g) = self.stepsize {
            positive(g, "stepsize")?;
        }
        if let SupNormChoice::Value(v) = self.m_bar {
            positive(v, "m_bar")?;
        }
        if let NoiseLevel::Value(v) = self.noise {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("noise must be finite and nonnegative, got {v}")));
            }
        }
        if let OracleChoice::SignNoise(s) = self.oracle {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sign noise must be finite and nonnegative, got {s}")));
            }
        }
        Ok(())
    }

    pub fn checkpoint_list(&self) -> Result<Vec<usize>> {
        let list = match &self.checkpoints {
            CheckpointChoice::Geometric => geometric_checkpoints(self.t),
            CheckpointChoice::List(l) => l.clone(),
        };
        if list.is_empty() {
            return Err(Error::Config("at least one checkpoint is required".into()));
        }
        if list.windows(2).any(|w| w[0] >= w[1]) || list[0] == 0 || *list.last().unwrap() > self.t {
            return Err(Error::Config(format!("checkpoints must be strictly increasing within 1..={}", self.t)));
        }
        Ok(list)
    }
}

/// Problem constants reported with every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub alpha: f64,
    pub omega: f64,
    /// `L` handed to the solver.
    #[serde(rename = "L")]
    pub lip_l: f64,
    /// `M` used for the stepsize and the bounds.
    #[serde(rename = "M")]
    pub noise_m: f64,
    pub mu: f64,
    /// `(A, B)` of the composite representation.
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// `M̄` (mirror SA only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_bar: Option<f64>,
}

/// A resolved experiment, ready to run.
pub struct Prepared {
    pub instance: InstanceFile,
    pub problem: VIProblem,
    pub oracle: Arc<dyn StochasticOracle>,
    pub saddle: SaddleInstance,
    pub constants: Constants,
    pub gamma: f64,
    pub checkpoints: Vec<usize>,
    pub probes: Vec<Point>,
    pub calibration: Option<NoiseCalibration>,
    /// Scaling of an `sdf_system` instance.
    pub sdf: Option<SdfScaled>,
}

impl Prepared {
    /// `(K0, K1)` at checkpoint `s` for the run's stepsize (SMP only).
    pub fn bounds_at(&self, s: usize) -> Bounds {
        let c = &self.constants;
        bounds_for_stepsize(c.alpha, c.omega, c.noise_m, c.mu, s, self.gamma)
    }

    fn evaluate(&self, z: &Point) -> Result<ErrorValues> {
        let err_vi_probe = if self.probes.is_empty() {
            None
        } else {
            Some(err_vi_lower(&self.problem, z, &self.probes)?.value)
        };
        Ok(ErrorValues { err_nash: Some(err_nash_saddle(&self.saddle, z)?), err_vi_probe })
    }
}

fn positive_or(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{what} is {v}; supply it explicitly")))
    }
}

/// Resolves the instance, oracle, constants and stepsize of `cfg`.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let instance = cfg.instance.load()?;
    let checkpoints = cfg.checkpoint_list()?;
    match &instance.data {
        InstanceData::Eig(e) => prepare_eig(cfg, Arc::new(e.clone()), instance, checkpoints),
        InstanceData::Sdf(_) => prepare_sdf(cfg, instance, checkpoints),
    }
}

fn prepare_eig(
    cfg: &ExperimentConfig,
    eig: Arc<crate::eigopt::EigInstance>,
    instance: InstanceFile,
    checkpoints: Vec<usize>,
) -> Result<Prepared> {
    let ec = eig.constants(cfg.k)?;
    let saddle = eig.saddle_instance()?;
    let problem = saddle.problem.clone();
    let (oracle, noise_bound): (Arc<dyn StochasticOracle>, f64) = match cfg.oracle {
        OracleChoice::Sampled => (Arc::new(eig.averaged_oracle(cfg.k)?), ec.m_as),
        OracleChoice::Exact => (Arc::new(eig.exact_oracle()), 0.0),
        OracleChoice::SignNoise(s) => {
            let o = SignNoiseOracle::new(&problem, s)?;
            let m = o.noise_m();
            (Arc::new(o), m)
        }
    };
    let ab = eig_as_composite(&eig)?.constants_ab()?;
    let extra = EigExtra { f_sup: ec.f_sup, noise_bound };
    finish(cfg, instance, problem, oracle, saddle, ab, Some(extra), checkpoints, None)
}

fn prepare_sdf(cfg: &ExperimentConfig, instance: InstanceFile, checkpoints: Vec<usize>) -> Result<Prepared> {
    let sys = instance.sdf().expect("sdf data");
    let sc = sys.scale(cfg.t)?;
    let problem = sc.vi_problem()?;
    let saddle = sc.problem.saddle_instance(problem.clone());
    let oracle: Arc<dyn StochasticOracle> = match cfg.oracle {
        OracleChoice::Sampled => Arc::new(sc.oracle()),
        OracleChoice::Exact => Arc::new(ExactOracle::new(problem.operator.clone())),
        OracleChoice::SignNoise(s) => Arc::new(SignNoiseOracle::new(&problem, s)?),
    };
    let ab = sc.problem.constants_ab()?;
    finish(cfg, instance, problem, oracle, saddle, ab, None, checkpoints, Some(sc))
}

struct EigExtra {
    f_sup: f64,
    noise_bound: f64,
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &ExperimentConfig,
    instance: InstanceFile,
    problem: VIProblem,
    oracle: Arc<dyn StochasticOracle>,
    saddle: SaddleInstance,
    ab: ConstantsAB,
    eig: Option<EigExtra>,
    checkpoints: Vec<usize>,
    sdf: Option<SdfScaled>,
) -> Result<Prepared> {
    let cap = problem.setup.capacity()?;
    let mut calibration = None;
    let noise_m = match cfg.noise {
        NoiseLevel::Value(v) => v,
        NoiseLevel::Declared => oracle.noise_m(),
        NoiseLevel::AlmostSure => match &eig {
            Some(e) => e.noise_bound,
            None => return Err(Error::Config("`almost_sure` noise needs an eigenvalue instance".into())),
        },
        NoiseLevel::Calibrated if sdf.is_some() => oracle.noise_m(),
        NoiseLevel::Calibrated => {
            let pts = default_probes(&problem.setup, CALIBRATION_PROBES, CALIBRATION_PROBE_SEED);
            let cal = calibrate_noise(oracle.as_ref(), &problem, &pts, CALIBRATION_SAMPLES, CALIBRATION_SAMPLE_SEED)?;
            calibration = Some(cal);
            cal.m
        }
    };
    let m_bar = match (cfg.solver, cfg.m_bar) {
        (Method::Smp, _) => None,
        (Method::Rmsa, SupNormChoice::Value(v)) => Some(v),
        (Method::Rmsa, SupNormChoice::Auto) => match &eig {
            Some(e) => Some(e.f_sup.max(e.noise_bound)),
            None if matches!(cfg.stepsize, StepsizeChoice::Gamma(_)) => None,
            None => return Err(Error::Config("mirror SA on this instance needs `m_bar` or an explicit stepsize".into())),
        },
    };
    let gamma = match (cfg.stepsize, cfg.solver) {
        (StepsizeChoice::Gamma(g), _) => g,
        (StepsizeChoice::Auto, Method::Smp) => match &sdf {
            Some(sc) => sc.gamma,
            None => constant_stepsize(cap.alpha, cap.omega_radius, problem.lip_l, noise_m, cfg.t)?,
        },
        (StepsizeChoice::Auto, Method::Rmsa) => {
            rmsa_stepsize(cap.alpha, cap.omega_radius, positive_or(m_bar.unwrap_or(0.0), "m_bar")?, cfg.t)?
        }
    };
    if cfg.solver == Method::Smp {
        StepsizePolicy::constant(gamma, cfg.t)?.check_feasible(cap.alpha, problem.lip_l)?;
    }
    let probes = match cfg.err_vi_probes {
        Some(n) => default_probes(&problem.setup, n, ERR_VI_PROBE_SEED),
        None => Vec::new(),
    };
    let constants = Constants {
        alpha: cap.alpha,
        omega: cap.omega_radius,
        lip_l: problem.lip_l,
        noise_m,
        mu: oracle.bias_mu(),
        a: ab.a,
        b: ab.b,
        m_bar,
    };
    Ok(Prepared { instance, problem, oracle, saddle, constants, gamma, checkpoints, probes, calibration, sdf })
}

/// Thread pool honouring `SMPX_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every seed of a prepared experiment (in parallel, collected in seed order).
pub fn run_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<RunRecord>> {
    let runs = cfg.seeds.runs()?;
    let policy = StepsizePolicy::constant(prep.gamma, cfg.t)?;
    let eval = |z: &Point| prep.evaluate(z);
    let one = |run: &u64| -> Result<RunRecord> {
        let seed = RunSeed::new(cfg.seeds.base, *run);
        let start = Instant::now();
        let mut rec = match cfg.solver {
            Method::Smp => smp_run(&prep.problem, prep.oracle.as_ref(), policy, seed, &prep.checkpoints, &eval)?,
            Method::Rmsa => rmsa_run(&prep.problem, prep.oracle.as_ref(), policy, seed, &prep.checkpoints, &eval)?,
        };
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(rec)
    };
    thread_pool()?.install(|| runs.par_iter().map(one).collect())
}

/// Records, summary and sidecar of one experiment.
pub struct ExperimentOutput {
    pub prepared: Prepared,
    pub records: Vec<RunRecord>,
    pub summary: SummaryTable,
    pub sidecar: Sidecar,
}

/// Runs `cfg` and writes the configured output files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prepared = prepare(cfg)?;
    let records = run_prepared(cfg, &prepared)?;
    let summary = SummaryTable::from_records(&records, &prepared, cfg.solver)?;
    let sidecar = Sidecar::new(cfg, &prepared, &summary);
    if let Some(p) = &cfg.output.csv {
        write_file(p, &records_csv(&records, cfg.timing))?;
    }
    if let Some(p) = &cfg.output.json {
        write_file(p, &sidecar.to_json()?)?;
    }
    Ok(ExperimentOutput { prepared, records, summary, sidecar })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CSV_HEADER: &str = "seed,t_checkpoint,err_nash,err_vi_probe,gamma,oracle_calls,wall_ms";

/// One row per seed and checkpoint; `wall_ms` is the run's total and is left
/// empty unless `timing` is set.
pub fn records_csv(records: &[RunRecord], timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let wall = if timing { r.wall_ms.to_string() } else { String::new() };
        for cp in &r.checkpoints {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.seed.run,
                cp.t,
                opt(cp.errors.err_nash),
                opt(cp.errors.err_vi_probe),
                r.gamma,
                cp.oracle_calls,
                wall
            );
        }
    }
    out
}

/// Per-seed values of one error measure at each checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub ts: Vec<usize>,
    /// `values[seed][checkpoint]`.
    pub values: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(ts: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("series has no seeds".into()));
        }
        if values.iter().any(|v| v.len() != ts.len()) {
            return Err(Error::Input("every seed needs one value per checkpoint".into()));
        }
        Ok(Self { ts, values })
    }

    pub fn means(&self) -> Vec<f64> {
        column_means(&self.values, self.ts.len(), (0..self.values.len()).collect::<Vec<_>>().as_slice())
    }
}

fn column_means(values: &[Vec<f64>], cols: usize, rows: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; cols];
    for &r in rows {
        for (c, v) in values[r].iter().enumerate() {
            m[c] += v;
        }
    }
    m.iter().map(|s| s / rows.len() as f64).collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            median: quantile(&s, 0.5),
            q10: quantile(&s, 0.1),
            q90: quantile(&s, 0.9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: usize,
    pub err_nash: Stats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub err_vi_probe: Option<Stats>,
    /// `K0`, `K1` for the run's stepsize over `t` steps (SMP only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
}

/// Per-checkpoint statistics over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub seeds: usize,
    pub rows: Vec<SummaryRow>,
    #[serde(skip)]
    err_nash: Option<Series>,
}

impl SummaryTable {
    pub fn from_records(records: &[RunRecord], prep: &Prepared, method: Method) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::Input("no run records".into()))?;
        let ts: Vec<usize> = first.checkpoints.iter().map(|c| c.t).collect();
        let collect = |f: &dyn Fn(&ErrorValues) -> Option<f64>| -> Option<Vec<Vec<f64>>> {
            records.iter().map(|r| r.checkpoints.iter().map(|c| f(&c.errors)).collect()).collect()
        };
        let nash = collect(&|e| e.err_nash).ok_or_else(|| Error::Input("missing Err_N values".into()))?;
        let vi = collect(&|e| e.err_vi_probe);
        let rows = ts
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let col = |m: &Vec<Vec<f64>>| m.iter().map(|v| v[i]).collect::<Vec<f64>>();
                let b = (method == Method::Smp).then(|| prep.bounds_at(t));
                SummaryRow {
                    t,
                    err_nash: Stats::of(&col(&nash)),
                    err_vi_probe: vi.as_ref().map(|m| Stats::of(&col(m))),
                    k0: b.map(|b| b.k0),
                    k1: b.map(|b| b.k1),
                }
            })
            .collect();
        Ok(Self { seeds: records.len(), rows, err_nash: Some(Series::new(ts, nash)?) })
    }

    pub fn err_nash_series(&self) -> Option<&Series> {
        self.err_nash.as_ref()
    }

    pub fn final_row(&self) -> &SummaryRow {
        self.rows.last().expect("non-empty summary")
    }
}

/// Least-squares slope of `log(mean)` against `log t`, with a bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn log_slope(ts: &[f64], means: &[f64]) -> Result<f64> {
    if means.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::Numerical("degenerate series: a mean error is zero, negative or non-finite".into()));
    }
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    Ok(ls_slope(ts, &ys))
}

/// Slope over checkpoints in `t_range` (inclusive); 200 bootstrap resamples
/// over seeds give a 95% interval.
pub fn fit_slope(series: &Series, t_range: (usize, usize)) -> Result<SlopeFit> {
    let idx: Vec<usize> = (0..series.ts.len()).filter(|&i| series.ts[i] >= t_range.0 && series.ts[i] <= t_range.1).collect();
    if idx.len() < 4 {
        return Err(Error::Config(format!("slope fit needs at least 4 checkpoints in range, got {}", idx.len())));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| (series.ts[i] as f64).ln()).collect();
    let pick = |m: Vec<f64>| idx.iter().map(|&i| m[i]).collect::<Vec<f64>>();
    let slope = log_slope(&xs, &pick(series.means()))?;
    let n = series.values.len();
    let mut stream = RandomStream::new(BOOTSTRAP_SEED, 0);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let rows: Vec<usize> = (0..n).map(|_| (stream.uniform() * n as f64) as usize % n).collect();
        if let Ok(s) = log_slope(&xs, &pick(column_means(&series.values, series.ts.len(), &rows))) {
            boot.push(s);
        }
    }
    if boot.is_empty() {
        return Err(Error::Numerical("degenerate series: every bootstrap resample is degenerate".into()));
    }
    boot.sort_by(f64::total_cmp);
    Ok(SlopeFit { slope, ci_low: quantile(&boot, 0.025), ci_high: quantile(&boot, 0.975), points: idx.len() })
}

/// JSON companion of the CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: String,
    pub config: ExperimentConfig,
    pub instance_kind: InstanceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_inf: Option<f64>,
    pub constants: Constants,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<NoiseCalibration>,
    /// `K0*`, `K1*` at the horizon (SMP only).
    #[serde(rename = "K0_star", skip_serializing_if = "Option::is_none")]
    pub k0_star: Option<f64>,
    #[serde(rename = "K1_star", skip_serializing_if = "Option::is_none")]
    pub k1_star: Option<f64>,
    /// Predicted bound on `max_ℓ β_ℓ λ_max(ψ_ℓ(x̂_t))` (sdf only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdf_bound: Option<f64>,
    pub summary: SummaryTable,
}

impl Sidecar {
    pub fn new(cfg: &ExperimentConfig, prep: &Prepared, summary: &SummaryTable) -> Self {
        let c = &prep.constants;
        let star = match (cfg.solver, cfg.stepsize, &prep.sdf) {
            (Method::Smp, StepsizeChoice::Auto, None) => {
                Some(theoretical_bounds(c.alpha, c.omega, c.lip_l, c.noise_m, c.mu, cfg.t))
            }
            (Method::Smp, _, _) => Some(prep.bounds_at(cfg.t)),
            (Method::Rmsa, _, _) => None,
        };
        Self {
            version: crate::VERSION.to_string(),
            config: cfg.clone(),
            instance_kind: prep.instance.kind,
            a_inf: prep.instance.a_inf,
            constants: *c,
            gamma: prep.gamma,
            calibration: prep.calibration,
            k0_star: star.map(|b| b.k0),
            k1_star: star.map(|b| b.k1),
            sdf_bound: prep.sdf.as_ref().map(|s| s.predicted_bound),
            summary: summary.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Reads `(t, per-seed Err_N)` back from a CSV written by [`records_csv`].
pub fn series_from_csv(text: &str) -> Result<Series> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Input("unexpected CSV header".into()));
    }
    let mut ts: Vec<usize> = Vec::new();
    let mut seeds: Vec<u64> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Input(format!("CSV line {}: malformed row", n + 2));
        if f.len() != 7 {
            return Err(bad());
        }
        let seed: u64 = f[0].parse().map_err(|_| bad())?;
        let t: usize = f[1].parse().map_err(|_| bad())?;
        let err: f64 = f[2].parse().map_err(|_| bad())?;
        if seeds.last() != Some(&seed) {
            seeds.push(seed);
            values.push(Vec::new());
        }
        let row = values.last_mut().unwrap();
        if seeds.len() == 1 {
            ts.push(t);
        } else if ts.get(row.len()) != Some(&t) {
            return Err(Error::Input(format!("CSV line {}: checkpoints differ between seeds", n + 2)));
        }
        row.push(err);
    }
    Series::new(ts, values)
}
