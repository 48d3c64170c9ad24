//! Stochastic Mirror-Prox and the robust mirror SA baseline.
//!
//! One SMP step from `r = r_{τ-1}` with constant stepsize `γ`:
//!
//! ```text
//! w_τ = P(r, γ Ξ(r))
//! r_τ = P(r, γ Ξ(w_τ))
//! ```
//!
//! and the output after `s` steps is the average of `w_1, ..., w_s`. The
//! baseline takes a single step `r_τ = P(r_{τ-1}, γ Ξ(r_{τ-1}))` and averages
//! the `r_τ`. Both start at the prox center.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::rng::RandomStream;
use crate::vi::{StochasticOracle, VIProblem};

/// Constant stepsize `γ` over a fixed horizon `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsizePolicy {
    pub gamma: f64,
    pub horizon: usize,
}

impl StepsizePolicy {
    pub fn constant(gamma: f64, horizon: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("stepsize must be positive and finite, got {gamma}")));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(Self { gamma, horizon })
    }

    /// Checks `γ ≤ α / (√3 L)`.
    pub fn check_feasible(&self, alpha: f64, lip_l: f64) -> Result<()> {
        if lip_l > 0.0 {
            let cap = alpha / (3f64.sqrt() * lip_l);
            if self.gamma > cap + 1e-12 {
                return Err(Error::Config(format!("stepsize {} exceeds alpha/(sqrt(3) L) = {cap}", self.gamma)));
            }
        }
        Ok(())
    }
}

/// `γ = min[α/(√3 L), (αΩ/M) sqrt(2/(21 t))]`.
pub fn constant_stepsize(alpha: f64, omega_radius: f64, lip_l: f64, noise_m: f64, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if !(lip_l >= 0.0 && noise_m >= 0.0) {
        return Err(Error::Config(format!("L and M must be nonnegative, got L={lip_l}, M={noise_m}")));
    }
    if lip_l == 0.0 && noise_m == 0.0 {
        return Err(Error::Config("L = M = 0: the operator is constant and exact, any stepsize works".into()));
    }
    let smooth = if lip_l > 0.0 { alpha / (3f64.sqrt() * lip_l) } else { f64::INFINITY };
    let noisy = if noise_m > 0.0 {
        alpha * omega_radius / noise_m * (2.0 / (21.0 * t as f64)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(smooth.min(noisy))
}

/// Default constant stepsize of the mirror SA baseline, `αΩ / (M̄ √t)`.
pub fn rmsa_stepsize(alpha: f64, omega_radius: f64, m_bar: f64, t: usize) -> Result<f64> {
    if !(m_bar > 0.0) || t == 0 {
        return Err(Error::Config("mirror SA stepsize needs M̄ > 0 and t >= 1".into()));
    }
    Ok(alpha * omega_radius / (m_bar * (t as f64).sqrt()))
}

/// Expected-error bound `K0*` and deviation scale `K1*` under the tuned stepsize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub k0: f64,
    pub k1: f64,
}

/// `K0* = (7/4)Ω²L/t + 7ΩM/√t + 2μΩ`, `K1* = (7/2)ΩM/√t`.
///
/// These hold for the stepsize of [`constant_stepsize`]; `alpha` only enters
/// through that stepsize.
pub fn theoretical_bounds(alpha: f64, omega_radius: f64, lip_l: f64, noise_m: f64, bias_mu: f64, t: usize) -> Bounds {
    debug_assert!(alpha > 0.0 && t >= 1);
    let t = t as f64;
    let om = omega_radius;
    Bounds {
        k0: 1.75 * om * om * lip_l / t + 7.0 * om * noise_m / t.sqrt() + 2.0 * bias_mu * om,
        k1: 3.5 * om * noise_m / t.sqrt(),
    }
}

/// Bounds for an arbitrary feasible constant stepsize:
/// `K0 = αΩ²/(tγ) + 21M²γ/(2α) + 2μΩ`, `K1 = 7M²γ/(2α) + 2MΩ/√t`.
pub fn bounds_for_stepsize(alpha: f64, omega_radius: f64, noise_m: f64, bias_mu: f64, t: usize, gamma: f64) -> Bounds {
    let t = t as f64;
    let om = omega_radius;
    Bounds {
        k0: alpha * om * om / (t * gamma) + 21.0 * noise_m * noise_m * gamma / (2.0 * alpha) + 2.0 * bias_mu * om,
        k1: 7.0 * noise_m * noise_m * gamma / (2.0 * alpha) + 2.0 * noise_m * om / t.sqrt(),
    }
}

/// Error measures evaluated at a checkpoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorValues {
    pub err_nash: Option<f64>,
    pub err_vi_probe: Option<f64>,
}

/// Evaluates error measures of an averaged solution.
pub trait Evaluator: Sync {
    fn evaluate(&self, z: &Point) -> Result<ErrorValues>;
}

impl<F> Evaluator for F
where
    F: Fn(&Point) -> Result<ErrorValues> + Sync,
{
    fn evaluate(&self, z: &Point) -> Result<ErrorValues> {
        self(z)
    }
}

/// No error evaluation.
pub struct NoEvaluation;

impl Evaluator for NoEvaluation {
    fn evaluate(&self, _z: &Point) -> Result<ErrorValues> {
        Ok(ErrorValues::default())
    }
}

/// Seed of one replication: the stream is keyed by `(base, run)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeed {
    pub base: u64,
    pub run: u64,
}

impl RunSeed {
    pub fn new(base: u64, run: u64) -> Self {
        Self { base, run }
    }

    pub fn stream(&self) -> RandomStream {
        RandomStream::new(self.base, self.run)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: usize,
    pub averaged: Point,
    pub errors: ErrorValues,
    pub oracle_calls: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Smp,
    Rmsa,
}

/// Trajectory summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub seed: RunSeed,
    pub t: usize,
    pub gamma: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub oracle_calls: u64,
    /// Wall time in milliseconds; excluded from equality of trajectories.
    #[serde(skip)]
    pub wall_ms: f64,
}

impl RunRecord {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least one checkpoint")
    }

    /// Same method, seed, stepsize and checkpoint data (wall time ignored).
    pub fn same_trajectory(&self, other: &RunRecord) -> bool {
        self.method == other.method
            && self.seed == other.seed
            && self.t == other.t
            && self.gamma.to_bits() == other.gamma.to_bits()
            && self.checkpoints == other.checkpoints
            && self.oracle_calls == other.oracle_calls
    }
}

/// Geometric checkpoints `{1, 2, 4, ..., t}` (always including `t`).
pub fn geometric_checkpoints(t: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 1;
    while s < t {
        out.push(s);
        s *= 2;
    }
    if t >= 1 {
        out.push(t);
    }
    out
}

fn validate_checkpoints(checkpoints: &[usize], t: usize) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::Config("at least one checkpoint is required".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("checkpoints must be strictly increasing".into()));
    }
    if checkpoints[0] == 0 || *checkpoints.last().unwrap() > t {
        return Err(Error::Config(format!("checkpoints must lie in 1..={t}")));
    }
    Ok(())
}

fn checked_sample(oracle: &dyn StochasticOracle, z: &Point, stream: &mut RandomStream, step: usize) -> Result<Point> {
    let xi = oracle.sample(z, stream)?;
    if !xi.is_finite() {
        return Err(Error::Numerical(format!("non-finite oracle output at step {step}")));
    }
    Ok(xi)
}

/// Runs `t = policy.horizon` SMP steps from the prox center.
pub fn smp_run(
    problem: &VIProblem,
    oracle: &dyn StochasticOracle,
    policy: StepsizePolicy,
    seed: RunSeed,
    checkpoints: &[usize],
    evaluator: &dyn Evaluator,
) -> Result<RunRecord> {
    let alpha = problem.setup.capacity()?.alpha;
    policy.check_feasible(alpha, problem.lip_l)?;
    run_from(Method::Smp, problem, oracle, policy, seed, checkpoints, evaluator, problem.setup.center())
}

/// Runs `t = policy.horizon` mirror SA steps from the prox center.
pub fn rmsa_run(
    problem: &VIProblem,
    oracle: &dyn StochasticOracle,
    policy: StepsizePolicy,
    seed: RunSeed,
    checkpoints: &[usize],
    evaluator: &dyn Evaluator,
) -> Result<RunRecord> {
    run_from(Method::Rmsa, problem, oracle, policy, seed, checkpoints, evaluator, problem.setup.center())
}

#[allow(clippy::too_many_arguments)]
fn run_from(
    method: Method,
    problem: &VIProblem,
    oracle: &dyn StochasticOracle,
    policy: StepsizePolicy,
    seed: RunSeed,
    checkpoints: &[usize],
    evaluator: &dyn Evaluator,
    start: Point,
) -> Result<RunRecord> {
    let t = policy.horizon;
    validate_checkpoints(checkpoints, t)?;
    let setup = &problem.setup;
    setup.check_interior(&start)?;
    let gamma = policy.gamma;
    let clock = Instant::now();
    let mut stream = seed.stream();
    let mut r = start;
    let mut sum = r.zeros_like();
    let mut calls = 0u64;
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for step in 1..=t {
        let xi_r = checked_sample(oracle, &r, &mut stream, step)?;
        calls += 1;
        match method {
            Method::Smp => {
                let w = setup.prox(&r, &xi_r.scaled(gamma))?;
                let xi_w = checked_sample(oracle, &w, &mut stream, step)?;
                calls += 1;
                r = setup.prox(&r, &xi_w.scaled(gamma))?;
                sum.axpy(1.0, &w)?;
            }
            Method::Rmsa => {
                r = setup.prox(&r, &xi_r.scaled(gamma))?;
                sum.axpy(1.0, &r)?;
            }
        }
        if next.peek().is_some_and(|&&c| c == step) {
            next.next();
            let averaged = sum.scaled(1.0 / step as f64);
            let errors = evaluator.evaluate(&averaged)?;
            records.push(Checkpoint { t: step, averaged, errors, oracle_calls: calls });
        }
    }
    Ok(RunRecord {
        method,
        seed,
        t,
        gamma,
        checkpoints: records,
        oracle_calls: calls,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::ProxSetup;
    use crate::vi::{ExactOracle, Operator, ProblemKind};

    fn v(x: f64) -> Point {
        Point::Vector(vec![x])
    }

    fn interval_problem() -> VIProblem {
        let op: Arc<dyn Operator> = Arc::new(|z: &Point| Ok(z.clone()));
        VIProblem::new(ProxSetup::euclidean(1, 1.0).unwrap(), op, 1.0, 0.0, ProblemKind::Generic).unwrap()
    }

    fn scalar(p: &Point) -> f64 {
        p.as_vector().unwrap()[0]
    }

    #[test]
    fn smp_hand_simulated_from_forced_start() {
        let p = interval_problem();
        let oracle = ExactOracle::new(p.operator.clone());
        let policy = StepsizePolicy::constant(0.5, 3).unwrap();
        let rec = run_from(Method::Smp, &p, &oracle, policy, RunSeed::new(0, 0), &[1, 2, 3], &NoEvaluation, v(1.0)).unwrap();
        // w1 = 0.5, r1 = 0.75, w2 = 0.375, r2 = 0.5625, w3 = 0.28125
        assert_eq!(scalar(&rec.checkpoints[0].averaged), 0.5);
        assert_eq!(scalar(&rec.checkpoints[1].averaged), (0.5 + 0.375) / 2.0);
        assert!((scalar(&rec.checkpoints[2].averaged) - (0.5 + 0.375 + 0.28125) / 3.0).abs() < 1e-15);
        assert_eq!(rec.oracle_calls, 6);
        assert_eq!(rec.checkpoints[1].oracle_calls, 4);
    }

    #[test]
    fn rmsa_hand_simulated_from_forced_start() {
        let p = interval_problem();
        let oracle = ExactOracle::new(p.operator.clone());
        let policy = StepsizePolicy::constant(0.5, 3).unwrap();
        let rec = run_from(Method::Rmsa, &p, &oracle, policy, RunSeed::new(0, 0), &[3], &NoEvaluation, v(1.0)).unwrap();
        // r1 = 0.5, r2 = 0.25, r3 = 0.125
        assert!((scalar(&rec.final_checkpoint().averaged) - (0.5 + 0.25 + 0.125) / 3.0).abs() < 1e-15);
        assert_eq!(rec.oracle_calls, 3);
    }

    #[test]
    fn center_start_stays_at_solution() {
        let p = interval_problem();
        let oracle = ExactOracle::new(p.operator.clone());
        let policy = StepsizePolicy::constant(0.5, 5).unwrap();
        let rec = smp_run(&p, &oracle, policy, RunSeed::new(1, 0), &[5], &NoEvaluation).unwrap();
        assert_eq!(scalar(&rec.final_checkpoint().averaged), 0.0);
    }

    #[test]
    fn zero_operator_fixes_center() {
        let st = crate::symmat::BlockStructure::new(vec![2, 2]).unwrap();
        let setup = ProxSetup::product(ProxSetup::simplex(3).unwrap(), ProxSetup::spectahedron(st).unwrap()).unwrap();
        let center = setup.center();
        let zero = center.zeros_like();
        let op: Arc<dyn Operator> = Arc::new(move |_: &Point| Ok(zero.clone()));
        let p = VIProblem::new(setup, op, 0.0, 0.0, ProblemKind::Saddle).unwrap();
        let oracle = ExactOracle::new(p.operator.clone());
        let policy = StepsizePolicy::constant(0.3, 8).unwrap();
        for rec in [
            smp_run(&p, &oracle, policy, RunSeed::new(0, 0), &[8], &NoEvaluation).unwrap(),
            rmsa_run(&p, &oracle, policy, RunSeed::new(0, 0), &[8], &NoEvaluation).unwrap(),
        ] {
            let d = rec.final_checkpoint().averaged.sub(&center).unwrap();
            assert!(d.max_abs() < 1e-15);
        }
    }

    #[test]
    fn infeasible_stepsize_is_rejected() {
        let p = interval_problem();
        let oracle = ExactOracle::new(p.operator.clone());
        let policy = StepsizePolicy::constant(0.6, 3).unwrap();
        let err = smp_run(&p, &oracle, policy, RunSeed::new(0, 0), &[3], &NoEvaluation).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn checkpoint_validation() {
        let p = interval_problem();
        let oracle = ExactOracle::new(p.operator.clone());
        let policy = StepsizePolicy::constant(0.5, 3).unwrap();
        for bad in [&[][..], &[0][..], &[4][..], &[2, 2][..]] {
            assert!(smp_run(&p, &oracle, policy, RunSeed::new(0, 0), bad, &NoEvaluation).is_err());
        }
        assert_eq!(geometric_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(geometric_checkpoints(8), vec![1, 2, 4, 8]);
        assert_eq!(geometric_checkpoints(1), vec![1]);
    }

    #[test]
    fn non_finite_oracle_reports_step() {
        struct Broken;
        impl StochasticOracle for Broken {
            fn sample(&self, z: &Point, _s: &mut RandomStream) -> Result<Point> {
                Ok(z.scaled(f64::NAN))
            }
            fn noise_m(&self) -> f64 {
                0.0
            }
        }
        let p = interval_problem();
        let policy = StepsizePolicy::constant(0.5, 3).unwrap();
        let err = smp_run(&p, &Broken, policy, RunSeed::new(0, 0), &[3], &NoEvaluation).unwrap_err();
        assert_eq!(err, Error::Numerical("non-finite oracle output at step 1".into()));
    }

    #[test]
    fn stepsize_examples() {
        let g = constant_stepsize(1.0, 2f64.sqrt(), 0.0, 1.0, 42).unwrap();
        assert!((g - 2.0 / 882f64.sqrt()).abs() < 1e-15);
        assert!((g - 0.06734).abs() < 1e-5);
        assert!((constant_stepsize(1.0, 1.0, 1.0, 0.0, 10).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(matches!(constant_stepsize(1.0, 1.0, 0.0, 0.0, 10), Err(Error::Config(_))));
        // second branch takes over for long horizons and scales like t^{-1/2}
        let a = constant_stepsize(1.0, 1.0, 1.0, 1.0, 10_000).unwrap();
        let b = constant_stepsize(1.0, 1.0, 1.0, 1.0, 40_000).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bound_examples() {
        let b = theoretical_bounds(1.0, 2f64.sqrt(), 3.0, 0.0, 0.0, 10);
        assert!((b.k0 - 1.75 * 2.0 * 3.0 / 10.0).abs() < 1e-15);
        assert_eq!(b.k1, 0.0);
        let b = theoretical_bounds(1.0, 2f64.sqrt(), 0.0, 1.0, 0.0, 49);
        assert!((b.k0 - 2f64.sqrt()).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for t in 1..200 {
            let k0 = theoretical_bounds(1.0, 1.3, 2.0, 0.7, 0.1, t).k0;
            assert!(k0 <= prev);
            prev = k0;
        }
    }

    #[test]
    fn tuned_stepsize_bound_dominates_generic_bound() {
        // Plugging the tuned stepsize into the generic bound stays below K0*.
        for &(l, m, t) in &[(1.0, 0.0, 10usize), (0.0, 1.0, 100), (5.0, 0.3, 1000), (0.1, 4.0, 7)] {
            let om = 2f64.sqrt();
            let g = constant_stepsize(1.0, om, l, m, t).unwrap();
            let generic = bounds_for_stepsize(1.0, om, m, 0.0, t, g);
            let tuned = theoretical_bounds(1.0, om, l, m, 0.0, t);
            assert!(generic.k0 <= tuned.k0 * (1.0 + 1e-12), "{l} {m} {t}");
            assert!(generic.k1 <= tuned.k1 * (1.0 + 1e-12) + 1e-300);
        }
    }
}
