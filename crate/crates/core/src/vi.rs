//! Variational inequality problems, stochastic oracles and error measures.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DualVector, Point, ProxSetup};
use crate::rng::RandomStream;
use crate::symmat::{BlockSymMatrix, SymMatrix};

/// Absolute tolerance for sampled inequality checks.
pub const CHECK_TOL: f64 = 1e-8;

/// Exact monotone operator `F : Z → E`.
pub trait Operator: Send + Sync {
    fn eval(&self, z: &Point) -> Result<DualVector>;
}

impl<F> Operator for F
where
    F: Fn(&Point) -> Result<DualVector> + Send + Sync,
{
    fn eval(&self, z: &Point) -> Result<DualVector> {
        self(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Generic,
    Saddle,
    Nash,
}

/// Domain, operator and the regularity constants of
/// `‖F(z) − F(z')‖_* ≤ L‖z − z'‖ + M`.
#[derive(Clone)]
pub struct VIProblem {
    pub setup: ProxSetup,
    pub operator: Arc<dyn Operator>,
    pub lip_l: f64,
    pub var_m: f64,
    pub kind: ProblemKind,
}

impl std::fmt::Debug for VIProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VIProblem")
            .field("setup", &self.setup)
            .field("lip_l", &self.lip_l)
            .field("var_m", &self.var_m)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl VIProblem {
    pub fn new(setup: ProxSetup, operator: Arc<dyn Operator>, lip_l: f64, var_m: f64, kind: ProblemKind) -> Result<Self> {
        if !(lip_l >= 0.0 && lip_l.is_finite() && var_m >= 0.0 && var_m.is_finite()) {
            return Err(Error::Config(format!("regularity constants must be finite and nonnegative, got L={lip_l}, M={var_m}")));
        }
        Ok(Self { setup, operator, lip_l, var_m, kind })
    }

    /// Smallest `⟨F(z) − F(z'), z − z'⟩` over `pairs` random pairs; monotone
    /// operators give values `≥ −1e-8`.
    pub fn sampled_monotonicity(&self, pairs: usize, seed: u64) -> Result<f64> {
        let mut s = RandomStream::new(seed, 0);
        let mut worst = f64::INFINITY;
        for _ in 0..pairs {
            let z = self.setup.random_point(&mut s);
            let w = self.setup.random_point(&mut s);
            let d = self.operator.eval(&z)?.sub(&self.operator.eval(&w)?)?;
            worst = worst.min(d.inner(&z.sub(&w)?)?);
        }
        Ok(worst)
    }

    /// Largest excess `‖F(z) − F(z')‖_* − L‖z − z'‖ − M` over random pairs.
    pub fn sampled_regularity_excess(&self, pairs: usize, seed: u64) -> Result<f64> {
        let mut s = RandomStream::new(seed, 1);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let z = self.setup.random_point(&mut s);
            let w = self.setup.random_point(&mut s);
            let d = self.operator.eval(&z)?.sub(&self.operator.eval(&w)?)?;
            let lhs = self.setup.dual_norm(&d)?;
            let rhs = self.lip_l * self.setup.norm(&z.sub(&w)?)? + self.var_m;
            worst = worst.max(lhs - rhs);
        }
        Ok(worst)
    }
}

/// Stochastic oracle `Ξ(z, ζ)` for `F` with bias `μ` and noise level `M`.
pub trait StochasticOracle: Send + Sync {
    fn sample(&self, z: &Point, stream: &mut RandomStream) -> Result<DualVector>;

    fn bias_mu(&self) -> f64 {
        0.0
    }

    fn noise_m(&self) -> f64;

    /// Whether the light-tail (sub-Gaussian) condition holds with `noise_m`.
    fn subgaussian(&self) -> bool {
        false
    }
}

/// Noise-free oracle returning `F(z)`.
#[derive(Clone)]
pub struct ExactOracle {
    operator: Arc<dyn Operator>,
}

impl ExactOracle {
    pub fn new(operator: Arc<dyn Operator>) -> Self {
        Self { operator }
    }
}

impl StochasticOracle for ExactOracle {
    fn sample(&self, z: &Point, _stream: &mut RandomStream) -> Result<DualVector> {
        self.operator.eval(z)
    }

    fn noise_m(&self) -> f64 {
        0.0
    }

    fn subgaussian(&self) -> bool {
        true
    }
}

/// Closed-form inner optimisations of a convex-concave saddle function.
///
/// `primal_value(x) = max_y φ(x, y)` and `dual_value(y) = min_x φ(x, y)`.
pub trait SaddleGap: Send + Sync {
    fn primal_value(&self, x: &Point) -> Result<f64>;
    fn dual_value(&self, y: &Point) -> Result<f64>;
}

/// A saddle-point v.i. over `Z = X × Y` with exact primal and dual values.
#[derive(Clone)]
pub struct SaddleInstance {
    pub problem: VIProblem,
    pub gap: Arc<dyn SaddleGap>,
}

/// Probe-based lower bound on the v.i. error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBound {
    pub value: f64,
    pub probes: usize,
}

/// `max_{u ∈ probes} ⟨F(u), z − u⟩`, a certified lower bound on `Err_vi(z)`.
pub fn err_vi_lower(problem: &VIProblem, z: &Point, probes: &[Point]) -> Result<ProbeBound> {
    if probes.is_empty() {
        return Err(Error::Input("probe set is empty".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for u in probes {
        let fu = problem.operator.eval(u)?;
        best = best.max(fu.inner(&z.sub(u)?)?);
    }
    Ok(ProbeBound { value: best, probes: probes.len() })
}

/// Duality gap `primal_value(x) − dual_value(y)` of `z = (x, y)`.
pub fn err_nash_saddle(inst: &SaddleInstance, z: &Point) -> Result<f64> {
    let (x, y) = z
        .as_pair()
        .ok_or_else(|| Error::Input("saddle error needs a pair point (x, y)".into()))?;
    Ok(inst.gap.primal_value(x)? - inst.gap.dual_value(y)?)
}

/// Monte-Carlo estimates of `‖E{Ξ − F}‖_*`, `E{‖Ξ − F‖_*²}` and `E{‖Ξ‖_*²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStats {
    pub bias: f64,
    pub second_moment: f64,
    pub raw_second_moment: f64,
}

pub fn oracle_stats(
    oracle: &dyn StochasticOracle,
    problem: &VIProblem,
    z: &Point,
    n_samples: usize,
    seed: u64,
) -> Result<OracleStats> {
    if n_samples == 0 {
        return Err(Error::Input("oracle_stats needs at least one sample".into()));
    }
    let f = problem.operator.eval(z)?;
    let mut stream = RandomStream::new(seed, 0);
    let mut mean = f.zeros_like();
    let mut second = 0.0;
    let mut raw = 0.0;
    for _ in 0..n_samples {
        let xi = oracle.sample(z, &mut stream)?;
        raw += problem.setup.dual_norm(&xi)?.powi(2);
        let d = xi.sub(&f)?;
        second += problem.setup.dual_norm(&d)?.powi(2);
        mean.axpy(1.0, &d)?;
    }
    let n = n_samples as f64;
    mean.scale(1.0 / n);
    Ok(OracleStats { bias: problem.setup.dual_norm(&mean)?, second_moment: second / n, raw_second_moment: raw / n })
}

/// Empirical noise levels over a set of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    /// `max_z sqrt(E‖Ξ(z) − F(z)‖_*²)`.
    pub m: f64,
    /// `max_z sqrt(E‖Ξ(z)‖_*²)`.
    pub m_bar: f64,
}

/// Monte-Carlo calibration of `M` and `M̄`; point `i` is sampled with seed `seed + i`.
pub fn calibrate_noise(
    oracle: &dyn StochasticOracle,
    problem: &VIProblem,
    points: &[Point],
    n_samples: usize,
    seed: u64,
) -> Result<NoiseCalibration> {
    if points.is_empty() {
        return Err(Error::Input("calibration needs at least one point".into()));
    }
    let mut cal = NoiseCalibration { m: 0.0, m_bar: 0.0 };
    for (i, z) in points.iter().enumerate() {
        let s = oracle_stats(oracle, problem, z, n_samples, seed.wrapping_add(i as u64))?;
        cal.m = cal.m.max(s.second_moment.sqrt());
        cal.m_bar = cal.m_bar.max(s.raw_second_moment.sqrt());
    }
    Ok(cal)
}

/// Adds `σ ε` to every vector entry and every matrix diagonal entry.
fn add_signs(p: &mut Point, sigma: f64, sign: &mut dyn FnMut() -> f64) {
    match p {
        Point::Vector(v) => v.iter_mut().for_each(|x| *x += sigma * sign()),
        Point::Blocks(b) => {
            for l in 0..b.structure().num_blocks() {
                let blk = b.block_mut(l);
                for i in 0..blk.dim() {
                    let v = blk.get(i, i) + sigma * sign();
                    blk.set(i, i, v);
                }
            }
        }
        Point::Pair(x, y) => {
            add_signs(x, sigma, sign);
            add_signs(y, sigma, sign);
        }
    }
}

/// `Ξ(z) = F(z) + σ ε` with independent Rademacher signs on vector entries
/// and matrix diagonals; `‖Ξ − F‖_*` is the same for every sign pattern.
#[derive(Clone)]
pub struct SignNoiseOracle {
    operator: Arc<dyn Operator>,
    sigma: f64,
    noise_m: f64,
}

impl SignNoiseOracle {
    pub fn new(problem: &VIProblem, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Input(format!("noise scale must be finite and nonnegative, got {sigma}")));
        }
        let mut pattern = problem.operator.eval(&problem.setup.center())?.zeros_like();
        add_signs(&mut pattern, sigma, &mut || 1.0);
        let noise_m = problem.setup.dual_norm(&pattern)?;
        Ok(Self { operator: problem.operator.clone(), sigma, noise_m })
    }
}

impl StochasticOracle for SignNoiseOracle {
    fn sample(&self, z: &Point, stream: &mut RandomStream) -> Result<DualVector> {
        let mut xi = self.operator.eval(z)?;
        if self.sigma > 0.0 {
            add_signs(&mut xi, self.sigma, &mut || stream.rademacher());
        }
        Ok(xi)
    }

    fn noise_m(&self) -> f64 {
        self.noise_m
    }

    fn subgaussian(&self) -> bool {
        true
    }
}

/// Default probe set: the center, the extreme points of each factor and
/// `n_random` seeded random points.
///
/// Simplex factors contribute their vertices, spectahedron factors
/// `H(±30 E_ii)` for every diagonal position, Euclidean balls `±R e_i`. For a
/// product the factor probes are paired with the other factor's center.
pub fn default_probes(setup: &ProxSetup, n_random: usize, seed: u64) -> Vec<Point> {
    let mut probes = vec![setup.center()];
    probes.extend(extreme_probes(setup));
    let mut s = RandomStream::new(seed, 0);
    probes.extend((0..n_random).map(|_| setup.random_point(&mut s)));
    probes
}

fn extreme_probes(setup: &ProxSetup) -> Vec<Point> {
    match setup {
        ProxSetup::Euclidean { dim, radius } => (0..*dim)
            .flat_map(|i| {
                [1.0, -1.0].map(|sgn| {
                    let mut v = vec![0.0; *dim];
                    v[i] = sgn * radius;
                    Point::Vector(v)
                })
            })
            .collect(),
        ProxSetup::Simplex { dim } => (0..*dim)
            .map(|i| {
                let mut v = vec![0.0; *dim];
                v[i] = 1.0;
                Point::Vector(v)
            })
            .collect(),
        ProxSetup::Spectahedron { structure } => {
            let mut out = Vec::new();
            for (l, &p) in structure.sizes().iter().enumerate() {
                for i in 0..p {
                    for sgn in [30.0, -30.0] {
                        let mut b = BlockSymMatrix::zeros(structure);
                        let mut blk = SymMatrix::zeros(p);
                        blk.set(i, i, sgn);
                        *b.block_mut(l) = blk;
                        out.push(Point::Blocks(b.entropy_map().expect("finite")));
                    }
                }
            }
            out
        }
        ProxSetup::Product(p) => {
            let cx = p.x.center();
            let cy = p.y.center();
            let mut out: Vec<Point> = extreme_probes(&p.x).into_iter().map(|x| Point::pair(x, cy.clone())).collect();
            out.extend(extreme_probes(&p.y).into_iter().map(|y| Point::pair(cx.clone(), y)));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_problem() -> VIProblem {
        let setup = ProxSetup::euclidean(1, 1.0).unwrap();
        let op: Arc<dyn Operator> = Arc::new(|z: &Point| Ok(z.clone()));
        VIProblem::new(setup, op, 1.0, 0.0, ProblemKind::Generic).unwrap()
    }

    fn v(x: &[f64]) -> Point {
        Point::Vector(x.to_vec())
    }

    #[test]
    fn probe_bound_examples() {
        let p = identity_problem();
        let probes = vec![v(&[-1.0]), v(&[0.0]), v(&[1.0])];
        let b = err_vi_lower(&p, &v(&[0.5]), &probes).unwrap();
        assert_eq!(b.value, 0.0);
        assert_eq!(b.probes, 3);
        // exact solution z* = 0
        let b = err_vi_lower(&p, &v(&[0.0]), &default_probes(&p.setup, 50, 1)).unwrap();
        assert!(b.value <= 1e-8);
        // adding u = z contributes exactly zero and never lowers the bound
        let mut more = probes.clone();
        more.push(v(&[0.5]));
        let b2 = err_vi_lower(&p, &v(&[0.5]), &more).unwrap();
        assert!(b2.value >= b.value);
        assert_eq!(err_vi_lower(&p, &v(&[0.5]), &[v(&[0.5])]).unwrap().value, 0.0);
        assert!(matches!(err_vi_lower(&p, &v(&[0.5]), &[]), Err(Error::Input(_))));
    }

    struct ScalarGame;

    // X = Δ₂, Y = {1}, φ(x, y) = (x₁ + 3x₂)·y
    impl SaddleGap for ScalarGame {
        fn primal_value(&self, x: &Point) -> Result<f64> {
            let x = x.as_vector().unwrap();
            Ok(x[0] + 3.0 * x[1])
        }
        fn dual_value(&self, y: &Point) -> Result<f64> {
            let y = y.as_vector().unwrap()[0];
            // minimum over the vertices of Δ₂
            Ok((1.0 * y).min(3.0 * y))
        }
    }

    fn scalar_game() -> SaddleInstance {
        let setup = ProxSetup::simplex(2).unwrap();
        let op: Arc<dyn Operator> = Arc::new(|_: &Point| Ok(v(&[1.0, 3.0])));
        SaddleInstance {
            problem: VIProblem::new(setup, op, 0.0, 0.0, ProblemKind::Saddle).unwrap(),
            gap: Arc::new(ScalarGame),
        }
    }

    #[test]
    fn nash_gap_examples() {
        let inst = scalar_game();
        let z = Point::pair(v(&[0.5, 0.5]), v(&[1.0]));
        assert!((err_nash_saddle(&inst, &z).unwrap() - 1.0).abs() < 1e-15);
        let star = Point::pair(v(&[1.0, 0.0]), v(&[1.0]));
        assert_eq!(err_nash_saddle(&inst, &star).unwrap(), 0.0);
        assert!(err_nash_saddle(&inst, &v(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn minimization_reduces_to_objective_residual() {
        // m = 1: Err_N with a constant dual is φ(x) − min φ.
        let inst = scalar_game();
        let mut s = RandomStream::from_seed(2);
        for _ in 0..50 {
            let x = inst.problem.setup.random_point(&mut s);
            let xv = x.as_vector().unwrap().to_vec();
            let gap = err_nash_saddle(&inst, &Point::pair(x, v(&[1.0]))).unwrap();
            assert!((gap - (xv[0] + 3.0 * xv[1] - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_oracle_stats_are_zero() {
        let p = identity_problem();
        let oracle = ExactOracle::new(p.operator.clone());
        let st = oracle_stats(&oracle, &p, &v(&[0.3]), 10, 0).unwrap();
        assert_eq!((st.bias, st.second_moment), (0.0, 0.0));
        assert!(oracle_stats(&oracle, &p, &v(&[0.3]), 0, 0).is_err());
    }

    #[test]
    fn sampled_checks_on_identity() {
        let p = identity_problem();
        assert!(p.sampled_monotonicity(1000, 3).unwrap() >= -CHECK_TOL);
        assert!(p.sampled_regularity_excess(1000, 3).unwrap() <= CHECK_TOL);
        assert!(VIProblem::new(p.setup.clone(), p.operator.clone(), -1.0, 0.0, ProblemKind::Generic).is_err());
    }

    #[test]
    fn default_probes_are_feasible() {
        let st = crate::symmat::BlockStructure::new(vec![2, 2]).unwrap();
        let setup = ProxSetup::product(ProxSetup::simplex(3).unwrap(), ProxSetup::spectahedron(st).unwrap()).unwrap();
        let probes = default_probes(&setup, 100, 4);
        assert_eq!(probes.len(), 1 + 3 + 8 + 100);
        assert!(probes.iter().all(|p| setup.contains(p, 1e-10)));
        assert_eq!(probes, default_probes(&setup, 100, 4));
    }
}
