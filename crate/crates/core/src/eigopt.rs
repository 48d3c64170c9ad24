//! Eigenvalue minimisation over the simplex,
//!
//! ```text
//! min_{x ∈ Δ_n} λ_max(A_0 + x_1 A_1 + ... + x_n A_n),
//! ```
//!
//! solved as the bilinear saddle problem `min_x max_{y ∈ spectahedron} ⟨y, A(x)⟩`
//! with operator `F(x, y) = ([Tr(y A_j)]_j, −A_0 − Σ x_j A_j)`.
//!
//! The randomized oracle reads one data matrix and one diagonal block per call:
//! it draws `ȷ ~ x` and a block `ı ~ (Tr y_ℓ)_ℓ`, and returns
//! `Ξ = ([Tr(A_j^ı ȳ_ı)]_j, −(A_0 + A_ȷ))` with `ȳ_ı = y_ı / Tr(y_ı)`.
//! Averaging `k` independent draws gives the oracle `Ξ_k`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DualVector, Point, ProxSetup};
use crate::rng::RandomStream;
use crate::symmat::{BlockStructure, BlockSymMatrix};
use crate::vi::{ExactOracle, Operator, ProblemKind, SaddleGap, SaddleInstance, StochasticOracle, VIProblem};

/// Block-trace tolerance below zero before the oracle refuses a point.
const NU_TOL: f64 = 1e-12;

/// Data `A_0, A_1, ..., A_n` with a shared block structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EigInstanceData", into = "EigInstanceData")]
pub struct EigInstance {
    a0: BlockSymMatrix,
    a: Vec<BlockSymMatrix>,
    a_inf: f64,
}

#[derive(Serialize, Deserialize)]
struct EigInstanceData {
    a0: BlockSymMatrix,
    a: Vec<BlockSymMatrix>,
}

impl TryFrom<EigInstanceData> for EigInstance {
    type Error = Error;
    fn try_from(d: EigInstanceData) -> Result<Self> {
        EigInstance::new(d.a0, d.a)
    }
}

impl From<EigInstance> for EigInstanceData {
    fn from(e: EigInstance) -> Self {
        EigInstanceData { a0: e.a0, a: e.a }
    }
}

/// Constants of the eigenvalue saddle problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigConstants {
    /// `2 ln n + 4 ln p^(1)` as stated, without the data scale.
    pub l_stated: f64,
    /// `(2 ln n + 4 ln p^(1)) A_∞`, the Lipschitz constant handed to the solver.
    pub l_eff: f64,
    /// `27 (ln n + ln p^(1)) A_∞ / √k`.
    pub m: f64,
    /// Almost-sure bound `2 A_∞ sqrt(2 ln n + 2 ln p^(1))` on `‖Ξ_k − F‖_*`.
    pub m_as: f64,
    /// `(Ω_x², Ω_y²)`: squared weights of the product norm.
    pub norm_weights: (f64, f64),
    /// `sqrt(Ω_x² A_∞² + Ω_y² (|A_0|_∞ + A_∞)²) ≥ sup_z ‖F(z)‖_*`.
    pub f_sup: f64,
}

impl EigInstance {
    pub fn new(a0: BlockSymMatrix, a: Vec<BlockSymMatrix>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::Input(format!("eigenvalue instance needs n >= 2 data matrices, got {}", a.len())));
        }
        for (j, aj) in a.iter().enumerate() {
            a0.check_same_structure(aj).map_err(|e| Error::Input(format!("A_{}: {e}", j + 1)))?;
        }
        if !a0.is_finite() || a.iter().any(|m| !m.is_finite()) {
            return Err(Error::Input("non-finite data matrix".into()));
        }
        let mut a_inf: f64 = 0.0;
        for aj in &a {
            a_inf = a_inf.max(aj.spectral_norm()?);
        }
        Ok(Self { a0, a, a_inf })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn structure(&self) -> &BlockStructure {
        self.a0.structure()
    }

    pub fn a0(&self) -> &BlockSymMatrix {
        &self.a0
    }

    pub fn data(&self) -> &[BlockSymMatrix] {
        &self.a
    }

    /// `A_∞ = max_{1≤j≤n} |A_j|_∞` (A_0 excluded).
    pub fn a_inf(&self) -> f64 {
        self.a_inf
    }

    /// Simplex × spectahedron product setup.
    pub fn setup(&self) -> Result<ProxSetup> {
        ProxSetup::product(ProxSetup::simplex(self.n())?, ProxSetup::spectahedron(self.structure().clone())?)
    }

    fn split<'a>(&self, z: &'a Point) -> Result<(&'a [f64], &'a BlockSymMatrix)> {
        let (x, y) = z.as_pair().ok_or_else(|| Error::Input("expected a point (x, y)".into()))?;
        let x = x.as_vector().ok_or_else(|| Error::Input("x must be a vector".into()))?;
        let y = y.as_blocks().ok_or_else(|| Error::Input("y must be block-diagonal".into()))?;
        if x.len() != self.n() {
            return Err(Error::Input(format!("x has length {}, expected {}", x.len(), self.n())));
        }
        self.a0.check_same_structure(y)?;
        Ok((x, y))
    }

    /// `A(x) = A_0 + Σ x_j A_j`.
    pub fn affine_matrix(&self, x: &[f64]) -> BlockSymMatrix {
        let mut m = self.a0.clone();
        for (xj, aj) in x.iter().zip(&self.a) {
            m.axpy(*xj, aj);
        }
        m
    }

    /// `F(x, y) = ([Tr(y A_j)]_j, −A_0 − Σ x_j A_j)`.
    pub fn exact_operator(&self, z: &Point) -> Result<DualVector> {
        let (x, y) = self.split(z)?;
        let fx = self.a.iter().map(|aj| y.frob_inner_unchecked(aj)).collect();
        let fy = self.affine_matrix(x).scaled(-1.0);
        Ok(Point::pair(Point::Vector(fx), Point::Blocks(fy)))
    }

    /// Block weights `ν_ℓ = Tr(y_ℓ)`, clamped at zero within tolerance and renormalised.
    fn block_weights(&self, y: &BlockSymMatrix) -> Result<Vec<f64>> {
        let mut nu: Vec<f64> = y.blocks().iter().map(|b| b.trace()).collect();
        for (l, v) in nu.iter_mut().enumerate() {
            if *v < -NU_TOL {
                return Err(Error::Domain(format!("block {l} of y has negative trace {v}")));
            }
            *v = v.max(0.0);
        }
        let total: f64 = nu.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("y has zero trace".into()));
        }
        nu.iter_mut().for_each(|v| *v /= total);
        Ok(nu)
    }

    /// The oracle realisation for fixed indices `ȷ` (0-based data index) and `ı` (block).
    pub fn xi_for_indices(&self, z: &Point, j: usize, block: usize) -> Result<DualVector> {
        let (_, y) = self.split(z)?;
        let nu = y.block(block).trace();
        if !(nu > 0.0) {
            return Err(Error::Domain(format!("block {block} of y has no mass")));
        }
        Ok(self.xi_unchecked(y, j, block, nu))
    }

    fn xi_unchecked(&self, y: &BlockSymMatrix, j: usize, block: usize, nu: f64) -> DualVector {
        let ybar = y.block(block);
        let xi_x = self.a.iter().map(|aj| aj.block(block).frob_inner(ybar) / nu).collect();
        let mut xi_y = self.a0.clone();
        xi_y.axpy(1.0, &self.a[j]);
        xi_y.scale(-1.0);
        Point::pair(Point::Vector(xi_x), Point::Blocks(xi_y))
    }

    /// One draw of the randomized oracle; consumes exactly two uniforms
    /// (data index first, then block).
    pub fn sample_xi(&self, z: &Point, stream: &mut RandomStream) -> Result<DualVector> {
        let (x, y) = self.split(z)?;
        let nu = self.block_weights(y)?;
        let xsum: f64 = x.iter().map(|v| v.max(0.0)).sum();
        let xw: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let j = stream.categorical(&xw, xsum);
        let l = stream.categorical(&nu, 1.0);
        let trace = y.block(l).trace();
        Ok(self.xi_unchecked(y, j, l, trace))
    }

    /// `λ_max(A(x))`.
    pub fn primal_value(&self, x: &[f64]) -> Result<f64> {
        self.affine_matrix(x).lambda_max()
    }

    /// `⟨A_0, y⟩ + min_j ⟨A_j, y⟩`.
    pub fn dual_value(&self, y: &BlockSymMatrix) -> Result<f64> {
        let base = self.a0.frob_inner(y)?;
        let m = self.a.iter().map(|aj| aj.frob_inner_unchecked(y)).fold(f64::INFINITY, f64::min);
        Ok(base + m)
    }

    /// `(f(x), φ̄(x) − φ_(y))`: the objective and the exact duality gap.
    pub fn objective_and_gap(&self, z: &Point) -> Result<(f64, f64)> {
        let (x, y) = self.split(z)?;
        let f = self.primal_value(x)?;
        Ok((f, f - self.dual_value(y)?))
    }

    /// Constants for the Ξ_k oracle; requires `n ≥ 3` and `p^(1) ≥ 3`.
    pub fn constants(&self, k: usize) -> Result<EigConstants> {
        let n = self.n();
        let p = self.structure().total();
        if n < 3 || p < 3 {
            return Err(Error::Config(format!("constants need n >= 3 and p^(1) >= 3, got n={n}, p^(1)={p}")));
        }
        if k == 0 {
            return Err(Error::Config("averaging size k must be at least 1".into()));
        }
        let (ln_n, ln_p) = ((n as f64).ln(), (p as f64).ln());
        let l_stated = 2.0 * ln_n + 4.0 * ln_p;
        let y_sup = self.a0.spectral_norm()? + self.a_inf;
        Ok(EigConstants {
            l_stated,
            l_eff: l_stated * self.a_inf,
            m: 27.0 * (ln_n + ln_p) * self.a_inf / (k as f64).sqrt(),
            m_as: 2.0 * self.a_inf * (2.0 * ln_n + 2.0 * ln_p).sqrt(),
            norm_weights: (2.0 * ln_n, 2.0 * ln_p),
            f_sup: (2.0 * ln_n * self.a_inf * self.a_inf + 2.0 * ln_p * y_sup * y_sup).sqrt(),
        })
    }

    /// The saddle v.i. with `L = L_eff` and `M = 0`.
    pub fn problem(self: &Arc<Self>) -> Result<VIProblem> {
        let c = self.constants(1)?;
        let op: Arc<dyn Operator> = Arc::new(EigOperator(self.clone()));
        VIProblem::new(self.setup()?, op, c.l_eff, 0.0, ProblemKind::Saddle)
    }

    pub fn saddle_instance(self: &Arc<Self>) -> Result<SaddleInstance> {
        Ok(SaddleInstance { problem: self.problem()?, gap: Arc::new(EigGap(self.clone())) })
    }

    pub fn exact_oracle(self: &Arc<Self>) -> ExactOracle {
        ExactOracle::new(Arc::new(EigOperator(self.clone())))
    }

    /// `Ξ_k` with the noise level `27 (ln n + ln p^(1)) A_∞ / √k`.
    pub fn averaged_oracle(self: &Arc<Self>, k: usize) -> Result<AveragedOracle> {
        if k == 0 {
            return Err(Error::Config("averaging size k must be at least 1".into()));
        }
        let noise_m = self.constants(k).map(|c| c.m).unwrap_or(f64::NAN);
        Ok(AveragedOracle { inst: self.clone(), k, noise_m })
    }
}

struct EigOperator(Arc<EigInstance>);

impl Operator for EigOperator {
    fn eval(&self, z: &Point) -> Result<DualVector> {
        self.0.exact_operator(z)
    }
}

struct EigGap(Arc<EigInstance>);

impl SaddleGap for EigGap {
    fn primal_value(&self, x: &Point) -> Result<f64> {
        self.0.primal_value(x.as_vector().ok_or_else(|| Error::Input("x must be a vector".into()))?)
    }

    fn dual_value(&self, y: &Point) -> Result<f64> {
        self.0.dual_value(y.as_blocks().ok_or_else(|| Error::Input("y must be block-diagonal".into()))?)
    }
}

/// `Ξ_k(z) = (1/k) Σ_s Ξ(z, η_s)`.
#[derive(Debug, Clone)]
pub struct AveragedOracle {
    inst: Arc<EigInstance>,
    k: usize,
    noise_m: f64,
}

impl AveragedOracle {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Replaces the declared noise level (e.g. by the almost-sure bound).
    pub fn with_noise_m(mut self, noise_m: f64) -> Self {
        self.noise_m = noise_m;
        self
    }
}

impl StochasticOracle for AveragedOracle {
    fn sample(&self, z: &Point, stream: &mut RandomStream) -> Result<DualVector> {
        if self.k == 1 {
            return self.inst.sample_xi(z, stream);
        }
        let mut acc = self.inst.sample_xi(z, stream)?;
        for _ in 1..self.k {
            acc.axpy(1.0, &self.inst.sample_xi(z, stream)?)?;
        }
        acc.scale(1.0 / self.k as f64);
        Ok(acc)
    }

    fn noise_m(&self) -> f64 {
        self.noise_m
    }

    fn subgaussian(&self) -> bool {
        true
    }
}
