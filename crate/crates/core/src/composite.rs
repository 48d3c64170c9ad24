//! Stochastic composite minimization `min_{x∈X} Φ(φ_1(x), ..., φ_m(x))` with
//!
//! ```text
//! Φ(u) = max_{y∈Y} Σ_ℓ ⟨u_ℓ, A_ℓ y + b_ℓ⟩ − Φ_*(y),
//! ```
//!
//! posed as the saddle v.i. with operator
//! `F(x, y) = (Σ φ_ℓ'(x)^*[A_ℓ y + b_ℓ], −Σ A_ℓ^* φ_ℓ(x) + Φ_*'(y))`.
//!
//! `Y` is a spectahedron, each `φ_ℓ` maps into `S^{p_ℓ}`, and `A_ℓ` is a sum of
//! congruences `A_ℓ y = Σ_j P_jℓᵀ y_j P_jℓ`. `Φ_*` is linear, `Φ_*(y) = ⟨C, y⟩`.
//! The semidefinite feasibility pipeline (`SdfSystem`, `sdf_scale`) builds the
//! matrix minimax instance `min_x max_ℓ λ_max(β_ℓ ψ_ℓ(x))` from a system `ψ_ℓ(x) ⪯ 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DualVector, Point, ProxSetup};
use crate::rng::RandomStream;
use crate::symmat::{BlockStructure, BlockSymMatrix, SymMatrix};
use crate::vi::{Operator, ProblemKind, SaddleGap, SaddleInstance, StochasticOracle, VIProblem};

/// A `S^p_+`-convex map `φ: R^d → S^p` with a stochastic oracle.
pub trait Component: Send + Sync {
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    /// `φ(x)`.
    fn value(&self, x: &[f64]) -> Result<SymMatrix>;

    /// `[∂φ/∂x_i]_i`, a selection of the subgradient.
    fn jacobian(&self, x: &[f64]) -> Result<Vec<SymMatrix>>;

    /// One oracle draw `(f(x, ζ), G(x, ζ))`; exact by default.
    fn sample(&self, x: &[f64], _stream: &mut RandomStream) -> Result<(SymMatrix, Vec<SymMatrix>)> {
        Ok((self.value(x)?, self.jacobian(x)?))
    }

    /// `(C_0, [C_i])` when `φ(x) = C_0 + Σ x_i C_i`.
    fn affine_parts(&self) -> Option<(&SymMatrix, &[SymMatrix])> {
        None
    }
}

/// `ψ(x) = C_0 + Σ x_i C_i` observed with bounded Rademacher noise.
///
/// A draw returns `f = ψ(x) + s_f diag(ε)` and `G_i = C_i + (s_g/√d) diag(ε_i)`,
/// consuming `p` signs for `f` (if `s_f > 0`) and `p·d` signs for `G` (if `s_g > 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineComponent {
    pub c0: SymMatrix,
    pub c: Vec<SymMatrix>,
    #[serde(default)]
    pub value_noise: f64,
    #[serde(default)]
    pub jacobian_noise: f64,
}

impl AffineComponent {
    pub fn new(c0: SymMatrix, c: Vec<SymMatrix>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::Input("affine component needs at least one direction".into()));
        }
        if c.iter().any(|ci| ci.dim() != c0.dim()) {
            return Err(Error::Input("affine component matrices differ in size".into()));
        }
        Ok(Self { c0, c, value_noise: 0.0, jacobian_noise: 0.0 })
    }

    pub fn with_noise(mut self, value_noise: f64, jacobian_noise: f64) -> Result<Self> {
        if !(value_noise >= 0.0 && jacobian_noise >= 0.0) || !value_noise.is_finite() || !jacobian_noise.is_finite() {
            return Err(Error::Input("noise levels must be finite and nonnegative".into()));
        }
        self.value_noise = value_noise;
        self.jacobian_noise = jacobian_noise;
        Ok(self)
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.c.len() {
            return Err(Error::Input(format!("component expects x of length {}, got {}", self.c.len(), x.len())));
        }
        Ok(())
    }
}

fn add_sign_diagonal(m: &mut SymMatrix, scale: f64, stream: &mut RandomStream) {
    for i in 0..m.dim() {
        let v = m.get(i, i) + scale * stream.rademacher();
        m.set(i, i, v);
    }
}

impl Component for AffineComponent {
    fn input_dim(&self) -> usize {
        self.c.len()
    }

    fn output_dim(&self) -> usize {
        self.c0.dim()
    }

    fn value(&self, x: &[f64]) -> Result<SymMatrix> {
        self.check_x(x)?;
        let mut v = self.c0.clone();
        for (xi, ci) in x.iter().zip(&self.c) {
            v.axpy(*xi, ci);
        }
        Ok(v)
    }

    fn jacobian(&self, x: &[f64]) -> Result<Vec<SymMatrix>> {
        self.check_x(x)?;
        Ok(self.c.clone())
    }

    fn sample(&self, x: &[f64], stream: &mut RandomStream) -> Result<(SymMatrix, Vec<SymMatrix>)> {
        let mut f = self.value(x)?;
        let mut g = self.c.clone();
        if self.value_noise > 0.0 {
            add_sign_diagonal(&mut f, self.value_noise, stream);
        }
        if self.jacobian_noise > 0.0 {
            let s = self.jacobian_noise / (self.c.len() as f64).sqrt();
            for gi in &mut g {
                add_sign_diagonal(gi, s, stream);
            }
        }
        Ok((f, g))
    }

    fn affine_parts(&self) -> Option<(&SymMatrix, &[SymMatrix])> {
        Some((&self.c0, &self.c))
    }
}

/// `β φ(·)` with the oracle scaled accordingly.
pub struct ScaledComponent {
    pub beta: f64,
    pub inner: Arc<dyn Component>,
    parts: Option<(SymMatrix, Vec<SymMatrix>)>,
}

impl ScaledComponent {
    pub fn new(beta: f64, inner: Arc<dyn Component>) -> Self {
        let parts = inner.affine_parts().map(|(c0, c)| (c0.scaled(beta), c.iter().map(|ci| ci.scaled(beta)).collect()));
        Self { beta, inner, parts }
    }
}

impl Component for ScaledComponent {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn value(&self, x: &[f64]) -> Result<SymMatrix> {
        Ok(self.inner.value(x)?.scaled(self.beta))
    }

    fn jacobian(&self, x: &[f64]) -> Result<Vec<SymMatrix>> {
        Ok(self.inner.jacobian(x)?.into_iter().map(|g| g.scaled(self.beta)).collect())
    }

    fn sample(&self, x: &[f64], stream: &mut RandomStream) -> Result<(SymMatrix, Vec<SymMatrix>)> {
        let (f, g) = self.inner.sample(x, stream)?;
        Ok((f.scaled(self.beta), g.into_iter().map(|gi| gi.scaled(self.beta)).collect()))
    }

    fn affine_parts(&self) -> Option<(&SymMatrix, &[SymMatrix])> {
        self.parts.as_ref().map(|(c0, c)| (c0, c.as_slice()))
    }
}

/// One term `P_jℓᵀ y_j P_jℓ` of `A_ℓ y`; `p` is row-major `q_j × p_ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceTerm {
    pub block: usize,
    pub p: Vec<f64>,
}

/// Linear map `A_ℓ: S^q → S^{p_ℓ}` on block-diagonal `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YMap {
    /// `A_ℓ y = y_j`.
    Block(usize),
    /// `A_ℓ y = Σ P_jᵀ y_j P_j`.
    Congruence(Vec<CongruenceTerm>),
}

fn transpose(p: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; p.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = p[r * cols + c];
        }
    }
    t
}

impl YMap {
    fn validate(&self, ys: &BlockStructure, out: usize) -> Result<()> {
        match self {
            YMap::Block(j) => {
                let q = *ys.sizes().get(*j).ok_or_else(|| Error::Input(format!("map selects missing block {j}")))?;
                if q != out {
                    return Err(Error::Input(format!("block {j} has size {q}, component has size {out}")));
                }
            }
            YMap::Congruence(terms) => {
                if terms.is_empty() {
                    return Err(Error::Input("congruence map has no terms".into()));
                }
                for t in terms {
                    let q = *ys
                        .sizes()
                        .get(t.block)
                        .ok_or_else(|| Error::Input(format!("map selects missing block {}", t.block)))?;
                    if t.p.len() != q * out || t.p.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Input(format!("congruence factor for block {} must be finite {q}x{out}", t.block)));
                    }
                }
            }
        }
        Ok(())
    }

    /// `A_ℓ y`.
    pub fn apply(&self, y: &BlockSymMatrix, out: usize) -> SymMatrix {
        match self {
            YMap::Block(j) => y.block(*j).clone(),
            YMap::Congruence(terms) => {
                let mut acc = SymMatrix::zeros(out);
                for t in terms {
                    acc.axpy(1.0, &y.block(t.block).congruence(&t.p, out));
                }
                acc
            }
        }
    }

    /// `y ← y + s A_ℓ^* u`.
    pub fn adjoint_axpy(&self, s: f64, u: &SymMatrix, y: &mut BlockSymMatrix) {
        match self {
            YMap::Block(j) => y.block_mut(*j).axpy(s, u),
            YMap::Congruence(terms) => {
                let out = u.dim();
                for t in terms {
                    let q = y.block(t.block).dim();
                    let pt = transpose(&t.p, q, out);
                    let v = u.congruence(&pt, q);
                    y.block_mut(t.block).axpy(s, &v);
                }
            }
        }
    }

    /// `(j, P_jᵀ)` factors, with `P_j = I` for a block selection.
    fn factors(&self, out: usize) -> Vec<(usize, Vec<f64>)> {
        match self {
            YMap::Block(j) => vec![(*j, SymMatrix::identity(out).data().to_vec())],
            YMap::Congruence(terms) => terms.iter().map(|t| (t.block, t.p.clone())).collect(),
        }
    }
}

/// One term `⟨φ_ℓ(x), A_ℓ y + b_ℓ⟩`.
#[derive(Clone)]
pub struct CompositeTerm {
    pub component: Arc<dyn Component>,
    pub map: YMap,
    pub offset: Option<SymMatrix>,
}

/// `(A, B)` from the affine data, with the certificate bracket for `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsAB {
    pub a: f64,
    pub a_lower: f64,
    pub a_upper: f64,
    pub b: f64,
}

/// Regularity constants `L_x, M_x` of the components and `L_y, M_y` of `Φ_*`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComponentConstants {
    pub lx: f64,
    pub mx: f64,
    pub ly: f64,
    pub my: f64,
}

#[derive(Clone)]
pub struct CompositeProblem {
    x_setup: ProxSetup,
    y_setup: ProxSetup,
    y_structure: BlockStructure,
    terms: Vec<CompositeTerm>,
    phi_star: Option<BlockSymMatrix>,
    constants: ComponentConstants,
}

impl std::fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("x_setup", &self.x_setup)
            .field("y_setup", &self.y_setup)
            .field("terms", &self.terms.len())
            .field("constants", &self.constants)
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(
        x_setup: ProxSetup,
        y_setup: ProxSetup,
        terms: Vec<CompositeTerm>,
        phi_star: Option<BlockSymMatrix>,
        constants: ComponentConstants,
    ) -> Result<Self> {
        let d = match &x_setup {
            ProxSetup::Euclidean { dim, .. } | ProxSetup::Simplex { dim } => *dim,
            _ => return Err(Error::Config("composite x-setup must be a Euclidean ball or a simplex".into())),
        };
        let y_structure = match &y_setup {
            ProxSetup::Spectahedron { structure } => structure.clone(),
            _ => return Err(Error::Config("composite y-setup must be a spectahedron".into())),
        };
        if terms.is_empty() {
            return Err(Error::Input("composite problem needs at least one component".into()));
        }
        for (l, t) in terms.iter().enumerate() {
            if t.component.input_dim() != d {
                return Err(Error::Input(format!("component {l} takes dimension {}, X has {d}", t.component.input_dim())));
            }
            let out = t.component.output_dim();
            t.map.validate(&y_structure, out).map_err(|e| Error::Input(format!("component {l}: {e}")))?;
            if let Some(b) = &t.offset {
                if b.dim() != out {
                    return Err(Error::Input(format!("component {l}: offset has size {}, expected {out}", b.dim())));
                }
            }
        }
        if let Some(c) = &phi_star {
            if c.structure() != &y_structure {
                return Err(Error::Input("Φ_* coefficient does not match the y structure".into()));
            }
        }
        let k = constants;
        if [k.lx, k.mx, k.ly, k.my].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("component constants must be finite and nonnegative".into()));
        }
        Ok(Self { x_setup, y_setup, y_structure, terms, phi_star, constants })
    }

    pub fn x_setup(&self) -> &ProxSetup {
        &self.x_setup
    }

    pub fn y_setup(&self) -> &ProxSetup {
        &self.y_setup
    }

    pub fn terms(&self) -> &[CompositeTerm] {
        &self.terms
    }

    pub fn component_constants(&self) -> ComponentConstants {
        self.constants
    }

    /// Product setup on `Z = X × Y`.
    pub fn setup(&self) -> Result<ProxSetup> {
        ProxSetup::product(self.x_setup.clone(), self.y_setup.clone())
    }

    fn split<'a>(&self, z: &'a Point) -> Result<(&'a [f64], &'a BlockSymMatrix)> {
        let (x, y) = z.as_pair().ok_or_else(|| Error::Input("expected a point (x, y)".into()))?;
        let x = x.as_vector().ok_or_else(|| Error::Input("x must be a vector".into()))?;
        let y = y.as_blocks().ok_or_else(|| Error::Input("y must be block-diagonal".into()))?;
        if y.structure() != &self.y_structure {
            return Err(Error::Input("y does not match the block structure".into()));
        }
        Ok((x, y))
    }

    /// `A_ℓ y + b_ℓ`.
    pub fn dual_weight(&self, l: usize, y: &BlockSymMatrix) -> SymMatrix {
        let t = &self.terms[l];
        let mut w = t.map.apply(y, t.component.output_dim());
        if let Some(b) = &t.offset {
            w.axpy(1.0, b);
        }
        w
    }

    fn assemble(&self, x: &[f64], y: &BlockSymMatrix, draws: Vec<(SymMatrix, Vec<SymMatrix>)>) -> DualVector {
        let mut fx = vec![0.0; x.len()];
        let mut fy = match &self.phi_star {
            Some(c) => c.clone(),
            None => BlockSymMatrix::zeros(&self.y_structure),
        };
        for (l, (f, g)) in draws.into_iter().enumerate() {
            let w = self.dual_weight(l, y);
            for (fxi, gi) in fx.iter_mut().zip(&g) {
                *fxi += gi.frob_inner(&w);
            }
            self.terms[l].map.adjoint_axpy(-1.0, &f, &mut fy);
        }
        Point::pair(Point::Vector(fx), Point::Blocks(fy))
    }

    /// The exact operator `F(x, y)`.
    pub fn operator(&self, z: &Point) -> Result<DualVector> {
        let (x, y) = self.split(z)?;
        let mut draws = Vec::with_capacity(self.terms.len());
        for (l, t) in self.terms.iter().enumerate() {
            let tag = |e: Error| Error::Numerical(format!("component {l}: {e}"));
            draws.push((t.component.value(x).map_err(tag)?, t.component.jacobian(x).map_err(tag)?));
        }
        Ok(self.assemble(x, y, draws))
    }

    /// The induced oracle `Ξ(x, y, ζ)`; components draw in order.
    pub fn oracle_sample(&self, z: &Point, stream: &mut RandomStream) -> Result<DualVector> {
        let (x, y) = self.split(z)?;
        let mut draws = Vec::with_capacity(self.terms.len());
        for (l, t) in self.terms.iter().enumerate() {
            draws.push(t.component.sample(x, stream).map_err(|e| Error::Numerical(format!("component {l}: {e}")))?);
        }
        Ok(self.assemble(x, y, draws))
    }

    /// `A = max_{|y|_1 ≤ 1} Σ |A_ℓ y|_1` and `B = Σ |b_ℓ|_1`.
    ///
    /// For congruence maps the maximum sits at a rank-one `y = v vᵀ` in one block,
    /// giving `A = max_j λ_max(Σ_ℓ P_jℓ P_jℓᵀ)`. `a_upper` is the cruder
    /// `Σ_ℓ ‖A_ℓ‖` bound.
    pub fn constants_ab(&self) -> Result<ConstantsAB> {
        let sizes = self.y_structure.sizes();
        let mut gram: Vec<SymMatrix> = sizes.iter().map(|&q| SymMatrix::zeros(q)).collect();
        let mut upper = 0.0;
        for t in &self.terms {
            let out = t.component.output_dim();
            let mut term_norm: f64 = 0.0;
            let mut per_block: Vec<SymMatrix> = sizes.iter().map(|&q| SymMatrix::zeros(q)).collect();
            for (j, p) in t.map.factors(out) {
                // P Pᵀ for P stored row-major q_j × out.
                let pt = transpose(&p, sizes[j], out);
                let ppt = SymMatrix::identity(out).congruence(&pt, sizes[j]);
                per_block[j].axpy(1.0, &ppt);
            }
            for (j, pb) in per_block.iter().enumerate() {
                if pb.max_abs() > 0.0 {
                    term_norm = term_norm.max(pb.lambda_max()?);
                    gram[j].axpy(1.0, pb);
                }
            }
            upper += term_norm;
        }
        let mut a: f64 = 0.0;
        for g in &gram {
            a = a.max(g.lambda_max()?);
        }
        let mut b = 0.0;
        for t in &self.terms {
            if let Some(off) = &t.offset {
                b += off.eigh()?.values.iter().map(|v| v.abs()).sum::<f64>();
            }
        }
        Ok(ConstantsAB { a, a_lower: a, a_upper: upper.max(a), b })
    }

    /// `(L, M)` with
    /// `L = 5AΩ_xΩ_y[Ω_x L_x + M_x] + BΩ_x² L_x + Ω_y² L_y` and
    /// `M = [2AΩ_y + B]Ω_x M_x + Ω_y M_y`.
    pub fn lipschitz_constants(&self) -> Result<(f64, f64)> {
        let ab = self.constants_ab()?;
        let ox = self.x_setup.capacity()?.omega_radius;
        let oy = self.y_setup.capacity()?.omega_radius;
        let k = self.constants;
        let l = 5.0 * ab.a * ox * oy * (ox * k.lx + k.mx) + ab.b * ox * ox * k.lx + oy * oy * k.ly;
        let m = (2.0 * ab.a * oy + ab.b) * ox * k.mx + oy * k.my;
        Ok((l, m))
    }

    /// `Φ(φ(x)) = λ_max(Σ A_ℓ^* φ_ℓ(x) − C) + Σ ⟨φ_ℓ(x), b_ℓ⟩`.
    pub fn primal_value(&self, x: &[f64]) -> Result<f64> {
        let mut agg = match &self.phi_star {
            Some(c) => c.scaled(-1.0),
            None => BlockSymMatrix::zeros(&self.y_structure),
        };
        let mut lin = 0.0;
        for t in &self.terms {
            let v = t.component.value(x)?;
            t.map.adjoint_axpy(1.0, &v, &mut agg);
            if let Some(b) = &t.offset {
                lin += v.frob_inner(b);
            }
        }
        Ok(agg.lambda_max()? + lin)
    }

    /// `min_{x∈X} φ(x, y)`; available when every component is affine.
    pub fn dual_value(&self, y: &BlockSymMatrix) -> Result<f64> {
        let d = self.terms[0].component.input_dim();
        let mut base = match &self.phi_star {
            Some(c) => -c.frob_inner(y)?,
            None => 0.0,
        };
        let mut g = vec![0.0; d];
        for (l, t) in self.terms.iter().enumerate() {
            let (c0, c) = t
                .component
                .affine_parts()
                .ok_or_else(|| Error::Input(format!("component {l} is not affine; no closed-form dual value")))?;
            let w = self.dual_weight(l, y);
            base += c0.frob_inner(&w);
            for (gi, ci) in g.iter_mut().zip(c) {
                *gi += ci.frob_inner(&w);
            }
        }
        let min_lin = match &self.x_setup {
            ProxSetup::Simplex { .. } => g.iter().copied().fold(f64::INFINITY, f64::min),
            ProxSetup::Euclidean { radius, .. } => -radius * g.iter().map(|v| v * v).sum::<f64>().sqrt(),
            _ => unreachable!("validated in new"),
        };
        Ok(base + min_lin)
    }

    /// Spot-checks `A_ℓ y + b_ℓ ⪰ 0` and `S^p_+`-convexity of each `φ_ℓ` on sampled points.
    pub fn check_invariants(&self, samples: usize, seed: u64) -> Result<()> {
        let tol = crate::vi::CHECK_TOL;
        let mut s = RandomStream::from_seed(seed);
        for _ in 0..samples {
            let y = self.y_setup.random_point(&mut s);
            let y = y.as_blocks().expect("spectahedron point");
            for l in 0..self.terms.len() {
                if self.dual_weight(l, y).eigh()?.values.last().copied().unwrap_or(0.0) < -tol {
                    return Err(Error::Domain(format!("A_{l} y + b_{l} is not positive semidefinite")));
                }
            }
            let x0 = self.x_setup.random_point(&mut s);
            let x1 = self.x_setup.random_point(&mut s);
            let (x0, x1) = (x0.as_vector().unwrap(), x1.as_vector().unwrap());
            let lam = s.uniform();
            let xm: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            for (l, t) in self.terms.iter().enumerate() {
                let mut gap = t.component.value(x0)?.scaled(lam);
                gap.axpy(1.0 - lam, &t.component.value(x1)?);
                gap.axpy(-1.0, &t.component.value(&xm)?);
                if gap.eigh()?.values.last().copied().unwrap_or(0.0) < -tol {
                    return Err(Error::Domain(format!("component {l} fails the convexity check")));
                }
            }
        }
        Ok(())
    }

    /// The saddle v.i. with the given constants.
    pub fn problem_with_constants(self: &Arc<Self>, lip_l: f64, noise_m: f64) -> Result<VIProblem> {
        let op: Arc<dyn Operator> = Arc::new(CompositeOperator(self.clone()));
        VIProblem::new(self.setup()?, op, lip_l, noise_m, ProblemKind::Saddle)
    }

    /// The saddle v.i. with the constants of `lipschitz_constants`.
    pub fn problem(self: &Arc<Self>) -> Result<VIProblem> {
        let (l, m) = self.lipschitz_constants()?;
        self.problem_with_constants(l, m)
    }

    pub fn saddle_instance(self: &Arc<Self>, problem: VIProblem) -> SaddleInstance {
        SaddleInstance { problem, gap: Arc::new(CompositeGap(self.clone())) }
    }

    pub fn oracle(self: &Arc<Self>, noise_m: f64, subgaussian: bool) -> CompositeOracle {
        CompositeOracle { problem: self.clone(), noise_m, subgaussian }
    }
}

struct CompositeOperator(Arc<CompositeProblem>);

impl Operator for CompositeOperator {
    fn eval(&self, z: &Point) -> Result<DualVector> {
        self.0.operator(z)
    }
}

struct CompositeGap(Arc<CompositeProblem>);

impl SaddleGap for CompositeGap {
    fn primal_value(&self, x: &Point) -> Result<f64> {
        self.0.primal_value(x.as_vector().ok_or_else(|| Error::Input("x must be a vector".into()))?)
    }

    fn dual_value(&self, y: &Point) -> Result<f64> {
        self.0.dual_value(y.as_blocks().ok_or_else(|| Error::Input("y must be block-diagonal".into()))?)
    }
}

/// The oracle `Ξ` induced by the component oracles.
#[derive(Clone)]
pub struct CompositeOracle {
    problem: Arc<CompositeProblem>,
    noise_m: f64,
    subgaussian: bool,
}

impl StochasticOracle for CompositeOracle {
    fn sample(&self, z: &Point, stream: &mut RandomStream) -> Result<DualVector> {
        self.problem.oracle_sample(z, stream)
    }

    fn noise_m(&self) -> f64 {
        self.noise_m
    }

    fn subgaussian(&self) -> bool {
        self.subgaussian
    }
}

/// The eigenvalue instance as a composite problem: `φ_ℓ(x) = A_0^ℓ + Σ x_j A_j^ℓ`, `A_ℓ y = y_ℓ`.
pub fn eig_as_composite(inst: &crate::eigopt::EigInstance) -> Result<CompositeProblem> {
    let st = inst.structure();
    let mut terms = Vec::with_capacity(st.num_blocks());
    for l in 0..st.num_blocks() {
        let c = inst.data().iter().map(|aj| aj.block(l).clone()).collect();
        let comp = AffineComponent::new(inst.a0().block(l).clone(), c)?;
        terms.push(CompositeTerm { component: Arc::new(comp), map: YMap::Block(l), offset: None });
    }
    CompositeProblem::new(
        ProxSetup::simplex(inst.n())?,
        ProxSetup::spectahedron(st.clone())?,
        terms,
        None,
        ComponentConstants::default(),
    )
}

/// One inequality `ψ_ℓ(x) ⪯ 0` with its regularity constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdfComponent {
    pub psi: AffineComponent,
    /// `L_ℓ`.
    pub lip: f64,
    /// `M_ℓ`.
    pub noise: f64,
}

/// A system of matrix inequalities `ψ_ℓ(x) ⪯ 0, x ∈ X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdfSystem {
    pub x_setup: ProxSetup,
    pub components: Vec<SdfComponent>,
}

/// The scaled matrix minimax problem and its stepsize.
#[derive(Debug, Clone)]
pub struct SdfScaled {
    pub problem: Arc<CompositeProblem>,
    pub mu_l: Vec<f64>,
    pub mu: f64,
    pub beta: Vec<f64>,
    pub lip_l: f64,
    pub noise_m: f64,
    pub gamma: f64,
    /// `80 Ω_x sqrt(ln Σp_ℓ) μ / √t`, bounding `E max_ℓ β_ℓ λ_max(ψ_ℓ(x̂_t))`.
    pub predicted_bound: f64,
}

impl SdfScaled {
    /// Bound on `E λ_max(ψ_ℓ(x̂_t))` for one component.
    pub fn component_bound(&self, l: usize) -> f64 {
        self.predicted_bound / self.beta[l]
    }

    pub fn vi_problem(&self) -> Result<VIProblem> {
        self.problem.problem_with_constants(self.lip_l, self.noise_m)
    }

    pub fn oracle(&self) -> CompositeOracle {
        self.problem.oracle(self.noise_m, true)
    }
}

impl SdfSystem {
    pub fn new(x_setup: ProxSetup, components: Vec<SdfComponent>) -> Result<Self> {
        let sys = Self { x_setup, components };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let d = match &self.x_setup {
            ProxSetup::Euclidean { dim, .. } | ProxSetup::Simplex { dim } => *dim,
            _ => return Err(Error::Config("x-setup must be a Euclidean ball or a simplex".into())),
        };
        if self.components.is_empty() {
            return Err(Error::Input("system has no inequalities".into()));
        }
        for (l, c) in self.components.iter().enumerate() {
            if !(c.lip >= 0.0 && c.noise >= 0.0 && c.lip.is_finite() && c.noise.is_finite()) {
                return Err(Error::Input(format!("component {l}: constants must be finite and nonnegative")));
            }
            if c.psi.input_dim() != d {
                return Err(Error::Input(format!("component {l} takes dimension {}, X has {d}", c.psi.input_dim())));
            }
        }
        Ok(())
    }

    pub fn structure(&self) -> Result<BlockStructure> {
        BlockStructure::new(self.components.iter().map(|c| c.psi.output_dim()).collect())
    }

    /// `[λ_max(ψ_ℓ(x))]_ℓ`.
    pub fn violations(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.psi.value(x)?.lambda_max()).collect()
    }

    /// Scaling `μ_ℓ = Ω_x L_ℓ/√t + M_ℓ`, `β_ℓ = μ/μ_ℓ` and the matrix minimax problem.
    pub fn scale(&self, t: usize) -> Result<SdfScaled> {
        if t == 0 {
            return Err(Error::Config("horizon t must be at least 1".into()));
        }
        let ox = self.x_setup.capacity()?.omega_radius;
        let st = t as f64;
        let mu_l: Vec<f64> = self.components.iter().map(|c| ox * c.lip / st.sqrt() + c.noise).collect();
        let mu = mu_l.iter().copied().fold(0.0, f64::max);
        if !(mu > 0.0) {
            return Err(Error::Config("all components have μ_ℓ = 0; nothing to scale".into()));
        }
        // A component with μ_ℓ = 0 is constant; any finite weight works, use 1.
        let beta: Vec<f64> = mu_l.iter().map(|&m| if m > 0.0 { mu / m } else { 1.0 }).collect();
        let terms = self
            .components
            .iter()
            .zip(&beta)
            .enumerate()
            .map(|(l, (c, &b))| CompositeTerm {
                component: Arc::new(ScaledComponent::new(b, Arc::new(c.psi.clone()))),
                map: YMap::Block(l),
                offset: None,
            })
            .collect();
        let constants = ComponentConstants { lx: mu * st.sqrt() / ox, mx: mu, ly: 0.0, my: 0.0 };
        let structure = self.structure()?;
        let ln_p = (structure.total() as f64).ln();
        let problem =
            CompositeProblem::new(self.x_setup.clone(), ProxSetup::spectahedron(structure)?, terms, None, constants)?;
        let lip_l = 10.0 * ln_p.sqrt() * ox * mu * (st.sqrt() + 1.0);
        let noise_m = 4.0 * ln_p.sqrt() * ox * mu;
        let gamma = 1.0 / (10.0 * (3.0 * ln_p).sqrt() * ox * mu * (st.sqrt() + 1.0));
        let predicted_bound = 80.0 * ox * ln_p.sqrt() * mu / st.sqrt();
        Ok(SdfScaled { problem: Arc::new(problem), mu_l, mu, beta, lip_l, noise_m, gamma, predicted_bound })
    }
}
