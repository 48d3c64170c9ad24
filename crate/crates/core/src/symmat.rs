//! Dense and block-diagonal symmetric matrices.
//!
//! Blocks are stored densely and row-major; a block-diagonal matrix never
//! materialises its off-diagonal zero blocks. Spectral functions go through a
//! cyclic Jacobi eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues are clamped to this value before taking logarithms.
pub const EIG_FLOOR: f64 = 1e-300;

const JACOBI_MAX_SWEEPS: usize = 50;
const JACOBI_REL_THRESHOLD: f64 = 1e-14;

/// Dense symmetric `n x n` matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSymMatrix")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TryFrom<RawSymMatrix> for SymMatrix {
    type Error = Error;
    fn try_from(raw: RawSymMatrix) -> Result<Self> {
        SymMatrix::from_row_major(raw.n, raw.data)
    }
}

/// Result of a symmetric eigendecomposition.
///
/// `values` are sorted in descending order and column `k` of the row-major
/// `vectors` matrix is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.vectors[i * n + k]).collect()
    }

    /// Rebuilds `Q diag(f(λ)) Qᵀ`.
    pub fn compose(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.dim();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.vectors[i * n + k] * fl[k] * self.vectors[j * n + k];
                }
                out.data[i * n + j] = acc;
                out.data[j * n + i] = acc;
            }
        }
        out
    }
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        Self { n: 1, data: vec![v] }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds a matrix from row-major data, checking symmetry to `1e-12` relative.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Input(format!("expected {} entries for a {n}x{n} block, got {}", n * n, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite matrix entry".into()));
        }
        let m = Self { n, data };
        if !m.is_symmetric(1e-12) {
            return Err(Error::Input("matrix is not symmetric".into()));
        }
        Ok(m)
    }

    /// Symmetrises arbitrary row-major data as `(B + Bᵀ) / 2`.
    pub fn symmetrized(n: usize, data: &[f64]) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = 0.5 * (data[i * n + j] + data[j * n + i]);
            }
        }
        m
    }

    /// Rank-one matrix `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = v[i] * v[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if (self.get(i, j) - self.get(j, i)).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn frob_inner(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_inner(self).sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SymMatrix) {
        debug_assert_eq!(self.n, other.n);
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += s * b);
    }

    /// `Pᵀ self P` for a row-major `n x q` matrix `p`.
    pub fn congruence(&self, p: &[f64], q: usize) -> SymMatrix {
        let n = self.n;
        let mut tmp = vec![0.0; n * q];
        for i in 0..n {
            for c in 0..q {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.get(i, k) * p[k * q + c];
                }
                tmp[i * q + c] = acc;
            }
        }
        let mut out = SymMatrix::zeros(q);
        for r in 0..q {
            for c in r..q {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += p[k * q + r] * tmp[k * q + c];
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// `vᵀ self v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.data[i * n + j] * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }

    /// Cyclic Jacobi eigendecomposition.
    ///
    /// Sweeps stop once the off-diagonal Frobenius mass drops below
    /// `1e-14 * ‖a‖_F`; more than 50 sweeps is reported as a numerical error.
    pub fn eigh(&self) -> Result<Eigen> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let threshold = JACOBI_REL_THRESHOLD * self.frob_norm();
        let off = |a: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += a[i * n + j] * a[i * n + j];
                    }
                }
            }
            s.sqrt()
        };
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if off(&a) <= threshold {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = if theta.is_infinite() {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged && off(&a) > threshold {
            return Err(Error::Numerical(format!("Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
        let values = order.iter().map(|&i| a[i * n + i]).collect();
        let mut vectors = vec![0.0; n * n];
        for (col, &src) in order.iter().enumerate() {
            for r in 0..n {
                vectors[r * n + col] = v[r * n + src];
            }
        }
        Ok(Eigen { values, vectors })
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(self.eigh()?.values[0])
    }
}

/// Block sizes `(p_1, ..., p_m)` of a block-diagonal structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockStructure")]
pub struct BlockStructure {
    sizes: Vec<usize>,
}

#[derive(Deserialize)]
struct RawBlockStructure {
    sizes: Vec<usize>,
}

impl TryFrom<RawBlockStructure> for BlockStructure {
    type Error = Error;
    fn try_from(raw: RawBlockStructure) -> Result<Self> {
        BlockStructure::new(raw.sizes)
    }
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config(format!("block sizes must be positive and non-empty, got {sizes:?}")));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// `p^(1)`, the total dimension.
    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `p^(κ) = Σ p_ℓ^κ`.
    pub fn power_sum(&self, kappa: u32) -> usize {
        self.sizes.iter().map(|p| p.pow(kappa)).sum()
    }

    pub fn p_max(&self) -> usize {
        *self.sizes.iter().max().expect("non-empty")
    }
}

/// Block-diagonal symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockSymMatrix")]
pub struct BlockSymMatrix {
    #[serde(skip_serializing)]
    structure: BlockStructure,
    blocks: Vec<SymMatrix>,
}

#[derive(Deserialize)]
struct RawBlockSymMatrix {
    blocks: Vec<SymMatrix>,
}

impl TryFrom<RawBlockSymMatrix> for BlockSymMatrix {
    type Error = Error;
    fn try_from(raw: RawBlockSymMatrix) -> Result<Self> {
        BlockSymMatrix::new(raw.blocks)
    }
}

impl BlockSymMatrix {
    pub fn new(blocks: Vec<SymMatrix>) -> Result<Self> {
        let structure = BlockStructure::new(blocks.iter().map(SymMatrix::dim).collect())?;
        Ok(Self { structure, blocks })
    }

    pub fn zeros(structure: &BlockStructure) -> Self {
        Self {
            structure: structure.clone(),
            blocks: structure.sizes().iter().map(|&p| SymMatrix::zeros(p)).collect(),
        }
    }

    /// `s * I_N`.
    pub fn scaled_identity(structure: &BlockStructure, s: f64) -> Self {
        Self {
            structure: structure.clone(),
            blocks: structure.sizes().iter().map(|&p| SymMatrix::identity(p).scaled(s)).collect(),
        }
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn blocks(&self) -> &[SymMatrix] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> &SymMatrix {
        &self.blocks[l]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut SymMatrix {
        &mut self.blocks[l]
    }

    pub fn check_same_structure(&self, other: &BlockSymMatrix) -> Result<()> {
        if self.structure != other.structure {
            return Err(Error::Input(format!(
                "block structure mismatch: {:?} vs {:?}",
                self.structure.sizes(),
                other.structure.sizes()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.data().iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, b| m.max(b.max_abs()))
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(SymMatrix::trace).sum()
    }

    pub fn frob_inner(&self, other: &BlockSymMatrix) -> Result<f64> {
        self.check_same_structure(other)?;
        Ok(self.frob_inner_unchecked(other))
    }

    pub(crate) fn frob_inner_unchecked(&self, other: &BlockSymMatrix) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.frob_inner(b)).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.blocks.iter_mut().for_each(|b| b.scale(s));
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    /// `self += s * other`; structures must match.
    pub fn axpy(&mut self, s: f64, other: &BlockSymMatrix) {
        debug_assert_eq!(self.structure, other.structure);
        self.blocks.iter_mut().zip(&other.blocks).for_each(|(a, b)| a.axpy(s, b));
    }

    pub fn eigh(&self) -> Result<Vec<Eigen>> {
        self.blocks.iter().map(SymMatrix::eigh).collect()
    }

    fn spectrum(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.into_iter().flat_map(|e| e.values).collect())
    }

    /// Largest eigenvalue over all blocks.
    pub fn lambda_max(&self) -> Result<f64> {
        let eig = self.eigh()?;
        Ok(eig.iter().map(|e| e.values[0]).fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn lambda_min(&self) -> Result<f64> {
        let eig = self.eigh()?;
        Ok(eig.iter().map(|e| *e.values.last().expect("non-empty")).fold(f64::INFINITY, f64::min))
    }

    /// `|a|_1 = Σ |λ_i(a)|`.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.spectrum()?.iter().map(|l| l.abs()).sum())
    }

    /// `|a|_∞ = max |λ_i(a)|`.
    pub fn spectral_norm(&self) -> Result<f64> {
        Ok(self.spectrum()?.iter().fold(0.0, |m, l| m.max(l.abs())))
    }

    /// `H(b) = exp(b) / Tr exp(b)`, evaluated with a shift by the largest eigenvalue.
    pub fn entropy_map(&self) -> Result<BlockSymMatrix> {
        let eig = self.eigh()?;
        Ok(entropy_from_eigen(&self.structure, &eig, |l| l))
    }

    /// Matrix logarithm with eigenvalues clamped below at `1e-300`.
    pub fn log(&self) -> Result<BlockSymMatrix> {
        let eig = self.eigh()?;
        let blocks = eig.iter().map(|e| e.compose(|l| l.max(EIG_FLOOR).ln())).collect();
        Ok(Self { structure: self.structure.clone(), blocks })
    }

    /// `Σ λ ln λ` with the same clamp.
    pub fn entropy(&self) -> Result<f64> {
        Ok(self
            .spectrum()?
            .iter()
            .map(|&l| {
                let l = l.max(0.0);
                if l == 0.0 {
                    0.0
                } else {
                    l * l.ln()
                }
            })
            .sum())
    }
}

/// Normalised exponential of the spectrum `f(λ)` across all blocks.
pub(crate) fn entropy_from_eigen(
    structure: &BlockStructure,
    eig: &[Eigen],
    f: impl Fn(f64) -> f64,
) -> BlockSymMatrix {
    let shift = eig
        .iter()
        .flat_map(|e| e.values.iter().map(|&l| f(l)))
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = eig.iter().flat_map(|e| e.values.iter().map(|&l| (f(l) - shift).exp())).sum();
    let blocks = eig.iter().map(|e| e.compose(|l| (f(l) - shift).exp() / total)).collect();
    BlockSymMatrix { structure: structure.clone(), blocks }
}
