//! Prox geometries.
//!
//! A [`ProxSetup`] bundles a norm on the embedding space, a distance-generating
//! function `ω` that is strongly convex with modulus `α` w.r.t. that norm, and the
//! prox-mapping
//!
//! ```text
//! P(z, ξ) = argmin_{u ∈ Z} { ω(u) + ⟨ξ − ω'(z), u⟩ }.
//! ```
//!
//! Four setups are available: a centered Euclidean ball, the full simplex with
//! the entropy, the full spectahedron with the matrix entropy, and the product of
//! two setups with the rescaled norm
//! `‖(x, y)‖ = sqrt(‖x‖²/Ω_x² + ‖y‖²/Ω_y²)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::symmat::{entropy_from_eigen, BlockStructure, BlockSymMatrix, SymMatrix, EIG_FLOOR};

/// Element of an embedding space: a dense vector, a block-diagonal symmetric
/// matrix, or a pair of points of a product space.
///
/// The same type represents dual vectors; every space carries its own inner
/// product (dot product, Frobenius product, or the sum over the pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Vector(Vec<f64>),
    Blocks(BlockSymMatrix),
    Pair(Box<Point>, Box<Point>),
}

/// Operator values and oracle outputs live in the (self-dual) embedding space.
pub type DualVector = Point;

fn shape_error(a: &Point, b: &Point) -> Error {
    Error::Input(format!("shape mismatch between {} and {}", a.shape_name(), b.shape_name()))
}

impl Point {
    pub fn pair(x: Point, y: Point) -> Point {
        Point::Pair(Box::new(x), Box::new(y))
    }

    fn shape_name(&self) -> String {
        match self {
            Point::Vector(v) => format!("vector[{}]", v.len()),
            Point::Blocks(b) => format!("blocks{:?}", b.structure().sizes()),
            Point::Pair(x, y) => format!("({}, {})", x.shape_name(), y.shape_name()),
        }
    }

    pub fn same_shape(&self, other: &Point) -> bool {
        match (self, other) {
            (Point::Vector(a), Point::Vector(b)) => a.len() == b.len(),
            (Point::Blocks(a), Point::Blocks(b)) => a.structure() == b.structure(),
            (Point::Pair(a1, a2), Point::Pair(b1, b2)) => a1.same_shape(b1) && a2.same_shape(b2),
            _ => false,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Point::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_blocks(&self) -> Option<&BlockSymMatrix> {
        match self {
            Point::Blocks(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(&Point, &Point)> {
        match self {
            Point::Pair(x, y) => Some((x, y)),
            _ => None,
        }
    }

    /// Zero element of the same shape.
    pub fn zeros_like(&self) -> Point {
        match self {
            Point::Vector(v) => Point::Vector(vec![0.0; v.len()]),
            Point::Blocks(b) => Point::Blocks(BlockSymMatrix::zeros(b.structure())),
            Point::Pair(x, y) => Point::pair(x.zeros_like(), y.zeros_like()),
        }
    }

    pub fn inner(&self, other: &Point) -> Result<f64> {
        match (self, other) {
            (Point::Vector(a), Point::Vector(b)) if a.len() == b.len() => {
                Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
            }
            (Point::Blocks(a), Point::Blocks(b)) => a.frob_inner(b),
            (Point::Pair(a1, a2), Point::Pair(b1, b2)) => Ok(a1.inner(b1)? + a2.inner(b2)?),
            _ => Err(shape_error(self, other)),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Point) -> Result<()> {
        if !self.same_shape(other) {
            return Err(shape_error(self, other));
        }
        self.axpy_unchecked(s, other);
        Ok(())
    }

    fn axpy_unchecked(&mut self, s: f64, other: &Point) {
        match (self, other) {
            (Point::Vector(a), Point::Vector(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y),
            (Point::Blocks(a), Point::Blocks(b)) => a.axpy(s, b),
            (Point::Pair(a1, a2), Point::Pair(b1, b2)) => {
                a1.axpy_unchecked(s, b1);
                a2.axpy_unchecked(s, b2);
            }
            _ => unreachable!("shapes checked"),
        }
    }

    pub fn scale(&mut self, s: f64) {
        match self {
            Point::Vector(a) => a.iter_mut().for_each(|x| *x *= s),
            Point::Blocks(a) => a.scale(s),
            Point::Pair(a, b) => {
                a.scale(s);
                b.scale(s);
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Point {
        let mut p = self.clone();
        p.scale(s);
        p
    }

    /// `self - other`.
    pub fn sub(&self, other: &Point) -> Result<Point> {
        let mut d = self.clone();
        d.axpy(-1.0, other)?;
        Ok(d)
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Point::Vector(a) => a.iter().all(|v| v.is_finite()),
            Point::Blocks(a) => a.is_finite(),
            Point::Pair(a, b) => a.is_finite() && b.is_finite(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Point::Vector(a) => a.iter().fold(0.0, |m, v| m.max(v.abs())),
            Point::Blocks(a) => a.max_abs(),
            Point::Pair(a, b) => a.max_abs().max(b.max_abs()),
        }
    }
}

/// `(α, Θ, Ω)` of a setup, with `Ω = sqrt(2Θ/α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub alpha: f64,
    pub theta: f64,
    pub omega_radius: f64,
}

impl Capacity {
    fn new(alpha: f64, theta: f64) -> Self {
        Self { alpha, theta, omega_radius: (2.0 * theta / alpha).sqrt() }
    }
}

/// Product of two setups; the weights are `α_x Ω_x²` and `α_y Ω_y²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSetup {
    pub x: ProxSetup,
    pub y: ProxSetup,
    cx: Capacity,
    cy: Capacity,
}

impl ProductSetup {
    /// `α_x Ω_x²`, the divisor of `ω_x` in the combined DGF.
    pub fn weight_x(&self) -> f64 {
        self.cx.alpha * self.cx.omega_radius * self.cx.omega_radius
    }

    pub fn weight_y(&self) -> f64 {
        self.cy.alpha * self.cy.omega_radius * self.cy.omega_radius
    }

    pub fn capacity_x(&self) -> Capacity {
        self.cx
    }

    pub fn capacity_y(&self) -> Capacity {
        self.cy
    }
}

/// Distance-generating setup for a compact convex domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxSetup {
    /// `ω(z) = ½‖z‖₂²` on the ball `{‖z‖₂ ≤ radius}` in `R^dim`.
    Euclidean { dim: usize, radius: f64 },
    /// Entropy on the full simplex in `R^dim`, `‖·‖₁` norm.
    Simplex { dim: usize },
    /// Matrix entropy on the unit-trace PSD block-diagonal matrices, trace norm.
    Spectahedron { structure: BlockStructure },
    Product(Box<ProductSetup>),
}

impl ProxSetup {
    pub fn euclidean(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("euclidean ball needs dim >= 1 and radius > 0, got ({dim}, {radius})")));
        }
        Ok(ProxSetup::Euclidean { dim, radius })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("simplex setup needs N >= 2, got {dim}")));
        }
        Ok(ProxSetup::Simplex { dim })
    }

    pub fn spectahedron(structure: BlockStructure) -> Result<Self> {
        if structure.total() < 2 {
            return Err(Error::Config(format!("spectahedron setup needs N >= 2, got {}", structure.total())));
        }
        Ok(ProxSetup::Spectahedron { structure })
    }

    /// Combines two setups into one with `α = 1, Θ = 1, Ω = √2`.
    pub fn product(x: ProxSetup, y: ProxSetup) -> Result<Self> {
        let cx = x.capacity()?;
        let cy = y.capacity()?;
        Ok(ProxSetup::Product(Box::new(ProductSetup { x, y, cx, cy })))
    }

    pub fn as_product(&self) -> Option<&ProductSetup> {
        match self {
            ProxSetup::Product(p) => Some(p),
            _ => None,
        }
    }

    /// Validates parameters (used after deserialisation).
    pub fn validate(&self) -> Result<()> {
        match self {
            ProxSetup::Euclidean { dim, radius } => Self::euclidean(*dim, *radius).map(|_| ()),
            ProxSetup::Simplex { dim } => Self::simplex(*dim).map(|_| ()),
            ProxSetup::Spectahedron { structure } => Self::spectahedron(structure.clone()).map(|_| ()),
            ProxSetup::Product(p) => {
                p.x.validate()?;
                p.y.validate()
            }
        }
    }

    pub fn capacity(&self) -> Result<Capacity> {
        match self {
            ProxSetup::Euclidean { radius, .. } => Ok(Capacity::new(1.0, 0.5 * radius * radius)),
            ProxSetup::Simplex { dim } => {
                if *dim < 2 {
                    return Err(Error::Config("simplex setup needs N >= 2".into()));
                }
                Ok(Capacity::new(1.0, (*dim as f64).ln()))
            }
            ProxSetup::Spectahedron { structure } => {
                let n = structure.total();
                if n < 2 {
                    return Err(Error::Config("spectahedron setup needs N >= 2".into()));
                }
                Ok(Capacity::new(1.0, (n as f64).ln()))
            }
            ProxSetup::Product(_) => Ok(Capacity::new(1.0, 1.0)),
        }
    }

    /// Minimiser `z_c` of `ω` over the domain.
    pub fn center(&self) -> Point {
        match self {
            ProxSetup::Euclidean { dim, .. } => Point::Vector(vec![0.0; *dim]),
            ProxSetup::Simplex { dim } => Point::Vector(vec![1.0 / *dim as f64; *dim]),
            ProxSetup::Spectahedron { structure } => {
                Point::Blocks(BlockSymMatrix::scaled_identity(structure, 1.0 / structure.total() as f64))
            }
            ProxSetup::Product(p) => Point::pair(p.x.center(), p.y.center()),
        }
    }

    fn check_shape(&self, z: &Point) -> Result<()> {
        let ok = match (self, z) {
            (ProxSetup::Euclidean { dim, .. } | ProxSetup::Simplex { dim }, Point::Vector(v)) => v.len() == *dim,
            (ProxSetup::Spectahedron { structure }, Point::Blocks(b)) => b.structure() == structure,
            (ProxSetup::Product(p), Point::Pair(x, y)) => p.x.check_shape(x).is_ok() && p.y.check_shape(y).is_ok(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("point of shape {} does not belong to this setup", z.shape_name())))
        }
    }

    pub fn norm(&self, z: &Point) -> Result<f64> {
        self.check_shape(z)?;
        Ok(match (self, z) {
            (ProxSetup::Euclidean { .. }, Point::Vector(v)) => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
            (ProxSetup::Simplex { .. }, Point::Vector(v)) => v.iter().map(|a| a.abs()).sum(),
            (ProxSetup::Spectahedron { .. }, Point::Blocks(b)) => b.trace_norm()?,
            (ProxSetup::Product(p), Point::Pair(x, y)) => {
                let nx = p.x.norm(x)? / p.cx.omega_radius;
                let ny = p.y.norm(y)? / p.cy.omega_radius;
                (nx * nx + ny * ny).sqrt()
            }
            _ => unreachable!("shape checked"),
        })
    }

    pub fn dual_norm(&self, xi: &Point) -> Result<f64> {
        self.check_shape(xi)?;
        Ok(match (self, xi) {
            (ProxSetup::Euclidean { .. }, Point::Vector(v)) => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
            (ProxSetup::Simplex { .. }, Point::Vector(v)) => v.iter().fold(0.0, |m, a| m.max(a.abs())),
            (ProxSetup::Spectahedron { .. }, Point::Blocks(b)) => b.spectral_norm()?,
            (ProxSetup::Product(p), Point::Pair(x, y)) => {
                let nx = p.x.dual_norm(x)? * p.cx.omega_radius;
                let ny = p.y.dual_norm(y)? * p.cy.omega_radius;
                (nx * nx + ny * ny).sqrt()
            }
            _ => unreachable!("shape checked"),
        })
    }

    /// Membership in `Z` up to `tol` (trace/sum constraints and sign constraints).
    pub fn contains(&self, z: &Point, tol: f64) -> bool {
        if self.check_shape(z).is_err() || !z.is_finite() {
            return false;
        }
        match (self, z) {
            (ProxSetup::Euclidean { radius, .. }, Point::Vector(v)) => {
                v.iter().map(|a| a * a).sum::<f64>().sqrt() <= radius + tol
            }
            (ProxSetup::Simplex { .. }, Point::Vector(v)) => {
                v.iter().all(|&a| a >= -tol) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            (ProxSetup::Spectahedron { .. }, Point::Blocks(b)) => {
                (b.trace() - 1.0).abs() <= tol && b.lambda_min().map(|l| l >= -tol).unwrap_or(false)
            }
            (ProxSetup::Product(p), Point::Pair(x, y)) => p.x.contains(x, tol) && p.y.contains(y, tol),
            _ => false,
        }
    }

    /// Errors unless `z` lies in `Z°`, the set where `ω'` is defined.
    pub fn check_interior(&self, z: &Point) -> Result<()> {
        self.check_shape(z)?;
        match (self, z) {
            (ProxSetup::Euclidean { .. }, _) => {
                if !self.contains(z, 1e-9) {
                    return Err(Error::Domain("point outside the Euclidean ball".into()));
                }
            }
            (ProxSetup::Simplex { .. }, Point::Vector(v)) => {
                if let Some(j) = v.iter().position(|a| !(*a > 0.0)) {
                    return Err(Error::Domain(format!("simplex point has non-positive coordinate {j}")));
                }
            }
            (ProxSetup::Spectahedron { .. }, Point::Blocks(b)) => {
                if !b.is_finite() {
                    return Err(Error::Domain("non-finite spectahedron point".into()));
                }
                if b.lambda_min()? < -1e-12 {
                    return Err(Error::Domain("spectahedron point is not positive semidefinite".into()));
                }
            }
            (ProxSetup::Product(p), Point::Pair(x, y)) => {
                p.x.check_interior(x)?;
                p.y.check_interior(y)?;
            }
            _ => unreachable!("shape checked"),
        }
        Ok(())
    }

    pub fn omega(&self, z: &Point) -> Result<f64> {
        self.check_shape(z)?;
        Ok(match (self, z) {
            (ProxSetup::Euclidean { .. }, Point::Vector(v)) => 0.5 * v.iter().map(|a| a * a).sum::<f64>(),
            (ProxSetup::Simplex { .. }, Point::Vector(v)) => {
                v.iter().map(|&a| if a > 0.0 { a * a.ln() } else { 0.0 }).sum()
            }
            (ProxSetup::Spectahedron { .. }, Point::Blocks(b)) => b.entropy()?,
            (ProxSetup::Product(p), Point::Pair(x, y)) => p.x.omega(x)? / p.weight_x() + p.y.omega(y)? / p.weight_y(),
            _ => unreachable!("shape checked"),
        })
    }

    /// The selection `ω'(z)` on `Z°`.
    pub fn omega_grad(&self, z: &Point) -> Result<Point> {
        self.check_interior(z)?;
        Ok(match (self, z) {
            (ProxSetup::Euclidean { .. }, Point::Vector(v)) => Point::Vector(v.clone()),
            (ProxSetup::Simplex { .. }, Point::Vector(v)) => {
                Point::Vector(v.iter().map(|&a| 1.0 + a.max(EIG_FLOOR).ln()).collect())
            }
            (ProxSetup::Spectahedron { structure }, Point::Blocks(b)) => {
                let mut g = b.log()?;
                g.axpy(1.0, &BlockSymMatrix::scaled_identity(structure, 1.0));
                Point::Blocks(g)
            }
            (ProxSetup::Product(p), Point::Pair(x, y)) => Point::pair(
                p.x.omega_grad(x)?.scaled(1.0 / p.weight_x()),
                p.y.omega_grad(y)?.scaled(1.0 / p.weight_y()),
            ),
            _ => unreachable!("shape checked"),
        })
    }

    /// Bregman prox-function `V(z, u) = ω(u) − ω(z) − ⟨ω'(z), u − z⟩`.
    pub fn bregman(&self, z: &Point, u: &Point) -> Result<f64> {
        self.check_interior(z)?;
        self.check_shape(u)?;
        Ok(match (self, z, u) {
            (ProxSetup::Euclidean { .. }, Point::Vector(a), Point::Vector(b)) => {
                0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
            }
            (ProxSetup::Simplex { .. }, Point::Vector(a), Point::Vector(b)) => {
                let kl: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(&zj, &uj)| if uj > 0.0 { uj * (uj.ln() - zj.max(EIG_FLOOR).ln()) } else { 0.0 })
                    .sum();
                kl + a.iter().sum::<f64>() - b.iter().sum::<f64>()
            }
            (ProxSetup::Spectahedron { .. }, Point::Blocks(a), Point::Blocks(b)) => {
                let log_z = a.log()?;
                b.entropy()? - b.frob_inner(&log_z)? + a.trace() - b.trace()
            }
            (ProxSetup::Product(p), Point::Pair(zx, zy), Point::Pair(ux, uy)) => {
                p.x.bregman(zx, ux)? / p.weight_x() + p.y.bregman(zy, uy)? / p.weight_y()
            }
            _ => unreachable!("shape checked"),
        })
    }

    /// Prox-mapping `P(z, ξ)`.
    pub fn prox(&self, z: &Point, xi: &Point) -> Result<Point> {
        self.check_shape(xi)?;
        if !xi.is_finite() {
            return Err(Error::Input("non-finite dual argument to prox".into()));
        }
        self.check_interior(z)?;
        Ok(match (self, z, xi) {
            (ProxSetup::Euclidean { radius, .. }, Point::Vector(a), Point::Vector(g)) => {
                let mut w: Vec<f64> = a.iter().zip(g).map(|(x, y)| x - y).collect();
                let nrm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nrm > *radius {
                    let s = radius / nrm;
                    w.iter_mut().for_each(|v| *v *= s);
                }
                Point::Vector(w)
            }
            (ProxSetup::Simplex { .. }, Point::Vector(a), Point::Vector(g)) => {
                let logits: Vec<f64> = a.iter().zip(g).map(|(&zj, &gj)| zj.max(EIG_FLOOR).ln() - gj).collect();
                Point::Vector(softmax_floored(&logits))
            }
            (ProxSetup::Spectahedron { structure }, Point::Blocks(b), Point::Blocks(g)) => {
                let mut arg = b.log()?;
                arg.axpy(-1.0, g);
                let eig = arg.eigh()?;
                let mut out = entropy_from_eigen(structure, &eig, |l| l);
                floor_spectrum(&mut out, &eig)?;
                Point::Blocks(out)
            }
            (ProxSetup::Product(p), Point::Pair(zx, zy), Point::Pair(gx, gy)) => Point::pair(
                p.x.prox(zx, &gx.scaled(p.weight_x()))?,
                p.y.prox(zy, &gy.scaled(p.weight_y()))?,
            ),
            _ => unreachable!("shape checked"),
        })
    }

    /// Random feasible point; entropy setups receive strictly interior points
    /// whose spread is controlled by a random concentration.
    pub fn random_point(&self, stream: &mut RandomStream) -> Point {
        match self {
            ProxSetup::Euclidean { dim, radius } => {
                let g: Vec<f64> = (0..*dim).map(|_| stream.normal()).collect();
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                let r = radius * stream.uniform().powf(1.0 / *dim as f64);
                Point::Vector(g.iter().map(|v| v * r / n).collect())
            }
            ProxSetup::Simplex { dim } => {
                let temp = stream.uniform_in(0.2, 3.0);
                let logits: Vec<f64> = (0..*dim).map(|_| temp * stream.normal()).collect();
                Point::Vector(softmax_floored(&logits))
            }
            ProxSetup::Spectahedron { structure } => {
                let temp = stream.uniform_in(0.2, 3.0);
                let blocks = structure
                    .sizes()
                    .iter()
                    .map(|&p| {
                        let raw: Vec<f64> = (0..p * p).map(|_| temp * stream.normal()).collect();
                        SymMatrix::symmetrized(p, &raw)
                    })
                    .collect();
                let b = BlockSymMatrix::new(blocks).expect("valid structure");
                Point::Blocks(b.entropy_map().expect("finite input"))
            }
            ProxSetup::Product(p) => Point::pair(p.x.random_point(stream), p.y.random_point(stream)),
        }
    }

    /// Random dual vector with entries of order `scale`.
    pub fn random_dual(&self, stream: &mut RandomStream, scale: f64) -> Point {
        match self {
            ProxSetup::Euclidean { dim, .. } | ProxSetup::Simplex { dim } => {
                Point::Vector((0..*dim).map(|_| scale * stream.uniform_in(-1.0, 1.0)).collect())
            }
            ProxSetup::Spectahedron { structure } => {
                let blocks = structure
                    .sizes()
                    .iter()
                    .map(|&p| {
                        let raw: Vec<f64> = (0..p * p).map(|_| scale * stream.uniform_in(-1.0, 1.0)).collect();
                        SymMatrix::symmetrized(p, &raw)
                    })
                    .collect();
                Point::Blocks(BlockSymMatrix::new(blocks).expect("valid structure"))
            }
            ProxSetup::Product(p) => Point::pair(p.x.random_dual(stream, scale), p.y.random_dual(stream, scale)),
        }
    }
}

/// `exp(l_j − max l) / Σ`, with outputs floored at `1e-300` to stay in `Z°`.
fn softmax_floored(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v = (*v / s).max(EIG_FLOOR));
    w
}

/// Raises eigenvalues that underflowed to zero back to the floor.
fn floor_spectrum(out: &mut BlockSymMatrix, eig: &[crate::symmat::Eigen]) -> Result<()> {
    let shift = eig.iter().flat_map(|e| e.values.iter().cloned()).fold(f64::NEG_INFINITY, f64::max);
    if eig.iter().flat_map(|e| e.values.iter()).all(|&l| l - shift > -700.0) {
        return Ok(());
    }
    let total: f64 = eig.iter().flat_map(|e| e.values.iter().map(|&l| (l - shift).exp())).sum();
    for (l, e) in eig.iter().enumerate() {
        *out.block_mut(l) = e.compose(|v| ((v - shift).exp() / total).max(EIG_FLOOR));
    }
    Ok(())
}
