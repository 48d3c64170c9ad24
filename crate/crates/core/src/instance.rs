//! Seeded instance generators and the JSON instance file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::composite::{AffineComponent, SdfComponent, SdfSystem};
use crate::eigopt::EigInstance;
use crate::error::{Error, Result};
use crate::geometry::ProxSetup;
use crate::rng::RandomStream;
use crate::symmat::{BlockStructure, BlockSymMatrix, SymMatrix};

/// Generator stream index; instance data never shares a stream with a solver run.
const GENERATOR_RUN: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    BilinearSimplexSpectahedron,
    SdfSystem,
    EigMin,
    ScalarMinimax,
}

impl InstanceKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bilinear_simplex_spectahedron" => Ok(Self::BilinearSimplexSpectahedron),
            "sdf_system" => Ok(Self::SdfSystem),
            "eig_min" => Ok(Self::EigMin),
            "scalar_minimax" => Ok(Self::ScalarMinimax),
            other => Err(Error::Config(format!("unknown instance kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BilinearSimplexSpectahedron => "bilinear_simplex_spectahedron",
            Self::SdfSystem => "sdf_system",
            Self::EigMin => "eig_min",
            Self::ScalarMinimax => "scalar_minimax",
        }
    }
}

/// Generator parameters; unused fields are ignored by a kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    /// Number of data matrices (eigenvalue kinds).
    pub n: usize,
    /// Diagonal block sizes (eigenvalue kinds) or inequality sizes (sdf).
    pub blocks: Vec<usize>,
    /// Explicit scalar data `A_1..A_n` for `scalar_minimax`.
    pub values: Option<Vec<f64>>,
    /// Dimension of `x` for `sdf_system`.
    pub dim: usize,
    /// Number of smooth inequalities (`M_ℓ = 0`) for `sdf_system`; the rest are noisy (`L_ℓ = 0`).
    pub smooth: usize,
    /// Noise constant `M_ℓ` of the noisy inequalities (at least 1).
    pub noise: f64,
    /// Feasibility margin: `ψ_ℓ(0) = −δ I`.
    pub delta: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self { n: 20, blocks: vec![4, 4, 4], values: None, dim: 2, smooth: 1, noise: 1.0, delta: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InstanceData {
    Eig(EigInstance),
    Sdf(SdfSystem),
}

/// Contents of an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub kind: InstanceKind,
    pub seed: u64,
    pub params: GeneratorParams,
    /// `max_j |A_j|_∞` for eigenvalue kinds.
    #[serde(default)]
    pub a_inf: Option<f64>,
    pub data: InstanceData,
}

impl InstanceFile {
    pub fn eig(&self) -> Option<&EigInstance> {
        match &self.data {
            InstanceData::Eig(e) => Some(e),
            InstanceData::Sdf(_) => None,
        }
    }

    pub fn sdf(&self) -> Option<&SdfSystem> {
        match &self.data {
            InstanceData::Sdf(s) => Some(s),
            InstanceData::Eig(_) => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Input(format!("instance file: {e}")))?;
        if let InstanceData::Sdf(s) = &f.data {
            s.validate()?;
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn random_symmetric(p: usize, stream: &mut RandomStream) -> SymMatrix {
    let raw: Vec<f64> = (0..p * p).map(|_| stream.uniform_in(-1.0, 1.0)).collect();
    SymMatrix::symmetrized(p, &raw)
}

fn random_blocks(structure: &BlockStructure, stream: &mut RandomStream) -> BlockSymMatrix {
    BlockSymMatrix::new(structure.sizes().iter().map(|&p| random_symmetric(p, stream)).collect()).expect("valid structure")
}

/// `Q diag(spectrum) Qᵀ` with `Q` the eigenvectors of a random symmetric matrix.
fn random_rotated(spectrum: &[f64], stream: &mut RandomStream) -> Result<SymMatrix> {
    let p = spectrum.len();
    let basis = random_symmetric(p, stream).eigh()?;
    let mut s = SymMatrix::zeros(p);
    for (k, d) in spectrum.iter().enumerate() {
        s.axpy(*d, &SymMatrix::outer(&basis.vector(k)));
    }
    Ok(s)
}

/// Generates a reproducible instance.
pub fn generate(kind: InstanceKind, params: &GeneratorParams, seed: u64) -> Result<InstanceFile> {
    let mut stream = RandomStream::new(seed, GENERATOR_RUN);
    let data = match kind {
        InstanceKind::BilinearSimplexSpectahedron | InstanceKind::EigMin => {
            if params.n < 2 {
                return Err(Error::Config(format!("n must be at least 2, got {}", params.n)));
            }
            let structure = BlockStructure::new(params.blocks.clone())?;
            let a0 = match kind {
                InstanceKind::EigMin => random_blocks(&structure, &mut stream),
                _ => BlockSymMatrix::zeros(&structure),
            };
            let a = (0..params.n).map(|_| random_blocks(&structure, &mut stream)).collect();
            InstanceData::Eig(EigInstance::new(a0, a)?)
        }
        InstanceKind::ScalarMinimax => {
            let values = match &params.values {
                Some(v) => v.clone(),
                None => {
                    if params.n < 2 {
                        return Err(Error::Config(format!("n must be at least 2, got {}", params.n)));
                    }
                    (0..params.n).map(|_| stream.uniform_in(-1.0, 1.0)).collect()
                }
            };
            let scalar = |v: f64| BlockSymMatrix::new(vec![SymMatrix::scalar(v)]).expect("1x1");
            InstanceData::Eig(EigInstance::new(scalar(0.0), values.into_iter().map(scalar).collect())?)
        }
        InstanceKind::SdfSystem => InstanceData::Sdf(generate_sdf(params, &mut stream)?),
    };
    let a_inf = match &data {
        InstanceData::Eig(e) => Some(e.a_inf()),
        InstanceData::Sdf(_) => None,
    };
    Ok(InstanceFile { kind, seed, params: params.clone(), a_inf, data })
}

/// `ψ_ℓ(x) = (u_ℓᵀ x) S_ℓ − δ I` on the unit ball, with unit directions `u_ℓ`
/// summing to zero and `S_ℓ ⪰ 0`, `|S_ℓ|_∞ = 1`. `x* = 0` gives `ψ_ℓ(x*) = −δ I`.
fn generate_sdf(params: &GeneratorParams, stream: &mut RandomStream) -> Result<SdfSystem> {
    let m = params.blocks.len();
    let d = params.dim;
    if m < 2 {
        return Err(Error::Config("sdf_system needs at least two inequalities".into()));
    }
    if d < 2 {
        return Err(Error::Config("sdf_system needs dim >= 2".into()));
    }
    if params.blocks.contains(&0) {
        return Err(Error::Config("inequality sizes must be positive".into()));
    }
    if params.smooth > m {
        return Err(Error::Config(format!("smooth count {} exceeds m = {m}", params.smooth)));
    }
    if !(params.noise >= 1.0 && params.noise.is_finite()) {
        return Err(Error::Config("noise constant must be at least 1 (it also bounds |ψ'|)".into()));
    }
    if !(params.delta >= 0.0 && params.delta.is_finite()) {
        return Err(Error::Config("delta must be finite and nonnegative".into()));
    }
    // Directions at equal angles in the plane of the first two coordinates.
    let phase = stream.uniform_in(0.0, 2.0 * std::f64::consts::PI);
    let x_setup = ProxSetup::euclidean(d, 1.0)?;
    let omega_x = x_setup.capacity()?.omega_radius;
    let mut components = Vec::with_capacity(m);
    for (l, &p) in params.blocks.iter().enumerate() {
        let angle = phase + 2.0 * std::f64::consts::PI * l as f64 / m as f64;
        let mut u = vec![0.0; d];
        u[0] = angle.cos();
        u[1] = angle.sin();
        let spectrum: Vec<f64> =
            (0..p).map(|k| if p == 1 { 1.0 } else { 1.0 - 0.8 * k as f64 / (p - 1) as f64 }).collect();
        let s = random_rotated(&spectrum, stream)?;
        let c = u.iter().map(|ui| s.scaled(*ui)).collect();
        let psi = AffineComponent::new(SymMatrix::identity(p).scaled(-params.delta), c)?;
        let smooth = l < params.smooth;
        let (psi, lip, noise) = if smooth {
            (psi, 1.0 / omega_x, 0.0)
        } else {
            (psi.with_noise(omega_x * params.noise, params.noise)?, 0.0, params.noise)
        };
        components.push(SdfComponent { psi, lip, noise });
    }
    SdfSystem::new(x_setup, components)
}
