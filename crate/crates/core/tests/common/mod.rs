#![allow(dead_code)]

use smpx::geometry::{Point, ProxSetup};
use smpx::{BlockStructure, RandomStream, Result};

/// The four setups exercised by the prox suites.
pub fn setups() -> Vec<(&'static str, ProxSetup)> {
    let spect = |sizes: Vec<usize>| ProxSetup::spectahedron(BlockStructure::new(sizes).unwrap()).unwrap();
    vec![
        ("euclidean", ProxSetup::euclidean(5, 2.0).unwrap()),
        ("simplex", ProxSetup::simplex(7).unwrap()),
        ("spectahedron", spect(vec![3, 2, 1])),
        ("product", ProxSetup::product(ProxSetup::simplex(4).unwrap(), spect(vec![2, 3])).unwrap()),
    ]
}

/// Largest excess `lhs − rhs` over the prox inequalities for one triple
/// `(z, ζ, η)` and comparison point `u`:
///
/// * `‖P(z,ζ) − P(z,η)‖ ≤ ‖ζ − η‖_* / α`
/// * `V(P(z,ζ), u) ≤ V(z,u) + ⟨ζ, u − P(z,ζ)⟩ − V(z, P(z,ζ))`
/// * `V(P(z,ζ), u) ≤ V(z,u) + ⟨ζ, u − z⟩ + ‖ζ‖_*²/(2α)`
/// * `V(r₊, u) − V(z,u) ≤ ⟨η, u − w⟩ + ‖ζ − η‖_*²/(2α) − α‖w − z‖²/2`
///   with `w = P(z,ζ)`, `r₊ = P(z,η)`.
pub fn prox_excess(setup: &ProxSetup, z: &Point, zeta: &Point, eta: &Point, u: &Point) -> Result<[f64; 4]> {
    let alpha = setup.capacity()?.alpha;
    let w = setup.prox(z, zeta)?;
    let r = setup.prox(z, eta)?;
    let d = zeta.sub(eta)?;
    let dn = setup.dual_norm(&d)?;
    let lip = setup.norm(&w.sub(&r)?)? - dn / alpha;
    let v_zu = setup.bregman(z, u)?;
    let v_wu = setup.bregman(&w, u)?;
    let a = v_wu - (v_zu + zeta.inner(&u.sub(&w)?)? - setup.bregman(z, &w)?);
    let zn = setup.dual_norm(zeta)?;
    let b = v_wu - (v_zu + zeta.inner(&u.sub(z)?)? + zn * zn / (2.0 * alpha));
    let wz = setup.norm(&w.sub(z)?)?;
    let c = setup.bregman(&r, u)? - v_zu - (eta.inner(&u.sub(&w)?)? + dn * dn / (2.0 * alpha) - 0.5 * alpha * wz * wz);
    Ok([lip, a, b, c])
}

/// Random `(z, ζ, η, u)` with dual entries of order `scale`.
pub fn random_quad(setup: &ProxSetup, s: &mut RandomStream, scale: f64) -> (Point, Point, Point, Point) {
    let z = setup.random_point(s);
    let zeta = setup.random_dual(s, scale);
    let eta = setup.random_dual(s, scale);
    let u = setup.random_point(s);
    (z, zeta, eta, u)
}

/// `argmin_{u ∈ Δ} Σ u_j ln u_j + c_j u_j` by exact pairwise coordinate
/// descent (the mass of two coordinates is redistributed by bisection).
pub fn simplex_argmin_pairwise(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut u = vec![1.0 / n as f64; n];
    for _sweep in 0..400 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let s = u[i] + u[j];
                // d/dv [v ln v + (s−v) ln(s−v) + c_i v + c_j (s−v)] = ln v − ln(s−v) + c_i − c_j.
                let (mut lo, mut hi) = (0.0, s);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= 0.0 || mid >= s {
                        break;
                    }
                    if mid.ln() - (s - mid).ln() + c[i] - c[j] > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let v = 0.5 * (lo + hi);
                moved = moved.max((v - u[i]).abs());
                u[i] = v;
                u[j] = s - v;
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    u
}

/// Largest deviation of `Σ_{ȷ,ı} x_ȷ ν_ı Ξ(z; ȷ, ı)` from `F(z)`, `ν_ı = Tr y_ı`.
pub fn enumeration_bias(inst: &smpx::eigopt::EigInstance, z: &Point) -> Result<f64> {
    let (x, y) = z.as_pair().expect("pair point");
    let x = x.as_vector().expect("vector x");
    let y = y.as_blocks().expect("block y");
    let mut mean = inst.exact_operator(z)?.zeros_like();
    for (j, &xj) in x.iter().enumerate() {
        for (b, blk) in y.blocks().iter().enumerate() {
            let p = xj * blk.trace();
            if p > 0.0 {
                mean.axpy(p, &inst.xi_for_indices(z, j, b)?)?;
            }
        }
    }
    Ok(mean.sub(&inst.exact_operator(z)?)?.max_abs())
}

/// Random eigenvalue instance with entries uniform in `[−1, 1]`.
pub fn small_eig_instance(n: usize, sizes: &[usize], s: &mut RandomStream) -> smpx::eigopt::EigInstance {
    use smpx::{BlockSymMatrix, SymMatrix};
    let mut blk = || {
        BlockSymMatrix::new(
            sizes
                .iter()
                .map(|&p| {
                    let raw: Vec<f64> = (0..p * p).map(|_| s.uniform_in(-1.0, 1.0)).collect();
                    SymMatrix::symmetrized(p, &raw)
                })
                .collect(),
        )
        .unwrap()
    };
    let a0 = blk();
    smpx::eigopt::EigInstance::new(a0, (0..n).map(|_| blk()).collect()).unwrap()
}
