//! Divisibility, trace-distance, ancilla-entanglement and volume diagnostics.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::channel::{self, AffineForm, LinearMap, QuantumChannel};
use crate::entanglement::WoottersSpectrum;
use crate::error::{Error, Result};
use crate::meq::PropagatorFamily;
use crate::operator::DensityMatrix;

/// Condition threshold for inverting the first map.
pub const INVERT_TOL: f64 = 1e-10;

/// `E2 ∘ E1⁻¹`, not necessarily CPT.
pub fn intermediate_map(e1: &QuantumChannel<f64>, e2: &QuantumChannel<f64>) -> Result<LinearMap<f64>> {
    if e1.dim_out() != e2.dim_in() {
        return Err(Error::DimensionMismatch { expected: e1.dim_out(), found: e2.dim_in() });
    }
    let inv = channel::invert_map(e1, INVERT_TOL)?;
    let s = e2.superoperator() * inv.superoperator();
    LinearMap::from_superoperator(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivisibilityClass {
    CPDivisible,
    PDivisibleOnly,
    Indivisible,
}

/// Verdict of [`divisibility_class`] with the evidence behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisibilityVerdict {
    pub class: DivisibilityClass,
    /// Minimal Choi eigenvalue of the intermediate map.
    pub min_choi_eig: f64,
    /// Smallest output eigenvalue over the sampled pure inputs.
    pub min_output_eig: f64,
    /// Bloch vector of the worst pure input found.
    pub worst_input: [f64; 3],
}

/// Number of local refinements started from the worst mesh points.
pub const LOCAL_REFINEMENTS: usize = 20;

/// Vertices of an icosphere after `level` subdivisions (`10·4^level + 2`).
pub fn icosphere(level: usize) -> Vec<Vector3<f64>> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, phi, 0.0), (1.0, phi, 0.0), (-1.0, -phi, 0.0), (1.0, -phi, 0.0),
        (0.0, -1.0, phi), (0.0, 1.0, phi), (0.0, -1.0, -phi), (0.0, 1.0, -phi),
        (phi, 0.0, -1.0), (phi, 0.0, 1.0), (-phi, 0.0, -1.0), (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts
}

/// Smallest output eigenvalue `(1 − ‖A n + b‖)/2` of a trace-preserving,
/// Hermiticity-preserving qubit map on the pure input with Bloch vector `n`.
fn output_min_eig(f: &AffineForm<f64>, n: &Vector3<f64>) -> f64 {
    0.5 * (1.0 - f.apply(n).norm())
}

/// Pattern search on the sphere, starting at `n` with step `h`.
fn refine(f: &AffineForm<f64>, mut n: Vector3<f64>, mut h: f64) -> (f64, Vector3<f64>) {
    let mut best = output_min_eig(f, &n);
    while h > 1e-10 {
        let (e1, e2) = tangent_frame(&n);
        let mut improved = false;
        for (u, s) in [(e1, 1.0), (e1, -1.0), (e2, 1.0), (e2, -1.0)] {
            let cand = (n + u * (s * h)).normalize();
            let v = output_min_eig(f, &cand);
            if v < best {
                best = v;
                n = cand;
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, n)
}

fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = n.cross(&a).normalize();
    (e1, n.cross(&e1))
}

/// Classifies `E2 ∘ E1⁻¹` as CP, positive only, or not positive.
///
/// Positivity is probed on pure qubit inputs from an icosphere with at least
/// `max(p_samples, 642)` vertices, followed by local refinement from the
/// [`LOCAL_REFINEMENTS`] worst vertices. A `PDivisibleOnly` verdict means no
/// violation was found at that resolution.
pub fn divisibility_class(
    e1: &QuantumChannel<f64>,
    e2: &QuantumChannel<f64>,
    cp_tol: f64,
    p_samples: usize,
) -> Result<DivisibilityVerdict> {
    let map = intermediate_map(e1, e2)?;
    classify_map(&map, cp_tol, p_samples)
}

/// [`divisibility_class`] for an already formed intermediate map.
pub fn classify_map(map: &LinearMap<f64>, cp_tol: f64, p_samples: usize) -> Result<DivisibilityVerdict> {
    let min_choi_eig = map.min_choi_eig();
    let form = map.affine_form()?;
    let mut level = 3;
    while 10 * 4usize.pow(level as u32) + 2 < p_samples {
        level += 1;
    }
    let mesh = icosphere(level);
    let spacing = 1.2 / 2f64.powi(level as i32);
    let mut scored: Vec<(f64, usize)> = mesh.iter().enumerate().map(|(i, n)| (output_min_eig(&form, n), i)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (min_output_eig, worst) = scored
        .iter()
        .take(LOCAL_REFINEMENTS)
        .map(|&(_, i)| refine(&form, mesh[i], spacing))
        .fold((f64::INFINITY, Vector3::z()), |acc, r| if r.0 < acc.0 { r } else { acc });
    let class = if min_choi_eig >= -cp_tol {
        DivisibilityClass::CPDivisible
    } else if min_output_eig >= -cp_tol {
        DivisibilityClass::PDivisibleOnly
    } else {
        DivisibilityClass::Indivisible
    };
    Ok(DivisibilityVerdict { class, min_choi_eig, min_output_eig, worst_input: [worst.x, worst.y, worst.z] })
}

/// Trace distance of an evolved pair and its accumulated increase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlpFlow {
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `Σ max(0, σ(t_{k+1}) − σ(t_k))`.
    pub measure: f64,
}

pub fn blp_flow(family: &PropagatorFamily, pair: (&DensityMatrix<f64>, &DensityMatrix<f64>)) -> Result<BlpFlow> {
    let d = family.dim();
    for s in [pair.0, pair.1] {
        if s.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
        }
    }
    let sigma: Vec<f64> = (0..family.len())
        .into_par_iter()
        .map(|i| {
            let ch = family.channel(i);
            channel::trace_distance_matrices(&ch.apply(pair.0.matrix()), &ch.apply(pair.1.matrix()))
        })
        .collect();
    let measure = sigma.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum();
    Ok(BlpFlow { times: family.times().to_vec(), sigma, measure })
}

/// Concurrence of `(Φ_t ⊗ id)|φ+⟩⟨φ+|` on the grid.
pub fn rhp_flow(family: &PropagatorFamily) -> Result<Vec<f64>> {
    if family.dim() != 2 {
        return Err(Error::NotAQubitChannel { dim: family.dim() });
    }
    Ok((0..family.len())
        .into_par_iter()
        .map(|i| WoottersSpectrum::of_matrix(family.choi(i).matrix()).concurrence())
        .collect())
}

/// `|det A(t)|` of the affine Bloch form on the grid.
pub fn volume_flow(family: &PropagatorFamily) -> Result<Vec<f64>> {
    if family.dim() != 2 {
        return Err(Error::NotAQubitChannel { dim: family.dim() });
    }
    (0..family.len())
        .into_par_iter()
        .map(|i| Ok(channel::qubit_affine_form(&family.channel(i))?.a.determinant().abs()))
        .collect()
}

/// Minimal Choi eigenvalue of `E_{t_k} ∘ E_{t_{k−1}}⁻¹`; `NaN` at `k = 0` and
/// where the earlier map is singular.
pub fn intermediate_choi_series(family: &PropagatorFamily) -> Vec<f64> {
    (0..family.len())
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return f64::NAN;
            }
            intermediate_map(&family.channel(i - 1), &family.channel(i)).map_or(f64::NAN, |m| m.min_choi_eig())
        })
        .collect()
}

/// One CSV row of the combined diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub t: f64,
    pub sigma: f64,
    pub rhp: f64,
    pub volume: f64,
    pub min_intermediate_choi_eig: f64,
}

/// All diagnostics on one family, with the trace distance of `pair`.
pub fn measure_rows(family: &PropagatorFamily, pair: (&DensityMatrix<f64>, &DensityMatrix<f64>)) -> Result<Vec<MeasureRow>> {
    let blp = blp_flow(family, pair)?;
    let rhp = rhp_flow(family)?;
    let vol = volume_flow(family)?;
    let inter = intermediate_choi_series(family);
    Ok((0..family.len())
        .map(|i| MeasureRow {
            t: family.times()[i],
            sigma: blp.sigma[i],
            rhp: rhp[i],
            volume: vol[i],
            min_intermediate_choi_eig: inter[i],
        })
        .collect())
}
