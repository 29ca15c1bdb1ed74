//! Two-qubit entanglement monotones.
//!
//! The spin-flip spectrum `λ1 ≥ … ≥ λ4` (square roots of the eigenvalues of
//! `ρ (σy⊗σy) ρ* (σy⊗σy)`) is computed as the singular values of
//! `Wᵀ (σy⊗σy) W`, where `ρ = W W†` is the eigen-factor of `ρ`. Both
//! matrices share their nonzero spectrum, and the factored form avoids the
//! square-root loss of precision near zero eigenvalues.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::DensityMatrix;
use crate::scalar::{cr, CMatrix, CVector, Real, C};

/// Square roots of the spin-flip spectrum, sorted descending.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WoottersSpectrum<T: Real> {
    pub lambdas: [T; 4],
}

impl<T: Real> WoottersSpectrum<T> {
    pub fn of(state: &DensityMatrix<T>) -> Result<Self> {
        if state.dim() != 4 {
            return Err(Error::BadDimension { expected: 4, found: state.dim() });
        }
        Ok(Self::of_matrix(state.matrix()))
    }

    pub(crate) fn of_matrix(rho: &CMatrix<T>) -> Self {
        let (vals, vecs) = linalg::eigh(rho);
        let tr = vals.iter().fold(T::zero(), |a, &b| a + b.abs()).max(T::one());
        let cut = T::default_epsilon() * T::lit(64.0) * tr;
        let kept: Vec<usize> = (0..4).filter(|&k| vals[k] > cut).collect();
        let mut lambdas = [T::zero(); 4];
        if kept.is_empty() {
            return Self { lambdas };
        }
        let mut w = linalg::zeros::<T>(4, kept.len());
        for (col, &k) in kept.iter().enumerate() {
            let s = cr(vals[k].sqrt());
            for r in 0..4 {
                w[(r, col)] = vecs[(r, k)] * s;
            }
        }
        let t = w.transpose() * spin_flip::<T>() * &w;
        for (i, s) in linalg::singular_values(&t).into_iter().enumerate() {
            lambdas[i] = s;
        }
        Self { lambdas }
    }

    pub fn concurrence(&self) -> T {
        let l = &self.lambdas;
        (l[0] - l[1] - l[2] - l[3]).max(T::zero()).min(T::one())
    }

    pub fn assistance(&self) -> T {
        (self.lambdas[0] + self.lambdas[1] + self.lambdas[2] + self.lambdas[3]).min(T::one())
    }
}

/// `σy ⊗ σy`, which is real.
fn spin_flip<T: Real>() -> CMatrix<T> {
    let y = linalg::sigma_y::<T>();
    linalg::kron(&y, &y)
}

/// Entanglement monotone used by the witness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonotoneKind {
    #[default]
    Concurrence,
}

impl MonotoneKind {
    /// Monotone of the state (minimised over decompositions).
    pub fn of<T: Real>(self, state: &DensityMatrix<T>) -> Result<T> {
        match self {
            MonotoneKind::Concurrence => concurrence(state),
        }
    }

    /// Monotone of assistance (maximised over decompositions).
    pub fn assisted<T: Real>(self, state: &DensityMatrix<T>) -> Result<T> {
        match self {
            MonotoneKind::Concurrence => concurrence_of_assistance(state),
        }
    }
}

/// Wootters concurrence `max(0, λ1 − λ2 − λ3 − λ4)`.
pub fn concurrence<T: Real>(state: &DensityMatrix<T>) -> Result<T> {
    Ok(WoottersSpectrum::of(state)?.concurrence())
}

/// Concurrence of assistance `λ1 + λ2 + λ3 + λ4`.
pub fn concurrence_of_assistance<T: Real>(state: &DensityMatrix<T>) -> Result<T> {
    Ok(WoottersSpectrum::of(state)?.assistance())
}

/// Concurrence of a (not necessarily normalised) pure two-qubit vector,
/// divided by its squared norm.
pub fn pure_state_concurrence<T: Real>(psi: &CVector<T>) -> T {
    let n2 = psi.norm_squared();
    if n2 <= T::zero() {
        return T::zero();
    }
    flip_form(psi, psi).norm_sqr().sqrt() / n2
}

/// Bilinear form with `flip_form(ψ, ψ) = 2(ψ00 ψ11 − ψ01 ψ10)`.
fn flip_form<T: Real>(a: &CVector<T>, b: &CVector<T>) -> C<T> {
    a[0] * b[3] + a[3] * b[0] - a[1] * b[2] - a[2] * b[1]
}

/// Largest decomposition considered by [`coa_oracle`].
pub const ORACLE_MAX_TERMS: usize = 8;

/// Lower bound on the concurrence of assistance found by direct search over
/// pure-state decompositions `|ψ̃_j⟩ = Σ_k U_jk √μ_k |v_k⟩`, with `U` an
/// isometry and `ρ = Σ μ_k |v_k⟩⟨v_k|`.
///
/// Each restart starts from a random isometry and improves it with Givens
/// rotations between pairs of decomposition elements. Restart `r` uses
/// stream `r` of a ChaCha generator seeded by `seed`, so the result does not
/// depend on the number of worker threads.
pub fn coa_oracle(state: &DensityMatrix<f64>, n_restarts: usize, n_iters: usize, seed: u64) -> f64 {
    let (vals, vecs) = linalg::eigh(state.matrix());
    let cols: Vec<CVector<f64>> = (0..vals.len())
        .filter(|&k| vals[k] > 1e-15)
        .map(|k| vecs.column(k) * cr(vals[k].sqrt()))
        .collect();
    if cols.is_empty() {
        return 0.0;
    }
    let best: Vec<f64> = (0..n_restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            oracle_restart(&cols, n_iters, &mut rng)
        })
        .collect();
    best.into_iter().fold(0.0, f64::max)
}

fn oracle_restart(cols: &[CVector<f64>], n_iters: usize, rng: &mut ChaCha8Rng) -> f64 {
    let k = ORACLE_MAX_TERMS;
    let r = cols.len();
    // Random isometry via Gram–Schmidt on Gaussian columns.
    let mut u = CMatrix::<f64>::from_fn(k, r, |_, _| {
        C::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    for j in 0..r {
        for i in 0..j {
            let proj = u.column(i).dotc(&u.column(j));
            let ci = u.column(i).into_owned();
            let mut cj = u.column_mut(j);
            cj -= ci * proj;
        }
        let n = u.column(j).norm();
        u.column_mut(j).unscale_mut(n);
    }
    let mut psis: Vec<CVector<f64>> = (0..k)
        .map(|j| cols.iter().enumerate().fold(CVector::zeros(4), |acc, (m, c)| acc + c * u[(j, m)]))
        .collect();
    let grid = 12usize;
    let mut step = 1.0f64;
    for _ in 0..n_iters {
        let a = rng.random_range(0..k);
        let mut b = rng.random_range(0..k - 1);
        if b >= a {
            b += 1;
        }
        let qaa = flip_form(&psis[a], &psis[a]);
        let qbb = flip_form(&psis[b], &psis[b]);
        let qab = flip_form(&psis[a], &psis[b]);
        let eval = |th: f64, ph: f64| {
            let (c, s) = (th.cos(), th.sin());
            let e = C::from_polar(1.0, ph);
            let na = qaa * (c * c) - qab * e * (2.0 * c * s) + qbb * e * e * (s * s);
            let nb = qaa * (s * s) * e.conj() * e.conj() + qab * e.conj() * (2.0 * c * s) + qbb * (c * c);
            na.norm() + nb.norm()
        };
        let current = qaa.norm() + qbb.norm();
        let (mut bt, mut bp, mut bv) = (0.0, 0.0, current);
        // Coarse grid or local jitter, chosen at random.
        if rng.random::<f64>() < 0.5 {
            for i in 0..grid {
                for j in 0..grid {
                    let th = std::f64::consts::FRAC_PI_2 * i as f64 / grid as f64;
                    let ph = std::f64::consts::TAU * j as f64 / grid as f64;
                    let v = eval(th, ph);
                    if v > bv {
                        (bt, bp, bv) = (th, ph, v);
                    }
                }
            }
        } else {
            for _ in 0..8 {
                let th = step * (rng.random::<f64>() - 0.5);
                let ph = std::f64::consts::TAU * rng.random::<f64>();
                let v = eval(th, ph);
                if v > bv {
                    (bt, bp, bv) = (th, ph, v);
                }
            }
            step = if bv > current { (step * 1.2).min(1.5) } else { (step * 0.9).max(1e-4) };
        }
        if bv > current {
            let (c, s) = (bt.cos(), bt.sin());
            let e = C::from_polar(1.0, bp);
            let pa = &psis[a] * C::new(c, 0.0) - &psis[b] * (e * s);
            let pb = &psis[a] * (e.conj() * s) + &psis[b] * C::new(c, 0.0);
            psis[a] = pa;
            psis[b] = pb;
        }
    }
    psis.iter().map(|p| flip_form(p, p).norm()).sum()
}
