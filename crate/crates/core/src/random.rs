//! Random states, unitaries and channels for property tests and oracles.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::QuantumChannel;
use crate::linalg;
use crate::operator::{DensityMatrix, Operator};
use crate::scalar::{CMatrix, CVector};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<f64> {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix, with
/// the phases of `R`'s diagonal absorbed.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix<f64> {
    isometry(d, d, rng)
}

/// Haar-random isometry with orthonormal columns (`rows ≥ cols`).
pub fn isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<f64> {
    let qr = ginibre(rows, cols, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..cols {
        let z = r[(j, j)];
        let ph = if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= ph;
    }
    q
}

pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector<f64> {
    let v: CVector<f64> = ginibre(d, 1, rng).column(0).into_owned();
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Induced-measure random state of rank at most `rank`: `G G† / tr(G G†)`.
pub fn random_density_matrix<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> DensityMatrix<f64> {
    let g = ginibre(d, rank.max(1), rng);
    let w = &g * g.adjoint();
    let tr = linalg::trace(&w).re;
    DensityMatrix::from_matrix_unchecked(linalg::hermitian_part(&(w / Complex64::new(tr, 0.0))))
}

/// Random CPT channel with `n_kraus` Kraus operators cut from a random
/// isometry `C^d → C^{d·n_kraus}`.
pub fn random_channel<R: Rng + ?Sized>(d: usize, n_kraus: usize, rng: &mut R) -> QuantumChannel<f64> {
    let v = isometry(d * n_kraus, d, rng);
    let ks = (0..n_kraus)
        .map(|k| Operator::new(v.rows(k * d, d).into_owned()).expect("finite isometry block"))
        .collect();
    QuantumChannel::from_kraus_unchecked(ks).expect("equal Kraus dimensions")
}

/// Random instrument `{M_i}` with `n` outcomes, `Σ M_i† M_i = I`.
pub fn random_instrument<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Vec<CMatrix<f64>> {
    let v = isometry(d * n, d, rng);
    (0..n).map(|k| v.rows(k * d, d).into_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_and_channel_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = haar_unitary(4, &mut rng);
        let e = &u.adjoint() * &u - linalg::identity::<f64>(4);
        assert!(linalg::frobenius(&e) < 1e-12);
        let ch = random_channel(2, 3, &mut rng);
        assert!(crate::channel::validate_cpt(&ch, 1e-10).is_cpt());
        let rho = random_density_matrix(4, 4, &mut rng);
        assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
    }
}
