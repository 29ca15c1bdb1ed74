//! Small dense helpers shared by every module.
//!
//! Superoperators act on column-stacked operators: `vec(X)[i + j*d] = X[i, j]`,
//! which is nalgebra's native storage order. With that convention
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::DMatrix;
use num_traits::{One, Zero};

use crate::scalar::{c, cr, CMatrix, CVector, Real, C};

pub fn identity<T: Real>(d: usize) -> CMatrix<T> {
    CMatrix::<T>::identity(d, d)
}

pub fn zeros<T: Real>(r: usize, cols: usize) -> CMatrix<T> {
    CMatrix::<T>::zeros(r, cols)
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

/// `|0⟩⟨1|`, lowering `|1⟩ → |0⟩`. `|0⟩` is the ground state throughout.
pub fn sigma_minus<T: Real>() -> CMatrix<T> {
    let mut m = zeros::<T>(2, 2);
    m[(0, 1)] = C::one();
    m
}

pub fn sigma_plus<T: Real>() -> CMatrix<T> {
    sigma_minus::<T>().transpose()
}

pub fn sigma_x<T: Real>() -> CMatrix<T> {
    CMatrix::from_row_slice(2, 2, &[C::zero(), C::one(), C::one(), C::zero()])
}

pub fn sigma_y<T: Real>() -> CMatrix<T> {
    CMatrix::from_row_slice(2, 2, &[C::zero(), c(0.0, -1.0), c(0.0, 1.0), C::zero()])
}

pub fn sigma_z<T: Real>() -> CMatrix<T> {
    CMatrix::from_row_slice(2, 2, &[C::one(), C::zero(), C::zero(), -C::<T>::one()])
}

/// `[I, σx, σy, σz]`.
pub fn paulis<T: Real>() -> [CMatrix<T>; 4] {
    [identity(2), sigma_x(), sigma_y(), sigma_z()]
}

/// Orthonormal traceless Hermitian basis of `d × d` matrices (normalised
/// generalised Gell-Mann matrices). For `d = 2` this is `[σx, σy, σz] / √2`.
pub fn traceless_basis<T: Real>(d: usize) -> Vec<CMatrix<T>> {
    let inv_sqrt2 = T::one() / T::lit(2.0).sqrt();
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut s = zeros::<T>(d, d);
            s[(j, k)] = cr(inv_sqrt2);
            s[(k, j)] = cr(inv_sqrt2);
            out.push(s);
            let mut a = zeros::<T>(d, d);
            a[(j, k)] = C::new(T::zero(), -inv_sqrt2);
            a[(k, j)] = C::new(T::zero(), inv_sqrt2);
            out.push(a);
        }
    }
    for l in 1..d {
        let norm = T::one() / T::lit((l * (l + 1)) as f64).sqrt();
        let mut m = zeros::<T>(d, d);
        for j in 0..l {
            m[(j, j)] = cr(norm);
        }
        m[(l, l)] = cr(-T::lit(l as f64) * norm);
        out.push(m);
    }
    out
}

/// Hilbert–Schmidt inner product `tr(A† B)`.
pub fn hs_inner<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> C<T> {
    a.iter().zip(b.iter()).fold(C::zero(), |acc, (x, y)| acc + x.conj() * y)
}

pub fn vec_op<T: Real>(x: &CMatrix<T>) -> CVector<T> {
    CVector::from_column_slice(x.as_slice())
}

pub fn unvec<T: Real>(v: &[C<T>], d: usize) -> CMatrix<T> {
    CMatrix::from_column_slice(d, d, v)
}

/// Superoperator of `X ↦ A X B`.
pub fn sandwich<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    kron(&b.transpose(), a)
}

/// Superoperator of `X ↦ A X`.
pub fn spre<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    kron(&identity(a.nrows()), a)
}

/// Superoperator of `X ↦ X B`.
pub fn spost<T: Real>(b: &CMatrix<T>) -> CMatrix<T> {
    kron(&b.transpose(), &identity(b.nrows()))
}

/// Superoperator of `ρ ↦ L ρ L† − ½{L†L, ρ}`.
pub fn dissipator<T: Real>(l: &CMatrix<T>) -> CMatrix<T> {
    let ldl = l.adjoint() * l;
    let half = cr(T::lit(0.5));
    sandwich(l, &l.adjoint()) - (spre(&ldl) + spost(&ldl)) * half
}

/// Superoperator of `ρ ↦ −i[H, ρ]`.
pub fn commutator_generator<T: Real>(h: &CMatrix<T>) -> CMatrix<T> {
    (spre(h) - spost(h)) * c::<T>(0.0, -1.0)
}

/// Trace over the second factor of a `d1·d2` square matrix.
pub fn partial_trace_second<T: Real>(m: &CMatrix<T>, d1: usize, d2: usize) -> CMatrix<T> {
    let mut out = zeros::<T>(d1, d1);
    for i in 0..d1 {
        for j in 0..d1 {
            let mut s = C::zero();
            for k in 0..d2 {
                s += m[(i * d2 + k, j * d2 + k)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Trace over the first factor of a `d1·d2` square matrix.
pub fn partial_trace_first<T: Real>(m: &CMatrix<T>, d1: usize, d2: usize) -> CMatrix<T> {
    let mut out = zeros::<T>(d2, d2);
    for i in 0..d2 {
        for j in 0..d2 {
            let mut s = C::zero();
            for k in 0..d1 {
                s += m[(k * d2 + i, k * d2 + j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

pub fn frobenius<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()))
}

pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()) * cr(T::lit(0.5))
}

pub fn trace<T: Real>(m: &CMatrix<T>) -> C<T> {
    m.diagonal().iter().fold(C::zero(), |a, b| a + b)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// ascending order. The input is symmetrised first.
pub fn eigh<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let h = hermitian_part(m);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros::<T>(n, n);
    for (new, &old) in idx.iter().enumerate() {
        vectors.set_column(new, &eig.eigenvectors.column(old));
    }
    (values, vectors)
}

pub fn eigvalsh<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let mut v: Vec<T> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Singular values, descending.
pub fn singular_values<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let mut s: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// `exp(−i θ G)` for Hermitian `G`, through its eigen-decomposition.
pub fn unitary_exp<T: Real>(g: &CMatrix<T>, theta: T) -> CMatrix<T> {
    let (vals, vecs) = eigh(g);
    let n = vals.len();
    let mut phases = zeros::<T>(n, n);
    for (i, v) in vals.iter().enumerate() {
        let arg = -theta * *v;
        phases[(i, i)] = C::new(arg.cos(), arg.sin());
    }
    &vecs * phases * vecs.adjoint()
}

/// Matrix of real entries lifted to complex.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(cr)
}

/// Basis ket `|k⟩` of dimension `d`.
pub fn ket<T: Real>(d: usize, k: usize) -> CVector<T> {
    let mut v = CVector::<T>::zeros(d);
    v[k] = C::one();
    v
}

pub fn projector<T: Real>(v: &CVector<T>) -> CMatrix<T> {
    v * v.adjoint()
}
