//! Square operators and density matrices.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{cr, CMatrix, CVector, Real, C};

/// Default tolerance for density-matrix validation.
pub const STATE_TOL: f64 = 1e-10;

/// Dense complex square matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct Operator<T: Real> {
    m: CMatrix<T>,
}

impl<T: Real> Operator<T> {
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidOperator(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidOperator("non-finite entry".into()));
        }
        Ok(Self { m })
    }

    pub fn identity(d: usize) -> Self {
        Self { m: linalg::identity(d) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.m
    }

    pub fn dagger(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C<T> {
        linalg::trace(&self.m)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        linalg::max_abs(&(&self.m - self.m.adjoint())) <= tol
    }

    /// Plain-text form: one row per line, entries `re+imj` separated by spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| {
                    let z = self.m[(i, j)];
                    let (re, im) = (z.re.as_f64(), z.im.as_f64());
                    if im.is_sign_negative() {
                        format!("{re:e}-{:e}j", -im)
                    } else {
                        format!("{re:e}+{im:e}j")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<C<T>>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(parse_entry::<T>).collect())
            .collect::<Result<_>>()?;
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Parse("matrix rows must all have as many entries as there are rows".into()));
        }
        let flat: Vec<C<T>> = rows.into_iter().flatten().collect();
        Self::new(CMatrix::from_row_slice(d, d, &flat))
    }
}

fn parse_entry<T: Real>(tok: &str) -> Result<C<T>> {
    let bad = || Error::Parse(format!("cannot parse complex entry `{tok}`"));
    let body = tok.strip_suffix('j').or_else(|| tok.strip_suffix('i'));
    let Some(body) = body else {
        let re: f64 = tok.parse().map_err(|_| bad())?;
        return Ok(C::new(T::lit(re), T::zero()));
    };
    // Split at the last sign that is not part of an exponent and not leading.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "+" | "" => "1",
        "-" => "-1",
        s => s,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.trim_start_matches('+').parse().map_err(|_| bad())?;
    Ok(C::new(T::lit(re), T::lit(im)))
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct DensityMatrix<T: Real> {
    op: Operator<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        Self::with_tolerance(m, T::tolerance(STATE_TOL))
    }

    pub fn with_tolerance(m: CMatrix<T>, tol: T) -> Result<Self> {
        let op = Operator::new(m)?;
        if !op.is_hermitian(tol) {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        let tr = op.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {} != 1", tr.re.as_f64())));
        }
        let min = linalg::eigvalsh(op.matrix())[0];
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {:e}", min.as_f64())));
        }
        Ok(Self { op })
    }

    /// Wraps a matrix without validation. Callers guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(m: CMatrix<T>) -> Self {
        Self { op: Operator { m } }
    }

    pub fn pure(psi: &CVector<T>) -> Result<Self> {
        let n = psi.norm();
        if n <= T::zero() {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = psi / cr(n);
        Ok(Self::from_matrix_unchecked(linalg::projector(&v)))
    }

    pub fn basis(d: usize, k: usize) -> Self {
        Self::from_matrix_unchecked(linalg::projector(&linalg::ket(d, k)))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::from_matrix_unchecked(linalg::identity::<T>(d) * cr(T::one() / T::lit(d as f64)))
    }

    /// Qubit state with Bloch vector `r`, `|r| ≤ 1`.
    pub fn from_bloch(r: [T; 3]) -> Result<Self> {
        let p = linalg::paulis::<T>();
        let half = T::lit(0.5);
        let mut m = &p[0] * cr(half);
        for k in 0..3 {
            m += &p[k + 1] * cr(half * r[k]);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        self.op.matrix()
    }

    pub fn operator(&self) -> &Operator<T> {
        &self.op
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        linalg::eigvalsh(self.matrix())
    }

    pub fn purity(&self) -> T {
        let m = self.matrix();
        linalg::trace(&(m * m)).re
    }

    /// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of a qubit state.
    pub fn bloch(&self) -> Result<[T; 3]> {
        if self.dim() != 2 {
            return Err(Error::BadDimension { expected: 2, found: self.dim() });
        }
        Ok(bloch_of(self.matrix()))
    }
}

/// Bloch components of any 2×2 matrix, without validation.
pub(crate) fn bloch_of<T: Real>(m: &CMatrix<T>) -> [T; 3] {
    let p = linalg::paulis::<T>();
    let mut r = [T::zero(); 3];
    for k in 0..3 {
        r[k] = linalg::trace(&(&p[k + 1] * m)).re;
    }
    r
}

impl<T: Real> Default for DensityMatrix<T> {
    fn default() -> Self {
        Self::basis(2, 0)
    }
}

impl<T: Real> AsRef<CMatrix<T>> for DensityMatrix<T> {
    fn as_ref(&self) -> &CMatrix<T> {
        self.matrix()
    }
}

impl<T: Real> From<DensityMatrix<T>> for Operator<T> {
    fn from(d: DensityMatrix<T>) -> Self {
        d.op
    }
}
