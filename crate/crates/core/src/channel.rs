//! Quantum channels in interchangeable representations.
//!
//! The Choi state is `(E ⊗ id)|φ+⟩⟨φ+|` with `|φ+⟩ = Σ_j |j⟩|j⟩ / √d`,
//! system factor first, normalised to unit trace. Its row index for
//! `|s⟩_S |a⟩_A` is `s·d_in + a`.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{bloch_of, DensityMatrix, Operator};
use crate::scalar::{cr, CMatrix, Real};

/// Tolerance on Kraus completeness and Choi positivity for validated channels.
pub const CHANNEL_TOL: f64 = 1e-9;

/// Storage of a channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub enum Representation<T: Real> {
    Kraus(Vec<Operator<T>>),
    Choi(DensityMatrix<T>),
    SuperOperator(CMatrix<T>),
    AffineBloch { a: Matrix3<T>, b: Vector3<T> },
}

/// A linear map on operators, usually CPT.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct QuantumChannel<T: Real> {
    dim_in: usize,
    dim_out: usize,
    repr: Representation<T>,
}

/// Outcome of [`validate_cpt`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptReport {
    pub trace_preserving: bool,
    pub tp_residual: f64,
    pub min_choi_eig: f64,
    pub cp: bool,
}

impl CptReport {
    pub fn is_cpt(&self) -> bool {
        self.trace_preserving && self.cp
    }
}

/// Affine Bloch form `r ↦ A r + b` of a qubit map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct AffineForm<T: Real> {
    pub a: Matrix3<T>,
    pub b: Vector3<T>,
}

impl<T: Real> AffineForm<T> {
    pub fn apply(&self, r: &Vector3<T>) -> Vector3<T> {
        self.a * r + self.b
    }

    /// Pauli transfer matrix `R_ij = ½ tr(σ_i E(σ_j))`.
    pub fn ptm(&self) -> Matrix4<T> {
        let mut r = Matrix4::zeros();
        r[(0, 0)] = T::one();
        for i in 0..3 {
            r[(i + 1, 0)] = self.b[i];
            for j in 0..3 {
                r[(i + 1, j + 1)] = self.a[(i, j)];
            }
        }
        r
    }

    pub fn from_ptm(r: &Matrix4<T>) -> Self {
        let a = Matrix3::from_fn(|i, j| r[(i + 1, j + 1)]);
        let b = Vector3::from_fn(|i, _| r[(i + 1, 0)]);
        Self { a, b }
    }

    pub fn superoperator(&self) -> CMatrix<T> {
        ptm_to_superop(&self.ptm())
    }
}

pub(crate) fn ptm_to_superop<T: Real>(r: &Matrix4<T>) -> CMatrix<T> {
    let p = linalg::paulis::<T>();
    let vecs: Vec<CMatrix<T>> = p
        .iter()
        .map(|s| CMatrix::from_column_slice(4, 1, s.as_slice()))
        .collect();
    let mut s = linalg::zeros::<T>(4, 4);
    let half = T::lit(0.5);
    for i in 0..4 {
        for j in 0..4 {
            if r[(i, j)] != T::zero() {
                s += &vecs[i] * vecs[j].adjoint() * cr(half * r[(i, j)]);
            }
        }
    }
    s
}

pub(crate) fn superop_to_ptm<T: Real>(s: &CMatrix<T>) -> Matrix4<T> {
    let p = linalg::paulis::<T>();
    let vecs: Vec<CMatrix<T>> = p
        .iter()
        .map(|m| CMatrix::from_column_slice(4, 1, m.as_slice()))
        .collect();
    let half = T::lit(0.5);
    Matrix4::from_fn(|i, j| (vecs[i].adjoint() * s * &vecs[j])[(0, 0)].re * half)
}

/// Superoperator of `Σ K ρ K†`.
pub(crate) fn kraus_superop<T: Real>(ks: &[CMatrix<T>]) -> CMatrix<T> {
    let (r, c) = ks.first().map(|k| k.shape()).unwrap_or((0, 0));
    let mut s = linalg::zeros::<T>(r * r, c * c);
    for k in ks {
        s += linalg::sandwich(k, &k.adjoint());
    }
    s
}

/// Unit-trace Choi matrix from a superoperator (`d_out² × d_in²`).
pub(crate) fn superop_to_choi<T: Real>(s: &CMatrix<T>, din: usize, dout: usize) -> CMatrix<T> {
    let n = T::lit(din as f64);
    CMatrix::from_fn(dout * din, dout * din, |r, c| {
        let (s1, a1) = (r / din, r % din);
        let (s2, a2) = (c / din, c % din);
        s[(s1 + s2 * dout, a1 + a2 * din)] / cr(n)
    })
}

pub(crate) fn choi_to_superop<T: Real>(chi: &CMatrix<T>, din: usize, dout: usize) -> CMatrix<T> {
    let n = T::lit(din as f64);
    let mut s = linalg::zeros::<T>(dout * dout, din * din);
    for s1 in 0..dout {
        for s2 in 0..dout {
            for a1 in 0..din {
                for a2 in 0..din {
                    s[(s1 + s2 * dout, a1 + a2 * din)] = chi[(s1 * din + a1, s2 * din + a2)] * cr(n);
                }
            }
        }
    }
    s
}

impl<T: Real> QuantumChannel<T> {
    /// Channel from a complete Kraus list.
    pub fn from_kraus(ks: Vec<Operator<T>>) -> Result<Self> {
        let ch = Self::from_kraus_unchecked(ks)?;
        ch.require_cpt(T::tolerance(CHANNEL_TOL))?;
        Ok(ch)
    }

    /// Kraus map without the completeness check, for diagnostics.
    pub fn from_kraus_unchecked(ks: Vec<Operator<T>>) -> Result<Self> {
        let d = ks
            .first()
            .map(|k| k.dim())
            .ok_or_else(|| Error::InvalidChannel("empty Kraus list".into()))?;
        if let Some(k) = ks.iter().find(|k| k.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: k.dim() });
        }
        Ok(Self { dim_in: d, dim_out: d, repr: Representation::Kraus(ks) })
    }

    pub fn from_kraus_matrices(ks: Vec<CMatrix<T>>) -> Result<Self> {
        Self::from_kraus(ks.into_iter().map(Operator::new).collect::<Result<_>>()?)
    }

    /// Channel from a unit-trace Choi state on `d·d`.
    pub fn from_choi(choi: DensityMatrix<T>) -> Result<Self> {
        let d = sqrt_dim(choi.dim())?;
        let ch = Self { dim_in: d, dim_out: d, repr: Representation::Choi(choi) };
        ch.require_cpt(T::tolerance(CHANNEL_TOL))?;
        Ok(ch)
    }

    /// Channel from a `d² × d²` superoperator, checked to be CPT.
    pub fn from_superoperator(s: CMatrix<T>) -> Result<Self> {
        let ch = Self::from_superoperator_unchecked(s)?;
        ch.require_cpt(T::tolerance(CHANNEL_TOL))?;
        Ok(ch)
    }

    pub fn from_superoperator_unchecked(s: CMatrix<T>) -> Result<Self> {
        let dout = sqrt_dim(s.nrows())?;
        let din = sqrt_dim(s.ncols())?;
        Ok(Self { dim_in: din, dim_out: dout, repr: Representation::SuperOperator(s) })
    }

    /// Qubit channel from its affine Bloch form, checked to be CPT.
    pub fn from_affine(a: Matrix3<T>, b: Vector3<T>) -> Result<Self> {
        let ch = Self { dim_in: 2, dim_out: 2, repr: Representation::AffineBloch { a, b } };
        ch.require_cpt(T::tolerance(CHANNEL_TOL))?;
        Ok(ch)
    }

    pub fn identity(d: usize) -> Self {
        Self { dim_in: d, dim_out: d, repr: Representation::Kraus(vec![Operator::identity(d)]) }
    }

    pub fn unitary(u: CMatrix<T>) -> Result<Self> {
        Self::from_kraus(vec![Operator::new(u)?])
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn representation(&self) -> &Representation<T> {
        &self.repr
    }

    pub fn superoperator(&self) -> CMatrix<T> {
        match &self.repr {
            Representation::Kraus(ks) => {
                let ms: Vec<CMatrix<T>> = ks.iter().map(|k| k.matrix().clone()).collect();
                kraus_superop(&ms)
            }
            Representation::Choi(c) => choi_to_superop(c.matrix(), self.dim_in, self.dim_out),
            Representation::SuperOperator(s) => s.clone(),
            Representation::AffineBloch { a, b } => AffineForm { a: *a, b: *b }.superoperator(),
        }
    }

    /// Unit-trace Choi matrix, without positivity validation.
    pub fn choi_matrix(&self) -> CMatrix<T> {
        match &self.repr {
            Representation::Choi(c) => c.matrix().clone(),
            _ => superop_to_choi(&self.superoperator(), self.dim_in, self.dim_out),
        }
    }

    pub fn apply(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        match &self.repr {
            Representation::Kraus(ks) => ks.iter().fold(linalg::zeros(self.dim_out, self.dim_out), |acc, k| {
                acc + k.matrix() * rho * k.matrix().adjoint()
            }),
            _ => {
                let v = self.superoperator() * linalg::vec_op(rho);
                linalg::unvec(v.as_slice(), self.dim_out)
            }
        }
    }

    pub fn apply_state(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        if rho.dim() != self.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, found: rho.dim() });
        }
        DensityMatrix::with_tolerance(self.apply(rho.matrix()), T::tolerance(CHANNEL_TOL))
    }

    pub fn to_linear_map(&self) -> LinearMap<T> {
        LinearMap { dim: self.dim_in, superop: self.superoperator(), condition: None }
    }

    pub fn with_representation(&self, kind: ReprKind) -> Result<Self> {
        let repr = match kind {
            ReprKind::Kraus => choi_to_kraus(&kraus_to_choi(self)?, T::tolerance(1e-12))?.repr,
            ReprKind::Choi => Representation::Choi(kraus_to_choi(self)?),
            ReprKind::SuperOperator => Representation::SuperOperator(self.superoperator()),
            ReprKind::AffineBloch => {
                let f = qubit_affine_form(self)?;
                Representation::AffineBloch { a: f.a, b: f.b }
            }
        };
        Ok(Self { dim_in: self.dim_in, dim_out: self.dim_out, repr })
    }

    fn require_cpt(&self, tol: T) -> Result<()> {
        let rep = validate_cpt(self, tol);
        if rep.is_cpt() {
            Ok(())
        } else {
            Err(Error::NotCpt { tp_residual: rep.tp_residual, min_choi_eig: rep.min_choi_eig })
        }
    }
}

/// Tag for [`QuantumChannel::with_representation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReprKind {
    Kraus,
    Choi,
    SuperOperator,
    AffineBloch,
}

fn sqrt_dim(n: usize) -> Result<usize> {
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || d == 0 {
        return Err(Error::InvalidChannel(format!("{n} is not a square dimension")));
    }
    Ok(d)
}

/// Unit-trace Choi state `(E ⊗ id)|φ+⟩⟨φ+|`.
pub fn kraus_to_choi<T: Real>(channel: &QuantumChannel<T>) -> Result<DensityMatrix<T>> {
    if channel.dim_in != channel.dim_out {
        return Err(Error::NonSquareChannel { dim_in: channel.dim_in, dim_out: channel.dim_out });
    }
    if let Representation::Choi(c) = &channel.repr {
        return Ok(c.clone());
    }
    let chi = linalg::hermitian_part(&channel.choi_matrix());
    Ok(DensityMatrix::from_matrix_unchecked(chi))
}

/// Kraus list from a Choi state, one operator per eigenvalue above `rank_tol`.
pub fn choi_to_kraus<T: Real>(choi: &DensityMatrix<T>, rank_tol: T) -> Result<QuantumChannel<T>> {
    let d = sqrt_dim(choi.dim()).map_err(|_| Error::NotAChoiState(format!("dimension {} is not d²", choi.dim())))?;
    let chi = choi.matrix();
    let anc = linalg::partial_trace_first(chi, d, d);
    let target = linalg::identity::<T>(d) * cr(T::one() / T::lit(d as f64));
    let dev = linalg::max_abs(&(anc - target));
    if dev > rank_tol.max(T::tolerance(CHANNEL_TOL)) {
        return Err(Error::NotAChoiState(format!(
            "ancilla marginal deviates from I/d by {:e}",
            dev.as_f64()
        )));
    }
    let (vals, vecs) = linalg::eigh(chi);
    if vals[0] < -rank_tol.max(T::tolerance(CHANNEL_TOL)) {
        return Err(Error::NotAChoiState(format!("negative eigenvalue {:e}", vals[0].as_f64())));
    }
    let dd = T::lit(d as f64);
    let mut ks = Vec::new();
    for (k, &mu) in vals.iter().enumerate().rev() {
        if mu <= rank_tol {
            continue;
        }
        let w = (dd * mu).sqrt();
        let m = CMatrix::from_fn(d, d, |s, a| vecs[(s * d + a, k)] * cr(w));
        ks.push(Operator::new(m)?);
    }
    if ks.is_empty() {
        return Err(Error::NotAChoiState("rank zero".into()));
    }
    Ok(QuantumChannel { dim_in: d, dim_out: d, repr: Representation::Kraus(ks) })
}

/// `second ∘ first`, as a superoperator.
pub fn compose_maps<T: Real>(second: &QuantumChannel<T>, first: &QuantumChannel<T>) -> Result<QuantumChannel<T>> {
    if second.dim_in != first.dim_out {
        return Err(Error::DimensionMismatch { expected: second.dim_in, found: first.dim_out });
    }
    let s = second.superoperator() * first.superoperator();
    Ok(QuantumChannel {
        dim_in: first.dim_in,
        dim_out: second.dim_out,
        repr: Representation::SuperOperator(s),
    })
}

/// Linear map on `d × d` operators that need not be CPT.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct LinearMap<T: Real> {
    dim: usize,
    superop: CMatrix<T>,
    /// Ratio largest/smallest singular value of the inverted map, when this
    /// map was produced by inversion.
    condition: Option<f64>,
}

impl<T: Real> LinearMap<T> {
    pub fn from_superoperator(superop: CMatrix<T>) -> Result<Self> {
        let d = sqrt_dim(superop.nrows())?;
        if superop.ncols() != superop.nrows() {
            return Err(Error::NonSquareChannel { dim_in: sqrt_dim(superop.ncols())?, dim_out: d });
        }
        Ok(Self { dim: d, superop, condition: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superoperator(&self) -> &CMatrix<T> {
        &self.superop
    }

    pub fn condition_number(&self) -> Option<f64> {
        self.condition
    }

    pub fn choi_matrix(&self) -> CMatrix<T> {
        superop_to_choi(&self.superop, self.dim, self.dim)
    }

    pub fn min_choi_eig(&self) -> T {
        linalg::eigvalsh(&self.choi_matrix())[0]
    }

    pub fn apply(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        let v = &self.superop * linalg::vec_op(rho);
        linalg::unvec(v.as_slice(), self.dim)
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &LinearMap<T>) -> Result<LinearMap<T>> {
        if self.dim != first.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: first.dim });
        }
        Ok(LinearMap { dim: self.dim, superop: &self.superop * &first.superop, condition: None })
    }

    pub fn affine_form(&self) -> Result<AffineForm<T>> {
        if self.dim != 2 {
            return Err(Error::NotAQubitChannel { dim: self.dim });
        }
        Ok(AffineForm::from_ptm(&superop_to_ptm(&self.superop)))
    }

    /// Converts to a channel when the map is CPT within `tol`.
    pub fn to_channel(&self, tol: T) -> Result<QuantumChannel<T>> {
        let ch = QuantumChannel::from_superoperator_unchecked(self.superop.clone())?;
        ch.require_cpt(tol)?;
        Ok(ch)
    }

    pub fn cpt_report(&self, tol: T) -> CptReport {
        let ch = QuantumChannel { dim_in: self.dim, dim_out: self.dim, repr: Representation::SuperOperator(self.superop.clone()) };
        validate_cpt(&ch, tol)
    }
}

/// Inverse of the superoperator of `channel`.
pub fn invert_map<T: Real>(channel: &QuantumChannel<T>, cond_tol: T) -> Result<LinearMap<T>> {
    if channel.dim_in != channel.dim_out {
        return Err(Error::NonSquareChannel { dim_in: channel.dim_in, dim_out: channel.dim_out });
    }
    invert_superop(&channel.superoperator(), cond_tol)
}

pub(crate) fn invert_superop<T: Real>(s: &CMatrix<T>, cond_tol: T) -> Result<LinearMap<T>> {
    let d = sqrt_dim(s.nrows())?;
    let sv = linalg::singular_values(s);
    let (smax, smin) = (sv[0], *sv.last().unwrap_or(&T::zero()));
    if smax <= T::zero() || smin < cond_tol * smax {
        let ratio = if smax > T::zero() { (smin / smax).as_f64() } else { 0.0 };
        return Err(Error::SingularMap { ratio });
    }
    let inv = s
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMap { ratio: (smin / smax).as_f64() })?;
    Ok(LinearMap { dim: d, superop: inv, condition: Some((smax / smin).as_f64()) })
}

/// `½ Σ |eig(a − b)|`.
pub fn trace_distance<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(trace_distance_matrices(a.matrix(), b.matrix()))
}

pub(crate) fn trace_distance_matrices<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    let ev = linalg::eigvalsh(&(a - b));
    ev.iter().fold(T::zero(), |acc, x| acc + x.abs()) * T::lit(0.5)
}

/// Trace-preservation residual and minimal Choi eigenvalue of `channel`.
pub fn validate_cpt<T: Real>(channel: &QuantumChannel<T>, tol: T) -> CptReport {
    let d = channel.dim_in;
    let tp_residual = match &channel.repr {
        Representation::Kraus(ks) => {
            let sum = ks
                .iter()
                .fold(linalg::zeros::<T>(d, d), |acc, k| acc + k.matrix().adjoint() * k.matrix());
            linalg::frobenius(&(sum - linalg::identity::<T>(d)))
        }
        _ => {
            // Σ K†K = d·(Tr_S χ)ᵀ.
            let chi = channel.choi_matrix();
            let anc = linalg::partial_trace_first(&chi, channel.dim_out, d) * cr(T::lit(d as f64));
            linalg::frobenius(&(anc - linalg::identity::<T>(d)))
        }
    };
    let min_choi_eig = linalg::eigvalsh(&channel.choi_matrix())[0];
    CptReport {
        trace_preserving: tp_residual <= tol,
        tp_residual: tp_residual.as_f64(),
        min_choi_eig: min_choi_eig.as_f64(),
        cp: min_choi_eig >= -tol,
    }
}

/// Affine Bloch form of a qubit channel.
pub fn qubit_affine_form<T: Real>(channel: &QuantumChannel<T>) -> Result<AffineForm<T>> {
    if channel.dim_in != 2 || channel.dim_out != 2 {
        return Err(Error::NotAQubitChannel { dim: channel.dim_in.max(channel.dim_out) });
    }
    if let Representation::AffineBloch { a, b } = &channel.repr {
        return Ok(AffineForm { a: *a, b: *b });
    }
    Ok(AffineForm::from_ptm(&superop_to_ptm(&channel.superoperator())))
}

/// Bloch vector of `E[ρ(r)]`, evaluated directly on the state.
pub fn bloch_image<T: Real>(channel: &QuantumChannel<T>, r: [T; 3]) -> Result<[T; 3]> {
    let rho = DensityMatrix::from_bloch(r)?;
    Ok(bloch_of(&channel.apply(rho.matrix())))
}

/// Ordered family of channels from a common initial time.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct Dynamics<T: Real> {
    maps: Vec<QuantumChannel<T>>,
    times: Option<Vec<f64>>,
}

impl<T: Real> Dynamics<T> {
    pub fn new(maps: Vec<QuantumChannel<T>>, times: Option<Vec<f64>>) -> Result<Self> {
        Self::with_tolerance(maps, times, T::tolerance(CHANNEL_TOL))
    }

    pub fn with_tolerance(maps: Vec<QuantumChannel<T>>, times: Option<Vec<f64>>, tol: T) -> Result<Self> {
        if let Some(ts) = &times {
            if ts.len() != maps.len() {
                return Err(Error::InvalidGrid(format!("{} times for {} maps", ts.len(), maps.len())));
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidGrid("times must be strictly increasing".into()));
            }
        }
        for m in &maps {
            m.require_cpt(tol)?;
        }
        Ok(Self { maps, times })
    }

    pub fn maps(&self) -> &[QuantumChannel<T>] {
        &self.maps
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.times.as_deref()
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}
