//! Time-local master equations, propagator families and canonical
//! generator extraction.
//!
//! Rates multiply the standard dissipator
//! `D[L]ρ = L ρ L† − ½{L†L, ρ}`, so a constant rate `κ` on `σ−` empties the
//! excited state as `e^{−κt}`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, CptReport, Dynamics, QuantumChannel};
use crate::entanglement::WoottersSpectrum;
use crate::error::{Error, Result};
use crate::linalg;
use crate::ode::{self, OdeOptions};
use crate::operator::{DensityMatrix, Operator};
use crate::scalar::CMatrix;

type M = CMatrix<f64>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Rate function of time. Returns an error at a rate pole.
pub type RateFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// `dρ/dt = −i[H, ρ] + Σ_k γ_k(t) D[L_k] ρ`.
#[derive(Clone)]
pub struct TimeLocalGksl {
    dim: usize,
    rates: Vec<RateFn>,
    ops: Vec<Operator<f64>>,
    hamiltonian: Option<Operator<f64>>,
}

impl fmt::Debug for TimeLocalGksl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeLocalGksl")
            .field("dim", &self.dim)
            .field("channels", &self.ops.len())
            .field("hamiltonian", &self.hamiltonian.is_some())
            .finish()
    }
}

impl TimeLocalGksl {
    pub fn new(rates: Vec<RateFn>, ops: Vec<Operator<f64>>, hamiltonian: Option<Operator<f64>>) -> Result<Self> {
        if rates.len() != ops.len() {
            return Err(Error::InvalidOperator(format!("{} rates for {} Lindblad operators", rates.len(), ops.len())));
        }
        let dim = ops
            .first()
            .map(|o| o.dim())
            .or(hamiltonian.as_ref().map(|h| h.dim()))
            .ok_or_else(|| Error::InvalidOperator("empty generator".into()))?;
        for o in ops.iter().chain(hamiltonian.iter()) {
            if o.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: o.dim() });
            }
        }
        if let Some(h) = &hamiltonian {
            if !h.is_hermitian(1e-12) {
                return Err(Error::InvalidOperator("Hamiltonian is not Hermitian".into()));
            }
        }
        Ok(Self { dim, rates, ops, hamiltonian })
    }

    /// Convenience constructor for constant rates.
    pub fn constant(rates: &[f64], ops: Vec<Operator<f64>>) -> Result<Self> {
        let rates = rates
            .iter()
            .map(|&g| Arc::new(move |_: f64| Ok(g)) as RateFn)
            .collect();
        Self::new(rates, ops, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[Operator<f64>] {
        &self.ops
    }

    pub fn hamiltonian(&self) -> Option<&Operator<f64>> {
        self.hamiltonian.as_ref()
    }

    /// Traces of the Lindblad operators (zero for the shipped models).
    pub fn op_traces(&self) -> Vec<Complex64> {
        self.ops.iter().map(|o| o.trace()).collect()
    }

    pub fn rate(&self, k: usize, t: f64) -> Result<f64> {
        let g = (self.rates[k])(t)?;
        if !g.is_finite() {
            return Err(Error::PoleEncountered { t });
        }
        Ok(g)
    }

    pub fn rates_at(&self, t: f64) -> Result<Vec<f64>> {
        (0..self.rates.len()).map(|k| self.rate(k, t)).collect()
    }

    /// Superoperator of the generator at time `t`.
    pub fn generator(&self, t: f64) -> Result<M> {
        let mut l = linalg::zeros::<f64>(self.dim * self.dim, self.dim * self.dim);
        if let Some(h) = &self.hamiltonian {
            l += linalg::commutator_generator(h.matrix());
        }
        for (k, op) in self.ops.iter().enumerate() {
            let g = self.rate(k, t)?;
            if g != 0.0 {
                l += linalg::dissipator(op.matrix()) * re(g);
            }
        }
        Ok(l)
    }
}

/// Channels `E_t` on a time grid, all from `t = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagatorFamily {
    dim: usize,
    times: Vec<f64>,
    superops: Vec<M>,
    derivatives: Option<Vec<M>>,
}

impl PropagatorFamily {
    pub fn new(times: Vec<f64>, superops: Vec<M>, derivatives: Option<Vec<M>>) -> Result<Self> {
        if times.len() != superops.len() || times.is_empty() {
            return Err(Error::InvalidGrid(format!("{} times for {} maps", times.len(), superops.len())));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        if let Some(d) = &derivatives {
            if d.len() != times.len() {
                return Err(Error::InvalidGrid("derivative count differs from grid".into()));
            }
        }
        let n = superops[0].nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if dim * dim != n || superops.iter().any(|s| s.shape() != (n, n)) {
            return Err(Error::InvalidChannel("superoperators must share a d² × d² shape".into()));
        }
        Ok(Self { dim, times, superops, derivatives })
    }

    /// Family `id, E_1, …, E_n` from a discrete dynamics. Missing times
    /// default to `1, …, n`; the identity sits at `t = 0` unless the dynamics
    /// already starts there.
    pub fn from_dynamics(dynamics: &Dynamics<f64>) -> Result<Self> {
        let n = dynamics.len();
        let times: Vec<f64> = match dynamics.times() {
            Some(ts) => ts.to_vec(),
            None => (1..=n).map(|k| k as f64).collect(),
        };
        let mut superops: Vec<M> = dynamics.maps().iter().map(|m| m.superoperator()).collect();
        let mut ts = times;
        if ts.first().is_none_or(|&t| t > 0.0) {
            let d = dynamics.maps().first().map_or(2, |m| m.dim_in());
            ts.insert(0, 0.0);
            superops.insert(0, linalg::identity::<f64>(d * d));
        }
        Self::new(ts, superops, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn superoperator(&self, i: usize) -> &M {
        &self.superops[i]
    }

    pub fn derivative(&self, i: usize) -> Option<&M> {
        self.derivatives.as_ref().map(|d| &d[i])
    }

    pub fn has_derivatives(&self) -> bool {
        self.derivatives.is_some()
    }

    /// Channel at grid index `i`, without CPT validation.
    pub fn channel(&self, i: usize) -> QuantumChannel<f64> {
        QuantumChannel::from_superoperator_unchecked(self.superops[i].clone()).expect("square superoperator")
    }

    /// Unit-trace Choi matrix at grid index `i`, Hermitised.
    pub fn choi(&self, i: usize) -> DensityMatrix<f64> {
        let chi = channel::superop_to_choi(&self.superops[i], self.dim, self.dim);
        DensityMatrix::from_matrix_unchecked(linalg::hermitian_part(&chi))
    }

    pub fn validate(&self, tol: f64) -> Vec<CptReport> {
        (0..self.len()).map(|i| channel::validate_cpt(&self.channel(i), tol)).collect()
    }

    /// Index of the grid point equal to `t` (within a relative `1e-9`).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Sub-family on the given indices.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.times[i]).collect(),
            idx.iter().map(|&i| self.superops[i].clone()).collect(),
            self.derivatives.as_ref().map(|d| idx.iter().map(|&i| d[i].clone()).collect()),
        )
    }
}

/// Concurrence data of the Choi state at one grid time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiPoint {
    pub t: f64,
    pub concurrence: f64,
    pub assistance: f64,
    pub min_choi_eig: f64,
}

/// `C[χ(t)]`, `C♯[χ(t)]` and the minimal Choi eigenvalue along a qubit family.
pub fn choi_series(family: &PropagatorFamily) -> Result<Vec<ChoiPoint>> {
    if family.dim() != 2 {
        return Err(Error::NotAQubitChannel { dim: family.dim() });
    }
    Ok((0..family.len())
        .into_par_iter()
        .map(|i| {
            let chi = family.choi(i);
            let spec = WoottersSpectrum::of_matrix(chi.matrix());
            ChoiPoint {
                t: family.times()[i],
                concurrence: spec.concurrence(),
                assistance: spec.assistance(),
                min_choi_eig: linalg::eigvalsh(chi.matrix())[0],
            }
        })
        .collect())
}

fn project_trace_preserving(s: &mut M, d: usize, limit: f64) {
    let vid = linalg::vec_op(&linalg::identity::<f64>(d));
    let row = vid.adjoint() * &*s;
    let dev = &vid.adjoint() - row;
    let resid = dev.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if resid > 0.0 && resid < limit {
        *s += &vid * dev * re(1.0 / d as f64);
    }
}

/// Integrates `dΦ/dt = L(t) Φ`, `Φ(0) = id`, and samples `Φ` on `grid`.
///
/// Outputs are re-projected onto trace-preserving maps when the residual is
/// below `10·atol`.
pub fn solve_propagator(gksl: &TimeLocalGksl, grid: &[f64], rtol: f64, atol: f64) -> Result<PropagatorFamily> {
    if grid.first() != Some(&0.0) {
        return Err(Error::InvalidGrid("grid must start at t = 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    let d = gksl.dim();
    let opts = OdeOptions { rtol, atol, ..OdeOptions::default() };
    let mut maps = ode::integrate(
        |t, phi| Ok(gksl.generator(t)? * phi),
        0.0,
        linalg::identity::<f64>(d * d),
        grid,
        opts,
    )?;
    for m in &mut maps {
        project_trace_preserving(m, d, 10.0 * atol);
    }
    PropagatorFamily::new(grid.to_vec(), maps, None)
}

/// A generator `G = Ė E⁻¹` in canonical GKSL form over the orthonormal
/// traceless basis `F_1 … F_{d²−1}` of [`linalg::traceless_basis`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CanonicalGenerator {
    pub time: f64,
    /// Eigenvalues of the rate matrix, ascending.
    pub rates: Vec<f64>,
    /// Orthonormal canonical jump operators, one per rate.
    pub ops: Vec<Operator<f64>>,
    pub hamiltonian: Operator<f64>,
    /// Hermitian rate matrix `a_ij` in the traceless basis.
    pub rate_matrix: M,
    /// `‖G − G_canonical‖_F`.
    pub reconstruction_error: f64,
    /// Difference between the low- and high-order derivative estimates, when
    /// the derivative came from finite differences.
    pub derivative_error: Option<f64>,
}

impl CanonicalGenerator {
    /// Rate along a jump operator `L`: `⟨l|a|l⟩ / ‖l‖⁴`, with `l` the
    /// coefficients of `L` in the traceless basis. Equals `γ` when the
    /// generator contains `γ D[L]` as one of its canonical channels.
    pub fn rate_along(&self, op: &M) -> f64 {
        let d = self.hamiltonian.dim();
        let basis = linalg::traceless_basis::<f64>(d);
        let l: Vec<Complex64> = basis.iter().map(|f| linalg::hs_inner(f, op)).collect();
        let n2: f64 = l.iter().map(|z| z.norm_sqr()).sum();
        if n2 == 0.0 {
            return 0.0;
        }
        let mut q = Complex64::new(0.0, 0.0);
        for i in 0..l.len() {
            for j in 0..l.len() {
                q += l[i].conj() * self.rate_matrix[(i, j)] * l[j];
            }
        }
        q.re / (n2 * n2)
    }

    /// Superoperator rebuilt from the canonical data.
    pub fn superoperator(&self) -> M {
        canonical_superop(self.hamiltonian.matrix(), &self.rate_matrix)
    }
}

fn canonical_superop(h: &M, a: &M) -> M {
    let d = h.nrows();
    let basis = linalg::traceless_basis::<f64>(d);
    let mut g = linalg::commutator_generator(h);
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            let aij = a[(i, j)];
            if aij.norm() == 0.0 {
                continue;
            }
            let fi = &basis[i];
            let fj = &basis[j];
            let anti = fj.adjoint() * fi;
            let term = linalg::sandwich(fi, &fj.adjoint())
                - (linalg::spre(&anti) + linalg::spost(&anti)) * re(0.5);
            g += term * aij;
        }
    }
    g
}

/// Canonical form of `G = Ė E⁻¹`.
pub fn canonical_from_derivative(e: &M, edot: &M, t: f64) -> Result<CanonicalGenerator> {
    let n = e.nrows();
    let sv = linalg::singular_values(e);
    if sv[0] <= 0.0 || sv[n - 1] < 1e-10 * sv[0] {
        return Err(Error::ExtractionSingular { t });
    }
    let inv = e.clone().try_inverse().ok_or(Error::ExtractionSingular { t })?;
    let g = edot * inv;
    canonical_from_generator(&g, t)
}

/// Canonical form of a Hermiticity- and trace-preserving generator.
pub fn canonical_from_generator(g: &M, t: f64) -> Result<CanonicalGenerator> {
    let n = g.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::InvalidChannel(format!("{n} is not a square dimension")));
    }
    let mut full = vec![linalg::identity::<f64>(d) * re(1.0 / (d as f64).sqrt())];
    full.extend(linalg::traceless_basis::<f64>(d));
    let m = full.len();
    // c_ij = ⟨conj(F_j) ⊗ F_i, G⟩.
    let mut c = linalg::zeros::<f64>(m, m);
    for i in 0..m {
        for j in 0..m {
            let b = linalg::kron(&full[j].conjugate(), &full[i]);
            c[(i, j)] = linalg::hs_inner(&b, g);
        }
    }
    let a = linalg::hermitian_part(&c.view((1, 1), (m - 1, m - 1)).into_owned());
    let mut mm = linalg::identity::<f64>(d) * (c[(0, 0)] / re(2.0 * d as f64));
    for i in 1..m {
        mm += &full[i] * (c[(i, 0)] / re((d as f64).sqrt()));
    }
    let h = linalg::hermitian_part(&((&mm - mm.adjoint()) * Complex64::new(0.0, 0.5)));
    let rebuilt = canonical_superop(&h, &a);
    let reconstruction_error = linalg::frobenius(&(g - &rebuilt));
    let (vals, vecs) = linalg::eigh(&a);
    let basis = &full[1..];
    let ops = (0..vals.len())
        .map(|k| {
            let op = basis
                .iter()
                .enumerate()
                .fold(linalg::zeros::<f64>(d, d), |acc, (i, f)| acc + f * vecs[(i, k)]);
            Operator::new(op)
        })
        .collect::<Result<_>>()?;
    Ok(CanonicalGenerator {
        time: t,
        rates: vals,
        ops,
        hamiltonian: Operator::new(h)?,
        rate_matrix: a,
        reconstruction_error,
        derivative_error: None,
    })
}

/// Canonical generator of `family` at grid time `t`.
///
/// Uses the family's exact derivative when present. Otherwise `Ė` comes from
/// a three-point central difference on the grid, replaced by the five-point
/// stencil when both are available and differ by more than `1e-6`.
pub fn extract_canonical_generator(family: &PropagatorFamily, t: f64) -> Result<CanonicalGenerator> {
    let i = family
        .index_of(t)
        .ok_or_else(|| Error::InvalidGrid(format!("t = {t} is not a grid point")))?;
    let e = family.superoperator(i);
    if let Some(edot) = family.derivative(i) {
        return canonical_from_derivative(e, edot, family.times()[i]);
    }
    let n = family.len();
    if i == 0 || i + 1 >= n {
        return Err(Error::InvalidGrid(format!("t = {t} is not interior to the grid")));
    }
    let ts = family.times();
    let (h1, h2) = (ts[i] - ts[i - 1], ts[i + 1] - ts[i]);
    let mut edot = family.superoperator(i - 1) * re(-h2 / (h1 * (h1 + h2)))
        + e * re((h2 - h1) / (h1 * h2))
        + family.superoperator(i + 1) * re(h1 / (h2 * (h1 + h2)));
    let mut fd_err = None;
    if i >= 2 && i + 2 < n {
        let h = h1;
        let uniform = [ts[i - 1] - ts[i - 2], h2, ts[i + 2] - ts[i + 1]]
            .iter()
            .all(|&x| (x - h).abs() <= 1e-9 * h);
        if uniform {
            let five = (family.superoperator(i - 2) - family.superoperator(i - 1) * re(8.0)
                + family.superoperator(i + 1) * re(8.0)
                - family.superoperator(i + 2))
                * re(1.0 / (12.0 * h));
            let diff = linalg::frobenius(&(&five - &edot));
            fd_err = Some(diff);
            if diff > 1e-6 {
                edot = five;
            }
        }
    }
    let mut g = canonical_from_derivative(e, &edot, ts[i])?;
    g.derivative_error = fd_err;
    Ok(g)
}

/// Damping rate `γ−(t)` of the non-Markovian amplitude damping model,
/// with `ν = ½ √(γ0² − 16α²)` continued to imaginary values.
///
/// This rate governs the excited-state amplitude, `ċ/c = −γ−`; the
/// population therefore decays at `2γ−(t)` in the standard dissipator
/// convention of this module.
pub fn nmad_rate(t: f64, gamma0: f64, alpha: f64) -> Result<f64> {
    let a2 = alpha * alpha;
    let disc = gamma0 * gamma0 - 16.0 * a2;
    let scale = gamma0.abs().max(alpha.abs()).max(1e-300);
    let (num, den) = if disc.abs().sqrt() * 0.5 < 1e-8 * scale {
        // ν → 0 limit; numerator and denominator both carry a factor ν².
        let w = 2.0 + gamma0 * t / 2.0;
        (-2.0 * a2 * t * w, -(w * w))
    } else {
        let nu = Complex64::new(disc, 0.0).sqrt() * 0.5;
        let x = nu * t;
        let (sh, ch) = (x.sinh(), x.cosh());
        let num = (-(nu * sh * 2.0 + ch * gamma0 - gamma0) * (2.0 * a2)).re;
        let den = (-(nu * sh) * (2.0 * gamma0) + ch * (8.0 * a2 - gamma0 * gamma0) + 8.0 * a2).re;
        (num, den)
    };
    if den.abs() < 1e-12 {
        return Err(Error::PoleEncountered { t });
    }
    Ok(num / den)
}

/// Excited-state amplitude `c(t)` of the zero-temperature memory-qubit model,
/// `c(t) = e^{−γ0 t/4} (cosh(νt/2) + γ0/(2ν) sinh(νt/2))`.
pub fn nmad_amplitude(t: f64, gamma0: f64, alpha: f64) -> f64 {
    let disc = gamma0 * gamma0 - 16.0 * alpha * alpha;
    let nu = Complex64::new(disc, 0.0).sqrt() * 0.5;
    let x = nu * (t / 2.0);
    let ratio = if nu.norm() < 1e-12 { re(t / 2.0) } else { x.sinh() / nu };
    ((x.cosh() + ratio * (gamma0 / 2.0)) * (-gamma0 * t / 4.0).exp()).re
}

/// Qubit coupled by exchange `α(σ+⊗σ− + σ−⊗σ+)` to a memory qubit that is
/// damped at base rate `γ0` by a bath at inverse temperature `β`:
/// `γ0(n̄+1) D[σ−_M] + γ0 n̄ D[σ+_M]`, `n̄ = 1/(e^β − 1)`. The memory starts in
/// its thermal state. `β = ∞` gives the zero-temperature model.
#[derive(Clone, Debug)]
pub struct MemoryQubitModel {
    pub gamma0: f64,
    pub alpha: f64,
    pub beta: f64,
    liouvillian: M,
    embed: M,
    reduce: M,
}

impl MemoryQubitModel {
    pub fn new(gamma0: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::ParamOutOfRange { name: "gamma0", value: gamma0, range: "(0, ∞)" });
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::ParamOutOfRange { name: "alpha", value: alpha, range: "(0, ∞)" });
        }
        if !(beta > 0.0) {
            return Err(Error::ParamOutOfRange { name: "beta", value: beta, range: "(0, ∞]" });
        }
        let nbar = 1.0 / beta.exp_m1();
        let (lo, hi) = (linalg::sigma_minus::<f64>(), linalg::sigma_plus::<f64>());
        let id = linalg::identity::<f64>(2);
        let h = (linalg::kron(&hi, &lo) + linalg::kron(&lo, &hi)) * re(alpha);
        let mut l = linalg::commutator_generator(&h) + linalg::dissipator(&linalg::kron(&id, &lo)) * re(gamma0 * (nbar + 1.0));
        if nbar > 0.0 {
            l += linalg::dissipator(&linalg::kron(&id, &hi)) * re(gamma0 * nbar);
        }
        let p_exc = 1.0 / (beta.exp() + 1.0);
        let mut rho_m = linalg::zeros::<f64>(2, 2);
        rho_m[(0, 0)] = re(1.0 - p_exc);
        rho_m[(1, 1)] = re(p_exc);
        let mut embed = linalg::zeros::<f64>(16, 4);
        for k in 0..4 {
            let mut x = linalg::zeros::<f64>(2, 2);
            x[(k % 2, k / 2)] = re(1.0);
            embed.set_column(k, &linalg::vec_op(&linalg::kron(&x, &rho_m)));
        }
        let mut reduce = linalg::zeros::<f64>(4, 16);
        for k in 0..16 {
            let mut x = linalg::zeros::<f64>(4, 4);
            x[(k % 4, k / 4)] = re(1.0);
            reduce.set_column(k, &linalg::vec_op(&linalg::partial_trace_second(&x, 2, 2)));
        }
        Ok(Self { gamma0, alpha, beta, liouvillian: l, embed, reduce })
    }

    /// Reduced map `E_t` and its exact time derivative.
    pub fn reduced_map(&self, t: f64) -> (M, M) {
        let p = (&self.liouvillian * re(t)).exp();
        let e = &self.reduce * &p * &self.embed;
        let edot = &self.reduce * &self.liouvillian * &p * &self.embed;
        (e, edot)
    }

    pub fn generator(&self, t: f64) -> Result<CanonicalGenerator> {
        let (e, edot) = self.reduced_map(t);
        canonical_from_derivative(&e, &edot, t)
    }

    /// Rates `(γ−, γ+)` along `σ−` and `σ+` at time `t`.
    pub fn rates(&self, t: f64) -> Result<(f64, f64)> {
        if t == 0.0 {
            return Ok((0.0, 0.0));
        }
        let g = self.generator(t)?;
        Ok((g.rate_along(&linalg::sigma_minus()), g.rate_along(&linalg::sigma_plus())))
    }

    pub fn family(&self, grid: &[f64]) -> Result<PropagatorFamily> {
        let (maps, ders): (Vec<M>, Vec<M>) = grid.par_iter().map(|&t| self.reduced_map(t)).unzip();
        PropagatorFamily::new(grid.to_vec(), maps, Some(ders))
    }
}

/// Zero-temperature propagator family, through the memory-qubit model.
/// The family passes smoothly through the rate poles.
pub fn nmad_propagator(gamma0: f64, alpha: f64, grid: &[f64]) -> Result<PropagatorFamily> {
    MemoryQubitModel::new(gamma0, alpha, f64::INFINITY)?.family(grid)
}

/// Master equation of the non-Markovian amplitude damping.
///
/// Zero temperature: a single channel `(2γ−(t), σ−)`. Finite temperature:
/// channels `(γ−(t), σ−)` and `(γ+(t), σ+)` with both rates read off the
/// memory-qubit model at each requested time.
pub fn build_nmad_gksl(gamma0: f64, alpha: f64, thermal: Option<f64>) -> Result<TimeLocalGksl> {
    let lo = Operator::new(linalg::sigma_minus::<f64>())?;
    match thermal {
        None => {
            MemoryQubitModel::new(gamma0, alpha, f64::INFINITY)?;
            let rate: RateFn = Arc::new(move |t| Ok(2.0 * nmad_rate(t, gamma0, alpha)?));
            TimeLocalGksl::new(vec![rate], vec![lo], None)
        }
        Some(beta) => {
            let model = Arc::new(MemoryQubitModel::new(gamma0, alpha, beta)?);
            let m2 = model.clone();
            let minus: RateFn = Arc::new(move |t| model.rates(t).map(|r| r.0).map_err(|_| Error::PoleEncountered { t }));
            let plus: RateFn = Arc::new(move |t| m2.rates(t).map(|r| r.1).map_err(|_| Error::PoleEncountered { t }));
            let hi = Operator::new(linalg::sigma_plus::<f64>())?;
            TimeLocalGksl::new(vec![minus, plus], vec![lo, hi], None)
        }
    }
}

/// Rates and singularities read off the thermal memory-qubit model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermalReduction {
    pub family: PropagatorFamily,
    /// `γ−(t)` per grid point, `NaN` where extraction was skipped.
    pub gamma_minus: Vec<f64>,
    /// `γ+(t)` per grid point, `NaN` where extraction was skipped.
    pub gamma_plus: Vec<f64>,
    /// Grid indices skipped because the reduced map was not invertible.
    pub skipped: Vec<usize>,
    /// Times where the reduced map becomes singular, located by bisection on
    /// sign changes of the affine-form diagonal. Rates diverge there.
    pub pole_times: Vec<f64>,
    /// Sign changes of `γ−` and `γ+` between consecutive valid grid points.
    pub sign_changes: [usize; 2],
}

impl ThermalReduction {
    /// Poles at which both rates flip sign with large magnitude just either
    /// side, probed at `t ± δ`.
    pub fn confirmed_poles(&self, model: &MemoryQubitModel, delta: f64) -> Vec<f64> {
        self.pole_times
            .iter()
            .copied()
            .filter(|&tp| {
                let (Ok(a), Ok(b)) = (model.rates(tp - delta), model.rates(tp + delta)) else {
                    return false;
                };
                let big = 1.0 / delta.sqrt();
                a.0.signum() != b.0.signum()
                    && a.1.signum() != b.1.signum()
                    && a.0.abs().min(b.0.abs()) > big * model.gamma0 * 1e-3
            })
            .collect()
    }
}

fn diag_affine(e: &M) -> [f64; 3] {
    let p = linalg::paulis::<f64>();
    let mut out = [0.0; 3];
    for k in 0..3 {
        let img = linalg::unvec((e * linalg::vec_op(&p[k + 1])).as_slice(), 2);
        out[k] = 0.5 * linalg::trace(&(&p[k + 1] * img)).re;
    }
    out
}

fn count_sign_changes(xs: &[f64]) -> usize {
    let valid: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite() && *x != 0.0).collect();
    valid.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
}

/// Reduced propagator of the thermal memory-qubit model on `grid` and the
/// rates `γ±(t)` from canonical generator extraction.
pub fn thermal_embedding_reduce(gamma0: f64, alpha: f64, beta: f64, grid: &[f64]) -> Result<ThermalReduction> {
    if grid.first() != Some(&0.0) {
        return Err(Error::InvalidGrid("grid must start at t = 0".into()));
    }
    let model = MemoryQubitModel::new(gamma0, alpha, beta)?;
    let family = model.family(grid)?;
    let rates: Vec<Option<(f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = grid[i];
            if t == 0.0 {
                return Some((0.0, 0.0));
            }
            let g = canonical_from_derivative(family.superoperator(i), family.derivative(i)?, t).ok()?;
            Some((g.rate_along(&linalg::sigma_minus()), g.rate_along(&linalg::sigma_plus())))
        })
        .collect();
    let skipped: Vec<usize> = rates.iter().enumerate().filter(|(_, r)| r.is_none()).map(|(i, _)| i).collect();
    let gamma_minus: Vec<f64> = rates.iter().map(|r| r.map_or(f64::NAN, |x| x.0)).collect();
    let gamma_plus: Vec<f64> = rates.iter().map(|r| r.map_or(f64::NAN, |x| x.1)).collect();
    let diags: Vec<[f64; 3]> = (0..grid.len()).map(|i| diag_affine(family.superoperator(i))).collect();
    let mut pole_times = Vec::new();
    for i in 1..grid.len() {
        for k in 0..3 {
            let (a, b) = (diags[i - 1][k], diags[i][k]);
            if a != 0.0 && b != 0.0 && a.signum() != b.signum() {
                let f = |t: f64| diag_affine(&model.reduced_map(t).0)[k];
                let (mut lo, mut hi) = (grid[i - 1], grid[i]);
                let flo = f(lo);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid).signum() == flo.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let tp = 0.5 * (lo + hi);
                if !pole_times.iter().any(|&x: &f64| (x - tp).abs() < 1e-9) {
                    pole_times.push(tp);
                }
            }
        }
    }
    pole_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sign_changes = [count_sign_changes(&gamma_minus), count_sign_changes(&gamma_plus)];
    Ok(ThermalReduction { family, gamma_minus, gamma_plus, skipped, pole_times, sign_changes })
}

/// `γ1(t) = κ(κt − 1) / (2(κt − e^{κt}))` for the jump scheme.
pub fn damp_flip_gamma1(t: f64, kappa: f64) -> f64 {
    let x = kappa * t;
    let e = (-x).exp();
    kappa * (1.0 - x) * e / (2.0 * (1.0 - x * e))
}

/// `γ2(t) = κ(e^{κt} − 1) / (8(e^{κt} − κt))` for the jump scheme.
pub fn damp_flip_gamma2(t: f64, kappa: f64) -> f64 {
    let x = kappa * t;
    let e = (-x).exp();
    kappa * (1.0 - e) / (8.0 * (1.0 - x * e))
}

/// Two-rate master equation of the jump scheme: `σ−` at rate `2γ1(t)` and
/// `σz` at rate `2γ2(t)` (`γ1`, `γ2` are half the standard GKSL rates).
pub fn build_damp_flip_gksl(kappa: f64) -> Result<TimeLocalGksl> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::ParamOutOfRange { name: "kappa", value: kappa, range: "(0, ∞)" });
    }
    let g1: RateFn = Arc::new(move |t| Ok(2.0 * damp_flip_gamma1(t, kappa)));
    let g2: RateFn = Arc::new(move |t| Ok(2.0 * damp_flip_gamma2(t, kappa)));
    TimeLocalGksl::new(
        vec![g1, g2],
        vec![Operator::new(linalg::sigma_minus())?, Operator::new(linalg::sigma_z())?],
        None,
    )
}

/// Uniform grid `0, h, …, t_max` with `n` intervals.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
}
