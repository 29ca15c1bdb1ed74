//! Quantum-jump trajectories whose measurement scheme is switched by a
//! finite classical memory, their ensemble averages, and the exact maps they
//! generate.

use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, Dynamics, QuantumChannel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::meq::{extract_canonical_generator, CanonicalGenerator, PropagatorFamily};
use crate::operator::{DensityMatrix, Operator};
use crate::scalar::CMatrix;

type M = CMatrix<f64>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Jump operator `L` (rate included) of one memory state, and the memory
/// state entered when it fires.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpChannel {
    pub op: Operator<f64>,
    pub next: usize,
}

/// Form of the per-step instrument built from the jump operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstrumentForm {
    /// `M_k = −i √dt L_k`, `M_0 = I − (dt/2) Σ L_k† L_k`; complete to `O(dt²)`.
    FirstOrder,
    /// Same jumps with `M_0 = √(I − dt Σ L_k† L_k)`, complete exactly.
    Exact,
}

/// Finite-automaton jump scheme. In memory state `m` the instrument has a
/// no-jump outcome (memory unchanged) and one outcome per jump channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpScheme {
    dim: usize,
    initial_memory: usize,
    channels: Vec<Vec<JumpChannel>>,
}

impl JumpScheme {
    pub fn new(channels: Vec<Vec<JumpChannel>>, initial_memory: usize) -> Result<Self> {
        let n = channels.len();
        if n == 0 || initial_memory >= n {
            return Err(Error::InvalidScheme(format!("initial memory {initial_memory} of {n} states")));
        }
        let dim = channels
            .iter()
            .flatten()
            .map(|c| c.op.dim())
            .next()
            .ok_or_else(|| Error::InvalidScheme("no jump operators".into()))?;
        for (m, chans) in channels.iter().enumerate() {
            for c in chans {
                if c.next >= n {
                    return Err(Error::InvalidScheme(format!("state {m} jumps to unknown state {}", c.next)));
                }
                if c.op.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: c.op.dim() });
                }
            }
        }
        Ok(Self { dim, initial_memory, channels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn memory_states(&self) -> usize {
        self.channels.len()
    }

    pub fn initial_memory(&self) -> usize {
        self.initial_memory
    }

    pub fn channels(&self, m: usize) -> &[JumpChannel] {
        &self.channels[m]
    }

    /// Instrument of memory state `m` at step `dt`: the no-jump operator
    /// first, then one operator per jump channel.
    pub fn instrument(&self, m: usize, dt: f64, form: InstrumentForm) -> Result<Vec<M>> {
        let d = self.dim;
        let rate = self.channels[m]
            .iter()
            .fold(linalg::zeros::<f64>(d, d), |acc, c| acc + c.op.matrix().adjoint() * c.op.matrix());
        let no_jump = match form {
            InstrumentForm::FirstOrder => linalg::identity::<f64>(d) - &rate * re(dt / 2.0),
            InstrumentForm::Exact => {
                let (vals, vecs) = linalg::eigh(&(linalg::identity::<f64>(d) - &rate * re(dt)));
                if vals[0] < 0.0 {
                    return Err(Error::InvalidScheme(format!("dt = {dt} exceeds the inverse jump rate")));
                }
                let sq = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, vals.iter().map(|v| re(v.sqrt()))));
                &vecs * sq * vecs.adjoint()
            }
        };
        let mut out = vec![no_jump];
        for c in &self.channels[m] {
            out.push(c.op.matrix() * Complex64::new(0.0, -dt.sqrt()));
        }
        Ok(out)
    }

    /// `max_m ‖Σ_k M_k† M_k − I‖_F` at step `dt`.
    pub fn completeness_residual(&self, dt: f64, form: InstrumentForm) -> Result<f64> {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for m in 0..self.memory_states() {
            let sum = self
                .instrument(m, dt, form)?
                .iter()
                .fold(linalg::zeros::<f64>(d, d), |acc, k| acc + k.adjoint() * k);
            worst = worst.max(linalg::frobenius(&(sum - linalg::identity::<f64>(d))));
        }
        Ok(worst)
    }

    /// Memory state after outcome `k` (0 = no jump) in state `m`.
    pub fn next_memory(&self, m: usize, k: usize) -> usize {
        if k == 0 {
            m
        } else {
            self.channels[m][k - 1].next
        }
    }
}

/// Damping towards `|0⟩` at rate `κ` until the first jump, then damping
/// towards `|1⟩` at the same rate. One classical bit records the jump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampFlipScheme {
    pub kappa: f64,
}

impl DampFlipScheme {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::ParamOutOfRange { name: "kappa", value: kappa, range: "[0, ∞)" });
        }
        Ok(Self { kappa })
    }

    pub fn jump_scheme(&self) -> JumpScheme {
        let s = re(self.kappa.sqrt());
        let lo = Operator::new(linalg::sigma_minus::<f64>() * s).expect("finite");
        let hi = Operator::new(linalg::sigma_plus::<f64>() * s).expect("finite");
        JumpScheme::new(
            vec![vec![JumpChannel { op: lo, next: 1 }], vec![JumpChannel { op: hi, next: 1 }]],
            0,
        )
        .expect("valid two-state scheme")
    }
}

/// Jumps and memory states visited by one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub jump_times: Vec<f64>,
    /// Memory state before the first jump and after each jump.
    pub memory_path: Vec<usize>,
    /// Final normalised state vector, as `[re, im]` pairs.
    pub final_state: Vec<[f64; 2]>,
}

/// Output of [`simulate_ensemble`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    /// Ensemble-average Bloch vector per recorded time.
    pub mean_bloch: Vec<[f64; 3]>,
    /// Bootstrap standard error of each Bloch component, over batch means.
    pub std_err: Vec<[f64; 3]>,
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
    /// `jump_histogram[j]` trajectories with exactly `j` jumps (last bin: at least).
    pub jump_histogram: Vec<usize>,
    /// Trajectories whose memory left its initial state.
    pub left_initial_memory: usize,
    /// Time of the first jump per trajectory, `None` if it never jumped.
    pub first_jump_times: Vec<Option<f64>>,
    /// Full records of the first [`KEPT_RECORDS`] trajectories.
    pub records: Vec<TrajectoryRecord>,
}

impl EnsembleResult {
    /// `½ ‖r̄ − r‖`, the trace distance of the ensemble average from `r`.
    pub fn trace_distance_to(&self, i: usize, r: [f64; 3]) -> f64 {
        let m = self.mean_bloch[i];
        0.5 * ((m[0] - r[0]).powi(2) + (m[1] - r[1]).powi(2) + (m[2] - r[2]).powi(2)).sqrt()
    }

    /// Standard error of the trace distance scale, `½ ‖se‖`.
    pub fn distance_std_err(&self, i: usize) -> f64 {
        let s = self.std_err[i];
        0.5 * (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()
    }
}

pub const KEPT_RECORDS: usize = 100;
pub const MAX_JUMP_BIN: usize = 8;
pub const BOOTSTRAP_RESAMPLES: usize = 400;
const MAX_BATCHES: usize = 100;
/// Default number of recorded intervals.
pub const DEFAULT_RECORD_POINTS: usize = 50;

type V2 = Vector2<Complex64>;
type M2 = Matrix2<Complex64>;

fn to_m2(m: &M) -> M2 {
    M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn bloch_of_ket(v: &V2) -> [f64; 3] {
    let (a, b) = (v[0], v[1]);
    let ab = a.conj() * b;
    [2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr()]
}

struct StepOps {
    no_jump: Vec<M2>,
    diag: Vec<Option<[f64; 2]>>,
    jumps: Vec<Vec<M2>>,
}

struct Trajectory {
    samples: Vec<[f64; 3]>,
    record: TrajectoryRecord,
}

fn run_trajectory(
    scheme: &JumpScheme,
    ops: &StepOps,
    init: &[(f64, V2)],
    n_steps: usize,
    record_steps: &[usize],
    dt: f64,
    seed: u64,
    index: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let pick: f64 = rng.random();
    let mut acc = 0.0;
    let mut psi = init[init.len() - 1].1;
    for (w, v) in init {
        acc += w;
        if pick < acc {
            psi = *v;
            break;
        }
    }
    let mut mem = scheme.initial_memory();
    let mut step = 0usize;
    let mut samples = Vec::with_capacity(record_steps.len());
    let mut rec_idx = 0;
    let mut record = TrajectoryRecord { jump_times: Vec::new(), memory_path: vec![mem], final_state: Vec::new() };
    while step <= n_steps {
        let r: f64 = rng.random();
        // Find the step at which the no-jump norm falls below r.
        let jump_at = match ops.diag[mem] {
            Some([d0, d1]) => {
                let (p0, p1) = (psi[0].norm_sqr(), psi[1].norm_sqr());
                let norm_after = |j: usize| p0 * d0.powi(2 * j as i32) + p1 * d1.powi(2 * j as i32);
                let remaining = n_steps - step;
                if norm_after(remaining) >= r {
                    None
                } else {
                    let (mut lo, mut hi) = (0usize, remaining);
                    while hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        if norm_after(mid) < r {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    Some(hi)
                }
            }
            None => {
                let mut phi = psi;
                let mut found = None;
                for j in 1..=(n_steps - step) {
                    phi = ops.no_jump[mem] * phi;
                    if phi.norm_squared() < r {
                        found = Some(j);
                        break;
                    }
                }
                found
            }
        };
        let end = jump_at.map_or(n_steps, |j| step + j - 1);
        // Record the no-jump evolution on [step, end].
        while rec_idx < record_steps.len() && record_steps[rec_idx] <= end {
            let j = record_steps[rec_idx] - step;
            let phi = no_jump_power(ops, mem, &psi, j);
            let n = phi.norm();
            if n * n < 1e-14 {
                return Err(Error::NormCollapse { t: record_steps[rec_idx] as f64 * dt });
            }
            samples.push(bloch_of_ket(&(phi / re(n))));
            rec_idx += 1;
        }
        let Some(j) = jump_at else {
            let phi = no_jump_power(ops, mem, &psi, n_steps - step);
            let n = phi.norm();
            psi = phi / re(n);
            break;
        };
        // State entering the jump step, then the outcome draw.
        let phi = no_jump_power(ops, mem, &psi, j - 1);
        let weights: Vec<f64> = ops.jumps[mem].iter().map(|k| (k * phi).norm_squared()).collect();
        let total: f64 = weights.iter().sum();
        if total < 1e-14 * phi.norm_squared() {
            return Err(Error::NormCollapse { t: (step + j) as f64 * dt });
        }
        let u: f64 = rng.random::<f64>() * total;
        let mut k = weights.len() - 1;
        let mut c = 0.0;
        for (i, w) in weights.iter().enumerate() {
            c += w;
            if u < c {
                k = i;
                break;
            }
        }
        let next = ops.jumps[mem][k] * phi;
        let n = next.norm();
        if n * n < 1e-14 * phi.norm_squared() {
            return Err(Error::NormCollapse { t: (step + j) as f64 * dt });
        }
        psi = next / re(n);
        step += j;
        mem = scheme.next_memory(mem, k + 1);
        record.jump_times.push(step as f64 * dt);
        record.memory_path.push(mem);
        // The post-jump state is the state at `step`.
        while rec_idx < record_steps.len() && record_steps[rec_idx] == step {
            samples.push(bloch_of_ket(&psi));
            rec_idx += 1;
        }
        if step >= n_steps {
            break;
        }
    }
    record.final_state = vec![[psi[0].re, psi[0].im], [psi[1].re, psi[1].im]];
    Ok(Trajectory { samples, record })
}

fn no_jump_power(ops: &StepOps, mem: usize, psi: &V2, j: usize) -> V2 {
    match ops.diag[mem] {
        Some([d0, d1]) => V2::new(psi[0] * d0.powi(j as i32), psi[1] * d1.powi(j as i32)),
        None => {
            let mut phi = *psi;
            for _ in 0..j {
                phi = ops.no_jump[mem] * phi;
            }
            phi
        }
    }
}

/// Monte Carlo ensemble with [`DEFAULT_RECORD_POINTS`] recorded intervals.
pub fn simulate_ensemble(
    scheme: &JumpScheme,
    rho0: &DensityMatrix<f64>,
    dt: f64,
    t_max: f64,
    n_traj: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    simulate_ensemble_with(scheme, rho0, dt, t_max, n_traj, seed, DEFAULT_RECORD_POINTS)
}

/// Monte Carlo ensemble of jump trajectories for a qubit scheme.
///
/// Trajectory `i` draws from the ChaCha8 stream `i` of `seed`; per-batch
/// sums are reduced in index order, so results do not depend on the number
/// of worker threads. Jump steps come from inverting the no-jump norm decay
/// (closed form when the no-jump operator is diagonal).
pub fn simulate_ensemble_with(
    scheme: &JumpScheme,
    rho0: &DensityMatrix<f64>,
    dt: f64,
    t_max: f64,
    n_traj: usize,
    seed: u64,
    record_points: usize,
) -> Result<EnsembleResult> {
    if scheme.dim() != 2 || rho0.dim() != 2 {
        return Err(Error::BadDimension { expected: 2, found: scheme.dim().max(rho0.dim()) });
    }
    if n_traj == 0 || record_points == 0 {
        return Err(Error::InvalidGrid("need at least one trajectory and one recorded interval".into()));
    }
    if !(dt > 0.0 && t_max >= 0.0) {
        return Err(Error::InvalidGrid(format!("dt = {dt}, t_max = {t_max}")));
    }
    let n_steps = (t_max / dt).round() as usize;
    if ((n_steps as f64) * dt - t_max).abs() > 1e-9 * t_max.max(1.0) {
        return Err(Error::InvalidGrid(format!("t_max = {t_max} is not a multiple of dt = {dt}")));
    }
    let mut record_steps: Vec<usize> = (0..=record_points).map(|k| (k * n_steps + record_points / 2) / record_points).collect();
    record_steps.dedup();
    let mut ops = StepOps { no_jump: Vec::new(), diag: Vec::new(), jumps: Vec::new() };
    for m in 0..scheme.memory_states() {
        let inst = scheme.instrument(m, dt, InstrumentForm::Exact)?;
        let nj = to_m2(&inst[0]);
        let diag = (nj[(0, 1)].norm() == 0.0 && nj[(1, 0)].norm() == 0.0 && nj[(0, 0)].im == 0.0 && nj[(1, 1)].im == 0.0)
            .then(|| [nj[(0, 0)].re, nj[(1, 1)].re]);
        ops.no_jump.push(nj);
        ops.diag.push(diag);
        ops.jumps.push(inst[1..].iter().map(to_m2).collect());
    }
    let (vals, vecs) = linalg::eigh(rho0.matrix());
    let init: Vec<(f64, V2)> = vals
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 1e-15)
        .map(|(k, &w)| (w, V2::new(vecs[(0, k)], vecs[(1, k)])))
        .collect();
    let n_batches = n_traj.min(MAX_BATCHES);
    let bounds: Vec<(usize, usize)> = (0..n_batches)
        .map(|b| (b * n_traj / n_batches, (b + 1) * n_traj / n_batches))
        .collect();
    let n_rec = record_steps.len();
    struct Batch {
        sums: Vec<[f64; 3]>,
        count: usize,
        hist: Vec<usize>,
        left: usize,
        first: Vec<Option<f64>>,
        records: Vec<TrajectoryRecord>,
    }
    let batches: Vec<Batch> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut b = Batch {
                sums: vec![[0.0; 3]; n_rec],
                count: hi - lo,
                hist: vec![0; MAX_JUMP_BIN + 1],
                left: 0,
                first: Vec::with_capacity(hi - lo),
                records: Vec::new(),
            };
            for i in lo..hi {
                let tr = run_trajectory(scheme, &ops, &init, n_steps, &record_steps, dt, seed, i as u64)?;
                for (s, x) in b.sums.iter_mut().zip(&tr.samples) {
                    for c in 0..3 {
                        s[c] += x[c];
                    }
                }
                let nj = tr.record.jump_times.len();
                b.hist[nj.min(MAX_JUMP_BIN)] += 1;
                if tr.record.memory_path.last() != Some(&scheme.initial_memory()) {
                    b.left += 1;
                }
                b.first.push(tr.record.jump_times.first().copied());
                if i < KEPT_RECORDS {
                    b.records.push(tr.record);
                }
            }
            Ok(b)
        })
        .collect::<Result<_>>()?;
    let mut mean_bloch = vec![[0.0; 3]; n_rec];
    let mut jump_histogram = vec![0; MAX_JUMP_BIN + 1];
    let mut left_initial_memory = 0;
    let mut first_jump_times = Vec::with_capacity(n_traj);
    let mut records = Vec::new();
    for b in &batches {
        for (m, s) in mean_bloch.iter_mut().zip(&b.sums) {
            for c in 0..3 {
                m[c] += s[c];
            }
        }
        for (h, x) in jump_histogram.iter_mut().zip(&b.hist) {
            *h += x;
        }
        left_initial_memory += b.left;
        first_jump_times.extend_from_slice(&b.first);
        records.extend(b.records.iter().cloned());
    }
    for m in &mut mean_bloch {
        for c in m.iter_mut() {
            *c /= n_traj as f64;
        }
    }
    // Bootstrap over batch means.
    let mut std_err = vec![[0.0; 3]; n_rec];
    if n_batches > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let mut acc = vec![[0.0; 3]; n_rec];
        let mut acc2 = vec![[0.0; 3]; n_rec];
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let mut sum = vec![[0.0; 3]; n_rec];
            let mut count = 0usize;
            for _ in 0..n_batches {
                let b = &batches[rng.random_range(0..n_batches)];
                count += b.count;
                for (s, x) in sum.iter_mut().zip(&b.sums) {
                    for c in 0..3 {
                        s[c] += x[c];
                    }
                }
            }
            for k in 0..n_rec {
                for c in 0..3 {
                    let m = sum[k][c] / count as f64;
                    acc[k][c] += m;
                    acc2[k][c] += m * m;
                }
            }
        }
        let nb = BOOTSTRAP_RESAMPLES as f64;
        for k in 0..n_rec {
            for c in 0..3 {
                let mean = acc[k][c] / nb;
                std_err[k][c] = (acc2[k][c] / nb - mean * mean).max(0.0).sqrt();
            }
        }
    }
    Ok(EnsembleResult {
        times: record_steps.iter().map(|&s| s as f64 * dt).collect(),
        mean_bloch,
        std_err,
        n_traj,
        seed,
        dt,
        jump_histogram,
        left_initial_memory,
        first_jump_times,
        records,
    })
}

fn ptm(s: &M) -> Matrix4<f64> {
    channel::superop_to_ptm(s)
}

/// Superoperators of the exact continuous-time pieces: no-jump evolution
/// over `t`, the jump (per unit time) and the post-jump channel over `t`.
fn damp_flip_pieces(kappa: f64, t: f64) -> (M, M, M) {
    let mut k = linalg::identity::<f64>(2);
    k[(1, 1)] = re((-kappa * t / 2.0).exp());
    let no_jump = linalg::sandwich(&k, &k.adjoint());
    let lo = linalg::sigma_minus::<f64>();
    let jump = linalg::sandwich(&lo, &lo.adjoint()) * re(kappa);
    let p = (1.0 - (-kappa * t).exp()).max(0.0);
    let hi = linalg::sigma_plus::<f64>() * re(p.sqrt());
    let mut keep = linalg::zeros::<f64>(2, 2);
    keep[(1, 1)] = re(1.0);
    keep[(0, 0)] = re((1.0 - p).sqrt());
    let post = linalg::sandwich(&hi, &hi.adjoint()) + linalg::sandwich(&keep, &keep.adjoint());
    (no_jump, jump, post)
}

/// `E_t` and `Ė_t` as superoperators: no-jump term plus the jump-time
/// integral, evaluated with composite Simpson on `quad_points` intervals in
/// the Pauli transfer representation.
pub fn exact_map_with_derivative(scheme: &DampFlipScheme, t: f64, quad_points: usize) -> Result<(M, M)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidGrid(format!("t = {t} must be non-negative")));
    }
    let kappa = scheme.kappa;
    let n = (quad_points.max(2) + 1) & !1;
    let h = t / n as f64;
    let (nj_t, jump, _) = damp_flip_pieces(kappa, t);
    let mut integral = Matrix4::<f64>::zeros();
    if t > 0.0 {
        for i in 0..=n {
            let tp = if i == n { t } else { i as f64 * h };
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let (nj, _, _) = damp_flip_pieces(kappa, tp);
            let (_, _, post) = damp_flip_pieces(kappa, t - tp);
            integral += ptm(&(post * &jump * nj)) * (w * h / 3.0);
        }
    }
    let e_ptm = ptm(&nj_t) + integral;
    let e = channel::ptm_to_superop(&e_ptm);
    // Ė = L_nj M2(t) + J M2(t) + L̃ (E_t − M2(t)).
    let n_exc = linalg::sigma_plus::<f64>() * linalg::sigma_minus::<f64>();
    let l_nj = (linalg::spre(&n_exc) + linalg::spost(&n_exc)) * re(-kappa / 2.0);
    let l_post = linalg::dissipator(&linalg::sigma_plus::<f64>()) * re(kappa);
    let edot = (&l_nj + &jump) * &nj_t + l_post * (&e - &nj_t);
    Ok((e, edot))
}

/// Average map of the [`DampFlipScheme`] at time `t`.
pub fn exact_map(scheme: &DampFlipScheme, t: f64, quad_points: usize) -> Result<QuantumChannel<f64>> {
    QuantumChannel::from_superoperator_unchecked(exact_map_with_derivative(scheme, t, quad_points)?.0)
}

/// Closed form of the exact map on the Bloch ball: `z ↦ (1 − u) z + u`,
/// `x, y ↦ e^{−κt/2} (x, y)` with `u = κt e^{−κt}`.
pub fn exact_map_closed_form(kappa: f64, t: f64) -> channel::AffineForm<f64> {
    let u = kappa * t * (-kappa * t).exp();
    let perp = (-kappa * t / 2.0).exp();
    channel::AffineForm {
        a: nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(perp, perp, 1.0 - u)),
        b: nalgebra::Vector3::new(0.0, 0.0, u),
    }
}

/// Propagator family of the exact map on `grid`, with exact derivatives.
pub fn exact_family(scheme: &DampFlipScheme, grid: &[f64], quad_points: usize) -> Result<PropagatorFamily> {
    let pairs: Vec<(M, M)> = grid
        .par_iter()
        .map(|&t| exact_map_with_derivative(scheme, t, quad_points))
        .collect::<Result<_>>()?;
    let (maps, ders) = pairs.into_iter().unzip();
    PropagatorFamily::new(grid.to_vec(), maps, Some(ders))
}

/// Canonical generators of the exact map at each (positive) grid time.
pub fn derive_master_equation(scheme: &DampFlipScheme, grid: &[f64], quad_points: usize) -> Result<Vec<CanonicalGenerator>> {
    let family = exact_family(scheme, grid, quad_points)?;
    grid.par_iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| extract_canonical_generator(&family, t))
        .collect()
}

/// Exact discrete-time average maps at `times` (multiples of `dt`),
/// propagating one conditional superoperator per memory state.
pub fn scheme_to_dynamics(scheme: &JumpScheme, dt: f64, times: &[f64]) -> Result<Dynamics<f64>> {
    let steps = time_steps(dt, times)?;
    let maps = memory_resolved_maps(scheme, dt, &steps)?
        .into_iter()
        .map(QuantumChannel::from_superoperator_unchecked)
        .collect::<Result<Vec<_>>>()?;
    Dynamics::with_tolerance(maps, Some(times.to_vec()), 1e-9)
}

fn time_steps(dt: f64, times: &[f64]) -> Result<Vec<usize>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidGrid(format!("dt = {dt}")));
    }
    times
        .iter()
        .map(|&t| {
            let n = (t / dt).round();
            if n < 0.0 || (n * dt - t).abs() > 1e-9 * t.abs().max(1.0) {
                Err(Error::InvalidGrid(format!("t = {t} is not a multiple of dt = {dt}")))
            } else {
                Ok(n as usize)
            }
        })
        .collect()
}

/// Superoperators `Σ_m S_m(n)` at the requested step counts.
pub fn memory_resolved_maps(scheme: &JumpScheme, dt: f64, steps: &[usize]) -> Result<Vec<M>> {
    if steps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("steps must be non-decreasing".into()));
    }
    let d2 = scheme.dim() * scheme.dim();
    let nm = scheme.memory_states();
    let sand: Vec<Vec<M>> = (0..nm)
        .map(|m| {
            Ok(scheme
                .instrument(m, dt, InstrumentForm::Exact)?
                .iter()
                .map(|k| linalg::sandwich(k, &k.adjoint()))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut cond = vec![linalg::zeros::<f64>(d2, d2); nm];
    cond[scheme.initial_memory()] = linalg::identity::<f64>(d2);
    let mut out = Vec::with_capacity(steps.len());
    let mut n = 0;
    for &target in steps {
        while n < target {
            let mut next = vec![linalg::zeros::<f64>(d2, d2); nm];
            for m in 0..nm {
                for (k, s) in sand[m].iter().enumerate() {
                    next[scheme.next_memory(m, k)] += s * &cond[m];
                }
            }
            cond = next;
            n += 1;
        }
        out.push(cond.iter().fold(linalg::zeros::<f64>(d2, d2), |acc, s| acc + s));
    }
    Ok(out)
}
