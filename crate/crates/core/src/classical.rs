//! Classical-memory realisations: a first-step instrument `{M_i}` whose
//! outcome selects the second-step channel `Φ_i`, so that
//! `E2[ρ] = Σ_i Φ_i[M_i ρ M_i†]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{self, QuantumChannel, CHANNEL_TOL};
use crate::error::{Error, Result};
use crate::families::{dephasing_channel, ThermalAdParams};
use crate::linalg;
use crate::nonmarkov::intermediate_map;
use crate::operator::{DensityMatrix, Operator};
use crate::scalar::CMatrix;

type M = CMatrix<f64>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalMemoryRepresentation {
    instrument: Vec<Operator<f64>>,
    conditionals: Vec<QuantumChannel<f64>>,
}

impl ClassicalMemoryRepresentation {
    /// Representation checked for completeness and CPT conditionals.
    pub fn new(instrument: Vec<Operator<f64>>, conditionals: Vec<QuantumChannel<f64>>) -> Result<Self> {
        let rep = Self::new_unchecked(instrument, conditionals)?;
        let (comp, cpt) = (rep.completeness_residual(), rep.conditional_cpt_residual());
        if comp > CHANNEL_TOL || cpt > CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!("instrument residual {comp:e}, conditional CPT residual {cpt:e}")));
        }
        Ok(rep)
    }

    /// Representation without physicality checks, for diagnostics.
    pub fn new_unchecked(instrument: Vec<Operator<f64>>, conditionals: Vec<QuantumChannel<f64>>) -> Result<Self> {
        if instrument.len() != conditionals.len() || instrument.is_empty() {
            return Err(Error::DimensionMismatch { expected: instrument.len(), found: conditionals.len() });
        }
        let d = instrument[0].dim();
        for m in &instrument {
            if m.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
            }
        }
        for c in &conditionals {
            if c.dim_in() != d || c.dim_out() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.dim_in() });
            }
        }
        Ok(Self { instrument, conditionals })
    }

    pub fn instrument(&self) -> &[Operator<f64>] {
        &self.instrument
    }

    pub fn conditionals(&self) -> &[QuantumChannel<f64>] {
        &self.conditionals
    }

    pub fn dim(&self) -> usize {
        self.instrument[0].dim()
    }

    pub fn instrument_matrices(&self) -> Vec<M> {
        self.instrument.iter().map(|m| m.matrix().clone()).collect()
    }

    /// `‖Σ M_i† M_i − I‖_F`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dim();
        let sum = self
            .instrument
            .iter()
            .fold(linalg::zeros::<f64>(d, d), |acc, m| acc + m.matrix().adjoint() * m.matrix());
        linalg::frobenius(&(sum - linalg::identity::<f64>(d)))
    }

    /// Worst of the trace-preservation residuals and negative Choi
    /// eigenvalues over the conditional channels.
    pub fn conditional_cpt_residual(&self) -> f64 {
        self.conditionals
            .iter()
            .map(|c| {
                let r = channel::validate_cpt(c, CHANNEL_TOL);
                r.tp_residual.max(-r.min_choi_eig).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Superoperator of the first step, `Σ M_i ⊗ M_i`.
    pub fn first_step(&self) -> M {
        self.instrument
            .iter()
            .fold(linalg::zeros::<f64>(self.dim().pow(2), self.dim().pow(2)), |acc, m| {
                acc + linalg::sandwich(m.matrix(), &m.matrix().adjoint())
            })
    }

    /// Superoperator of the second step, `Σ Φ_i ∘ (M_i · M_i†)`.
    pub fn second_step(&self) -> M {
        self.instrument.iter().zip(&self.conditionals).fold(
            linalg::zeros::<f64>(self.dim().pow(2), self.dim().pow(2)),
            |acc, (m, c)| acc + c.superoperator() * linalg::sandwich(m.matrix(), &m.matrix().adjoint()),
        )
    }
}

/// Residuals of [`verify_representation`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationCheck {
    /// Largest deviation of `Σ M_i X M_i†` from `E1[X]` over matrix units `X`.
    pub first_step_residual: f64,
    /// Largest deviation of `Σ Φ_i[M_i X M_i†]` from `E2[X]` over matrix units.
    pub second_step_residual: f64,
    pub completeness_residual: f64,
    pub conditional_cpt_residual: f64,
    pub accepted: bool,
}

fn basis_residual(a: &M, b: &M, d: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..d * d {
        let mut x = linalg::zeros::<f64>(d, d);
        x[(k % d, k / d)] = re(1.0);
        let v = linalg::vec_op(&x);
        let diff = linalg::unvec((a * &v - b * &v).as_slice(), d);
        worst = worst.max(linalg::frobenius(&diff));
    }
    worst
}

pub fn verify_representation(
    rep: &ClassicalMemoryRepresentation,
    e1: &QuantumChannel<f64>,
    e2: &QuantumChannel<f64>,
    tol: f64,
) -> Result<RepresentationCheck> {
    let d = rep.dim();
    for e in [e1, e2] {
        if e.dim_in() != d || e.dim_out() != d {
            return Err(Error::DimensionMismatch { expected: d, found: e.dim_in() });
        }
    }
    let first_step_residual = basis_residual(&rep.first_step(), &e1.superoperator(), d);
    let second_step_residual = basis_residual(&rep.second_step(), &e2.superoperator(), d);
    let completeness_residual = rep.completeness_residual();
    let conditional_cpt_residual = rep.conditional_cpt_residual();
    let accepted = [first_step_residual, second_step_residual, completeness_residual, conditional_cpt_residual]
        .iter()
        .all(|&r| r <= tol);
    Ok(RepresentationCheck {
        first_step_residual,
        second_step_residual,
        completeness_residual,
        conditional_cpt_residual,
        accepted,
    })
}

/// Coin-flip realisation of the dephasing two-step dynamics: measure
/// `{√(p/2) σx, √(1 − p/2) I}` and undo the flip on heads.
pub fn dephasing_random_unitary_rep(p: f64) -> Result<ClassicalMemoryRepresentation> {
    dephasing_channel(p)?;
    let heads = Operator::new(linalg::sigma_x::<f64>() * re((p / 2.0).sqrt()))?;
    let tails = Operator::new(linalg::identity::<f64>(2) * re((1.0 - p / 2.0).sqrt()))?;
    let flip = QuantumChannel::unitary(linalg::sigma_x())?;
    ClassicalMemoryRepresentation::new(vec![heads, tails], vec![flip, QuantumChannel::identity(2)])
}

/// Realisation of a CP-divisible pair: the Kraus operators of `E1` followed
/// by the intermediate map on every outcome.
pub fn markovian_rep(e1: &QuantumChannel<f64>, e2: &QuantumChannel<f64>) -> Result<ClassicalMemoryRepresentation> {
    let phi = intermediate_map(e1, e2)?.to_channel(CHANNEL_TOL)?;
    let chi = channel::kraus_to_choi(e1)?;
    let kraus = channel::choi_to_kraus(&chi, 1e-12)?;
    let channel::Representation::Kraus(ks) = kraus.representation() else {
        unreachable!("choi_to_kraus returns a Kraus list")
    };
    let conds = vec![phi; ks.len()];
    ClassicalMemoryRepresentation::new(ks.clone(), conds)
}

/// Rebalanced instrument `Mα = (M1 + M3)/√2`, `Mβ = (M1 − M3)/√2`,
/// `Mγ = M2`, `Mδ = M4` for the thermal amplitude damping Kraus set.
pub fn thermal_alt_instrument(params: &ThermalAdParams<f64>) -> [M; 4] {
    let [m1, m2, m3, m4] = params.kraus();
    let s = re(std::f64::consts::FRAC_1_SQRT_2);
    [(&m1 + &m3) * s, (&m1 - &m3) * s, m2, m4]
}

/// The shared second-step channel of the thermal construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct E0Construction {
    /// Strength parameter of `χ(E0)` fitted by the constraint solve.
    pub p_e0: f64,
    /// Unit-trace Choi matrix of `E0` (not necessarily positive).
    pub choi_e0: DensityMatrix<f64>,
    pub min_choi_eig: f64,
    /// Constraint residual at `p_e0`.
    pub residual: f64,
    pub valid: bool,
}

/// Tolerance on the constraint residual of the thermal construction.
pub const CONSTRUCTION_TOL: f64 = 1e-7;

/// X-shaped unit-trace Choi matrix of `E0` at strength `p`, with the
/// off-diagonal coherence fixed by `p1` and the thermal weights.
pub fn e0_choi(p: f64, p1: f64, params: &ThermalAdParams<f64>) -> M {
    let (zm, zp) = (params.z_minus(), params.z_plus());
    let lambda = p1 * zm * zp + (1.0 - p1).sqrt();
    let coh = (1.0 - p).max(0.0).sqrt() / lambda;
    let mut chi = linalg::zeros::<f64>(4, 4);
    chi[(0, 0)] = re(1.0 - p * zp * zp);
    chi[(1, 1)] = re(p * zm * zm);
    chi[(2, 2)] = re(p * zp * zp);
    chi[(3, 3)] = re(1.0 - p * zm * zm);
    chi[(0, 3)] = re(coh);
    chi[(3, 0)] = re(coh);
    chi * re(0.5)
}

fn thermal_conditionals(e0: &M) -> Vec<QuantumChannel<f64>> {
    let s0 = channel::choi_to_superop(e0, 2, 2);
    let x = linalg::sigma_x::<f64>();
    let y = linalg::sigma_y::<f64>();
    [&s0 * linalg::sandwich(&x, &x), &s0 * linalg::sandwich(&y, &y), s0.clone(), s0]
        .into_iter()
        .map(|s| QuantumChannel::from_superoperator_unchecked(s).expect("4×4 superoperator"))
        .collect()
}

fn construction_residual(p: f64, p1: f64, params2: &ThermalAdParams<f64>, inst: &[M], target: &M) -> f64 {
    let conds = thermal_conditionals(&e0_choi(p, p1, params2));
    let mut s = linalg::zeros::<f64>(4, 4);
    for (m, c) in inst.iter().zip(&conds) {
        s += c.superoperator() * linalg::sandwich(m, &m.adjoint());
    }
    basis_residual(&s, target, 2)
}

/// Explicit classical-memory construction for thermal amplitude damping
/// with a partially rewound second step (`p2 < p1`).
pub fn thermal_ad_classical_rep(p1: f64, p2: f64, beta: f64) -> Result<(ClassicalMemoryRepresentation, E0Construction)> {
    let params1 = ThermalAdParams::new(p1, beta)?;
    let params2 = ThermalAdParams::new(p2, beta)?;
    let inst = thermal_alt_instrument(&params1);
    let target = crate::families::thermal_ad_channel(params2)?.superoperator();
    let f = |p: f64| construction_residual(p, p1, &params2, &inst, &target);
    // Coarse scan, then golden-section refinement around the best node.
    let n = 200;
    let (mut best_k, mut best_v) = (0, f64::INFINITY);
    for k in 0..=n {
        let v = f(k as f64 / n as f64);
        if v < best_v {
            best_k = k;
            best_v = v;
        }
    }
    let (mut a, mut b) = ((best_k.max(1) - 1) as f64 / n as f64, ((best_k + 1).min(n)) as f64 / n as f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (p_e0, residual) = [(best_k as f64 / n as f64, best_v), (0.5 * (a + b), f(0.5 * (a + b)))]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("two candidates");
    if residual > CONSTRUCTION_TOL {
        return Err(Error::NoSolution { residual });
    }
    let chi = e0_choi(p_e0, p1, &params2);
    let min_choi_eig = linalg::eigvalsh(&chi)[0];
    let conds = thermal_conditionals(&chi);
    let ops = inst.into_iter().map(Operator::new).collect::<Result<Vec<_>>>()?;
    let rep = ClassicalMemoryRepresentation::new_unchecked(ops, conds)?;
    let e0 = E0Construction {
        p_e0,
        choi_e0: DensityMatrix::from_matrix_unchecked(chi),
        min_choi_eig,
        residual,
        valid: min_choi_eig >= -1e-9,
    };
    Ok((rep, e0))
}

/// Smallest `p2` in `[0, p1]` at which the thermal construction stays CP,
/// located by bisection on the sign of the minimal `χ(E0)` eigenvalue.
pub fn classical_validity_boundary(p1: f64, beta: f64, bisect_tol: f64) -> Result<f64> {
    let min_eig = |p2: f64| thermal_ad_classical_rep(p1, p2, beta).map(|(_, e)| e.min_choi_eig);
    let (mut lo, mut hi) = (0.0, p1);
    let (flo, fhi) = (min_eig(lo)?, min_eig(hi)?);
    if !(flo < -1e-9 && fhi >= -1e-9) {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        if min_eig(mid)? >= -1e-9 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// JSON form of a representation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationDump {
    /// Instrument operators in the plain-text matrix format.
    pub instrument: Vec<String>,
    /// Unit-trace Choi matrices of the conditional channels, same format.
    pub conditional_chois: Vec<String>,
    pub check: Option<RepresentationCheck>,
}

impl RepresentationDump {
    pub fn new(rep: &ClassicalMemoryRepresentation, check: Option<RepresentationCheck>) -> Result<Self> {
        Ok(Self {
            instrument: rep.instrument().iter().map(|m| m.to_text()).collect(),
            conditional_chois: rep
                .conditionals()
                .iter()
                .map(|c| Operator::new(c.choi_matrix()).map(|o| o.to_text()))
                .collect::<Result<_>>()?,
            check,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::thermal_ad_channel;

    #[test]
    fn dephasing_rep_verifies() {
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            let rep = dephasing_random_unitary_rep(p).unwrap();
            let chk = verify_representation(&rep, &dephasing_channel(p).unwrap(), &QuantumChannel::identity(2), 1e-10).unwrap();
            assert!(chk.accepted, "{chk:?}");
        }
    }

    #[test]
    fn alternative_instrument_is_equivalent() {
        let params = ThermalAdParams::new(0.7, 0.9).unwrap();
        let alt: Vec<_> = thermal_alt_instrument(&params).into_iter().map(|m| Operator::new(m).unwrap()).collect();
        let s = QuantumChannel::from_kraus(alt).unwrap().superoperator();
        let t = thermal_ad_channel(params).unwrap().superoperator();
        assert!(linalg::max_abs(&(s - t)) < 1e-12);
    }

    #[test]
    fn construction_at_markov_boundary_is_valid() {
        let (rep, e0) = thermal_ad_classical_rep(0.9, 0.9, 0.51).unwrap();
        assert!(e0.valid);
        assert!((e0.p_e0 - 0.9).abs() < 1e-6);
        let e1 = thermal_ad_channel(ThermalAdParams::new(0.9, 0.51).unwrap()).unwrap();
        let chk = verify_representation(&rep, &e1, &e1, 1e-7).unwrap();
        assert!(chk.accepted, "{chk:?}");
    }
}
