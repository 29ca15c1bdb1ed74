//! Quantum-memory witness: a first-step Choi state whose assisted
//! entanglement falls below the second-step Choi concurrence rules out every
//! classical-memory realisation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, QuantumChannel};
use crate::entanglement::{pure_state_concurrence, WoottersSpectrum};
use crate::error::{Error, Result};
use crate::families::{thermal_ad_channel, ThermalAdParams};
use crate::linalg;
use crate::meq::{choi_series, ChoiPoint, PropagatorFamily};
use crate::scalar::{CMatrix, CVector};

/// Margin a certificate must clear.
pub const DEFAULT_DECISION_TOL: f64 = 1e-7;

/// CPT tolerance applied to witness inputs.
pub const WITNESS_CPT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    QuantumMemoryCertified,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// `C♯[χ1]`.
    pub c_assist_first: f64,
    /// `C[χ2]`.
    pub c_form_second: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

impl WitnessReport {
    pub fn from_values(c_assist_first: f64, c_form_second: f64, decision_tol: f64) -> Self {
        let margin = c_form_second - c_assist_first;
        let verdict = if margin > decision_tol { Verdict::QuantumMemoryCertified } else { Verdict::Inconclusive };
        Self { c_assist_first, c_form_second, margin, verdict }
    }

    pub fn certified(&self) -> bool {
        self.verdict == Verdict::QuantumMemoryCertified
    }
}

fn require_cpt(ch: &QuantumChannel<f64>) -> Result<()> {
    let rep = channel::validate_cpt(ch, WITNESS_CPT_TOL);
    if !rep.is_cpt() {
        return Err(Error::NotCpt { tp_residual: rep.tp_residual, min_choi_eig: rep.min_choi_eig });
    }
    Ok(())
}

/// Compares `C♯[χ(E1)]` with `C[χ(E2)]` for two CPT qubit channels.
pub fn evaluate_witness(e1: &QuantumChannel<f64>, e2: &QuantumChannel<f64>, decision_tol: f64) -> Result<WitnessReport> {
    for ch in [e1, e2] {
        if ch.dim_in() != 2 || ch.dim_out() != 2 {
            return Err(Error::NotAQubitChannel { dim: ch.dim_in().max(ch.dim_out()) });
        }
        require_cpt(ch)?;
    }
    let a = WoottersSpectrum::of_matrix(&linalg::hermitian_part(&e1.choi_matrix())).assistance();
    let c = WoottersSpectrum::of_matrix(&linalg::hermitian_part(&e2.choi_matrix())).concurrence();
    Ok(WitnessReport::from_values(a, c, decision_tol))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub p2: f64,
    pub report: WitnessReport,
}

/// Witness margin along the thermal amplitude damping family with the first
/// step fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterScan {
    pub p1: f64,
    pub beta: f64,
    pub points: Vec<ScanPoint>,
    /// Values of `p2` where the margin changes sign, bisected to [`SCAN_BISECT_TOL`].
    pub crossings: Vec<f64>,
}

impl ParameterScan {
    /// Grid point of largest margin.
    pub fn argmax(&self) -> Option<&ScanPoint> {
        self.points.iter().max_by(|a, b| a.report.margin.total_cmp(&b.report.margin))
    }
}

pub const SCAN_BISECT_TOL: f64 = 1e-4;

/// Margin `C[χ(E_{p2})] − C♯[χ(E_{p1})]` for thermal amplitude damping.
pub fn thermal_margin(p1: f64, p2: f64, beta: f64) -> Result<WitnessReport> {
    let e1 = thermal_ad_channel(ThermalAdParams::new(p1, beta)?)?;
    let e2 = thermal_ad_channel(ThermalAdParams::new(p2, beta)?)?;
    evaluate_witness(&e1, &e2, DEFAULT_DECISION_TOL)
}

/// Scans `p2` over `p2_grid` and bisects each sign change of the margin.
pub fn parameter_scan(p1: f64, beta: f64, p2_grid: &[f64]) -> Result<ParameterScan> {
    ThermalAdParams::new(p1, beta)?;
    let points: Vec<ScanPoint> = p2_grid
        .par_iter()
        .map(|&p2| Ok(ScanPoint { p2, report: thermal_margin(p1, p2, beta)? }))
        .collect::<Result<_>>()?;
    let mut crossings = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0].report.margin, w[1].report.margin);
        if a == 0.0 || a.signum() == b.signum() {
            continue;
        }
        let (mut lo, mut hi) = (w[0].p2, w[1].p2);
        while (hi - lo).abs() > SCAN_BISECT_TOL {
            let mid = 0.5 * (lo + hi);
            let m = thermal_margin(p1, mid, beta)?.margin;
            if m.signum() == a.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossings.push(0.5 * (lo + hi));
    }
    Ok(ParameterScan { p1, beta, points, crossings })
}

/// Best pair of grid times for the witness on a continuous family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePairWitness {
    pub t1: f64,
    pub t2: f64,
    pub margin: f64,
    pub report: WitnessReport,
}

/// Maximises `C[χ(t2)] − C♯[χ(t1)]` over grid pairs `t1 < t2`.
pub fn time_pair_scan(family: &PropagatorFamily, decision_tol: f64) -> Result<TimePairWitness> {
    if family.len() < 3 {
        return Err(Error::InvalidGrid("time pair scan needs at least 3 grid times".into()));
    }
    let series = choi_series(family)?;
    Ok(best_time_pair(&series, decision_tol))
}

/// [`time_pair_scan`] on a precomputed Choi series (at least two points).
pub fn best_time_pair(series: &[ChoiPoint], decision_tol: f64) -> TimePairWitness {
    let mut best_i = 0;
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 1..series.len() {
        if series[j - 1].assistance < series[best_i].assistance {
            best_i = j - 1;
        }
        let m = series[j].concurrence - series[best_i].assistance;
        if best.is_none_or(|b| m > b.2) {
            best = Some((best_i, j, m));
        }
    }
    let (i, j, _) = best.expect("series has at least two points");
    let report = WitnessReport::from_values(series[i].assistance, series[j].concurrence, decision_tol);
    TimePairWitness { t1: series[i].t, t2: series[j].t, margin: report.margin, report }
}

/// Margins of every grid pair `t1 < t2`, for heatmaps.
pub fn time_pair_margins(series: &[ChoiPoint]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for (i, a) in series.iter().enumerate() {
        for b in &series[i + 1..] {
            out.push((a.t, b.t, b.concurrence - a.assistance));
        }
    }
    out
}

/// Compares the lowest assisted concurrence on the grid with the largest
/// concurrence reached after the concurrence's first local minimum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevivalCheck {
    pub first_minimum_t: Option<f64>,
    pub min_assistance: f64,
    pub max_revival_concurrence: f64,
    pub holds: bool,
}

pub fn revival_dominance(series: &[ChoiPoint]) -> RevivalCheck {
    let min_assistance = series.iter().map(|p| p.assistance).fold(f64::INFINITY, f64::min);
    let first_min = (1..series.len().saturating_sub(1))
        .find(|&k| series[k].concurrence <= series[k - 1].concurrence && series[k].concurrence < series[k + 1].concurrence);
    let max_revival_concurrence = first_min.map_or(f64::NEG_INFINITY, |k| {
        series[k..].iter().map(|p| p.concurrence).fold(f64::NEG_INFINITY, f64::max)
    });
    RevivalCheck {
        first_minimum_t: first_min.map(|k| series[k].t),
        min_assistance,
        max_revival_concurrence,
        holds: min_assistance >= max_revival_concurrence,
    }
}

/// Stations of the inequality chain behind the witness for one instrument
/// `{M_i}` of rank-one Kraus operators and conditional channels `{Φ_i}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofChain {
    /// `C♯[χ1]` with `χ1 = Σ M_i ⊗ 1 |φ+⟩⟨φ+| M_i† ⊗ 1`.
    pub assistance_first: f64,
    /// `Σ p_i C(ψ_i)` for the pure branches `ψ_i ∝ (M_i ⊗ 1)|φ+⟩`.
    pub pure_branches: f64,
    /// `Σ p_i C((Φ_i ⊗ id)ψ_i)`.
    pub evolved_branches: f64,
    /// `C[χ2]` with `χ2 = Σ p_i (Φ_i ⊗ id) ψ_i`.
    pub form_second: f64,
}

impl ProofChain {
    pub fn holds(&self, tol: f64) -> bool {
        self.assistance_first + tol >= self.pure_branches
            && self.pure_branches + tol >= self.evolved_branches
            && self.evolved_branches + tol >= self.form_second
    }
}

pub fn proof_chain(instrument: &[CMatrix<f64>], conditionals: &[QuantumChannel<f64>]) -> Result<ProofChain> {
    if instrument.len() != conditionals.len() {
        return Err(Error::DimensionMismatch { expected: instrument.len(), found: conditionals.len() });
    }
    let mut phi = CVector::<f64>::zeros(4);
    phi[0] = num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    phi[3] = phi[0];
    let id = linalg::identity::<f64>(2);
    let mut chi1 = linalg::zeros::<f64>(4, 4);
    let mut chi2 = linalg::zeros::<f64>(4, 4);
    let (mut pure, mut evolved) = (0.0, 0.0);
    for (m, cond) in instrument.iter().zip(conditionals) {
        let v = linalg::kron(m, &id) * &phi;
        let p = v.norm_squared();
        chi1 += linalg::projector(&v);
        if p < 1e-15 {
            continue;
        }
        let psi = &v / num_complex::Complex64::new(p.sqrt(), 0.0);
        pure += p * pure_state_concurrence(&psi);
        let rho = apply_on_system(&cond.superoperator(), &linalg::projector(&psi));
        evolved += p * WoottersSpectrum::of_matrix(&rho).concurrence();
        chi2 += rho * num_complex::Complex64::new(p, 0.0);
    }
    Ok(ProofChain {
        assistance_first: WoottersSpectrum::of_matrix(&chi1).assistance(),
        pure_branches: pure,
        evolved_branches: evolved,
        form_second: WoottersSpectrum::of_matrix(&chi2).concurrence(),
    })
}

/// `(Φ ⊗ id)ρ` on a system-first two-qubit operator, `Φ` given by its
/// 4×4 superoperator.
pub(crate) fn apply_on_system(phi: &CMatrix<f64>, rho: &CMatrix<f64>) -> CMatrix<f64> {
    // Expand ρ = Σ_{ab} X_ab ⊗ |a⟩⟨b| and act on the system blocks.
    let mut out = linalg::zeros::<f64>(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            let mut x = linalg::zeros::<f64>(2, 2);
            for s in 0..2 {
                for r in 0..2 {
                    x[(s, r)] = rho[(s * 2 + a, r * 2 + b)];
                }
            }
            let y = linalg::unvec((phi * linalg::vec_op(&x)).as_slice(), 2);
            for s in 0..2 {
                for r in 0..2 {
                    out[(s * 2 + a, r * 2 + b)] += y[(s, r)];
                }
            }
        }
    }
    out
}

/// JSON form of a witness evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub c_assist_t1: f64,
    pub c_form_t2: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub params: BTreeMap<String, f64>,
}

impl WitnessJson {
    pub fn new(report: &WitnessReport, times: Option<(f64, f64)>, params: BTreeMap<String, f64>) -> Self {
        Self {
            c_assist_t1: report.c_assist_first,
            c_form_t2: report.c_form_second,
            margin: report.margin,
            verdict: report.verdict,
            t1: times.map(|t| t.0),
            t2: times.map(|t| t.1),
            params,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{damping_channel, dephasing_channel};

    #[test]
    fn toy_damping_full_strength_certifies() {
        let r = evaluate_witness(&damping_channel(1.0).unwrap(), &QuantumChannel::identity(2), DEFAULT_DECISION_TOL).unwrap();
        assert!(r.c_assist_first.abs() < 1e-12);
        assert!((r.c_form_second - 1.0).abs() < 1e-12);
        assert!(r.certified());
    }

    #[test]
    fn identity_pair_is_inconclusive() {
        let id = QuantumChannel::<f64>::identity(2);
        let r = evaluate_witness(&id, &id, DEFAULT_DECISION_TOL).unwrap();
        assert!(r.margin.abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn rejects_non_cpt_input() {
        let k = crate::operator::Operator::new(linalg::sigma_minus::<f64>()).unwrap();
        let bad = QuantumChannel::from_kraus_unchecked(vec![k]).unwrap();
        let id = QuantumChannel::<f64>::identity(2);
        assert!(matches!(evaluate_witness(&bad, &id, 1e-7), Err(Error::NotCpt { .. })));
    }

    #[test]
    fn dephasing_is_inconclusive() {
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            let r = evaluate_witness(&dephasing_channel(p).unwrap(), &QuantumChannel::identity(2), 1e-7).unwrap();
            assert!((r.c_assist_first - 1.0).abs() < 1e-9);
            assert_eq!(r.verdict, Verdict::Inconclusive);
        }
    }

    #[test]
    fn lifting_reproduces_choi_state() {
        let ch = damping_channel(0.3).unwrap();
        let mut phi = CVector::<f64>::zeros(4);
        phi[0] = num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        phi[3] = phi[0];
        let out = apply_on_system(&ch.superoperator(), &linalg::projector(&phi));
        assert!(linalg::max_abs(&(out - ch.choi_matrix())) < 1e-14);
    }

    #[test]
    fn best_pair_uses_prefix_minimum() {
        let pt = |t, c, a| ChoiPoint { t, concurrence: c, assistance: a, min_choi_eig: 0.0 };
        let s = [pt(0.0, 1.0, 1.0), pt(1.0, 0.1, 0.2), pt(2.0, 0.5, 0.6), pt(3.0, 0.4, 0.9)];
        let w = best_time_pair(&s, 1e-7);
        assert_eq!((w.t1, w.t2), (1.0, 2.0));
        assert!((w.margin - 0.3).abs() < 1e-15);
    }
}
