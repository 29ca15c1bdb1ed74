//! Parametric channel families: toy dephasing and damping (by Kraus list and
//! by explicit system–environment dilation) and thermal amplitude damping.

use serde::{Deserialize, Serialize};

use crate::channel::{Dynamics, QuantumChannel, CHANNEL_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, sigma_minus, sigma_plus, sigma_x};
use crate::scalar::{cr, CMatrix, Real};

fn check_unit<T: Real>(name: &'static str, p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::ParamOutOfRange { name, value: p.as_f64(), range: "[0, 1]" });
    }
    Ok(())
}

/// Which toy interaction generates the first step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToyKind {
    Dephase,
    Damp,
}

/// Strength of a toy two-step dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct ToyModelParams<T: Real> {
    pub kind: ToyKind,
    pub p: T,
}

impl<T: Real> ToyModelParams<T> {
    pub fn new(kind: ToyKind, p: T) -> Result<Self> {
        check_unit("p", p)?;
        Ok(Self { kind, p })
    }

    /// Dephasing coupling angle `f = ½ arccos(1 − p)`.
    pub fn f(&self) -> T {
        (T::one() - self.p).acos() * T::lit(0.5)
    }

    /// Damping coupling angle `g = arcsin √p`.
    pub fn g(&self) -> T {
        self.p.sqrt().asin()
    }

    /// Strength from a dephasing angle, `p = 1 − cos 2f`.
    pub fn from_f(f: T) -> Result<Self> {
        Self::new(ToyKind::Dephase, T::one() - (f + f).cos())
    }

    /// Strength from a damping angle, `p = sin² g`.
    pub fn from_g(g: T) -> Result<Self> {
        Self::new(ToyKind::Damp, g.sin() * g.sin())
    }

    pub fn first_step_channel(&self) -> Result<QuantumChannel<T>> {
        match self.kind {
            ToyKind::Dephase => dephasing_channel(self.p),
            ToyKind::Damp => damping_channel(self.p),
        }
    }
}

/// Thermal amplitude damping parameters. `beta` may be `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct ThermalAdParams<T: Real> {
    pub p: T,
    pub beta: T,
}

impl<T: Real> ThermalAdParams<T> {
    pub fn new(p: T, beta: T) -> Result<Self> {
        check_unit("p", p)?;
        if !(beta >= T::zero()) {
            return Err(Error::ParamOutOfRange { name: "beta", value: beta.as_f64(), range: "[0, ∞]" });
        }
        Ok(Self { p, beta })
    }

    /// Weight of the emission operators, `1/√(1 + e^{−β})`.
    pub fn z_minus(&self) -> T {
        z_weight(-self.beta)
    }

    /// Weight of the absorption operators, `1/√(1 + e^{β})`.
    pub fn z_plus(&self) -> T {
        z_weight(self.beta)
    }

    /// The four Kraus operators: emission `M1, M2` and absorption `M3, M4`.
    pub fn kraus(&self) -> [CMatrix<T>; 4] {
        let (zm, zp) = (cr(self.z_minus()), cr(self.z_plus()));
        let sp = cr(self.p.sqrt());
        let sq = cr((T::one() - self.p).sqrt());
        let (lo, hi) = (sigma_minus::<T>(), sigma_plus::<T>());
        let n_exc = &hi * &lo;
        let n_gnd = &lo * &hi;
        [
            &lo * (zm * sp),
            (&n_exc * sq + &n_gnd) * zm,
            &hi * (zp * sp),
            (&n_exc + &n_gnd * sq) * zp,
        ]
    }

    /// Bloch-z of the fixed point, `tanh(β/2)` towards the ground state `|0⟩`.
    pub fn fixed_point_z(&self) -> T {
        let zm = self.z_minus();
        let zp = self.z_plus();
        zm * zm - zp * zp
    }
}

fn z_weight<T: Real>(x: T) -> T {
    T::one() / (T::one() + x.exp()).sqrt()
}

/// `ρ ↦ (p/2) σx ρ σx + (1 − p/2) ρ`.
pub fn dephasing_channel<T: Real>(p: T) -> Result<QuantumChannel<T>> {
    check_unit("p", p)?;
    let half = p * T::lit(0.5);
    QuantumChannel::from_kraus_matrices(vec![
        sigma_x::<T>() * cr(half.sqrt()),
        linalg::identity::<T>(2) * cr((T::one() - half).sqrt()),
    ])
}

/// Amplitude damping towards `|0⟩` with Kraus `{√p σ−, √(1−p) σ+σ− + σ−σ+}`.
pub fn damping_channel<T: Real>(p: T) -> Result<QuantumChannel<T>> {
    check_unit("p", p)?;
    let (lo, hi) = (sigma_minus::<T>(), sigma_plus::<T>());
    QuantumChannel::from_kraus_matrices(vec![
        &lo * cr(p.sqrt()),
        &hi * &lo * cr((T::one() - p).sqrt()) + &lo * &hi,
    ])
}

/// Thermal amplitude damping with Kraus `{M1, M2, M3, M4}`.
pub fn thermal_ad_channel<T: Real>(params: ThermalAdParams<T>) -> Result<QuantumChannel<T>> {
    ThermalAdParams::new(params.p, params.beta)?;
    QuantumChannel::from_kraus_matrices(params.kraus().to_vec())
}

/// System–environment unitary of the toy model on `S ⊗ E`.
pub fn toy_unitary<T: Real>(params: &ToyModelParams<T>) -> CMatrix<T> {
    match params.kind {
        ToyKind::Dephase => {
            let x = sigma_x::<T>();
            linalg::unitary_exp(&linalg::kron(&x, &x), params.f())
        }
        ToyKind::Damp => {
            let (lo, hi) = (sigma_minus::<T>(), sigma_plus::<T>());
            let h = linalg::kron(&hi, &lo) + linalg::kron(&lo, &hi);
            linalg::unitary_exp(&h, params.g())
        }
    }
}

/// Channel `ρ ↦ tr_E[U (ρ ⊗ |0⟩⟨0|) U†]` as Kraus operators `⟨e|U|0⟩_E`.
fn reduce_dilation<T: Real>(u: &CMatrix<T>) -> Result<QuantumChannel<T>> {
    let ks = (0..2)
        .map(|e| CMatrix::from_fn(2, 2, |s, s2| u[(s * 2 + e, s2 * 2)]))
        .collect();
    QuantumChannel::from_kraus_matrices(ks)
}

/// Two-step dynamics `(E1, E2)` from `U1` followed by `U2 = U1†`, with the
/// environment qubit starting in `|0⟩`.
pub fn toy_dilation_dynamics<T: Real>(params: ToyModelParams<T>) -> Result<Dynamics<T>> {
    let u1 = toy_unitary(&params);
    let e1 = reduce_dilation(&u1)?;
    let u21 = u1.adjoint() * &u1;
    let e2 = reduce_dilation(&u21)?;
    let tol = T::tolerance(CHANNEL_TOL);
    let id_dev = linalg::max_abs(&(e2.superoperator() - linalg::identity::<T>(4)));
    if id_dev > tol {
        return Err(Error::InvalidChannel(format!("second step deviates from identity by {:e}", id_dev.as_f64())));
    }
    let reference = params.first_step_channel()?;
    let dev = linalg::max_abs(&(e1.superoperator() - reference.superoperator()));
    if dev > tol {
        return Err(Error::InvalidChannel(format!("dilation and Kraus routes differ by {:e}", dev.as_f64())));
    }
    Dynamics::new(vec![e1, e2], None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{kraus_to_choi, qubit_affine_form, validate_cpt};
    use crate::entanglement::concurrence_of_assistance;
    use crate::operator::DensityMatrix;
    use crate::scalar::c;

    fn apply_bloch(ch: &QuantumChannel<f64>, r: [f64; 3]) -> [f64; 3] {
        let rho = DensityMatrix::from_bloch(r).unwrap();
        ch.apply_state(&rho).unwrap().bloch().unwrap()
    }

    /// Affine form from images of the six Pauli eigenstates.
    fn affine_from_eigenstates(ch: &QuantumChannel<f64>) -> ([[f64; 3]; 3], [f64; 3]) {
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for j in 0..3 {
            let mut rp = [0.0; 3];
            rp[j] = 1.0;
            let mut rm = [0.0; 3];
            rm[j] = -1.0;
            let (ip, im) = (apply_bloch(ch, rp), apply_bloch(ch, rm));
            for i in 0..3 {
                a[i][j] = (ip[i] - im[i]) / 2.0;
                b[i] += (ip[i] + im[i]) / 6.0;
            }
        }
        (a, b)
    }

    #[test]
    fn dephasing_affine_form() {
        let p = 0.37;
        let ch = dephasing_channel(p).unwrap();
        let (a, b) = affine_from_eigenstates(&ch);
        let f = qubit_affine_form(&ch).unwrap();
        let diag = [1.0, 1.0 - p, 1.0 - p];
        for i in 0..3 {
            assert!(b[i].abs() < 1e-12 && f.b[i].abs() < 1e-12);
            for j in 0..3 {
                let expect = if i == j { diag[i] } else { 0.0 };
                assert!((a[i][j] - expect).abs() < 1e-12);
                assert!((f.a[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn damping_affine_form() {
        let p = 0.41;
        let ch = damping_channel(p).unwrap();
        let (a, b) = affine_from_eigenstates(&ch);
        let f = qubit_affine_form(&ch).unwrap();
        let s = (1.0 - p).sqrt();
        let diag = [s, s, 1.0 - p];
        let bb = [0.0, 0.0, p];
        for i in 0..3 {
            assert!((b[i] - bb[i]).abs() < 1e-12);
            assert!((f.b[i] - bb[i]).abs() < 1e-12);
            for j in 0..3 {
                let expect = if i == j { diag[i] } else { 0.0 };
                assert!((a[i][j] - expect).abs() < 1e-12);
                assert!((f.a[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_dephasing_matches_x_twirl() {
        let ch = dephasing_channel(1.0).unwrap();
        let rho = DensityMatrix::<f64>::from_bloch([0.2, -0.5, 0.7]).unwrap();
        let x = sigma_x::<f64>();
        let expect = (rho.matrix() + &x * rho.matrix() * &x) * c(0.5, 0.0);
        assert!(linalg::max_abs(&(ch.apply(rho.matrix()) - expect)) < 1e-14);
    }

    #[test]
    fn dephasing_choi_has_unit_assistance() {
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let chi = kraus_to_choi(&dephasing_channel(p).unwrap()).unwrap();
            assert!((concurrence_of_assistance(&chi).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn damping_endpoints() {
        let id = damping_channel(0.0).unwrap();
        assert!(linalg::max_abs(&(id.superoperator() - linalg::identity::<f64>(4))) < 1e-15);
        let full = damping_channel(1.0).unwrap();
        let out = apply_bloch(&full, [0.3, 0.1, -0.8]);
        assert!((out[2] - 1.0).abs() < 1e-14 && out[0].abs() < 1e-14 && out[1].abs() < 1e-14);
        assert!(matches!(damping_channel(1.5), Err(Error::ParamOutOfRange { .. })));
        assert!(dephasing_channel(-0.1).is_err());
    }

    #[test]
    fn thermal_zero_temperature_limit() {
        for &p in &[0.0, 0.3, 0.9, 1.0] {
            let th = thermal_ad_channel(ThermalAdParams::new(p, 50.0).unwrap()).unwrap();
            let d = damping_channel(p).unwrap();
            assert!(linalg::max_abs(&(th.superoperator() - d.superoperator())) < 1e-9);
        }
        let inf = thermal_ad_channel(ThermalAdParams::new(0.4, f64::INFINITY).unwrap()).unwrap();
        let d = damping_channel(0.4).unwrap();
        assert!(linalg::max_abs(&(inf.superoperator() - d.superoperator())) < 1e-15);
    }

    #[test]
    fn thermal_full_strength_infinite_temperature() {
        let ch = thermal_ad_channel(ThermalAdParams::new(1.0, 0.0).unwrap()).unwrap();
        for r in [[0.0, 0.0, 1.0], [0.5, -0.5, 0.1], [0.0, 0.0, -1.0]] {
            let out = apply_bloch(&ch, r);
            assert!(out.iter().all(|x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn thermal_choi_at_full_damping_zero_temperature() {
        let ch = thermal_ad_channel(ThermalAdParams::new(1.0, f64::INFINITY).unwrap()).unwrap();
        let chi = kraus_to_choi(&ch).unwrap();
        // |0⟩⟨0| ⊗ I/2 with the system factor first.
        let expect = linalg::kron(&linalg::projector(&linalg::ket::<f64>(2, 0)), &(linalg::identity::<f64>(2) * c(0.5, 0.0)));
        assert!(linalg::max_abs(&(chi.matrix() - expect)) < 1e-15);
    }

    #[test]
    fn thermal_fixed_point() {
        let params = ThermalAdParams::new(0.6, 0.51).unwrap();
        let ch = thermal_ad_channel(params).unwrap();
        let z = params.fixed_point_z();
        assert!((z - (0.255f64).tanh()).abs() < 1e-12);
        let out = apply_bloch(&ch, [0.0, 0.0, z]);
        assert!((out[2] - z).abs() < 1e-12);
    }

    #[test]
    fn thermal_weights_normalised() {
        for &b in &[0.0, 0.51, 3.66, 20.0, 800.0, f64::INFINITY] {
            let p = ThermalAdParams::new(0.5, b).unwrap();
            assert!((p.z_minus().powi(2) + p.z_plus().powi(2) - 1.0).abs() < 1e-12);
        }
        assert!(ThermalAdParams::new(0.5, -1.0).is_err());
        assert!(ThermalAdParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn thermal_family_is_cpt_on_grid() {
        for i in 0..20 {
            for j in 0..20 {
                let p = i as f64 / 19.0;
                let beta = j as f64 * 0.5;
                let ch = thermal_ad_channel(ThermalAdParams::new(p, beta).unwrap()).unwrap();
                assert!(validate_cpt(&ch, 1e-10).is_cpt());
            }
        }
    }

    #[test]
    fn toy_angles() {
        let t = ToyModelParams::from_g(0.89f64).unwrap();
        assert!((t.p - 0.89f64.sin().powi(2)).abs() < 1e-15);
        assert!((t.g() - 0.89).abs() < 1e-12);
        let d = ToyModelParams::from_f(0.64f64).unwrap();
        assert!((d.f() - 0.64).abs() < 1e-12);
    }

    #[test]
    fn toy_dilation_trivial_strength() {
        for kind in [ToyKind::Dephase, ToyKind::Damp] {
            let dynm = toy_dilation_dynamics(ToyModelParams::new(kind, 0.0).unwrap()).unwrap();
            for m in dynm.maps() {
                assert!(linalg::max_abs(&(m.superoperator() - linalg::identity::<f64>(4))) < 1e-14);
            }
        }
    }
}
