use memwit::channel::compose_maps;
use memwit::families::{self, ToyKind, ToyModelParams};
use memwit::linalg;
use memwit::meq::{self, PropagatorFamily, TimeLocalGksl};
use memwit::nonmarkov::*;
use memwit::operator::{DensityMatrix, Operator};
use memwit::QuantumChannel;

fn ket0() -> DensityMatrix<f64> {
    DensityMatrix::basis(2, 0)
}

fn ket1() -> DensityMatrix<f64> {
    DensityMatrix::basis(2, 1)
}

fn toy_family(kind: ToyKind, p: f64) -> PropagatorFamily {
    let dynamics = families::toy_dilation_dynamics(ToyModelParams::new(kind, p).unwrap()).unwrap();
    PropagatorFamily::from_dynamics(&dynamics).unwrap()
}

fn markov_damping_family() -> PropagatorFamily {
    let g = TimeLocalGksl::constant(&[0.8], vec![Operator::new(linalg::sigma_minus()).unwrap()]).unwrap();
    meq::solve_propagator(&g, &meq::uniform_grid(4.0, 40), 1e-10, 1e-12).unwrap()
}

#[test]
fn intermediate_map_of_identity_first_step_is_second_step() {
    let e2 = families::damping_channel(0.3).unwrap();
    let m = intermediate_map(&QuantumChannel::identity(2), &e2).unwrap();
    assert!(linalg::max_abs(&(m.superoperator() - e2.superoperator())) < 1e-12);
}

#[test]
fn toy_damping_intermediate_map_is_not_cp() {
    let e1 = families::damping_channel(0.5).unwrap();
    let m = intermediate_map(&e1, &QuantumChannel::identity(2)).unwrap();
    assert!(m.min_choi_eig() < 0.0);
    let v = divisibility_class(&e1, &QuantumChannel::identity(2), 1e-9, 642).unwrap();
    assert_eq!(v.class, DivisibilityClass::Indivisible);
    assert!(v.min_output_eig < 0.0);
}

#[test]
fn monotone_damping_pair_is_cp_divisible() {
    // damp(p2) = damp(q) ∘ damp(p1) with 1 − p2 = (1 − q)(1 − p1).
    let (p1, p2) = (0.3, 0.6);
    let e1 = families::damping_channel(p1).unwrap();
    let e2 = families::damping_channel(p2).unwrap();
    let q = 1.0 - (1.0 - p2) / (1.0 - p1);
    let expect = families::damping_channel(q).unwrap();
    let m = intermediate_map(&e1, &e2).unwrap();
    assert!(linalg::max_abs(&(m.superoperator() - expect.superoperator())) < 1e-12);
    assert_eq!(divisibility_class(&e1, &e2, 1e-9, 642).unwrap().class, DivisibilityClass::CPDivisible);
}

#[test]
fn singular_first_step_is_reported() {
    let e1 = families::damping_channel(1.0).unwrap();
    assert!(matches!(intermediate_map(&e1, &QuantumChannel::identity(2)), Err(memwit::Error::SingularMap { .. })));
}

#[test]
fn identity_pair_is_cp_divisible() {
    let id = QuantumChannel::identity(2);
    assert_eq!(divisibility_class(&id, &id, 1e-9, 642).unwrap().class, DivisibilityClass::CPDivisible);
}

#[test]
fn verdicts_stable_under_tolerance_halving() {
    let cases = [
        (families::damping_channel(0.5).unwrap(), QuantumChannel::identity(2)),
        (families::damping_channel(0.3).unwrap(), families::damping_channel(0.6).unwrap()),
        (families::dephasing_channel(0.4).unwrap(), QuantumChannel::identity(2)),
    ];
    for (a, b) in &cases {
        let v1 = divisibility_class(a, b, 1e-9, 642).unwrap().class;
        let v2 = divisibility_class(a, b, 5e-10, 642).unwrap().class;
        assert_eq!(v1, v2);
    }
}

#[test]
fn markov_damping_has_no_blp_increase() {
    let fam = markov_damping_family();
    let blp = blp_flow(&fam, (&ket0(), &ket1())).unwrap();
    assert!(blp.measure < 1e-12);
    let rhp = rhp_flow(&fam).unwrap();
    assert!(rhp.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn toy_dephasing_distance_dips_and_recovers() {
    let p = 0.35;
    let fam = toy_family(ToyKind::Dephase, p);
    // The σx-generated dephasing contracts y and z, so (|0⟩, |1⟩) carries the signal.
    let blp = blp_flow(&fam, (&ket0(), &ket1())).unwrap();
    let expect = [1.0, 1.0 - p, 1.0];
    for (s, e) in blp.sigma.iter().zip(expect) {
        assert!((s - e).abs() < 1e-10, "{:?}", blp.sigma);
    }
    assert!((blp.measure - p).abs() < 1e-10);
    let plus = DensityMatrix::from_bloch([1.0, 0.0, 0.0]).unwrap();
    let minus = DensityMatrix::from_bloch([-1.0, 0.0, 0.0]).unwrap();
    let x = blp_flow(&fam, (&plus, &minus)).unwrap();
    assert!(x.sigma.iter().all(|s| (s - 1.0).abs() < 1e-10));
}

#[test]
fn toy_damping_rhp_and_volume_revive() {
    let p = 0.6;
    let fam = toy_family(ToyKind::Damp, p);
    let rhp = rhp_flow(&fam).unwrap();
    assert!(rhp[1] < rhp[2] && (rhp[2] - 1.0).abs() < 1e-10);
    let vol = volume_flow(&fam).unwrap();
    assert!((vol[1] - (1.0 - p).powi(2)).abs() < 1e-10);
    assert!((vol[2] - 1.0).abs() < 1e-10);
}

#[test]
fn volume_endpoints() {
    let full_depol = QuantumChannel::from_affine(nalgebra::Matrix3::zeros(), nalgebra::Vector3::zeros()).unwrap();
    let dyn_ = memwit::Dynamics::new(vec![full_depol], None).unwrap();
    let vol = volume_flow(&PropagatorFamily::from_dynamics(&dyn_).unwrap()).unwrap();
    assert!((vol[0] - 1.0).abs() < 1e-12 && vol[1].abs() < 1e-12);
}

#[test]
fn zero_temperature_nmad_has_blp_revivals() {
    let grid = meq::uniform_grid(8.0, 160);
    let fam = meq::nmad_propagator(1.0, 1.0, &grid).unwrap();
    let blp = blp_flow(&fam, (&ket0(), &ket1())).unwrap();
    assert!(blp.measure > 1e-3, "N = {}", blp.measure);
}

#[test]
fn cp_divisible_families_obey_implication_chain() {
    // CP-divisible steps must come with no BLP increase and monotone RHP
    // and volume curves.
    let mut families = vec![markov_damping_family()];
    let e = families::dephasing_channel(0.2).unwrap();
    let steps: Vec<QuantumChannel> = (1..=5)
        .scan(QuantumChannel::identity(2), |acc, _| {
            *acc = compose_maps(&e, acc).unwrap();
            Some(acc.clone())
        })
        .collect();
    families.push(PropagatorFamily::from_dynamics(&memwit::Dynamics::new(steps, None).unwrap()).unwrap());
    for fam in &families {
        let icm = intermediate_choi_series(fam);
        assert!(icm[1..].iter().all(|&x| x >= -1e-9), "{icm:?}");
        let plus = DensityMatrix::from_bloch([1.0, 0.0, 0.0]).unwrap();
        for pair in [(ket0(), ket1()), (plus.clone(), DensityMatrix::from_bloch([-1.0, 0.0, 0.0]).unwrap())] {
            assert!(blp_flow(fam, (&pair.0, &pair.1)).unwrap().measure < 1e-8);
        }
        let rhp = rhp_flow(fam).unwrap();
        assert!(rhp.windows(2).all(|w| w[1] <= w[0] + 1e-8));
        let vol = volume_flow(fam).unwrap();
        assert!(vol.windows(2).all(|w| w[1] <= w[0] + 1e-8));
    }
}

#[test]
fn measure_rows_line_up_with_grid() {
    let fam = toy_family(ToyKind::Damp, 0.5);
    let rows = measure_rows(&fam, (&ket0(), &ket1())).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].min_intermediate_choi_eig.is_nan());
    assert!(rows[2].min_intermediate_choi_eig < 0.0);
}
