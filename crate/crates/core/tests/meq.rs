use memwit::linalg;
use memwit::meq::{self, MemoryQubitModel, TimeLocalGksl};
use memwit::operator::Operator;

fn population_excited(s: &memwit::scalar::CMatrix<f64>) -> f64 {
    // Start from |1⟩⟨1| and read the |1⟩ population.
    let rho = linalg::projector::<f64>(&linalg::ket(2, 1));
    let out = linalg::unvec((s * linalg::vec_op(&rho)).as_slice(), 2);
    out[(1, 1)].re
}

#[test]
fn zero_rates_give_identity() {
    let g = TimeLocalGksl::constant(&[0.0], vec![Operator::new(linalg::sigma_minus()).unwrap()]).unwrap();
    let fam = meq::solve_propagator(&g, &meq::uniform_grid(3.0, 6), 1e-10, 1e-12).unwrap();
    for i in 0..fam.len() {
        let d = fam.superoperator(i) - linalg::identity::<f64>(4);
        assert!(linalg::frobenius(&d) < 1e-12);
    }
}

#[test]
fn constant_damping_decays_exponentially() {
    let kappa = 0.7;
    let g = TimeLocalGksl::constant(&[kappa], vec![Operator::new(linalg::sigma_minus()).unwrap()]).unwrap();
    let grid = meq::uniform_grid(5.0, 50);
    let fam = meq::solve_propagator(&g, &grid, 1e-10, 1e-12).unwrap();
    for (i, &t) in grid.iter().enumerate() {
        assert!((population_excited(fam.superoperator(i)) - (-kappa * t).exp()).abs() < 1e-9);
    }
    let gen = meq::extract_canonical_generator(&fam, 2.5).unwrap();
    assert!((gen.rate_along(&linalg::sigma_minus()) - kappa).abs() < 1e-6);
    assert!(gen.reconstruction_error < 1e-6);
}

#[test]
fn zero_temperature_ode_matches_quadrature() {
    // Population of |1⟩ decays as exp(−∫ 2γ−) = c(t)².
    let g = meq::build_nmad_gksl(1.0, 1.0, None).unwrap();
    let grid = meq::uniform_grid(1.0, 20);
    let fam = meq::solve_propagator(&g, &grid, 1e-11, 1e-13).unwrap();
    let n = 2000;
    for (i, &t) in grid.iter().enumerate() {
        let h = t / n as f64;
        let mut integral = 0.0;
        for k in 0..n {
            let s = (k as f64 + 0.5) * h;
            integral += 2.0 * meq::nmad_rate(s, 1.0, 1.0).unwrap() * h;
        }
        let pop = population_excited(fam.superoperator(i));
        assert!((pop - (-integral).exp()).abs() < 1e-6, "t={t}");
        let c = meq::nmad_amplitude(t, 1.0, 1.0);
        assert!((pop - c * c).abs() < 1e-8);
    }
}

#[test]
fn embedding_zero_temperature_limit_matches_closed_form() {
    let grid = meq::uniform_grid(6.0, 120);
    let red = meq::thermal_embedding_reduce(1.0, 1.0, 50.0, &grid).unwrap();
    assert_eq!(red.gamma_minus[0], 0.0);
    assert_eq!(red.gamma_plus[0], 0.0);
    let mut checked = 0;
    for (i, &t) in grid.iter().enumerate() {
        if red.pole_times.iter().any(|&p| (p - t).abs() < 0.1) || red.gamma_minus[i].is_nan() {
            continue;
        }
        let closed = meq::nmad_rate(t, 1.0, 1.0).unwrap();
        assert!((red.gamma_minus[i] / 2.0 - closed).abs() < 1e-4 * (1.0 + closed.abs()), "t={t}");
        assert!(red.gamma_plus[i].abs() < 1e-4);
        checked += 1;
    }
    assert!(checked > 80);
}

#[test]
fn thermal_embedding_has_poles_and_sign_changes() {
    let grid = meq::uniform_grid(12.0, 600);
    let red = meq::thermal_embedding_reduce(1.0, 1.0, 3.66, &grid).unwrap();
    let model = MemoryQubitModel::new(1.0, 1.0, 3.66).unwrap();
    assert!(red.sign_changes[0] >= 2 && red.sign_changes[1] >= 2);
    let poles = red.confirmed_poles(&model, 1e-4);
    assert!(!poles.is_empty());
    assert!((poles[0] - 1.9).abs() < 0.2, "{poles:?}");
    for i in 1..grid.len() {
        let (g, p) = (red.gamma_minus[i], red.gamma_plus[i]);
        if g.is_finite() && p.is_finite() && g.abs() > 1e-6 {
            assert!((p / g - (-3.66f64).exp()).abs() < 1e-6);
        }
    }
}

#[test]
fn damp_flip_rates_round_trip_and_cp() {
    let kappa = 1.0;
    let g = meq::build_damp_flip_gksl(kappa).unwrap();
    let grid = meq::uniform_grid(10.0, 2000);
    let fam = meq::solve_propagator(&g, &grid, 1e-12, 1e-14).unwrap();
    for rep in fam.validate(1e-6) {
        assert!(rep.is_cpt(), "{rep:?}");
    }
    for &t in &[0.05, 0.5, 1.0, 2.0, 4.0] {
        let gen = meq::extract_canonical_generator(&fam, t).unwrap();
        let g1 = gen.rate_along(&linalg::sigma_minus()) / 2.0;
        let g2 = gen.rate_along(&linalg::sigma_z()) / 2.0;
        assert!((g1 - meq::damp_flip_gamma1(t, kappa)).abs() < 1e-5, "t={t} g1={g1}");
        assert!((g2 - meq::damp_flip_gamma2(t, kappa)).abs() < 1e-5, "t={t} g2={g2}");
        let h = gen.hamiltonian.matrix();
        assert!(linalg::frobenius(h) < 1e-6);
    }
}
