//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::Instant;

use memwit::channel::{self, ReprKind};
use memwit::classical::{
    classical_validity_boundary, dephasing_random_unitary_rep, markovian_rep, thermal_ad_classical_rep, verify_representation,
};
use memwit::entanglement::{coa_oracle, concurrence, concurrence_of_assistance};
use memwit::families::{self, ThermalAdParams, ToyKind, ToyModelParams};
use memwit::linalg;
use memwit::meq::{self, MemoryQubitModel};
use memwit::nonmarkov::{divisibility_class, DivisibilityClass};
use memwit::operator::DensityMatrix;
use memwit::random::*;
use memwit::trajectory::{self, DampFlipScheme};
use memwit::witness::*;
use memwit::{QuantumChannel, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = DEFAULT_DECISION_TOL;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn tad(p: f64, beta: f64) -> Result<QuantumChannel> {
    families::thermal_ad_channel(ThermalAdParams::new(p, beta)?)
}

fn ac1() -> Result<Outcome> {
    let (p1, beta) = (0.9, 0.51);
    let grid: Vec<f64> = (0..200).map(|k| p1 * k as f64 / 199.0).collect();
    let start = Instant::now();
    let scan = parameter_scan(p1, beta, &grid)?;
    let boundary = classical_validity_boundary(p1, beta, 1e-4);
    let secs = start.elapsed().as_secs_f64();
    let crossing = scan.crossings.first().copied();
    let crossing_ok = scan.crossings.len() == 1 && crossing.is_some_and(|c| (c - 0.11).abs() <= 0.01);
    let boundary_ok = boundary.as_ref().is_ok_and(|b| (b - 0.86).abs() <= 0.01);
    let b_str = match &boundary {
        Ok(b) => format!("{b:.4}"),
        Err(e) => format!("error ({e})"),
    };
    outcome(
        crossing_ok && boundary_ok && secs < 30.0,
        format!("margin sign change at p2 = {crossing:.4?} (target 0.11 ± 0.01), CP boundary at p2 = {b_str} (target 0.86 ± 0.01), {secs:.1} s"),
    )
}

fn ac2() -> Result<Outcome> {
    let start = Instant::now();
    let grid = meq::uniform_grid(10.0, 1000);
    let fam = meq::nmad_propagator(1.0, 1.0, &grid)?;
    let series = meq::choi_series(&fam)?;
    let gap = series.iter().map(|p| (p.assistance - p.concurrence).abs()).fold(0.0, f64::max);
    let best = best_time_pair(&series, TOL);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        gap < 1e-9 && best.margin > 0.0 && secs < 10.0,
        format!(
            "max |C♯ − C| = {gap:.2e}, best pair t1 = {:.2}, t2 = {:.2}, margin = {:.4}, {secs:.1} s",
            best.t1, best.t2, best.margin
        ),
    )
}

fn ac3() -> Result<Outcome> {
    let beta = 3.66;
    let grid = meq::uniform_grid(12.0, 600);
    let red = meq::thermal_embedding_reduce(1.0, 1.0, beta, &grid)?;
    let series = meq::choi_series(&red.family)?;
    let rev = revival_dominance(&series);
    let best = best_time_pair(&series, TOL);
    let model = MemoryQubitModel::new(1.0, 1.0, beta)?;
    let poles = red.confirmed_poles(&model, 1e-4);
    let flags = red.sign_changes[0] >= 1 && red.sign_changes[1] >= 1 && !poles.is_empty();
    outcome(
        rev.holds && !best.report.certified() && flags,
        format!(
            "min C♯ past first minimum = {:.4} vs max revived C = {:.4}, best pair margin = {:.2e}, sign changes γ−/γ+ = {}/{}, poles at {:.2?}",
            rev.min_assistance, rev.max_revival_concurrence, best.margin, red.sign_changes[0], red.sign_changes[1], poles
        ),
    )
}

fn ac4() -> Result<Outcome> {
    let kappa = 1.0;
    let scheme = DampFlipScheme::new(kappa)?;
    let grid: Vec<f64> = (0..=99).map(|k| 0.05 + k as f64 * 0.05).collect();
    let gens = trajectory::derive_master_equation(&scheme, &grid, 2000)?;
    let mut worst: f64 = 0.0;
    let mut negative_after = true;
    let mut g1_at_crit = f64::NAN;
    for g in &gens {
        let t = g.time;
        let g1 = g.rate_along(&linalg::sigma_minus()) / 2.0;
        let g2 = g.rate_along(&linalg::sigma_z()) / 2.0;
        worst = worst.max((g1 - meq::damp_flip_gamma1(t, kappa)).abs()).max((g2 - meq::damp_flip_gamma2(t, kappa)).abs());
        if (t - 1.0 / kappa).abs() < 1e-12 {
            g1_at_crit = g1;
        }
        if t > 1.0 / kappa + 1e-9 && g1 >= 0.0 {
            negative_after = false;
        }
    }
    let e = |t| trajectory::exact_map(&scheme, t, 2000);
    let early = divisibility_class(&e(0.3)?, &e(0.6)?, 1e-9, 642)?.class;
    let across = divisibility_class(&e(0.8)?, &e(1.5)?, 1e-9, 642)?.class;
    let late = divisibility_class(&e(1.5)?, &e(2.0)?, 1e-9, 642)?.class;
    outcome(
        worst < 1e-4
            && g1_at_crit.abs() < 1e-4
            && negative_after
            && early == DivisibilityClass::CPDivisible
            && across != DivisibilityClass::CPDivisible
            && late == DivisibilityClass::Indivisible,
        format!(
            "max rate deviation {worst:.2e} on [0.05, 5], γ1(1/κ) = {g1_at_crit:.1e}, γ1 < 0 beyond: {negative_after}, classes {early:?} / {across:?} / {late:?}"
        ),
    )
}

fn ac5() -> Result<Outcome> {
    let kappa = 1.0;
    let scheme = DampFlipScheme::new(kappa)?;
    let js = scheme.jump_scheme();
    let rho0 = DensityMatrix::basis(2, 1);
    let (dt, t_max, n, seed) = (1e-3, 5.0, 100_000, 20_26);
    let start = Instant::now();
    let res = trajectory::simulate_ensemble(&js, &rho0, dt, t_max, n, seed)?;
    let secs = start.elapsed().as_secs_f64();
    let mut worst_ratio: f64 = 0.0;
    let mut worst_t = 0.0;
    for (i, &t) in res.times.iter().enumerate() {
        let exact = trajectory::exact_map(&scheme, t, 2000)?.apply_state(&rho0)?.bloch()?;
        let d = res.trace_distance_to(i, exact);
        let se = res.distance_std_err(i);
        let ratio = if d == 0.0 { 0.0 } else { d / se };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_t = t;
        }
    }
    let rerun = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        let r = pool.install(|| trajectory::simulate_ensemble(&js, &rho0, dt, 2.0, 5_000, 7))?;
        Ok(serde_json::to_string(&r)?)
    };
    let identical = rerun(1)? == rerun(1)? && rerun(1)? == rerun(3)?;
    outcome(
        worst_ratio <= 3.0 && identical,
        format!(
            "{n} trajectories in {secs:.1} s, worst distance {worst_ratio:.2} SE at t = {worst_t:.2} over {} grid times, byte-identical reruns: {identical}",
            res.times.len()
        ),
    )
}

fn ac6() -> Result<Outcome> {
    // (a) C ≤ C♯ on 10⁴ states; the search oracle on a subset never exceeds the closed form.
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut a_ok = true;
    let mut oracle_excess: f64 = f64::NEG_INFINITY;
    for k in 0..10_000 {
        let rho = random_density_matrix(4, 1 + k % 4, &mut rng);
        let c = concurrence(&rho)?;
        let ca = concurrence_of_assistance(&rho)?;
        a_ok &= c <= ca + 1e-12;
        if k % 10 == 0 {
            oracle_excess = oracle_excess.max(coa_oracle(&rho, 2, 60, k as u64) - ca);
        }
    }
    a_ok &= oracle_excess <= 1e-9;
    // (b) proof chain on 10³ instrument/conditional pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let mut b_ok = true;
    for k in 0..1000 {
        let n = 1 + k % 4;
        let inst = random_instrument(2, n, &mut rng);
        let conds: Vec<QuantumChannel> = (0..n).map(|j| random_channel(2, 1 + j % 3, &mut rng)).collect();
        b_ok &= proof_chain(&inst, &conds)?.holds(1e-8);
    }
    // (c) accepted classical constructions never certify.
    let mut c_checked = 0;
    let mut c_ok = true;
    for k in 0..=10 {
        let p = k as f64 / 10.0;
        let (e1, e2) = (families::dephasing_channel(p)?, QuantumChannel::identity(2));
        if verify_representation(&dephasing_random_unitary_rep(p)?, &e1, &e2, 1e-9)?.accepted {
            c_ok &= !evaluate_witness(&e1, &e2, TOL)?.certified();
            c_checked += 1;
        }
    }
    for beta in [0.0, 0.51, 1.0] {
        for k in 0..=20 {
            let p2 = 0.8 + 0.1 * k as f64 / 20.0;
            let (rep, e0) = thermal_ad_classical_rep(0.9, p2, beta)?;
            let (e1, e2) = (tad(0.9, beta)?, tad(p2, beta)?);
            if e0.valid && verify_representation(&rep, &e1, &e2, 1e-7)?.accepted {
                c_ok &= !evaluate_witness(&e1, &e2, TOL)?.certified();
                c_checked += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    for _ in 0..200 {
        let e1 = random_channel(2, 3, &mut rng);
        let e2 = channel::compose_maps(&random_channel(2, 2, &mut rng), &e1)?;
        let Ok(rep) = markovian_rep(&e1, &e2) else { continue };
        if verify_representation(&rep, &e1, &e2, 1e-7)?.accepted {
            c_ok &= !evaluate_witness(&e1, &e2, TOL)?.certified();
            c_checked += 1;
        }
    }
    // (d) representation round trips on 10³ random channels.
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let mut d_worst: f64 = 0.0;
    for k in 0..1000 {
        let ch = random_channel(2, 1 + k % 4, &mut rng);
        let s = ch.superoperator();
        for kind in [ReprKind::Choi, ReprKind::SuperOperator, ReprKind::AffineBloch, ReprKind::Kraus] {
            let back = ch.with_representation(kind)?.with_representation(ReprKind::Kraus)?;
            d_worst = d_worst.max(linalg::max_abs(&(back.superoperator() - &s)));
        }
    }
    let d_ok = d_worst < 1e-8;
    outcome(
        a_ok && b_ok && c_ok && d_ok && c_checked > 0,
        format!(
            "(a) {a_ok}, oracle excess {oracle_excess:.1e}; (b) {b_ok}; (c) {c_ok} on {c_checked} accepted constructions; (d) {d_ok}, worst {d_worst:.1e}"
        ),
    )
}

fn ac7() -> Result<Outcome> {
    let toy = |kind, p| -> Result<(QuantumChannel, QuantumChannel)> {
        let d = families::toy_dilation_dynamics(ToyModelParams::new(kind, p)?)?;
        Ok((d.maps()[0].clone(), d.maps()[1].clone()))
    };
    let (e1, e2) = toy(ToyKind::Damp, 1.0)?;
    let full = evaluate_witness(&e1, &e2, TOL)?;
    let exact_full = full.certified() && full.c_assist_first.abs() < 1e-12 && (full.c_form_second - 1.0).abs() < 1e-12;
    let g = ToyModelParams::from_g(0.89)?;
    let (e1, e2) = toy(ToyKind::Damp, g.p)?;
    let at_g = evaluate_witness(&e1, &e2, TOL)?;
    let mut scan_ok = true;
    for k in 1..=50 {
        let p = 0.5 + 0.01 * k as f64;
        let (e1, e2) = toy(ToyKind::Damp, p)?;
        let r = evaluate_witness(&e1, &e2, TOL)?;
        if r.margin > TOL {
            scan_ok &= r.certified();
        } else {
            scan_ok = false;
        }
    }
    let mut dephase_ok = true;
    for k in 0..=50 {
        let p = k as f64 / 50.0;
        let (e1, e2) = toy(ToyKind::Dephase, p)?;
        dephase_ok &= !evaluate_witness(&e1, &e2, TOL)?.certified();
        dephase_ok &= verify_representation(&dephasing_random_unitary_rep(p)?, &e1, &e2, 1e-9)?.accepted;
    }
    let f = ToyModelParams::from_f(0.64)?;
    let (e1, e2) = toy(ToyKind::Dephase, f.p)?;
    let at_f = evaluate_witness(&e1, &e2, TOL)?;
    outcome(
        exact_full && at_g.certified() && scan_ok && dephase_ok && !at_f.certified(),
        format!(
            "damping p = 1 margin {:.3}, g = 0.89 (p = {:.3}) margin {:.3}, p ∈ (0.5, 1] all certified: {scan_ok}; dephasing inconclusive with verified coin-flip representation: {dephase_ok}, f = 0.64 margin {:.3}",
            full.margin, g.p, at_g.margin, at_f.margin
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 7] =
        [("AC1", ac1), ("AC2", ac2), ("AC3", ac3), ("AC4", ac4), ("AC5", ac5), ("AC6", ac6), ("AC7", ac7)];
    let mut failed = 0;
    for (name, run) in criteria {
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{name} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of 7 criteria pass", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
