use crone_core::fixtures::{lorentz_plant, reference_spec, reference_tuning, PlantReading};
use crone_core::linalg::{max_real_part, solve_lyapunov, sym_eigenvalues};
use crone_core::lti::{tf_to_ss, RationalTf, StateSpace};
use crone_core::reset::{convex_combination, make_clegg, make_fore, ResetTuning};
use crone_core::stability::*;
use crone_core::synthesis::{synthesize, Strategy};
use nalgebra::{DMatrix, DVector, RowDVector};
use std::time::Instant;

fn reference_loop(tuning: ResetTuning, gain_sign: f64) -> ClosedLoopMats {
    let plant = lorentz_plant(PlantReading::Damping, false);
    let c = synthesize(&reference_spec(), &plant, Strategy::LagReset, tuning, 4).unwrap();
    closed_loop_for(&c, &plant.scaled(gain_sign), DelayModel::Ignore).unwrap()
}

#[test]
fn reference_design_is_certified() {
    let t0 = Instant::now();
    let clm = reference_loop(reference_tuning(), 1.0);
    assert_eq!(clm.order(), 11);
    assert!(clm.is_hurwitz());
    let out = check_quadratic_stability(&clm, SolverOptions::default()).unwrap();
    let StabilityOutcome::Certified {
        certificate,
        verification,
        iterations,
    } = &out
    else {
        panic!("not certified: {out:?}");
    };
    eprintln!(
        "iters {iterations} margin {} {:?} {:?}",
        verification.lyapunov_margin,
        t0.elapsed(),
        certificate.eig_p
    );
    assert!(verification.passed());
    assert!(certificate.eig_p.iter().all(|&l| l > 0.0));
    let again = verify_certificate(certificate, &clm, 1e-6).unwrap();
    assert!(again.passed());
}

#[test]
fn sign_flipped_plant_is_rejected() {
    let clm = reference_loop(reference_tuning(), -1.0);
    let out = check_quadratic_stability(&clm, SolverOptions::default()).unwrap();
    match out {
        StabilityOutcome::Infeasible(r) => {
            assert_eq!(r.reason, InfeasibleReason::NonHurwitz);
            assert!(r.max_real_eig > 0.0);
        }
        _ => panic!("certified an unstable loop"),
    }
}

#[test]
fn linear_configuration_uses_lyapunov() {
    let clm = reference_loop(ResetTuning::linear(), 1.0);
    assert!(clm.reset.is_empty());
    let out = check_quadratic_stability(&clm, SolverOptions::default()).unwrap();
    let cert = out.certificate().expect("linear loop is stable");
    assert_eq!(cert.method, CertificateMethod::Lyapunov);
    assert!(cert.equality_residual.is_none());
    // same answer as a plain Lyapunov solve in the working coordinates
    let (a, _) = working_matrices(cert, &clm).unwrap();
    let x = solve_lyapunov(&a, &DMatrix::identity(a.nrows(), a.nrows())).unwrap();
    let x = &x * (a.nrows() as f64 / x.trace());
    assert!((&x - &cert.p).norm() < 1e-6 * x.norm());
}

#[test]
fn trivial_certificate_and_constructed_violation() {
    // A_cl = -I with one reset state
    let star = make_fore(1.0).unwrap();
    let nr = StateSpace::gain(0.0);
    let plant = StateSpace {
        a: DMatrix::from_element(1, 1, -1.0),
        b: DVector::from_element(1, 1.0),
        c: RowDVector::from_element(1, 0.0),
        d: 0.0,
    };
    let clm = build_closed_loop(&star, &nr, &plant).unwrap();
    assert_eq!(clm.a_cl, -DMatrix::identity(2, 2));
    let tol = 1e-6;
    let cert = StabilityCertificate::from_parts(
        &clm,
        DMatrix::identity(2, 2),
        DVector::zeros(1),
        DMatrix::identity(1, 1),
    )
    .unwrap();
    let v = verify_certificate(&cert, &clm, tol).unwrap();
    assert!(v.passed(), "{v:?}");

    let mut bad = DMatrix::identity(2, 2);
    bad[(0, 1)] += 2.0 * tol;
    bad[(1, 0)] += 2.0 * tol;
    let cert =
        StabilityCertificate::from_parts(&clm, bad, DVector::zeros(1), DMatrix::identity(1, 1))
            .unwrap();
    let v = verify_certificate(&cert, &clm, tol).unwrap();
    assert!(!v.equality);
    assert!(v.positive_definite && v.lyapunov_decrease && v.jump);
}

#[test]
fn feasibility_invariant_under_state_scaling() {
    let clm = reference_loop(reference_tuning(), 1.0);
    let out = check_quadratic_stability(&clm, SolverOptions::default()).unwrap();
    let cert = out.certificate().unwrap();
    let n = clm.order();
    let s = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 10f64.powi(i as i32 % 4 - 1)));
    let s_inv = s.clone().try_inverse().unwrap();
    let mut rescaled = clm.clone();
    rescaled.a_cl = &s_inv * &clm.a_cl * &s;
    rescaled.a_rho = &s_inv * &clm.a_rho * &s;
    rescaled.c_nrp = &clm.c_nrp * &s;
    let moved = cert.for_rescaled(&s, &rescaled).unwrap();
    assert!(verify_certificate(&moved, &rescaled, 1e-6)
        .unwrap()
        .passed());
    // and the solver finds one on its own
    assert!(
        check_quadratic_stability(&rescaled, SolverOptions::default())
            .unwrap()
            .is_certified()
    );
}

/// Brute-force oracle over `(P_nonreset, P_ρ, β)` on a coarse grid, with the
/// reset row of `P` tied to `[β C_nrp, P_ρ]`.
fn grid_feasible(clm: &ClosedLoopMats, values: &[f64]) -> bool {
    let n = clm.order();
    let r = clm.reset[0];
    let non: Vec<usize> = (0..n).filter(|&i| i != r).collect();
    let idx: Vec<(usize, usize)> = non
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| non[a..].iter().map(move |&j| (i, j)))
        .chain(std::iter::once((r, r)))
        .collect();
    let vars = idx.len() + 1;
    let total = values.len().pow(vars as u32);
    (0..total).any(|mut code| {
        let mut p = DMatrix::zeros(n, n);
        for &(i, j) in &idx {
            let v = values[code % values.len()];
            code /= values.len();
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
        let beta = values[code % values.len()];
        for &j in &non {
            p[(r, j)] = beta * clm.c_nrp[j];
            p[(j, r)] = beta * clm.c_nrp[j];
        }
        sym_eigenvalues(&p)[0] > 0.0
            && *sym_eigenvalues(&(clm.a_cl.transpose() * &p + &p * &clm.a_cl))
                .last()
                .unwrap()
                < 0.0
    })
}

#[test]
fn toy_loops_agree_with_grid_oracle() {
    let plant = tf_to_ss(&RationalTf::new(vec![1.0], vec![1.0, 1.0]).unwrap()).unwrap();
    let grid: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
    // bare Clegg integrator, gain 1, plant 1/(s+1)
    let clm = build_closed_loop(&make_clegg(), &StateSpace::gain(1.0), &plant).unwrap();
    assert_eq!(clm.order(), 2);
    let found = check_quadratic_stability(&clm, SolverOptions::default())
        .unwrap()
        .is_certified();
    assert_eq!(found, grid_feasible(&clm, &grid));
    assert!(found);
    // FORE combination, three states
    let star =
        convex_combination(&make_fore(2.0).unwrap(), ResetTuning { gamma: 0.0, p: 0.3 }).unwrap();
    let clm = build_closed_loop(&star, &StateSpace::gain(1.0), &plant).unwrap();
    assert_eq!(clm.order(), 3);
    let found = check_quadratic_stability(&clm, SolverOptions::default())
        .unwrap()
        .is_certified();
    assert_eq!(found, grid_feasible(&clm, &grid));
}

#[test]
fn clegg_combination_is_marginal() {
    let plant = tf_to_ss(&RationalTf::new(vec![1.0], vec![1.0, 1.0]).unwrap()).unwrap();
    let star = convex_combination(&make_clegg(), ResetTuning::full_reset()).unwrap();
    let clm = build_closed_loop(&star, &StateSpace::gain(1.0), &plant).unwrap();
    assert!(max_real_part(&clm.a_cl).abs() < 1e-9);
    match check_quadratic_stability(&clm, SolverOptions::default()).unwrap() {
        StabilityOutcome::Infeasible(r) => assert_eq!(r.reason, InfeasibleReason::NonHurwitz),
        _ => panic!("marginal loop certified"),
    }
}
