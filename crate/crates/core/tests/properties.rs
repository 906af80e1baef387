use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schmidt_core::bipartite::{apply_local, schmidt_decompose, PureState};
use schmidt_core::numerics::DEFAULT_RANK_TOL;
use schmidt_core::operators::{witness_from, DenseOperator, GammaOperator, Observable, ProjectorOperator};
use schmidt_core::random::{complex_normal_matrix, random_hermitian, random_psd, random_rank_r_state, random_unitary};
use schmidt_core::schmidt_number::{
    f2_gamma, f_r_projector, fr_gamma, fr_oracle, OracleOptions, DEFAULT_ENUMERATION_CAP,
};
use schmidt_core::tmsv::{
    angle_grid, db_to_epsilon, epsilon_to_db, margin_curve, threshold, OperatorKind, Scenario, ThresholdOptions,
};

const EPSILONS: [f64; 2] = [1.0 / 3.0, 0.82];

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn f2_agrees_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..100 {
        let n = 2 + i % 7;
        let g = GammaOperator::new(random_hermitian(&mut rng, n)).unwrap();
        let a = f2_gamma(&g).unwrap();
        let b = fr_gamma(&g, 2, DEFAULT_ENUMERATION_CAP).unwrap().value;
        assert!((a - b).abs() <= 1e-12, "n={n}: {a} vs {b}");
    }
}

#[test]
fn oracle_reaches_small_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut hits = 0;
    for trial in 0..100u64 {
        let opts = OracleOptions { seed: trial, ..OracleOptions::default() };
        let (oracle, exact) = match trial % 3 {
            0 | 1 => {
                let n = 3 + (trial % 2) as usize;
                let r = rng.random_range(1..n);
                let g = GammaOperator::new(random_psd(&mut rng, n)).unwrap();
                let exact = fr_gamma(&g, r, DEFAULT_ENUMERATION_CAP).unwrap().value;
                (fr_oracle(&g.to_dense(), r, &opts).unwrap().solution.value, exact)
            }
            _ => {
                let d = rng.random_range(2..=4);
                let psi = PureState::normalized(complex_normal_matrix(&mut rng, d, d)).unwrap();
                let p = ProjectorOperator::new(psi).unwrap();
                let r = rng.random_range(1..=d);
                (fr_oracle(&p.to_dense(), r, &opts).unwrap().solution.value, f_r_projector(&p, r).unwrap())
            }
        };
        assert!(oracle <= exact + 1e-7, "trial {trial}: oracle {oracle} above exact {exact}");
        if (oracle - exact).abs() <= 1e-6 {
            hits += 1;
        }
    }
    assert!(hits >= 99, "{hits}/100");
}

#[test]
fn oracle_value_is_achieved_by_its_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let l = DenseOperator::new(random_hermitian(&mut rng, 12), 3, 4).unwrap();
    for r in 1..=3 {
        let out = fr_oracle(&l, r, &OracleOptions { restarts: 20, ..OracleOptions::default() }).unwrap();
        let psi = &out.solution.vector;
        assert!(schmidt_decompose(psi, DEFAULT_RANK_TOL).unwrap().rank() <= r);
        assert!((l.expectation_pure(psi).unwrap() - out.solution.value).abs() < 1e-10);
        if out.converged {
            assert!(out.solution.is_stationary(), "r={r}: residual {}", out.solution.biorth_residual);
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let l = DenseOperator::new(random_hermitian(&mut rng, 16), 4, 4).unwrap();
    let opts = OracleOptions { restarts: 16, seed: 5, ..OracleOptions::default() };
    let one = in_pool(1, || fr_oracle(&l, 2, &opts).unwrap());
    let four = in_pool(4, || fr_oracle(&l, 2, &opts).unwrap());
    assert_eq!(one.solution.value.to_bits(), four.solution.value.to_bits());
    assert_eq!(one.solution.vector, four.solution.vector);
    assert_eq!(one.restart, four.restart);

    let g = GammaOperator::new(random_hermitian(&mut rng, 9)).unwrap();
    let a = in_pool(1, || fr_gamma(&g, 4, DEFAULT_ENUMERATION_CAP).unwrap());
    let b = in_pool(3, || fr_gamma(&g, 4, DEFAULT_ENUMERATION_CAP).unwrap());
    assert_eq!(a, b);

    let s = Scenario::new(0.82, 100, OperatorKind::FlatSinc, 2).unwrap();
    let grid = angle_grid(5.0).unwrap();
    let c1 = in_pool(1, || margin_curve(&s, &grid).unwrap().to_csv());
    let c4 = in_pool(4, || margin_curve(&s, &grid).unwrap().to_csv());
    assert_eq!(c1, c4);
}

#[test]
fn witness_nonnegative_on_low_rank_states_for_dense_operators() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let l = DenseOperator::new(random_hermitian(&mut rng, 9), 3, 3).unwrap();
    for r in 1..=2 {
        let f = fr_oracle(&l, r, &OracleOptions::default()).unwrap().solution.value;
        let w = witness_from(&l, f);
        for _ in 0..2000 {
            let psi = random_rank_r_state(&mut rng, 3, 3, r);
            assert!(w.expectation_pure(&psi).unwrap() >= -1e-8);
        }
    }
}

#[test]
fn identity_never_witnesses() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let id = DenseOperator::identity(3, 3);
    for r in 1..=3 {
        let f = fr_oracle(&id, r, &OracleOptions { restarts: 5, ..OracleOptions::default() }).unwrap();
        assert!((f.solution.value - 1.0).abs() < 1e-12);
        for _ in 0..50 {
            let psi = random_rank_r_state(&mut rng, 3, 3, 3);
            assert!(id.expectation_pure(&psi).unwrap() - f.solution.value <= 1e-12);
        }
    }
}

#[test]
fn local_unitaries_preserve_schmidt_coefficients_and_expectations() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let l = DenseOperator::new(random_hermitian(&mut rng, 12), 3, 4).unwrap();
    let u = random_unitary(&mut rng, 3);
    let v = random_unitary(&mut rng, 4);
    let rotated = l.conjugate_local(&u, &v).unwrap();
    for _ in 0..20 {
        let psi = random_rank_r_state(&mut rng, 3, 4, 2);
        let moved = apply_local(&psi, &u, &v).unwrap();
        let a = schmidt_decompose(&psi, DEFAULT_RANK_TOL).unwrap();
        let b = schmidt_decompose(&moved, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(a.rank(), b.rank());
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((x - y).abs() < 1e-12);
        }
        let e1 = l.expectation_pure(&psi).unwrap();
        let e2 = rotated.expectation_pure(&moved).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
    }
}

#[test]
fn margins_at_the_ends_of_the_diffusion_range() {
    for eps in EPSILONS {
        for r in 1..=3 {
            for kind in [OperatorKind::Matched, OperatorKind::FlatSinc] {
                let s = Scenario::new(eps, 100, kind, r).unwrap();
                assert!(s.margin(180.0).unwrap() <= 0.0, "{kind:?} eps={eps} r={r}");
            }
            let s = Scenario::new(eps, 100, OperatorKind::Matched, r).unwrap();
            assert!(s.margin(0.1).unwrap() > 0.0, "matched eps={eps} r={r}");
        }
    }
    // at small diffusion the flat-sinc gamma approaches the all-ones matrix, so
    // <L> -> (1 + eps)/(1 - eps) against f_r -> r
    for r in 1..=3 {
        let s = Scenario::new(0.82, 100, OperatorKind::FlatSinc, r).unwrap();
        assert!(s.margin(0.1).unwrap() > 0.0);
    }
    let s = Scenario::new(1.0 / 3.0, 100, OperatorKind::FlatSinc, 1).unwrap();
    assert!(s.margin(0.1).unwrap() > 0.0);
}

#[test]
fn thresholds_shrink_with_r() {
    let opts = ThresholdOptions { coarse_step_deg: 1.0, refine_tol_deg: 0.05 };
    for (eps, kind) in [(1.0 / 3.0, OperatorKind::Matched), (0.82, OperatorKind::FlatSinc), (0.82, OperatorKind::Matched)] {
        let t1 = threshold(&Scenario::new(eps, 100, kind, 1).unwrap(), &opts).unwrap().threshold_deg;
        let t2 = threshold(&Scenario::new(eps, 100, kind, 2).unwrap(), &opts).unwrap().threshold_deg;
        assert!(t2 <= t1, "{kind:?} eps={eps}: {t2} > {t1}");
    }
}

#[test]
fn threshold_matches_sign_of_curve() {
    let s = Scenario::new(0.82, 100, OperatorKind::FlatSinc, 2).unwrap();
    let rep = threshold(&s, &ThresholdOptions::default()).unwrap();
    let t = rep.threshold_deg;
    assert!(s.margin(t - 0.05).unwrap() > 0.0);
    assert!(s.margin(t + 0.05).unwrap() <= 0.0);
    assert_eq!(rep.crossings_deg.last().copied(), Some(t));
}

#[test]
fn db_round_trip() {
    for i in 1..990 {
        let eps = i as f64 / 1000.0;
        let back = db_to_epsilon(epsilon_to_db(eps).unwrap()).unwrap();
        assert!((back - eps).abs() <= 1e-12, "{eps}");
    }
}
