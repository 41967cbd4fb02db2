use padelab::linalg::{self, c, CVec};
use padelab::pade::{pade_coefficients, pade_scalar};
use padelab::random::random_stable_matrix;
use padelab::solver::{solve_with, success_probability, success_probability_from_norms};
use padelab::system::{build_by_name, BlockSystem};
use padelab::bounds::SolverParams;
use padelab::OdeProblem;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn diagonal_pade_is_reciprocal_under_negation(k in 1usize..14, x in -3.0f64..3.0) {
        let prod = pade_scalar(k, x).unwrap() * pade_scalar(k, -x).unwrap();
        prop_assert!((prod - 1.0).abs() < 1e-12, "{prod}");
    }

    #[test]
    fn diagonal_numerator_mirrors_denominator(k in 1usize..20) {
        let pc = pade_coefficients(k, k).unwrap();
        prop_assert_eq!(&pc.num_coeffs, &pc.den_coeffs);
        prop_assert_eq!(pc.num_f64()[0], 1.0);
    }

    #[test]
    fn stable_sampler_invariants(dim in 2usize..7, seed in 0u64..1000) {
        let a = random_stable_matrix(dim, seed, true);
        prop_assert_eq!(&a, &random_stable_matrix(dim, seed, true));
        prop_assert!((linalg::sigma_extremes(&a).0 - 1.0).abs() < 1e-10);
        let max_re = linalg::eigenvalues(&a).unwrap().iter().map(|z| z.re).fold(f64::MIN, f64::max);
        prop_assert!(max_re < 0.0, "{max_re}");
    }

    #[test]
    fn export_import_round_trip(n in 1usize..4, m in 1usize..4, k in 1usize..6, p in 1usize..4, pade in any::<bool>()) {
        let scheme = if pade { "pade" } else { "taylor" };
        let problem = OdeProblem::tridiagonal(n, 1.5).unwrap();
        let params = SolverParams::new(scheme, m, k, p, problem.horizon).unwrap();
        let sys = build_by_name(&problem, &params).unwrap();
        let back = BlockSystem::import(&sys.export()).unwrap();
        prop_assert_eq!(back.to_dense(), sys.to_dense());
        prop_assert_eq!(&back.rhs, &sys.rhs);
    }

    #[test]
    fn solvers_agree_and_padding_copies_match(n in 1usize..4, m in 1usize..5, k in 2usize..7, p in 1usize..4) {
        let problem = OdeProblem::tridiagonal(n, 2.0).unwrap();
        let params = SolverParams::new("pade", m, k, p, problem.horizon).unwrap();
        let sys = build_by_name(&problem, &params).unwrap();
        let fwd = solve_with("block-forward", &sys).unwrap();
        let dense = solve_with("dense", &sys).unwrap();
        prop_assert!((&fwd.terminal - &dense.terminal).norm() <= 1e-10 * fwd.terminal.norm());
        let x = sys.to_dense().lu().solve(&sys.rhs).unwrap();
        let tail: Vec<CVec> = (0..p).map(|j| x.rows(x.len() - (j + 1) * n, n).into_owned()).collect();
        for t in &tail {
            prop_assert!((t - &tail[0]).norm() <= 1e-12 * tail[0].norm().max(1.0));
        }
        let zsq: f64 = fwd.z_blocks.iter().flatten().map(|v| v.norm_squared()).sum();
        let direct = success_probability_from_norms(zsq, fwd.terminal.norm_squared(), p).unwrap();
        prop_assert!((success_probability(&fwd).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn scaling_rhs_scales_solution(scale in 0.1f64..10.0) {
        let problem = OdeProblem::tridiagonal(3, 1.0).unwrap();
        let params = SolverParams::new("taylor", 2, 4, 2, problem.horizon).unwrap();
        let mut sys = build_by_name(&problem, &params).unwrap();
        let base = solve_with("block-forward", &sys).unwrap().terminal;
        sys.rhs *= c(scale);
        let scaled = solve_with("block-forward", &sys).unwrap().terminal;
        prop_assert!((scaled - base * c(scale)).norm() <= 1e-12 * scale * 10.0);
    }
}
