//! Randomized properties of the bounds, the deterministic solvers and the
//! inf-convolution.

use proptest::prelude::*;
use ucbsde::builtins::{exp_decay, xlog};
use ucbsde::dbde::{picard_recursion, solve_fixed_point, DbdeProblem};
use ucbsde::regularize::{inf_convolution, LinearGrowthFn};
use ucbsde::search::SearchSpec;
use ucbsde::weights::{bound_a_n, bound_b_n, Horizon, ModulusFn, WeightFn};

fn modulus(which: u8) -> ModulusFn {
    match which % 3 {
        0 => ModulusFn::identity(),
        1 => ModulusFn::new("sqrt", f64::sqrt, 1.0, false).unwrap(),
        _ => xlog(0.1).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn a_n_falls_with_n(which in 0u8..3, scale in 0.1f64..3.0, t_end in 0.2f64..4.0, n in 1u64..500) {
        let phi = modulus(which);
        let v = WeightFn::constant(scale);
        let h = Horizon::finite(t_end);
        let a = phi.growth_a();
        let (lo, hi) = (bound_a_n(&phi, a, &v, &h, n + 1).unwrap(), bound_a_n(&phi, a, &v, &h, n).unwrap());
        prop_assert!(lo <= hi + 1e-15);
        prop_assert!(lo >= 0.0);
    }

    #[test]
    fn b_n_falls_with_n_and_is_bounded(
        wr in 0u8..3, wp in 0u8..3, su in 0.1f64..3.0, sv in 0.1f64..3.0, t in 0.0f64..3.0, n in 1u64..500,
    ) {
        let (rho, phi) = (modulus(wr), modulus(wp));
        let a = rho.growth_a().max(phi.growth_a());
        let (u, v) = (exp_decay(su, 1.0), WeightFn::constant(sv));
        let b = |n| bound_b_n(&u, &v, &rho, &phi, a, n, t).unwrap();
        prop_assert!(b(n + 1) <= b(n) + 1e-12);
        prop_assert!(b(n) <= (a + 4.0 * a * a) * (u.eval(t) + v.eval(t)) * (1.0 + 1e-12));
    }

    #[test]
    fn picard_reaches_the_fixed_point(
        alpha in -1.5f64..1.5, c in -1.0f64..1.0, delta in -2.0f64..2.0, t_end in 0.3f64..2.0, rate in 0.1f64..2.0,
    ) {
        let p = DbdeProblem::linear(exp_decay(1.0, rate), alpha, c, delta, Horizon::finite(t_end)).unwrap();
        let grid = p.default_grid(100).unwrap();
        let out = picard_recursion(&p, &grid, delta, 40).unwrap();
        prop_assert!(out.sup_distance_to_fixed_point <= 1e-8);
        let gaps: Vec<f64> = out.iterates.windows(2).map(|w| w[1].sup_distance(&w[0])).collect();
        prop_assert!(gaps.last().unwrap() <= &gaps[0].max(1e-12));
    }

    #[test]
    fn fixed_point_is_monotone_in_terminal_value(
        alpha in -1.5f64..1.5, c in -1.0f64..1.0, delta in -2.0f64..2.0, bump in 1e-3f64..1.0,
    ) {
        let h = Horizon::finite(1.0);
        let lo = DbdeProblem::linear(WeightFn::constant(1.0), alpha, c, delta, h).unwrap();
        let hi = DbdeProblem::linear(WeightFn::constant(1.0), alpha, c, delta + bump, h).unwrap();
        let grid = lo.default_grid(50).unwrap();
        let a = solve_fixed_point(&lo, &grid, 1e-13, 1000).unwrap();
        let b = solve_fixed_point(&hi, &grid, 1e-13, 1000).unwrap();
        prop_assert!(a.values.iter().zip(&b.values).all(|(x, y)| y > x));
    }

    #[test]
    fn inf_convolution_is_below_and_rises(x in -5.0f64..5.0, m in 1i32..8) {
        let f = LinearGrowthFn::new("abs_sin", 1, 2.0, |q: &[f64]| q[0].abs().sqrt() + q[0].sin())
            .unwrap()
            .with_kinks(vec![vec![0.0]])
            .unwrap();
        let s = SearchSpec::default();
        let n = 2f64.powi(m + 1);
        let a = inf_convolution(&f, n, &[x], &s).unwrap();
        let b = inf_convolution(&f, 2.0 * n, &[x], &s).unwrap();
        let tol = 2.0 * s.objective_tol;
        prop_assert!(a <= b + tol);
        prop_assert!(b <= f.eval(&[x]) + tol);
    }
}
