//! End-to-end acceptance suite. Criteria run one after another inside a
//! single test so that the wall-clock limits are measured without
//! contention; each prints one PASS/FAIL line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucbsde::bsde::{simulate_paths, solve_lipschitz, solve_ucg, uniqueness_diagnostic, RegressionSpec, Terminal};
use ucbsde::builtins::{example_s3_generator, exp_decay, generator, terminal, xlog, Binding};
use ucbsde::dbde::{picard_recursion, solve_fixed_point, solve_separable, verify_comparison, DbdeProblem, Uniqueness};
use ucbsde::grid::TimeGrid;
use ucbsde::regularize::{inf_convolution, verify_error_envelope, verify_lipschitz_of_approx, LinearGrowthFn};
use ucbsde::search::SearchSpec;
use ucbsde::weights::{Horizon, ModulusFn, WeightFn};

type Outcome = ucbsde::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);
/// Name, growth constant, function, cusps.
type FamilyMember = (&'static str, f64, fn(f64) -> f64, Vec<f64>);

fn c1_dbde_oracle() -> Outcome {
    let start = Instant::now();
    let p = DbdeProblem::linear(exp_decay(1.0, 1.0), 1.0, 0.0, 1.0, Horizon::infinite().with_truncation_eps(1e-8))?;
    let grid = p.default_grid(20_000)?;
    let path = solve_fixed_point(&p, &grid, 1e-13, 200)?;
    let secs = start.elapsed().as_secs_f64();
    let err = grid.nodes().iter().zip(&path.values).fold(0.0_f64, |m, (&t, &y)| m.max((y - (-t).exp().exp()).abs()));
    Ok((err <= 1e-6 && secs < 1.0, format!("sup error {err:.2e}, {secs:.3} s")))
}

fn random_weight(rng: &mut ChaCha8Rng) -> WeightFn {
    if rng.gen_bool(0.5) {
        WeightFn::constant(rng.gen_range(0.2..1.5))
    } else {
        exp_decay(rng.gen_range(0.2..1.5), rng.gen_range(0.1..2.0))
    }
}

fn c2_picard() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let w = random_weight(&mut rng);
        let (alpha, c, delta) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0));
        let p = DbdeProblem::linear(w, alpha, c, delta, Horizon::finite(rng.gen_range(0.5..2.0)))?;
        let grid = p.default_grid(200)?;
        let out = picard_recursion(&p, &grid, delta, 40)?;
        worst = worst.max(out.sup_distance_to_fixed_point);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 1e-6 && secs < 10.0, format!("worst gap after 40 steps {worst:.2e}, {secs:.2} s")))
}

fn c3_separable() -> Outcome {
    let t_end = 3.0;
    let grid = TimeGrid::uniform(t_end, 300)?;
    let u = exp_decay(2.0, 1.0);
    let delta = 0.25;
    let lin = solve_separable(&u, &ModulusFn::identity(), delta, &grid)?;
    let lin_err = grid
        .nodes()
        .iter()
        .zip(&lin.values)
        .fold(0.0_f64, |m, (&t, &y)| m.max((y - delta * (2.0 * ((-t).exp() - (-t_end).exp())).exp()).abs()));

    let unit = TimeGrid::uniform(1.0, 100)?;
    let one = WeightFn::constant(1.0);
    let sqrt = ModulusFn::new("sqrt", f64::sqrt, 1.0, false)?;
    let branch = solve_separable(&one, &sqrt, 0.0, &unit)?;
    let branch_err = unit
        .nodes()
        .iter()
        .zip(&branch.values)
        .fold(0.0_f64, |m, (&t, &y)| m.max((y - ((1.0 - t) / 2.0).powi(2)).abs()));
    let flagged = branch.info.uniqueness == Uniqueness::NonUnique;

    let osgood = solve_separable(&one, &xlog(0.1)?, 0.0, &unit)?;
    let zero = osgood.values.iter().all(|&v| v == 0.0);
    Ok((
        lin_err <= 1e-8 && branch_err <= 1e-8 && flagged && zero,
        format!("identity {lin_err:.1e}, sqrt branch {branch_err:.1e} NonUnique={flagged}, Osgood exactly zero={zero}"),
    ))
}

fn c4_comparison() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    let mut strict_cases = 0;
    for i in 0..100 {
        let w = random_weight(&mut rng);
        let h = Horizon::finite(rng.gen_range(0.5..3.0));
        let alpha = rng.gen_range(-1.5..1.5);
        let c_low = rng.gen_range(-1.0..1.0);
        let c_high = c_low + rng.gen_range(0.0..1.0);
        let d_low = rng.gen_range(-2.0..2.0);
        // Every fourth pair shares the terminal value.
        let d_high = if i % 4 == 0 { d_low } else { d_low + rng.gen_range(1e-3..1.0) };
        let p = DbdeProblem::linear(w.clone(), alpha, c_high, d_high, h)?;
        let q = DbdeProblem::linear(w, alpha, c_low, d_low, h)?;
        let r = verify_comparison(&p, &q, &p.default_grid(200)?)?;
        worst = worst.min(r.min_difference);
        let strict_ok = d_high == d_low || r.strict_holds;
        strict_cases += usize::from(d_high > d_low);
        if r.min_difference < -1e-10 || !strict_ok || !r.passed {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("{failures} failures, min y - y' = {worst:.2e}, {strict_cases} strict pairs")))
}

/// Continuous functions of linear growth with cusps no sharper than `√`
/// on the side that pulls the infimum down, so that `f_n(x_n) → f(x)` at a
/// rate visible by `n = 2¹⁰`.
fn test_family() -> Vec<(LinearGrowthFn, Vec<f64>)> {
    fn sq(x: f64) -> f64 {
        x.abs().sqrt()
    }
    let raw: Vec<FamilyMember> = vec![
        ("sqrt", 1.0, |x| sq(x), vec![0.0]),
        ("sqrt_plus_abs", 2.0, |x| sq(x) + x.abs(), vec![0.0]),
        ("neg_sqrt", 1.0, |x| -sq(x), vec![0.0]),
        ("cube_root", 1.0, |x| x.abs().cbrt(), vec![0.0]),
        ("shifted_neg_sqrt", 1.5, |x| -sq(x - 0.5) + 0.5 * x, vec![0.5]),
        ("capped_sqrt", 1.0, |x| sq(x + 1.0).min(2.0), vec![-1.0, 3.0]),
        ("signed_sqrt", 1.0, |x| x.signum() * sq(x), vec![0.0]),
        ("sine_ramp", 1.0, |x| (3.0 * x).sin() + 0.5 * x.abs(), vec![0.0]),
        ("two_sided", 1.0, |x| sq((x - 1.0).max(0.0)) - 0.5 * sq((-x - 1.0).max(0.0)), vec![1.0, -1.0]),
        ("tanh_minus_sqrt", 3.5, |x| 2.0 * x.tanh() - sq(x - 2.0), vec![2.0]),
    ];
    raw.into_iter()
        .map(|(name, k, f, cusps)| {
            let kinks = cusps.iter().map(|&c| vec![c]).collect();
            let g = LinearGrowthFn::new(name, 1, k, move |x: &[f64]| f(x[0])).unwrap().with_kinks(kinks).unwrap();
            (g, cusps)
        })
        .collect()
}

/// Dense-grid minimum of `f(q) + n|q - x|` over the search radius, with
/// cusps and `x` added as candidates and a golden-section polish around the
/// best grid point.
fn brute_inf_convolution(f: &LinearGrowthFn, cusps: &[f64], n: f64, x: f64) -> f64 {
    let k = f.growth_k();
    let r = 2.0 * k * (1.0 + x.abs()) / (n - k);
    let obj = |q: f64| f.eval(&[q]) + n * (q - x).abs();
    let m = 20_000;
    let h = 2.0 * r / m as f64;
    let mut best = obj(x);
    let mut arg = x;
    for i in 0..=m {
        let q = x - r + i as f64 * h;
        let v = obj(q);
        if v < best {
            best = v;
            arg = q;
        }
    }
    for &c in cusps {
        if (c - x).abs() <= r {
            best = best.min(obj(c));
        }
    }
    let (mut a, mut b) = (arg - h, arg + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (c, d) = (b - phi * (b - a), a + phi * (b - a));
        if obj(c) < obj(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.min(obj(0.5 * (a + b)))
}

fn c5_inf_convolution() -> Outcome {
    let search = SearchSpec::default();
    let tol = search.objective_tol;
    let xs = [-3.0, -1.0, -0.3, -0.01, 0.0, 0.003, 0.05, 0.5, 1.0, 2.0, 2.5];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut growth, mut mono, mut lip, mut conv, mut oracle) = (0, 0, 0, 0, 0);
    let mut worst_conv = 0.0_f64;
    let mut worst_oracle = 0.0_f64;
    for (f, cusps) in test_family() {
        let k = f.growth_k();
        let ns: Vec<f64> = (1..=10).map(|m| 2f64.powi(m)).filter(|&n| n > k).collect();
        for &x in xs.iter().chain(&cusps) {
            let fx = f.eval(&[x]);
            let mut prev = f64::NEG_INFINITY;
            for &n in &ns {
                let v = inf_convolution(&f, n, &[x], &search)?;
                if v.abs() > k * (1.0 + x.abs()) + 2.0 * tol {
                    growth += 1;
                }
                if v < prev - 2.0 * tol || v > fx + 2.0 * tol {
                    mono += 1;
                }
                prev = v;
                let dx = rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-4.0..0.0));
                let w = inf_convolution(&f, n, &[x + dx], &search)?;
                if (v - w).abs() > n * dx.abs() + 2.0 * tol {
                    lip += 1;
                }
                let o = brute_inf_convolution(&f, &cusps, n, x);
                worst_oracle = worst_oracle.max((v - o).abs());
                if (v - o).abs() > 2.0 * tol {
                    oracle += 1;
                }
            }
            let n = 1024.0;
            let xn = x + if rng.gen_bool(0.5) { 1.0 } else { -1.0 } / (4.0 * n * n);
            let e = (inf_convolution(&f, n, &[xn], &search)? - fx).abs();
            worst_conv = worst_conv.max(e);
            if e >= 1e-3 {
                conv += 1;
            }
        }
    }
    let fails = growth + mono + lip + conv + oracle;
    Ok((
        fails == 0,
        format!(
            "violations: growth {growth}, monotone {mono}, Lipschitz {lip}, convergence {conv} (worst {worst_conv:.1e}), \
             oracle {oracle} (worst {worst_oracle:.1e})"
        ),
    ))
}

fn c6_envelope() -> Outcome {
    let start = Instant::now();
    let g = example_s3_generator(0.1, 2, 1, &Horizon::finite(1.0))?;
    let search = SearchSpec::default();
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [2, 4, 8, 16] {
        let env = verify_error_envelope(&g, n, 1000, &search, 60 + n)?;
        let lip = verify_lipschitz_of_approx(&g, n, 1000, &search, 600 + n)?;
        ok &= env.violations == 0 && lip.violations == 0;
        detail.push(format!(
            "n={n}: min gap {:.1e}, excess {:.2}, ratio {:.2}",
            env.min_gap, env.worst_excess, lip.worst_ratio
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((ok && secs < 60.0, format!("{}; {secs:.1} s", detail.join("; "))))
}

fn c7_martingale() -> Outcome {
    let g = generator(&Binding::new("zero"), "generator", 1, 1, &Horizon::finite(1.0))?;
    let xi = Terminal::new("B_T", 1, |b, out| out[0] = b[0]);
    let ens = simulate_paths(1, &TimeGrid::uniform(1.0, 50)?, 100_000, 7)?;
    let sol = solve_lipschitz(&g, &xi, &ens, &RegressionSpec::default(), 10)?;
    let (y0, se) = (sol.y0[0], sol.y0_se[0]);
    let z_err = sol.z.iter().map(|z| (z - 1.0).abs()).sum::<f64>() / sol.z.len() as f64;
    Ok((y0.abs() <= 3.0 * se && z_err < 0.05, format!("y0 = {y0:.2e} (SE {se:.1e}), mean |z - 1| = {z_err:.2e}")))
}

/// Largest node gap between BSDE means and a DBDE path, against `max(1e-3, 3 SE)`.
fn cross_match(sol: &ucbsde::bsde::BsdeSolution, dbde: &[f64]) -> (bool, f64) {
    let mut ok = true;
    let mut worst = 0.0_f64;
    for (node, &d) in dbde.iter().enumerate() {
        let (m, s) = sol.y_stats(node);
        let gap = (m[0] - d).abs();
        worst = worst.max(gap);
        ok &= gap <= 1e-3_f64.max(3.0 * s[0]);
    }
    (ok, worst)
}

fn c8_deterministic() -> Outcome {
    let h = Horizon::finite(1.0);
    let grid = TimeGrid::uniform(1.0, 50)?;
    let ens = simulate_paths(1, &grid, 100_000, 8)?;
    let spec = RegressionSpec::default();

    let g = generator(&Binding::new("y_linear").with("a", 1.0), "generator", 1, 1, &h)?;
    let sol = solve_lipschitz(&g, &Terminal::constant(vec![1.0]), &ens, &spec, 20)?;
    let rel = (sol.y0[0] - std::f64::consts::E).abs() / std::f64::consts::E;
    let d = solve_fixed_point(&DbdeProblem::linear(WeightFn::constant(1.0), 1.0, 0.0, 1.0, h)?, &grid, 1e-14, 1000)?;
    let (ok_a, gap_a) = cross_match(&sol, &d.values);

    let g2 = generator(&Binding::new("y_linear").with("a", 0.7), "generator", 1, 1, &h)?;
    let sol2 = solve_lipschitz(&g2, &Terminal::constant(vec![2.0]), &ens, &spec, 20)?;
    let d2 = solve_fixed_point(&DbdeProblem::linear(WeightFn::constant(1.0), 0.7, 0.0, 2.0, h)?, &grid, 1e-14, 1000)?;
    let (ok_b, gap_b) = cross_match(&sol2, &d2.values);
    Ok((
        rel < 0.01 && ok_a && ok_b,
        format!("y0 = {:.6} (rel err {rel:.1e}), cross-match gaps {gap_a:.1e}, {gap_b:.1e}", sol.y0[0]),
    ))
}

fn c9_ucg() -> Outcome {
    let start = Instant::now();
    let g = example_s3_generator(0.1, 2, 1, &Horizon::finite(1.0))?;
    let xi = terminal(&Binding::new("sin_shift"), "terminal", 2, 1)?;
    let ens = simulate_paths(1, &TimeGrid::geometric(1.0, 16, 1.2)?, 20_000, 7)?;
    let out = solve_ucg(&g, &xi, &ens, &[2, 4, 8, 16], &RegressionSpec::default(), &SearchSpec::light(), 40)?;
    let secs = start.elapsed().as_secs_f64();
    let cauchy = out.cauchy_nonincreasing(2.0);
    let residual = &out.solution.diagnostics.residual;
    let res_ok = !residual.is_empty() && residual.iter().all(|r| r.within(3.0));
    let gaps: Vec<String> = out.cauchy_table().iter().map(|c| format!("{:.2e}", c.sup_gap)).collect();
    let worst_res =
        residual.iter().flat_map(|r| r.mean.iter().zip(&r.se).map(|(m, s)| m.abs() / s)).fold(0.0_f64, f64::max);
    Ok((
        cauchy && res_ok && secs < 300.0,
        format!("sup gaps [{}], worst residual {worst_res:.2} SE, {secs:.0} s", gaps.join(", ")),
    ))
}

fn c10_uniqueness() -> Outcome {
    let h = Horizon::finite(1.0);
    let g = generator(&Binding::new("lipschitz_sin"), "generator", 2, 1, &h)?;
    let xi = terminal(&Binding::new("sin_shift"), "terminal", 2, 1)?;
    let grid = TimeGrid::uniform(1.0, 20)?;
    let spec = RegressionSpec::default();
    let a = solve_lipschitz(&g, &xi, &simulate_paths(1, &grid, 20_000, 21)?, &spec, 20)?;
    let b = solve_lipschitz(&g, &xi, &simulate_paths(1, &grid, 20_000, 22)?, &spec, 20)?;
    let reports = [2, 4, 8, 16]
        .into_iter()
        .map(|n| uniqueness_diagnostic(&a, &b, &g, n, 6, &SearchSpec::default()))
        .collect::<ucbsde::Result<Vec<_>>>()?;
    let covered = reports.iter().all(|r| r.passed);
    let dec_j = reports.iter().all(|r| r.bound_at_zero.windows(2).all(|w| w[1] < w[0]));
    // f¹ ≡ C₁ does not depend on n; from j = 2 on the bound falls with n.
    let dec_n = (1..6).all(|j| reports.windows(2).all(|w| w[1].bound_at_zero[j] < w[0].bound_at_zero[j]));
    let last: Vec<String> = reports.iter().map(|r| format!("{:.4}", r.bound_at_zero[5])).collect();
    let margin = reports.iter().map(|r| r.worst_margin).fold(f64::INFINITY, f64::min);
    Ok((
        covered && dec_j && dec_n,
        format!("f^(n,6)_0 over n = 2,4,8,16: [{}], worst margin {margin:.3}", last.join(", ")),
    ))
}

#[test]
fn acceptance() {
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let criteria: [Criterion; 10] = [
        ("dbde analytic oracle", c1_dbde_oracle),
        ("picard cross-validation", c2_picard),
        ("separable closed forms", c3_separable),
        ("comparison", c4_comparison),
        ("inf-convolution properties", c5_inf_convolution),
        ("error envelope", c6_envelope),
        ("martingale case", c7_martingale),
        ("deterministic reduction", c8_deterministic),
        ("approximation scheme", c9_ucg),
        ("uniqueness diagnostic", c10_uniqueness),
    ];
    let mut failed = Vec::new();
    println!();
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|c| c != i + 1) {
            continue;
        }
        let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("criterion {:>2} {}: {name}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
