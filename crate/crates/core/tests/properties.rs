use grelax::cost::CostSpec;
use grelax::relaxed::block_averages;
use grelax::*;
use proptest::prelude::*;

fn band() -> VolatilityBand {
    VolatilityBand::new(0.5, 1.0).unwrap()
}

fn family(grid: TimeGrid) -> ScenarioFamily {
    ScenarioFamily::constants(band(), grid, &[0.5, 0.625, 0.75, 0.875, 1.0]).unwrap()
}

/// Payoff on the lattice `Z / 8`, so that means over a power-of-two sample
/// are computed without rounding.
fn lattice(p: &PathView<'_>, alpha: i32, beta: i32) -> f64 {
    let raw = alpha as f64 * p.terminal() + beta as f64 * p.qv[p.qv.len() - 1];
    (raw * 8.0).round().clamp(-4096.0, 4096.0) / 8.0
}

fn row(weights: &[u8]) -> Vec<f64> {
    let total: u32 = weights.iter().map(|w| *w as u32).sum::<u32>().max(1);
    if weights.iter().all(|w| *w == 0) {
        let mut r = vec![0.0; weights.len()];
        r[0] = 1.0;
        return r;
    }
    let mut r: Vec<f64> = weights.iter().map(|w| *w as f64 / total as f64).collect();
    // put the rounding residue on the largest entry
    let residue = 1.0 - r.iter().sum::<f64>();
    let imax = (0..r.len()).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
    r[imax] += residue;
    r
}

fn relaxed(grid: TimeGrid, raw: &[Vec<u8>]) -> RelaxedControl {
    let rows: Vec<Vec<f64>> = raw.iter().map(|w| row(w)).collect();
    RelaxedControl::from_rows(grid, &rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sublinear_axioms_hold_exactly(seed in 0u64..1000, a1 in -8i32..8, b1 in -8i32..8, a2 in -8i32..8, b2 in -8i32..8, c in -64i32..64, k in 0u32..4) {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let noise = generate_noise(seed, 64, grid).unwrap();
        let fam = family(grid);
        let e = |f: &dyn Fn(&PathView<'_>) -> f64| fam.expectation(&noise, f).unwrap().value;
        let x = |p: &PathView<'_>| lattice(p, a1, b1);
        let y = |p: &PathView<'_>| lattice(p, a2, b2);
        prop_assert!(e(&|p| x(p) + y(p)) <= e(&x) + e(&y));
        prop_assert!(e(&|p| x(p).max(y(p))) >= e(&x));
        let c = c as f64 / 8.0;
        prop_assert_eq!(e(&|_| c), c);
        prop_assert_eq!(e(&|p| x(p) + c), e(&x) + c);
        let lambda = (1u32 << k) as f64;
        prop_assert_eq!(e(&|p| lambda * x(p)), lambda * e(&x));
    }

    #[test]
    fn capacity_is_monotone_and_subadditive(seed in 0u64..1000, lo in -2.0f64..2.0, width in 0.0f64..2.0, shift in -2.0f64..2.0) {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let noise = generate_noise(seed, 128, grid).unwrap();
        let fam = family(grid);
        let a = |p: &PathView<'_>| p.terminal() > lo && p.terminal() < lo + width;
        let b = |p: &PathView<'_>| p.terminal() > shift;
        let cap = |f: &dyn Fn(&PathView<'_>) -> bool| capacity_estimate(f, &fam, &noise).unwrap();
        prop_assert!(cap(&a) <= cap(&|p| a(p) || b(p)));
        prop_assert!(cap(&|p| a(p) || b(p)) <= cap(&a) + cap(&b));
        prop_assert_eq!(cap(&|_| true), 1.0);
        prop_assert_eq!(cap(&|_| false), 0.0);
    }

    #[test]
    fn pairing_is_linear_in_the_test_function(raw in prop::collection::vec(prop::collection::vec(0u8..10, 3), 1..8), c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
        let grid = TimeGrid::new(1.0, raw.len()).unwrap();
        let actions = ActionSet::new(vec![-1.0, 0.0, 2.0]).unwrap();
        let mu = relaxed(grid, &raw);
        let f = |t: f64, a: f64| t * a;
        let g = |t: f64, a: f64| (3.0 * t).sin() + a * a;
        let lhs = stable_pairing(&mu, &actions, |t, a| c1 * f(t, a) + c2 * g(t, a)).unwrap();
        let rhs = c1 * stable_pairing(&mu, &actions, f).unwrap() + c2 * stable_pairing(&mu, &actions, g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn chatter_preserves_block_averages(raw in prop::collection::vec(prop::collection::vec(0u8..10, 2), 1..6), n in 1usize..6, r in 1usize..9) {
        let grid = TimeGrid::new(1.0, raw.len()).unwrap();
        let actions = ActionSet::new(vec![-1.0, 1.0]).unwrap();
        let mu = relaxed(grid, &raw);
        let u = chatter(&mu, n, r).unwrap();
        let per_block = 2 * r;
        prop_assert_eq!(u.grid().n_steps(), n * per_block);
        for (i, avg) in block_averages(&mu, n).unwrap().iter().enumerate() {
            let block = &u.action_index()[i * per_block..(i + 1) * per_block];
            // actions appear in set order inside each block
            prop_assert!(block.windows(2).all(|w| w[0] <= w[1]));
            for (a, w) in avg.iter().enumerate() {
                let share = block.iter().filter(|&&b| b == a).count() as f64 / per_block as f64;
                prop_assert!((share - w).abs() <= 1.0 / per_block as f64 + 1e-12);
                if *w == 0.0 {
                    prop_assert_eq!(share, 0.0);
                }
            }
        }
        prop_assert!(embed_strict(&u, &actions).unwrap().as_strict().is_some());
    }

    #[test]
    fn strict_solve_is_relaxed_solve_of_embedding(
        seed in 0u64..1000,
        index in prop::collection::vec(0usize..3, 1..6),
        b_slope in -1.0f64..1.0,
        s in 0.0f64..1.0,
        g in -1.0f64..1.0,
        x0 in -1.0f64..1.0,
    ) {
        let grid = TimeGrid::new(1.0, index.len()).unwrap();
        let actions = ActionSet::new(vec![-1.0, 0.5, 1.0]).unwrap();
        let noise = generate_noise(seed, 16, grid).unwrap();
        let fam = family(grid);
        let spec = GsdeSpec::new(x0, 100.0)
            .with_drift(move |t, x, a| a * (1.0 + t) + b_slope * x.sin())
            .with_diffusion(move |_, x| s * x.cos())
            .with_qv_drift(move |_, _, a| g * a);
        let u = StrictControl::new(grid, index).unwrap();
        let mu = embed_strict(&u, &actions).unwrap();
        for paths in fam.generate_paths(&noise).unwrap() {
            let a = solve_strict(&spec, &u, &actions, &paths).unwrap();
            let b = solve_relaxed(&spec, &mu, &actions, &paths).unwrap();
            for (p, q) in a.paths().zip(b.paths()) {
                prop_assert_eq!(p, q);
                prop_assert_eq!(p[0], x0);
            }
        }
    }

    #[test]
    fn cost_is_affine_in_weights_for_control_free_dynamics(
        seed in 0u64..1000,
        raw1 in prop::collection::vec(prop::collection::vec(0u8..10, 2), 4),
        raw2 in prop::collection::vec(prop::collection::vec(0u8..10, 2), 4),
        lambda in 0.0f64..1.0,
    ) {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let actions = ActionSet::new(vec![-1.0, 1.0]).unwrap();
        let noise = generate_noise(seed, 32, grid).unwrap();
        let scenario = VolatilityScenario::constant(band(), grid, 0.75).unwrap();
        let gsde = GsdeSpec::new(0.2, 100.0).with_diffusion(|_, x| 0.5 + 0.1 * x.sin()).with_drift(|_, x, _| -x);
        let cost = CostSpec::new(100.0).with_running(|t, x, a| x * x + a * t).with_terminal(|x| x.abs());
        let mu1 = relaxed(grid, &raw1);
        let mu2 = relaxed(grid, &raw2);
        let mixed: Vec<Vec<f64>> = mu1.rows().zip(mu2.rows()).map(|(r1, r2)| {
            let mut r: Vec<f64> = r1.iter().zip(r2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let residue = 1.0 - r.iter().sum::<f64>();
            r[0] += residue;
            r
        }).collect();
        let mix = RelaxedControl::from_rows(grid, &mixed).unwrap();
        let j = |mu: &RelaxedControl| cost_under_scenario(&cost, &gsde, mu, &actions, &scenario, &noise).unwrap().mean;
        let lhs = j(&mix);
        let rhs = lambda * j(&mu1) + (1.0 - lambda) * j(&mu2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn chi_is_bounded_by_declared_bound(seed in 0u64..1000, x0 in -1.0f64..1.0) {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let actions = ActionSet::new(vec![-1.0, 1.0]).unwrap();
        let noise = generate_noise(seed, 32, grid).unwrap();
        let paths = generate_gbm(&noise, &VolatilityScenario::constant(band(), grid, 1.0).unwrap()).unwrap();
        let gsde = GsdeSpec::new(x0, 2.0).with_diffusion(|_, _| 1.0).with_drift(|_, _, a| a);
        let cost = CostSpec::new(2.0).with_running(|_, x, a| 2.0 * (x + a).tanh()).with_terminal(|x| 2.0 * x.cos());
        let mu = RelaxedControl::uniform(grid, 2).unwrap();
        let states = solve_relaxed(&gsde, &mu, &actions, &paths).unwrap();
        for v in grelax::cost::chi(&cost, &mu, &actions, &states).unwrap() {
            prop_assert!(v.abs() <= 2.0 * (grid.horizon() + 1.0));
        }
    }

    #[test]
    fn gheat_comparison_principle(shift in 0.0f64..1.0, scale in 0.1f64..2.0) {
        let grid = PdeGrid::stable(-2.0, 2.0, 41, 0.5, &band()).unwrap();
        let phi = move |x: f64| scale * (x * x).min(1.0) - (2.0 * x).sin();
        let lower = solve_gheat(phi, &band(), &grid).unwrap();
        let upper = solve_gheat(move |x| phi(x) + shift * (1.0 + x.cos()), &band(), &grid).unwrap();
        for k in 0..=grid.nt {
            for (a, b) in lower.row(k).iter().zip(upper.row(k)) {
                prop_assert!(a <= b);
            }
        }
    }
}
