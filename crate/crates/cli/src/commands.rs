//! One function per subcommand. Each writes `<out>/<name>.json` and, where
//! the result is tabular, a CSV next to it.

use std::fmt::Write as _;

use grelax::cost::{cost_stability_study, CostStability};
use grelax::gsde::StabilityRow;
use grelax::optimizer::duality_check;
use grelax::relaxed::ChatteringStudy;
use grelax::{
    chattering_convergence_study, extract_worst_case_scenario, gap_report, generate_noise, solve_gheat, solve_relaxed,
    stability_gap, ActionSet, CostEvaluator, DualityCheck, Estimate, FamilyEstimate, GapReport, NoiseBundle,
    PdeGrid, RelaxedControl, RobustCost, ScenarioFamily, TimeGrid, VolatilityBand, VolatilityScenario,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{create_dir, verify, write_json, write_text, CliError, Command};

pub fn run(command: Command, config: &RunConfig) -> Result<(), CliError> {
    create_dir(&config.out)?;
    match command {
        Command::Gheat => gheat(config),
        Command::Expect => expect(config),
        Command::Paths => paths(config),
        Command::Chatter => chatter(config),
        Command::Solve => solve(config),
        Command::Cost => cost(config),
        Command::Optimize => optimize(config),
        Command::Verify => verify_command(config),
    }
}

/// Scenario family on `grid` as configured, the feedback scenario last.
pub fn build_family(config: &RunConfig, grid: TimeGrid) -> Result<ScenarioFamily, CliError> {
    let band = config.band()?;
    let mut scenarios = config
        .family
        .levels
        .iter()
        .map(|&s| VolatilityScenario::constant(band, grid, s))
        .collect::<Result<Vec<_>, _>>()?;
    for levels in &config.family.piecewise {
        scenarios.push(VolatilityScenario::piecewise(band, grid, levels)?);
    }
    if config.family.worst_case_feedback {
        let surface = solve_gheat(config.payoff.payoff(), &band, &config.pde_grid()?)?;
        scenarios.push(extract_worst_case_scenario(&surface, grid, None)?);
    }
    Ok(ScenarioFamily::new(band, scenarios)?)
}

fn noise(config: &RunConfig, seed: u64, grid: TimeGrid) -> Result<NoiseBundle, CliError> {
    Ok(generate_noise(seed, config.m_paths, grid)?)
}

fn actions(config: &RunConfig) -> Result<ActionSet, CliError> {
    Ok(ActionSet::new(config.actions.clone())?)
}

fn evaluator(config: &RunConfig, seed: u64, grid: TimeGrid) -> Result<CostEvaluator, CliError> {
    let family = build_family(config, grid)?;
    Ok(CostEvaluator::new(
        config.dynamics.build(),
        config.cost.build(),
        actions(config)?,
        &family,
        &noise(config, seed, grid)?,
    )?)
}

fn labels(family: &ScenarioFamily) -> Vec<String> {
    family.scenarios().iter().map(|s| s.label()).collect()
}

#[derive(Serialize)]
struct GheatArtifact {
    experiment: String,
    band: VolatilityBand,
    grid: PdeGrid,
    /// `u(T, 0)`, the sublinear expectation of the payoff of `B_T`.
    value_at_origin: f64,
    /// Share of final-row nodes where the worst case uses the upper volatility.
    upper_fraction: f64,
}

fn gheat(config: &RunConfig) -> Result<(), CliError> {
    let band = config.band()?;
    let grid = config.pde_grid()?;
    let surface = solve_gheat(config.payoff.payoff(), &band, &grid)?;
    let value_at_origin = surface.interpolate(grid.horizon, 0.0)?;
    let last = surface.feedback_row(grid.nt - 1);
    let upper = last.iter().filter(|s| **s == band.sigma_max()).count();
    let artifact = GheatArtifact {
        experiment: config.experiment.clone(),
        band,
        grid,
        value_at_origin,
        upper_fraction: upper as f64 / last.len() as f64,
    };
    write_json(&config.out.join("gheat.json"), &artifact)?;

    let stride = grid.nt.div_ceil(20).max(1);
    let mut csv = String::from("t,x,u,sigma\n");
    let mut rows: Vec<usize> = (0..=grid.nt).step_by(stride).collect();
    if rows.last() != Some(&grid.nt) {
        rows.push(grid.nt);
    }
    for k in rows {
        let feedback = surface.feedback_row(k.min(grid.nt - 1));
        for (i, u) in surface.row(k).iter().enumerate() {
            let _ = writeln!(csv, "{},{},{},{}", k as f64 * grid.dt(), grid.x(i), u, feedback[i]);
        }
    }
    write_text(&config.out.join("gheat.csv"), &csv)?;
    println!("gheat: u(T, 0) = {value_at_origin:.6}");
    Ok(())
}

#[derive(Serialize)]
struct ExpectArtifact {
    experiment: String,
    seed: u64,
    n_paths: usize,
    n_steps: usize,
    scenarios: Vec<String>,
    estimate: FamilyEstimate,
    /// The G-heat value at the horizon, for comparison.
    pde_value: f64,
}

fn expect(config: &RunConfig) -> Result<(), CliError> {
    let family = build_family(config, config.grid)?;
    let payoff = config.payoff.payoff();
    let estimate = family.expectation(&noise(config, config.seed, config.grid)?, |p| payoff(p.terminal()))?;
    let pde_value = solve_gheat(&payoff, &config.band()?, &config.pde_grid()?)?.interpolate(config.grid.horizon(), 0.0)?;
    println!("expect: {:.6} (se {:.2e}, scenario {}), G-heat {:.6}", estimate.value, estimate.se, estimate.argmax, pde_value);
    let artifact = ExpectArtifact {
        experiment: config.experiment.clone(),
        seed: config.seed,
        n_paths: config.m_paths,
        n_steps: config.grid.n_steps(),
        scenarios: labels(&family),
        estimate,
        pde_value,
    };
    write_json(&config.out.join("expect.json"), &artifact)
}

#[derive(Serialize)]
struct PathSummary {
    scenario: String,
    terminal: Estimate,
    terminal_square: Estimate,
    qv_terminal: Estimate,
}

/// Paths written to `paths.csv` per scenario.
const CSV_PATHS: usize = 10;

fn paths(config: &RunConfig) -> Result<(), CliError> {
    let family = build_family(config, config.grid)?;
    let sets = family.generate_paths(&noise(config, config.seed, config.grid)?)?;
    let mut summary = Vec::with_capacity(sets.len());
    let mut csv = String::from("scenario,path,t,b,qv,sigma\n");
    for (j, set) in sets.iter().enumerate() {
        let est = |f: &dyn Fn(&grelax::PathView<'_>) -> f64| Estimate::from_samples(&set.map_paths(f)).ok_or(grelax::Error::NoPaths);
        summary.push(PathSummary {
            scenario: set.scenario().label(),
            terminal: est(&|p| p.terminal())?,
            terminal_square: est(&|p| p.terminal() * p.terminal())?,
            qv_terminal: est(&|p| p.qv[p.qv.len() - 1])?,
        });
        for i in 0..set.m_paths().min(CSV_PATHS) {
            let p = set.path(i);
            for k in 0..=set.n_steps() {
                let sigma = p.sigma.get(k).copied().unwrap_or(f64::NAN);
                let sigma = if sigma.is_nan() { String::new() } else { sigma.to_string() };
                let _ = writeln!(csv, "{j},{i},{},{},{},{sigma}", set.grid().time(k), p.b[k], p.qv[k]);
            }
        }
    }
    println!("paths: {} scenarios x {} paths x {} steps", sets.len(), config.m_paths, config.grid.n_steps());
    write_json(&config.out.join("paths.json"), &summary)?;
    write_text(&config.out.join("paths.csv"), &csv)
}

/// Test functions of the chattering study.
pub fn chatter_test_functions() -> [(&'static str, fn(f64, f64) -> f64); 3] {
    [
        ("t*a", |t, a| t * a),
        ("sin(2 pi t)*a", |t, a| (2.0 * std::f64::consts::PI * t).sin() * a),
        ("t^2*a", |t, a| t * t * a),
    ]
}

pub fn chatter_study(mu: &RelaxedControl, actions: &ActionSet, n_list: &[usize], refinement: usize) -> Result<ChatteringStudy, CliError> {
    let tests = chatter_test_functions();
    let dyn_tests: Vec<grelax::relaxed::TestFunction<'_>> =
        tests.iter().map(|(name, f)| (*name, f as &dyn Fn(f64, f64) -> f64)).collect();
    Ok(chattering_convergence_study(mu, actions, &dyn_tests, n_list, refinement)?)
}

fn chatter(config: &RunConfig) -> Result<(), CliError> {
    let mu = config.control();
    let actions = actions(config)?;
    let study = chatter_study(&mu, &actions, &config.n_list, config.refinement)?;
    let mut csv = String::from("test_function,n,pairing,reference,error\n");
    for r in &study.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.test_function, r.n, r.pairing, r.reference, r.error);
    }
    for (name, slope) in &study.slopes {
        match slope {
            Some(s) => println!("chatter: {name}: slope {s:.3}"),
            None => println!("chatter: {name}: exact"),
        }
    }
    write_json(&config.out.join("chatter.json"), &study)?;
    write_text(&config.out.join("chatter.csv"), &csv)?;
    write_text(&config.out.join("control.csv"), &mu.to_csv(&actions))
}

#[derive(Serialize)]
struct SolveScenario {
    scenario: String,
    terminal: Estimate,
    sup_abs: Estimate,
}

#[derive(Serialize)]
struct SolveArtifact {
    experiment: String,
    seed: u64,
    n_paths: usize,
    control: RelaxedControl,
    scenarios: Vec<SolveScenario>,
    stability: Vec<StabilityRow>,
}

fn solve(config: &RunConfig) -> Result<(), CliError> {
    let family = build_family(config, config.grid)?;
    let sets = family.generate_paths(&noise(config, config.seed, config.grid)?)?;
    let actions = actions(config)?;
    let gsde = config.dynamics.build();
    let mu = config.control();
    let lifted = mu.lift(config.grid)?;
    let mut scenarios = Vec::with_capacity(sets.len());
    for set in &sets {
        let states = solve_relaxed(&gsde, &lifted, &actions, set)?;
        let sup_abs: Vec<f64> = states.paths().map(|x| x.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
        scenarios.push(SolveScenario {
            scenario: set.scenario().label(),
            terminal: Estimate::from_samples(&states.terminal()).ok_or(grelax::Error::NoPaths)?,
            sup_abs: Estimate::from_samples(&sup_abs).ok_or(grelax::Error::NoPaths)?,
        });
    }
    let stability = stability_gap(&gsde, &mu, &actions, &config.n_list, &sets)?;
    let mut csv = String::from("n,value,se,argmax_scenario\n");
    for r in &stability {
        let _ = writeln!(csv, "{},{},{},{}", r.n, r.value, r.se, r.argmax_scenario);
        println!("solve: n = {:>3}  E[sup |x_n - x|^2] = {:.3e} (se {:.1e})", r.n, r.value, r.se);
    }
    let artifact = SolveArtifact {
        experiment: config.experiment.clone(),
        seed: config.seed,
        n_paths: config.m_paths,
        control: mu,
        scenarios,
        stability,
    };
    write_json(&config.out.join("solve.json"), &artifact)?;
    write_text(&config.out.join("stability.csv"), &csv)
}

#[derive(Serialize)]
struct CostArtifact {
    experiment: String,
    scenarios: Vec<String>,
    robust: RobustCost,
    stability: CostStability,
}

fn cost(config: &RunConfig) -> Result<(), CliError> {
    let family = build_family(config, config.grid)?;
    let eval = CostEvaluator::new(
        config.dynamics.build(),
        config.cost.build(),
        actions(config)?,
        &family,
        &noise(config, config.seed, config.grid)?,
    )?;
    let mu = config.control();
    let stability = cost_stability_study(&eval, &mu, &config.n_list)?;
    let robust = stability.relaxed.clone();
    println!("cost: J = {:.6e} (se {:.1e}, scenario {})", robust.value, robust.se, robust.argmax_scenario);
    let mut csv = String::from("n,value,se,diff,diff_se\n");
    for r in &stability.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.n, r.value, r.se, r.diff, r.diff_se);
    }
    let artifact = CostArtifact { experiment: config.experiment.clone(), scenarios: labels(&family), robust, stability };
    write_json(&config.out.join("cost.json"), &artifact)?;
    write_text(&config.out.join("cost_stability.csv"), &csv)
}

#[derive(Serialize)]
struct OptimizeArtifact {
    experiment: String,
    seed: u64,
    report: GapReport,
    duality: DualityCheck,
    /// The relaxed winner re-evaluated on fresh noise (seed + 1).
    fresh_seed: RobustCost,
}

fn optimize(config: &RunConfig) -> Result<(), CliError> {
    let grid = config.control_grid();
    let coarse = evaluator(config, config.seed, config.search_grid())?;
    let fine = evaluator(config, config.seed, config.grid)?;
    let opts = config.search_options();
    let report = gap_report(&coarse, &fine, grid, &config.n_list, &opts)?;
    let duality = duality_check(&coarse, grid, &report.best_relaxed, &opts)?;
    let fresh_seed = evaluator(config, config.seed.wrapping_add(1), config.search_grid())?.robust(&report.best_relaxed.control)?;
    println!(
        "optimize: strict {:.6e}, relaxed {:.6e}, gap {:.3e} (se {:.1e}), fresh-seed relaxed {:.6e}",
        report.best_strict.value, report.best_relaxed.value, report.gap, report.combined_se, fresh_seed.value
    );
    if report.best_relaxed.budget_exhausted {
        println!("optimize: evaluation budget exhausted, best-so-far reported");
    }
    write_text(&config.out.join("chattering_curve.csv"), &report.curve_csv())?;
    write_text(&config.out.join("best_relaxed.csv"), &report.best_relaxed.control.to_csv(&actions(config)?))?;
    let artifact = OptimizeArtifact { experiment: config.experiment.clone(), seed: config.seed, report, duality, fresh_seed };
    write_json(&config.out.join("optimize.json"), &artifact)
}

fn verify_command(config: &RunConfig) -> Result<(), CliError> {
    let report = verify::run_with_determinism(config.seed)?;
    print!("{}", report.table());
    write_json(&config.out.join("verify.json"), &report)?;
    let failed: Vec<String> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(format!("criteria {} did not pass", failed.join(", "))))
    }
}
