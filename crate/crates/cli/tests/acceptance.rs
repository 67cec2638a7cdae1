//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use hons_core::experiments::{
    convergence_study, gauge_equivalence_experiment, persistence_experiment, smoothing_experiment, Candidate,
    ExperimentConfig, InitialCondition, RunScheme, PICARD_MAX_ITER,
};
use hons_core::identities::{
    balance_series, bookkeeping_sweep, e2_integral, e2_residual, e3_integral, e3_residual, l2_drift, InequalityTerms,
    WeightedTerms, RELATIVE_FLOOR, WEIGHT_OVERSAMPLING,
};
use hons_core::integrators::{picard_solve, Scheme, Trajectory};
use hons_core::weights::{canonical_weight, example_weight, verify_weight_class, weight_from_eta, WeightSpec};
use hons_core::{EquationParams, Field, Grid};
use num_rational::Ratio;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn max_edge(traj: &Trajectory) -> f64 {
    traj.states.iter().map(Field::edge_ratio).fold(0.0, f64::max)
}

fn base_config(grid: Grid, dt: f64, scheme: RunScheme) -> ExperimentConfig {
    ExperimentConfig {
        params: EquationParams::base(1.0, 1.0).unwrap(),
        grid,
        initial: InitialCondition::sech(1.0),
        t_end: 1.0,
        dt,
        scheme,
        stride: 1,
        weights: Vec::new(),
        edge_guard: None,
    }
}

fn run_one() -> ExperimentConfig {
    base_config(Grid::new(-50.0, 50.0, 512).unwrap(), 5e-4, RunScheme::Strang)
}

fn conservation() -> Verdict {
    let start = Instant::now();
    let traj = run_one().run().unwrap();
    let secs = start.elapsed().as_secs_f64();
    let drift = l2_drift(&traj).unwrap().max_relative();
    verdict(
        drift <= 1e-8 && secs <= 10.0,
        format!(
            "relative drift {drift:.2e} (<= 1e-8), runtime {secs:.2} s (<= 10), edge/max {:.1e}",
            max_edge(&traj)
        ),
    )
}

fn cross_validation() -> Verdict {
    let strang = run_one().run().unwrap();
    let rk = ExperimentConfig {
        scheme: RunScheme::IfRk4,
        ..run_one()
    }
    .run()
    .unwrap();
    let diff = strang.last().max_diff(rk.last()).unwrap();
    let orders_cfg = base_config(Grid::new(-50.0, 50.0, 256).unwrap(), 0.0125, RunScheme::Strang);
    let report = convergence_study(&orders_cfg, 3).unwrap();
    let in_range = |s: Scheme, lo: f64, hi: f64| {
        report
            .orders
            .iter()
            .filter(|(t, _)| *t == s)
            .all(|(_, o)| !o.is_empty() && o.iter().all(|v| (lo..=hi).contains(v)))
    };
    let orders: Vec<String> = report
        .orders
        .iter()
        .map(|(s, o)| {
            format!(
                "{} {:?}",
                s.name(),
                o.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            )
        })
        .collect();
    let pass = diff <= 1e-6 && in_range(Scheme::Strang, 1.8, 2.2) && in_range(Scheme::IfRk4, 3.7, 4.3) && !report.exact;
    verdict(
        pass,
        format!(
            "strang vs ifrk4 max diff {diff:.2e} (<= 1e-6); orders {}",
            orders.join(", ")
        ),
    )
}

fn gauge_config(omega: f64, steepening: f64, conj: f64, scheme: RunScheme) -> ExperimentConfig {
    let half = 8.0 * std::f64::consts::PI;
    ExperimentConfig {
        params: EquationParams::new(omega, 1.0, 1.0, steepening, conj).unwrap(),
        t_end: 0.5,
        ..base_config(Grid::new(-half, half, 512).unwrap(), 5e-4, scheme)
    }
}

fn gauge() -> Verdict {
    let main = gauge_equivalence_experiment(&gauge_config(3.0, 0.0, 0.0, RunScheme::Strang)).unwrap();
    let flat = gauge_equivalence_experiment(&gauge_config(0.0, 0.0, 0.0, RunScheme::Strang)).unwrap();
    let probe = gauge_equivalence_experiment(&gauge_config(3.0, 0.5, 1.0, RunScheme::IfRk4))
        .unwrap()
        .probe
        .expect("probe runs when both derivative terms are present");
    let pass = main.l2_discrepancy <= 1e-6
        && flat.l2_discrepancy <= 1e-12
        && probe.matches != Candidate::Neither
        && probe.ratio >= 100.0;
    verdict(
        pass,
        format!(
            "L2 discrepancy {:.2e} (<= 1e-6), zero-dispersion {:.2e} (<= 1e-12); probe {:?} matches, derived {:.2e} vs alternative {:.2e}, ratio {:.1e} (>= 100)",
            main.l2_discrepancy,
            flat.l2_discrepancy,
            probe.matches,
            probe.derived_l2,
            probe.alternative_l2,
            probe.ratio
        ),
    )
}

fn energy_identities() -> Verdict {
    let traj = run_one().run().unwrap();
    let e2 = e2_residual(&traj).unwrap();
    let e3 = e3_residual(&traj).unwrap();
    let worst = e2.max_relative().max(e3.max_relative());
    let forms = traj
        .states
        .iter()
        .map(|u| {
            let a = e2_integral(u, 1.0).unwrap();
            let b = e3_integral(u, 1.0).unwrap();
            (a - b).abs()
        })
        .fold(0.0, f64::max);
    let fine = ExperimentConfig {
        dt: 2.5e-4,
        ..run_one()
    }
    .run()
    .unwrap();
    let worst_fine = e2_residual(&fine)
        .unwrap()
        .max_relative()
        .max(e3_residual(&fine).unwrap().max_relative());
    let gain = worst / worst_fine;
    verdict(
        worst <= 1e-4 && forms <= 1e-9 && gain >= 2.0,
        format!(
            "max relative residual {worst:.2e} (<= 1e-4), forms differ by {forms:.1e} (<= 1e-9), gain on halving dt {gain:.2} (>= 2)"
        ),
    )
}

/// Long box for the weighted checks: the growing right tail of the weight
/// must not see the dispersive tail wrapping around the seam.
fn weighted_run() -> Trajectory {
    let cfg = ExperimentConfig {
        edge_guard: Some(hons_core::integrators::BOUNDARY_GUARD),
        ..base_config(Grid::new(-350.0, 50.0, 2048).unwrap(), 5e-4, RunScheme::Strang)
    };
    cfg.run().unwrap()
}

fn relative(t: &WeightedTerms) -> f64 {
    t.residual().abs() / t.scale().max(RELATIVE_FLOOR)
}

fn weighted_identity(series: &[Vec<(WeightedTerms, InequalityTerms)>], edge: f64) -> Verdict {
    let worst: Vec<f64> = series
        .iter()
        .map(|s| s.iter().map(|(t, _)| relative(t)).fold(0.0, f64::max))
        .collect();
    let traj = run_one().run().unwrap();
    let one = canonical_weight(WeightSpec::new(0.0, 0, 0).unwrap()).unwrap();
    let unit = balance_series(&traj, 1, &one, WEIGHT_OVERSAMPLING).unwrap();
    let e2 = e2_residual(&traj).unwrap();
    let gap = unit
        .iter()
        .zip(&e2.residuals)
        .map(|((t, _), r)| (t.residual() - r).abs())
        .fold(0.0, f64::max);
    verdict(
        worst.iter().all(|&w| w <= 1e-3) && gap <= 1e-9,
        format!(
            "relative residual a=1 {:.2e}, a=2 {:.2e} (<= 1e-3); unit weight vs energy identity {gap:.1e} (<= 1e-9); edge/max {edge:.1e}",
            worst[0], worst[1]
        ),
    )
}

fn main_inequality(series: &[Vec<(WeightedTerms, InequalityTerms)>]) -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut min_b = f64::INFINITY;
    let mut ok = true;
    for s in series {
        for (_, l) in s {
            ok &= l.lhs() <= 1e-3 * l.scale() && l.b >= 0.0;
            worst = worst.max(l.lhs() / l.scale());
            min_b = min_b.min(l.b);
        }
    }
    verdict(
        ok,
        format!("largest lhs/scale {worst:.2e} (<= 1e-3), smallest B {min_b:.2e} (>= 0), a in 1..=2"),
    )
}

fn picard() -> Verdict {
    let start = Instant::now();
    let grid = Grid::new(-50.0, 50.0, 512).unwrap();
    let p = EquationParams::base(1.0, 1.0).unwrap();
    let cfg = ExperimentConfig {
        initial: InitialCondition::sech(0.5),
        t_end: 0.05,
        ..base_config(grid, 1e-4, RunScheme::Picard)
    };
    let u0 = cfg.initial_field().unwrap();
    let (u, history) = picard_solve(&u0, cfg.t_end, cfg.dt, &p, PICARD_MAX_ITER, 1e-10).unwrap();
    let reference = ExperimentConfig {
        scheme: RunScheme::Strang,
        ..cfg
    }
    .run()
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let distance = u.sub(reference.last()).unwrap().l2_norm();
    let ratios: Vec<f64> = history.deltas.windows(2).skip(1).map(|w| w[1] / w[0]).collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    verdict(
        !ratios.is_empty() && worst <= 0.8 && distance <= 1e-4 && secs <= 30.0,
        format!(
            "{} iterates, worst delta ratio after iterate 2 {worst:.3} (<= 0.8), L2 distance to strang {distance:.2e} (<= 1e-4), runtime {secs:.1} s (<= 30)",
            history.deltas.len()
        ),
    )
}

fn weight_classes() -> Verdict {
    let grid = Grid::new(-50.0, 50.0, 512).unwrap();
    let mut weights = vec![("example".to_string(), example_weight())];
    for (s, i, k) in [(0.0, 0, 0), (1.0, 2, 0), (1.0, 2, 1)] {
        let spec = WeightSpec::new(s, i, k).unwrap();
        weights.push((spec.to_string(), canonical_weight(spec).unwrap()));
    }
    let mut failures = Vec::new();
    for (name, w) in &weights {
        match verify_weight_class(w, (0.1, 1.0), &grid) {
            Ok(c) => {
                let all = [c.c1, c.c2, c.c3, c.c4, Some(c.c5)];
                if !all.iter().all(|v| v.is_some_and(f64::is_finite)) {
                    failures.push(format!("{name}: non-finite constant"));
                }
            }
            Err(v) => failures.push(format!("{name}: {v}")),
        }
    }
    let eta = canonical_weight(WeightSpec::new(1.0, 1, 0).unwrap()).unwrap();
    let xi = weight_from_eta(&eta, 1.0, 1.0, (-30.0, 30.0)).unwrap();
    let h = 1e-4;
    let mut round_trip = 0.0f64;
    let mut x = -29.0;
    while x < 29.0 {
        let fd = 2.0 * (xi.eval(x + h, 1.0) - xi.eval(x - h, 1.0)) / (2.0 * h);
        let target = eta.eval(x, 1.0);
        round_trip = round_trip.max((fd - target).abs() / target.max(1.0));
        x += 0.37;
    }
    verdict(
        failures.is_empty() && round_trip <= 1e-6,
        format!(
            "{} weights in class{}; antiderivative round trip {round_trip:.1e} (<= 1e-6)",
            weights.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failures: {}", failures.join("; "))
            }
        ),
    )
}

fn bookkeeping() -> Verdict {
    let cases = bookkeeping_sweep(10);
    let simplified: Vec<_> = cases.iter().filter(|c| c.unclipped).collect();
    let bad = simplified
        .iter()
        .filter(|c| c.m * 2 != Ratio::from_integer(4) || c.t * 2 != Ratio::from_integer(-(c.l + 2)))
        .count();
    verdict(
        !simplified.is_empty() && bad == 0,
        format!(
            "{} cases enumerated, {} on simplified branches, {bad} mismatches of 2M = 4, 2T = -(L+2)",
            cases.len(),
            simplified.len()
        ),
    )
}

fn smoothing_config(n: usize) -> ExperimentConfig {
    ExperimentConfig {
        params: EquationParams::base(1.0, 1.0).unwrap(),
        grid: Grid::new(-400.0, 200.0, n).unwrap(),
        initial: InitialCondition::rough(1.0, 4.0, 3, 11),
        t_end: 0.5,
        dt: 1e-3,
        scheme: RunScheme::Strang,
        stride: 10,
        weights: vec![WeightSpec::new(0.5, 3, 0).unwrap()],
        edge_guard: Some(hons_core::integrators::BOUNDARY_GUARD),
    }
}

fn smoothing() -> Verdict {
    let start = Instant::now();
    let coarse = smoothing_experiment(&smoothing_config(4096)).unwrap();
    let fine = smoothing_experiment(&smoothing_config(8192)).unwrap();
    let persistence = persistence_experiment(&smoothing_config(4096)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let mut worst_norm = 0.0f64;
    let mut worst_integral = 0.0f64;
    let mut levels = Vec::new();
    for (a, b) in coarse.series.iter().zip(&fine.series) {
        levels.push(a.l);
        for (x, y) in a.norms.iter().zip(&b.norms) {
            worst_norm = worst_norm.max(rel(*x, *y));
        }
        worst_integral = worst_integral.max(rel(a.integral(), b.integral()));
    }
    let local = rel(coarse.local_smoothing[0].1, fine.local_smoothing[0].1);
    let window = coarse.series[0].times.first().copied().unwrap_or(f64::NAN);
    let pass = coarse.is_finite()
        && fine.is_finite()
        && levels == [0, 1, 2]
        && worst_norm < 0.05
        && worst_integral < 0.05
        && local < 0.05
        && persistence.success
        && secs <= 60.0;
    verdict(
        pass,
        format!(
            "levels {levels:?} from t = {window}, norm change {worst_norm:.2e}, integral change {worst_integral:.2e}, local smoothing {:.4e} change {local:.2e} (all < 5%); persistence sup {:.3e}; runtime {secs:.1} s (<= 60)",
            coarse.local_smoothing[0].1, persistence.sup
        ),
    )
}

const RUN_ONE: &str = r#"[equation]
omega = 1.0
beta = 1.0
gamma = 1.0

[grid]
x_min = -50.0
x_max = 50.0
n = 512
edge_guard = 0.0

[time]
t_end = 1.0
dt = 5e-4
scheme = "strang"

[initial]
kind = "sech"

[[weights]]
sigma = 0.5
i = 1
"#;

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, RUN_ONE).unwrap();
    let mut identical = true;
    let mut checked = Vec::new();
    for sub in ["simulate", "persistence", "weights-verify"] {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "4", "4"].iter().enumerate() {
            let out_dir = dir.path().join(format!("{sub}-{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_hons"))
                .arg(sub)
                .arg("--config")
                .arg(&config)
                .arg("--out-dir")
                .arg(&out_dir)
                .env("HONS_THREADS", threads)
                .output()
                .unwrap()
                .status;
            identical &= status.success();
            let mut files: Vec<_> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().path()).collect();
            files.sort();
            outputs.push(files.iter().map(|f| fs::read(f).unwrap()).collect::<Vec<_>>());
        }
        identical &= outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
        checked.push(sub);
    }
    verdict(
        identical,
        format!(
            "{} repeated three times with 1 and 4 threads, byte-identical CSV",
            checked.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let weighted = weighted_run();
    let edge = max_edge(&weighted);
    let w = example_weight();
    let series: Vec<_> = (1..=2)
        .map(|a| balance_series(&weighted, a, &w, WEIGHT_OVERSAMPLING).unwrap())
        .collect();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("L2 conservation", Box::new(conservation)),
        ("scheme cross-validation and orders", Box::new(cross_validation)),
        ("gauge equivalence", Box::new(gauge)),
        ("energy identities", Box::new(energy_identities)),
        ("exact weighted identity", Box::new(|| weighted_identity(&series, edge))),
        ("weighted inequality", Box::new(|| main_inequality(&series))),
        ("Picard iteration", Box::new(picard)),
        ("weight classes", Box::new(weight_classes)),
        ("exponent bookkeeping", Box::new(bookkeeping)),
        ("smoothing and persistence", Box::new(smoothing)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:2} {tag} {name}: {}", k + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
