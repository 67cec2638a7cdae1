//! Subcommand bodies: each turns a validated configuration into CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use hons_core::experiments::{
    convergence_study, final_state, gauge_equivalence_experiment, persistence_experiment, smoothing_experiment,
    Candidate, ExperimentConfig, RunScheme,
};
use hons_core::identities::{
    balance_series, e2_residual, e3_residual, WeightedTerms, RELATIVE_FLOOR, WEIGHT_OVERSAMPLING,
};
use hons_core::weights::{canonical_weight, example_weight, verify_weight_class, Weight};
use hons_core::Field;
use rayon::prelude::*;

use crate::config::{parse_config, RunConfig};
use crate::output::{config_hash, output_file, write_csv, Cell, Csv};
use crate::{CliError, Command, CommandKind};

/// One table to be written under the output directory.
pub struct Table {
    pub stem: String,
    pub csv: Csv,
}

impl Table {
    fn new(stem: impl Into<String>, csv: Csv) -> Self {
        Self { stem: stem.into(), csv }
    }
}

/// Result of a command: tables plus a human-readable summary.
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
}

pub fn execute(command: &Command) -> Result<String, CliError> {
    let (kind, args) = command.split();
    let text = fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        context: format!("cannot read {}", args.config.display()),
        source,
    })?;
    let cfg = parse_config(&text).map_err(CliError::Config)?;
    let hash = config_hash(&text);
    let dir = args.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_path));
    if args.dry_run {
        return Ok(plan(kind, &cfg, &dir, &hash));
    }
    let outcome = compute(kind, &cfg)?;
    let mut lines = outcome.summary;
    for table in &outcome.tables {
        let path = output_file(&dir, &table.stem, &hash);
        write_csv(&path, &table.csv).map_err(|source| CliError::Io {
            context: format!("cannot write {}", path.display()),
            source,
        })?;
        lines.push(format!("wrote {} ({} rows)", path.display(), table.csv.len()));
    }
    Ok(lines.join("\n"))
}

fn stems(kind: CommandKind, cfg: &RunConfig) -> Vec<String> {
    match kind {
        CommandKind::Smoothing => {
            let mut sigmas = cfg.experiment.sigmas();
            if sigmas.is_empty() {
                sigmas.push(0.5);
            }
            sigmas.iter().map(|s| smoothing_stem(*s)).collect()
        }
        _ => vec![kind.name().to_string()],
    }
}

fn smoothing_stem(sigma: f64) -> String {
    format!("smoothing-sigma{sigma}")
}

fn plan(kind: CommandKind, cfg: &RunConfig, dir: &Path, hash: &str) -> String {
    let mut out = format!("plan: {}\n{cfg}\n", kind.name());
    for stem in stems(kind, cfg) {
        out.push_str(&format!("would write {}\n", output_file(dir, &stem, hash).display()));
    }
    out.pop();
    out
}

/// Runs the command without touching the file system.
pub fn compute(kind: CommandKind, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let e = &cfg.experiment;
    let p = cfg.precision;
    match kind {
        CommandKind::Simulate => simulate(e, p),
        CommandKind::GaugeCheck => gauge_check(e, p),
        CommandKind::IdentityCheck => identity_check(e, p),
        CommandKind::Smoothing => smoothing(e, p),
        CommandKind::Persistence => persistence(e, p),
        CommandKind::Convergence => convergence(e, p, cfg.levels),
        CommandKind::WeightsVerify => weights_verify(e, p),
    }
}

fn norm_row(t: f64, u: &Field) -> Result<Vec<Cell>, hons_core::Error> {
    Ok(vec![
        t.into(),
        u.l2_norm().into(),
        u.sobolev_norm_sq(1)?.sqrt().into(),
        u.sobolev_norm_sq(3)?.sqrt().into(),
        u.max_abs().into(),
        u.edge_magnitude().into(),
    ])
}

fn simulate(e: &ExperimentConfig, precision: usize) -> Result<Outcome, CliError> {
    let mut csv = Csv::new(&["t", "l2", "h1", "h3", "linf", "edge_mag"], precision);
    let samples: Vec<(f64, Field)> = if e.scheme == RunScheme::Picard {
        vec![(0.0, e.initial_field()?), (e.t_end, final_state(e)?)]
    } else {
        let traj = e.run()?;
        traj.times.into_iter().zip(traj.states).collect()
    };
    let rows: Vec<Vec<Cell>> = samples
        .par_iter()
        .map(|(t, u)| norm_row(*t, u))
        .collect::<Result<_, _>>()?;
    for row in rows {
        csv.push(row);
    }
    let (_, last) = samples.last().expect("nonempty");
    let summary = vec![format!(
        "simulate: {} states, final L2 = {:e}, edge/max = {:e}",
        samples.len(),
        last.l2_norm(),
        last.edge_ratio()
    )];
    Ok(Outcome {
        tables: vec![Table::new("simulate", csv)],
        summary,
    })
}

fn candidate_name(c: Candidate) -> &'static str {
    match c {
        Candidate::Derived => "derived",
        Candidate::Alternative => "alternative",
        Candidate::Neither => "neither",
    }
}

fn gauge_check(e: &ExperimentConfig, precision: usize) -> Result<Outcome, CliError> {
    let report = gauge_equivalence_experiment(e)?;
    let mut csv = Csv::new(
        &[
            "max_discrepancy",
            "l2_discrepancy",
            "derived_cubic",
            "alternative_cubic",
            "derived_l2",
            "alternative_l2",
            "ratio",
            "matches",
        ],
        precision,
    );
    let probe = report.probe;
    csv.push(vec![
        report.max_discrepancy.into(),
        report.l2_discrepancy.into(),
        probe.map(|q| q.derived_cubic).into(),
        probe.map(|q| q.alternative_cubic).into(),
        probe.map(|q| q.derived_l2).into(),
        probe.map(|q| q.alternative_l2).into(),
        probe.map(|q| q.ratio).into(),
        probe.map_or(Cell::Empty, |q| candidate_name(q.matches).into()),
    ]);
    let mut summary = vec![format!(
        "gauge-check: max discrepancy {:e}, L2 discrepancy {:e}",
        report.max_discrepancy, report.l2_discrepancy
    )];
    if let Some(q) = probe {
        summary.push(format!(
            "probe: derived {:e} vs alternative {:e}, matches {}",
            q.derived_l2,
            q.alternative_l2,
            candidate_name(q.matches)
        ));
    }
    Ok(Outcome {
        tables: vec![Table::new("gauge-check", csv)],
        summary,
    })
}

fn identity_check(e: &ExperimentConfig, precision: usize) -> Result<Outcome, CliError> {
    let traj = e.run()?;
    let e2 = e2_residual(&traj)?;
    let e3 = e3_residual(&traj)?;
    let w = example_weight();
    let first = balance_series(&traj, 1, &w, WEIGHT_OVERSAMPLING)?;
    let second = balance_series(&traj, 2, &w, WEIGHT_OVERSAMPLING)?;
    let mut csv = Csv::new(
        &[
            "t",
            "e2_resid",
            "e2_rel",
            "e3_resid",
            "e3_rel",
            "wid_a1_rel",
            "wid_a2_rel",
            "lemma31_lhs",
            "lemma31_scale",
        ],
        precision,
    );
    let mut worst_balance = 0.0f64;
    let mut worst_bound = f64::NEG_INFINITY;
    for j in 0..e2.times.len() {
        let (t1, l1) = &first[j];
        let (t2, l2) = &second[j];
        let rel = |t: &WeightedTerms| t.residual().abs() / t.scale().max(RELATIVE_FLOOR);
        let (r1, r2) = (rel(t1), rel(t2));
        let bound = if l1.lhs() / l1.scale() >= l2.lhs() / l2.scale() {
            l1
        } else {
            l2
        };
        worst_balance = worst_balance.max(r1).max(r2);
        worst_bound = worst_bound.max(bound.lhs() / bound.scale());
        csv.push(vec![
            e2.times[j].into(),
            e2.residuals[j].into(),
            e2.relative[j].into(),
            e3.residuals[j].into(),
            e3.relative[j].into(),
            r1.into(),
            r2.into(),
            bound.lhs().into(),
            bound.scale().into(),
        ]);
    }
    let summary = vec![
        format!(
            "identity-check: max relative e2 {:e}, e3 {:e}, weighted balance {:e}",
            e2.max_relative(),
            e3.max_relative(),
            worst_balance
        ),
        format!("largest lhs/scale of the weighted inequality: {worst_bound:e}"),
    ];
    Ok(Outcome {
        tables: vec![Table::new("identity-check", csv)],
        summary,
    })
}

fn smoothing(e: &ExperimentConfig, precision: usize) -> Result<Outcome, CliError> {
    let report = smoothing_experiment(e)?;
    let mut tables: Vec<Table> = Vec::new();
    for series in &report.series {
        let stem = smoothing_stem(series.sigma);
        if tables.last().is_none_or(|t| t.stem != stem) {
            let header = ["t", "l", "weighted_norm", "smoothing_integral_partial"];
            tables.push(Table::new(stem, Csv::new(&header, precision)));
        }
        let csv = &mut tables.last_mut().expect("pushed above").csv;
        for j in 0..series.times.len() {
            csv.push(vec![
                series.times[j].into(),
                series.l.into(),
                series.norms[j].into(),
                series.partials[j].into(),
            ]);
        }
    }
    let mut summary = vec![format!(
        "smoothing: L = {}, {} series, all finite: {}",
        report.decay,
        report.series.len(),
        report.is_finite()
    )];
    for (sigma, v) in &report.local_smoothing {
        summary.push(format!("local smoothing integral (sigma = {sigma}): {v:e}"));
    }
    Ok(Outcome { tables, summary })
}

fn persistence(e: &ExperimentConfig, precision: usize) -> Result<Outcome, CliError> {
    let report = persistence_experiment(e)?;
    let mut csv = Csv::new(&["t", "weighted_norm", "smoothing_integral_partial"], precision);
    for j in 0..report.times.len() {
        csv.push(vec![
            report.times[j].into(),
            report.norms[j].into(),
            report.partials[j].into(),
        ]);
    }
    let summary = vec![format!(
        "persistence: order {}, i = {}, sup norm {:e}, smoothing integral {:e}, success: {}",
        report.order, report.power, report.sup, report.smoothing_integral, report.success
    )];
    Ok(Outcome {
        tables: vec![Table::new("persistence", csv)],
        summary,
    })
}

fn convergence(e: &ExperimentConfig, precision: usize, levels: usize) -> Result<Outcome, CliError> {
    let report = convergence_study(e, levels)?;
    let mut csv = Csv::new(&["scheme", "dt", "error", "order"], precision);
    let mut summary = Vec::new();
    for (scheme, orders) in &report.orders {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.scheme == *scheme).collect();
        for (j, row) in rows.iter().enumerate() {
            let order = if j == 0 { None } else { orders.get(j - 1).copied() };
            csv.push(vec![
                scheme.name().into(),
                row.dt.into(),
                row.error.into(),
                order.into(),
            ]);
        }
        let shown: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
        summary.push(format!("convergence {}: orders [{}]", scheme.name(), shown.join(", ")));
    }
    if report.exact {
        summary.push("all errors at the roundoff floor; orders are not meaningful".into());
    }
    Ok(Outcome {
        tables: vec![Table::new("convergence", csv)],
        summary,
    })
}

fn weights_verify(e: &ExperimentConfig, precision: usize) -> Result<Outcome, CliError> {
    let mut weights: Vec<(&str, Weight)> = vec![("example", example_weight())];
    for spec in &e.weights {
        weights.push(("canonical", canonical_weight(*spec)?));
    }
    let mut csv = Csv::new(
        &["weight", "sigma", "i", "k", "c1", "c2", "c3", "c4", "c5", "status"],
        precision,
    );
    let range = (0.1 * e.t_end, e.t_end);
    let mut failures = 0;
    for (name, w) in &weights {
        let spec = w.spec();
        let mut row: Vec<Cell> = vec![(*name).into(), spec.sigma.into(), spec.i.into(), spec.k.into()];
        match verify_weight_class(w, range, &e.grid) {
            Ok(c) => {
                row.extend([
                    c.c1.into(),
                    c.c2.into(),
                    c.c3.into(),
                    c.c4.into(),
                    c.c5.into(),
                    "ok".into(),
                ]);
            }
            Err(v) => {
                failures += 1;
                row.extend((0..5).map(|_| Cell::Empty));
                row.push(Cell::Text(format!("{} at x={} t={}", v.condition, v.x, v.t)));
            }
        }
        csv.push(row);
    }
    let summary = vec![format!(
        "weights-verify: {} weights checked, {} violations",
        weights.len(),
        failures
    )];
    Ok(Outcome {
        tables: vec![Table::new("weights-verify", csv)],
        summary,
    })
}
