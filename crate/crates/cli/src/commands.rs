//! Subcommand implementations. Grid points are evaluated in parallel and
//! emitted in grid order (β outer, field inner).

use std::io::Write;

use qgrem::classical::{classical_pressure, crem_truncated_pressure, freezing_beta};
use qgrem::model::{ConcaveHull, Envelope};
use qgrem::nonhier::{
    classical_nonhier_pressure, greedy_chain, greedy_quantum_pressure, quantum_nonhier_pressure, NonHierModel,
    ENUMERATION_LIMIT,
};
use qgrem::quantum::{magnetization, qcrem_pressure, qgrem_pressure, transition_scan, Maximizer, ScanConfig, TransitionOrder};
use qgrem::verify::{
    concentration_check, convergence_study, random_flip_pattern, replica_seed, sample_instance,
    sign_invariance_check, Disorder, Method, StochasticConfig, StudyOptions,
};
use qgrem::LN2;
use rayon::prelude::*;

use crate::config::{Check, Command, FieldPoint, MethodArg, RunConfig};
use crate::input::ModelInput;
use crate::output::{fmt_f64, manifest_line, render, write_table, Table};
use crate::{CliError, CliResult, ErrorKind};

/// Largest N used by the sign-invariance check (dense eigendecompositions).
const SIGN_CHECK_MAX_SPINS: usize = 10;
const SIGN_CHECK_PATTERNS: u64 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub manifest: String,
    pub table: Table,
    pub transitions: Option<Table>,
    /// Human-readable report lines (`PASS ...`, `FAIL ...`, `SKIP ...`).
    pub report: Vec<String>,
    pub failed: bool,
}

impl RunOutput {
    fn new(cfg: &RunConfig, table: Table) -> Self {
        Self {
            manifest: manifest_line(&cfg.hash(), cfg.seed),
            table,
            transitions: None,
            report: Vec::new(),
            failed: false,
        }
    }

    fn check(&mut self, pass: bool, message: String) {
        self.failed |= !pass;
        self.report.push(format!("{} {message}", if pass { "PASS" } else { "FAIL" }));
    }

    pub fn csv(&self) -> String {
        render(&self.manifest, &self.table)
    }

    pub fn transitions_csv(&self) -> Option<String> {
        self.transitions.as_ref().map(|t| render(&self.manifest, t))
    }
}

pub fn run(cfg: &RunConfig) -> CliResult<RunOutput> {
    match cfg.command {
        Command::Pressure => run_pressure(cfg),
        Command::PhaseDiagram => run_phase_diagram(cfg),
        Command::Nonhier => run_nonhier(cfg),
        Command::Verify => run_verify(cfg),
    }
}

/// Runs the configured command and writes its outputs. Returns `false` when
/// a verification assertion failed.
pub fn execute(cfg: &RunConfig) -> CliResult<bool> {
    let output = run(cfg)?;
    let io = |e: std::io::Error| CliError::validation(format!("cannot write output: {e}"));
    match &cfg.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(io)?;
            write_table(std::io::BufWriter::new(file), &output.manifest, &output.table)?;
        }
        None => write_table(std::io::stdout().lock(), &output.manifest, &output.table)?,
    }
    if let (Some(path), Some(table)) = (&cfg.transitions, &output.transitions) {
        let file = std::fs::File::create(path).map_err(io)?;
        write_table(std::io::BufWriter::new(file), &output.manifest, table)?;
    }
    // keep stdout clean for CSV when no output file is given
    let report: Box<dyn Write> = if cfg.out.is_some() {
        Box::new(std::io::stdout().lock())
    } else {
        Box::new(std::io::stderr().lock())
    };
    let mut report = report;
    for line in &output.report {
        writeln!(report, "{line}").map_err(io)?;
    }
    Ok(!output.failed)
}

fn grid(cfg: &RunConfig) -> Vec<(f64, &FieldPoint)> {
    cfg.beta
        .points()
        .into_iter()
        .flat_map(|b| cfg.fields.iter().map(move |f| (b, f)))
        .collect()
}

fn phases_of_set(model: &NonHierModel, set: qgrem::nonhier::Subset) -> String {
    (0..model.n()).map(|k| if set.contains(k) { 'C' } else { 'P' }).collect()
}

fn argmax_label(argmax: Maximizer) -> String {
    match argmax {
        Maximizer::Level(k) => format!("K={k}"),
        Maximizer::Fraction(z) => format!("z={}", fmt_f64(z)),
    }
}

/// `(classical, quantum, argmax, block_phases)` at one grid point.
fn pressure_point(model: &ModelInput, hull: Option<&ConcaveHull>, beta: f64, point: &FieldPoint) -> CliResult<[String; 4]> {
    Ok(match model {
        ModelInput::Hierarchical(_) => {
            let hull = hull.expect("hierarchical models have a hull");
            let q = qgrem_pressure(hull, beta, &point.field);
            [
                fmt_f64(classical_pressure(hull, beta)),
                fmt_f64(q.value),
                argmax_label(q.argmax),
                q.phase_string(),
            ]
        }
        ModelInput::Smooth { envelope, .. } => {
            let q = qcrem_pressure(envelope, beta, &point.field);
            [
                fmt_f64(crem_truncated_pressure(envelope, beta, 1.0)?),
                fmt_f64(q.value),
                argmax_label(q.argmax),
                q.phase_string(),
            ]
        }
        ModelInput::NonHierarchical(m) if m.n() <= ENUMERATION_LIMIT => {
            let (classical, _) = classical_nonhier_pressure(m, beta)?;
            let q = quantum_nonhier_pressure(m, beta, &point.field)?;
            [
                fmt_f64(classical),
                fmt_f64(q.value),
                format!("D={}", q.terminal),
                phases_of_set(m, q.terminal),
            ]
        }
        ModelInput::NonHierarchical(m) => {
            // single greedy chain; exact by the chain reduction
            let hull = hull.expect("greedy hull");
            let q = greedy_quantum_pressure(m, beta, &point.field);
            [
                fmt_f64(classical_pressure(hull, beta)),
                fmt_f64(q.value),
                format!("greedy:{}", argmax_label(q.argmax)),
                q.phase_string(),
            ]
        }
    })
}

/// One row per (β, field) point: classical and quantum pressure, maximizer
/// and block phases.
pub fn run_pressure(cfg: &RunConfig) -> CliResult<RunOutput> {
    let hull = cfg.model.hull()?;
    let rows = grid(cfg)
        .par_iter()
        .map(|&(beta, point)| {
            let [c, q, a, p] = pressure_point(&cfg.model, hull.as_ref(), beta, point)?;
            Ok(vec![fmt_f64(beta), point.label.clone(), c, q, a, p])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = Table::new(&["beta", "gamma_or_law", "classical", "quantum", "argmax", "block_phases"]);
    table.rows = rows;
    Ok(RunOutput::new(cfg, table))
}

/// Exhaustive max–min and min formulas next to the greedy single chain.
pub fn run_nonhier(cfg: &RunConfig) -> CliResult<RunOutput> {
    let ModelInput::NonHierarchical(model) = &cfg.model else {
        return Err(CliError::validation("the nonhier subcommand needs a non-hierarchical model"));
    };
    let greedy = greedy_chain(model);
    let rows = grid(cfg)
        .par_iter()
        .map(|&(beta, point)| {
            let (classical, argmin) = classical_nonhier_pressure(model, beta)?;
            let q = quantum_nonhier_pressure(model, beta, &point.field)?;
            let g = greedy_quantum_pressure(model, beta, &point.field);
            Ok(vec![
                fmt_f64(beta),
                point.label.clone(),
                fmt_f64(classical),
                argmin.to_string(),
                fmt_f64(q.value),
                q.terminal.to_string(),
                q.chain.to_string(),
                greedy.to_string(),
                fmt_f64(g.value),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = Table::new(&[
        "beta",
        "gamma_or_law",
        "classical",
        "argmin_chain",
        "quantum",
        "argmax_terminal",
        "minimizing_chain",
        "greedy_chain",
        "greedy_quantum",
    ]);
    table.rows = rows;
    Ok(RunOutput::new(cfg, table))
}

fn envelope_of(model: &ModelInput, hull: Option<&ConcaveHull>) -> Box<dyn Envelope + Sync + Send> {
    match (model, hull) {
        (ModelInput::Smooth { envelope, .. }, _) => Box::new(envelope.clone()),
        (_, Some(h)) => Box::new(h.clone()),
        (_, None) => unreachable!("non-smooth models have a hull"),
    }
}

/// Pressure and magnetization on the β × Γ grid, plus glass temperatures
/// and magnetic transition lines.
pub fn run_phase_diagram(cfg: &RunConfig) -> CliResult<RunOutput> {
    if cfg.fields.iter().any(|f| f.gamma.is_none()) {
        return Err(CliError::validation("phase diagrams need a constant field"));
    }
    let hull = cfg.model.hull()?;
    let env = envelope_of(&cfg.model, hull.as_ref());
    let rows = grid(cfg)
        .par_iter()
        .map(|&(beta, point)| {
            let gamma = point.gamma.expect("constant field");
            let q = qcrem_pressure(env.as_ref(), beta, &point.field);
            vec![
                fmt_f64(beta),
                fmt_f64(gamma),
                fmt_f64(q.value),
                fmt_f64(magnetization(env.as_ref(), beta, gamma)),
                q.phase_string(),
            ]
        })
        .collect::<Vec<_>>();
    let mut table = Table::new(&["beta", "gamma", "quantum", "magnetization", "block_phases"]);
    table.rows = rows;

    let mut lines = Table::new(&["kind", "line", "beta", "gamma", "order"]);
    let glass: Vec<f64> = match &hull {
        Some(h) => h.slopes().into_iter().map(freezing_beta).filter(|b| b.is_finite()).collect(),
        None => {
            let top = env.pieces()[0].slope_start;
            if top > 0.0 {
                vec![(2.0 * LN2 / top).sqrt()]
            } else {
                Vec::new()
            }
        }
    };
    for (l, b) in glass.iter().enumerate() {
        lines.rows.push(vec!["glass".into(), (l + 1).to_string(), fmt_f64(*b), fmt_f64(0.0), "second".into()]);
    }
    let config = ScanConfig::default();
    let scans = cfg
        .beta
        .points()
        .into_par_iter()
        .filter(|b| *b > 0.0)
        .map(|beta| Ok((beta, transition_scan(env.as_ref(), beta, &config)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut magnetic_lines = 0;
    for (beta, scan) in &scans {
        magnetic_lines = magnetic_lines.max(scan.len());
        for (i, t) in scan.iter().enumerate() {
            let order = match t.order {
                TransitionOrder::First => "first",
                TransitionOrder::Second => "second",
            };
            lines.rows.push(vec![
                "magnetic".into(),
                (scan.len() - i).to_string(),
                fmt_f64(*beta),
                fmt_f64(t.gamma),
                order.into(),
            ]);
        }
    }
    let mut output = RunOutput::new(cfg, table);
    output.report.push(format!(
        "transition lines: {magnetic_lines} magnetic, {} glass temperatures",
        glass.len()
    ));
    output.transitions = Some(lines);
    Ok(output)
}

fn disorder_of(model: &ModelInput) -> Disorder {
    match model {
        ModelInput::Hierarchical(spec) => Disorder::Hierarchical(spec.clone()),
        ModelInput::Smooth { interpolation, .. } => Disorder::Hierarchical(interpolation.clone()),
        ModelInput::NonHierarchical(m) => Disorder::NonHierarchical(m.clone()),
    }
}

fn method_of(cfg: &RunConfig) -> Method {
    let stochastic = StochasticConfig {
        probes: cfg.probes,
        ..StochasticConfig::default()
    };
    match cfg.method {
        MethodArg::Exact => Method::Exact,
        MethodArg::Stochastic => Method::Stochastic(stochastic),
        MethodArg::Auto => Method::Auto {
            exact_max_spins: cfg.exact_max,
            stochastic,
        },
    }
}

/// Convergence, concentration and sign-invariance checks; the CSV holds
/// every convergence replica.
pub fn run_verify(cfg: &RunConfig) -> CliResult<RunOutput> {
    let seed = cfg.seed.ok_or_else(|| CliError::usage("verify runs need --seed"))?;
    let disorder = disorder_of(&cfg.model);
    let method = method_of(cfg);
    let mut output = RunOutput::new(cfg, Table::new(&["replica", "N", "beta", "gamma_or_law", "phi_N"]));
    if matches!(cfg.model, ModelInput::Smooth { .. }) {
        output
            .report
            .push("note: smooth profile sampled through its piecewise-linear interpolation at the knots".into());
    }
    for (beta, point) in grid(cfg) {
        let tag = format!("β={beta} field={}", point.label);
        if cfg.checks.contains(&Check::Convergence) {
            let options = StudyOptions {
                method,
                freeze_field: false,
            };
            let study = convergence_study(&disorder, &point.field, beta, &cfg.sizes, cfg.replicas, seed, &options)?;
            for s in &study.samples {
                output.table.rows.push(vec![
                    s.replica.to_string(),
                    s.spins.to_string(),
                    fmt_f64(beta),
                    point.label.clone(),
                    fmt_f64(s.phi),
                ]);
            }
            for row in &study.rows {
                output.report.push(format!(
                    "INFO convergence {tag} N={}: mean {:.6} std {:.6} limit {:.6} gap {:.6}",
                    row.spins, row.mean, row.std_dev, row.limit, row.gap
                ));
            }
            let unconverged = study.samples.iter().filter(|s| !s.converged).count();
            if unconverged > 0 {
                output.check(false, format!("stochastic estimator {tag}: {unconverged} replicas missed the truncation tolerance"));
            }
            let (first, last) = (study.rows[0], study.rows[study.rows.len() - 1]);
            output.check(
                last.gap <= cfg.tolerance,
                format!("convergence {tag} N={}: |mean - limit| = {:.6} <= {}", last.spins, last.gap, cfg.tolerance),
            );
            if study.rows.len() > 1 {
                output.check(
                    last.gap < first.gap,
                    format!(
                        "gap trend {tag}: gap(N={}) = {:.6} < gap(N={}) = {:.6}",
                        last.spins, last.gap, first.spins, first.gap
                    ),
                );
            }
        }
        if cfg.checks.contains(&Check::Concentration) {
            if cfg.replicas < qgrem::verify::CONCENTRATION_MIN_REPLICAS {
                output.report.push(format!(
                    "SKIP concentration {tag}: needs at least {} replicas",
                    qgrem::verify::CONCENTRATION_MIN_REPLICAS
                ));
            } else {
                for &n in &cfg.sizes {
                    let report = concentration_check(&disorder, &point.field, n, beta, cfg.replicas, seed, &method)?;
                    let tails = report
                        .tails
                        .iter()
                        .map(|t| format!("t={}: {:.4} <= {:.4}", t.t, t.fraction, t.bound + t.slack))
                        .collect::<Vec<_>>()
                        .join(", ");
                    output.check(report.passed(), format!("concentration {tag} N={n}: {tails}"));
                }
            }
        }
        if cfg.checks.contains(&Check::Sign) {
            for &n in &cfg.sizes {
                if n > SIGN_CHECK_MAX_SPINS {
                    output.report.push(format!("SKIP sign invariance {tag} N={n}: dense check limited to N <= {SIGN_CHECK_MAX_SPINS}"));
                    continue;
                }
                let inst = sample_instance(&disorder, &point.field, n, replica_seed(seed, 0))?;
                let worst = (0..SIGN_CHECK_PATTERNS)
                    .map(|k| sign_invariance_check(&inst, beta, &random_flip_pattern(n, replica_seed(seed, 1_000 + k))))
                    .collect::<qgrem::Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                output.check(
                    worst <= cfg.sign_tolerance,
                    format!("sign invariance {tag} N={n}: max relative deviation {worst:.3e} <= {:e}", cfg.sign_tolerance),
                );
            }
        }
    }
    Ok(output)
}

/// Maps an assertion failure to its error.
pub fn assertion_failure() -> CliError {
    CliError {
        kind: ErrorKind::Assertion,
        message: "one or more verification checks failed".into(),
    }
}
