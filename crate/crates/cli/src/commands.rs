//! The six subcommands: closed-form solve, RK4 integration, the
//! closed-form-versus-oracle comparison, linkage-disequilibrium export,
//! product equilibria, and the discrete-time map.

use std::path::Path;

use anyhow::Context;
use recombinator::dynamics::{
    discrete_interference_step, equilibrium, integrate_rk4_at, solve_combined, Trajectory,
};
use recombinator::recombination::{coeff_b, linkage_disequilibria, span_link_set};
use recombinator::type_space::LinkSet;
use serde::Serialize;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::output::{atomic_write, csv_header, format_number, state_labels};
use crate::CliError;

fn trajectory_csv(run: &RunConfig, traj: &Trajectory, command_line: &str) -> String {
    let mut out = csv_header(run, command_line);
    out.push('t');
    for label in state_labels(run.model.space()) {
        out.push(',');
        out.push_str(&label);
    }
    out.push('\n');
    for (i, state) in traj.states.iter().enumerate() {
        out.push_str(&format_number(traj.times[i]));
        for w in state.weights() {
            out.push(',');
            out.push_str(&format_number(*w));
        }
        out.push('\n');
    }
    out
}

fn link_set_label(set: LinkSet) -> String {
    let links: Vec<String> = set.links().map(|l| l.to_string()).collect();
    links.join(".")
}

/// Closed-form trajectory plus the coefficient companion table.
pub fn run_solve(run: &RunConfig, out_dir: &Path, command_line: &str) -> Result<(), CliError> {
    let traj = solve_combined(&run.model, &run.times).map_err(anyhow::Error::from)?;
    atomic_write(&out_dir.join("trajectory.csv"), &trajectory_csv(run, &traj, command_line))?;

    let tables = traj.coefficients.as_ref().expect("solver records coefficients");
    let full = run.model.space().full_links();
    let mut out = csv_header(run, command_line);
    out.push('t');
    for set in full.subsets() {
        out.push_str(&format!(",a[{}]", link_set_label(set)));
    }
    for set in full.subsets() {
        out.push_str(&format!(",b[{}]", link_set_label(set)));
    }
    if traj.mean_fitness.is_some() {
        out.push_str(",mean_fitness");
    }
    out.push('\n');
    for (i, table) in tables.iter().enumerate() {
        out.push_str(&format_number(traj.times[i]));
        for value in table.a_values().iter().chain(table.b_values()) {
            out.push(',');
            out.push_str(&format_number(*value));
        }
        if let Some(trace) = &traj.mean_fitness {
            out.push(',');
            out.push_str(&format_number(trace.values[i]));
        }
        out.push('\n');
    }
    atomic_write(&out_dir.join("coefficients.csv"), &out)?;
    Ok(())
}

fn check_grid_against_dt(run: &RunConfig) -> Result<(), CliError> {
    for &t in &run.times {
        let k = (t / run.dt).round();
        if (t - k * run.dt).abs() > 1e-9 * t.max(1.0) {
            return Err(CliError::Config(format!(
                "times: sample time {t} is not a multiple of dt = {} (the oracle stores \
                 states on integration steps only)",
                run.dt
            )));
        }
    }
    Ok(())
}

/// Fixed-step RK4 trajectory on the same grid.
pub fn run_integrate(run: &RunConfig, out_dir: &Path, command_line: &str) -> Result<(), CliError> {
    check_grid_against_dt(run)?;
    let traj =
        integrate_rk4_at(&run.model, &run.times, run.dt).map_err(anyhow::Error::from)?;
    atomic_write(
        &out_dir.join("trajectory_rk4.csv"),
        &trajectory_csv(run, &traj, command_line),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct CompareReport {
    schema: u32,
    seed: u64,
    model_hash: String,
    command: String,
    dt: f64,
    threshold: f64,
    /// The effective configuration (overrides applied), inlined so the
    /// report alone reproduces the run.
    config: crate::config::ConfigFile,
    per_time: Vec<CompareRow>,
    overall_max: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<CompareError>,
}

#[derive(Serialize)]
struct CompareRow {
    t: f64,
    max_abs_deviation: f64,
}

#[derive(Serialize)]
struct CompareError {
    time: f64,
    message: String,
}

/// Closed form vs oracle; writes a JSON report and fails (exit 1) when the
/// deviation exceeds the threshold or the integration blows up.
pub fn run_compare(
    run: &RunConfig,
    out_dir: &Path,
    command_line: &str,
    threshold: f64,
) -> Result<(), CliError> {
    check_grid_against_dt(run)?;
    let closed = solve_combined(&run.model, &run.times).map_err(anyhow::Error::from)?;

    let mut report = CompareReport {
        schema: SCHEMA_VERSION,
        seed: run.seed,
        model_hash: run.model_hash.clone(),
        command: command_line.to_string(),
        dt: run.dt,
        threshold,
        config: run.config.clone(),
        per_time: Vec::new(),
        overall_max: 0.0,
        pass: false,
        error: None,
    };

    match integrate_rk4_at(&run.model, &run.times, run.dt) {
        Ok(oracle) => {
            for (i, &t) in run.times.iter().enumerate() {
                let dev = closed.states[i]
                    .weights()
                    .iter()
                    .zip(oracle.states[i].weights())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                report.per_time.push(CompareRow { t, max_abs_deviation: dev });
                report.overall_max = report.overall_max.max(dev);
            }
            report.pass = report.overall_max < threshold;
        }
        Err(recombinator::Error::Integration { time, message }) => {
            report.error = Some(CompareError { time, message });
        }
        Err(e) => return Err(anyhow::Error::from(e).into()),
    }

    let text = serde_json::to_string_pretty(&report).context("serializing report")?;
    atomic_write(&out_dir.join("compare.json"), &format!("{text}\n"))?;

    if let Some(err) = &report.error {
        return Err(CliError::CompareFailed(format!(
            "oracle integration failed at t = {}: {}",
            err.time, err.message
        )));
    }
    if !report.pass {
        return Err(CliError::CompareFailed(format!(
            "max deviation {:.3e} exceeds threshold {:.3e} (see compare.json)",
            report.overall_max, threshold
        )));
    }
    Ok(())
}

/// Linkage disequilibria of every contiguous span over the time grid; for
/// recombination-only models the predicted decay factors ride along.
pub fn run_ld(run: &RunConfig, out_dir: &Path, command_line: &str) -> Result<(), CliError> {
    let traj = solve_combined(&run.model, &run.times).map_err(anyhow::Error::from)?;
    let space = run.model.space();
    let decay_predicted = run.model.mutation().is_none() && run.model.fitness().is_none();

    let mut spans: Vec<(usize, usize)> = Vec::new();
    for first in 0..space.n_sites() {
        for last in first..space.n_sites() {
            spans.push((first, last));
        }
    }

    let mut out = csv_header(run, command_line);
    // Value 0 is dropped at every site: it is the dependent choice under
    // marginal summation, leaving prod (M_i - 1) independent columns per span.
    out.push_str("# values=1..M_i-1 per site (value 0 dropped as dependent)\n");
    out.push('t');
    for &(first, last) in &spans {
        let table = linkage_disequilibria(&traj.states[0], &(first..=last).collect::<Vec<_>>())
            .map_err(anyhow::Error::from)?;
        for (values, _) in &table.entries {
            let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(",F[j{first}-{last}][{}]", vals.join(".")));
        }
        if decay_predicted {
            out.push_str(&format!(",b[j{first}-{last}]"));
        }
    }
    out.push('\n');

    for (i, state) in traj.states.iter().enumerate() {
        let t = traj.times[i];
        out.push_str(&format_number(t));
        for &(first, last) in &spans {
            let sites: Vec<usize> = (first..=last).collect();
            let table = linkage_disequilibria(state, &sites).map_err(anyhow::Error::from)?;
            for (_, value) in &table.entries {
                out.push(',');
                out.push_str(&format_number(*value));
            }
            if decay_predicted {
                let set = span_link_set(space, first, last);
                let b = coeff_b(set, t, run.model.rates()).map_err(anyhow::Error::from)?;
                out.push(',');
                out.push_str(&format_number(b));
            }
        }
        out.push('\n');
    }
    atomic_write(&out_dir.join("ld.csv"), &out)?;
    Ok(())
}

#[derive(Serialize)]
struct EquilibriumOutput {
    schema: u32,
    seed: u64,
    model_hash: String,
    command: String,
    weights: Vec<f64>,
    site_factors: Vec<Vec<f64>>,
    reducible_sites: Vec<usize>,
    rhs_residual: f64,
}

/// The product equilibrium with stationarity diagnostics.
pub fn run_equilibrium(
    run: &RunConfig,
    out_dir: &Path,
    command_line: &str,
) -> Result<(), CliError> {
    let report = equilibrium(&run.model).map_err(anyhow::Error::from)?;
    if !report.reducible_sites.is_empty() {
        eprintln!(
            "warning: site operators {:?} are reducible; the limit may depend on the \
             initial measure",
            report.reducible_sites
        );
    }
    let output = EquilibriumOutput {
        schema: SCHEMA_VERSION,
        seed: run.seed,
        model_hash: run.model_hash.clone(),
        command: command_line.to_string(),
        weights: report.measure.weights().to_vec(),
        site_factors: report.site_factors,
        reducible_sites: report.reducible_sites,
        rhs_residual: report.rhs_residual,
    };
    let text = serde_json::to_string_pretty(&output).context("serializing equilibrium")?;
    atomic_write(&out_dir.join("equilibrium.json"), &format!("{text}\n"))?;
    Ok(())
}

/// Iterates the discrete-time single-crossover map.
pub fn run_discrete(run: &RunConfig, out_dir: &Path, command_line: &str) -> Result<(), CliError> {
    let Some((probs, generations)) = &run.discrete else {
        return Err(CliError::Config(
            "discrete: this command needs a `discrete` section (probs, generations)".into(),
        ));
    };
    let mut out = csv_header(run, command_line);
    out.push_str("generation");
    for label in state_labels(run.model.space()) {
        out.push(',');
        out.push_str(&label);
    }
    out.push('\n');

    let mut state = run.model.initial().clone();
    for generation in 0..=*generations {
        out.push_str(&generation.to_string());
        for w in state.weights() {
            out.push(',');
            out.push_str(&format_number(*w));
        }
        out.push('\n');
        if generation < *generations {
            state = discrete_interference_step(probs, &state).map_err(anyhow::Error::from)?;
        }
    }
    atomic_write(&out_dir.join("discrete.csv"), &out)?;
    Ok(())
}
