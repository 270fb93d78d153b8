//! Command implementations. Each returns the tables it produced; writing and
//! the manifest are handled by [`emit`].

use std::path::{Path, PathBuf};

use nesslab_core::dynamics::{
    evolve_liouville, evolve_orbitals, initial_state_truncated, steady_diagnostics, EvolveOptions, OrbitalDensity,
    SteadyDiagnostics, Trajectory,
};
use nesslab_core::equilibrium::solve_sample_equilibrium;
use nesslab_core::greens::{dirichlet_green, dispersive_constants, s_matrix};
use nesslab_core::linalg::singular_values;
use nesslab_core::ness::{effective_transmittance, reservoir_grid, solve_steady_state, NessOptions, SteadyStateResult};
use nesslab_core::scattering::transmittance0;
use nesslab_core::{c64, EnergyGrid, SampleMatrix, SystemSpec, Warning};
use rayon::prelude::*;

use crate::config::{RunConfig, TableFormat};
use crate::table::Table;
use crate::verify::{self, Outcome, Settings};
use crate::CliError;

/// Energies `min:max:count`, inclusive of both ends.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Config(format!("expected min:max:count, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count).map(|k| a + (b - a) * k as f64 / (count - 1) as f64).collect(),
    })
}

/// Comma-separated list; the empty string is the empty list.
pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Config(format!("not a number: {s:?}"))))
        .collect()
}

fn ness_options(config: &RunConfig) -> NessOptions {
    NessOptions { tol: config.ness.tol, max_sweeps: config.ness.max_sweeps, mixing: config.ness.mixing, lambda0: None }
}

/// Threshold `λ₀` for the spec, when it can be certified.
pub fn lambda_threshold(spec: &SystemSpec) -> Option<f64> {
    dispersive_constants(spec, 200.0, &EnergyGrid::new(spec.t_c, 2048)).ok().map(|d| d.lambda0)
}

fn threshold_warnings(spec: &SystemSpec) -> Vec<String> {
    if spec.lambda == 0.0 {
        return Vec::new();
    }
    match lambda_threshold(spec) {
        Some(lambda0) if spec.lambda >= lambda0 => vec![format!(
            "{:?}; convergence is judged on the measured residuals",
            Warning::LambdaAboveThreshold { lambda: spec.lambda, lambda0 }
        )],
        Some(_) => Vec::new(),
        None => vec!["dispersive constants could not be certified for this spec".into()],
    }
}

pub struct CommandOutput {
    pub tables: Vec<(String, Table)>,
    pub warnings: Vec<String>,
    pub summary: String,
}

/// `E, Re g, Im g, smin_S` for `g = ⟨n|(Δ_D − E − i0)⁻¹|m⟩`.
pub fn green(config: &RunConfig, energies: &[f64], n: usize, m: usize) -> Result<CommandOutput, CliError> {
    let spec = config.spec()?;
    let mut table = Table::new(&["E", "re_g", "im_g", "smin_S"])
        .meta("quantity", format!("<{n}|(Delta_D - E - i0)^-1|{m}>"))
        .meta("units", format!("energies in units of t_c = {}; g in 1/t_c", spec.t_c));
    for &e in energies {
        let g = dirichlet_green(n, m, e, spec.t_c);
        let smin = singular_values(&s_matrix(e, &spec, None).matrix).last().copied().unwrap_or(0.0);
        table.push(vec![e, g.re, g.im, smin]);
    }
    let summary = format!("{} energies", energies.len());
    Ok(CommandOutput { tables: vec![("green".into(), table)], warnings: Vec::new(), summary })
}

pub fn transmittance(config: &RunConfig, lambda: Option<f64>, effective: bool) -> Result<CommandOutput, CliError> {
    let mut spec = config.spec()?;
    if let Some(l) = lambda {
        spec.lambda = l;
    }
    let grid = reservoir_grid(&spec, config.grid.theta_nodes);
    let warnings = threshold_warnings(&spec);
    let steady = solve_steady_state(&spec, &grid, ness_options(config))?;
    let free: Vec<f64> = grid.energy.iter().map(|&e| transmittance0(e, &spec, None)).collect::<Result<_, _>>()?;
    let eff = if effective { Some(effective_transmittance(&spec, &grid)?) } else { None };
    let mut columns = vec!["E", "T0", "T_lambda"];
    if eff.is_some() {
        columns.push("T_eff");
    }
    let mut table = Table::new(&columns)
        .meta("lambda", spec.lambda)
        .meta("units", "energies in units of t_c; transmittance dimensionless with 2*pi absorbed into the current");
    for (i, (&e, &t0)) in grid.energy.iter().zip(&free).enumerate() {
        let mut row = vec![e, t0, steady.transmittance[i]];
        if let Some(e) = &eff {
            row.push(e.direct[i]);
        }
        table.push(row);
    }
    let summary =
        format!("{} nodes, {} sweeps, current {:.12e}", grid.len(), steady.solution.iterations, steady.current_1);
    Ok(CommandOutput { tables: vec![("transmittance".into(), table)], warnings, summary })
}

pub fn iv(config: &RunConfig, mu2: &[f64]) -> Result<CommandOutput, CliError> {
    let spec = config.spec()?;
    let options = ness_options(config);
    let nodes = config.grid.theta_nodes;
    let currents: Vec<Result<f64, CliError>> = mu2
        .par_iter()
        .map(|&mu| {
            let mut s = spec.clone();
            s.reservoirs[1].mu = mu;
            let grid = reservoir_grid(&s, nodes);
            Ok(solve_steady_state(&s, &grid, options)?.current_1)
        })
        .collect();
    let mut table = Table::new(&["bias", "mu2", "current_1"])
        .meta("mu1", spec.reservoirs[0].mu)
        .meta("units", "bias = mu1 - mu2 in units of t_c; current into lead 1 with 2*pi absorbed");
    for (&mu, current) in mu2.iter().zip(currents) {
        table.push(vec![spec.reservoirs[0].mu - mu, mu, current?]);
    }
    Ok(CommandOutput {
        tables: vec![("iv".into(), table)],
        warnings: threshold_warnings(&spec),
        summary: format!("{} bias points", mu2.len()),
    })
}

pub fn steady(config: &RunConfig) -> Result<(CommandOutput, SteadyStateResult), CliError> {
    let spec = config.spec()?;
    let grid = reservoir_grid(&spec, config.grid.theta_nodes);
    let result = solve_steady_state(&spec, &grid, ness_options(config))?;
    let mut occupations = Table::new(&["site", "occupation"]).meta("current_1", format!("{:.16e}", result.current_1));
    for (k, n) in result.occupations.iter().enumerate() {
        occupations.push(vec![k as f64, *n]);
    }
    let mut residuals = Table::new(&["sweep", "residual"]);
    for (k, r) in result.solution.residuals.iter().enumerate() {
        residuals.push(vec![(k + 1) as f64, *r]);
    }
    let mut trans = Table::new(&["E", "weight", "T_lambda"]).meta("units", "energies in units of t_c");
    for i in 0..grid.len() {
        trans.push(vec![grid.energy[i], grid.weight[i], result.transmittance[i]]);
    }
    let summary = format!(
        "current_1 = {:.12e}; occupations {:?}; {} sweeps",
        result.current_1, result.occupations, result.solution.iterations
    );
    let out = CommandOutput {
        tables: vec![
            ("ness_occupations".into(), occupations),
            ("ness_residuals".into(), residuals),
            ("ness_transmittance".into(), trans),
        ],
        warnings: threshold_warnings(&spec),
        summary,
    };
    Ok((out, result))
}

fn sample_state(spec: &SystemSpec, occupations: Option<&Vec<f64>>) -> Result<SampleMatrix, CliError> {
    match occupations {
        Some(occ) => {
            if occ.len() != spec.n() {
                return Err(CliError::Config(format!("expected {} sample occupations, got {}", spec.n(), occ.len())));
            }
            Ok(SampleMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                occ.len(),
                occ.iter().map(|&x| c64::new(x, 0.0)),
            )))
        }
        None => Ok(solve_sample_equilibrium(spec)?.rho_s),
    }
}

/// Dense evolution for small truncations, orbitals otherwise.
fn run_dynamics(spec: &SystemSpec, config: &RunConfig, rho_s: &SampleMatrix) -> Result<Trajectory, CliError> {
    let d = &config.dynamics;
    let options = EvolveOptions { dt: d.dt, t_end: d.t_end, output_every: d.output_every };
    if 2 * d.lead_length + spec.n() <= 200 {
        let rho = initial_state_truncated(spec, d.lead_length, rho_s)?;
        Ok(evolve_liouville(spec, d.lead_length, &rho, options)?.trajectory)
    } else {
        let initial = OrbitalDensity::initial(spec, d.lead_length, rho_s, 1e-14)?;
        Ok(evolve_orbitals(spec, d.lead_length, initial, options)?.trajectory)
    }
}

fn trajectory_table(spec: &SystemSpec, trajectory: &Trajectory) -> Table {
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=spec.n()).map(|k| format!("n_{k}")));
    columns.extend(["current_1", "trace_defect", "unitarity_defect"].map(String::from));
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(&refs).meta("units", "time in units of 1/t_c; current into lead 1");
    for s in &trajectory.samples {
        let mut row = vec![s.t];
        row.extend(&s.occupations);
        row.extend([s.current, s.trace_defect, s.unitarity_defect.unwrap_or(f64::NAN)]);
        table.push(row);
    }
    table
}

pub fn evolve(config: &RunConfig) -> Result<(CommandOutput, SteadyDiagnostics), CliError> {
    let spec = config.spec()?;
    let (steady_out, ness) = steady(config)?;
    let main = run_dynamics(&spec, config, &sample_state(&spec, config.dynamics.sample_occupations.as_ref())?)?;
    let other = match &config.dynamics.alternate_occupations {
        Some(occ) => Some(run_dynamics(&spec, config, &sample_state(&spec, Some(occ))?)?),
        None => None,
    };
    let mut warnings: Vec<String> = main.warnings.iter().map(|w| format!("{w:?}")).collect();
    warnings.extend(steady_out.warnings);
    let report = steady_diagnostics(&main, other.as_ref(), &ness)?;
    let mut comparison = Table::new(&["quantity", "plateau", "steady", "deviation"])
        .meta("rows", "0 = current_1 (relative deviation); k >= 1 = occupation of site k (absolute deviation)")
        .meta("initial_state_gap", report.initial_state_gap.map_or("n/a".into(), |g| format!("{g:.6e}")));
    comparison.push(vec![0.0, report.plateau.current, report.steady_current, report.current_deviation]);
    for (k, (a, b)) in report.plateau.occupations.iter().zip(&report.steady_occupations).enumerate() {
        comparison.push(vec![(k + 1) as f64, *a, *b, (a - b).abs()]);
    }
    let mut tables = vec![("trajectory".to_string(), trajectory_table(&spec, &main))];
    if let Some(t) = &other {
        tables.push(("trajectory_alternate".into(), trajectory_table(&spec, t)));
    }
    tables.push(("comparison".into(), comparison));
    let summary = format!(
        "plateau current {:.6e} vs steady {:.6e}; max occupation deviation {:.3e}",
        report.plateau.current, report.steady_current, report.occupation_deviation
    );
    Ok((CommandOutput { tables, warnings, summary }, report))
}

pub fn verify_settings(config: &RunConfig) -> Settings {
    Settings { theta_nodes: config.grid.theta_nodes, lead_length: config.dynamics.lead_length, ..Settings::default() }
}

pub fn run_verify(config: &RunConfig, only: &[u8]) -> Vec<Outcome> {
    let settings = verify_settings(config);
    let ids: Vec<u8> = if only.is_empty() { verify::CHECKS.iter().map(|c| c.0).collect() } else { only.to_vec() };
    ids.into_iter()
        .map(|id| {
            let outcome = verify::run(id, &settings);
            println!("{}", outcome.line());
            outcome
        })
        .collect()
}

pub fn verify_table(outcomes: &[Outcome]) -> Table {
    let mut table = Table::new(&["check", "passed"]);
    for o in outcomes {
        table = table.meta(&format!("check_{}", o.id), format!("{} {}", o.name, o.detail));
        table.push(vec![o.id as f64, if o.passed { 1.0 } else { 0.0 }]);
    }
    table
}

/// Writes tables and returns their paths.
pub fn emit(output: &CommandOutput, directory: &Path, formats: &[TableFormat]) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for (stem, table) in &output.tables {
        paths.extend(table.write(directory, stem, formats)?);
    }
    Ok(paths)
}
