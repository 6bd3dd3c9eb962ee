use std::io::Write;
use std::path::Path;

use proxstair::batch_csv::{read_prox_csv, stair_samples, write_prox_csv, write_stair_csv};
use proxstair::imaging::{read_pgm, write_pgm};
use proxstair::membrane::{active_counts, admm_solve, generate_mesh, optimality_residual, AdmmReport};
use proxstair::rof::SubroutineTiming;
use proxstair::{denoise as run_denoise, DenoiseReport, Error, FemMatrices, MembraneConfig, RofParams};
use serde::Serialize;

use crate::report::{create_file, read_file, write_bytes, write_json, CliError, SCHEMA_VERSION};

pub fn prox_eval(input: &Path, output: &Path) -> Result<(), CliError> {
    let bytes = read_file(input)?;
    let table = read_prox_csv(bytes.as_slice()).map_err(|e| CliError::from_lib(input, e))?;
    let y = table.evaluate().map_err(|e| CliError::from_lib(input, e))?;
    let out = create_file(output)?;
    write_prox_csv(out, &table, &y).map_err(|e| CliError::from_lib(output, e))
}

pub fn stair_plot(instance: &Path, xmin: f64, xmax: f64, samples: usize, output: &Path) -> Result<(), CliError> {
    let bytes = read_file(instance)?;
    let table = read_prox_csv(bytes.as_slice()).map_err(|e| CliError::from_lib(instance, e))?;
    if table.instances.len() != 1 {
        return Err(CliError::input(format!(
            "{}: expected exactly one instance, found {}",
            instance.display(),
            table.instances.len()
        )));
    }
    let inst = &table.instances[0];
    let points = stair_samples(inst, xmin, xmax, samples).map_err(|e| CliError::input(e.to_string()))?;
    let out = create_file(output)?;
    write_stair_csv(out, inst, &points).map_err(|e| CliError::from_lib(output, e))
}

#[derive(Serialize)]
struct TimingRow<'a> {
    subroutine: &'a str,
    calls: usize,
    total_seconds: f64,
    seconds_per_call: f64,
}

impl<'a> TimingRow<'a> {
    fn new(subroutine: &'a str, t: &SubroutineTiming) -> Self {
        TimingRow { subroutine, calls: t.calls, total_seconds: t.total_seconds, seconds_per_call: t.seconds_per_call() }
    }
}

#[derive(Serialize)]
struct DenoiseOutput<'a> {
    schema_version: u32,
    command: &'static str,
    input: String,
    width: usize,
    height: usize,
    params: &'a RofParams,
    converged: bool,
    iterations: usize,
    inner_iterations: usize,
    restarts: usize,
    final_objective: f64,
    final_direction_norm: f64,
    total_seconds: f64,
    timings: [TimingRow<'a>; 2],
    qp_iterations: usize,
    objective_trace: &'a [f64],
    step_sizes: &'a [f64],
    direction_norms: &'a [f64],
}

fn denoise_output<'a>(
    input: &Path,
    width: usize,
    height: usize,
    params: &'a RofParams,
    r: &'a DenoiseReport,
) -> DenoiseOutput<'a> {
    DenoiseOutput {
        schema_version: SCHEMA_VERSION,
        command: "denoise",
        input: input.display().to_string(),
        width,
        height,
        params,
        converged: r.converged,
        iterations: r.iterations,
        inner_iterations: r.inner_iterations,
        restarts: r.restarts,
        final_objective: r.final_objective,
        final_direction_norm: r.final_direction_norm,
        total_seconds: r.total_seconds,
        timings: [TimingRow::new("color_update", &r.prox_timing), TimingRow::new("steepest_descent_qp", &r.qp_timing)],
        qp_iterations: r.qp_iterations,
        objective_trace: &r.objective_trace,
        step_sizes: &r.step_sizes,
        direction_norms: &r.direction_norms,
    }
}

/// Writes the denoised image and report. When the solver stops at an
/// iteration cap, the best iterate and the partial report are still written
/// before exiting with the no-convergence code.
pub fn denoise(input: &Path, output: &Path, params: &RofParams, report: Option<&Path>) -> Result<(), CliError> {
    let bytes = read_file(input)?;
    let g = read_pgm(&bytes).map_err(|e| CliError::from_lib(input, e))?;
    params.validate().map_err(|e| CliError::input(e.to_string()))?;
    let (u, r, failure) = match run_denoise(&g, params) {
        Ok((u, r)) => (u, r, None),
        Err(Error::DenoiseNoConvergence(boxed)) => {
            let (u, r) = *boxed;
            (u, r, Some(CliError::no_convergence("denoising did not converge within the iteration caps")))
        }
        Err(e) => return Err(CliError::from_lib(input, e)),
    };
    write_bytes(output, &write_pgm(&u))?;
    if let Some(path) = report {
        write_json(path, &denoise_output(input, g.width(), g.height(), params, &r))?;
    }
    failure.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct MembraneOutput<'a> {
    schema_version: u32,
    command: &'static str,
    config: &'a MembraneConfig,
    vertices: usize,
    triangles: usize,
    converged: bool,
    iterations: usize,
    exact_fixed_point: bool,
    final_increments: [f64; 3],
    coupling_gap: f64,
    energy_max_form: f64,
    energy_abs_form: f64,
    optimality_residual: f64,
    /// `optimality_residual / ||M f||`.
    relative_optimality_residual: f64,
    active_histogram: Vec<usize>,
    seconds: f64,
}

/// Thresholds within this distance of a nodal value are treated as touching
/// when certifying optimality.
const SNAP_TOL: f64 = 1e-9;

pub fn membrane(config_path: &Path, output: &Path, report: Option<&Path>) -> Result<(), CliError> {
    let bytes = read_file(config_path)?;
    let config: MembraneConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::input(format!("{}: {e}", config_path.display())))?;
    config.validate().map_err(|e| CliError::from_lib(config_path, e))?;
    let mesh = generate_mesh(config.domain()).map_err(|e| CliError::from_lib(config_path, e))?;
    let mats = FemMatrices::assemble(&mesh, config.c, config.alpha).map_err(|e| CliError::from_lib(config_path, e))?;
    config.force_vector(mats.len()).map_err(|e| CliError::from_lib(config_path, e))?;

    let (z, r, failure): (Vec<f64>, AdmmReport, Option<CliError>) = match admm_solve(&mats, &config) {
        Ok((z, r)) => (z, r, None),
        Err(Error::AdmmNoConvergence(boxed)) => {
            let (z, r) = *boxed;
            let msg = format!("ADMM did not converge within {} iterations", r.iterations);
            (z, r, Some(CliError::no_convergence(msg)))
        }
        Err(e) => return Err(CliError::from_lib(config_path, e)),
    };

    let counts = active_counts(&z, &config);
    let mut out = create_file(output)?;
    let io = |e: std::io::Error| CliError::io(output, e);
    writeln!(out, "x,y,z_value,active_count").map_err(io)?;
    for ((p, zj), c) in mesh.vertices().iter().zip(&z).zip(&counts) {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{c}", p[0], p[1], zj).map_err(io)?;
    }
    out.flush().map_err(io)?;

    if let Some(path) = report {
        let residual = optimality_residual(&z, &mats, &config, SNAP_TOL).map_err(|e| CliError::from_lib(config_path, e))?;
        let force = config.force_vector(mats.len()).map_err(|e| CliError::from_lib(config_path, e))?;
        let mf_norm = mats.m.iter().zip(&force).map(|(m, f)| (m * f).powi(2)).sum::<f64>().sqrt();
        let mut histogram = vec![0; config.thresholds.len() + 1];
        for &c in &counts {
            histogram[c] += 1;
        }
        let doc = MembraneOutput {
            schema_version: SCHEMA_VERSION,
            command: "membrane",
            config: &config,
            vertices: mesh.num_vertices(),
            triangles: mesh.triangles().len(),
            converged: r.converged,
            iterations: r.iterations,
            exact_fixed_point: r.exact_fixed_point,
            final_increments: [r.dz, r.dy, r.dmu],
            coupling_gap: r.coupling_gap,
            energy_max_form: r.energy_max_form,
            energy_abs_form: r.energy_abs_form,
            optimality_residual: residual,
            relative_optimality_residual: if mf_norm > 0.0 { residual / mf_norm } else { residual },
            active_histogram: histogram,
            seconds: r.seconds,
        };
        write_json(path, &doc)?;
    }
    failure.map_or(Ok(()), Err)
}
