//! Timing of the two kernels that dominate denoising: the batched prox
//! (one call evaluates every instance in parallel) and one box-constrained
//! least-squares solve for a steepest-descent direction.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use proxstair::imaging::{noisy_phantom, standard_normals};
use proxstair::rof::{color_update, steepest_descent_direction, Color};
use proxstair::{prox_batch, ProxBatch};

use crate::report::{create_file, CliError};

/// Instances per prox call use this many data points.
const WIDTH: usize = 4;
const SEED: u64 = 2022;
const BETA: f64 = 10.0;
/// Sweeps applied to the noisy image before the QP so that it has many ties.
const WARMUP_SWEEPS: usize = 5;

struct Row {
    subroutine: &'static str,
    calls: usize,
    total: f64,
}

fn random_batch(rows: usize) -> Result<ProxBatch, CliError> {
    let z = standard_normals(rows * (2 * WIDTH + 2), SEED);
    let mut data = Vec::with_capacity(rows * WIDTH);
    let mut weights = Vec::with_capacity(rows * WIDTH);
    let mut gamma = Vec::with_capacity(rows);
    let mut x = Vec::with_capacity(rows);
    for r in z.chunks_exact(2 * WIDTH + 2) {
        let mut d: Vec<f64> = r[..WIDTH].iter().map(|v| 128.0 + 40.0 * v).collect();
        d.sort_by(f64::total_cmp);
        data.extend(d);
        weights.extend(r[WIDTH..2 * WIDTH].iter().map(|v| 1.0 + v.abs()));
        gamma.push(BETA);
        x.push(128.0 + 60.0 * r[2 * WIDTH]);
    }
    ProxBatch::new(WIDTH, data, weights, gamma, x).map_err(|e| CliError::input(e.to_string()))
}

pub fn run(pixels: usize, repeats: usize, output: &Path) -> Result<(), CliError> {
    if pixels == 0 || repeats == 0 {
        return Err(CliError::input("--pixels and --repeats must be positive"));
    }
    let batch = random_batch(pixels)?;
    let started = Instant::now();
    for _ in 0..repeats {
        black_box(prox_batch(black_box(&batch)));
    }
    let prox = Row { subroutine: "prox_batch", calls: repeats, total: started.elapsed().as_secs_f64() };

    // square image with about `pixels` pixels, at least 2x2
    let side = ((pixels as f64).sqrt().round() as usize).max(2);
    let g = noisy_phantom(side, side, 50.0, SEED).map_err(|e| CliError::input(e.to_string()))?;
    let mut u = g.clone();
    for _ in 0..WARMUP_SWEEPS {
        for color in [Color::White, Color::Black] {
            u = color_update(&u, &g, BETA, color).map_err(|e| CliError::input(e.to_string()))?;
        }
    }
    let started = Instant::now();
    steepest_descent_direction(&u, &g, BETA, 1e-6).map_err(|e| CliError::no_convergence(e.to_string()))?;
    let qp = Row { subroutine: "box_qp", calls: 1, total: started.elapsed().as_secs_f64() };

    let mut out = create_file(output)?;
    let io = |e: std::io::Error| CliError::io(output, e);
    writeln!(out, "subroutine,calls,total_time,time_per_call").map_err(io)?;
    for row in [prox, qp] {
        writeln!(out, "{},{},{:.6e},{:.6e}", row.subroutine, row.calls, row.total, row.total / row.calls as f64)
            .map_err(io)?;
    }
    out.flush().map_err(io)
}
