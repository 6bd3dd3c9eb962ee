use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use proxstair::imaging::{noisy_phantom, standard_normals};
use proxstair::rof::{color_update, steepest_descent_direction, Color};
use proxstair::{prox_batch, GrayImage, ProxBatch};

const WIDTH: usize = 4;
const BETA: f64 = 10.0;

fn random_batch(rows: usize) -> ProxBatch {
    let z = standard_normals(rows * (2 * WIDTH + 2), 2022);
    let mut data = Vec::with_capacity(rows * WIDTH);
    let mut weights = Vec::with_capacity(rows * WIDTH);
    let mut x = Vec::with_capacity(rows);
    for r in z.chunks_exact(2 * WIDTH + 2) {
        let mut d: Vec<f64> = r[..WIDTH].iter().map(|v| 128.0 + 40.0 * v).collect();
        d.sort_by(f64::total_cmp);
        data.extend(d);
        weights.extend(r[WIDTH..2 * WIDTH].iter().map(|v| 1.0 + v.abs()));
        x.push(128.0 + 60.0 * r[2 * WIDTH]);
    }
    ProxBatch::new(WIDTH, data, weights, vec![BETA; rows], x).unwrap()
}

/// Noisy phantom after a few sweeps, so the image has many ties.
fn swept_phantom(side: usize, sweeps: usize) -> (GrayImage, GrayImage) {
    let g = noisy_phantom(side, side, 50.0, 2022).unwrap();
    let mut u = g.clone();
    for _ in 0..sweeps {
        u = color_update(&u, &g, BETA, Color::White).unwrap();
        u = color_update(&u, &g, BETA, Color::Black).unwrap();
    }
    (u, g)
}

fn prox(c: &mut Criterion) {
    let batch = random_batch(1 << 15);
    c.bench_function("prox_batch/2^15 x N=4", |b| b.iter(|| prox_batch(black_box(&batch))));
}

fn color(c: &mut Criterion) {
    let mut group = c.benchmark_group("color_update");
    for side in [64, 256] {
        let (u, g) = swept_phantom(side, 1);
        group.bench_function(format!("{side}x{side}"), |b| {
            b.iter(|| color_update(black_box(&u), &g, BETA, Color::White).unwrap())
        });
    }
    group.finish();
}

fn qp(c: &mut Criterion) {
    let mut group = c.benchmark_group("steepest_descent_qp");
    group.sample_size(10);
    for side in [32, 64] {
        let (u, g) = swept_phantom(side, 5);
        group.bench_function(format!("{side}x{side}"), |b| {
            b.iter_batched(|| u.clone(), |u| steepest_descent_direction(&u, &g, BETA, 1e-6).unwrap(), BatchSize::SmallInput)
        });
    }
    group.finish();
}

criterion_group!(benches, prox, color, qp);
criterion_main!(benches);
