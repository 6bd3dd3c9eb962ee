//! Seeded generators and independent oracles shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use proxstair::membrane::TriMesh;
use proxstair::{BoxLsq, ProxInstance};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut TestRng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// Random sorted instance with up to `max_n` points. Data are drawn from a
/// small integer grid part of the time so that duplicates occur, some weights
/// are zero, and zero-weight padding copies of the last point may follow.
pub fn random_instance(rng: &mut TestRng, max_n: usize, gamma_range: (f64, f64)) -> ProxInstance {
    let n = rng.random_range(1..=max_n);
    let clustered = rng.random_bool(0.3);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let d = if clustered { rng.random_range(-3i32..=3) as f64 } else { rng.random_range(-10.0..10.0) };
            let w = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..5.0) };
            (d, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let last = pairs.last().unwrap().0;
    for _ in 0..rng.random_range(0..=3usize) {
        pairs.push((last, 0.0));
    }
    let gamma = log_uniform(rng, gamma_range.0, gamma_range.1);
    ProxInstance::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect(), gamma).unwrap()
}

/// Evaluation points: mostly spread over the range where the map is
/// interesting, sometimes exactly at a data point or a plateau end.
pub fn random_x(rng: &mut TestRng, inst: &ProxInstance) -> f64 {
    let d = inst.data();
    let spread = inst.gamma() * inst.weights().iter().sum::<f64>() + 2.0;
    match rng.random_range(0..10u32) {
        0 => d[rng.random_range(0..d.len())],
        1 => {
            let k = rng.random_range(1..=d.len());
            let (lo, hi) = inst.plateau_interval(k).unwrap();
            if rng.random_bool(0.5) {
                lo
            } else {
                hi
            }
        }
        _ => rng.random_range(d[0] - spread..d[d.len() - 1] + spread),
    }
}

/// Distance in units in the last place at the scale `scale`.
pub fn ulps_at(a: f64, b: f64, scale: f64) -> f64 {
    let ulp = f64::EPSILON * scale.abs().max(f64::MIN_POSITIVE);
    (a - b).abs() / ulp
}

/// Distance between two finite doubles counted in representable values.
pub fn ulp_distance(a: f64, b: f64) -> u64 {
    fn ordered(x: f64) -> i64 {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    }
    ordered(a).abs_diff(ordered(b))
}

/// Dense random box-constrained least-squares problem with `n` unknowns.
pub fn random_box_problem(rng: &mut TestRng, n: usize) -> BoxLsq {
    let m = rng.random_range(1..=n + 3);
    let mut triplets = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.random_bool(0.8) {
                triplets.push((i, j, rng.random_range(-2.0..2.0)));
            }
        }
    }
    let a = proxstair::CsrMatrix::from_triplets(m, n, &triplets).unwrap();
    let g: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.5)).collect();
    let upper: Vec<f64> =
        lower.iter().map(|&l| if rng.random_bool(0.05) { l } else { l + rng.random_range(0.0..3.0) }).collect();
    BoxLsq::new(a, g, lower, upper).unwrap()
}

/// `||s - clip(s - grad)||` computed from scratch.
pub fn projected_gradient_norm(p: &BoxLsq, s: &[f64]) -> f64 {
    let a = p.operator().to_dense();
    let r: Vec<f64> = (0..a.len()).map(|i| p.offset()[i] + (0..s.len()).map(|j| a[i][j] * s[j]).sum::<f64>()).collect();
    let mut acc = 0.0;
    for j in 0..s.len() {
        let grad: f64 = (0..a.len()).map(|i| a[i][j] * r[i]).sum();
        let (lo, hi) = match p.fixed()[j] {
            Some(v) => (v, v),
            None => (p.lower()[j], p.upper()[j]),
        };
        let step = (s[j] - grad).clamp(lo, hi);
        acc += (s[j] - step).powi(2);
    }
    acc.sqrt()
}

/// Solves the small dense system `m x = b` by Gaussian elimination with
/// partial pivoting; `None` when it is numerically singular.
fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-10 * scale {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    Some(x)
}

/// Exact minimum of a small box least-squares problem by enumerating every
/// lower/upper/free pattern. The optimal set always has a point whose free
/// coordinates have a nonsingular Gram matrix, so singular patterns can be
/// skipped.
pub fn enumerate_box_minimum(p: &BoxLsq) -> f64 {
    let n = p.dim();
    let a = p.operator().to_dense();
    let m = a.len();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut pattern = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            pattern.push(c % 3);
            c /= 3;
        }
        let mut s = vec![0.0; n];
        let mut free = Vec::new();
        for j in 0..n {
            match (p.fixed()[j], pattern[j]) {
                (Some(v), 0) => s[j] = v,
                (Some(_), _) => continue,
                (None, 0) => s[j] = p.lower()[j],
                (None, 1) => s[j] = p.upper()[j],
                (None, _) => free.push(j),
            }
        }
        if p.fixed().iter().zip(&pattern).any(|(f, &q)| f.is_some() && q != 0) {
            continue;
        }
        if !free.is_empty() {
            // residual of the fixed part
            let r0: Vec<f64> = (0..m)
                .map(|i| p.offset()[i] + (0..n).filter(|j| !free.contains(j)).map(|j| a[i][j] * s[j]).sum::<f64>())
                .collect();
            let gram: Vec<Vec<f64>> = free
                .iter()
                .map(|&j| free.iter().map(|&k| (0..m).map(|i| a[i][j] * a[i][k]).sum()).collect())
                .collect();
            let rhs: Vec<f64> = free.iter().map(|&j| -(0..m).map(|i| a[i][j] * r0[i]).sum::<f64>()).collect();
            let Some(x) = solve_dense(gram, rhs) else { continue };
            let slack = 1e-12;
            if free.iter().zip(&x).any(|(&j, &v)| v < p.lower()[j] - slack || v > p.upper()[j] + slack) {
                continue;
            }
            for (&j, &v) in free.iter().zip(&x) {
                s[j] = v.clamp(p.lower()[j], p.upper()[j]);
            }
        }
        best = best.min(p.objective(&s));
    }
    best
}

/// The eight symmetries of the unit square as vertex permutations of a mesh
/// whose vertices lie on the grid `h * Z^2`.
pub fn square_symmetries(mesh: &TriMesh, cells: usize) -> Vec<Vec<usize>> {
    let key = |p: [f64; 2]| ((p[0] * cells as f64).round() as i64, (p[1] * cells as f64).round() as i64);
    let index: std::collections::HashMap<(i64, i64), usize> =
        mesh.vertices().iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
    let n = cells as i64;
    let maps: [fn(i64, i64, i64) -> (i64, i64); 8] = [
        |_, a, b| (a, b),
        |n, a, b| (n - a, b),
        |n, a, b| (a, n - b),
        |n, a, b| (n - a, n - b),
        |_, a, b| (b, a),
        |n, a, b| (n - b, a),
        |n, a, b| (b, n - a),
        |n, a, b| (n - b, n - a),
    ];
    maps.iter()
        .map(|f| {
            mesh.vertices()
                .iter()
                .map(|&p| {
                    let (a, b) = key(p);
                    index[&f(n, a, b)]
                })
                .collect()
        })
        .collect()
}
