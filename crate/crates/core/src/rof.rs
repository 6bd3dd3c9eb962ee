//! Anisotropic ROF denoising by checkerboard block-coordinate descent
//!
//! The objective is
//! `E(u) = 0.5 * sum (u - g)^2 + beta * sum_edges |u_b - u_a|`
//! over the horizontal and vertical 4-neighbor edges. Fixing one color of a
//! checkerboard decouples the remaining pixels; each one is the prox of a
//! weighted absolute error over its (at most four) neighbors, evaluated in a
//! single batch. When the sweeps stagnate, the minimum-norm subgradient gives
//! a steepest-descent restart direction and a stopping certificate.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::box_qp::{solve_box_lsq_with, BoxLsq, BoxLsqOptions};
use crate::error::{Error, Result};
use crate::prox::prox_rows_into;
use crate::sparse::{norm2, CsrMatrix};

/// Row-major grayscale image with `height` rows (`D1`) and `width` columns (`D2`).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ShapeMismatch(format!("image must be nonempty, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("pixels"));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    fn same_shape(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &GrayImage) -> f64 {
        self.pixels.iter().zip(&other.pixels).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// All 4-neighbor edges, oriented as `(i+1, j) - (i, j)` (vertical, listed
/// first) and `(i, j+1) - (i, j)` (horizontal).
#[derive(Debug, Clone)]
pub struct EdgeSet {
    width: usize,
    height: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(width: usize, height: usize) -> Self {
        let mut edges = Vec::with_capacity(width * height.saturating_sub(1) + height * width.saturating_sub(1));
        for i in 0..height.saturating_sub(1) {
            for j in 0..width {
                edges.push((i * width + j, (i + 1) * width + j));
            }
        }
        for i in 0..height {
            for j in 0..width.saturating_sub(1) {
                edges.push((i * width + j, i * width + j + 1));
            }
        }
        EdgeSet { width, height, edges }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Differences `u_b - u_a` per edge.
    pub fn differences(&self, u: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|&(a, b)| u[b] - u[a]).collect()
    }

    /// Incidence operator `B` (edges x pixels).
    pub fn incidence(&self) -> CsrMatrix {
        let t: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(e, &(a, b))| [(e, a, -1.0), (e, b, 1.0)])
            .collect();
        CsrMatrix::from_triplets(self.edges.len(), self.width * self.height, &t).expect("edges inside the grid")
    }

    /// `B^T s`
    pub fn adjoint(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width * self.height];
        for (&(a, b), &v) in self.edges.iter().zip(s) {
            out[a] -= v;
            out[b] += v;
        }
        out
    }
}

/// `0.5 * ||u - g||^2 + beta * TV(u)` with anisotropic TV.
pub fn rof_objective(u: &GrayImage, g: &GrayImage, beta: f64) -> Result<f64> {
    u.same_shape(g)?;
    Ok(objective_unchecked(u, g, beta))
}

fn objective_unchecked(u: &GrayImage, g: &GrayImage, beta: f64) -> f64 {
    let fidelity: f64 = u.pixels.iter().zip(&g.pixels).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * fidelity + beta * total_variation(u)
}

pub fn total_variation(u: &GrayImage) -> f64 {
    let (w, h) = (u.width, u.height);
    let p = &u.pixels;
    let mut tv = 0.0;
    for i in 0..h.saturating_sub(1) {
        for j in 0..w {
            tv += (p[(i + 1) * w + j] - p[i * w + j]).abs();
        }
    }
    for i in 0..h {
        for j in 0..w.saturating_sub(1) {
            tv += (p[i * w + j + 1] - p[i * w + j]).abs();
        }
    }
    tv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Black,
}

impl Color {
    /// `(i + j)` even is white.
    pub fn of(row: usize, col: usize) -> Color {
        if (row + col).is_multiple_of(2) {
            Color::White
        } else {
            Color::Black
        }
    }
}

/// Boolean masks `(white, black)` in row-major order.
pub fn checkerboard_masks(height: usize, width: usize) -> (Vec<bool>, Vec<bool>) {
    let white: Vec<bool> = (0..height * width).map(|p| Color::of(p / width, p % width) == Color::White).collect();
    let black = white.iter().map(|w| !w).collect();
    (white, black)
}

fn color_pixels(width: usize, height: usize, color: Color) -> Vec<usize> {
    (0..width * height).filter(|&p| Color::of(p / width, p % width) == color).collect()
}

/// Exact minimization of `E` over the pixels of one color with the other
/// color held fixed. Each pixel is the prox (`gamma = beta`) of its sorted
/// neighbor values at `x = g_p`; border pixels are padded to four slots with
/// zero weights.
pub fn color_update(u: &GrayImage, g: &GrayImage, beta: f64, color: Color) -> Result<GrayImage> {
    u.same_shape(g)?;
    check_beta(beta)?;
    let mut out = u.clone();
    let targets = color_pixels(u.width, u.height, color);
    let values = solve_color(u, g, beta, &targets);
    for (&p, v) in targets.iter().zip(values) {
        out.pixels[p] = v;
    }
    Ok(out)
}

const SLOTS: usize = 4;

fn solve_color(u: &GrayImage, g: &GrayImage, beta: f64, targets: &[usize]) -> Vec<f64> {
    let (w, h) = (u.width, u.height);
    let rows = targets.len();
    let mut data = vec![0.0; rows * SLOTS];
    let mut weights = vec![0.0; rows * SLOTS];
    let mut x = vec![0.0; rows];
    for (r, &p) in targets.iter().enumerate() {
        let (i, j) = (p / w, p % w);
        let mut nb = [0.0f64; SLOTS];
        let mut count = 0;
        if i > 0 {
            nb[count] = u.pixels[p - w];
            count += 1;
        }
        if i + 1 < h {
            nb[count] = u.pixels[p + w];
            count += 1;
        }
        if j > 0 {
            nb[count] = u.pixels[p - 1];
            count += 1;
        }
        if j + 1 < w {
            nb[count] = u.pixels[p + 1];
            count += 1;
        }
        x[r] = g.pixels[p];
        if count == 0 {
            // isolated pixel of a 1x1 image: data term only
            data[r * SLOTS..(r + 1) * SLOTS].fill(g.pixels[p]);
            continue;
        }
        nb[..count].sort_by(f64::total_cmp);
        let top = nb[count - 1];
        for s in 0..SLOTS {
            data[r * SLOTS + s] = if s < count { nb[s] } else { top };
            weights[r * SLOTS + s] = if s < count { 1.0 } else { 0.0 };
        }
    }
    let gamma = vec![beta; rows];
    let mut out = vec![0.0; rows];
    prox_rows_into(SLOTS, &data, &weights, &gamma, &x, &mut out);
    out
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta must be positive and finite, got {beta}")))
    }
}

/// Negative minimum-norm element of the subdifferential of `E` at `u`.
#[derive(Debug, Clone)]
pub struct SteepestDescentDirection {
    pub direction: GrayImage,
    /// Edge multipliers `s` of the minimum-norm subgradient `(u - g) + beta B^T s`.
    pub multipliers: Vec<f64>,
    pub free_edges: usize,
    pub qp_iterations: usize,
}

impl SteepestDescentDirection {
    pub fn norm(&self) -> f64 {
        norm2(self.direction.pixels())
    }
}

pub fn steepest_descent_direction(
    u: &GrayImage,
    g: &GrayImage,
    beta: f64,
    qp_tol: f64,
) -> Result<SteepestDescentDirection> {
    steepest_descent_direction_with(u, g, beta, qp_tol, DEFAULT_QP_MAX_ITER, None)
}

const DEFAULT_QP_MAX_ITER: usize = 1_000_000;

/// As [`steepest_descent_direction`], optionally warm-started from earlier
/// edge multipliers. Edges whose difference is zero up to a tie tolerance
/// of `1e-10` times the image scale are free in
/// `[-1, 1]`; all others are pinned to the sign of their difference.
pub fn steepest_descent_direction_with(
    u: &GrayImage,
    g: &GrayImage,
    beta: f64,
    qp_tol: f64,
    qp_max_iter: usize,
    warm_start: Option<&[f64]>,
) -> Result<SteepestDescentDirection> {
    u.same_shape(g)?;
    check_beta(beta)?;
    let edges = EdgeSet::new(u.width, u.height);
    let diffs = edges.differences(&u.pixels);
    let offset: Vec<f64> = u.pixels.iter().zip(&g.pixels).map(|(a, b)| a - b).collect();
    let tie = tie_tolerance(u, g);
    let pinned: Vec<(usize, f64)> = diffs
        .iter()
        .enumerate()
        .filter(|(_, &d)| d.abs() > tie)
        .map(|(e, &d)| (e, d.signum()))
        .collect();
    let free_edges = edges.len() - pinned.len();

    let (multipliers, subgradient, qp_iterations) = if free_edges == 0 {
        let s: Vec<f64> = diffs.iter().map(|d| d.signum()).collect();
        let bts = edges.adjoint(&s);
        let sub: Vec<f64> = offset.iter().zip(&bts).map(|(r, b)| r + beta * b).collect();
        (s, sub, 0)
    } else {
        // A = beta * B^T (pixels x edges)
        let t: Vec<_> = edges
            .edges()
            .iter()
            .enumerate()
            .flat_map(|(e, &(a, b))| [(a, e, -beta), (b, e, beta)])
            .collect();
        let a = CsrMatrix::from_triplets(u.len(), edges.len(), &t)?;
        let problem = BoxLsq::new(a, offset, vec![-1.0; edges.len()], vec![1.0; edges.len()])?.with_fixed(&pinned)?;
        let opts = BoxLsqOptions {
            tol: qp_tol,
            max_iter: qp_max_iter,
            warm_start: warm_start.filter(|w| w.len() == edges.len()).map(<[f64]>::to_vec),
            ..Default::default()
        };
        let sol = solve_box_lsq_with(&problem, &opts)?;
        (sol.s_star, sol.residual, sol.iterations)
    };
    let mut pixels: Vec<f64> = subgradient.iter().map(|v| -v).collect();
    tie_free_groups(&edges, &diffs, tie, &multipliers, &mut pixels);
    let direction = GrayImage { width: u.width, height: u.height, pixels };
    Ok(SteepestDescentDirection { direction, multipliers, free_edges, qp_iterations })
}

/// Differences at most this large count as ties: `1e-10` relative to the
/// image scale, far below any meaningful intensity difference but above the
/// rounding left behind by steps along an inexact direction.
fn tie_tolerance(u: &GrayImage, g: &GrayImage) -> f64 {
    let scale = u.pixels.iter().chain(&g.pixels).fold(1.0f64, |m, v| m.max(v.abs()));
    1e-10 * scale
}

/// At the exact minimum-norm subgradient, the two ends of a free edge whose
/// multiplier lies strictly inside `(-1, 1)` receive the same direction value.
/// The iterative QP only gets them equal up to its tolerance, and a step along
/// such a direction would split pixels that are exactly tied, after which the
/// split edge is pinned and only tiny steps remain. Averaging the direction
/// over every group joined by such edges restores the exact property, so tied
/// pixels stay bitwise equal after the step.
fn tie_free_groups(edges: &EdgeSet, diffs: &[f64], tie: f64, multipliers: &[f64], direction: &mut [f64]) {
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let n = direction.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut joined = false;
    for (e, &(a, b)) in edges.edges().iter().enumerate() {
        if diffs[e].abs() <= tie && multipliers[e].abs() < 1.0 {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
                joined = true;
            }
        }
    }
    if !joined {
        return;
    }
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        sum[r] += direction[i];
        count[r] += 1;
    }
    for i in 0..n {
        let r = find(&mut parent, i);
        if count[r] > 1 {
            direction[i] = sum[r] / count[r] as f64;
        }
    }
}

/// Largest `alpha0 * 2^-t` with `E(u + alpha d) < E(u)`.
pub fn backtracking_step(u: &GrayImage, d: &GrayImage, g: &GrayImage, beta: f64, alpha0: f64) -> Result<f64> {
    const MAX_HALVINGS: u32 = 60;
    u.same_shape(d)?;
    u.same_shape(g)?;
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        return Err(Error::InvalidParameter(format!("initial step must lie in (0, 1], got {alpha0}")));
    }
    if d.pixels.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter("zero search direction".into()));
    }
    let current = objective_unchecked(u, g, beta);
    let mut trial = u.clone();
    let mut alpha = alpha0;
    for _ in 0..=MAX_HALVINGS {
        for ((t, &base), &dir) in trial.pixels.iter_mut().zip(&u.pixels).zip(&d.pixels) {
            *t = base + alpha * dir;
        }
        if objective_unchecked(&trial, g, beta) < current {
            return Ok(alpha);
        }
        alpha *= 0.5;
    }
    Err(Error::LineSearchStall(MAX_HALVINGS))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RofParams {
    pub beta: f64,
    pub tol_inner: f64,
    pub tol_outer: f64,
    /// Cap on sweeps within one inner loop.
    pub max_inner: usize,
    /// Cap on steepest-descent restarts.
    pub max_outer: usize,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    pub alpha0: f64,
}

impl Default for RofParams {
    fn default() -> Self {
        RofParams {
            beta: 10.0,
            tol_inner: 1e-4,
            tol_outer: 300.0,
            max_inner: 10_000,
            max_outer: 1_000,
            qp_tol: 1e-6,
            qp_max_iter: DEFAULT_QP_MAX_ITER,
            alpha0: 0.5,
        }
    }
}

impl RofParams {
    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        let positive = [("tol_inner", self.tol_inner), ("tol_outer", self.tol_outer), ("qp_tol", self.qp_tol)];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_inner == 0 || self.max_outer == 0 || self.qp_max_iter == 0 {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha0 must lie in (0, 1], got {}", self.alpha0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SubroutineTiming {
    pub calls: usize,
    pub total_seconds: f64,
}

impl SubroutineTiming {
    fn record(&mut self, start: Instant) {
        self.calls += 1;
        self.total_seconds += start.elapsed().as_secs_f64();
    }

    pub fn seconds_per_call(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            self.total_seconds / self.calls as f64
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DenoiseReport {
    /// Sweeps plus restarts.
    pub iterations: usize,
    /// White+black sweep pairs.
    pub inner_iterations: usize,
    pub restarts: usize,
    /// `E` at the start and after every sweep pair and restart.
    pub objective_trace: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub direction_norms: Vec<f64>,
    pub final_direction_norm: f64,
    pub final_objective: f64,
    pub converged: bool,
    pub prox_timing: SubroutineTiming,
    pub qp_timing: SubroutineTiming,
    pub qp_iterations: usize,
    pub total_seconds: f64,
}

/// Checkerboard descent with steepest-descent restarts, started at `u = g`.
pub fn denoise(g: &GrayImage, params: &RofParams) -> Result<(GrayImage, DenoiseReport)> {
    params.validate()?;
    let started = Instant::now();
    let beta = params.beta;
    let white = color_pixels(g.width, g.height, Color::White);
    let black = color_pixels(g.width, g.height, Color::Black);
    let mut u = g.clone();
    let mut report = DenoiseReport::default();
    report.objective_trace.push(objective_unchecked(&u, g, beta));
    let mut multipliers: Option<Vec<f64>> = None;

    let fail = |u: GrayImage, mut report: DenoiseReport| {
        report.final_objective = *report.objective_trace.last().unwrap();
        report.total_seconds = started.elapsed().as_secs_f64();
        Error::DenoiseNoConvergence(Box::new((u, report)))
    };

    loop {
        let mut sweeps = 0;
        loop {
            if sweeps == params.max_inner {
                return Err(fail(u, report));
            }
            let previous = u.clone();
            for targets in [&white, &black] {
                let t = Instant::now();
                let values = solve_color(&u, g, beta, targets);
                report.prox_timing.record(t);
                for (&p, v) in targets.iter().zip(values) {
                    u.pixels[p] = v;
                }
            }
            sweeps += 1;
            report.inner_iterations += 1;
            report.iterations += 1;
            report.objective_trace.push(objective_unchecked(&u, g, beta));
            if u.distance(&previous) <= params.tol_inner {
                break;
            }
        }

        let t = Instant::now();
        let sdd = steepest_descent_direction_with(&u, g, beta, params.qp_tol, params.qp_max_iter, multipliers.as_deref());
        report.qp_timing.record(t);
        let sdd = match sdd {
            Ok(s) => s,
            Err(Error::NoConvergence { .. }) => return Err(fail(u, report)),
            Err(e) => return Err(e),
        };
        report.qp_iterations += sdd.qp_iterations;
        let norm = sdd.norm();
        report.direction_norms.push(norm);
        report.final_direction_norm = norm;
        if norm <= params.tol_outer {
            break;
        }
        if report.restarts == params.max_outer {
            return Err(fail(u, report));
        }
        let alpha = match backtracking_step(&u, &sdd.direction, g, beta, params.alpha0) {
            Ok(a) => a,
            Err(Error::LineSearchStall(_)) => return Err(fail(u, report)),
            Err(e) => return Err(e),
        };
        for (p, d) in u.pixels.iter_mut().zip(&sdd.direction.pixels) {
            *p += alpha * d;
        }
        multipliers = Some(sdd.multipliers);
        report.step_sizes.push(alpha);
        report.restarts += 1;
        report.iterations += 1;
        report.objective_trace.push(objective_unchecked(&u, g, beta));
    }

    report.converged = true;
    report.final_objective = *report.objective_trace.last().unwrap();
    report.total_seconds = started.elapsed().as_secs_f64();
    Ok((u, report))
}

/// Global minimizer of `E` through the dual problem
/// `min 0.5 ||g - B^T p||^2` over `|p_e| <= beta`, returning `u = g - B^T p`.
pub fn dual_reference_solve(g: &GrayImage, beta: f64, tol: f64) -> Result<GrayImage> {
    Ok(dual_reference_solve_with(g, beta, tol, DEFAULT_QP_MAX_ITER)?.0)
}

/// Like [`dual_reference_solve`], also returning the dual edge variables.
pub fn dual_reference_solve_with(g: &GrayImage, beta: f64, tol: f64, max_iter: usize) -> Result<(GrayImage, Vec<f64>)> {
    check_beta(beta)?;
    let edges = EdgeSet::new(g.width, g.height);
    if edges.is_empty() {
        return Ok((g.clone(), vec![]));
    }
    let t: Vec<_> = edges
        .edges()
        .iter()
        .enumerate()
        .flat_map(|(e, &(a, b))| [(a, e, 1.0), (b, e, -1.0)])
        .collect();
    let a = CsrMatrix::from_triplets(g.len(), edges.len(), &t)?;
    let problem = BoxLsq::new(a, g.pixels.clone(), vec![-beta; edges.len()], vec![beta; edges.len()])?;
    let opts = BoxLsqOptions { tol, max_iter, power_iterations: 0, lipschitz: Some(8.0), ..Default::default() };
    let sol = solve_box_lsq_with(&problem, &opts)?;
    let u = GrayImage { width: g.width, height: g.height, pixels: sol.residual };
    Ok((u, sol.s_star))
}
