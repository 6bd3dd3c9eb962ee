//! Box-constrained linear least squares
//!
//! Solves `min_s 0.5 * ||g + A s||^2` subject to `l <= s <= u`, where some
//! coordinates may be pinned to constants. Pinned coordinates are folded into
//! the offset before solving. The remaining problem is handled by an
//! accelerated projected-gradient method with backtracking on the Lipschitz
//! estimate, a function-value safeguard and gradient-based momentum restarts.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

/// `min 0.5 ||g + A s||^2` over `lower <= s <= upper`, with optional fixed
/// coordinates.
#[derive(Debug, Clone)]
pub struct BoxLsq {
    a: CsrMatrix,
    g: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    fixed: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct BoxLsqSolution {
    pub s_star: Vec<f64>,
    /// `g + A s_star`
    pub residual: Vec<f64>,
    /// Norm of the projected gradient `s - clip(s - grad)` over free coordinates.
    pub kkt_norm: f64,
    pub objective: f64,
    pub iterations: usize,
    pub lipschitz: f64,
}

#[derive(Debug, Clone)]
pub struct BoxLsqOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Power-iteration steps for the Lipschitz estimate; zero means use
    /// `lipschitz` as given.
    pub power_iterations: usize,
    /// Known upper bound on `||A^T A||`, used when power iteration is disabled.
    pub lipschitz: Option<f64>,
    /// Initial point (full length, fixed coordinates ignored); clipped to the box.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for BoxLsqOptions {
    fn default() -> Self {
        BoxLsqOptions { tol: 1e-6, max_iter: 100_000, power_iterations: 30, lipschitz: None, warm_start: None }
    }
}

impl BoxLsq {
    pub fn new(a: CsrMatrix, g: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = a.ncols();
        if g.len() != a.nrows() || lower.len() != n || upper.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "operator {}x{}, offset {}, bounds {}/{}",
                a.nrows(),
                n,
                g.len(),
                lower.len(),
                upper.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("offset"));
        }
        for j in 0..n {
            if lower[j].is_nan() || upper[j].is_nan() || lower[j] > upper[j] {
                return Err(Error::BadBounds(j));
            }
        }
        Ok(BoxLsq { a, g, lower, upper, fixed: vec![None; n] })
    }

    /// Pins coordinates to constants inside their bounds.
    pub fn with_fixed(mut self, fixed: &[(usize, f64)]) -> Result<Self> {
        for &(j, v) in fixed {
            if j >= self.fixed.len() {
                return Err(Error::IndexOutOfRange { index: j, max: self.fixed.len() });
            }
            if !(self.lower[j] <= v && v <= self.upper[j]) {
                return Err(Error::BadBounds(j));
            }
            self.fixed[j] = Some(v);
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn operator(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn offset(&self) -> &[f64] {
        &self.g
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn fixed(&self) -> &[Option<f64>] {
        &self.fixed
    }

    /// `0.5 ||g + A s||^2`
    pub fn objective(&self, s: &[f64]) -> f64 {
        let r = self.residual(s);
        0.5 * dot(&r, &r)
    }

    pub fn residual(&self, s: &[f64]) -> Vec<f64> {
        let mut r = self.a.mul_vec(s);
        r.iter_mut().zip(&self.g).for_each(|(ri, gi)| *ri += gi);
        r
    }

    /// `A^T (g + A s)`
    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        self.a.tr_mul_vec(&self.residual(s))
    }

    /// Projected-gradient norm over the free coordinates.
    pub fn kkt_norm(&self, s: &[f64]) -> f64 {
        let grad = self.gradient(s);
        let mut acc = 0.0;
        for j in 0..self.dim() {
            if self.fixed[j].is_none() {
                let step = s[j] - (s[j] - grad[j]).clamp(self.lower[j], self.upper[j]);
                acc += step * step;
            }
        }
        acc.sqrt()
    }
}

/// Largest eigenvalue of `A^T A` by power iteration from a fixed start.
pub fn power_iteration(a: &CsrMatrix, steps: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.5 * (((j * 7919) % 101) as f64 / 101.0)).collect();
    let mut av = vec![0.0; a.nrows()];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..steps.max(1) {
        let nv = norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        a.mul_vec_into(&v, &mut av);
        a.tr_mul_vec_into(&av, &mut w);
        lambda = dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
    }
    lambda
}

pub fn solve_box_lsq(p: &BoxLsq, tol: f64, max_iter: usize) -> Result<BoxLsqSolution> {
    solve_box_lsq_with(p, &BoxLsqOptions { tol, max_iter, ..Default::default() })
}

pub fn solve_box_lsq_with(p: &BoxLsq, opts: &BoxLsqOptions) -> Result<BoxLsqSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let n = p.dim();
    let free: Vec<usize> = (0..n).filter(|&j| p.fixed[j].is_none()).collect();
    let pinned: Vec<f64> = (0..n).map(|j| p.fixed[j].unwrap_or(0.0)).collect();
    let g = p.residual(&pinned);
    let a = p.a.select_columns(&free);
    let lower: Vec<f64> = free.iter().map(|&j| p.lower[j]).collect();
    let upper: Vec<f64> = free.iter().map(|&j| p.upper[j]).collect();
    let start: Vec<f64> = match &opts.warm_start {
        Some(ws) if ws.len() == n => free.iter().map(|&j| ws[j]).collect(),
        Some(ws) => {
            return Err(Error::ShapeMismatch(format!("warm start of length {} for {} variables", ws.len(), n)))
        }
        None => vec![0.0; free.len()],
    };

    let reduced = Reduced { a: &a, g: &g, lower: &lower, upper: &upper };
    let lipschitz = if opts.power_iterations > 0 {
        power_iteration(&a, opts.power_iterations.max(30)) * 1.01
    } else {
        opts.lipschitz.ok_or_else(|| Error::InvalidParameter("no Lipschitz bound available".into()))?
    };
    let run = reduced.accelerated(start, lipschitz, opts.tol, opts.max_iter);

    let mut s_star = pinned;
    for (i, &j) in free.iter().enumerate() {
        s_star[j] = run.s[i];
    }
    if run.kkt_norm > opts.tol {
        return Err(Error::NoConvergence { solver: "box-constrained least squares", residual: run.kkt_norm });
    }
    let residual = p.residual(&s_star);
    Ok(BoxLsqSolution {
        objective: 0.5 * dot(&residual, &residual),
        s_star,
        residual,
        kkt_norm: run.kkt_norm,
        iterations: run.iterations,
        lipschitz: run.lipschitz,
    })
}

struct Reduced<'a> {
    a: &'a CsrMatrix,
    g: &'a [f64],
    lower: &'a [f64],
    upper: &'a [f64],
}

struct Run {
    s: Vec<f64>,
    kkt_norm: f64,
    iterations: usize,
    lipschitz: f64,
}

impl Reduced<'_> {
    fn residual_into(&self, s: &[f64], r: &mut [f64]) {
        self.a.mul_vec_into(s, r);
        r.iter_mut().zip(self.g).for_each(|(ri, gi)| *ri += gi);
    }

    fn project_step(&self, y: &[f64], grad: &[f64], step: f64, out: &mut [f64]) {
        for j in 0..y.len() {
            out[j] = (y[j] - step * grad[j]).clamp(self.lower[j], self.upper[j]);
        }
    }

    fn kkt(&self, s: &[f64], grad: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..s.len() {
            let d = s[j] - (s[j] - grad[j]).clamp(self.lower[j], self.upper[j]);
            acc += d * d;
        }
        acc.sqrt()
    }

    fn accelerated(&self, start: Vec<f64>, lipschitz: f64, tol: f64, max_iter: usize) -> Run {
        let n = start.len();
        let m = self.g.len();
        let mut x: Vec<f64> = start.iter().enumerate().map(|(j, &v)| v.clamp(self.lower[j], self.upper[j])).collect();
        let mut rx = vec![0.0; m];
        self.residual_into(&x, &mut rx);
        let mut gx = vec![0.0; n];
        self.a.tr_mul_vec_into(&rx, &mut gx);
        let mut kkt = self.kkt(&x, &gx);
        let mut lip = if lipschitz > 0.0 { lipschitz } else { 1.0 };
        if n == 0 || kkt <= tol {
            return Run { s: x, kkt_norm: kkt, iterations: 0, lipschitz: lip };
        }

        let mut fx = 0.5 * dot(&rx, &rx);
        let mut y = x.clone();
        let mut ry = rx.clone();
        let mut gy = gx.clone();
        let mut p = vec![0.0; n];
        let mut rp = vec![0.0; m];
        let mut t = 1.0f64;
        // true while `y == x`: the trial point is then a plain projected
        // gradient step, which is accepted even if rounding makes `fp > fx`
        let mut plain = true;
        let mut iterations = 0;

        while iterations < max_iter {
            iterations += 1;
            // backtracking on the quadratic upper model
            let fy = 0.5 * dot(&ry, &ry);
            let fp = loop {
                self.project_step(&y, &gy, 1.0 / lip, &mut p);
                self.residual_into(&p, &mut rp);
                let fp = 0.5 * dot(&rp, &rp);
                let mut lin = 0.0;
                let mut sq = 0.0;
                for j in 0..n {
                    let d = p[j] - y[j];
                    lin += gy[j] * d;
                    sq += d * d;
                }
                let model = fy + lin + 0.5 * lip * sq;
                if fp <= model + 1e-12 * fy.abs().max(1e-300) || sq == 0.0 {
                    break fp;
                }
                lip *= 2.0;
            };

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            if fp <= fx || plain {
                // gradient restart test: momentum pointing uphill
                let mut uphill = 0.0;
                for j in 0..n {
                    uphill += (y[j] - p[j]) * (p[j] - x[j]);
                }
                let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
                t = if uphill > 0.0 { 1.0 } else { t_next };
                plain = beta == 0.0;
                for j in 0..n {
                    y[j] = p[j] + beta * (p[j] - x[j]);
                }
                for i in 0..m {
                    ry[i] = rp[i] + beta * (rp[i] - rx[i]);
                }
                std::mem::swap(&mut x, &mut p);
                std::mem::swap(&mut rx, &mut rp);
                fx = fp;
                self.a.tr_mul_vec_into(&rx, &mut gx);
                kkt = self.kkt(&x, &gx);
                if kkt <= tol {
                    break;
                }
                if beta == 0.0 {
                    gy.copy_from_slice(&gx);
                } else {
                    self.a.tr_mul_vec_into(&ry, &mut gy);
                }
            } else {
                // safeguard: drop momentum and restart from the best point
                t = 1.0;
                plain = true;
                y.copy_from_slice(&x);
                ry.copy_from_slice(&rx);
                gy.copy_from_slice(&gx);
            }
        }
        Run { s: x, kkt_norm: kkt, iterations, lipschitz: lip }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_clipping() {
        let p = BoxLsq::new(CsrMatrix::identity(2), vec![1.0, -2.0], vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let sol = solve_box_lsq(&p, 1e-10, 1000).unwrap();
        assert!(close(&sol.s_star, &[-1.0, 1.0], 1e-10));
        assert!(close(&sol.residual, &[0.0, -1.0], 1e-10));
    }

    #[test]
    fn interior_optimum() {
        let p = BoxLsq::new(CsrMatrix::identity(2), vec![0.3, -0.3], vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let sol = solve_box_lsq(&p, 1e-12, 1000).unwrap();
        assert!(close(&sol.s_star, &[-0.3, 0.3], 1e-12));
        assert!(close(&sol.residual, &[0.0, 0.0], 1e-12));
    }

    #[test]
    fn two_row_column_against_grid() {
        // A = (-1; 1), g = (-0.5, 0.5): residual (-0.5 - s, 0.5 + s)
        let a = CsrMatrix::from_triplets(2, 1, &[(0, 0, -1.0), (1, 0, 1.0)]).unwrap();
        let p = BoxLsq::new(a, vec![-0.5, 0.5], vec![-1.0], vec![1.0]).unwrap();
        let sol = solve_box_lsq(&p, 1e-12, 1000).unwrap();
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 0..=20_000 {
            let s = -1.0 + i as f64 * 1e-4;
            let v = p.objective(&[s]);
            if v < best {
                best = v;
                arg = s;
            }
        }
        assert!((sol.s_star[0] - arg).abs() <= 1e-4);
        assert!((sol.objective - best).abs() <= 1e-8);
        assert!((sol.s_star[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fixed_coordinates_are_folded() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let p = BoxLsq::new(a, vec![-2.0, 0.0], vec![-5.0; 2], vec![5.0; 2]).unwrap().with_fixed(&[(1, 0.5)]).unwrap();
        let sol = solve_box_lsq(&p, 1e-12, 1000).unwrap();
        assert_eq!(sol.s_star[1], 0.5);
        assert!((sol.s_star[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn bad_bounds() {
        let r = BoxLsq::new(CsrMatrix::identity(1), vec![0.0], vec![1.0], vec![0.0]);
        assert!(matches!(r, Err(Error::BadBounds(0))));
        let r = BoxLsq::new(CsrMatrix::identity(1), vec![0.0], vec![0.0], vec![1.0]).unwrap().with_fixed(&[(0, 2.0)]);
        assert!(matches!(r, Err(Error::BadBounds(0))));
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        // ill-conditioned, tight tolerance, one iteration
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0001)]).unwrap();
        let p = BoxLsq::new(a, vec![1.0, -1.0], vec![-1e3; 2], vec![1e3; 2]).unwrap();
        assert!(matches!(solve_box_lsq(&p, 1e-14, 1), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn analytic_lipschitz_bound() {
        let p = BoxLsq::new(CsrMatrix::identity(2), vec![1.0, -2.0], vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let opts = BoxLsqOptions { tol: 1e-12, power_iterations: 0, lipschitz: Some(1.0), ..Default::default() };
        let sol = solve_box_lsq_with(&p, &opts).unwrap();
        assert!(close(&sol.s_star, &[-1.0, 1.0], 1e-12));
    }
}
