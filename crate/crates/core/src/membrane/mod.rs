//! Membrane deflection with threshold forces, minimized by ADMM
//!
//! The discrete energy over P1 nodal values `z` is
//!
//! ```text
//! E(z) = 0.5 z'Kz - f'Mz + sum_i w_i 1'M max(z - d_i, 0)
//! ```
//!
//! with stiffness `K` (including the boundary spring term) and lumped mass
//! `M`. Rewriting `2 max(a, 0) = a + |a|` turns the kink terms into a weighted
//! absolute error per node, so the splitting `z = y` yields a linear solve for
//! `z`, a batched prox evaluation for `y` and a multiplier update.

mod fem;
mod mesh;

pub use fem::{
    assemble_lumped_mass, assemble_stiffness, boundary_edge_mass, local_stiffness, FemMatrices,
};
pub use mesh::{generate_mesh, Domain, TriMesh};

use serde::{Deserialize, Serialize};

use crate::box_qp::{solve_box_lsq_with, BoxLsq, BoxLsqOptions};
use crate::cg::conjugate_gradient;
use crate::error::{Error, Result};
use crate::prox::prox_rows_into;
use crate::sparse::{norm2, CsrMatrix};

/// Force density: one value everywhere or one value per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Force {
    Constant(f64),
    Nodal(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    UnitSquare,
    LShape,
}

/// Physical data and solver settings; the JSON form is
/// `{domain, n, c, f, alpha, thresholds, forces, rho, tol, max_iter}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneConfig {
    pub domain: DomainKind,
    pub n: usize,
    pub c: f64,
    pub f: Force,
    pub alpha: f64,
    pub thresholds: Vec<f64>,
    pub forces: Vec<f64>,
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl MembraneConfig {
    /// `c = 1, f = 0.5, alpha = 10, d_i = 0.01 i, w_i = 0.02` for `i = 1..4`
    /// and `rho = 100`, on the unit square.
    pub fn reference(n: usize) -> Self {
        MembraneConfig {
            domain: DomainKind::UnitSquare,
            n,
            c: 1.0,
            f: Force::Constant(0.5),
            alpha: 10.0,
            thresholds: (1..=4).map(|i| 0.01 * i as f64).collect(),
            forces: vec![0.02; 4],
            rho: 100.0,
            tol: 1e-12,
            max_iter: 2000,
        }
    }

    pub fn domain(&self) -> Domain {
        match self.domain {
            DomainKind::UnitSquare => Domain::UnitSquare(self.n),
            DomainKind::LShape => Domain::LShape(self.n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be nonnegative, got {}", self.alpha));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        if self.thresholds.len() != self.forces.len() {
            return bad(format!("{} thresholds but {} forces", self.thresholds.len(), self.forces.len()));
        }
        if self.forces.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return bad("forces must be positive".into());
        }
        if self.thresholds.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return bad("thresholds must be nonnegative".into());
        }
        if self.thresholds.windows(2).any(|p| p[0] > p[1]) {
            return bad("thresholds must be sorted ascending".into());
        }
        match &self.f {
            Force::Constant(v) if !v.is_finite() => return Err(Error::NonFinite("f")),
            Force::Nodal(v) if v.iter().any(|x| !x.is_finite()) => return Err(Error::NonFinite("f")),
            _ => {}
        }
        Ok(())
    }

    /// Nodal force values for a mesh with `n` vertices.
    pub fn force_vector(&self, n: usize) -> Result<Vec<f64>> {
        match &self.f {
            Force::Constant(v) => Ok(vec![*v; n]),
            Force::Nodal(v) if v.len() == n => Ok(v.clone()),
            Force::Nodal(v) => Err(Error::ShapeMismatch(format!("{} nodal forces for {} vertices", v.len(), n))),
        }
    }

    /// `f - 0.5 * sum_i w_i`.
    pub fn modified_force(&self, n: usize) -> Result<Vec<f64>> {
        let shift = 0.5 * self.forces.iter().sum::<f64>();
        Ok(self.force_vector(n)?.into_iter().map(|f| f - shift).collect())
    }

    /// Constant that makes the absolute-value form equal to the max form:
    /// `-0.5 * sum_i w_i d_i * 1'M1`.
    pub fn energy_constant(&self, m: &[f64]) -> f64 {
        let total: f64 = m.iter().sum();
        -0.5 * self.forces.iter().zip(&self.thresholds).map(|(w, d)| w * d).sum::<f64>() * total
    }

    /// Prox parameter of the nodewise subproblem.
    pub fn prox_gamma(&self) -> f64 {
        1.0 / (2.0 * self.rho)
    }
}

fn check_len(z: &[f64], mats: &FemMatrices) -> Result<()> {
    if z.len() != mats.len() || mats.k.nrows() != mats.len() {
        return Err(Error::ShapeMismatch(format!("{} values for {} vertices", z.len(), mats.len())));
    }
    Ok(())
}

fn quadratic_part(z: &[f64], mats: &FemMatrices, force: &[f64]) -> f64 {
    let kz = mats.k.mul_vec(z);
    let mut acc = 0.0;
    for i in 0..z.len() {
        acc += 0.5 * z[i] * kz[i] - force[i] * mats.m[i] * z[i];
    }
    acc
}

/// `0.5 z'Kz - f'Mz + sum_i w_i 1'M max(z - d_i, 0)`
pub fn energy_max_form(z: &[f64], mats: &FemMatrices, config: &MembraneConfig) -> Result<f64> {
    check_len(z, mats)?;
    let force = config.force_vector(z.len())?;
    let mut kinks = 0.0;
    for (w, d) in config.forces.iter().zip(&config.thresholds) {
        let s: f64 = z.iter().zip(&mats.m).map(|(zj, mj)| mj * (zj - d).max(0.0)).sum();
        kinks += w * s;
    }
    Ok(quadratic_part(z, mats, &force) + kinks)
}

/// `0.5 z'Kz - f~'Mz + 0.5 sum_i w_i 1'M |z - d_i| + C`
pub fn energy_abs_form(z: &[f64], mats: &FemMatrices, config: &MembraneConfig) -> Result<f64> {
    check_len(z, mats)?;
    let force = config.modified_force(z.len())?;
    let mut kinks = 0.0;
    for (w, d) in config.forces.iter().zip(&config.thresholds) {
        let s: f64 = z.iter().zip(&mats.m).map(|(zj, mj)| mj * (zj - d).abs()).sum();
        kinks += w * s;
    }
    Ok(quadratic_part(z, mats, &force) + 0.5 * kinks + config.energy_constant(&mats.m))
}

/// ADMM iterates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub k: usize,
}

impl AdmmState {
    pub fn zeros(n: usize) -> Self {
        AdmmState { z: vec![0.0; n], y: vec![0.0; n], mu: vec![0.0; n], k: 0 }
    }
}

const CG_REL_TOL: f64 = 1e-10;

/// `(K + rho M)` with its diagonal, reused across iterations.
struct ZSystem {
    matrix: CsrMatrix,
    diagonal: Vec<f64>,
    force: Vec<f64>,
}

impl ZSystem {
    fn new(mats: &FemMatrices, config: &MembraneConfig) -> Result<Self> {
        let matrix = mats.k.add_diagonal(&mats.m, config.rho);
        let diagonal = matrix.diagonal();
        Ok(ZSystem { matrix, diagonal, force: config.modified_force(mats.len())? })
    }

    /// Solves `(K + rho M) z = M (f~ + rho (y - mu))`, warm-started at `state.z`.
    fn solve(&self, state: &AdmmState, mats: &FemMatrices, rho: f64) -> Result<Vec<f64>> {
        let n = mats.len();
        let rhs: Vec<f64> =
            (0..n).map(|i| mats.m[i] * (self.force[i] + rho * (state.y[i] - state.mu[i]))).collect();
        let (z, _) = conjugate_gradient(&self.matrix, &rhs, Some(&state.z), &self.diagonal, CG_REL_TOL, 20 * n + 100)?;
        Ok(z)
    }
}

/// `z = argmin L_rho(z, y, mu)`: the linear system
/// `(K + rho M) z = M (f~ + rho (y - mu))`, solved by Jacobi-preconditioned CG
/// to relative residual `1e-10`.
pub fn admm_z_update(state: &AdmmState, mats: &FemMatrices, config: &MembraneConfig) -> Result<Vec<f64>> {
    check_len(&state.z, mats)?;
    ZSystem::new(mats, config)?.solve(state, mats, config.rho)
}

/// `y = argmin L_rho(z, y, mu)`: per node the prox of
/// `sum_i w_i |y - d_i|` with `gamma = 1 / (2 rho)` at `x = z + mu`. The lumped
/// mass cancels.
pub fn admm_y_update(state: &AdmmState, config: &MembraneConfig) -> Vec<f64> {
    let n = state.z.len();
    let x: Vec<f64> = state.z.iter().zip(&state.mu).map(|(z, m)| z + m).collect();
    let width = config.thresholds.len();
    if width == 0 {
        return x;
    }
    let mut data = Vec::with_capacity(n * width);
    let mut weights = Vec::with_capacity(n * width);
    for _ in 0..n {
        data.extend_from_slice(&config.thresholds);
        weights.extend_from_slice(&config.forces);
    }
    let gamma = vec![config.prox_gamma(); n];
    let mut y = vec![0.0; n];
    prox_rows_into(width, &data, &weights, &gamma, &x, &mut y);
    y
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AdmmReport {
    pub iterations: usize,
    pub converged: bool,
    /// All three increments were exactly zero.
    pub exact_fixed_point: bool,
    pub dz: f64,
    pub dy: f64,
    pub dmu: f64,
    /// `||z - y||_M` at the last iterate.
    pub coupling_gap: f64,
    pub energy_max_form: f64,
    pub energy_abs_form: f64,
    pub seconds: f64,
}

/// ADMM from `z = y = mu = 0` until
/// `max(||dz||_M, ||dy||_M, ||dmu||_M) <= tol` or all increments vanish.
pub fn admm_solve(mats: &FemMatrices, config: &MembraneConfig) -> Result<(Vec<f64>, AdmmReport)> {
    let (state, report) = admm_run(mats, config)?;
    Ok((state.z, report))
}

/// As [`admm_solve`], returning the full final state.
pub fn admm_run(mats: &FemMatrices, config: &MembraneConfig) -> Result<(AdmmState, AdmmReport)> {
    config.validate()?;
    let started = std::time::Instant::now();
    let n = mats.len();
    let system = ZSystem::new(mats, config)?;
    let mut state = AdmmState::zeros(n);
    let mut report = AdmmReport::default();
    let delta = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };

    while state.k < config.max_iter {
        let z = system.solve(&state, mats, config.rho)?;
        let y = admm_y_update(&AdmmState { z: z.clone(), ..state.clone() }, config);
        let mu: Vec<f64> = (0..n).map(|i| state.mu[i] + z[i] - y[i]).collect();

        let (dz, dy, dmu) = (delta(&z, &state.z), delta(&y, &state.y), delta(&mu, &state.mu));
        report.dz = mats.m_norm(&dz);
        report.dy = mats.m_norm(&dy);
        report.dmu = mats.m_norm(&dmu);
        state = AdmmState { z, y, mu, k: state.k + 1 };

        let exact = [&dz, &dy, &dmu].iter().all(|v| v.iter().all(|&x| x == 0.0));
        if exact || report.dz.max(report.dy).max(report.dmu) <= config.tol {
            report.converged = true;
            report.exact_fixed_point = exact;
            break;
        }
    }

    report.iterations = state.k;
    report.coupling_gap = mats.m_norm(&delta(&state.z, &state.y));
    report.energy_max_form = energy_max_form(&state.z, mats, config)?;
    report.energy_abs_form = energy_abs_form(&state.z, mats, config)?;
    report.seconds = started.elapsed().as_secs_f64();
    if !report.converged {
        return Err(Error::AdmmNoConvergence(Box::new((state.z, report))));
    }
    Ok((state, report))
}

/// Distance of zero to the subdifferential of the max-form energy at `z`:
/// `min ||Kz - Mf + M sum_i w_i s_i||` with `s_ij = 1` where `z_j > d_i`,
/// `0` where `z_j < d_i`, and free in `[0, 1]` where `|z_j - d_i| <= snap_tol`.
/// The minimization over the free entries is a box-constrained least-squares
/// problem.
pub fn optimality_residual(z: &[f64], mats: &FemMatrices, config: &MembraneConfig, snap_tol: f64) -> Result<f64> {
    check_len(z, mats)?;
    let n = z.len();
    let force = config.force_vector(n)?;
    let kz = mats.k.mul_vec(z);
    let mut base: Vec<f64> = (0..n).map(|j| kz[j] - mats.m[j] * force[j]).collect();
    let mut columns = Vec::new();
    for (w, d) in config.forces.iter().zip(&config.thresholds) {
        for j in 0..n {
            if (z[j] - d).abs() <= snap_tol {
                columns.push((j, w * mats.m[j]));
            } else if z[j] > *d {
                base[j] += w * mats.m[j];
            }
        }
    }
    if columns.is_empty() {
        return Ok(norm2(&base));
    }
    let triplets: Vec<_> = columns.iter().enumerate().map(|(col, &(j, v))| (j, col, v)).collect();
    let a = CsrMatrix::from_triplets(n, columns.len(), &triplets)?;
    let gradient_scale = norm2(&a.tr_mul_vec(&base)).max(f64::MIN_POSITIVE);
    let problem = BoxLsq::new(a, base, vec![0.0; columns.len()], vec![1.0; columns.len()])?;
    let opts = BoxLsqOptions { tol: 1e-13 * gradient_scale, max_iter: 100_000, ..Default::default() };
    let sol = solve_box_lsq_with(&problem, &opts)?;
    Ok(norm2(&sol.residual))
}

/// Number of thresholds with `z_j >= d_i` at every vertex.
pub fn active_counts(z: &[f64], config: &MembraneConfig) -> Vec<usize> {
    z.iter().map(|&zj| config.thresholds.iter().filter(|&&d| zj >= d).count()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (TriMesh, FemMatrices, MembraneConfig) {
        let config = MembraneConfig::reference(n);
        let mesh = generate_mesh(config.domain()).unwrap();
        let mats = FemMatrices::assemble(&mesh, config.c, config.alpha).unwrap();
        (mesh, mats, config)
    }

    #[test]
    fn modified_force_of_reference_config() {
        let config = MembraneConfig::reference(2);
        for v in config.modified_force(5).unwrap() {
            assert!((v - 0.46).abs() < 1e-15);
        }
    }

    #[test]
    fn energies_at_zero_and_below_thresholds() {
        let (_, mats, mut config) = setup(2);
        config.f = Force::Constant(0.0);
        let z = vec![0.0; mats.len()];
        assert_eq!(energy_max_form(&z, &mats, &config).unwrap(), 0.0);

        let (_, mats, config) = setup(2);
        let z: Vec<f64> = (0..mats.len()).map(|i| 0.001 * i as f64).collect();
        let mut plain = config.clone();
        plain.thresholds.clear();
        plain.forces.clear();
        assert_eq!(energy_max_form(&z, &mats, &config).unwrap(), energy_max_form(&z, &mats, &plain).unwrap());
        let abs_plain = energy_abs_form(&z, &mats, &plain).unwrap();
        assert!((abs_plain - energy_max_form(&z, &mats, &plain).unwrap()).abs() < 1e-16);
    }

    #[test]
    fn z_update_examples() {
        let (_, mats, config) = setup(2);
        let state = AdmmState::zeros(mats.len());
        let z = admm_z_update(&state, &mats, &config).unwrap();
        let system = mats.k.add_diagonal(&mats.m, config.rho);
        let rhs: Vec<f64> = mats.m.iter().map(|m| m * 0.46).collect();
        let r: Vec<f64> = system.mul_vec(&z).iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(norm2(&r) <= 1e-10 * norm2(&rhs));

        let mut zero_force = config.clone();
        zero_force.thresholds.clear();
        zero_force.forces.clear();
        zero_force.f = Force::Constant(0.0);
        assert!(admm_z_update(&state, &mats, &zero_force).unwrap().iter().all(|&v| v == 0.0));

        // no stiffness, unit mass: z = f~ / rho + y - mu
        let diag = FemMatrices { k: CsrMatrix::zeros(3, 3), m: vec![1.0; 3] };
        let mut cfg = config.clone();
        cfg.f = Force::Nodal(vec![1.0, 2.0, 3.0]);
        let st = AdmmState { z: vec![0.0; 3], y: vec![0.5, 0.0, -0.5], mu: vec![0.1, 0.2, 0.3], k: 0 };
        let z = admm_z_update(&st, &diag, &cfg).unwrap();
        for i in 0..3 {
            let f_tilde = (i + 1) as f64 - 0.04;
            assert!((z[i] - (f_tilde / 100.0 + st.y[i] - st.mu[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn y_update_examples() {
        let mut config = MembraneConfig::reference(2);
        config.thresholds = vec![0.01];
        config.forces = vec![0.02];
        let st = AdmmState { z: vec![0.05, 0.01, 0.0], y: vec![0.0; 3], mu: vec![0.0, 0.0, 0.01], k: 0 };
        let y = admm_y_update(&st, &config);
        assert!((y[0] - 0.0499).abs() < 1e-15);
        assert_eq!(y[1], 0.01);
        assert_eq!(y[2], 0.01);

        config.thresholds.clear();
        config.forces.clear();
        let y = admm_y_update(&st, &config);
        assert_eq!(y, vec![0.05, 0.01, 0.01]);
    }

    #[test]
    fn residual_without_thresholds_is_plain_gradient() {
        let (_, mats, mut config) = setup(3);
        config.thresholds.clear();
        config.forces.clear();
        let z: Vec<f64> = (0..mats.len()).map(|i| (i as f64).sin()).collect();
        let kz = mats.k.mul_vec(&z);
        let g: Vec<f64> = (0..mats.len()).map(|j| kz[j] - mats.m[j] * 0.5).collect();
        assert_eq!(optimality_residual(&z, &mats, &config, 0.0).unwrap(), norm2(&g));
    }

    #[test]
    fn residual_with_fixed_activity() {
        let (_, mats, config) = setup(3);
        // strictly between thresholds 2 and 3 everywhere
        let z = vec![0.025; mats.len()];
        let kz = mats.k.mul_vec(&z);
        let g: Vec<f64> = (0..mats.len()).map(|j| kz[j] - mats.m[j] * 0.5 + mats.m[j] * 0.04).collect();
        assert!((optimality_residual(&z, &mats, &config, 1e-9).unwrap() - norm2(&g)).abs() < 1e-15);
    }

    #[test]
    fn invalid_config() {
        let mut config = MembraneConfig::reference(2);
        config.thresholds = vec![0.02, 0.01];
        config.forces = vec![0.1, 0.1];
        assert!(config.validate().is_err());
        let mut config = MembraneConfig::reference(2);
        config.rho = 0.0;
        assert!(config.validate().is_err());
        let mut config = MembraneConfig::reference(2);
        config.forces.pop();
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{"domain":"l_shape","n":10,"c":1.0,"f":[0.5,0.5],"alpha":10.0,
            "thresholds":[0.01],"forces":[0.02],"rho":100.0,"tol":1e-20,"max_iter":5}"#;
        let config: MembraneConfig = serde_json::from_str(text).unwrap();
        assert_eq!(config.domain(), Domain::LShape(10));
        assert_eq!(config.f, Force::Nodal(vec![0.5, 0.5]));
        assert_eq!(config.tol, 1e-20);
        let back: MembraneConfig = serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(back, config);
        assert!(serde_json::from_str::<MembraneConfig>(r#"{"domain":"disk"}"#).is_err());
    }
}
