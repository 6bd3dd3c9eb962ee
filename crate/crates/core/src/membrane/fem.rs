use rayon::prelude::*;

use super::mesh::{signed_double_area, TriMesh};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Stiffness matrix (volume plus Robin boundary term) and lumped mass diagonal.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub k: CsrMatrix,
    pub m: Vec<f64>,
}

impl FemMatrices {
    pub fn assemble(mesh: &TriMesh, c: f64, alpha: f64) -> Result<Self> {
        Ok(FemMatrices { k: assemble_stiffness(mesh, c, alpha)?, m: assemble_lumped_mass(mesh) })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// `sqrt(sum_i M_ii v_i^2)`
    pub fn m_norm(&self, v: &[f64]) -> f64 {
        self.m.iter().zip(v).map(|(m, x)| m * x * x).sum::<f64>().sqrt()
    }
}

/// `c * integral grad(phi_i) . grad(phi_j)` over one P1 triangle.
pub fn local_stiffness(p: [[f64; 2]; 3], c: f64) -> Option<[[f64; 3]; 3]> {
    let two_area = signed_double_area(p);
    if !(two_area > 0.0) {
        return None;
    }
    // gradient of the i-th hat is (b_i, c_i) / (2 area)
    let mut b = [0.0; 3];
    let mut q = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        b[i] = p[j][1] - p[k][1];
        q[i] = p[k][0] - p[j][0];
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = c * (b[i] * b[j] + q[i] * q[j]) / (2.0 * two_area);
        }
    }
    Some(out)
}

/// Exact edge mass of the two hats on a boundary edge, scaled by `alpha`.
pub fn boundary_edge_mass(a: [f64; 2], b: [f64; 2], alpha: f64) -> [[f64; 2]; 2] {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let s = alpha * len / 6.0;
    [[2.0 * s, s], [s, 2.0 * s]]
}

pub fn assemble_stiffness(mesh: &TriMesh, c: f64, alpha: f64) -> Result<CsrMatrix> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("stiffness constant must be positive, got {c}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("boundary stiffness must be nonnegative, got {alpha}")));
    }
    let locals: Vec<Option<[[f64; 3]; 3]>> =
        (0..mesh.triangles().len()).into_par_iter().map(|t| local_stiffness(mesh.corners(t), c)).collect();
    let mut triplets = Vec::with_capacity(9 * locals.len() + 4 * mesh.boundary_edges().len());
    for (t, local) in locals.into_iter().enumerate() {
        let local = local.ok_or(Error::DegenerateElement(t))?;
        let tri = mesh.triangles()[t];
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    if alpha > 0.0 {
        for &[a, b] in mesh.boundary_edges() {
            let e = boundary_edge_mass(mesh.vertices()[a], mesh.vertices()[b], alpha);
            let ids = [a, b];
            for i in 0..2 {
                for j in 0..2 {
                    triplets.push((ids[i], ids[j], e[i][j]));
                }
            }
        }
    }
    let n = mesh.num_vertices();
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// `M_ii = sum over triangles containing i of area / 3`.
pub fn assemble_lumped_mass(mesh: &TriMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = signed_double_area(mesh.corners(t)) / 6.0;
        for &v in tri {
            m[v] += third;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::membrane::mesh::{generate_mesh, Domain};

    fn reference_triangle() -> TriMesh {
        TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn reference_element() {
        let k = assemble_stiffness(&reference_triangle(), 1.0, 0.0).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        let dense = k.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((dense[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
        let m = assemble_lumped_mass(&reference_triangle());
        for v in m {
            assert!((v - 1.0 / 6.0).abs() < 1e-16);
        }
    }

    #[test]
    fn robin_term_on_single_edge() {
        let mesh = reference_triangle();
        let plain = assemble_stiffness(&mesh, 1.0, 0.0).unwrap();
        let robin = assemble_stiffness(&mesh, 1.0, 3.0).unwrap();
        // hypotenuse between vertices 1 and 2 has length sqrt 2
        let s = 3.0 * 2f64.sqrt() / 6.0;
        assert!((robin.get(1, 2) - plain.get(1, 2) - s).abs() < 1e-14);
        // vertex 0 touches the two unit legs
        assert!((robin.get(0, 0) - plain.get(0, 0) - 2.0 * (2.0 * 3.0 / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn constants_in_kernel_without_robin_term() {
        let mesh = generate_mesh(Domain::UnitSquare(5)).unwrap();
        let k = assemble_stiffness(&mesh, 2.0, 0.0).unwrap();
        let ones = vec![1.0; mesh.num_vertices()];
        assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert_eq!(k.asymmetry(), 0.0);
    }

    #[test]
    fn lumped_mass_partition_of_unity() {
        let m = assemble_lumped_mass(&generate_mesh(Domain::UnitSquare(9)).unwrap());
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.iter().all(|&v| v > 0.0));
        let m = assemble_lumped_mass(&generate_mesh(Domain::LShape(20)).unwrap());
        assert!((m.iter().sum::<f64>() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn invalid_constants() {
        let mesh = reference_triangle();
        assert!(assemble_stiffness(&mesh, 0.0, 1.0).is_err());
        assert!(assemble_stiffness(&mesh, 1.0, -1.0).is_err());
    }
}
