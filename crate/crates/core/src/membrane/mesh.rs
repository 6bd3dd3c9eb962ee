use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structured test domains.
///
/// Both are meshed with a "union jack" pattern: square cells are split along
/// alternating diagonals, so an even number of cells per side gives a mesh
/// invariant under the symmetries of the square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// `(0, 1)^2` with `n` cells per side.
    UnitSquare(usize),
    /// `(0, 1.1)^2` minus `[0.6, 1.1)^2`. The cell size is `0.1 / ceil(n / 10)`
    /// so the re-entrant corner lies on the grid; this gives at least `n`
    /// cells per unit length.
    LShape(usize),
}

impl Domain {
    /// Exact area of the domain.
    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitSquare(_) => 1.0,
            Domain::LShape(_) => 1.1 * 1.1 - 0.5 * 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
}

/// Twice the signed area of a triangle.
pub(crate) fn signed_double_area(p: [[f64; 2]; 3]) -> f64 {
    (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])
}

impl TriMesh {
    /// Builds a mesh from counterclockwise triangles; boundary edges are the
    /// edges that belong to exactly one triangle.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut edge_count: HashMap<[usize; 2], usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::IndexOutOfRange { index: *tri.iter().max().unwrap(), max: vertices.len() });
            }
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            if !(signed_double_area(p) > 0.0) {
                return Err(Error::DegenerateElement(t));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry([a.min(b), a.max(b)]).or_default() += 1;
            }
        }
        let mut boundary_edges: Vec<[usize; 2]> =
            edge_count.into_iter().filter(|&(_, count)| count == 1).map(|(e, _)| e).collect();
        boundary_edges.sort_unstable();
        Ok(TriMesh { vertices, triangles, boundary_edges })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| 0.5 * signed_double_area(self.corners(t))).sum()
    }
}

pub fn generate_mesh(domain: Domain) -> Result<TriMesh> {
    match domain {
        Domain::UnitSquare(n) => {
            if n < 2 {
                return Err(Error::TooCoarse(n));
            }
            structured(n, 1.0 / n as f64, |_, _| true)
        }
        Domain::LShape(n) => {
            if n < 2 {
                return Err(Error::TooCoarse(n));
            }
            let m = n.div_ceil(10);
            let cut = 6 * m;
            structured(11 * m, 0.1 / m as f64, move |i, j| i < cut || j < cut)
        }
    }
}

/// `cells x cells` grid of spacing `h`, keeping the cells `(i, j)` (column,
/// row) accepted by `keep` and the vertices they use.
fn structured(cells: usize, h: f64, keep: impl Fn(usize, usize) -> bool) -> Result<TriMesh> {
    let side = cells + 1;
    let mut used = vec![false; side * side];
    let mut kept = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            if keep(i, j) {
                kept.push((i, j));
                for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    used[b * side + a] = true;
                }
            }
        }
    }
    let mut index = vec![usize::MAX; side * side];
    let mut vertices = Vec::new();
    for b in 0..side {
        for a in 0..side {
            if used[b * side + a] {
                index[b * side + a] = vertices.len();
                vertices.push([a as f64 * h, b as f64 * h]);
            }
        }
    }
    let v = |a: usize, b: usize| index[b * side + a];
    let mut triangles = Vec::with_capacity(2 * kept.len());
    for (i, j) in kept {
        let (v00, v10, v01, v11) = (v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1));
        if (i + j) % 2 == 0 {
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        } else {
            triangles.push([v00, v10, v01]);
            triangles.push([v10, v11, v01]);
        }
    }
    TriMesh::new(vertices, triangles)
}
