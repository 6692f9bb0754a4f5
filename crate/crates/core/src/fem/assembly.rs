use super::mesh::{BoundaryTag, Mesh};
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Per-triangle P1 geometry: area and the (constant) gradients of the three
/// nodal basis functions.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let s = 1.0 / (2.0 * area);
        let mut grads = [[0.0; 2]; 3];
        for k in 0..3 {
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            grads[k] = [(a[1] - b[1]) * s, (b[0] - a[0]) * s];
        }
        ElementGeometry { area, grads }
    }

    /// Gradient of the P1 function with local nodal values `u`.
    #[inline]
    pub fn gradient(&self, u: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for k in 0..3 {
            g[0] += u[k] * self.grads[k][0];
            g[1] += u[k] * self.grads[k][1];
        }
        g
    }
}

pub fn element_geometry(mesh: &Mesh) -> Vec<ElementGeometry> {
    mesh.triangles()
        .iter()
        .map(|tri| ElementGeometry::new(tri.map(|v| mesh.vertices()[v])))
        .collect()
}

/// Diffusion coefficient for stiffness assembly.
#[derive(Debug, Clone, Copy)]
pub enum Coefficient<'a> {
    Constant(f64),
    /// One value per triangle, applied with centroid quadrature.
    PerTriangle(&'a [f64]),
    /// Constant symmetric positive definite 2×2 tensor.
    Tensor([[f64; 2]; 2]),
}

fn check_spd(t: &[[f64; 2]; 2]) -> Result<()> {
    let sym = (t[0][1] - t[1][0]).abs() <= 1e-14 * (t[0][1].abs() + t[1][0].abs()).max(1.0);
    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    if sym && t[0][0] > 0.0 && det > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("tensor {t:?} is not symmetric positive definite")))
    }
}

/// Galerkin P1 stiffness matrix `⟨κ ∇φ_j, ∇φ_i⟩`.
pub fn assemble_stiffness(mesh: &Mesh, coefficient: Coefficient<'_>) -> Result<SparseMatrix> {
    let tensor = match coefficient {
        Coefficient::Tensor(t) => {
            check_spd(&t)?;
            t
        }
        _ => [[1.0, 0.0], [0.0, 1.0]],
    };
    if let Coefficient::PerTriangle(c) = coefficient {
        if c.len() != mesh.num_triangles() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_triangles(),
                got: c.len(),
            });
        }
    }
    let geo = element_geometry(mesh);
    let nv = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let kappa = match coefficient {
            Coefficient::Constant(c) => c,
            Coefficient::PerTriangle(c) => c[t],
            Coefficient::Tensor(_) => 1.0,
        };
        let local = local_stiffness(&geo[t], &tensor);
        for i in 0..3 {
            for j in 0..3 {
                trip.push((tri[i], tri[j], kappa * local[i][j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(nv, nv, trip))
}

pub fn local_stiffness(g: &ElementGeometry, tensor: &[[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        let tg = [
            tensor[0][0] * g.grads[i][0] + tensor[0][1] * g.grads[i][1],
            tensor[1][0] * g.grads[i][0] + tensor[1][1] * g.grads[i][1],
        ];
        for j in 0..3 {
            k[j][i] = g.area * (tg[0] * g.grads[j][0] + tg[1] * g.grads[j][1]);
        }
    }
    k
}

/// Consistent P1 mass matrix, or its row-sum lumped diagonal.
pub fn assemble_mass(mesh: &Mesh, lumped: bool) -> SparseMatrix {
    let nv = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(t);
        for i in 0..3 {
            if lumped {
                trip.push((tri[i], tri[i], area / 3.0));
            } else {
                for j in 0..3 {
                    let w = if i == j { 2.0 } else { 1.0 };
                    trip.push((tri[i], tri[j], w * area / 12.0));
                }
            }
        }
    }
    SparseMatrix::from_triplets(nv, nv, trip)
}

/// 1D P1 mass matrix on the boundary sides carrying one of `tags`.
pub fn assemble_boundary_mass(mesh: &Mesh, tags: &[BoundaryTag]) -> Result<SparseMatrix> {
    if tags.is_empty() {
        return Err(Error::invalid("boundary mass needs at least one boundary tag"));
    }
    let nv = mesh.num_vertices();
    let mut trip = Vec::new();
    for e in mesh.boundary_edges().iter().filter(|e| tags.contains(&e.tag)) {
        let [a, b] = e.vertices.map(|v| mesh.vertices()[v]);
        let h = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        for i in 0..2 {
            for j in 0..2 {
                let w = if i == j { 2.0 } else { 1.0 };
                trip.push((e.vertices[i], e.vertices[j], w * h / 6.0));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(nv, nv, trip))
}

/// Row `i` holds the barycentric weights of `points[i]` in its containing
/// triangle, so applying the operator to nodal values evaluates the P1
/// interpolant at the points.
pub fn point_observation_operator(mesh: &Mesh, points: &[[f64; 2]]) -> Result<SparseMatrix> {
    let mut trip = Vec::with_capacity(3 * points.len());
    for (i, &p) in points.iter().enumerate() {
        let (t, w) = mesh.locate(p)?;
        let tri = mesh.triangles()[t];
        for k in 0..3 {
            if w[k] != 0.0 {
                trip.push((i, tri[k], w[k]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(points.len(), mesh.num_vertices(), trip))
}

/// Fast re-assembly of `Σ_T κ_T K_T` for a fixed mesh: the sparsity pattern
/// and the scatter map from local to global entries are computed once.
#[derive(Debug, Clone)]
pub struct StiffnessAssembler {
    pattern: SparseMatrix,
    local: Vec<[[f64; 3]; 3]>,
    scatter: Vec<[[usize; 3]; 3]>,
}

impl StiffnessAssembler {
    pub fn new(mesh: &Mesh) -> Self {
        let identity = [[1.0, 0.0], [0.0, 1.0]];
        let geo = element_geometry(mesh);
        let local: Vec<_> = geo.iter().map(|g| local_stiffness(g, &identity)).collect();
        let nv = mesh.num_vertices();
        let pattern = SparseMatrix::from_triplets(
            nv,
            nv,
            mesh.triangles()
                .iter()
                .flat_map(|tri| (0..9).map(move |k| (tri[k / 3], tri[k % 3], 0.0))),
        );
        let scatter = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [[0usize; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        s[i][j] = pattern.position(tri[i], tri[j]).expect("pattern entry");
                    }
                }
                s
            })
            .collect();
        StiffnessAssembler {
            pattern,
            local,
            scatter,
        }
    }

    pub fn assemble(&self, kappa: &[f64]) -> SparseMatrix {
        let mut k = self.pattern.clone();
        let vals = k.values_mut();
        for ((kt, loc), sc) in kappa.iter().zip(&self.local).zip(&self.scatter) {
            for i in 0..3 {
                for j in 0..3 {
                    vals[sc[i][j]] += kt * loc[i][j];
                }
            }
        }
        k
    }

    /// `Σ_T κ_T K_T u` without forming the matrix.
    pub fn apply(&self, mesh: &Mesh, kappa: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for ((tri, loc), kt) in mesh.triangles().iter().zip(&self.local).zip(kappa) {
            for i in 0..3 {
                let mut s = 0.0;
                for j in 0..3 {
                    s += loc[i][j] * u[tri[j]];
                }
                out[tri[i]] += kt * s;
            }
        }
        out
    }
}
