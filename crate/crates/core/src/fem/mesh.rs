use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Bottom,
    Top,
    Left,
    Right,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Bottom,
        BoundaryTag::Top,
        BoundaryTag::Left,
        BoundaryTag::Right,
    ];
}

#[derive(Debug, Clone)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    /// Triangle owning this edge.
    pub triangle: usize,
}

/// Structured triangulation of the unit square.
///
/// Vertex `(i, j)` sits at `(i/n, j/n)` and has index `j*(n+1) + i`. Every
/// cell is split along its lower-left to upper-right diagonal.
#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
}

impl Mesh {
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("mesh needs at least one cell per side"));
        }
        let h = 1.0 / n as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;

        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // exact 1.0 on the far sides
                let x = if i == n { 1.0 } else { i as f64 * h };
                let y = if j == n { 1.0 } else { j as f64 * h };
                vertices.push([x, y]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = idx(i, j);
                let v10 = idx(i + 1, j);
                let v01 = idx(i, j + 1);
                let v11 = idx(i + 1, j + 1);
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let cell_lower = |i: usize, j: usize| 2 * (j * n + i);
        let mut boundary_edges = Vec::with_capacity(4 * n);
        for i in 0..n {
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(i, 0), idx(i + 1, 0)],
                tag: BoundaryTag::Bottom,
                triangle: cell_lower(i, 0),
            });
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(i, n), idx(i + 1, n)],
                tag: BoundaryTag::Top,
                triangle: cell_lower(i, n - 1) + 1,
            });
        }
        for j in 0..n {
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(0, j), idx(0, j + 1)],
                tag: BoundaryTag::Left,
                triangle: cell_lower(0, j) + 1,
            });
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(n, j), idx(n, j + 1)],
                tag: BoundaryTag::Right,
                triangle: cell_lower(n - 1, j),
            });
        }

        Ok(Mesh {
            n,
            vertices,
            triangles,
            boundary_edges,
        })
    }

    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Sorted, deduplicated vertices lying on any side carrying one of `tags`.
    pub fn boundary_vertices(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| tags.contains(&e.tag))
            .flat_map(|e| e.vertices)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let (i, j) = (v % (self.n + 1), v / (self.n + 1));
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Containing triangle and barycentric weights (aligned with the
    /// triangle's vertex order) for a point of the closed unit square.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
        let [x, y] = p;
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!(
                "point ({x}, {y}) lies outside the unit square"
            )));
        }
        let n = self.n;
        let nf = n as f64;
        let i = ((x * nf).floor() as usize).min(n - 1);
        let j = ((y * nf).floor() as usize).min(n - 1);
        let s = x * nf - i as f64;
        let t = y * nf - j as f64;
        let lower = 2 * (j * n + i);
        if s >= t {
            // (v00, v10, v11)
            Ok((lower, [1.0 - s, s - t, t]))
        } else {
            // (v00, v11, v01)
            Ok((lower + 1, [1.0 - t, s, t - s]))
        }
    }

    /// Nodal interpolant on this mesh of a P1 field defined on `coarse`.
    pub fn interpolate_from(&self, coarse: &Mesh, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != coarse.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: coarse.num_vertices(),
                got: values.len(),
            });
        }
        self.vertices
            .iter()
            .map(|&p| {
                let (t, w) = coarse.locate(p)?;
                let tri = coarse.triangles[t];
                Ok((0..3).map(|k| w[k] * values[tri[k]]).sum())
            })
            .collect()
    }
}
