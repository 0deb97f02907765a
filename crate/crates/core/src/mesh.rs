//! Structured triangulations of axis-aligned rectangles.
//!
//! Every quad of an `nx × ny` grid is split along the diagonal from its
//! lower-left to its upper-right corner. Edges carry a global orientation
//! from the smaller to the larger vertex index; H(div) degrees of freedom
//! use that orientation to fix their sign.

use crate::error::{Error, Result};

/// Side of the rectangle a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
    ];
}

/// Immutable triangle mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    /// Vertex pairs `(low, high)`.
    pub edges: Vec<[usize; 2]>,
    /// Local edge `i` of a cell is opposite local vertex `i`.
    pub cell_edges: Vec<[usize; 3]>,
    /// `+1` when the counter-clockwise traversal of the local edge agrees with
    /// the global low→high orientation, `-1` otherwise.
    pub cell_edge_signs: Vec<[f64; 3]>,
    /// Cells adjacent to each edge; the second slot is `None` on the boundary.
    pub edge_cells: Vec<[Option<usize>; 2]>,
    pub boundary_tags: Vec<Option<BoundaryTag>>,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

/// Local edge `i` runs counter-clockwise from `LOCAL_EDGE_VERTICES[i][0]` to
/// `LOCAL_EDGE_VERTICES[i][1]` and is opposite local vertex `i`.
pub const LOCAL_EDGE_VERTICES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

impl Mesh {
    pub fn build_structured(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "mesh subdivisions must be positive, got {nx}×{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mesh extents must be positive, got {lx}×{ly}"
            )));
        }

        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            }
        }

        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let ll = vid(i, j);
                let lr = vid(i + 1, j);
                let ul = vid(i, j + 1);
                let ur = vid(i + 1, j + 1);
                cells.push([ll, lr, ur]);
                cells.push([ll, ur, ul]);
            }
        }

        let mut edge_index = std::collections::HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_cells: Vec<[Option<usize>; 2]> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            let mut cs = [0.0f64; 3];
            for (le, [a, b]) in LOCAL_EDGE_VERTICES.iter().enumerate() {
                let (va, vb) = (cell[*a], cell[*b]);
                let key = (va.min(vb), va.max(vb));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push([None, None]);
                    edges.len() - 1
                });
                if edge_cells[e][0].is_none() {
                    edge_cells[e][0] = Some(c);
                } else {
                    edge_cells[e][1] = Some(c);
                }
                ce[le] = e;
                cs[le] = if va < vb { 1.0 } else { -1.0 };
            }
            cell_edges.push(ce);
            cell_edge_signs.push(cs);
        }

        let tol = 1e-12 * lx.max(ly);
        let boundary_tags = edges
            .iter()
            .zip(&edge_cells)
            .map(|(&[a, b], adj)| {
                if adj[1].is_some() {
                    return None;
                }
                let (pa, pb) = (vertices[a], vertices[b]);
                let on = |f: &dyn Fn([f64; 2]) -> bool| f(pa) && f(pb);
                if on(&|p| p[0].abs() <= tol) {
                    Some(BoundaryTag::Left)
                } else if on(&|p| (p[0] - lx).abs() <= tol) {
                    Some(BoundaryTag::Right)
                } else if on(&|p| p[1].abs() <= tol) {
                    Some(BoundaryTag::Bottom)
                } else if on(&|p| (p[1] - ly).abs() <= tol) {
                    Some(BoundaryTag::Top)
                } else {
                    None
                }
            })
            .collect();

        Ok(Mesh {
            vertices,
            cells,
            edges,
            cell_edges,
            cell_edge_signs,
            edge_cells,
            boundary_tags,
            nx,
            ny,
            lx,
            ly,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_vertices(&self, c: usize) -> [[f64; 2]; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    /// Jacobian columns `[v1 - v0, v2 - v0]` of the affine reference map.
    pub fn jacobian(&self, c: usize) -> [[f64; 2]; 2] {
        let [p0, p1, p2] = self.cell_vertices(c);
        [
            [p1[0] - p0[0], p2[0] - p0[0]],
            [p1[1] - p0[1], p2[1] - p0[1]],
        ]
    }

    pub fn jacobian_det(&self, c: usize) -> f64 {
        let j = self.jacobian(c);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        0.5 * self.jacobian_det(c)
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let p = self.cell_vertices(c);
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        d(p[0], p[1]).max(d(p[1], p[2])).max(d(p[2], p[0]))
    }

    /// Global mesh size `max_T diam(T)`.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.cell_diameter(c))
            .fold(0.0, f64::max)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    /// Unit normal of an edge obtained by rotating the low→high tangent
    /// clockwise by 90°.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let len = self.edge_length(e);
        [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len]
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, BoundaryTag)> + '_ {
        self.boundary_tags
            .iter()
            .enumerate()
            .filter_map(|(e, t)| t.map(|t| (e, t)))
    }

    /// Locates a cell containing `x` (points on shared edges go to either
    /// neighbour) and returns it with the reference coordinates of `x`.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let tol = 1e-12 * self.lx.max(self.ly);
        if x[0] < -tol || x[0] > self.lx + tol || x[1] < -tol || x[1] > self.ly + tol {
            return None;
        }
        let hx = self.lx / self.nx as f64;
        let hy = self.ly / self.ny as f64;
        let i = ((x[0] / hx).floor().max(0.0) as usize).min(self.nx - 1);
        let j = ((x[1] / hy).floor().max(0.0) as usize).min(self.ny - 1);
        let q = 2 * (j * self.nx + i);
        for c in [q, q + 1] {
            let r = self.to_reference(c, x);
            if r[0] >= -1e-12 && r[1] >= -1e-12 && r[0] + r[1] <= 1.0 + 1e-12 {
                return Some((c, r));
            }
        }
        None
    }

    pub fn to_reference(&self, c: usize, x: [f64; 2]) -> [f64; 2] {
        let p0 = self.vertices[self.cells[c][0]];
        let j = self.jacobian(c);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let d = [x[0] - p0[0], x[1] - p0[1]];
        [
            (j[1][1] * d[0] - j[0][1] * d[1]) / det,
            (-j[1][0] * d[0] + j[0][0] * d[1]) / det,
        ]
    }

    pub fn to_physical(&self, c: usize, r: [f64; 2]) -> [f64; 2] {
        let p0 = self.vertices[self.cells[c][0]];
        let j = self.jacobian(c);
        [
            p0[0] + j[0][0] * r[0] + j[0][1] * r[1],
            p0[1] + j[1][0] * r[0] + j[1][1] * r[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh() {
        let m = Mesh::build_structured(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.num_cells(), 2);
        let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_cells() as i64;
        assert_eq!(euler, 1);
    }

    #[test]
    fn counts_follow_closed_formulas() {
        let m = Mesh::build_structured(16, 16, 1.0, 1.0).unwrap();
        let n = 16;
        assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
        assert_eq!(m.num_edges(), 3 * n * n + 2 * n);
        assert_eq!(m.num_cells(), 2 * n * n);
        assert_eq!((m.num_vertices(), m.num_edges(), m.num_cells()), (289, 800, 512));
    }

    #[test]
    fn mandel_grid_spacing() {
        let m = Mesh::build_structured(40, 40, 100.0, 10.0).unwrap();
        let [a, b] = m.edges[m.cell_edges[0][2]];
        let (pa, pb) = (m.vertices[a], m.vertices[b]);
        assert!(((pb[0] - pa[0]).abs() - 2.5).abs() < 1e-14);
        let v = m.vertices[41];
        assert!((v[1] - 0.25).abs() < 1e-14);
        let expected = (2.5f64 * 2.5 + 0.25 * 0.25).sqrt();
        assert!((m.mesh_size() - expected).abs() < 1e-12);
    }

    #[test]
    fn mesh_size_examples() {
        let m1 = Mesh::build_structured(1, 1, 1.0, 1.0).unwrap();
        assert!((m1.mesh_size() - 2f64.sqrt()).abs() < 1e-14);
        let m2 = Mesh::build_structured(2, 2, 1.0, 1.0).unwrap();
        assert!((m2.mesh_size() - 2f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            Mesh::build_structured(0, 3, 1.0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(Mesh::build_structured(2, 2, -1.0, 1.0).is_err());
        assert!(Mesh::build_structured(2, 2, 1.0, 0.0).is_err());
    }

    #[test]
    fn structural_invariants() {
        for (nx, ny, lx, ly) in [(3, 5, 2.0, 0.7), (7, 2, 100.0, 10.0), (4, 4, 1.0, 1.0)] {
            let m = Mesh::build_structured(nx, ny, lx, ly).unwrap();
            let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_cells() as i64;
            assert_eq!(euler, 1);
            let mut area = 0.0;
            for c in 0..m.num_cells() {
                assert!(m.jacobian_det(c) > 0.0);
                area += m.cell_area(c);
            }
            assert!((area - lx * ly).abs() <= 1e-12 * lx * ly);

            let mut incidence = vec![0usize; m.num_edges()];
            let mut signed = vec![0.0f64; m.num_edges()];
            for c in 0..m.num_cells() {
                for le in 0..3 {
                    incidence[m.cell_edges[c][le]] += 1;
                    signed[m.cell_edges[c][le]] += m.cell_edge_signs[c][le];
                }
            }
            for e in 0..m.num_edges() {
                if m.edge_cells[e][1].is_some() {
                    assert_eq!(incidence[e], 2);
                    assert_eq!(signed[e], 0.0);
                    assert!(m.boundary_tags[e].is_none());
                } else {
                    assert_eq!(incidence[e], 1);
                    assert!(m.boundary_tags[e].is_some());
                }
            }
            let boundary = m.boundary_edges().count();
            assert_eq!(boundary, 2 * (nx + ny));
            for tag in BoundaryTag::ALL {
                let n = m.boundary_edges().filter(|(_, t)| *t == tag).count();
                let expected = match tag {
                    BoundaryTag::Left | BoundaryTag::Right => ny,
                    _ => nx,
                };
                assert_eq!(n, expected, "{tag:?}");
            }
        }
    }

    #[test]
    fn refinement_halves_mesh_size() {
        let h4 = Mesh::build_structured(4, 4, 1.0, 1.0).unwrap().mesh_size();
        let h8 = Mesh::build_structured(8, 8, 1.0, 1.0).unwrap().mesh_size();
        assert!((h4 / h8 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn locate_round_trips() {
        let m = Mesh::build_structured(5, 3, 2.0, 1.0).unwrap();
        for x in [[0.0, 0.0], [2.0, 1.0], [0.33, 0.71], [1.999, 0.001], [0.4, 0.2]] {
            let (c, r) = m.locate(x).unwrap();
            let y = m.to_physical(c, r);
            assert!((y[0] - x[0]).abs() < 1e-12 && (y[1] - x[1]).abs() < 1e-12);
        }
        assert!(m.locate([2.5, 0.5]).is_none());
    }
}
