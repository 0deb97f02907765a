//! Global finite element spaces: degree-of-freedom numbering, reference→cell
//! maps, essential normal-trace sets, and interpolation.
//!
//! H(div) fields use the contravariant Piola map
//! `v(x) = J v̂(x̂) / det J`, `div v = div̂ v̂ / det J`; Lagrange fields use
//! the affine pull-back.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::ref_elements::{lagrange_basis, pk_dim, rt_basis, DofEntity, Family, RefBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Velocity,
    StressRow1,
    StressRow2,
    Pressure,
    DisplacementX,
    DisplacementY,
    Rotation,
}

impl Field {
    pub fn is_hdiv(self) -> bool {
        matches!(self, Field::Velocity | Field::StressRow1 | Field::StressRow2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Velocity => "velocity",
            Field::StressRow1 => "stress_row1",
            Field::StressRow2 => "stress_row2",
            Field::Pressure => "pressure",
            Field::DisplacementX => "displacement_x",
            Field::DisplacementY => "displacement_y",
            Field::Rotation => "rotation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub field: Field,
    pub basis: RefBasis,
    pub num_dofs: usize,
    local: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
}

/// Builds the standard space for `field`: `RT_k` for velocity and stress
/// rows, discontinuous `P_k` for pressure and displacement components,
/// continuous `P_k` for the rotation.
pub fn build_space(mesh: &Mesh, field: Field, k: usize) -> Result<DofMap> {
    let basis = match field {
        Field::Velocity | Field::StressRow1 | Field::StressRow2 => rt_basis(k)?,
        Field::Pressure | Field::DisplacementX | Field::DisplacementY => lagrange_basis(k, false)?,
        Field::Rotation => lagrange_basis(k, true)?,
    };
    DofMap::new(mesh, field, basis)
}

impl DofMap {
    /// Numbers the degrees of freedom of `basis` on `mesh`.
    pub fn new(mesh: &Mesh, field: Field, basis: RefBasis) -> Result<DofMap> {
        if field.is_hdiv() != (basis.family == Family::RaviartThomas) {
            return Err(Error::Unsupported(format!(
                "{:?} element for field {}",
                basis.family,
                field.name()
            )));
        }
        let k = basis.degree;
        let local = basis.dof_count();
        let nc = mesh.num_cells();
        let mut cell_dofs = Vec::with_capacity(nc * local);
        let mut cell_signs = Vec::with_capacity(nc * local);
        let num_dofs = match basis.family {
            Family::RaviartThomas => {
                let per_edge = k + 1;
                let interior = local - 3 * per_edge;
                let edge_block = mesh.num_edges() * per_edge;
                for c in 0..nc {
                    for dof in &basis.dofs {
                        match *dof {
                            DofEntity::EdgeMoment { edge, moment } => {
                                let e = mesh.cell_edges[c][edge];
                                let agree = mesh.cell_edge_signs[c][edge] > 0.0;
                                cell_dofs.push(e * per_edge + moment);
                                // reversed parametrisation flips odd Legendre moments
                                let s = if agree {
                                    1.0
                                } else if moment % 2 == 0 {
                                    -1.0
                                } else {
                                    1.0
                                };
                                cell_signs.push(s);
                            }
                            DofEntity::InteriorMoment(i) => {
                                cell_dofs.push(edge_block + c * interior + i);
                                cell_signs.push(1.0);
                            }
                            _ => unreachable!(),
                        }
                    }
                }
                edge_block + nc * interior
            }
            Family::DiscLagrange => {
                for c in 0..nc {
                    for i in 0..local {
                        cell_dofs.push(c * local + i);
                        cell_signs.push(1.0);
                    }
                }
                nc * local
            }
            Family::ContLagrange => {
                let nv = mesh.num_vertices();
                let per_edge = k.saturating_sub(1);
                let interior = local - 3 - 3 * per_edge;
                let edge_base = nv;
                let cell_base = nv + mesh.num_edges() * per_edge;
                for c in 0..nc {
                    let mut ci = 0;
                    for dof in &basis.dofs {
                        let g = match *dof {
                            DofEntity::Vertex(v) => mesh.cells[c][v],
                            DofEntity::EdgeNode { edge, index } => {
                                let e = mesh.cell_edges[c][edge];
                                let pos = if mesh.cell_edge_signs[c][edge] > 0.0 {
                                    index
                                } else {
                                    per_edge - 1 - index
                                };
                                edge_base + e * per_edge + pos
                            }
                            DofEntity::CellNode(_) => {
                                ci += 1;
                                cell_base + c * interior + ci - 1
                            }
                            _ => unreachable!(),
                        };
                        cell_dofs.push(g);
                        cell_signs.push(1.0);
                    }
                }
                cell_base + nc * interior
            }
        };
        Ok(DofMap {
            field,
            basis,
            num_dofs,
            local,
            cell_dofs,
            cell_signs,
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn local_count(&self) -> usize {
        self.local
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.local..(c + 1) * self.local]
    }

    pub fn cell_signs(&self, c: usize) -> &[f64] {
        &self.cell_signs[c * self.local..(c + 1) * self.local]
    }

    pub fn is_hdiv(&self) -> bool {
        self.basis.family == Family::RaviartThomas
    }

    /// Edge degrees of freedom on boundary edges carrying one of `tags`.
    pub fn essential_dofs(&self, mesh: &Mesh, tags: &[BoundaryTag]) -> Result<BTreeSet<usize>> {
        if !self.is_hdiv() {
            return Err(Error::InvalidArgument(format!(
                "essential normal traces requested for L²-type field {}",
                self.field.name()
            )));
        }
        let per_edge = self.degree() + 1;
        Ok(mesh
            .boundary_edges()
            .filter(|(_, t)| tags.contains(t))
            .flat_map(|(e, _)| (0..per_edge).map(move |j| e * per_edge + j))
            .collect())
    }

    /// Value of a scalar field at reference point `r` of cell `c`.
    pub fn eval_scalar(&self, coeffs: &[f64], c: usize, r: [f64; 2]) -> f64 {
        self.basis
            .eval_scalar(r)
            .iter()
            .zip(self.cell_dofs(c))
            .map(|(v, &g)| v * coeffs[g])
            .sum()
    }

    /// Value of an H(div) field at reference point `r` of cell `c`.
    pub fn eval_vector(&self, mesh: &Mesh, coeffs: &[f64], c: usize, r: [f64; 2]) -> [f64; 2] {
        let vals = self.basis.eval_vector(r);
        let piola = CellGeometry::new(mesh, c);
        let mut v = [0.0; 2];
        for ((ref_v, &g), &s) in vals.iter().zip(self.cell_dofs(c)).zip(self.cell_signs(c)) {
            let p = piola.piola(*ref_v);
            v[0] += s * coeffs[g] * p[0];
            v[1] += s * coeffs[g] * p[1];
        }
        v
    }

    /// Divergence of an H(div) field at reference point `r` of cell `c`.
    pub fn eval_div(&self, mesh: &Mesh, coeffs: &[f64], c: usize, r: [f64; 2]) -> f64 {
        let det = mesh.jacobian_det(c);
        self.basis
            .eval_div(r)
            .iter()
            .zip(self.cell_dofs(c))
            .zip(self.cell_signs(c))
            .map(|((d, &g), &s)| s * coeffs[g] * d / det)
            .sum()
    }

    /// Interpolates a scalar field into a Lagrange space by nodal evaluation.
    pub fn interpolate_scalar(&self, mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        assert!(!self.is_hdiv(), "scalar interpolation into an H(div) space");
        let mut out = vec![0.0; self.num_dofs];
        for c in 0..mesh.num_cells() {
            for (node, &g) in self.basis.nodes.iter().zip(self.cell_dofs(c)) {
                out[g] = f(mesh.to_physical(c, *node));
            }
        }
        out
    }

    /// Interpolates a vector field into an RT space by applying the edge and
    /// interior moment functionals to its Piola pull-back.
    pub fn interpolate_vector(&self, mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        assert!(self.is_hdiv(), "vector interpolation into a Lagrange space");
        let mut out = vec![0.0; self.num_dofs];
        for c in 0..mesh.num_cells() {
            let geo = CellGeometry::new(mesh, c);
            let local = self.basis.apply_rt_dofs(|r| {
                let v = f(mesh.to_physical(c, r));
                geo.inverse_piola(v)
            });
            for ((l, &g), &s) in local.iter().zip(self.cell_dofs(c)).zip(self.cell_signs(c)) {
                out[g] = s * l;
            }
        }
        out
    }
}

/// Affine map data of one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, c: usize) -> CellGeometry {
        let jac = mesh.jacobian(c);
        CellGeometry {
            jac,
            det: jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
        }
    }

    pub fn piola(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [
            (j[0][0] * v[0] + j[0][1] * v[1]) / self.det,
            (j[1][0] * v[0] + j[1][1] * v[1]) / self.det,
        ]
    }

    /// `det J · J⁻¹ v`
    pub fn inverse_piola(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [j[1][1] * v[0] - j[0][1] * v[1], -j[1][0] * v[0] + j[0][0] * v[1]]
    }

    /// Inverse-transpose Jacobian applied to a reference gradient.
    pub fn physical_grad(&self, g: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [
            (j[1][1] * g[0] - j[1][0] * g[1]) / self.det,
            (-j[0][1] * g[0] + j[0][0] * g[1]) / self.det,
        ]
    }
}

/// Ordering of the monolithic unknown vector.
pub const BLOCK_ORDER: [Field; 7] = [
    Field::StressRow1,
    Field::StressRow2,
    Field::Pressure,
    Field::Velocity,
    Field::DisplacementX,
    Field::DisplacementY,
    Field::Rotation,
];

/// Field blocks of the monolithic vector with their offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceLayout {
    pub sizes: [usize; 7],
    pub offsets: [usize; 8],
}

impl SpaceLayout {
    pub fn new(sizes: [usize; 7]) -> SpaceLayout {
        let mut offsets = [0; 8];
        for i in 0..7 {
            offsets[i + 1] = offsets[i] + sizes[i];
        }
        SpaceLayout { sizes, offsets }
    }

    pub fn total(&self) -> usize {
        self.offsets[7]
    }

    pub fn range(&self, field: Field) -> std::ops::Range<usize> {
        let i = BLOCK_ORDER.iter().position(|f| *f == field).expect("field in layout");
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// The five discrete spaces of the mixed formulation on one mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub k: usize,
    /// Shared by both stress rows.
    pub stress: DofMap,
    pub velocity: DofMap,
    pub pressure: DofMap,
    /// Shared by both displacement components.
    pub displacement: DofMap,
    pub rotation: DofMap,
}

impl Discretization {
    pub fn new(mesh: Mesh, k: usize) -> Result<Discretization> {
        Ok(Discretization {
            stress: build_space(&mesh, Field::StressRow1, k)?,
            velocity: build_space(&mesh, Field::Velocity, k)?,
            pressure: build_space(&mesh, Field::Pressure, k)?,
            displacement: build_space(&mesh, Field::DisplacementX, k)?,
            rotation: build_space(&mesh, Field::Rotation, k)?,
            mesh,
            k,
        })
    }

    /// Replaces the displacement or rotation element; used to build
    /// deliberately unstable pairings for negative-control checks.
    pub fn with_displacement(mut self, basis: RefBasis) -> Result<Discretization> {
        self.displacement = DofMap::new(&self.mesh, Field::DisplacementX, basis)?;
        Ok(self)
    }

    pub fn with_rotation(mut self, basis: RefBasis) -> Result<Discretization> {
        self.rotation = DofMap::new(&self.mesh, Field::Rotation, basis)?;
        Ok(self)
    }

    pub fn with_pressure(mut self, basis: RefBasis) -> Result<Discretization> {
        self.pressure = DofMap::new(&self.mesh, Field::Pressure, basis)?;
        Ok(self)
    }

    pub fn layout(&self) -> SpaceLayout {
        let ns = self.stress.num_dofs;
        let nu = self.displacement.num_dofs;
        SpaceLayout::new([
            ns,
            ns,
            self.pressure.num_dofs,
            self.velocity.num_dofs,
            nu,
            nu,
            self.rotation.num_dofs,
        ])
    }
}

/// Number of global dofs of the standard space, from closed-form counts.
pub fn expected_dof_count(mesh: &Mesh, field: Field, k: usize) -> usize {
    let (nv, ne, nc) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_cells());
    match field {
        Field::Velocity | Field::StressRow1 | Field::StressRow2 => ne * (k + 1) + nc * k * (k + 1),
        Field::Pressure | Field::DisplacementX | Field::DisplacementY => nc * pk_dim(k),
        Field::Rotation => nv + ne * (k - 1) + nc * (pk_dim(k) - 3 * k),
    }
}
