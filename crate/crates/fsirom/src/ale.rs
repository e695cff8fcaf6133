//! Moving-mesh machinery: the fluid mesh follows the structure by extending
//! the interface displacement harmonically into the fluid domain. The scalar
//! Laplace operator is assembled once on the reference mesh and its
//! factorization is reused for every extension (both components, all steps).

use crate::fem::DofMap;
use crate::fem::element;
use crate::mesh::{EdgeTag, Mesh, MeshError, Point2};
use crate::numerics::{rcm_ordering, NumericsError, SparseLu, SparseMatrix};

#[derive(Debug)]
pub enum AleError {
    Mesh(MeshError),
    Numerics(NumericsError),
}

impl std::fmt::Display for AleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AleError::Mesh(e) => write!(f, "mesh motion: {e}"),
            AleError::Numerics(e) => write!(f, "mesh motion: {e}"),
        }
    }
}

impl std::error::Error for AleError {}

impl From<MeshError> for AleError {
    fn from(e: MeshError) -> Self {
        AleError::Mesh(e)
    }
}

impl From<NumericsError> for AleError {
    fn from(e: NumericsError) -> Self {
        AleError::Numerics(e)
    }
}

/// Where a fluid vertex gets its extension boundary value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundarySource {
    /// Interior vertex: value solved for.
    Interior,
    /// Rigid boundary (inflow, walls, outflow): zero motion.
    Zero,
    /// Interface vertex: follows the structure displacement dof pair.
    FromDisplacement(usize),
}

pub struct MeshMotion {
    n_fluid: usize,
    sources: Vec<BoundarySource>,
    lu: SparseLu,
}

impl MeshMotion {
    pub fn new(mesh: &Mesh, dm: &DofMap) -> Result<MeshMotion, AleError> {
        let inlet = mesh.tag_vertex_mask(EdgeTag::Inlet);
        let walls = mesh.tag_vertex_mask(EdgeTag::Walls);
        let outlet = mesh.tag_vertex_mask(EdgeTag::Outlet);
        let interface = mesh.tag_vertex_mask(EdgeTag::Interface);

        let mut sources = vec![BoundarySource::Interior; dm.n_fluid];
        for (f, &v) in dm.fluid_vertices.iter().enumerate() {
            if inlet[v] || walls[v] || outlet[v] {
                sources[f] = BoundarySource::Zero;
            } else if interface[v] {
                let s = dm.structure_index[v]
                    .expect("interface vertex must carry displacement dofs");
                sources[f] = BoundarySource::FromDisplacement(s);
            }
        }

        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for cell in &mesh.cells {
            if cell.region != crate::mesh::CellRegion::Fluid {
                continue;
            }
            let pos = [
                mesh.vertices[cell.v[0]],
                mesh.vertices[cell.v[1]],
                mesh.vertices[cell.v[2]],
            ];
            let (g, area) = element::p1_gradients(&pos);
            let lap = element::laplacian(&g, area);
            for i in 0..3 {
                let fi = dm.fluid_index[cell.v[i]].expect("fluid cell vertex");
                if sources[fi] != BoundarySource::Interior {
                    continue;
                }
                for j in 0..3 {
                    let fj = dm.fluid_index[cell.v[j]].expect("fluid cell vertex");
                    triplets.push((fi, fj, lap[i][j]));
                }
            }
        }
        for (f, src) in sources.iter().enumerate() {
            if *src != BoundarySource::Interior {
                triplets.push((f, f, 1.0));
            }
        }
        let matrix = SparseMatrix::from_triplets(dm.n_fluid, dm.n_fluid, &triplets);
        let order = rcm_ordering(&matrix);
        let lu = SparseLu::factor_ordered(&matrix, Some(&order))?;
        Ok(MeshMotion {
            n_fluid: dm.n_fluid,
            sources,
            lu,
        })
    }

    /// Harmonic extension of the structure displacement: returns the mesh
    /// displacement (2 per fluid vertex). Interface vertices match `d`
    /// exactly, rigid boundaries stay put.
    pub fn extend(&self, d: &[f64]) -> Result<Vec<f64>, AleError> {
        let mut boundary = vec![[0.0; 2]; self.n_fluid];
        for (f, src) in self.sources.iter().enumerate() {
            if let BoundarySource::FromDisplacement(s) = src {
                boundary[f] = [d[2 * s], d[2 * s + 1]];
            }
        }
        self.extend_with(&boundary)
    }

    /// Extension from explicit per-fluid-vertex boundary values (entries for
    /// interior vertices are ignored).
    pub fn extend_with(&self, boundary: &[[f64; 2]]) -> Result<Vec<f64>, AleError> {
        assert_eq!(boundary.len(), self.n_fluid);
        let mut out = vec![0.0; 2 * self.n_fluid];
        for comp in 0..2 {
            let mut rhs = vec![0.0; self.n_fluid];
            for (f, src) in self.sources.iter().enumerate() {
                if *src != BoundarySource::Interior {
                    rhs[f] = boundary[f][comp];
                }
            }
            let sol = self.lu.solve(&rhs)?;
            for f in 0..self.n_fluid {
                // Boundary vertices take their prescribed value bit-exactly;
                // the solve only determines the interior.
                out[2 * f + comp] = if self.sources[f] == BoundarySource::Interior {
                    sol[f]
                } else {
                    rhs[f]
                };
            }
        }
        Ok(out)
    }

    /// Mesh velocity between two displacement fields.
    pub fn mesh_velocity(m_new: &[f64], m_old: &[f64], dt: f64) -> Vec<f64> {
        m_new
            .iter()
            .zip(m_old)
            .map(|(a, b)| (a - b) / dt)
            .collect()
    }

    /// True where the fluid vertex is an extension boundary vertex.
    pub fn boundary_mask(&self) -> Vec<bool> {
        self.sources
            .iter()
            .map(|s| *s != BoundarySource::Interior)
            .collect()
    }
}

/// Displacement of every mesh vertex: fluid vertices move with the mesh
/// displacement m, remaining structure vertices with the structure
/// displacement d. Interface vertices carry identical values in both fields,
/// so the order of assignment does not matter there.
pub fn vertex_displacements(
    dm: &DofMap,
    n_vertices: usize,
    m: &[f64],
    d: &[f64],
) -> Vec<Point2> {
    let mut disp = vec![Point2::new(0.0, 0.0); n_vertices];
    for (s, &v) in dm.structure_vertices.iter().enumerate() {
        disp[v] = Point2::new(d[2 * s], d[2 * s + 1]);
    }
    for (f, &v) in dm.fluid_vertices.iter().enumerate() {
        disp[v] = Point2::new(m[2 * f], m[2 * f + 1]);
    }
    disp
}
