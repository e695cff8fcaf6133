//! Scalar degree-of-freedom layout over a region-tagged mesh. All fields are
//! nodal P1: velocity (2 per fluid vertex), pressure (1 per fluid vertex),
//! displacement (2 per structure vertex), mesh motion (2 per fluid vertex).
//!
//! The coupled solve works on the prefix [u | p | d]; the mesh-motion block m
//! is appended so a full state vector is [u | p | d | m].

use crate::mesh::Mesh;

#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_fluid: usize,
    pub n_structure: usize,
    /// vertex index -> fluid ordinal (dense over fluid vertices).
    pub fluid_index: Vec<Option<usize>>,
    /// vertex index -> structure ordinal.
    pub structure_index: Vec<Option<usize>>,
    /// fluid ordinal -> vertex index.
    pub fluid_vertices: Vec<usize>,
    /// structure ordinal -> vertex index.
    pub structure_vertices: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> DofMap {
        let fluid_mask = mesh.fluid_vertex_mask();
        let structure_mask = mesh.structure_vertex_mask();
        let mut fluid_index = vec![None; mesh.n_vertices()];
        let mut structure_index = vec![None; mesh.n_vertices()];
        let mut fluid_vertices = Vec::new();
        let mut structure_vertices = Vec::new();
        for v in 0..mesh.n_vertices() {
            if fluid_mask[v] {
                fluid_index[v] = Some(fluid_vertices.len());
                fluid_vertices.push(v);
            }
            if structure_mask[v] {
                structure_index[v] = Some(structure_vertices.len());
                structure_vertices.push(v);
            }
        }
        DofMap {
            n_fluid: fluid_vertices.len(),
            n_structure: structure_vertices.len(),
            fluid_index,
            structure_index,
            fluid_vertices,
            structure_vertices,
        }
    }

    pub fn n_u(&self) -> usize {
        2 * self.n_fluid
    }

    pub fn n_p(&self) -> usize {
        self.n_fluid
    }

    pub fn n_d(&self) -> usize {
        2 * self.n_structure
    }

    pub fn n_m(&self) -> usize {
        2 * self.n_fluid
    }

    /// Size of the coupled unknown (u, p, d).
    pub fn n_unknowns(&self) -> usize {
        self.n_u() + self.n_p() + self.n_d()
    }

    /// Size of a full state vector (u, p, d, m).
    pub fn n_total(&self) -> usize {
        self.n_unknowns() + self.n_m()
    }

    pub fn u_offset(&self) -> usize {
        0
    }

    pub fn p_offset(&self) -> usize {
        self.n_u()
    }

    pub fn d_offset(&self) -> usize {
        self.n_u() + self.n_p()
    }

    pub fn m_offset(&self) -> usize {
        self.n_unknowns()
    }

    /// Global index of velocity component `k` at `vertex`.
    pub fn u_dof(&self, vertex: usize, k: usize) -> usize {
        2 * self.fluid_index[vertex].expect("vertex has no velocity dof") + k
    }

    pub fn p_dof(&self, vertex: usize) -> usize {
        self.p_offset() + self.fluid_index[vertex].expect("vertex has no pressure dof")
    }

    pub fn d_dof(&self, vertex: usize, k: usize) -> usize {
        self.d_offset() + 2 * self.structure_index[vertex].expect("vertex has no displacement dof") + k
    }

    pub fn m_dof(&self, vertex: usize, k: usize) -> usize {
        self.m_offset() + 2 * self.fluid_index[vertex].expect("vertex has no mesh dof") + k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_benchmark_mesh, BenchmarkGeometry};

    #[test]
    fn blocks_partition_the_state_vector() {
        let mesh = generate_benchmark_mesh(&BenchmarkGeometry::default(), 0.05).unwrap();
        let dm = DofMap::new(&mesh);
        assert!(dm.n_fluid > dm.n_structure);
        assert_eq!(dm.p_offset(), dm.n_u());
        assert_eq!(dm.d_offset(), dm.n_u() + dm.n_p());
        assert_eq!(dm.m_offset(), dm.n_unknowns());
        assert_eq!(dm.n_total(), 5 * dm.n_fluid + 2 * dm.n_structure);

        // Interface vertices carry both velocity and displacement dofs.
        let interface = mesh.tag_vertex_mask(crate::mesh::EdgeTag::Interface);
        let mut seen = 0;
        for v in 0..mesh.n_vertices() {
            if interface[v] {
                assert!(dm.fluid_index[v].is_some());
                assert!(dm.structure_index[v].is_some());
                seen += 1;
            }
        }
        assert!(seen >= 10);

        // Every dof index lands in its own block.
        for v in 0..mesh.n_vertices() {
            if dm.fluid_index[v].is_some() {
                assert!(dm.u_dof(v, 1) < dm.p_offset());
                assert!((dm.p_offset()..dm.d_offset()).contains(&dm.p_dof(v)));
                assert!((dm.m_offset()..dm.n_total()).contains(&dm.m_dof(v, 0)));
            }
            if dm.structure_index[v].is_some() {
                assert!((dm.d_offset()..dm.m_offset()).contains(&dm.d_dof(v, 1)));
            }
        }
    }
}
