//! Monolithic assembly of the coupled fluid/structure Newton system.
//!
//! The unknown is z = (u, p, d). Fluid momentum and continuity are assembled
//! on the displaced mesh, structure momentum on the reference mesh. At
//! interface vertices the fluid momentum rows are accumulated into the
//! matching displacement rows ("row transfer"), which realizes the weak
//! balance of interface forces; the velocity rows themselves are then
//! replaced by the kinematic constraint u = (d - d_prev) / dt (full-order
//! path) or folded into the displacement columns and projected (reduced
//! path). Both paths share one sparsity pattern, built once per mesh, with
//! per-cell scatter plans and precomputed fold/constraint slots.

use super::dofmap::DofMap;
use super::element;
use super::PhysicalParams;
use crate::mesh::{CellRegion, EdgeTag, Mesh, Point2};
use crate::numerics::SparseMatrix;

/// Boundary conditions in dof terms, derived from mesh tags: no-slip and
/// inflow velocities, clamped structure support, and the interface pairing.
#[derive(Debug, Clone)]
pub struct Constraints {
    /// Velocity dofs with prescribed values (inflow and rigid walls).
    pub dirichlet_u: Vec<usize>,
    /// (velocity dof, displacement dof) at interface vertices, per component.
    pub interface_pairs: Vec<(usize, usize)>,
    /// Clamped displacement dofs (structure vertices on the rigid wall).
    pub dirichlet_d: Vec<usize>,
    pub inlet_vertices: Vec<usize>,
    pub noslip_vertices: Vec<usize>,
    pub interface_vertices: Vec<usize>,
}

impl Constraints {
    pub fn new(mesh: &Mesh, dm: &DofMap) -> Constraints {
        let inlet = mesh.tag_vertex_mask(EdgeTag::Inlet);
        let walls = mesh.tag_vertex_mask(EdgeTag::Walls);
        let interface = mesh.tag_vertex_mask(EdgeTag::Interface);
        let mut c = Constraints {
            dirichlet_u: Vec::new(),
            interface_pairs: Vec::new(),
            dirichlet_d: Vec::new(),
            inlet_vertices: Vec::new(),
            noslip_vertices: Vec::new(),
            interface_vertices: Vec::new(),
        };
        for v in 0..mesh.n_vertices() {
            if dm.fluid_index[v].is_some() {
                if inlet[v] || walls[v] {
                    c.dirichlet_u.push(dm.u_dof(v, 0));
                    c.dirichlet_u.push(dm.u_dof(v, 1));
                    if inlet[v] {
                        c.inlet_vertices.push(v);
                    } else {
                        c.noslip_vertices.push(v);
                    }
                } else if interface[v] {
                    c.interface_vertices.push(v);
                    for k in 0..2 {
                        c.interface_pairs.push((dm.u_dof(v, k), dm.d_dof(v, k)));
                    }
                }
            }
            if dm.structure_index[v].is_some() && walls[v] {
                c.dirichlet_d.push(dm.d_dof(v, 0));
                c.dirichlet_d.push(dm.d_dof(v, 1));
            }
        }
        c
    }
}

struct FluidCellPlan {
    verts: [usize; 3],
    /// (local row, global row); interface velocity rows appear twice, once
    /// for themselves and once transferred into the displacement row.
    res_targets: Vec<(u8, u32)>,
    /// (local row, local col, matrix slot). Local dofs: u at 2k+c, p at 6+k.
    jac_targets: Vec<(u8, u8, u32)>,
}

struct StructureCellPlan {
    verts: [usize; 3],
    res_targets: Vec<(u8, u32)>,
    jac_targets: Vec<(u8, u8, u32)>,
}

/// Everything that varies between time steps and Newton iterations.
pub struct StepInputs<'a> {
    /// Current iterate (u, p, d), length `n_unknowns`.
    pub z: &'a [f64],
    pub u_prev: &'a [f64],
    pub d_prev: &'a [f64],
    pub d_prev2: &'a [f64],
    /// Mesh displacement, frozen during the Newton loop.
    pub mesh_disp: &'a [f64],
    /// Mesh velocity (m - m_prev) / dt, frozen during the Newton loop.
    pub mesh_vel: &'a [f64],
    pub dt: f64,
}

pub struct SystemPlan {
    pub n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    fluid_cells: Vec<FluidCellPlan>,
    structure_cells: Vec<StructureCellPlan>,
    /// (velocity row, diagonal slot, paired displacement slot).
    kinematic_slots: Vec<(usize, usize, usize)>,
    dirichlet_u_slots: Vec<(usize, usize)>,
    dirichlet_d_slots: Vec<(usize, usize)>,
    /// Column folding u -> d at interface vertices: (source slot, target slot).
    fold_slots: Vec<(u32, u32)>,
    /// Rows dropped in the reduced path: interface velocity rows plus all
    /// Dirichlet rows.
    reduced_zero_rows: Vec<usize>,
}

impl SystemPlan {
    pub fn new(mesh: &Mesh, dm: &DofMap, constraints: &Constraints) -> SystemPlan {
        let n = dm.n_unknowns();
        // Map interface velocity dof -> displacement dof for transfer/fold.
        let mut pair_of_u: Vec<Option<usize>> = vec![None; dm.n_u()];
        for &(u, d) in &constraints.interface_pairs {
            pair_of_u[u] = Some(d);
        }

        let mut entries: Vec<(u32, u32)> = Vec::new();
        let mut fluid_cell_ids = Vec::new();
        let mut structure_cell_ids = Vec::new();
        for (ci, cell) in mesh.cells.iter().enumerate() {
            match cell.region {
                CellRegion::Fluid => {
                    fluid_cell_ids.push(ci);
                    let dofs = fluid_cell_dofs(dm, &cell.v);
                    for (li, &r) in dofs.iter().enumerate() {
                        let mut rows = vec![r];
                        if li < 6 {
                            if let Some(d) = pair_of_u[r] {
                                rows.push(d);
                            }
                        }
                        for &row in &rows {
                            for &col in &dofs {
                                entries.push((row as u32, col as u32));
                            }
                        }
                    }
                }
                CellRegion::Structure => {
                    structure_cell_ids.push(ci);
                    let dofs = structure_cell_dofs(dm, &cell.v);
                    for &r in &dofs {
                        for &c in &dofs {
                            entries.push((r as u32, c as u32));
                        }
                    }
                }
            }
        }
        for &(u, d) in &constraints.interface_pairs {
            entries.push((u as u32, d as u32));
        }
        // Close the pattern under column folding so the reduced path can move
        // every interface velocity column into its displacement column.
        let base_len = entries.len();
        for idx in 0..base_len {
            let (r, c) = entries[idx];
            if (c as usize) < dm.n_u() {
                if let Some(d) = pair_of_u[c as usize] {
                    entries.push((r, d as u32));
                }
            }
        }
        entries.sort_unstable();
        entries.dedup();

        let mut row_offsets = vec![0usize; n + 1];
        for &(r, _) in &entries {
            row_offsets[r as usize + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices: Vec<usize> = entries.iter().map(|&(_, c)| c as usize).collect();

        let slot = |r: usize, c: usize| -> usize {
            let lo = row_offsets[r];
            let hi = row_offsets[r + 1];
            lo + col_indices[lo..hi]
                .binary_search(&c)
                .expect("pattern slot must exist")
        };

        let mut fluid_cells = Vec::with_capacity(fluid_cell_ids.len());
        for ci in fluid_cell_ids {
            let verts = mesh.cells[ci].v;
            let dofs = fluid_cell_dofs(dm, &verts);
            let mut res_targets = Vec::new();
            let mut jac_targets = Vec::new();
            for (li, &r) in dofs.iter().enumerate() {
                let mut rows = vec![r];
                if li < 6 {
                    if let Some(d) = pair_of_u[r] {
                        rows.push(d);
                    }
                }
                for &row in &rows {
                    res_targets.push((li as u8, row as u32));
                    for (lj, &c) in dofs.iter().enumerate() {
                        jac_targets.push((li as u8, lj as u8, slot(row, c) as u32));
                    }
                }
            }
            fluid_cells.push(FluidCellPlan {
                verts,
                res_targets,
                jac_targets,
            });
        }

        let mut structure_cells = Vec::with_capacity(structure_cell_ids.len());
        for ci in structure_cell_ids {
            let verts = mesh.cells[ci].v;
            let dofs = structure_cell_dofs(dm, &verts);
            let mut res_targets = Vec::new();
            let mut jac_targets = Vec::new();
            for (li, &r) in dofs.iter().enumerate() {
                res_targets.push((li as u8, r as u32));
                for (lj, &c) in dofs.iter().enumerate() {
                    jac_targets.push((li as u8, lj as u8, slot(r, c) as u32));
                }
            }
            structure_cells.push(StructureCellPlan {
                verts,
                res_targets,
                jac_targets,
            });
        }

        let kinematic_slots = constraints
            .interface_pairs
            .iter()
            .map(|&(u, d)| (u, slot(u, u), slot(u, d)))
            .collect();
        let dirichlet_u_slots = constraints
            .dirichlet_u
            .iter()
            .map(|&r| (r, slot(r, r)))
            .collect();
        let dirichlet_d_slots = constraints
            .dirichlet_d
            .iter()
            .map(|&r| (r, slot(r, r)))
            .collect();

        let mut fold_slots = Vec::new();
        for r in 0..n {
            for s in row_offsets[r]..row_offsets[r + 1] {
                let c = col_indices[s];
                if c < dm.n_u() {
                    if let Some(d) = pair_of_u[c] {
                        fold_slots.push((s as u32, slot(r, d) as u32));
                    }
                }
            }
        }

        let mut reduced_zero_rows: Vec<usize> = constraints
            .interface_pairs
            .iter()
            .map(|&(u, _)| u)
            .chain(constraints.dirichlet_u.iter().copied())
            .chain(constraints.dirichlet_d.iter().copied())
            .collect();
        reduced_zero_rows.sort_unstable();
        reduced_zero_rows.dedup();

        SystemPlan {
            n,
            row_offsets,
            col_indices,
            fluid_cells,
            structure_cells,
            kinematic_slots,
            dirichlet_u_slots,
            dirichlet_d_slots,
            fold_slots,
            reduced_zero_rows,
        }
    }

    /// Fresh zero matrix with this plan's sparsity.
    pub fn new_matrix(&self) -> SparseMatrix {
        SparseMatrix {
            n_rows: self.n,
            n_cols: self.n,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: vec![0.0; self.col_indices.len()],
        }
    }

    /// Assembles the raw Jacobian and residual (no boundary or interface row
    /// replacement yet, but interface velocity rows are already accumulated
    /// into their displacement rows).
    pub fn assemble(
        &self,
        mesh: &Mesh,
        dm: &DofMap,
        params: &PhysicalParams,
        inp: &StepInputs,
        mat: &mut SparseMatrix,
        residual: &mut [f64],
    ) {
        debug_assert_eq!(mat.values.len(), self.col_indices.len());
        debug_assert_eq!(residual.len(), self.n);
        debug_assert_eq!(inp.z.len(), self.n);
        mat.values.iter_mut().for_each(|v| *v = 0.0);
        residual.iter_mut().for_each(|v| *v = 0.0);

        let p_off = dm.p_offset();
        let d_off = dm.d_offset();
        let rho_nu = params.rho_f * params.nu_f;

        for cell in &self.fluid_cells {
            // Gather local data on the displaced geometry.
            let mut pos = [Point2::new(0.0, 0.0); 3];
            let mut u_loc = [[0.0; 2]; 3];
            let mut up_loc = [[0.0; 2]; 3];
            let mut w_loc = [[0.0; 2]; 3];
            let mut p_loc = [0.0; 3];
            for k in 0..3 {
                let v = cell.verts[k];
                let fi = dm.fluid_index[v].expect("fluid cell vertex");
                pos[k] = Point2::new(
                    mesh.vertices[v].x + inp.mesh_disp[2 * fi],
                    mesh.vertices[v].y + inp.mesh_disp[2 * fi + 1],
                );
                for c in 0..2 {
                    u_loc[k][c] = inp.z[2 * fi + c];
                    up_loc[k][c] = inp.u_prev[2 * fi + c];
                    w_loc[k][c] = u_loc[k][c] - inp.mesh_vel[2 * fi + c];
                }
                p_loc[k] = inp.z[p_off + fi];
            }
            let (g, area) = element::p1_gradients(&pos);
            let h = element::longest_edge(&pos);
            let stab_coef = params.stab_delta * h * h / rho_nu;

            let mass = element::vector_mass(area, params.rho_f / inp.dt);
            let visc = element::viscous(&g, area, rho_nu);
            let conv = element::convection(&g, area, &w_loc, params.rho_f);
            let grad_u = element::velocity_gradient(&g, &u_loc);
            let newt = element::newton_convection(area, &grad_u, params.rho_f);
            let div = element::divergence(&g, area);
            let lap = element::laplacian(&g, area);

            // Local 9x9 Jacobian and residual; locals 0..6 are velocity,
            // 6..9 pressure.
            let mut jl = [[0.0; 9]; 9];
            let mut rl = [0.0; 9];
            for i in 0..6 {
                for j in 0..6 {
                    jl[i][j] = mass[i][j] + visc[i][j] + conv[i][j] + newt[i][j];
                }
            }
            for i in 0..3 {
                for k in 0..2 {
                    // - integral p div(phi_i e_k): constant in the p index.
                    let coef = -(area / 3.0) * g[i][k];
                    for j in 0..3 {
                        jl[2 * i + k][6 + j] = coef;
                    }
                }
            }
            for i in 0..3 {
                for j in 0..6 {
                    jl[6 + i][j] = div[i][j];
                }
                for j in 0..3 {
                    jl[6 + i][6 + j] = stab_coef * lap[i][j];
                }
            }

            let u_flat = |k: usize| u_loc[k / 2][k % 2];
            let up_flat = |k: usize| up_loc[k / 2][k % 2];
            for i in 0..6 {
                let mut r = 0.0;
                for j in 0..6 {
                    r += mass[i][j] * (u_flat(j) - up_flat(j))
                        + (visc[i][j] + conv[i][j]) * u_flat(j);
                }
                for j in 0..3 {
                    r += jl[i][6 + j] * p_loc[j];
                }
                rl[i] = r;
            }
            for i in 0..3 {
                let mut r = 0.0;
                for j in 0..6 {
                    r += div[i][j] * u_flat(j);
                }
                for j in 0..3 {
                    r += stab_coef * lap[i][j] * p_loc[j];
                }
                rl[6 + i] = r;
            }

            for &(li, row) in &cell.res_targets {
                residual[row as usize] += rl[li as usize];
            }
            for &(li, lj, s) in &cell.jac_targets {
                mat.values[s as usize] += jl[li as usize][lj as usize];
            }
        }

        for cell in &self.structure_cells {
            let mut pos = [Point2::new(0.0, 0.0); 3];
            let mut d_loc = [0.0; 6];
            let mut dp = [0.0; 6];
            let mut dp2 = [0.0; 6];
            for k in 0..3 {
                let v = cell.verts[k];
                pos[k] = mesh.vertices[v];
                let si = dm.structure_index[v].expect("structure cell vertex");
                for c in 0..2 {
                    d_loc[2 * k + c] = inp.z[d_off + 2 * si + c];
                    dp[2 * k + c] = inp.d_prev[2 * si + c];
                    dp2[2 * k + c] = inp.d_prev2[2 * si + c];
                }
            }
            let (g, area) = element::p1_gradients(&pos);
            let mass = element::vector_mass(area, params.rho_s / (inp.dt * inp.dt));
            let stiff = element::elasticity(&g, area, params.mu_s, params.lambda_s);

            let mut rl = [0.0; 6];
            let mut jl = [[0.0; 6]; 6];
            for i in 0..6 {
                for j in 0..6 {
                    jl[i][j] = mass[i][j] + stiff[i][j];
                    rl[i] += mass[i][j] * (d_loc[j] - 2.0 * dp[j] + dp2[j]) + stiff[i][j] * d_loc[j];
                }
            }
            for &(li, row) in &cell.res_targets {
                residual[row as usize] += rl[li as usize];
            }
            for &(li, lj, s) in &cell.jac_targets {
                mat.values[s as usize] += jl[li as usize][lj as usize];
            }
        }
    }

    fn zero_row(&self, r: usize, mat: &mut SparseMatrix) {
        for s in self.row_offsets[r]..self.row_offsets[r + 1] {
            mat.values[s] = 0.0;
        }
    }

    /// Full-order constraint application: Dirichlet rows become identity
    /// rows, interface velocity rows become the discrete kinematic coupling
    /// du - dd / dt = 0. All right-hand sides are zero because the base
    /// state is kept exactly constraint-consistent between iterations.
    pub fn apply_full_order_constraints(
        &self,
        dt: f64,
        mat: &mut SparseMatrix,
        residual: &mut [f64],
    ) {
        for &(r, diag) in self.dirichlet_u_slots.iter().chain(&self.dirichlet_d_slots) {
            self.zero_row(r, mat);
            mat.values[diag] = 1.0;
            residual[r] = 0.0;
        }
        for &(r, diag, pair) in &self.kinematic_slots {
            self.zero_row(r, mat);
            mat.values[diag] = 1.0;
            mat.values[pair] = -1.0 / dt;
            residual[r] = 0.0;
        }
    }

    /// Reduced-path elimination: interface velocity columns are folded into
    /// the displacement columns (chain rule for u = (d - d_prev) / dt), then
    /// interface velocity rows and all Dirichlet rows are dropped. The
    /// resulting system is ready for subspace projection.
    pub fn apply_reduced_elimination(&self, dt: f64, mat: &mut SparseMatrix, residual: &mut [f64]) {
        for &(src, dst) in &self.fold_slots {
            mat.values[dst as usize] += mat.values[src as usize] / dt;
            mat.values[src as usize] = 0.0;
        }
        for &r in &self.reduced_zero_rows {
            self.zero_row(r, mat);
            residual[r] = 0.0;
        }
    }
}

fn fluid_cell_dofs(dm: &DofMap, verts: &[usize; 3]) -> [usize; 9] {
    let mut dofs = [0usize; 9];
    for k in 0..3 {
        for c in 0..2 {
            dofs[2 * k + c] = dm.u_dof(verts[k], c);
        }
        dofs[6 + k] = dm.p_dof(verts[k]);
    }
    dofs
}

fn structure_cell_dofs(dm: &DofMap, verts: &[usize; 3]) -> [usize; 6] {
    let mut dofs = [0usize; 6];
    for k in 0..3 {
        for c in 0..2 {
            dofs[2 * k + c] = dm.d_dof(verts[k], c);
        }
    }
    dofs
}
