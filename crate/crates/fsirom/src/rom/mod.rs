//! Online reduced-order integration. Each time step assembles the same
//! full-order Newton system as the monolithic solver, eliminates the
//! constrained rows, projects onto the active segment's bases, and solves a
//! small dense system for the reduced increments. Mesh displacement is
//! carried at full order; the time history lives in reduced coordinates and
//! is re-expressed whenever the sweep crosses a segment boundary.

use std::time::Instant;

use crate::ale::{self, AleError, MeshMotion};
use crate::fem::{PhysicalParams, StepInputs};
use crate::fom::{divergence_norm, FsiSolver, Trajectory};
use crate::mesh::{Mesh, MeshError};
use crate::numerics::{dense_solve, DenseMatrix, NumericsError, SparseMatrix};
use crate::pod::{PodModel, SegmentBases};

#[derive(Debug)]
pub enum RomError {
    Ale(AleError),
    Numerics(NumericsError),
    Mesh(MeshError),
    NewtonStalled { time: f64, residual: f64 },
    MeshLoopStalled { time: f64 },
    BadSetup(String),
}

impl std::fmt::Display for RomError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RomError::Ale(e) => write!(f, "{e}"),
            RomError::Numerics(e) => write!(f, "reduced solve: {e}"),
            RomError::Mesh(e) => write!(f, "mesh: {e}"),
            RomError::NewtonStalled { time, residual } => write!(
                f,
                "reduced Newton stalled at t = {time} with residual {residual:.3e}"
            ),
            RomError::MeshLoopStalled { time } => {
                write!(f, "mesh fixed-point loop stalled at t = {time}")
            }
            RomError::BadSetup(m) => write!(f, "bad setup: {m}"),
        }
    }
}

impl std::error::Error for RomError {}

impl From<AleError> for RomError {
    fn from(e: AleError) -> Self {
        RomError::Ale(e)
    }
}

impl From<NumericsError> for RomError {
    fn from(e: NumericsError) -> Self {
        RomError::Numerics(e)
    }
}

impl From<MeshError> for RomError {
    fn from(e: MeshError) -> Self {
        RomError::Mesh(e)
    }
}

/// Escape hatches used by the robustness experiments: a production run keeps
/// both off and fails honestly instead.
#[derive(Debug, Clone, Copy, Default)]
pub struct RomOptions {
    /// Keep integrating across an inverted-cell mesh state.
    pub continue_after_tangle: bool,
    /// Accept the Newton iterate when the iteration cap is hit.
    pub accept_unconverged_newton: bool,
}

/// Online integration controls.
#[derive(Debug, Clone)]
pub struct RomConfig {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub mesh_loop_tol: f64,
    pub mesh_loop_max: usize,
    pub snapshot_every: usize,
    pub options: RomOptions,
}

impl Default for RomConfig {
    fn default() -> RomConfig {
        RomConfig {
            dt: 0.01,
            newton_tol: 1e-8,
            newton_max: 20,
            mesh_loop_tol: 1e-8,
            mesh_loop_max: 15,
            snapshot_every: 1,
            options: RomOptions::default(),
        }
    }
}

/// Reduced coordinates plus the full-order mesh displacement. The history
/// levels live in the coordinates of the active segment.
pub struct RomState {
    pub segment: usize,
    /// Current coords, blocked [a_u | a_p | a_d].
    pub a: Vec<f64>,
    pub a_u_prev: Vec<f64>,
    pub a_d_prev: Vec<f64>,
    pub a_d_prev2: Vec<f64>,
    pub m: Vec<f64>,
}

/// One segment's bases expanded to full-length columns of the block-diagonal
/// projection.
struct SegmentFrame<'a> {
    bases: &'a SegmentBases,
    /// Full-length orthonormal columns, u modes first, then p, then d.
    phi: Vec<Vec<f64>>,
    n_modes: usize,
    u_modes: usize,
    p_modes: usize,
}

impl<'a> SegmentFrame<'a> {
    fn new(solver: &FsiSolver, bases: &'a SegmentBases) -> SegmentFrame<'a> {
        let dm = &solver.dm;
        let n = dm.n_unknowns();
        let mut phi = Vec::with_capacity(bases.u.count() + bases.p.count() + bases.d.count());
        for v in &bases.u.vectors {
            let mut col = vec![0.0; n];
            col[..dm.n_u()].copy_from_slice(v);
            phi.push(col);
        }
        for v in &bases.p.vectors {
            let mut col = vec![0.0; n];
            col[dm.p_offset()..dm.p_offset() + dm.n_p()].copy_from_slice(v);
            phi.push(col);
        }
        for v in &bases.d.vectors {
            let mut col = vec![0.0; n];
            col[dm.d_offset()..dm.d_offset() + dm.n_d()].copy_from_slice(v);
            phi.push(col);
        }
        SegmentFrame {
            bases,
            n_modes: phi.len(),
            u_modes: bases.u.count(),
            p_modes: bases.p.count(),
            phi,
        }
    }

    fn a_u<'b>(&self, a: &'b [f64]) -> &'b [f64] {
        &a[..self.u_modes]
    }

    fn a_p<'b>(&self, a: &'b [f64]) -> &'b [f64] {
        &a[self.u_modes..self.u_modes + self.p_modes]
    }

    fn a_d<'b>(&self, a: &'b [f64]) -> &'b [f64] {
        &a[self.u_modes + self.p_modes..]
    }

    /// Reduced coordinates of full-order blocks.
    fn reduce_blocks(&self, u: &[f64], p: &[f64], d: &[f64]) -> Vec<f64> {
        let mut a = Vec::with_capacity(self.n_modes);
        a.extend(self.bases.u.reduce(u));
        a.extend(self.bases.p.reduce(p));
        a.extend(self.bases.d.reduce(d));
        a
    }

    /// Expands reduced coordinates to the full unknown vector and overwrites
    /// the interface velocities with the discrete kinematic identity, so the
    /// expanded state is exactly constraint-consistent.
    fn expand_state(
        &self,
        solver: &FsiSolver,
        a: &[f64],
        d_prev_full: &[f64],
        dt: f64,
    ) -> Vec<f64> {
        let dm = &solver.dm;
        let mut z = vec![0.0; dm.n_unknowns()];
        z[..dm.n_u()].copy_from_slice(&self.bases.u.expand(self.a_u(a)));
        z[dm.p_offset()..dm.p_offset() + dm.n_p()]
            .copy_from_slice(&self.bases.p.expand(self.a_p(a)));
        let d_off = dm.d_offset();
        z[d_off..d_off + dm.n_d()].copy_from_slice(&self.bases.d.expand(self.a_d(a)));
        for &(ud, dd) in &solver.constraints.interface_pairs {
            z[ud] = (z[dd] - d_prev_full[dd - d_off]) / dt;
        }
        z
    }
}

/// Projects the eliminated full-order system onto the frame columns.
fn project_system(
    phi: &[Vec<f64>],
    mat: &SparseMatrix,
    residual: &[f64],
    scratch: &mut Vec<f64>,
) -> (DenseMatrix, Vec<f64>) {
    let n_red = phi.len();
    let mut jr = DenseMatrix::zeros(n_red, n_red);
    let mut rr = vec![0.0; n_red];
    scratch.resize(mat.n_rows, 0.0);
    for k in 0..n_red {
        mat.matvec_into(&phi[k], scratch);
        for i in 0..n_red {
            let dot: f64 = phi[i].iter().zip(scratch.iter()).map(|(a, b)| a * b).sum();
            jr.set(i, k, dot);
        }
    }
    for i in 0..n_red {
        rr[i] = phi[i].iter().zip(residual).map(|(a, b)| a * b).sum();
    }
    (jr, rr)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The segment whose basis integrates the step ending at `t_new`: segment
/// endpoints belong to the segment they close, matching the shared endpoint
/// column of the offline phase.
fn segment_for_step(model: &PodModel, t_new: f64) -> Option<usize> {
    let s = &model.schedule;
    let g = ((t_new - s.t_start) / s.width - 1e-9).floor();
    if g < 0.0 {
        if t_new > s.t_start + 1e-9 {
            Some(0)
        } else {
            None
        }
    } else if (g as usize) < s.n_segments {
        Some(g as usize)
    } else {
        None
    }
}

/// Per-step record of the online sweep.
#[derive(Debug, Clone)]
pub struct RomStepDiagnostics {
    pub time: f64,
    pub segment: usize,
    pub newton_iters: usize,
    pub mesh_loops: usize,
    pub residual: f64,
    /// Wall time of the dense reduced solves only.
    pub solve_seconds: f64,
    pub divergence_norm: f64,
    pub converged: bool,
    pub tangled: bool,
}

pub struct RomRun {
    pub trajectory: Trajectory,
    pub steps: Vec<RomStepDiagnostics>,
    /// Accumulated dense-solve time, the online counterpart of the
    /// full-order factor-and-solve time.
    pub solve_seconds: f64,
    pub wall_seconds: f64,
    pub unconverged_steps: usize,
    pub tangled_steps: usize,
}

pub struct RomDriver<'m> {
    solver: FsiSolver,
    model: &'m PodModel,
}

impl<'m> RomDriver<'m> {
    pub fn new(mesh: &Mesh, params: &PhysicalParams, model: &'m PodModel) -> Result<RomDriver<'m>, RomError> {
        let solver = FsiSolver::new(mesh, params)
            .map_err(|e| RomError::BadSetup(format!("solver setup: {e}")))?;
        let dm = &solver.dm;
        if model.n_u != dm.n_u()
            || model.n_p != dm.n_p()
            || model.n_d != dm.n_d()
            || model.n_m != dm.n_m()
        {
            return Err(RomError::BadSetup(
                "reduced model dimensions do not match the mesh".into(),
            ));
        }
        Ok(RomDriver { solver, model })
    }

    pub fn solver(&self) -> &FsiSolver {
        &self.solver
    }

    /// Initial reduced state from a full-order state vector [u|p|d|m] taken
    /// at the window start. Both displacement history levels start at the
    /// projection of the current displacement, mirroring the quiescent start
    /// of the full-order scheme.
    pub fn init_state(&self, full_state: &[f64]) -> Result<RomState, RomError> {
        let dm = &self.solver.dm;
        if full_state.len() != dm.n_total() {
            return Err(RomError::BadSetup(format!(
                "initial state has length {}, expected {}",
                full_state.len(),
                dm.n_total()
            )));
        }
        let frame = SegmentFrame::new(&self.solver, &self.model.segments[0]);
        let u = &full_state[..dm.n_u()];
        let p = &full_state[dm.p_offset()..dm.p_offset() + dm.n_p()];
        let d = &full_state[dm.d_offset()..dm.d_offset() + dm.n_d()];
        let m = &full_state[dm.m_offset()..dm.m_offset() + dm.n_m()];
        let a = frame.reduce_blocks(u, p, d);
        let a_u_prev = frame.bases.u.reduce(u).to_vec();
        let a_d = frame.bases.d.reduce(d);
        Ok(RomState {
            segment: 0,
            a,
            a_u_prev,
            a_d_prev: a_d.clone(),
            a_d_prev2: a_d,
            m: m.to_vec(),
        })
    }

    /// Initial reduced state for a restart that continues an existing
    /// full-order trajectory: the older displacement history level comes from
    /// the state one step BEFORE the window start instead of being cloned.
    pub fn init_state_with_previous(
        &self,
        full_state: &[f64],
        d_before: &[f64],
    ) -> Result<RomState, RomError> {
        let dm = &self.solver.dm;
        if d_before.len() != dm.n_d() {
            return Err(RomError::BadSetup(format!(
                "previous displacement has length {}, expected {}",
                d_before.len(),
                dm.n_d()
            )));
        }
        let mut st = self.init_state(full_state)?;
        let frame = SegmentFrame::new(&self.solver, &self.model.segments[0]);
        st.a_d_prev2 = frame.bases.d.reduce(d_before);
        Ok(st)
    }

    /// Re-expresses the state and its history in the bases of `new_segment`.
    fn handoff(&self, st: &mut RomState, new_segment: usize) {
        let old = SegmentFrame::new(&self.solver, &self.model.segments[st.segment]);
        let new = SegmentFrame::new(&self.solver, &self.model.segments[new_segment]);
        let u = old.bases.u.expand(old.a_u(&st.a));
        let p = old.bases.p.expand(old.a_p(&st.a));
        let d = old.bases.d.expand(old.a_d(&st.a));
        let u_prev = old.bases.u.expand(&st.a_u_prev);
        let d_prev = old.bases.d.expand(&st.a_d_prev);
        let d_prev2 = old.bases.d.expand(&st.a_d_prev2);
        st.a = new.reduce_blocks(&u, &p, &d);
        st.a_u_prev = new.bases.u.reduce(&u_prev);
        st.a_d_prev = new.bases.d.reduce(&d_prev);
        st.a_d_prev2 = new.bases.d.reduce(&d_prev2);
        st.segment = new_segment;
    }

    /// Advances the reduced state to `t_new` within its current segment.
    fn step(
        &self,
        mesh: &Mesh,
        st: &mut RomState,
        t_new: f64,
        cfg: &RomConfig,
    ) -> Result<RomStepDiagnostics, RomError> {
        let solver = &self.solver;
        let dm = &solver.dm;
        let frame = SegmentFrame::new(solver, &self.model.segments[st.segment]);

        // Shift the reduced history.
        st.a_u_prev.clear();
        st.a_u_prev.extend_from_slice(frame.a_u(&st.a));
        st.a_d_prev2 = std::mem::take(&mut st.a_d_prev);
        st.a_d_prev = frame.a_d(&st.a).to_vec();
        let m_prev = st.m.clone();

        // Predictor: linear extrapolation of the displacement coords.
        {
            let off = frame.u_modes + frame.p_modes;
            for i in 0..st.a_d_prev.len() {
                st.a[off + i] = 2.0 * st.a_d_prev[i] - st.a_d_prev2[i];
            }
        }

        let u_prev_full = frame.bases.u.expand(&st.a_u_prev);
        let d_prev_full = frame.bases.d.expand(&st.a_d_prev);
        let d_prev2_full = frame.bases.d.expand(&st.a_d_prev2);

        let mut z = frame.expand_state(solver, &st.a, &d_prev_full, cfg.dt);
        let d_off = dm.d_offset();
        let mut d_iter: Vec<f64> = z[d_off..d_off + dm.n_d()].to_vec();

        let mut mat = solver.plan.new_matrix();
        let mut res = vec![0.0; solver.plan.n];
        let mut scratch = Vec::new();
        let mut total_newton = 0;
        let mut mesh_loops = 0;
        let mut solve_seconds = 0.0;
        let mut final_res;
        let mut converged_flag = true;

        loop {
            mesh_loops += 1;
            let m = solver.motion.extend(&d_iter)?;
            let mesh_vel = MeshMotion::mesh_velocity(&m, &m_prev, cfg.dt);

            let mut r0 = f64::NAN;
            let mut it = 0;
            loop {
                solver.plan.assemble(
                    mesh,
                    dm,
                    &solver.params,
                    &StepInputs {
                        z: &z,
                        u_prev: &u_prev_full,
                        d_prev: &d_prev_full,
                        d_prev2: &d_prev2_full,
                        mesh_disp: &m,
                        mesh_vel: &mesh_vel,
                        dt: cfg.dt,
                    },
                    &mut mat,
                    &mut res,
                );
                solver.plan.apply_reduced_elimination(cfg.dt, &mut mat, &mut res);
                let (jr, rr) = project_system(&frame.phi, &mat, &res, &mut scratch);
                let rnorm = norm2(&rr);
                final_res = rnorm;
                if r0.is_nan() {
                    r0 = rnorm;
                }
                if rnorm <= cfg.newton_tol * (1.0 + r0) {
                    break;
                }
                if it >= cfg.newton_max {
                    if cfg.options.accept_unconverged_newton {
                        converged_flag = false;
                        break;
                    }
                    return Err(RomError::NewtonStalled {
                        time: t_new,
                        residual: rnorm,
                    });
                }
                let clock = Instant::now();
                let neg: Vec<f64> = rr.iter().map(|v| -v).collect();
                let delta = dense_solve(&jr, &neg)?;
                solve_seconds += clock.elapsed().as_secs_f64();
                for (ai, di) in st.a.iter_mut().zip(&delta) {
                    *ai += di;
                }
                z = frame.expand_state(solver, &st.a, &d_prev_full, cfg.dt);
                it += 1;
                total_newton += 1;
            }

            let mut delta_iface = 0.0f64;
            for (a, b) in z[d_off..d_off + dm.n_d()].iter().zip(&d_iter) {
                delta_iface = delta_iface.max((a - b).abs());
            }
            d_iter.copy_from_slice(&z[d_off..d_off + dm.n_d()]);
            if delta_iface <= cfg.mesh_loop_tol || !converged_flag {
                break;
            }
            if mesh_loops >= cfg.mesh_loop_max {
                return Err(RomError::MeshLoopStalled { time: t_new });
            }
        }

        st.m = solver.motion.extend(&d_iter)?;
        let mut tangled = false;
        let disp = ale::vertex_displacements(dm, mesh.n_vertices(), &st.m, &d_iter);
        match mesh.displaced(&disp) {
            Ok(_) => {}
            Err(MeshError::TangledMesh { .. }) if cfg.options.continue_after_tangle => {
                tangled = true;
            }
            Err(e) => return Err(e.into()),
        }

        Ok(RomStepDiagnostics {
            time: t_new,
            segment: st.segment,
            newton_iters: total_newton,
            mesh_loops,
            residual: final_res,
            solve_seconds,
            divergence_norm: divergence_norm(mesh, dm, &z[..dm.n_u()], &st.m),
            converged: converged_flag,
            tangled,
        })
    }

    /// Runs the online sweep across the whole segmented window, starting from
    /// the given full-order state at the window start. `d_before`, when
    /// available at the right lag, supplies the older displacement history
    /// level; otherwise both levels start at the window-start displacement.
    pub fn run(
        &self,
        mesh: &Mesh,
        init_full_state: &[f64],
        d_before: Option<&[f64]>,
        cfg: &RomConfig,
        tracked_vertex: Option<usize>,
    ) -> Result<RomRun, RomError> {
        let clock = Instant::now();
        let schedule = &self.model.schedule;
        let t_start = schedule.t_start;
        let t_end = t_start + schedule.n_segments as f64 * schedule.width;
        let n_steps_f = ((t_end - t_start) / cfg.dt).round();
        if n_steps_f < 1.0 || (n_steps_f * cfg.dt - (t_end - t_start)).abs() > 1e-6 {
            return Err(RomError::BadSetup(format!(
                "dt = {} does not divide the window [{t_start}, {t_end}]",
                cfg.dt
            )));
        }
        let n_steps = n_steps_f as usize;
        if cfg.snapshot_every == 0 {
            return Err(RomError::BadSetup("snapshot_every must be >= 1".into()));
        }
        let dm = &self.solver.dm;
        let tracked_ordinal = match tracked_vertex {
            Some(v) => Some(dm.structure_index[v].ok_or_else(|| {
                RomError::BadSetup(format!("tracked vertex {v} has no displacement dofs"))
            })?),
            None => None,
        };

        let mut st = match d_before {
            Some(d) => self.init_state_with_previous(init_full_state, d)?,
            None => self.init_state(init_full_state)?,
        };
        let mut times = vec![t_start];
        let mut states = vec![init_full_state.to_vec()];
        let mut tracked = Vec::new();
        let mut steps = Vec::with_capacity(n_steps);
        let mut solve_seconds = 0.0;
        let mut unconverged_steps = 0;
        let mut tangled_steps = 0;

        if let Some(s) = tracked_ordinal {
            let d_off = dm.d_offset();
            tracked.push([
                t_start,
                init_full_state[d_off + 2 * s],
                init_full_state[d_off + 2 * s + 1],
            ]);
        }

        for k in 1..=n_steps {
            let t = t_start + k as f64 * cfg.dt;
            let g = segment_for_step(self.model, t).ok_or_else(|| {
                RomError::BadSetup(format!("step target t = {t} outside the reduced window"))
            })?;
            if g != st.segment {
                self.handoff(&mut st, g);
            }
            let diag = self.step(mesh, &mut st, t, cfg)?;
            solve_seconds += diag.solve_seconds;
            if !diag.converged {
                unconverged_steps += 1;
            }
            if diag.tangled {
                tangled_steps += 1;
            }
            if k % cfg.snapshot_every == 0 {
                let frame = SegmentFrame::new(&self.solver, &self.model.segments[st.segment]);
                let d_prev_full = frame.bases.d.expand(&st.a_d_prev);
                let z = frame.expand_state(&self.solver, &st.a, &d_prev_full, cfg.dt);
                let mut full = Vec::with_capacity(dm.n_total());
                full.extend_from_slice(&z);
                full.extend_from_slice(&st.m);
                times.push(t);
                states.push(full);
            }
            if let Some(s) = tracked_ordinal {
                let frame = SegmentFrame::new(&self.solver, &self.model.segments[st.segment]);
                let d = frame.bases.d.expand(frame.a_d(&st.a));
                tracked.push([t, d[2 * s], d[2 * s + 1]]);
            }
            steps.push(diag);
        }

        Ok(RomRun {
            trajectory: Trajectory {
                n_u: dm.n_u(),
                n_p: dm.n_p(),
                n_d: dm.n_d(),
                n_m: dm.n_m(),
                dt: cfg.dt * cfg.snapshot_every as f64,
                times,
                states,
                tracked,
            },
            steps,
            solve_seconds,
            wall_seconds: clock.elapsed().as_secs_f64(),
            unconverged_steps,
            tangled_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{run_fom, FomConfig};
    use crate::mesh::{generate_benchmark_mesh, BenchmarkGeometry};
    use crate::pod::{make_schedule, offline_phase, BasisSelection, SelectionRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coarse_mesh() -> Mesh {
        generate_benchmark_mesh(&BenchmarkGeometry::default(), 0.05).unwrap()
    }

    #[test]
    fn segment_for_step_uses_closing_segment_at_boundaries() {
        let traj_dims = (4, 2, 2, 4);
        let schedule = make_schedule(2.0, 2.4, 0.1, 0.02).unwrap();
        let model = PodModel {
            schedule,
            n_u: traj_dims.0,
            n_p: traj_dims.1,
            n_d: traj_dims.2,
            n_m: traj_dims.3,
            segments: Vec::new(),
        };
        assert_eq!(segment_for_step(&model, 2.02), Some(0));
        // A step that lands exactly on a boundary belongs to the segment it closes.
        assert_eq!(segment_for_step(&model, 2.1), Some(0));
        assert_eq!(segment_for_step(&model, 2.12), Some(1));
        assert_eq!(segment_for_step(&model, 2.4), Some(3));
        assert_eq!(segment_for_step(&model, 2.0), None);
        assert_eq!(segment_for_step(&model, 2.5), None);
    }

    /// With a quiescent start and no inflow in the basis, the reduced sweep
    /// must stay identically zero.
    #[test]
    fn zero_initial_state_stays_zero() {
        let mesh = coarse_mesh();
        let solver = FsiSolver::new(&mesh, &PhysicalParams::reference()).unwrap();
        let dm = &solver.dm;
        let mut rng = ChaCha8Rng::seed_from_u64(77);

        // Synthetic orthonormal bases: random directions, orthonormalized by
        // the offline helper through a throwaway POD of random snapshots.
        let mut make_cols = |len: usize, n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..len).map(|_| rng.gen_range(-1.0_f64..1.0)).collect())
                .collect()
        };
        let u_cols = make_cols(dm.n_u(), 4);
        let p_cols = make_cols(dm.n_p(), 3);
        let d_cols = make_cols(dm.n_d(), 3);
        let seg = SegmentBases {
            u: crate::pod::pod_basis(&u_cols, SelectionRule::Counts(3)).unwrap(),
            p: crate::pod::pod_basis(&p_cols, SelectionRule::Counts(2)).unwrap(),
            d: crate::pod::pod_basis(&d_cols, SelectionRule::Counts(2)).unwrap(),
        };
        let model = PodModel {
            schedule: make_schedule(0.0, 0.1, 0.1, 0.02).unwrap(),
            n_u: dm.n_u(),
            n_p: dm.n_p(),
            n_d: dm.n_d(),
            n_m: dm.n_m(),
            segments: vec![seg],
        };
        let driver = RomDriver::new(&mesh, &PhysicalParams::reference(), &model).unwrap();
        let init = vec![0.0; dm.n_total()];
        let run = driver
            .run(&mesh, &init, None, &RomConfig { dt: 0.02, ..RomConfig::default() }, None)
            .unwrap();
        for s in &run.trajectory.states {
            assert!(s.iter().all(|&v| v == 0.0));
        }
        for d in &run.steps {
            assert_eq!(d.newton_iters, 0);
        }
    }

    /// Full-rank single-segment bases contain the recorded states exactly,
    /// so an online sweep restarted mid-trajectory with true history must
    /// replay the full-order run. The window sits late in the evolution,
    /// where the flow has settled and the snapshot spectra are resolved down
    /// to noise level. Transient windows are not an oracle: their truncated
    /// spectral tails leave a residual that the flattest direction of the
    /// reduced system (a pressure-versus-displacement force balance pinned
    /// only by the pressure stabilization) amplifies to around 1e-3, well
    /// inside the production error budget but far above round-off. The
    /// inflow enters only through the snapshots, so the window must also
    /// start from a nonzero state.
    #[test]
    fn full_rank_replay_matches_full_order_run() {
        let mesh = coarse_mesh();
        let params = PhysicalParams::reference();
        let geom = BenchmarkGeometry::default();
        let tip = mesh.find_vertex_at(geom.point_a, 1e-9).unwrap();
        let (t0, t1) = (12.0, 12.1);
        let cfg = FomConfig {
            dt: 0.01,
            t_end: t1,
            ..FomConfig::default()
        };
        let fom = run_fom(&mesh, &params, &cfg, Some(tip)).unwrap();

        let schedule = make_schedule(t0, t1, 0.1, 0.01).unwrap();
        let sel = BasisSelection {
            u: SelectionRule::FullRank,
            p: SelectionRule::FullRank,
            d: SelectionRule::FullRank,
        };
        let model = offline_phase(&fom.trajectory, &schedule, &sel).unwrap();
        let driver = RomDriver::new(&mesh, &params, &model).unwrap();
        let dm = &driver.solver().dm;
        let start = fom.trajectory.index_at_time(t0).unwrap();
        let d_off = dm.d_offset();
        let d_before = &fom.trajectory.states[start - 1][d_off..d_off + dm.n_d()];
        let rom = driver
            .run(
                &mesh,
                &fom.trajectory.states[start],
                Some(d_before),
                &RomConfig { dt: 0.01, ..RomConfig::default() },
                Some(tip),
            )
            .unwrap();

        assert_eq!(rom.trajectory.states.len(), fom.trajectory.states.len() - start);
        let rel = |x: &[f64], y: &[f64]| -> f64 {
            let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let den: f64 = y.iter().map(|b| b * b).sum::<f64>().max(1e-30);
            (num / den).sqrt()
        };
        let (n_u, n_p, n_d) = (dm.n_u(), dm.n_p(), dm.n_d());
        let p_off = dm.p_offset();
        for (k, (rs, fs)) in rom
            .trajectory
            .states
            .iter()
            .zip(&fom.trajectory.states[start..])
            .enumerate()
        {
            let full = rel(rs, fs);
            assert!(full < 1e-6, "state {k} relative difference {full}");
            // Each block individually, so a small-norm block cannot hide
            // behind the combined scale.
            let u = rel(&rs[..n_u], &fs[..n_u]);
            let p = rel(&rs[p_off..p_off + n_p], &fs[p_off..p_off + n_p]);
            let d = rel(&rs[d_off..d_off + n_d], &fs[d_off..d_off + n_d]);
            assert!(u < 1e-6, "state {k} velocity block {u}");
            assert!(p < 1e-6, "state {k} pressure block {p}");
            assert!(d < 1e-6, "state {k} displacement block {d}");
        }
    }

    /// Consistency oracle for the eliminated and projected system: at an
    /// exact full-order state, evaluated with exact histories and the
    /// recorded mesh, the reduced residual must vanish to round-off relative
    /// to its value one iterate earlier. This holds on any window, because
    /// it probes the equations themselves rather than the location of their
    /// root. At the block *projection* of that state the residual picks up
    /// the basis truncation tail (the rank cutoff drops modes near 1e-12 of
    /// the leading eigenvalue, a state perturbation near 1e-6 relative), so
    /// it is only small, not round-off.
    #[test]
    fn reduced_residual_vanishes_at_projected_exact_state() {
        let mesh = coarse_mesh();
        let params = PhysicalParams::reference();
        let cfg = FomConfig {
            dt: 0.01,
            t_end: 0.2,
            ..FomConfig::default()
        };
        let fom = run_fom(&mesh, &params, &cfg, None).unwrap();

        let schedule = make_schedule(0.1, 0.2, 0.1, 0.01).unwrap();
        let sel = BasisSelection {
            u: SelectionRule::FullRank,
            p: SelectionRule::FullRank,
            d: SelectionRule::FullRank,
        };
        let model = offline_phase(&fom.trajectory, &schedule, &sel).unwrap();
        let driver = RomDriver::new(&mesh, &params, &model).unwrap();
        let solver = driver.solver();
        let dm = &solver.dm;
        let start = fom.trajectory.index_at_time(0.1).unwrap();
        let d_off = dm.d_offset();
        let (n_u, n_p, n_d) = (dm.n_u(), dm.n_p(), dm.n_d());
        let p_off = dm.p_offset();
        let dt = 0.01;

        let frame = SegmentFrame::new(solver, &model.segments[0]);
        let s0 = &fom.trajectory.states[start];
        let s1 = &fom.trajectory.states[start + 1];
        let sm1 = &fom.trajectory.states[start - 1];

        // Exact histories straight from the trajectory, not reduced.
        let u_prev = &s0[..n_u];
        let d_prev = &s0[d_off..d_off + n_d];
        let d_prev2 = &sm1[d_off..d_off + n_d];
        let m_prev = &s0[d_off + n_d..];
        let m_new = &s1[d_off + n_d..];
        let mesh_vel = MeshMotion::mesh_velocity(m_new, m_prev, dt);

        // Candidate 1: the raw full-order state-1 unknowns.
        let z_exact = &s1[..dm.n_unknowns()];
        // Candidate 2: its block projection, kinematically re-closed.
        let a_tgt = frame.reduce_blocks(
            &s1[..n_u],
            &s1[p_off..p_off + n_p],
            &s1[d_off..d_off + n_d],
        );
        let z_proj = frame.expand_state(solver, &a_tgt, d_prev, dt);

        let mut mat = solver.plan.new_matrix();
        let mut res = vec![0.0; solver.plan.n];
        let mut scratch = Vec::new();
        let mut reduced_residual_at = |z: &[f64]| -> f64 {
            solver.plan.assemble(
                &mesh,
                dm,
                &params,
                &StepInputs {
                    z,
                    u_prev,
                    d_prev,
                    d_prev2,
                    mesh_disp: m_new,
                    mesh_vel: &mesh_vel,
                    dt,
                },
                &mut mat,
                &mut res,
            );
            solver.plan.apply_reduced_elimination(dt, &mut mat, &mut res);
            let (_, rr) = project_system(&frame.phi, &mat, &res, &mut scratch);
            norm2(&rr)
        };

        // Scale reference: residual at the state-0 iterate, one step behind.
        let r_ref = reduced_residual_at(&s0[..dm.n_unknowns()]);
        let r_exact = reduced_residual_at(z_exact);
        let r_proj = reduced_residual_at(&z_proj);
        assert!(r_ref > 1e-6, "reference residual degenerate: {r_ref}");
        assert!(
            r_exact <= 1e-8 * r_ref,
            "residual at exact state {r_exact} vs reference {r_ref}"
        );
        assert!(
            r_proj <= 1e-3 * r_ref,
            "residual at projected state {r_proj} vs reference {r_ref}"
        );
    }

    #[test]
    #[ignore]
    fn replay_diagnostics() {
        let mesh = coarse_mesh();
        let params = PhysicalParams::reference();
        let geom = BenchmarkGeometry::default();
        let tip = mesh.find_vertex_at(geom.point_a, 1e-9).unwrap();
        let t0: f64 = std::env::var("FSIROM_DIAG_T0")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0.1);
        let ramp_end: f64 = std::env::var("FSIROM_DIAG_RAMP")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(2.0);
        let cfg = FomConfig {
            dt: 0.01,
            t_end: t0 + 0.1,
            ramp_end,
            ..FomConfig::default()
        };
        let fom = run_fom(&mesh, &params, &cfg, Some(tip)).unwrap();

        let schedule = make_schedule(t0, t0 + 0.1, 0.1, 0.01).unwrap();
        let sel = BasisSelection {
            u: SelectionRule::FullRank,
            p: SelectionRule::FullRank,
            d: SelectionRule::FullRank,
        };
        let model = offline_phase(&fom.trajectory, &schedule, &sel).unwrap();
        let seg = &model.segments[0];
        println!(
            "modes: u {} p {} d {}",
            seg.u.count(),
            seg.p.count(),
            seg.d.count()
        );
        println!("u eigenvalues: {:?}", seg.u.eigenvalues);
        println!("d eigenvalues: {:?}", seg.d.eigenvalues);

        let driver = RomDriver::new(&mesh, &params, &model).unwrap();
        let dm = &driver.solver().dm;
        let start = fom.trajectory.index_at_time(t0).unwrap();
        let (n_u, n_p, n_d) = (dm.n_u(), dm.n_p(), dm.n_d());
        let p_off = dm.p_offset();
        let d_off = dm.d_offset();

        let rel_err = |x: &[f64], y: &[f64]| -> f64 {
            let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let den: f64 = y.iter().map(|b| b * b).sum::<f64>().max(1e-30);
            (num / den).sqrt()
        };

        // Projection fidelity of each window state onto its block bases.
        for (k, s) in fom.trajectory.states[start..].iter().enumerate() {
            let u = &s[..n_u];
            let p = &s[p_off..p_off + n_p];
            let d = &s[d_off..d_off + n_d];
            let pu = seg.u.expand(&seg.u.reduce(u));
            let pp = seg.p.expand(&seg.p.reduce(p));
            let pd = seg.d.expand(&seg.d.reduce(d));
            println!(
                "proj err state {k}: u {:.3e} p {:.3e} d {:.3e}",
                rel_err(&pu, u),
                rel_err(&pp, p),
                rel_err(&pd, d)
            );
        }
        let db_true = &fom.trajectory.states[start - 1][d_off..d_off + n_d];
        let pdb = seg.d.expand(&seg.d.reduce(db_true));
        println!("proj err d_before: {:.3e}", rel_err(&pdb, db_true));

        let rom = driver
            .run(
                &mesh,
                &fom.trajectory.states[start],
                Some(db_true),
                &RomConfig { dt: 0.01, ..RomConfig::default() },
                Some(tip),
            )
            .unwrap();
        for (k, diag) in rom.steps.iter().enumerate() {
            println!(
                "step {k}: newton {} mesh_loops {} res {:.3e}",
                diag.newton_iters, diag.mesh_loops, diag.residual
            );
        }
        for (k, (rs, fs)) in rom
            .trajectory
            .states
            .iter()
            .zip(&fom.trajectory.states[start..])
            .enumerate()
        {
            println!(
                "state {k}: u {:.3e} p {:.3e} d {:.3e} m {:.3e}",
                rel_err(&rs[..n_u], &fs[..n_u]),
                rel_err(&rs[p_off..p_off + n_p], &fs[p_off..p_off + n_p]),
                rel_err(&rs[d_off..d_off + n_d], &fs[d_off..d_off + n_d]),
                rel_err(&rs[d_off + n_d..], &fs[d_off + n_d..])
            );
        }
    }
}
