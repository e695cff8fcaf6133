//! Full-order monolithic solver: implicit time stepping of the coupled
//! fluid/structure system on a moving mesh. Each step runs a fixed-point
//! loop on the mesh position; inside it a Newton loop solves the coupled
//! system with the mesh frozen.

mod trajectory;

pub use trajectory::Trajectory;

use std::time::Instant;

use crate::ale::{self, AleError, MeshMotion};
use crate::fem::{Constraints, DofMap, PhysicalParams, StepInputs, SystemPlan};
use crate::fem::element;
use crate::mesh::{CellRegion, Mesh, MeshError};
use crate::numerics::{rcm_ordering, NumericsError, SparseLu};

#[derive(Debug)]
pub enum FomError {
    Mesh(MeshError),
    Ale(AleError),
    Numerics(NumericsError),
    NewtonStalled { time: f64, residual: f64 },
    MeshLoopStalled { time: f64 },
    BadConfig(String),
    BadTrajectory(String),
    Io(std::io::Error),
}

impl std::fmt::Display for FomError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FomError::Mesh(e) => write!(f, "mesh: {e}"),
            FomError::Ale(e) => write!(f, "{e}"),
            FomError::Numerics(e) => write!(f, "linear solver: {e}"),
            FomError::NewtonStalled { time, residual } => write!(
                f,
                "Newton iteration stalled at t = {time} with residual {residual:.3e}"
            ),
            FomError::MeshLoopStalled { time } => {
                write!(f, "mesh fixed-point loop stalled at t = {time}")
            }
            FomError::BadConfig(m) => write!(f, "bad configuration: {m}"),
            FomError::BadTrajectory(m) => write!(f, "bad trajectory: {m}"),
            FomError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for FomError {}

impl From<MeshError> for FomError {
    fn from(e: MeshError) -> Self {
        FomError::Mesh(e)
    }
}

impl From<AleError> for FomError {
    fn from(e: AleError) -> Self {
        FomError::Ale(e)
    }
}

impl From<NumericsError> for FomError {
    fn from(e: NumericsError) -> Self {
        FomError::Numerics(e)
    }
}

impl From<std::io::Error> for FomError {
    fn from(e: std::io::Error) -> Self {
        FomError::Io(e)
    }
}

/// Time-stepping controls. Defaults match the benchmark run.
#[derive(Debug, Clone)]
pub struct FomConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Peak inflow velocity at mid channel.
    pub u_max: f64,
    /// The inflow amplitude rises smoothly from zero and reaches its full
    /// value at this time.
    pub ramp_end: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub mesh_loop_tol: f64,
    pub mesh_loop_max: usize,
    /// Record every k-th state (the initial state is always recorded).
    pub snapshot_every: usize,
}

impl Default for FomConfig {
    fn default() -> FomConfig {
        FomConfig {
            dt: 0.01,
            t_end: 15.0,
            u_max: 1.5,
            ramp_end: 2.0,
            newton_tol: 1e-8,
            newton_max: 20,
            mesh_loop_tol: 1e-8,
            mesh_loop_max: 15,
            snapshot_every: 1,
        }
    }
}

impl FomConfig {
    pub fn validate(&self) -> Result<usize, FomError> {
        if !(self.dt > 0.0) {
            return Err(FomError::BadConfig("dt must be positive".into()));
        }
        if self.snapshot_every == 0 {
            return Err(FomError::BadConfig("snapshot_every must be >= 1".into()));
        }
        let steps = (self.t_end / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.t_end).abs() > 1e-6 * self.t_end.max(1.0) {
            return Err(FomError::BadConfig(format!(
                "t_end = {} is not a whole number of steps of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Smooth start-up factor: 0 at t = 0, 1 from `ramp_end` on.
pub fn ramp_factor(t: f64, ramp_end: f64) -> f64 {
    if t >= ramp_end {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * t / ramp_end).cos())
    }
}

/// Parabolic inflow profile with peak value `u_max` at mid channel.
pub fn inflow_profile(y: f64, height: f64, u_max: f64) -> f64 {
    u_max * 4.0 * y * (height - y) / (height * height)
}

/// Per-step convergence and cost record.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub time: f64,
    pub newton_iters: usize,
    pub mesh_loops: usize,
    pub residual: f64,
    /// Wall time spent factorizing and solving the linear systems.
    pub solve_seconds: f64,
    pub divergence_norm: f64,
}

/// Solution state carried between steps. `z` is the current (u, p, d), the
/// two previous displacement levels feed the second-order-in-time structure
/// update, `m` is the mesh displacement belonging to `z`.
pub struct FomState {
    pub z: Vec<f64>,
    pub d_prev: Vec<f64>,
    pub d_prev2: Vec<f64>,
    pub m: Vec<f64>,
}

impl FomState {
    pub fn zero(dm: &DofMap) -> FomState {
        FomState {
            z: vec![0.0; dm.n_unknowns()],
            d_prev: vec![0.0; dm.n_d()],
            d_prev2: vec![0.0; dm.n_d()],
            m: vec![0.0; dm.n_m()],
        }
    }
}

/// Everything that is fixed for a given mesh: dof layout, assembly plan,
/// constraint bookkeeping, mesh motion operator, solver ordering.
pub struct FsiSolver {
    pub dm: DofMap,
    pub constraints: Constraints,
    pub plan: SystemPlan,
    pub motion: MeshMotion,
    pub params: PhysicalParams,
    order: Vec<usize>,
    height: f64,
    /// Local displacement indices (within the d block) of interface vertices.
    interface_d_locals: Vec<usize>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl FsiSolver {
    pub fn new(mesh: &Mesh, params: &PhysicalParams) -> Result<FsiSolver, FomError> {
        let dm = DofMap::new(mesh);
        let constraints = Constraints::new(mesh, &dm);
        let plan = SystemPlan::new(mesh, &dm, &constraints);
        let motion = MeshMotion::new(mesh, &dm)?;
        let order = rcm_ordering(&plan.new_matrix());
        let height = mesh
            .vertices
            .iter()
            .map(|p| p.y)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut interface_d_locals = Vec::new();
        for &v in &constraints.interface_vertices {
            let s = dm.structure_index[v].expect("interface vertex has displacement dofs");
            interface_d_locals.push(2 * s);
            interface_d_locals.push(2 * s + 1);
        }
        Ok(FsiSolver {
            dm,
            constraints,
            plan,
            motion,
            params: *params,
            order,
            height,
            interface_d_locals,
        })
    }

    /// Writes the exact constrained values into z: inflow profile on the
    /// inlet, zeros on rigid walls and clamped displacements, and the
    /// discrete kinematic identity on interface velocities. Keeping the base
    /// state exactly consistent lets every constrained Newton row carry a
    /// zero right-hand side.
    pub fn impose_constraint_values(&self, z: &mut [f64], t: f64, dt: f64, cfg: &FomConfig, d_prev: &[f64], mesh: &Mesh) {
        let ramp = ramp_factor(t, cfg.ramp_end);
        for &v in &self.constraints.inlet_vertices {
            let y = mesh.vertices[v].y;
            z[self.dm.u_dof(v, 0)] = ramp * inflow_profile(y, self.height, cfg.u_max);
            z[self.dm.u_dof(v, 1)] = 0.0;
        }
        for &v in &self.constraints.noslip_vertices {
            z[self.dm.u_dof(v, 0)] = 0.0;
            z[self.dm.u_dof(v, 1)] = 0.0;
        }
        for &dof in &self.constraints.dirichlet_d {
            z[dof] = 0.0;
        }
        let d_off = self.dm.d_offset();
        for &(ud, dd) in &self.constraints.interface_pairs {
            z[ud] = (z[dd] - d_prev[dd - d_off]) / dt;
        }
    }

    /// Advances the state to `t_new`. On entry `st` holds the converged
    /// solution of the previous level; on success it holds the new one.
    pub fn step(
        &self,
        mesh: &Mesh,
        st: &mut FomState,
        t_new: f64,
        cfg: &FomConfig,
    ) -> Result<StepDiagnostics, FomError> {
        let dm = &self.dm;
        let nd = dm.n_d();
        let d_off = dm.d_offset();

        // Shift the time levels: the displacement in z becomes d_prev.
        let u_prev: Vec<f64> = st.z[..dm.n_u()].to_vec();
        st.d_prev2 = std::mem::take(&mut st.d_prev);
        st.d_prev = st.z[d_off..d_off + nd].to_vec();
        let m_prev = st.m.clone();

        // Predictor: linear extrapolation of the displacement.
        for i in 0..nd {
            st.z[d_off + i] = 2.0 * st.d_prev[i] - st.d_prev2[i];
        }
        self.impose_constraint_values(&mut st.z, t_new, cfg.dt, cfg, &st.d_prev, mesh);

        let mut d_iter: Vec<f64> = st.z[d_off..d_off + nd].to_vec();
        let mut mat = self.plan.new_matrix();
        let mut res = vec![0.0; self.plan.n];
        let mut total_newton = 0;
        let mut mesh_loops = 0;
        let mut solve_seconds = 0.0;
        let mut final_res;

        loop {
            mesh_loops += 1;
            let m = self.motion.extend(&d_iter)?;
            let mesh_vel = MeshMotion::mesh_velocity(&m, &m_prev, cfg.dt);

            let mut r0 = f64::NAN;
            let mut it = 0;
            loop {
                self.plan.assemble(
                    mesh,
                    dm,
                    &self.params,
                    &StepInputs {
                        z: &st.z,
                        u_prev: &u_prev,
                        d_prev: &st.d_prev,
                        d_prev2: &st.d_prev2,
                        mesh_disp: &m,
                        mesh_vel: &mesh_vel,
                        dt: cfg.dt,
                    },
                    &mut mat,
                    &mut res,
                );
                self.plan.apply_full_order_constraints(cfg.dt, &mut mat, &mut res);
                let rnorm = norm2(&res);
                final_res = rnorm;
                if r0.is_nan() {
                    r0 = rnorm;
                }
                if rnorm <= cfg.newton_tol * (1.0 + r0) {
                    break;
                }
                if it >= cfg.newton_max {
                    return Err(FomError::NewtonStalled {
                        time: t_new,
                        residual: rnorm,
                    });
                }
                let clock = Instant::now();
                let lu = SparseLu::factor_ordered(&mat, Some(&self.order))?;
                let neg: Vec<f64> = res.iter().map(|v| -v).collect();
                let delta = lu.solve(&neg)?;
                solve_seconds += clock.elapsed().as_secs_f64();
                for (zi, di) in st.z.iter_mut().zip(&delta) {
                    *zi += di;
                }
                // Resync so the constrained entries stay bit-exact.
                self.impose_constraint_values(&mut st.z, t_new, cfg.dt, cfg, &st.d_prev, mesh);
                it += 1;
                total_newton += 1;
            }

            let mut delta_iface = 0.0f64;
            for &l in &self.interface_d_locals {
                delta_iface = delta_iface.max((st.z[d_off + l] - d_iter[l]).abs());
            }
            d_iter.copy_from_slice(&st.z[d_off..d_off + nd]);
            if delta_iface <= cfg.mesh_loop_tol {
                break;
            }
            if mesh_loops >= cfg.mesh_loop_max {
                return Err(FomError::MeshLoopStalled { time: t_new });
            }
        }

        // The stored mesh follows the converged displacement exactly.
        st.m = self.motion.extend(&d_iter)?;
        let disp = ale::vertex_displacements(dm, mesh.n_vertices(), &st.m, &d_iter);
        mesh.displaced(&disp)?;

        Ok(StepDiagnostics {
            time: t_new,
            newton_iters: total_newton,
            mesh_loops,
            residual: final_res,
            solve_seconds,
            divergence_norm: divergence_norm(mesh, dm, &st.z[..dm.n_u()], &st.m),
        })
    }
}

/// L2 norm of the velocity divergence over the displaced fluid mesh.
pub fn divergence_norm(mesh: &Mesh, dm: &DofMap, u: &[f64], m: &[f64]) -> f64 {
    let mut acc = 0.0;
    for cell in &mesh.cells {
        if cell.region != CellRegion::Fluid {
            continue;
        }
        let mut pos = [crate::mesh::Point2::new(0.0, 0.0); 3];
        let mut f_idx = [0usize; 3];
        for i in 0..3 {
            let v = cell.v[i];
            let f = dm.fluid_index[v].expect("fluid cell vertex");
            f_idx[i] = f;
            pos[i] = crate::mesh::Point2::new(
                mesh.vertices[v].x + m[2 * f],
                mesh.vertices[v].y + m[2 * f + 1],
            );
        }
        let (g, area) = element::p1_gradients(&pos);
        let mut div = 0.0;
        for j in 0..3 {
            div += u[2 * f_idx[j]] * g[j][0] + u[2 * f_idx[j] + 1] * g[j][1];
        }
        acc += area * div * div;
    }
    acc.sqrt()
}

/// Result of a full-order run: the recorded trajectory plus per-step cost
/// and convergence diagnostics.
pub struct FomRun {
    pub trajectory: Trajectory,
    pub steps: Vec<StepDiagnostics>,
    /// Accumulated linear factor-and-solve time across all Newton iterations.
    pub solve_seconds: f64,
    pub wall_seconds: f64,
}

/// Runs the monolithic solver from a quiescent start. `tracked_vertex`, if
/// given, must carry displacement dofs; its displacement is recorded every
/// step.
pub fn run_fom(
    mesh: &Mesh,
    params: &PhysicalParams,
    cfg: &FomConfig,
    tracked_vertex: Option<usize>,
) -> Result<FomRun, FomError> {
    let n_steps = cfg.validate()?;
    let clock = Instant::now();
    let solver = FsiSolver::new(mesh, params)?;
    let dm = &solver.dm;
    let tracked_ordinal = match tracked_vertex {
        Some(v) => Some(dm.structure_index[v].ok_or_else(|| {
            FomError::BadConfig(format!("tracked vertex {v} has no displacement dofs"))
        })?),
        None => None,
    };

    let mut st = FomState::zero(dm);
    let mut times = vec![0.0];
    let mut states = vec![snapshot(&st)];
    let mut tracked = Vec::new();
    if tracked_ordinal.is_some() {
        tracked.push([0.0; 3]);
    }
    let mut steps = Vec::with_capacity(n_steps);
    let mut solve_seconds = 0.0;

    for k in 1..=n_steps {
        let t = k as f64 * cfg.dt;
        let diag = solver.step(mesh, &mut st, t, cfg)?;
        solve_seconds += diag.solve_seconds;
        steps.push(diag);
        if k % cfg.snapshot_every == 0 {
            times.push(t);
            states.push(snapshot(&st));
        }
        if let Some(s) = tracked_ordinal {
            let d_off = dm.d_offset();
            tracked.push([t, st.z[d_off + 2 * s], st.z[d_off + 2 * s + 1]]);
        }
    }

    Ok(FomRun {
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
    })
}

fn snapshot(st: &FomState) -> Vec<f64> {
    let mut s = Vec::with_capacity(st.z.len() + st.m.len());
    s.extend_from_slice(&st.z);
    s.extend_from_slice(&st.m);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_benchmark_mesh, generate_channel_mesh, BenchmarkGeometry};

    #[test]
    fn inflow_profile_and_ramp_match_reference_values() {
        assert_eq!(ramp_factor(0.0, 2.0), 0.0);
        assert!((ramp_factor(1.0, 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(ramp_factor(2.0, 2.0), 1.0);
        assert_eq!(ramp_factor(7.5, 2.0), 1.0);
        assert_eq!(inflow_profile(0.0, 0.41, 1.5), 0.0);
        assert_eq!(inflow_profile(0.41, 0.41, 1.5), 0.0);
        assert!((inflow_profile(0.205, 0.41, 1.5) - 1.5).abs() < 1e-12);
        // Mid-ramp, mid-channel value.
        let v = ramp_factor(1.0, 2.0) * inflow_profile(0.205, 0.41, 1.5);
        assert!((v - 0.75).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_non_divisible_interval() {
        let cfg = FomConfig {
            dt: 0.3,
            t_end: 1.0,
            ..FomConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(FomError::BadConfig(_))));
        let cfg = FomConfig {
            dt: 0.01,
            t_end: 0.1,
            ..FomConfig::default()
        };
        assert_eq!(cfg.validate().unwrap(), 10);
    }

    #[test]
    fn quiescent_inflow_keeps_every_field_zero() {
        let mesh = generate_benchmark_mesh(&BenchmarkGeometry::default(), 0.05).unwrap();
        let tip = mesh.find_vertex_at(BenchmarkGeometry::default().point_a, 1e-9).unwrap();
        let cfg = FomConfig {
            dt: 0.02,
            t_end: 0.06,
            u_max: 0.0,
            ..FomConfig::default()
        };
        let run = run_fom(&mesh, &PhysicalParams::reference(), &cfg, Some(tip)).unwrap();
        assert_eq!(run.trajectory.states.len(), 4);
        for s in &run.trajectory.states {
            assert!(s.iter().all(|&v| v == 0.0));
        }
        for d in &run.steps {
            assert_eq!(d.newton_iters, 0);
            assert_eq!(d.divergence_norm, 0.0);
        }
        for e in &run.trajectory.tracked {
            assert_eq!(e[1], 0.0);
            assert_eq!(e[2], 0.0);
        }
    }

    /// Manual diagnostic: benchmark run printing the tip motion envelope and
    /// step cost live, one line per simulated second. Run with
    /// --ignored --nocapture --release.
    #[test]
    #[ignore]
    fn benchmark_smoke_run() {
        let t_end: f64 = std::env::var("FSIROM_SMOKE_TEND")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0.3);
        let target_h: f64 = std::env::var("FSIROM_SMOKE_H")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0.03);
        // Optional "slope,wake_factor,coarse_factor,wake_length" override.
        let grading = std::env::var("FSIROM_SMOKE_GRADING")
            .ok()
            .map(|v| {
                let f: Vec<f64> = v.split(',').map(|s| s.trim().parse().unwrap()).collect();
                assert_eq!(f.len(), 4, "grading override needs four numbers");
                crate::mesh::MeshGrading {
                    slope: f[0],
                    wake_factor: f[1],
                    coarse_factor: f[2],
                    wake_length: f[3],
                }
            })
            .unwrap_or_default();
        let geom = BenchmarkGeometry::default();
        let mesh = crate::mesh::generate_benchmark_mesh_graded(&geom, target_h, &grading).unwrap();
        let fluid = mesh.fluid_vertex_mask().iter().filter(|&&f| f).count();
        let solid = mesh.structure_vertex_mask().iter().filter(|&&f| f).count();
        println!(
            "mesh: {} vertices, {} cells, {} scalar dofs",
            mesh.n_vertices(),
            mesh.cells.len(),
            5 * fluid + 2 * solid
        );
        let tip = mesh.find_vertex_at(geom.point_a, 1e-9).unwrap();
        let dt: f64 = std::env::var("FSIROM_SMOKE_DT")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0.01);
        let cfg = FomConfig {
            dt,
            t_end,
            ..FomConfig::default()
        };
        let n_steps = cfg.validate().unwrap();
        let solver = FsiSolver::new(&mesh, &PhysicalParams::reference()).unwrap();
        let tip_ord = solver.dm.structure_index[tip].unwrap();
        let d_off = solver.dm.d_offset();
        let mut st = FomState::zero(&solver.dm);

        let clock = std::time::Instant::now();
        let mut sec_clock = std::time::Instant::now();
        let (mut newton, mut loops) = (0usize, 0usize);
        let (mut sec_newton, mut sec_steps) = (0usize, 0usize);
        let mut solve_seconds = 0.0;
        let mut sec = 1usize;
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for k in 1..=n_steps {
            let t = k as f64 * dt;
            let diag = solver.step(&mesh, &mut st, t, &cfg).unwrap();
            newton += diag.newton_iters;
            sec_newton += diag.newton_iters;
            loops += diag.mesh_loops;
            sec_steps += 1;
            solve_seconds += diag.solve_seconds;
            let dy = st.z[d_off + 2 * tip_ord + 1];
            lo = lo.min(dy);
            hi = hi.max(dy);
            if t + 1e-9 >= sec as f64 {
                println!(
                    "t in [{},{sec}]: dy in [{lo:+.4e}, {hi:+.4e}]  ({:.0} ms/step, newton/step {:.2})",
                    sec - 1,
                    1e3 * sec_clock.elapsed().as_secs_f64() / sec_steps as f64,
                    sec_newton as f64 / sec_steps as f64,
                );
                sec += 1;
                sec_clock = std::time::Instant::now();
                sec_newton = 0;
                sec_steps = 0;
                lo = dy;
                hi = dy;
            }
        }
        let wall = clock.elapsed().as_secs_f64();
        if sec_steps > 0 {
            println!("t in [{},..]: dy in [{lo:+.4e}, {hi:+.4e}]", sec - 1);
        }
        println!(
            "steps {n_steps}, wall {wall:.2}s ({:.0} ms/step), newton/step {:.2}, loops/step {:.2}, solve share {:.2}",
            1e3 * wall / n_steps as f64,
            newton as f64 / n_steps as f64,
            loops as f64 / n_steps as f64,
            solve_seconds / wall
        );
        let dx = st.z[d_off + 2 * tip_ord];
        let dy = st.z[d_off + 2 * tip_ord + 1];
        println!("tip at t={t_end:.2}: dx={dx:+.3e} dy={dy:+.3e}");
    }

    /// Runs the pure-fluid channel at one resolution and returns the
    /// relative nodal velocity error against the exact parabolic profile,
    /// plus the mean pressure drop along the channel.
    fn channel_error(target_h: f64) -> (f64, f64) {
        let mesh = generate_channel_mesh(1.0, 0.41, target_h).unwrap();
        let mut params = PhysicalParams::reference();
        // Large viscosity: the flow is quasi-steady well before the ramp
        // ends, so the final state isolates the spatial scheme error.
        params.nu_f = 1.0;
        let cfg = FomConfig {
            dt: 0.05,
            t_end: 2.5,
            u_max: 1.5,
            ramp_end: 2.0,
            ..FomConfig::default()
        };
        let run = run_fom(&mesh, &params, &cfg, None).unwrap();
        let dm = DofMap::new(&mesh);
        let last = run.trajectory.states.last().unwrap();

        for d in &run.steps {
            assert!(d.newton_iters <= 5, "newton iterations {}", d.newton_iters);
        }

        // The natural outflow condition of the symmetric stress form does
        // not preserve the parabola near the outlet, so measure the interior.
        let mut err2 = 0.0;
        let mut ref2 = 0.0;
        for (f, &v) in dm.fluid_vertices.iter().enumerate() {
            if mesh.vertices[v].x > 0.8 {
                continue;
            }
            let want = inflow_profile(mesh.vertices[v].y, 0.41, 1.5);
            err2 += (last[2 * f] - want).powi(2) + last[2 * f + 1].powi(2);
            ref2 += want * want;
        }

        let p_off = dm.p_offset();
        let mut p_in = (0.0, 0);
        let mut p_out = (0.0, 0);
        for (f, &v) in dm.fluid_vertices.iter().enumerate() {
            if mesh.vertices[v].x < 0.05 {
                p_in = (p_in.0 + last[p_off + f], p_in.1 + 1);
            } else if mesh.vertices[v].x > 0.95 {
                p_out = (p_out.0 + last[p_off + f], p_out.1 + 1);
            }
        }
        let drop = p_in.0 / p_in.1 as f64 - p_out.0 / p_out.1 as f64;
        ((err2 / ref2).sqrt(), drop)
    }

    #[test]
    fn channel_flow_converges_to_parabolic_profile() {
        let (err_coarse, _) = channel_error(0.07);
        let (err_fine, drop) = channel_error(0.04);
        // Second-order consistency would give a factor (4/7)^2 = 0.33; allow
        // generous slack while still catching a non-convergent scheme.
        assert!(
            err_fine < 0.6 * err_coarse,
            "no grid convergence: coarse {err_coarse}, fine {err_fine}"
        );
        assert!(err_fine < 0.045, "fine-grid velocity error {err_fine}");
        // Expected drop rho*nu*|u''|*L = 1000 * 71.4 * 1.0; require the
        // right sign and magnitude.
        assert!(drop > 1e4, "pressure drop {drop}");
    }
}
