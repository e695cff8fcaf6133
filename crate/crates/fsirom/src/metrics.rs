//! Error indicators comparing a reduced-order sweep against the full-order
//! reference: per-step relative spatial L2 errors (total and per variable),
//! the relative space-time L2 error over a window, and the signed tracked-tip
//! displacement difference.
//!
//! All spatial integrals are taken over the current configuration of the
//! reference run: fluid cells displaced by its mesh motion, structure cells
//! by its displacement field. The mesh-motion block is excluded from the
//! norms; it is full-order in both runs and would only dilute the total.

use crate::ale;
use crate::fem::DofMap;
use crate::mesh::{CellRegion, Mesh};
use rayon::prelude::*;
use std::fmt;

#[derive(Debug)]
pub enum MetricsError {
    /// The reference has zero norm where a relative error was requested.
    ZeroNorm,
    /// Inputs that cannot be compared (wrong lengths, missing dofs).
    Mismatch(String),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::ZeroNorm => write!(f, "reference state has zero norm"),
            MetricsError::Mismatch(what) => write!(f, "mismatched inputs: {what}"),
        }
    }
}

impl std::error::Error for MetricsError {}

/// Relative spatial L2 error of one state pair, total and per variable.
#[derive(Debug, Clone, Copy)]
pub struct SpatialBreakdown {
    pub total: f64,
    pub u: f64,
    pub p: f64,
    pub d: f64,
}

/// Exact integral of the square of a P1 field over a triangle of the given
/// area, from the nodal values.
fn p1_square_integral(area: f64, e: [f64; 3]) -> f64 {
    let s = e[0] + e[1] + e[2];
    area / 12.0 * (s * s + e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
}

/// Squared L2 norms of the (u, p, d) blocks of `rom - fom` and of `fom`
/// itself, integrated over the displaced configuration of `fom`.
fn block_norms(mesh: &Mesh, dm: &DofMap, fom: &[f64], rom: &[f64]) -> ([f64; 3], [f64; 3]) {
    let d_off = dm.d_offset();
    let m_off = dm.m_offset();
    let disp = ale::vertex_displacements(
        dm,
        mesh.n_vertices(),
        &fom[m_off..],
        &fom[d_off..d_off + dm.n_d()],
    );
    let mut err2 = [0.0; 3];
    let mut ref2 = [0.0; 3];
    for cell in &mesh.cells {
        let [a, b, c] = cell.v;
        let pa = mesh.vertices[a].add(disp[a]);
        let pb = mesh.vertices[b].add(disp[b]);
        let pc = mesh.vertices[c].add(disp[c]);
        let ab = pb.sub(pa);
        let ac = pc.sub(pa);
        let area = 0.5 * (ab.x * ac.y - ab.y * ac.x).abs();
        match cell.region {
            CellRegion::Fluid => {
                for k in 0..2 {
                    let f = cell.v.map(|v| fom[dm.u_dof(v, k)]);
                    let e = cell.v.map(|v| rom[dm.u_dof(v, k)] - fom[dm.u_dof(v, k)]);
                    ref2[0] += p1_square_integral(area, f);
                    err2[0] += p1_square_integral(area, e);
                }
                let f = cell.v.map(|v| fom[dm.p_dof(v)]);
                let e = cell.v.map(|v| rom[dm.p_dof(v)] - fom[dm.p_dof(v)]);
                ref2[1] += p1_square_integral(area, f);
                err2[1] += p1_square_integral(area, e);
            }
            CellRegion::Structure => {
                for k in 0..2 {
                    let f = cell.v.map(|v| fom[dm.d_dof(v, k)]);
                    let e = cell.v.map(|v| rom[dm.d_dof(v, k)] - fom[dm.d_dof(v, k)]);
                    ref2[2] += p1_square_integral(area, f);
                    err2[2] += p1_square_integral(area, e);
                }
            }
        }
    }
    (err2, ref2)
}

fn check_pair(dm: &DofMap, fom: &[f64], rom: &[f64]) -> Result<(), MetricsError> {
    if fom.len() != dm.n_total() || rom.len() != dm.n_total() {
        return Err(MetricsError::Mismatch(format!(
            "state lengths {} and {} against dof map size {}",
            fom.len(),
            rom.len(),
            dm.n_total()
        )));
    }
    Ok(())
}

fn ratio(err2: f64, ref2: f64) -> Result<f64, MetricsError> {
    if ref2 > 0.0 {
        Ok((err2 / ref2).sqrt())
    } else if err2 == 0.0 {
        Ok(0.0)
    } else {
        Err(MetricsError::ZeroNorm)
    }
}

/// Relative spatial L2 error between one pair of states, with a per-variable
/// breakdown. The total combines u, p, and d; the mesh-motion block does not
/// participate.
pub fn relative_spatial_l2(
    mesh: &Mesh,
    dm: &DofMap,
    fom: &[f64],
    rom: &[f64],
) -> Result<SpatialBreakdown, MetricsError> {
    check_pair(dm, fom, rom)?;
    let (err2, ref2) = block_norms(mesh, dm, fom, rom);
    let total_ref: f64 = ref2.iter().sum();
    if total_ref <= 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    Ok(SpatialBreakdown {
        total: (err2.iter().sum::<f64>() / total_ref).sqrt(),
        u: ratio(err2[0], ref2[0])?,
        p: ratio(err2[1], ref2[1])?,
        d: ratio(err2[2], ref2[2])?,
    })
}

/// Relative space-time L2 error over aligned state sequences. The uniform
/// step width cancels between numerator and denominator, so none is taken.
pub fn relative_spacetime_l2(
    mesh: &Mesh,
    dm: &DofMap,
    fom_states: &[Vec<f64>],
    rom_states: &[Vec<f64>],
) -> Result<f64, MetricsError> {
    if fom_states.len() != rom_states.len() {
        return Err(MetricsError::Mismatch(format!(
            "{} reference states vs {} reduced states",
            fom_states.len(),
            rom_states.len()
        )));
    }
    for (f, r) in fom_states.iter().zip(rom_states) {
        check_pair(dm, f, r)?;
    }
    let (err2, ref2) = fom_states
        .par_iter()
        .zip(rom_states)
        .map(|(f, r)| {
            let (e, n) = block_norms(mesh, dm, f, r);
            (e.iter().sum::<f64>(), n.iter().sum::<f64>())
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    if ref2 <= 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    Ok((err2 / ref2).sqrt())
}

/// The y-displacement of one vertex through a state sequence.
pub fn dy_series(dm: &DofMap, states: &[Vec<f64>], vertex: usize) -> Result<Vec<f64>, MetricsError> {
    if dm.structure_index[vertex].is_none() {
        return Err(MetricsError::Mismatch(format!(
            "vertex {vertex} carries no displacement dof"
        )));
    }
    let dof = dm.d_dof(vertex, 1);
    Ok(states.iter().map(|s| s[dof]).collect())
}

/// Signed per-step difference of the tracked y-displacement, reference minus
/// reduced.
pub fn dy_error_series(
    dm: &DofMap,
    fom_states: &[Vec<f64>],
    rom_states: &[Vec<f64>],
    vertex: usize,
) -> Result<Vec<f64>, MetricsError> {
    if fom_states.len() != rom_states.len() {
        return Err(MetricsError::Mismatch(format!(
            "{} reference states vs {} reduced states",
            fom_states.len(),
            rom_states.len()
        )));
    }
    let f = dy_series(dm, fom_states, vertex)?;
    let r = dy_series(dm, rom_states, vertex)?;
    Ok(f.iter().zip(&r).map(|(a, b)| a - b).collect())
}

/// Everything the comparison stage reports for one window.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    pub spatial: Vec<SpatialBreakdown>,
    pub spacetime: f64,
    pub dy_fom: Vec<f64>,
    pub dy_rom: Vec<f64>,
    pub dy_error: Vec<f64>,
}

impl ErrorReport {
    /// Builds the full report over aligned sequences. `tracked_vertex` is
    /// optional; without it the displacement series stay empty.
    pub fn compute(
        mesh: &Mesh,
        dm: &DofMap,
        times: &[f64],
        fom_states: &[Vec<f64>],
        rom_states: &[Vec<f64>],
        tracked_vertex: Option<usize>,
    ) -> Result<ErrorReport, MetricsError> {
        if times.len() != fom_states.len() {
            return Err(MetricsError::Mismatch(format!(
                "{} time points vs {} states",
                times.len(),
                fom_states.len()
            )));
        }
        let spacetime = relative_spacetime_l2(mesh, dm, fom_states, rom_states)?;
        let spatial = fom_states
            .par_iter()
            .zip(rom_states)
            .map(|(f, r)| relative_spatial_l2(mesh, dm, f, r))
            .collect::<Result<Vec<_>, _>>()?;
        let (dy_fom, dy_rom, dy_error) = match tracked_vertex {
            Some(v) => (
                dy_series(dm, fom_states, v)?,
                dy_series(dm, rom_states, v)?,
                dy_error_series(dm, fom_states, rom_states, v)?,
            ),
            None => (Vec::new(), Vec::new(), Vec::new()),
        };
        Ok(ErrorReport {
            times: times.to_vec(),
            spatial,
            spacetime,
            dy_fom,
            dy_rom,
            dy_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_benchmark_mesh, generate_channel_mesh, BenchmarkGeometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_benchmark() -> (Mesh, DofMap) {
        let mesh = generate_benchmark_mesh(&BenchmarkGeometry::default(), 0.05).unwrap();
        let dm = DofMap::new(&mesh);
        (mesh, dm)
    }

    /// A state with every block filled from the rng; displacements are kept
    /// small so the displaced cells stay far from degenerate.
    fn random_state(dm: &DofMap, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut s = vec![0.0; dm.n_total()];
        for v in s[..dm.p_offset()].iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in s[dm.p_offset()..dm.d_offset()].iter_mut() {
            *v = rng.gen_range(-100.0..100.0);
        }
        for v in s[dm.d_offset()..].iter_mut() {
            *v = rng.gen_range(-1e-3..1e-3);
        }
        s
    }

    #[test]
    fn identical_states_give_zero_errors() {
        let (mesh, dm) = small_benchmark();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_state(&dm, &mut rng);
        let e = relative_spatial_l2(&mesh, &dm, &s, &s).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(e.u, 0.0);
        assert_eq!(e.p, 0.0);
        assert_eq!(e.d, 0.0);
        let st = relative_spacetime_l2(&mesh, &dm, &[s.clone()], &[s.clone()]).unwrap();
        assert_eq!(st, 0.0);
    }

    #[test]
    fn proportional_states_give_exact_relative_error() {
        let (mesh, dm) = small_benchmark();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random_state(&dm, &mut rng);
        let r: Vec<f64> = f.iter().map(|v| 1.1 * v).collect();
        let e = relative_spatial_l2(&mesh, &dm, &f, &r).unwrap();
        for got in [e.total, e.u, e.p, e.d] {
            assert!((got - 0.1).abs() < 1e-12, "relative error {got}");
        }
    }

    /// Independent quadrature oracle: the edge-midpoint rule integrates
    /// quadratics exactly, so it must agree with the nodal mass formula on
    /// the square of a P1 field.
    fn midpoint_block_norms(
        mesh: &Mesh,
        dm: &DofMap,
        fom: &[f64],
        rom: &[f64],
    ) -> ([f64; 3], [f64; 3]) {
        let d_off = dm.d_offset();
        let disp = ale::vertex_displacements(
            dm,
            mesh.n_vertices(),
            &fom[dm.m_offset()..],
            &fom[d_off..d_off + dm.n_d()],
        );
        let mut err2 = [0.0; 3];
        let mut ref2 = [0.0; 3];
        let mid = |a: f64, b: f64| 0.5 * (a + b);
        let quad = |area: f64, e: [f64; 3]| {
            area / 3.0
                * (mid(e[0], e[1]).powi(2) + mid(e[1], e[2]).powi(2) + mid(e[2], e[0]).powi(2))
        };
        for cell in &mesh.cells {
            let [a, b, c] = cell.v;
            let pa = mesh.vertices[a].add(disp[a]);
            let pb = mesh.vertices[b].add(disp[b]);
            let pc = mesh.vertices[c].add(disp[c]);
            let ab = pb.sub(pa);
            let ac = pc.sub(pa);
            let area = 0.5 * (ab.x * ac.y - ab.y * ac.x).abs();
            match cell.region {
                CellRegion::Fluid => {
                    for k in 0..2 {
                        ref2[0] += quad(area, cell.v.map(|v| fom[dm.u_dof(v, k)]));
                        err2[0] +=
                            quad(area, cell.v.map(|v| rom[dm.u_dof(v, k)] - fom[dm.u_dof(v, k)]));
                    }
                    ref2[1] += quad(area, cell.v.map(|v| fom[dm.p_dof(v)]));
                    err2[1] += quad(area, cell.v.map(|v| rom[dm.p_dof(v)] - fom[dm.p_dof(v)]));
                }
                CellRegion::Structure => {
                    for k in 0..2 {
                        ref2[2] += quad(area, cell.v.map(|v| fom[dm.d_dof(v, k)]));
                        err2[2] +=
                            quad(area, cell.v.map(|v| rom[dm.d_dof(v, k)] - fom[dm.d_dof(v, k)]));
                    }
                }
            }
        }
        (err2, ref2)
    }

    #[test]
    fn spatial_error_matches_midpoint_quadrature_oracle() {
        let (mesh, dm) = small_benchmark();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_state(&dm, &mut rng);
        let r = random_state(&dm, &mut rng);
        let got = relative_spatial_l2(&mesh, &dm, &f, &r).unwrap();
        let (err2, ref2) = midpoint_block_norms(&mesh, &dm, &f, &r);
        let want_total =
            (err2.iter().sum::<f64>() / ref2.iter().sum::<f64>()).sqrt();
        assert!((got.total - want_total).abs() < 1e-12 * want_total.max(1.0));
        for (got_block, k) in [(got.u, 0), (got.p, 1), (got.d, 2)] {
            let want = (err2[k] / ref2[k]).sqrt();
            assert!(
                (got_block - want).abs() < 1e-12 * want.max(1.0),
                "block {k}: {got_block} vs {want}"
            );
        }
    }

    /// Relative errors are degree-0 homogeneous in the field values. The
    /// sharp form holds at fixed geometry: scaling the velocity and pressure
    /// blocks of both states (the configuration-defining displacement and
    /// mesh-motion blocks untouched) must not move any per-variable ratio.
    /// Scaling the whole state also scales the reference configuration, so
    /// the quadrature weights shift with it and the invariance is only as
    /// good as the displacement magnitude; that form gets a loose bound.
    #[test]
    fn scaling_both_states_preserves_every_ratio() {
        let (mesh, dm) = small_benchmark();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let f = random_state(&dm, &mut rng);
        let r = random_state(&dm, &mut rng);
        let base = relative_spatial_l2(&mesh, &dm, &f, &r).unwrap();

        let scale_prefix = |s: &[f64], c: f64| -> Vec<f64> {
            let mut t = s.to_vec();
            for v in t[..dm.d_offset()].iter_mut() {
                *v *= c;
            }
            t
        };
        let fixed_geometry =
            relative_spatial_l2(&mesh, &dm, &scale_prefix(&f, 3.7), &scale_prefix(&r, 3.7))
                .unwrap();
        for (a, b) in [
            (base.u, fixed_geometry.u),
            (base.p, fixed_geometry.p),
            (base.d, fixed_geometry.d),
        ] {
            assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
        }

        let fs: Vec<f64> = f.iter().map(|v| 3.7 * v).collect();
        let rs: Vec<f64> = r.iter().map(|v| 3.7 * v).collect();
        let moved_geometry = relative_spatial_l2(&mesh, &dm, &fs, &rs).unwrap();
        for (a, b) in [
            (base.total, moved_geometry.total),
            (base.u, moved_geometry.u),
            (base.p, moved_geometry.p),
            (base.d, moved_geometry.d),
        ] {
            assert!((a - b).abs() <= 1e-2 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn spacetime_error_of_proportional_trajectories_is_the_common_factor() {
        let mesh = generate_channel_mesh(1.0, 0.4, 0.1).unwrap();
        let dm = DofMap::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let fom: Vec<Vec<f64>> = (0..4).map(|_| random_state(&dm, &mut rng)).collect();
        let rom: Vec<Vec<f64>> = fom
            .iter()
            .map(|s| s.iter().map(|v| 1.07 * v).collect())
            .collect();
        let got = relative_spacetime_l2(&mesh, &dm, &fom, &rom).unwrap();
        assert!((got - 0.07).abs() < 1e-12, "spacetime error {got}");
    }

    #[test]
    fn spacetime_error_matches_hand_summed_oracle() {
        let mesh = generate_channel_mesh(1.0, 0.4, 0.1).unwrap();
        let dm = DofMap::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let fom: Vec<Vec<f64>> = (0..3).map(|_| random_state(&dm, &mut rng)).collect();
        let rom: Vec<Vec<f64>> = (0..3).map(|_| random_state(&dm, &mut rng)).collect();
        let mut err2 = 0.0;
        let mut ref2 = 0.0;
        for (f, r) in fom.iter().zip(&rom) {
            let (e, n) = midpoint_block_norms(&mesh, &dm, f, r);
            err2 += e.iter().sum::<f64>();
            ref2 += n.iter().sum::<f64>();
        }
        let want = (err2 / ref2).sqrt();
        let got = relative_spacetime_l2(&mesh, &dm, &fom, &rom).unwrap();
        assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} vs {want}");
    }

    /// With a common reference trajectory as denominator, the space-time
    /// error is a plain scaled metric and must satisfy the triangle
    /// inequality. Differences are injected as perturbations of the
    /// reference so every call shares the same normalization.
    #[test]
    fn common_reference_spacetime_error_satisfies_triangle_inequality() {
        let mesh = generate_channel_mesh(1.0, 0.4, 0.1).unwrap();
        let dm = DofMap::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let reference: Vec<Vec<f64>> = (0..3).map(|_| random_state(&dm, &mut rng)).collect();
        let a: Vec<Vec<f64>> = (0..3).map(|_| random_state(&dm, &mut rng)).collect();
        let b: Vec<Vec<f64>> = (0..3).map(|_| random_state(&dm, &mut rng)).collect();
        let c: Vec<Vec<f64>> = (0..3).map(|_| random_state(&dm, &mut rng)).collect();
        let minus = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Vec<Vec<f64>> {
            reference
                .iter()
                .zip(x.iter().zip(y))
                .map(|(r, (xs, ys))| {
                    r.iter()
                        .zip(xs.iter().zip(ys))
                        .map(|(rv, (xv, yv))| rv - (xv - yv))
                        .collect()
                })
                .collect()
        };
        let dist = |x: &[Vec<f64>], y: &[Vec<f64>]| -> f64 {
            relative_spacetime_l2(&mesh, &dm, &reference, &minus(x, y)).unwrap()
        };
        let ac = dist(&a, &c);
        let ab = dist(&a, &b);
        let bc = dist(&b, &c);
        assert!(ac <= ab + bc + 1e-12, "{ac} > {ab} + {bc}");
    }

    #[test]
    fn tip_displacement_difference_is_signed_and_exact() {
        let (mesh, dm) = small_benchmark();
        let tip = mesh
            .find_vertex_at(BenchmarkGeometry::default().point_a, 1e-9)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let fom: Vec<Vec<f64>> = (0..3).map(|_| random_state(&dm, &mut rng)).collect();
        let zero = dy_error_series(&dm, &fom, &fom, tip).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let dof = dm.d_dof(tip, 1);
        let shifted: Vec<Vec<f64>> = fom
            .iter()
            .map(|s| {
                let mut t = s.clone();
                t[dof] += 0.25;
                t
            })
            .collect();
        let err = dy_error_series(&dm, &fom, &shifted, tip).unwrap();
        assert!(err.iter().all(|&v| (v + 0.25).abs() < 1e-15));

        // A pure-fluid vertex has no displacement dof to track.
        let fluid_only = (0..mesh.n_vertices())
            .find(|&v| dm.fluid_index[v].is_some() && dm.structure_index[v].is_none())
            .unwrap();
        assert!(matches!(
            dy_series(&dm, &fom, fluid_only),
            Err(MetricsError::Mismatch(_))
        ));
    }

    #[test]
    fn zero_reference_is_rejected() {
        let (mesh, dm) = small_benchmark();
        let zero = vec![0.0; dm.n_total()];
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let r = random_state(&dm, &mut rng);
        assert!(matches!(
            relative_spatial_l2(&mesh, &dm, &zero, &r),
            Err(MetricsError::ZeroNorm)
        ));
        // Identical zeros are a valid comparison with zero error everywhere
        // except the total, which has nothing to normalize by.
        assert!(matches!(
            relative_spatial_l2(&mesh, &dm, &zero, &zero),
            Err(MetricsError::ZeroNorm)
        ));
    }

    #[test]
    fn report_bundles_all_indicators() {
        let (mesh, dm) = small_benchmark();
        let tip = mesh
            .find_vertex_at(BenchmarkGeometry::default().point_a, 1e-9)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let fom: Vec<Vec<f64>> = (0..3).map(|_| random_state(&dm, &mut rng)).collect();
        let rom: Vec<Vec<f64>> = fom
            .iter()
            .map(|s| s.iter().map(|v| 1.02 * v).collect())
            .collect();
        let times = [2.0, 2.01, 2.02];
        let report = ErrorReport::compute(&mesh, &dm, &times, &fom, &rom, Some(tip)).unwrap();
        assert_eq!(report.spatial.len(), 3);
        assert!((report.spacetime - 0.02).abs() < 1e-12);
        for s in &report.spatial {
            assert!((s.total - 0.02).abs() < 1e-12);
        }
        assert_eq!(report.dy_error.len(), 3);
        for (f, (r, e)) in report
            .dy_fom
            .iter()
            .zip(report.dy_rom.iter().zip(&report.dy_error))
        {
            assert!((f - r - e).abs() < 1e-15);
        }
    }
}
