//! Offline reduction: time-segmented proper orthogonal decomposition of a
//! recorded trajectory. The time axis is cut into equal segments that share
//! their endpoint snapshots; each segment gets its own basis per variable
//! block (velocity, pressure, displacement), built from the eigenvectors of
//! the snapshot correlation matrix. The mesh displacement block is never
//! reduced; the online stage carries it at full order.

mod io;

use rayon::prelude::*;

use crate::fom::Trajectory;
use crate::numerics::{sym_eig_descending, DenseMatrix, NumericsError};

/// Relative eigenvalue cutoff: modes below this fraction of the leading
/// eigenvalue count as numerical rank deficiency.
const RANK_CUTOFF: f64 = 1e-12;

/// Orthonormality defect above which the basis is re-orthonormalized.
const ORTHO_TOL: f64 = 1e-11;

#[derive(Debug)]
pub enum PodError {
    NonDivisible(String),
    MissingState(String),
    InsufficientRank { requested: usize, available: usize },
    ZeroEnergy,
    BadSelection(String),
    Numerics(NumericsError),
    Io(std::io::Error),
    BadFile(String),
}

impl std::fmt::Display for PodError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PodError::NonDivisible(m) => write!(f, "schedule: {m}"),
            PodError::MissingState(m) => write!(f, "missing state: {m}"),
            PodError::InsufficientRank {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} modes but snapshots have rank {available}"
            ),
            PodError::ZeroEnergy => write!(f, "snapshot set carries no energy"),
            PodError::BadSelection(m) => write!(f, "bad selection rule: {m}"),
            PodError::Numerics(e) => write!(f, "eigensolver: {e}"),
            PodError::Io(e) => write!(f, "io: {e}"),
            PodError::BadFile(m) => write!(f, "bad basis file: {m}"),
        }
    }
}

impl std::error::Error for PodError {}

impl From<NumericsError> for PodError {
    fn from(e: NumericsError) -> Self {
        PodError::Numerics(e)
    }
}

impl From<std::io::Error> for PodError {
    fn from(e: std::io::Error) -> Self {
        PodError::Io(e)
    }
}

/// Equal-width segmentation of a time window. Neighbouring segments share
/// their endpoint snapshot, so a segment of width w sampled at dt carries
/// w/dt + 1 columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub t_start: f64,
    pub width: f64,
    pub dt: f64,
    pub n_segments: usize,
    pub cols_per_segment: usize,
}

impl Schedule {
    pub fn segment_start(&self, g: usize) -> f64 {
        self.t_start + g as f64 * self.width
    }

    pub fn segment_end(&self, g: usize) -> f64 {
        self.t_start + (g + 1) as f64 * self.width
    }

    /// Snapshot times of segment g, endpoints included.
    pub fn segment_times(&self, g: usize) -> Vec<f64> {
        let t0 = self.segment_start(g);
        (0..self.cols_per_segment)
            .map(|j| t0 + j as f64 * self.dt)
            .collect()
    }

    /// Segment that owns time t for the online sweep: segment boundaries
    /// belong to the segment they start.
    pub fn segment_of(&self, t: f64) -> Option<usize> {
        if t < self.t_start - 1e-9 {
            return None;
        }
        let g = ((t - self.t_start) / self.width + 1e-9).floor() as usize;
        if g < self.n_segments {
            Some(g)
        } else if (t - (self.t_start + self.n_segments as f64 * self.width)).abs() < 1e-9 {
            Some(self.n_segments - 1)
        } else {
            None
        }
    }
}

/// Builds the segmentation of [t_start, t_end] into segments of the given
/// width sampled at dt. Both divisions must be whole within round-off.
pub fn make_schedule(
    t_start: f64,
    t_end: f64,
    width: f64,
    dt: f64,
) -> Result<Schedule, PodError> {
    if !(width > 0.0) || !(dt > 0.0) || !(t_end > t_start) {
        return Err(PodError::NonDivisible(
            "window and spacings must be positive".into(),
        ));
    }
    let segs = ((t_end - t_start) / width).round();
    if segs < 1.0 || (segs * width - (t_end - t_start)).abs() > 1e-6 * (t_end - t_start).max(1.0) {
        return Err(PodError::NonDivisible(format!(
            "segment width {width} does not divide the window [{t_start}, {t_end}]"
        )));
    }
    let cols = (width / dt).round();
    if cols < 1.0 || (cols * dt - width).abs() > 1e-9 * width.max(1.0) {
        return Err(PodError::NonDivisible(format!(
            "snapshot spacing {dt} does not divide the segment width {width}"
        )));
    }
    Ok(Schedule {
        t_start,
        width,
        dt,
        n_segments: segs as usize,
        cols_per_segment: cols as usize + 1,
    })
}

/// How many modes to keep out of a snapshot set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    /// Fixed mode count.
    Counts(usize),
    /// Smallest count whose cumulative eigenvalue share reaches the target.
    Energy(f64),
    /// Everything above the rank cutoff.
    FullRank,
}

impl SelectionRule {
    fn resolve(&self, eigenvalues: &[f64], rank: usize) -> Result<usize, PodError> {
        match *self {
            SelectionRule::Counts(n) => {
                if n == 0 {
                    return Err(PodError::BadSelection("mode count must be >= 1".into()));
                }
                Ok(n)
            }
            SelectionRule::Energy(target) => {
                if !(target > 0.0 && target <= 1.0) {
                    return Err(PodError::BadSelection(format!(
                        "energy target {target} outside (0, 1]"
                    )));
                }
                let total: f64 = eigenvalues.iter().sum();
                if !(total > 0.0) {
                    return Err(PodError::ZeroEnergy);
                }
                let mut acc = 0.0;
                for (k, lam) in eigenvalues.iter().enumerate() {
                    acc += lam;
                    if acc >= target * total {
                        return Ok((k + 1).min(rank).max(1));
                    }
                }
                Ok(rank)
            }
            SelectionRule::FullRank => Ok(rank),
        }
    }
}

/// An orthonormal basis for one variable block on one segment, together with
/// the full correlation spectrum it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    /// Orthonormal columns, each of the block's full-order length.
    pub vectors: Vec<Vec<f64>>,
    /// All correlation eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl Basis {
    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    pub fn len(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Reduced coordinates of a full-order block vector.
    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|v| v.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Full-order block vector from reduced coordinates.
    pub fn expand(&self, a: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for (vk, ak) in self.vectors.iter().zip(a) {
            for (xi, vi) in x.iter_mut().zip(vk) {
                *xi += ak * vi;
            }
        }
        x
    }
}

/// Snapshot correlation matrix C_ij = x_i . x_j in the plain Euclidean inner
/// product.
pub fn correlation(columns: &[Vec<f64>]) -> DenseMatrix {
    let n = columns.len();
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
            c.set(i, j, v);
            c.set(j, i, v);
        }
    }
    c
}

/// Builds the POD basis of a snapshot set, keeping as many modes as the rule
/// asks for. Modes are eigenvectors of the correlation matrix mapped back
/// through the snapshots and normalized.
pub fn pod_basis(columns: &[Vec<f64>], rule: SelectionRule) -> Result<Basis, PodError> {
    if columns.is_empty() {
        return Err(PodError::MissingState("empty snapshot set".into()));
    }
    let c = correlation(columns);
    let (eigenvalues, q) = sym_eig_descending(&c)?;
    let lead = eigenvalues[0];
    if !(lead > 0.0) {
        return Err(PodError::ZeroEnergy);
    }
    let rank = eigenvalues
        .iter()
        .take_while(|&&lam| lam > RANK_CUTOFF * lead)
        .count();
    let count = rule.resolve(&eigenvalues, rank)?;
    if count > rank {
        return Err(PodError::InsufficientRank {
            requested: count,
            available: rank,
        });
    }

    let len = columns[0].len();
    let mut vectors = Vec::with_capacity(count);
    for k in 0..count {
        let scale = 1.0 / eigenvalues[k].sqrt();
        let mut v = vec![0.0; len];
        for (j, col) in columns.iter().enumerate() {
            let w = q.get(j, k) * scale;
            for (vi, ci) in v.iter_mut().zip(col) {
                *vi += w * ci;
            }
        }
        vectors.push(v);
    }

    if orthonormality_defect(&vectors) > ORTHO_TOL {
        reorthonormalize(&mut vectors)?;
    }
    Ok(Basis {
        vectors,
        eigenvalues,
    })
}

fn orthonormality_defect(vectors: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..vectors.len() {
        for j in i..vectors.len() {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Modified Gram-Schmidt, two passes for stability.
fn reorthonormalize(vectors: &mut [Vec<f64>]) -> Result<(), PodError> {
    let n = vectors.len();
    for _pass in 0..2 {
        for k in 0..n {
            for j in 0..k {
                let dot: f64 = vectors[j].iter().zip(&vectors[k]).map(|(a, b)| a * b).sum();
                let (head, tail) = vectors.split_at_mut(k);
                for (vk, vj) in tail[0].iter_mut().zip(&head[j]) {
                    *vk -= dot * vj;
                }
            }
            let norm: f64 = vectors[k].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-14 {
                return Err(PodError::InsufficientRank {
                    requested: n,
                    available: k,
                });
            }
            for v in vectors[k].iter_mut() {
                *v /= norm;
            }
        }
    }
    Ok(())
}

/// Share of the correlation energy captured by the first `count` modes.
pub fn energy_proportion(eigenvalues: &[f64], count: usize) -> Result<f64, PodError> {
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(PodError::ZeroEnergy);
    }
    Ok(eigenvalues.iter().take(count).sum::<f64>() / total)
}

/// Sum of squared projection residuals of the columns onto the basis.
pub fn projection_error_sq(columns: &[Vec<f64>], vectors: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for col in columns {
        let mut residual = col.clone();
        for v in vectors {
            let dot: f64 = v.iter().zip(col).map(|(a, b)| a * b).sum();
            for (r, vi) in residual.iter_mut().zip(v) {
                *r -= dot * vi;
            }
        }
        acc += residual.iter().map(|r| r * r).sum::<f64>();
    }
    acc
}

/// Per-variable mode selection for the offline phase.
#[derive(Debug, Clone, Copy)]
pub struct BasisSelection {
    pub u: SelectionRule,
    pub p: SelectionRule,
    pub d: SelectionRule,
}

/// Bases of a single time segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentBases {
    pub u: Basis,
    pub p: Basis,
    pub d: Basis,
}

/// The complete reduced model: the segmentation plus one basis triple per
/// segment. Mesh displacement stays full-order.
#[derive(Debug, Clone, PartialEq)]
pub struct PodModel {
    pub schedule: Schedule,
    pub n_u: usize,
    pub n_p: usize,
    pub n_d: usize,
    pub n_m: usize,
    pub segments: Vec<SegmentBases>,
}

/// Snapshot columns of one variable block over one segment.
fn block_columns(
    traj: &Trajectory,
    schedule: &Schedule,
    g: usize,
    lo: usize,
    hi: usize,
) -> Result<Vec<Vec<f64>>, PodError> {
    schedule
        .segment_times(g)
        .iter()
        .map(|&t| {
            let k = traj
                .index_at_time(t)
                .map_err(|_| PodError::MissingState(format!("no snapshot at t = {t}")))?;
            Ok(traj.states[k][lo..hi].to_vec())
        })
        .collect()
}

/// Runs the whole offline phase: per segment (in parallel), per variable
/// block, build the POD basis with the requested selection.
pub fn offline_phase(
    traj: &Trajectory,
    schedule: &Schedule,
    selection: &BasisSelection,
) -> Result<PodModel, PodError> {
    let (n_u, n_p, n_d, n_m) = (traj.n_u, traj.n_p, traj.n_d, traj.n_m);
    let segments: Result<Vec<SegmentBases>, PodError> = (0..schedule.n_segments)
        .into_par_iter()
        .map(|g| {
            let u_cols = block_columns(traj, schedule, g, 0, n_u)?;
            let p_cols = block_columns(traj, schedule, g, n_u, n_u + n_p)?;
            let d_cols = block_columns(traj, schedule, g, n_u + n_p, n_u + n_p + n_d)?;
            Ok(SegmentBases {
                u: pod_basis(&u_cols, selection.u)?,
                p: pod_basis(&p_cols, selection.p)?,
                d: pod_basis(&d_cols, selection.d)?,
            })
        })
        .collect();
    Ok(PodModel {
        schedule: schedule.clone(),
        n_u,
        n_p,
        n_d,
        n_m,
        segments: segments?,
    })
}
