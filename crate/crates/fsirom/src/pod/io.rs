//! Binary file format for a reduced model: segmentation header followed by
//! the per-segment basis triples with their eigenvalue spectra.

use std::io::{Read, Write};
use std::path::Path;

use super::{Basis, PodError, PodModel, Schedule, SegmentBases};

const MAGIC: &[u8; 8] = b"FSIPOD1\0";

fn write_u64(w: &mut impl Write, v: usize) -> Result<(), PodError> {
    w.write_all(&(v as u64).to_le_bytes())?;
    Ok(())
}

fn write_f64(w: &mut impl Write, v: f64) -> Result<(), PodError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<usize, PodError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b) as usize)
}

fn read_f64(r: &mut impl Read) -> Result<f64, PodError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn write_basis(w: &mut impl Write, b: &Basis, expect_len: usize) -> Result<(), PodError> {
    write_u64(w, b.count())?;
    write_u64(w, expect_len)?;
    write_u64(w, b.eigenvalues.len())?;
    for &e in &b.eigenvalues {
        write_f64(w, e)?;
    }
    for v in &b.vectors {
        assert_eq!(v.len(), expect_len);
        for &x in v {
            write_f64(w, x)?;
        }
    }
    Ok(())
}

fn read_basis(r: &mut impl Read, expect_len: usize) -> Result<Basis, PodError> {
    let count = read_u64(r)?;
    let len = read_u64(r)?;
    if len != expect_len {
        return Err(PodError::BadFile(format!(
            "basis vector length {len}, expected {expect_len}"
        )));
    }
    let n_eigs = read_u64(r)?;
    if count > n_eigs || n_eigs > (1 << 24) || count.saturating_mul(len) > (1 << 31) {
        return Err(PodError::BadFile("unreasonable basis sizes".into()));
    }
    let mut eigenvalues = Vec::with_capacity(n_eigs);
    for _ in 0..n_eigs {
        eigenvalues.push(read_f64(r)?);
    }
    let mut vectors = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(read_f64(r)?);
        }
        vectors.push(v);
    }
    Ok(Basis {
        vectors,
        eigenvalues,
    })
}

impl PodModel {
    pub fn save(&self, path: &Path) -> Result<(), PodError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        w.write_all(MAGIC)?;
        write_f64(&mut w, self.schedule.t_start)?;
        write_f64(&mut w, self.schedule.width)?;
        write_f64(&mut w, self.schedule.dt)?;
        write_u64(&mut w, self.schedule.n_segments)?;
        write_u64(&mut w, self.schedule.cols_per_segment)?;
        for v in [self.n_u, self.n_p, self.n_d, self.n_m] {
            write_u64(&mut w, v)?;
        }
        assert_eq!(self.segments.len(), self.schedule.n_segments);
        for seg in &self.segments {
            write_basis(&mut w, &seg.u, self.n_u)?;
            write_basis(&mut w, &seg.p, self.n_p)?;
            write_basis(&mut w, &seg.d, self.n_d)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PodModel, PodError> {
        let file = std::fs::File::open(path)?;
        let mut r = std::io::BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(PodError::BadFile("bad magic, not a basis file".into()));
        }
        let t_start = read_f64(&mut r)?;
        let width = read_f64(&mut r)?;
        let dt = read_f64(&mut r)?;
        let n_segments = read_u64(&mut r)?;
        let cols_per_segment = read_u64(&mut r)?;
        let n_u = read_u64(&mut r)?;
        let n_p = read_u64(&mut r)?;
        let n_d = read_u64(&mut r)?;
        let n_m = read_u64(&mut r)?;
        if n_segments > (1 << 20) || n_u + n_p + n_d + n_m > (1 << 28) {
            return Err(PodError::BadFile("unreasonable size fields".into()));
        }
        let mut segments = Vec::with_capacity(n_segments);
        for _ in 0..n_segments {
            segments.push(SegmentBases {
                u: read_basis(&mut r, n_u)?,
                p: read_basis(&mut r, n_p)?,
                d: read_basis(&mut r, n_d)?,
            });
        }
        Ok(PodModel {
            schedule: Schedule {
                t_start,
                width,
                dt,
                n_segments,
                cols_per_segment,
            },
            n_u,
            n_p,
            n_d,
            n_m,
            segments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{make_schedule, offline_phase, BasisSelection, SelectionRule};
    use super::*;
    use crate::fom::Trajectory;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_model() -> PodModel {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (n_u, n_p, n_d, n_m) = (8, 4, 6, 8);
        let len = n_u + n_p + n_d + n_m;
        let times: Vec<f64> = (0..9).map(|k| 0.1 * k as f64).collect();
        let states = times
            .iter()
            .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let traj = Trajectory {
            n_u,
            n_p,
            n_d,
            n_m,
            dt: 0.1,
            times,
            states,
            tracked: Vec::new(),
        };
        let schedule = make_schedule(0.0, 0.8, 0.4, 0.1).unwrap();
        let sel = BasisSelection {
            u: SelectionRule::Counts(3),
            p: SelectionRule::Counts(2),
            d: SelectionRule::FullRank,
        };
        offline_phase(&traj, &schedule, &sel).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = small_model();
        let dir = std::env::temp_dir().join("fsirom_pod_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.bin");
        model.save(&path).unwrap();
        let back = PodModel::load(&path).unwrap();
        assert_eq!(model, back);
        for (a, b) in model.segments.iter().zip(&back.segments) {
            for (va, vb) in a.u.vectors.iter().flatten().zip(b.u.vectors.iter().flatten()) {
                assert_eq!(va.to_bits(), vb.to_bits());
            }
        }
    }

    #[test]
    fn corrupt_header_is_rejected() {
        let dir = std::env::temp_dir().join("fsirom_pod_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.bin");
        std::fs::write(&path, b"WRONGMAG123").unwrap();
        assert!(PodModel::load(&path).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let model = small_model();
        let dir = std::env::temp_dir().join("fsirom_pod_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.bin");
        model.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(PodModel::load(&path).is_err());
    }
}
