//! Time-history container for full-order states plus its binary file format.
//! States store the complete vector [u | p | d | m] per recorded step.

use std::io::{Read, Write};
use std::path::Path;

use super::FomError;

const MAGIC: &[u8; 8] = b"FSITRAJ1";

/// Recorded states of a simulation run plus the tracked-point displacement
/// series. `states[k]` is the full vector at `times[k]`; the tracked series
/// has one entry per time step regardless of the snapshot stride.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_u: usize,
    pub n_p: usize,
    pub n_d: usize,
    pub n_m: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// (time, x displacement, y displacement) of the tracked vertex.
    pub tracked: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn state_len(&self) -> usize {
        self.n_u + self.n_p + self.n_d + self.n_m
    }

    /// Index of the recorded state at time `t`. The tolerance only absorbs
    /// round-off in time arithmetic; a state half a step away is a miss.
    pub fn index_at_time(&self, t: f64) -> Result<usize, FomError> {
        let mut best = None;
        for (k, &tk) in self.times.iter().enumerate() {
            let err = (tk - t).abs();
            if best.map_or(true, |(_, e)| err < e) {
                best = Some((k, err));
            }
        }
        match best {
            Some((k, e)) if e <= 1e-9 * t.abs().max(1.0) => Ok(k),
            _ => Err(FomError::BadTrajectory(format!(
                "no recorded state at t = {t}"
            ))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), FomError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        w.write_all(MAGIC)?;
        for v in [
            self.n_u,
            self.n_p,
            self.n_d,
            self.n_m,
            self.states.len(),
            self.tracked.len(),
        ] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&self.dt.to_le_bytes())?;
        let len = self.state_len();
        for (t, s) in self.times.iter().zip(&self.states) {
            assert_eq!(s.len(), len);
            w.write_all(&t.to_le_bytes())?;
            for x in s {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        for e in &self.tracked {
            for x in e {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Trajectory, FomError> {
        let file = std::fs::File::open(path)?;
        let mut r = std::io::BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(FomError::BadTrajectory(
                "bad magic, not a trajectory file".into(),
            ));
        }
        let mut u64s = [0usize; 6];
        for v in &mut u64s {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = u64::from_le_bytes(b) as usize;
        }
        let [n_u, n_p, n_d, n_m, n_states, n_tracked] = u64s;
        let state_len = n_u + n_p + n_d + n_m;
        let total = n_states
            .checked_mul(state_len + 1)
            .and_then(|v| v.checked_add(3 * n_tracked));
        match total {
            Some(words) if words < (1usize << 31) => {}
            _ => {
                return Err(FomError::BadTrajectory(
                    "unreasonable size fields".into(),
                ))
            }
        }
        let read_f64 = |r: &mut std::io::BufReader<std::fs::File>| -> Result<f64, FomError> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let dt = read_f64(&mut r)?;
        let mut times = Vec::with_capacity(n_states);
        let mut states = Vec::with_capacity(n_states);
        for _ in 0..n_states {
            times.push(read_f64(&mut r)?);
            let mut s = Vec::with_capacity(state_len);
            for _ in 0..state_len {
                s.push(read_f64(&mut r)?);
            }
            states.push(s);
        }
        let mut tracked = Vec::with_capacity(n_tracked);
        for _ in 0..n_tracked {
            let mut e = [0.0; 3];
            for x in &mut e {
                *x = read_f64(&mut r)?;
            }
            tracked.push(e);
        }
        Ok(Trajectory {
            n_u,
            n_p,
            n_d,
            n_m,
            dt,
            times,
            states,
            tracked,
        })
    }
}
