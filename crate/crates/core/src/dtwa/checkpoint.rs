//! Binary ensemble snapshots: an 8-byte magic, a little-endian `u32` version,
//! `N`, `n_traj`, seed and period index as `u64`, then the spin array as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::ensemble::TrajectoryEnsemble;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GHZDTWA\0";
const VERSION: u32 = 1;

impl TrajectoryEnsemble {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for v in [self.n as u64, self.n_traj as u64, self.seed, self.period] {
            w.write_all(&v.to_le_bytes())?;
        }
        for x in &self.spins {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a DTWA checkpoint".into()));
        }
        let mut v4 = [0u8; 4];
        r.read_exact(&mut v4)?;
        let version = u32::from_le_bytes(v4);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut header = [0u64; 4];
        for h in header.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *h = u64::from_le_bytes(b);
        }
        let [n, n_traj, seed, period] = header;
        let len = (n as usize)
            .checked_mul(3)
            .and_then(|v| v.checked_mul(n_traj as usize))
            .ok_or_else(|| Error::Checkpoint("header sizes overflow".into()))?;
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Checkpoint(format!("truncated spin data: {e}")))?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after spin data".into()));
        }
        let spins = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self {
            n: n as usize,
            n_traj: n_traj as usize,
            seed,
            period,
            spins,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_checkpoint(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_checkpoint(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_coupling_matrix, Boundary, LatticeSpec, ModelParams};

    #[test]
    fn round_trip_and_resume() {
        let spec = LatticeSpec::chain(5, Boundary::Periodic).unwrap();
        let c = build_coupling_matrix(&spec, &ModelParams::unit(1.0).unwrap()).unwrap();
        let mut straight = TrajectoryEnsemble::sample_initial(5, 7, 99).unwrap();
        for _ in 0..3 {
            straight.period_step(0.1, &c).unwrap();
        }
        let mut buf = Vec::new();
        straight.write_checkpoint(&mut buf).unwrap();
        let mut resumed = TrajectoryEnsemble::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(resumed, straight);
        for _ in 0..2 {
            straight.period_step(0.1, &c).unwrap();
            resumed.period_step(0.1, &c).unwrap();
        }
        assert_eq!(resumed, straight);
        assert_eq!(resumed.period_index(), 5);
    }

    #[test]
    fn rejects_corruption() {
        let e = TrajectoryEnsemble::sample_initial(3, 2, 1).unwrap();
        let mut buf = Vec::new();
        e.write_checkpoint(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(TrajectoryEnsemble::read_checkpoint(bad.as_slice()), Err(Error::Checkpoint(_))));
        let truncated = &buf[..buf.len() - 3];
        assert!(TrajectoryEnsemble::read_checkpoint(truncated).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(TrajectoryEnsemble::read_checkpoint(long.as_slice()).is_err());
        let mut version = buf;
        version[8] = 7;
        assert!(TrajectoryEnsemble::read_checkpoint(version.as_slice()).is_err());
    }
}
