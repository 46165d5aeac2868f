//! Binary checkpoints of Yang-Mills chains and boundary field files.
//!
//! All numbers are little-endian. Matrices are written row-major, each entry
//! as real part then imaginary part (both `f64`), so SO(N) payloads carry
//! explicit zero imaginary parts.

use std::io::{Read, Write};

use thiserror::Error;

use crate::group::{Family, GroupSpec};
use crate::linalg::{Mat, C64};
use crate::seed::RngState;
use crate::sigma::{BoundaryFields, SigmaError, SigmaGraph};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"LATGCKPT";
pub const BOUNDARY_MAGIC: [u8; 8] = *b"LATGBNDY";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, not a {0} file")]
    BadMagic(&'static str),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown group family code {0}")]
    BadFamily(u8),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Sigma(#[from] SigmaError),
}

/// State needed to continue a Yang-Mills chain exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: GroupSpec,
    pub d: usize,
    pub side: usize,
    pub beta: f64,
    /// Sweeps completed so far.
    pub sweep: u64,
    pub rng: RngState,
    /// Metropolis proposal scale; 1 for heat-bath chains.
    pub proposal_scale: f64,
    /// Links in edge order.
    pub links: Vec<Mat>,
}

fn read_array<const K: usize>(r: &mut impl Read) -> Result<[u8; K], IoError> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32, IoError> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64, IoError> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64, IoError> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn write_matrices(w: &mut impl Write, mats: &[Mat]) -> Result<(), IoError> {
    for m in mats {
        for i in 0..m.n() {
            for j in 0..m.n() {
                let z = m.get(i, j);
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_matrices(r: &mut impl Read, n: usize, count: usize) -> Result<Vec<Mat>, IoError> {
    let mut out = Vec::with_capacity(count);
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    for _ in 0..count {
        for z in entries.iter_mut() {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            *z = C64::new(re, im);
        }
        out.push(Mat::from_rows(n, &entries));
    }
    Ok(out)
}

fn to_u32(x: usize, what: &str) -> Result<u32, IoError> {
    u32::try_from(x).map_err(|_| IoError::Malformed(format!("{what} = {x} does not fit in u32")))
}

impl Checkpoint {
    /// Header: magic, version, d, L, family, N, beta, sweep, rng key,
    /// stream, word position, proposal scale; then the link payload.
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), IoError> {
        w.write_all(&CHECKPOINT_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&to_u32(self.d, "d")?.to_le_bytes())?;
        w.write_all(&to_u32(self.side, "L")?.to_le_bytes())?;
        w.write_all(&[self.spec.family().code()])?;
        w.write_all(&to_u32(self.spec.n(), "N")?.to_le_bytes())?;
        w.write_all(&self.beta.to_le_bytes())?;
        w.write_all(&self.sweep.to_le_bytes())?;
        w.write_all(&self.rng.seed)?;
        w.write_all(&self.rng.stream.to_le_bytes())?;
        w.write_all(&self.rng.word_pos.to_le_bytes())?;
        w.write_all(&self.proposal_scale.to_le_bytes())?;
        w.write_all(&(self.links.len() as u64).to_le_bytes())?;
        write_matrices(w, &self.links)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, IoError> {
        if read_array::<8>(r)? != CHECKPOINT_MAGIC {
            return Err(IoError::BadMagic("checkpoint"));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(IoError::UnsupportedVersion(version));
        }
        let d = read_u32(r)? as usize;
        let side = read_u32(r)? as usize;
        let code = read_array::<1>(r)?[0];
        let family = Family::from_code(code).ok_or(IoError::BadFamily(code))?;
        let n = read_u32(r)? as usize;
        let spec = GroupSpec::new(family, n).map_err(|e| IoError::Malformed(e.to_string()))?;
        let beta = read_f64(r)?;
        let sweep = read_u64(r)?;
        let seed = read_array::<32>(r)?;
        let stream = read_u64(r)?;
        let word_pos = u128::from_le_bytes(read_array(r)?);
        let proposal_scale = read_f64(r)?;
        let count = read_u64(r)? as usize;
        let expected = d.checked_mul(side.checked_pow(d as u32).unwrap_or(usize::MAX));
        if expected != Some(count) {
            return Err(IoError::Malformed(format!(
                "{count} links for d = {d}, L = {side}"
            )));
        }
        let links = read_matrices(r, n, count)?;
        Ok(Self {
            spec,
            d,
            side,
            beta,
            sweep,
            rng: RngState {
                seed,
                stream,
                word_pos,
            },
            proposal_scale,
            links,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), IoError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, IoError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r)
    }
}

/// Boundary file: magic, version, N, edge count, then an `A` section and a
/// `B` section, each a one-byte tag followed by the matrix payload.
pub fn write_boundary(w: &mut impl Write, bc: &BoundaryFields) -> Result<(), IoError> {
    w.write_all(&BOUNDARY_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(bc.n(), "N")?.to_le_bytes())?;
    w.write_all(&(bc.a_all().len() as u64).to_le_bytes())?;
    w.write_all(b"A")?;
    write_matrices(w, bc.a_all())?;
    w.write_all(b"B")?;
    write_matrices(w, bc.b_all())
}

pub fn read_boundary(r: &mut impl Read, graph: &SigmaGraph) -> Result<BoundaryFields, IoError> {
    if read_array::<8>(r)? != BOUNDARY_MAGIC {
        return Err(IoError::BadMagic("boundary"));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let n = read_u32(r)? as usize;
    let count = read_u64(r)? as usize;
    if count != graph.n_edges() {
        return Err(IoError::Malformed(format!(
            "{count} boundary edges, graph has {}",
            graph.n_edges()
        )));
    }
    let mut section = |tag: u8| -> Result<Vec<Mat>, IoError> {
        let got = read_array::<1>(r)?[0];
        if got != tag {
            return Err(IoError::Malformed(format!(
                "expected section {}, found byte {got}",
                tag as char
            )));
        }
        read_matrices(r, n, count)
    };
    let a = section(b'A')?;
    let b = section(b'B')?;
    Ok(BoundaryFields::from_matrices(graph, a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TorusLattice;
    use crate::seed::chain_rng;
    use crate::ym::{Algorithm, GaugeField, YmParams, YmSampler};
    use std::sync::Arc;

    fn sampler(spec: GroupSpec, alg: Algorithm) -> YmSampler {
        let lat = Arc::new(TorusLattice::new(3, 3).unwrap());
        let p = YmParams::new(spec, 0.08, lat.clone()).unwrap();
        YmSampler::new(p, GaugeField::identity(spec, &lat), alg, 0.5).unwrap()
    }

    fn checkpoint_of(s: &YmSampler, sweep: u64, rng: &rand_chacha::ChaCha8Rng) -> Checkpoint {
        let lat = s.params().lattice();
        Checkpoint {
            spec: s.params().spec(),
            d: lat.d(),
            side: lat.side(),
            beta: s.params().beta(),
            sweep,
            rng: RngState::capture(rng),
            proposal_scale: s.scale(),
            links: s.field().links().to_vec(),
        }
    }

    /// save, load, continue for 50 sweeps == 100 uninterrupted sweeps
    #[test]
    fn resume_is_bit_exact() {
        for (spec, alg) in [
            (GroupSpec::su(2), Algorithm::HeatBath),
            (GroupSpec::su(3), Algorithm::Metropolis),
            (GroupSpec::so(3), Algorithm::Metropolis),
        ] {
            let burn = 30;
            let mut full = sampler(spec, alg);
            let mut rng = chain_rng(11, 0);
            for s in 1..=100u64 {
                full.sweep(&mut rng, s <= burn);
            }

            let mut first = sampler(spec, alg);
            let mut rng = chain_rng(11, 0);
            for s in 1..=50u64 {
                first.sweep(&mut rng, s <= burn);
            }
            let mut bytes = Vec::new();
            checkpoint_of(&first, 50, &rng).write_to(&mut bytes).unwrap();
            drop(first);

            let ck = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
            let lat = Arc::new(TorusLattice::new(ck.d, ck.side).unwrap());
            let p = YmParams::new(ck.spec, ck.beta, lat.clone()).unwrap();
            let field = GaugeField::from_matrices(ck.spec, &lat, ck.links.clone()).unwrap();
            let mut resumed = YmSampler::new(p, field, alg, ck.proposal_scale).unwrap();
            let mut rng = ck.rng.restore();
            for s in ck.sweep + 1..=100 {
                resumed.sweep(&mut rng, s <= burn);
            }
            assert_eq!(resumed.field().links(), full.field().links(), "{spec}");
            assert_eq!(resumed.scale().to_bits(), full.scale().to_bits());
        }
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let s = sampler(GroupSpec::su(2), Algorithm::HeatBath);
        let mut bytes = Vec::new();
        checkpoint_of(&s, 0, &chain_rng(0, 0)).write_to(&mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::read_from(&mut bad.as_slice()), Err(IoError::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(
            Checkpoint::read_from(&mut bad.as_slice()),
            Err(IoError::UnsupportedVersion(9))
        ));
        let short = &bytes[..bytes.len() - 3];
        assert!(Checkpoint::read_from(&mut &short[..]).is_err());
    }

    #[test]
    fn boundary_round_trip() {
        let g = SigmaGraph::torus(2, 3).unwrap();
        let mut rng = chain_rng(3, 0);
        let bc = BoundaryFields::haar(&g, 3, &mut rng);
        let mut bytes = Vec::new();
        write_boundary(&mut bytes, &bc).unwrap();
        let back = read_boundary(&mut bytes.as_slice(), &g).unwrap();
        assert_eq!(back.a_all(), bc.a_all());
        assert_eq!(back.b_all(), bc.b_all());
        let other = SigmaGraph::torus(1, 4).unwrap();
        assert!(read_boundary(&mut bytes.as_slice(), &other).is_err());
    }
}
