//! Binary index files.
//!
//! Layout, little endian throughout:
//!
//! ```text
//! magic "BREG" | "BAVD"   4 bytes
//! version                 u16
//! dim, c_d                u32, u32
//! eps floor, scale        f64, f64
//! offset                  dim x f64
//! n, balls                u64, n x (dim x f64 center, f64 radius)   (unit coordinates)
//! -- AVD only --
//! k, eps, xi, zeta1, mode u64, f64, f64, f64, u8
//! stats                   7 x u64
//! sites                   u64 count, then (center, radius, u64 witness)
//! cubes                   u64 count, then (u32 level, dim x u64 coords)
//! cells                   one per cube: u8 tag, then (rep point, u64 cluster,
//!                         u64 cluster witness, f64 kdist, u64 kdist witness)
//! -- trailer --
//! sha256 of everything above   32 bytes
//! ```
//!
//! A registry file only keeps the normalized instance; the trees are rebuilt
//! on load, which is deterministic.

use std::path::Path;

use ballnn::avd::{AvdCell, AvdIndex, AvdParts, AvdStats, Mode, Site};
use ballnn::{Ball, CanonicalCube, NormalizedInstance, Registry, Transform};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const REGISTRY_MAGIC: &[u8; 4] = b"BREG";
const AVD_MAGIC: &[u8; 4] = b"BAVD";
const VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

pub enum Index {
    Registry(Registry),
    Avd { avd: AvdIndex, transform: Transform, c_d: usize },
}

impl Index {
    pub fn dim(&self) -> usize {
        match self {
            Index::Registry(reg) => reg.dim(),
            Index::Avd { avd, .. } => avd.dim(),
        }
    }

    pub fn transform(&self) -> &Transform {
        match self {
            Index::Registry(reg) => &reg.instance().transform,
            Index::Avd { transform, .. } => transform,
        }
    }

    /// Balls in unit coordinates.
    pub fn unit_balls(&self) -> &[Ball] {
        match self {
            Index::Registry(reg) => reg.balls(),
            Index::Avd { avd, .. } => avd.balls(),
        }
    }

    /// Balls mapped back to the original coordinates.
    pub fn original_balls(&self) -> Vec<Ball> {
        let t = self.transform();
        self.unit_balls().iter().map(|b| t.invert_ball(b)).collect()
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Index::Registry(_) => "registry",
            Index::Avd { .. } => "avd",
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| CliError::Integrity("index file ends early".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> CliResult<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> CliResult<u8> {
        Ok(self.array::<1>()?[0])
    }
    fn u16(&mut self) -> CliResult<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> CliResult<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn f64s(&mut self, n: usize) -> CliResult<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    /// A count whose items need at least `item_bytes` each; rejects counts
    /// the remaining bytes cannot hold before anything is allocated.
    fn count(&mut self, item_bytes: usize) -> CliResult<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(item_bytes.max(1) as u64) > left {
            return Err(CliError::Integrity(format!("count {n} exceeds the file size")));
        }
        Ok(n as usize)
    }
}

fn write_header(w: &mut Writer, magic: &[u8; 4], dim: usize, c_d: usize, eps_floor: f64, t: &Transform) {
    w.0.extend_from_slice(magic);
    w.u16(VERSION);
    w.u32(dim as u32);
    w.u32(c_d as u32);
    w.f64(eps_floor);
    w.f64(t.scale);
    w.f64s(&t.offset);
}

fn write_balls(w: &mut Writer, balls: &[Ball]) {
    w.usize(balls.len());
    for b in balls {
        w.f64s(&b.center);
        w.f64(b.radius);
    }
}

fn seal(mut w: Writer) -> Vec<u8> {
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

pub fn encode_registry(reg: &Registry) -> Vec<u8> {
    let inst = reg.instance();
    let mut w = Writer(Vec::new());
    write_header(&mut w, REGISTRY_MAGIC, inst.dim, inst.c_d, inst.epsilon_floor, &inst.transform);
    write_balls(&mut w, &inst.balls);
    seal(w)
}

pub fn encode_avd(avd: &AvdIndex, transform: &Transform, c_d: usize) -> Vec<u8> {
    let p = avd.parts();
    let mut w = Writer(Vec::new());
    write_header(&mut w, AVD_MAGIC, p.dim, c_d, p.eps, transform);
    write_balls(&mut w, &p.balls);
    w.usize(p.k);
    w.f64(p.eps);
    w.f64(p.xi);
    w.f64(p.zeta1);
    w.u8(match p.mode {
        Mode::Strict => 0,
        Mode::Practical => 1,
    });
    let s = p.stats;
    for v in [s.clusters, s.i_cubes, s.s_cubes, s.w_nodes, s.w_cells, s.refined, s.uncertified] {
        w.usize(v);
    }
    w.usize(p.sites.len());
    for site in &p.sites {
        w.f64s(&site.center);
        w.f64(site.radius);
        w.usize(site.witness);
    }
    w.usize(p.cubes.len());
    for c in &p.cubes {
        w.u32(c.level);
        c.coords.iter().for_each(|&x| w.u64(x));
    }
    for cell in &p.cells {
        match cell {
            None => w.u8(0),
            Some(c) => {
                w.u8(1);
                w.f64s(&c.rep_point);
                w.usize(c.cluster);
                w.usize(c.cluster_witness);
                w.f64(c.kdist);
                w.usize(c.kdist_witness);
            }
        }
    }
    seal(w)
}

pub fn encode(index: &Index) -> Vec<u8> {
    match index {
        Index::Registry(reg) => encode_registry(reg),
        Index::Avd { avd, transform, c_d } => encode_avd(avd, transform, *c_d),
    }
}

fn read_balls(r: &mut Reader, dim: usize) -> CliResult<Vec<Ball>> {
    let n = r.count((dim + 1) * 8)?;
    (0..n)
        .map(|_| {
            let center = r.f64s(dim)?;
            let radius = r.f64()?;
            Ball::new(center, radius).map_err(|e| CliError::Integrity(format!("bad ball: {e}")))
        })
        .collect()
}

/// Checks the digest and decodes the index. Every failure before the
/// structures are rebuilt is an integrity failure.
pub fn decode(bytes: &[u8]) -> CliResult<Index> {
    if bytes.len() < 4 + DIGEST_LEN {
        return Err(CliError::Integrity(format!("index file too short ({} bytes)", bytes.len())));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CliError::Integrity("checksum mismatch (truncated or corrupted index)".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    let magic = r.array::<4>()?;
    let version = r.u16()?;
    if version != VERSION {
        return Err(CliError::Integrity(format!("unsupported index version {version}")));
    }
    let dim = r.u32()? as usize;
    let c_d = r.u32()? as usize;
    if dim == 0 {
        return Err(CliError::Integrity("zero dimension".into()));
    }
    let eps_floor = r.f64()?;
    let scale = r.f64()?;
    let offset = r.f64s(dim)?;
    let transform = Transform { scale, offset };
    let balls = read_balls(&mut r, dim)?;
    let index = match &magic {
        REGISTRY_MAGIC => {
            let instance = NormalizedInstance { balls, transform, epsilon_floor: eps_floor, dim, c_d };
            Index::Registry(Registry::build(instance)?)
        }
        AVD_MAGIC => {
            let k = r.u64()? as usize;
            let eps = r.f64()?;
            let xi = r.f64()?;
            let zeta1 = r.f64()?;
            let mode = match r.u8()? {
                0 => Mode::Strict,
                1 => Mode::Practical,
                m => return Err(CliError::Integrity(format!("unknown mode tag {m}"))),
            };
            let mut v = [0usize; 7];
            for x in &mut v {
                *x = r.u64()? as usize;
            }
            let stats = AvdStats {
                clusters: v[0],
                i_cubes: v[1],
                s_cubes: v[2],
                w_nodes: v[3],
                w_cells: v[4],
                refined: v[5],
                uncertified: v[6],
            };
            let sites = (0..r.count((dim + 2) * 8)?)
                .map(|_| Ok(Site { center: r.f64s(dim)?, radius: r.f64()?, witness: r.u64()? as usize }))
                .collect::<CliResult<Vec<_>>>()?;
            let cubes = (0..r.count(4 + dim * 8)?)
                .map(|_| {
                    let level = r.u32()?;
                    let coords = (0..dim).map(|_| r.u64()).collect::<CliResult<Vec<_>>>()?;
                    CanonicalCube::new(level, coords).map_err(|e| CliError::Integrity(format!("bad cube: {e}")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let cells = (0..cubes.len())
                .map(|_| match r.u8()? {
                    0 => Ok(None),
                    1 => Ok(Some(AvdCell {
                        rep_point: r.f64s(dim)?,
                        cluster: r.u64()? as usize,
                        cluster_witness: r.u64()? as usize,
                        kdist: r.f64()?,
                        kdist_witness: r.u64()? as usize,
                    })),
                    t => Err(CliError::Integrity(format!("unknown cell tag {t}"))),
                })
                .collect::<CliResult<Vec<_>>>()?;
            let parts = AvdParts { dim, k, eps, xi, zeta1, mode, balls, sites, cubes, cells, stats };
            let avd = AvdIndex::from_parts(parts).map_err(|e| CliError::Integrity(e.to_string()))?;
            Index::Avd { avd, transform, c_d }
        }
        _ => return Err(CliError::Integrity("not an index file (bad magic)".into())),
    };
    if r.pos != body.len() {
        return Err(CliError::Integrity(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(index)
}

pub fn save(index: &Index, path: &Path) -> CliResult<usize> {
    let bytes = encode(index);
    std::fs::write(path, &bytes)?;
    Ok(bytes.len())
}

pub fn load(path: &Path) -> CliResult<Index> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, Profile};
    use ballnn::avd::AvdParams;
    use ballnn::normalize;

    fn registry(seed: u64, dim: usize, n: usize, eps: f64) -> Registry {
        let balls = generate(seed, dim, n, Profile::Uniform).unwrap();
        Registry::build(normalize(&balls, eps).unwrap()).unwrap()
    }

    #[test]
    fn registry_round_trip() {
        let reg = registry(1, 2, 80, 0.5);
        let bytes = encode_registry(&reg);
        let Index::Registry(back) = decode(&bytes).unwrap() else { panic!("wrong kind") };
        assert_eq!(back.instance(), reg.instance());
        assert_eq!(back.ball_tree().nodes(), reg.ball_tree().nodes());
        assert_eq!(encode_registry(&back), bytes);
    }

    #[test]
    fn avd_round_trip() {
        let reg = registry(2, 1, 60, 0.5);
        let avd = AvdIndex::build(&reg, &AvdParams::new(10, 0.5, Mode::Practical)).unwrap();
        let t = reg.instance().transform.clone();
        let bytes = encode_avd(&avd, &t, 3);
        let Index::Avd { avd: back, transform, c_d } = decode(&bytes).unwrap() else { panic!("wrong kind") };
        assert_eq!(back.parts(), avd.parts());
        assert_eq!(encode_avd(&back, &transform, c_d), bytes);
        assert_eq!((transform, c_d), (t, 3));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_registry(&registry(3, 1, 20, 0.5));
        for cut in [0, 3, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(CliError::Integrity(_))), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[10] ^= 1;
        assert!(matches!(decode(&flipped), Err(CliError::Integrity(_))));
    }
}
