//! CLM2 binary snapshots.
//!
//! Layout, all integers `u32` and all reals `f64`, little-endian:
//! magic `"CLM2"`, version, dim, n (points per axis), domain tag, three domain
//! parameters, payload kind (0 = f64 values, 1 = u8 mask), component count,
//! then the payload row-major with the last axis fastest, one full grid per
//! component. Ellipse fields are stored on the whole bounding box with zeros
//! outside the domain.

use std::io::{Read, Write};
use std::path::Path;

use clmlab_core::dynamics::State;
use clmlab_core::models::Space;

use crate::error::{io_err, CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"CLM2";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainTag {
    Rectangle,
    Ellipse { a: f64, b: f64, c: f64 },
    Torus { lengths: [f64; 3] },
}

impl DomainTag {
    fn code(&self) -> u32 {
        match self {
            DomainTag::Rectangle => 0,
            DomainTag::Ellipse { .. } => 1,
            DomainTag::Torus { .. } => 2,
        }
    }

    fn params(&self) -> [f64; 3] {
        match *self {
            DomainTag::Rectangle => [std::f64::consts::PI; 3],
            DomainTag::Ellipse { a, b, c } => [a, b, c],
            DomainTag::Torus { lengths } => lengths,
        }
    }

    fn from_code(code: u32, p: [f64; 3]) -> Option<Self> {
        match code {
            0 => Some(DomainTag::Rectangle),
            1 => Some(DomainTag::Ellipse { a: p[0], b: p[1], c: p[2] }),
            2 => Some(DomainTag::Torus { lengths: p }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Values(Vec<Vec<f64>>),
    Mask(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub dim: u32,
    pub n: u32,
    pub domain: DomainTag,
    pub payload: Payload,
}

fn bad(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Snapshot { path: path.to_path_buf(), message: message.into() }
}

/// Grid shape and tag of a space: `(dim, n, tag)`.
pub fn layout(space: &Space) -> (u32, u32, DomainTag) {
    match space {
        Space::Rectangle(st) => (2, st.n() as u32, DomainTag::Rectangle),
        Space::Ellipse(s) => {
            let d = s.grid().domain;
            (2, s.grid().n as u32, DomainTag::Ellipse { a: d.a, b: d.b, c: d.c })
        }
        Space::Torus(tf) => {
            let bx = tf.periodic_box();
            (bx.dim as u32, bx.n as u32, DomainTag::Torus { lengths: bx.lengths })
        }
    }
}

impl SnapshotFile {
    pub fn points(&self) -> usize {
        (self.n as usize).pow(self.dim)
    }

    /// Snapshot of a state on `space`.
    pub fn from_state(space: &Space, state: &[Vec<f64>]) -> Self {
        let (dim, n, domain) = layout(space);
        let comps = state
            .iter()
            .map(|c| match space {
                Space::Ellipse(s) => {
                    let g = s.grid();
                    let mut full = vec![0.0; g.n * g.n];
                    for (&node, v) in g.interior_nodes().iter().zip(c) {
                        full[node] = *v;
                    }
                    full
                }
                _ => c.clone(),
            })
            .collect();
        Self { dim, n, domain, payload: Payload::Values(comps) }
    }

    pub fn mask(space: &Space, mask: &[bool]) -> Self {
        let (dim, n, domain) = layout(space);
        Self { dim, n, domain, payload: Payload::Mask(mask.iter().map(|b| *b as u8).collect()) }
    }

    /// Field values on `space`, checking the header against it.
    pub fn to_state(&self, space: &Space, components: usize, path: &Path) -> CliResult<State> {
        let (dim, n, domain) = layout(space);
        if (dim, n) != (self.dim, self.n) || domain != self.domain {
            return Err(bad(
                path,
                format!(
                    "snapshot grid (dim {}, n {}, {:?}) does not match the configured domain (dim {dim}, n {n}, {domain:?})",
                    self.dim, self.n, self.domain
                ),
            ));
        }
        let Payload::Values(comps) = &self.payload else {
            return Err(bad(path, "expected field values, found a mask"));
        };
        if comps.len() != components {
            return Err(bad(path, format!("expected {components} component(s), found {}", comps.len())));
        }
        Ok(comps
            .iter()
            .map(|c| match space {
                Space::Ellipse(s) => s.grid().interior_nodes().iter().map(|&node| c[node]).collect(),
                _ => c.clone(),
            })
            .collect())
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.dim, self.n, self.domain.code()] {
            w.write_all(&v.to_le_bytes())?;
        }
        for p in self.domain.params() {
            w.write_all(&p.to_le_bytes())?;
        }
        match &self.payload {
            Payload::Values(comps) => {
                w.write_all(&0u32.to_le_bytes())?;
                w.write_all(&(comps.len() as u32).to_le_bytes())?;
                let mut buf = Vec::with_capacity(8 * comps.iter().map(Vec::len).sum::<usize>());
                comps.iter().flatten().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
                w.write_all(&buf)?;
            }
            Payload::Mask(m) => {
                w.write_all(&1u32.to_le_bytes())?;
                w.write_all(&1u32.to_le_bytes())?;
                w.write_all(m)?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read, path: &Path) -> CliResult<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(io_err(path))?;
        let mut pos = 0usize;
        let mut take = |len: usize| -> CliResult<&[u8]> {
            let s = bytes.get(pos..pos + len).ok_or_else(|| bad(path, "truncated snapshot"))?;
            pos += len;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad(path, "not a CLM2 snapshot (bad magic)"));
        }
        let mut u32s = [0u32; 4];
        for v in &mut u32s {
            *v = u32::from_le_bytes(take(4)?.try_into().unwrap());
        }
        let [version, dim, n, code] = u32s;
        if version != VERSION {
            return Err(bad(path, format!("unsupported snapshot version {version}")));
        }
        if !(1..=3).contains(&dim) || n == 0 {
            return Err(bad(path, format!("invalid grid: dim {dim}, n {n}")));
        }
        let mut params = [0.0; 3];
        for p in &mut params {
            *p = f64::from_le_bytes(take(8)?.try_into().unwrap());
        }
        let domain =
            DomainTag::from_code(code, params).ok_or_else(|| bad(path, format!("unknown domain tag {code}")))?;
        let kind = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let comps = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let points = (n as usize).checked_pow(dim).ok_or_else(|| bad(path, "grid too large"))?;
        let payload = match kind {
            0 => {
                let data = take(8 * points * comps)?;
                let values: Vec<f64> =
                    data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
                Payload::Values(values.chunks(points).map(<[f64]>::to_vec).collect())
            }
            1 => {
                if comps != 1 {
                    return Err(bad(path, "masks have exactly one component"));
                }
                Payload::Mask(take(points)?.to_vec())
            }
            k => return Err(bad(path, format!("unknown payload kind {k}"))),
        };
        if pos != bytes.len() {
            return Err(bad(path, "trailing bytes after payload"));
        }
        Ok(Self { dim, n, domain, payload })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        Self::read_from(std::io::BufReader::new(file), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clmlab_core::geometry::{EllipseDomain, PeriodicBox};

    #[test]
    fn header_layout() {
        let space = Space::torus(PeriodicBox::new(1, 8).unwrap());
        let snap = SnapshotFile::from_state(&space, &[vec![1.5; 8]]);
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CLM2");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 20 + 24 + 8 + 64);
        assert_eq!(f64::from_le_bytes(buf[52..60].try_into().unwrap()), 1.5);
    }

    #[test]
    fn ellipse_round_trip_through_full_grid() {
        let space = Space::ellipse(EllipseDomain::new(1.0, 0.3, 2.0).unwrap(), 16).unwrap();
        let state = vec![space.sample(|x| x[0] - 0.1 * x[1])];
        let snap = SnapshotFile::from_state(&space, &state);
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        let back = SnapshotFile::read_from(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.to_state(&space, 1, Path::new("mem")).unwrap(), state);
        assert!(back.to_state(&space, 2, Path::new("mem")).is_err());
        let other = Space::ellipse(EllipseDomain::unit_disk(), 16).unwrap();
        assert!(back.to_state(&other, 1, Path::new("mem")).is_err());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let space = Space::rectangle(4).unwrap();
        let mut buf = Vec::new();
        SnapshotFile::mask(&space, &[true; 16]).write_to(&mut buf).unwrap();
        assert!(SnapshotFile::read_from(&buf[..buf.len() - 1], Path::new("m")).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(SnapshotFile::read_from(&extra[..], Path::new("m")).is_err());
        buf[0] = b'X';
        let e = SnapshotFile::read_from(&buf[..], Path::new("m")).unwrap_err();
        assert!(e.to_string().contains("magic"));
    }
}
