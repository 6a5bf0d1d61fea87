//! File formats: sampled surfaces, binary fields, CSV tables and manifests.
//!
//! Binary field layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `EKMFIELD` |
//! | 4     | `u32` format version (1) |
//! | 32    | `u64` Nx, Ny, Nz (vertical node count), ncomp |
//! | 40    | `f64` Lx, Ly, eps, nu, time |
//! | 8 Nz  | `f64` vertical nodes `zeta_k` |
//! | 8 ncomp Nx Ny Nz | `f64` components, each stored as `[(i * Ny + j) * Nz + k]` |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::SurfaceField;
use crate::spectral::Grid;

const MAGIC: &[u8; 8] = b"EKMFIELD";
const VERSION: u32 = 1;

/// Read a sampled surface: header `Nx Ny Lx Ly`, then `Nx * Ny` samples, `y` fastest.
pub fn read_surface(path: &Path) -> Result<SurfaceField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_surface(&text, &path.display().to_string())
}

pub fn parse_surface(text: &str, origin: &str) -> Result<SurfaceField> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let mut next = |what: &str| -> Result<&str> {
        tokens.next().ok_or_else(|| Error::Format(format!("{origin}: missing {what}")))
    };
    let nx: usize = next("Nx")?.parse().map_err(|_| Error::Format(format!("{origin}: Nx is not an integer")))?;
    let ny: usize = next("Ny")?.parse().map_err(|_| Error::Format(format!("{origin}: Ny is not an integer")))?;
    let lx: f64 = next("Lx")?.parse().map_err(|_| Error::Format(format!("{origin}: Lx is not a number")))?;
    let ly: f64 = next("Ly")?.parse().map_err(|_| Error::Format(format!("{origin}: Ly is not a number")))?;
    let grid = Grid::new(nx, ny, lx, ly)?;
    let mut samples = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let tok = next("sample")?;
        samples.push(
            tok.parse::<f64>()
                .map_err(|_| Error::Format(format!("{origin}: sample {n} `{tok}` is not a number")))?,
        );
    }
    if tokens.next().is_some() {
        return Err(Error::Format(format!("{origin}: more than {} samples", grid.len())));
    }
    SurfaceField::from_samples(grid, samples, origin)
}

/// Write a surface in the text format read by [`read_surface`].
pub fn write_surface(path: &Path, s: &SurfaceField) -> Result<()> {
    let mut out = format!("{} {} {:e} {:e}\n", s.grid.nx, s.grid.ny, s.grid.lx, s.grid.ly);
    for i in 0..s.grid.nx {
        let row: Vec<String> = (0..s.grid.ny).map(|j| format!("{:e}", s.samples[s.grid.index(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

/// A 3D field on a terrain-following grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub grid: Grid,
    pub zeta: Vec<f64>,
    pub eps: f64,
    pub nu: f64,
    pub time: f64,
    pub components: Vec<Vec<f64>>,
}

impl FieldFile {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let npts = self.grid.len() * self.zeta.len();
        if let Some(c) = self.components.iter().find(|c| c.len() != npts) {
            return Err(Error::Mismatch(format!("component has {} values, expected {npts}", c.len())));
        }
        let mut b = Vec::with_capacity(8 + 4 + 72 + 8 * (self.zeta.len() + npts * self.components.len()));
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.grid.nx, self.grid.ny, self.zeta.len(), self.components.len()] {
            b.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for v in [self.grid.lx, self.grid.ly, self.eps, self.nu, self.time] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.zeta.iter().chain(self.components.iter().flatten()) {
            b.extend_from_slice(&v.to_le_bytes());
        }
        Ok(b)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes
                .get(pos..pos + n)
                .ok_or_else(|| Error::Format(format!("field file truncated at byte {pos}")))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != MAGIC {
            return Err(Error::Format("not a field file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported field format version {version}")));
        }
        let mut u = [0u64; 4];
        for x in u.iter_mut() {
            *x = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        }
        let mut f = [0f64; 5];
        for x in f.iter_mut() {
            *x = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        }
        let grid = Grid::new(u[0] as usize, u[1] as usize, f[0], f[1])?;
        let nz = u[2] as usize;
        let mut read_vec = |n: usize| -> Result<Vec<f64>> {
            let raw = take(8 * n)?;
            Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        };
        let zeta = read_vec(nz)?;
        let npts = grid.len() * nz;
        let mut components = Vec::new();
        for _ in 0..u[3] {
            components.push(read_vec(npts)?);
        }
        Ok(FieldFile { grid, zeta, eps: f[2], nu: f[3], time: f[4], components })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.encode()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let b = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::decode(&b)
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Format a number for CSV output with round-trip precision.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Render a CSV table.
pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| num(*x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Parse a numeric CSV table with a header line.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (n, l) in lines.enumerate() {
        let row: std::result::Result<Vec<f64>, _> = l.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| Error::Format(format!("CSV row {} is not numeric", n + 1)))?;
        if row.len() != header.len() {
            return Err(Error::Format(format!("CSV row {} has {} cells, header has {}", n + 1, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Collects written artifacts and their checksums.
#[derive(Debug, Clone)]
pub struct ArtifactSet {
    pub dir: PathBuf,
    pub entries: Vec<(String, String, usize)>,
}

impl ArtifactSet {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        Ok(ArtifactSet { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    /// Write `bytes` to `name` inside the artifact directory and record it.
    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_bytes(&path, bytes)?;
        self.entries.retain(|(n, _, _)| n != name);
        self.entries.push((name.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(path)
    }

    /// Render the manifest text.
    pub fn manifest(&self, config_hash: &str, command: &str) -> String {
        let mut s = String::from("{\n");
        let _ = writeln!(s, "  \"command\": \"{command}\",");
        let _ = writeln!(s, "  \"config_sha256\": \"{config_hash}\",");
        s.push_str("  \"artifacts\": [\n");
        let mut sorted = self.entries.clone();
        sorted.sort();
        for (k, (name, hash, len)) in sorted.iter().enumerate() {
            let comma = if k + 1 < sorted.len() { "," } else { "" };
            let _ = writeln!(s, "    {{\"path\": \"{name}\", \"sha256\": \"{hash}\", \"bytes\": {len}}}{comma}");
        }
        s.push_str("  ]\n}\n");
        s
    }

    /// Write `manifest-<command>.json` and return its text.
    pub fn finish(&self, config_hash: &str, command: &str) -> Result<String> {
        let text = self.manifest(config_hash, command);
        write_bytes(&self.dir.join(format!("manifest-{command}.json")), text.as_bytes())?;
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let grid = Grid::new(8, 8, 1.0, 2.0).unwrap();
        let f = FieldFile {
            grid,
            zeta: vec![0.0, 1.0, 2.0],
            eps: 1e-3,
            nu: 0.1,
            time: 0.5,
            components: vec![(0..192).map(|x| x as f64).collect(), vec![0.25; 192]],
        };
        let back = FieldFile::decode(&f.encode().unwrap()).unwrap();
        assert_eq!(back, f);
        assert!(FieldFile::decode(&f.encode().unwrap()[..40]).is_err());
    }

    #[test]
    fn surface_text_round_trip() {
        let text = format!("8 8 1 1\n{}", vec!["0.5"; 64].join(" "));
        let s = parse_surface(&text, "mem").unwrap();
        assert!(s.samples.iter().all(|b| *b == 0.5));
        assert!(parse_surface("8 8 1 1\n1 2", "mem").is_err());
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn csv_round_trip() {
        let s = csv_string(&["a", "b"], &[vec![1.0, 2.5], vec![-3.0, 1e-20]]);
        let (h, r) = parse_csv(&s).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(r[1][1], 1e-20);
    }
}
