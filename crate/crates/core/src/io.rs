//! File formats: GIS1 surfaces (binary and text), GIP1 paths, OBJ meshes.
//!
//! GIS1 is the magic `GIS1`, little-endian `u32` `n_u` and `n_v`, then
//! `n_u * n_v` points as three little-endian `f64` each, row-major in `(i, j)`.
//! The text variant (`.gis.txt`) has a `GIS1 n_u n_v` header line followed by
//! one `x y z` line per point in the same order. GIP1 is the magic `GIP1`,
//! `u32` `T`, `n_u`, `n_v`, then `T` GIS1 point payloads back to back.

use std::fs;
use std::hash::Hasher;
use std::io::Write;
use std::path::Path as FsPath;

use fnv::FnvHasher;

use crate::error::{Error, Result};
use crate::path::Path;
use crate::surface::{Grid, Surface, Vec3, MIN_GRID};

pub const GIS1_MAGIC: &[u8; 4] = b"GIS1";
pub const GIP1_MAGIC: &[u8; 4] = b"GIP1";

/// 64-bit FNV-1a digest of `bytes`.
pub fn digest(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(parse_err(self.pos, format!("unexpected end of data reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let at = self.pos;
        if self.take(4, "magic")? != magic {
            return Err(parse_err(at, format!("expected magic {}", String::from_utf8_lossy(magic))));
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn dims(&mut self) -> Result<Grid> {
        let at = self.pos;
        let n_u = self.u32("n_u")?;
        let n_v = self.u32("n_v")?;
        if n_u < MIN_GRID || n_v < MIN_GRID {
            return Err(parse_err(at, format!("grid {n_u}x{n_v} is below the {MIN_GRID}x{MIN_GRID} minimum")));
        }
        Grid::new(n_u, n_v)
    }

    fn points(&mut self, grid: Grid) -> Result<Surface> {
        let mut pts = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let mut c = [0.0; 3];
            for x in c.iter_mut() {
                let at = self.pos;
                *x = f64::from_le_bytes(self.take(8, "coordinate")?.try_into().expect("8 bytes"));
                if !x.is_finite() {
                    return Err(parse_err(at, "non-finite coordinate"));
                }
            }
            pts.push(Vec3::from(c));
        }
        Surface::new(grid, pts)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(parse_err(self.pos, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn push_points(out: &mut Vec<u8>, s: &Surface) {
    for p in s.points() {
        for c in p.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
}

pub fn encode_gis1(s: &Surface) -> Vec<u8> {
    let g = s.grid();
    let mut out = Vec::with_capacity(12 + 24 * g.len());
    out.extend_from_slice(GIS1_MAGIC);
    out.extend_from_slice(&(g.n_u as u32).to_le_bytes());
    out.extend_from_slice(&(g.n_v as u32).to_le_bytes());
    push_points(&mut out, s);
    out
}

pub fn decode_gis1(bytes: &[u8]) -> Result<Surface> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(GIS1_MAGIC)?;
    let g = r.dims()?;
    let s = r.points(g)?;
    r.finish()?;
    Ok(s)
}

pub fn encode_gis_text(s: &Surface) -> String {
    let g = s.grid();
    let mut out = format!("GIS1 {} {}\n", g.n_u, g.n_v);
    for p in s.points() {
        out.push_str(&format!("{:e} {:e} {:e}\n", p.x, p.y, p.z));
    }
    out
}

pub fn decode_gis_text(text: &str) -> Result<Surface> {
    let mut offset = 0;
    let mut lines = Vec::new();
    for line in text.split_inclusive('\n') {
        if !line.trim().is_empty() && !line.trim_start().starts_with('#') {
            lines.push((offset, line.trim_end()));
        }
        offset += line.len();
    }
    let (at, header) = *lines.first().ok_or_else(|| parse_err(0, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "GIS1" {
        return Err(parse_err(at, "expected header 'GIS1 n_u n_v'"));
    }
    let dim = |s: &str| s.parse::<usize>().map_err(|_| parse_err(at, format!("bad grid size '{s}'")));
    let (n_u, n_v) = (dim(fields[1])?, dim(fields[2])?);
    if n_u < MIN_GRID || n_v < MIN_GRID {
        return Err(parse_err(at, format!("grid {n_u}x{n_v} is below the {MIN_GRID}x{MIN_GRID} minimum")));
    }
    let g = Grid::new(n_u, n_v)?;
    if lines.len() - 1 != g.len() {
        let at = lines.get(g.len() + 1).map_or(text.len(), |l| l.0);
        return Err(parse_err(at, format!("expected {} points, found {}", g.len(), lines.len() - 1)));
    }
    let mut pts = Vec::with_capacity(g.len());
    for &(at, line) in &lines[1..] {
        let c: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(at, format!("bad coordinate line '{line}'")))?;
        if c.len() != 3 || c.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(at, format!("expected three finite coordinates, got '{line}'")));
        }
        pts.push(Vec3::new(c[0], c[1], c[2]));
    }
    Surface::new(g, pts)
}

pub fn encode_gip1(path: &Path) -> Vec<u8> {
    let g = path.grid();
    let mut out = Vec::with_capacity(16 + 24 * g.len() * path.len());
    out.extend_from_slice(GIP1_MAGIC);
    out.extend_from_slice(&(path.len() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n_u as u32).to_le_bytes());
    out.extend_from_slice(&(g.n_v as u32).to_le_bytes());
    for f in path.frames() {
        push_points(&mut out, f);
    }
    out
}

pub fn decode_gip1(bytes: &[u8]) -> Result<Path> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(GIP1_MAGIC)?;
    let at = r.pos;
    let t = r.u32("frame count")?;
    if t < 2 {
        return Err(parse_err(at, format!("a path needs at least 2 frames, got {t}")));
    }
    let g = r.dims()?;
    let frames = (0..t).map(|_| r.points(g)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Path::new(frames)
}

fn is_text(p: &FsPath) -> bool {
    p.to_string_lossy().ends_with(".txt")
}

/// Read a surface; files ending in `.txt` use the text variant.
pub fn read_surface(p: &FsPath) -> Result<Surface> {
    let bytes = fs::read(p)?;
    if is_text(p) {
        let text = std::str::from_utf8(&bytes).map_err(|e| parse_err(e.valid_up_to(), "invalid UTF-8"))?;
        decode_gis_text(text)
    } else {
        decode_gis1(&bytes)
    }
}

pub fn write_surface(p: &FsPath, s: &Surface) -> Result<()> {
    if is_text(p) {
        fs::write(p, encode_gis_text(s))?;
    } else {
        fs::write(p, encode_gis1(s))?;
    }
    Ok(())
}

pub fn read_path(p: &FsPath) -> Result<Path> {
    decode_gip1(&fs::read(p)?)
}

pub fn write_path(p: &FsPath, path: &Path) -> Result<()> {
    fs::write(p, encode_gip1(path))?;
    Ok(())
}

/// Blue-to-red ramp over `[lo, hi]`.
fn ramp(x: f64, lo: f64, hi: f64) -> [f64; 3] {
    let t = if hi > lo { ((x - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    [t, 1.0 - (2.0 * t - 1.0).abs(), 1.0 - t]
}

/// Triangle mesh of the grid (each quad split along `(i,j)-(i+1,j+1)`),
/// with vertex colors from `scalar` when given.
pub fn write_obj(out: &mut impl Write, s: &Surface, scalar: Option<&[f64]>) -> Result<()> {
    let g = s.grid();
    let range = scalar.map(|v| {
        v.iter()
            .filter(|x| x.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    });
    for (k, p) in s.points().iter().enumerate() {
        match (scalar, range) {
            (Some(v), Some((lo, hi))) => {
                let [r, gr, b] = ramp(v[k], lo, hi);
                writeln!(out, "v {} {} {} {r:.4} {gr:.4} {b:.4}", p.x, p.y, p.z)?;
            }
            _ => writeln!(out, "v {} {} {}", p.x, p.y, p.z)?,
        }
    }
    for i in 0..g.n_u - 1 {
        for j in 0..g.n_v {
            let jn = g.wrap(j, 1);
            let a = g.idx(i, j) + 1;
            let b = g.idx(i + 1, j) + 1;
            let c = g.idx(i + 1, jn) + 1;
            let d = g.idx(i, jn) + 1;
            writeln!(out, "f {a} {b} {c}")?;
            writeln!(out, "f {a} {c} {d}")?;
        }
    }
    Ok(())
}
