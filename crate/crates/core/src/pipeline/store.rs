//! Binary eigenmode files: little-endian, self-describing bases.
//!
//! ```text
//! "BQEM" u32:version [u8;32]:domain_hash f64:k_lo f64:k_hi f64:k_center f64:kd f64:factor
//! u32:n_bases  { f64:k f64:offset f64:factor u32:retained u32:n  n x (f64 x, f64 y) }
//! u32:n_modes  { f64:k f64:omega f64:mu f64:rellich_norm u32:basis u32:n  n x f64 }
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::basis::ScalingBasis;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scaling::{dedupe_modes, EigenMode, SpectrumCatalog, WindowSolution};

pub const MAGIC: &[u8; 4] = b"BQEM";
pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "bqem";

#[derive(Debug, Clone, PartialEq)]
pub struct StoredBasis {
    pub basis: ScalingBasis,
    pub retained: u32,
}

/// Eigenmodes of one solved chunk `[k_lo, k_hi)` with the bases they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenmodeFile {
    pub domain_hash: [u8; 32],
    pub k_lo: f64,
    pub k_hi: f64,
    pub k_center: f64,
    pub kd: f64,
    pub factor: f64,
    pub bases: Vec<StoredBasis>,
    /// `window` indexes `bases`.
    pub modes: Vec<EigenMode>,
}

impl EigenmodeFile {
    /// Keeps only the bases referenced by the catalog's modes.
    pub fn from_catalog(catalog: &SpectrumCatalog, domain_hash: [u8; 32], kd: f64, factor: f64) -> Self {
        let mut remap = vec![u32::MAX; catalog.windows.len()];
        let mut bases = Vec::new();
        let mut modes = Vec::with_capacity(catalog.modes.len());
        for m in &catalog.modes {
            if remap[m.window] == u32::MAX {
                remap[m.window] = bases.len() as u32;
                let w = &catalog.windows[m.window];
                bases.push(StoredBasis { basis: (*w.basis).clone(), retained: w.retained as u32 });
            }
            modes.push(EigenMode { window: remap[m.window] as usize, ..m.clone() });
        }
        EigenmodeFile {
            domain_hash,
            k_lo: catalog.k_lo,
            k_hi: catalog.k_hi,
            k_center: 0.5 * (catalog.k_lo + catalog.k_hi),
            kd,
            factor,
            bases,
            modes,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        let f = |b: &mut Vec<u8>, x: f64| b.extend_from_slice(&x.to_le_bytes());
        let u = |b: &mut Vec<u8>, x: u32| b.extend_from_slice(&x.to_le_bytes());
        b.extend_from_slice(MAGIC);
        u(&mut b, VERSION);
        b.extend_from_slice(&self.domain_hash);
        for x in [self.k_lo, self.k_hi, self.k_center, self.kd, self.factor] {
            f(&mut b, x);
        }
        u(&mut b, self.bases.len() as u32);
        for s in &self.bases {
            f(&mut b, s.basis.k);
            f(&mut b, s.basis.offset);
            f(&mut b, s.basis.factor);
            u(&mut b, s.retained);
            u(&mut b, s.basis.charges.len() as u32);
            for c in &s.basis.charges {
                f(&mut b, c.x);
                f(&mut b, c.y);
            }
        }
        u(&mut b, self.modes.len() as u32);
        for m in &self.modes {
            for x in [m.k, m.omega, m.mu, m.rellich_norm] {
                f(&mut b, x);
            }
            u(&mut b, m.window as u32);
            u(&mut b, m.coefficients.len() as u32);
            for c in &m.coefficients {
                f(&mut b, *c);
            }
        }
        b
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(r.fail("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.fail(&format!("unsupported version {version}")));
        }
        let domain_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let (k_lo, k_hi, k_center, kd, factor) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let nb = r.u32()? as usize;
        let mut bases = Vec::with_capacity(nb.min(1 << 16));
        for _ in 0..nb {
            let (k, offset, bfactor) = (r.f64()?, r.f64()?, r.f64()?);
            let retained = r.u32()?;
            let n = r.count(16)?;
            let mut charges = Vec::with_capacity(n);
            for _ in 0..n {
                charges.push(Vec2::new(r.f64()?, r.f64()?));
            }
            bases.push(StoredBasis { basis: ScalingBasis { k, offset, factor: bfactor, charges }, retained });
        }
        let nm = r.u32()? as usize;
        let mut modes = Vec::with_capacity(nm.min(1 << 16));
        for _ in 0..nm {
            let (k, omega, mu, rellich_norm) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let window = r.u32()? as usize;
            if window >= bases.len() {
                return Err(r.fail(&format!("mode refers to basis {window} of {}", bases.len())));
            }
            let n = r.count(8)?;
            if n != bases[window].basis.charges.len() {
                return Err(r.fail("coefficient count differs from basis size"));
            }
            let mut coefficients = Vec::with_capacity(n);
            for _ in 0..n {
                coefficients.push(r.f64()?);
            }
            modes.push(EigenMode { k, omega, mu, rellich_norm, coefficients, window });
        }
        if r.pos != bytes.len() {
            return Err(r.fail("trailing bytes"));
        }
        Ok(EigenmodeFile { domain_hash, k_lo, k_hi, k_center, kd, factor, bases, modes })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Reads a file and refuses it unless it was solved for `expected_hash`.
    pub fn read(path: &Path, expected_hash: &[u8; 32]) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact { path: path.to_path_buf(), what: "eigenmode file".into() },
            _ => Error::Io(e),
        })?;
        let file = Self::from_bytes(&bytes, path)?;
        if &file.domain_hash != expected_hash {
            return Err(Error::Format { path: path.to_path_buf(), reason: "domain hash does not match the configured domain".into() });
        }
        Ok(file)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn fail(&self, reason: &str) -> Error {
        Error::Format { path: self.path.to_path_buf(), reason: format!("{reason} at byte {}", self.pos) }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail("truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Element count whose payload of `size` bytes each must fit in the rest.
    fn count(&mut self, size: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n * size > self.bytes.len() - self.pos {
            return Err(self.fail("truncated"));
        }
        Ok(n)
    }
}

/// Eigenmode files in `dir`, sorted by name.
pub fn list_eigenmode_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let missing = || Error::MissingArtifact { path: dir.to_path_buf(), what: "no eigenmode files; run `bque solve` first".into() };
    let entries = std::fs::read_dir(dir).map_err(|_| missing())?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
        .collect();
    if files.is_empty() {
        return Err(missing());
    }
    files.sort();
    Ok(files)
}

/// Merges files into one catalog over the union of their ranges. Levels
/// found by two adjacent chunks are deduplicated.
pub fn load_catalog(files: &[PathBuf], expected_hash: &[u8; 32], dedupe_rel_tol: f64) -> Result<SpectrumCatalog> {
    let mut windows = Vec::new();
    let mut modes = Vec::new();
    let (mut k_lo, mut k_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for path in files {
        let file = EigenmodeFile::read(path, expected_hash)?;
        k_lo = k_lo.min(file.k_lo);
        k_hi = k_hi.max(file.k_hi);
        let first = windows.len();
        for (i, s) in file.bases.into_iter().enumerate() {
            windows.push(WindowSolution { id: first + i, basis: Arc::new(s.basis), modes: vec![], retained: s.retained as usize });
        }
        modes.extend(file.modes.into_iter().map(|m| EigenMode { window: m.window + first, ..m }));
    }
    let (modes, merged) = dedupe_modes(modes, dedupe_rel_tol);
    Ok(SpectrumCatalog { k_lo, k_hi, windows, modes, merged })
}

/// Sorted union of the ranges covered by `files`, merging touching ranges.
pub fn covered_ranges(files: &[PathBuf], expected_hash: &[u8; 32]) -> Result<Vec<(f64, f64)>> {
    let mut r = Vec::new();
    for path in files {
        let f = EigenmodeFile::read(path, expected_hash)?;
        r.push((f.k_lo, f.k_hi));
    }
    r.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in r {
        match out.last_mut() {
            Some(last) if lo <= last.1 * (1.0 + 1e-12) => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    Ok(out)
}
