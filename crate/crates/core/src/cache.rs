//! Versioned binary cache for [`SpinBasis`] transforms.
//!
//! Layout, all little-endian: magic `SPQB`, `u32` version, `u32` N, `u8` axis,
//! `u32` sector count, then `(i32 s, u32 l, u32 offset)` per sector, then the
//! `2^N x 2^N` transform in row-major order as `(f64 re, f64 im)` pairs.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::basis::{check_register, CollectiveOps, Sector, SpinBasis};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::ops::Axis;

const MAGIC: &[u8; 4] = b"SPQB";
pub const CACHE_VERSION: u32 = 1;

pub fn cache_path(dir: &Path, n: usize, axis: Axis) -> PathBuf {
    dir.join(format!("spin_basis_n{n}_{axis}.bin"))
}

pub fn write_basis(basis: &SpinBasis, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(basis.n() as u32).to_le_bytes())?;
    w.write_all(&[basis.axis().index() as u8])?;
    w.write_all(&(basis.sectors().len() as u32).to_le_bytes())?;
    for sec in basis.sectors() {
        w.write_all(&sec.s.to_le_bytes())?;
        w.write_all(&(sec.l as u32).to_le_bytes())?;
        w.write_all(&(sec.offset as u32).to_le_bytes())?;
    }
    let t = basis.transform();
    for i in 0..t.nrows() {
        for j in 0..t.ncols() {
            let z = t[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const K: usize>(r: &mut impl Read) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Cache(format!("truncated file: {e}")))?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

pub fn read_basis(path: &Path, max_n: usize) -> Result<SpinBasis> {
    let mut r = BufReader::new(fs::File::open(path)?);
    if &read_array::<4>(&mut r)? != MAGIC {
        return Err(Error::Cache(format!("{}: bad magic", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!(
            "{}: version {version}, expected {CACHE_VERSION}",
            path.display()
        )));
    }
    let n = read_u32(&mut r)? as usize;
    check_register(n, max_n)?;
    let axis = match read_array::<1>(&mut r)?[0] {
        0 => Axis::X,
        1 => Axis::Y,
        2 => Axis::Z,
        other => return Err(Error::Cache(format!("unknown axis tag {other}"))),
    };
    let count = read_u32(&mut r)? as usize;
    let dim = 1usize << n;
    let mut sectors = Vec::with_capacity(count);
    let mut covered = 0;
    for _ in 0..count {
        let s = i32::from_le_bytes(read_array(&mut r)?);
        let l = read_u32(&mut r)? as usize;
        let offset = read_u32(&mut r)? as usize;
        let sec = Sector { s, l, offset };
        if s < 0 || s > n as i32 / 2 || offset != covered {
            return Err(Error::Cache(format!(
                "inconsistent sector table entry {sec:?}"
            )));
        }
        covered += sec.dim();
        sectors.push(sec);
    }
    if covered != dim {
        return Err(Error::Cache(format!(
            "sector table spans {covered} of {dim} columns"
        )));
    }
    let mut data = Vec::with_capacity(dim * dim);
    for _ in 0..dim * dim {
        let re = f64::from_le_bytes(read_array(&mut r)?);
        let im = f64::from_le_bytes(read_array(&mut r)?);
        data.push(C64::new(re, im));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Cache(format!("{}: trailing bytes", path.display())));
    }
    let t = CMatrix::from_row_slice(dim, dim, &data);
    Ok(SpinBasis::assemble(n, axis, t, sectors))
}

/// Canonical basis for `n`, read from `cache_dir` when present and written
/// there after a fresh build.
pub fn load_or_build(n: usize, max_n: usize, cache_dir: Option<&Path>) -> Result<SpinBasis> {
    check_register(n, max_n)?;
    let Some(dir) = cache_dir else {
        return SpinBasis::build_with_limit(n, max_n);
    };
    let path = cache_path(dir, n, Axis::Z);
    if path.exists() {
        match read_basis(&path, max_n) {
            Ok(b) => {
                log::debug!("basis cache hit: {}", path.display());
                return Ok(b);
            }
            Err(e) => log::warn!("ignoring unreadable basis cache {}: {e}", path.display()),
        }
    }
    let ops = CollectiveOps::build_with_limit(n, max_n)?;
    let basis = SpinBasis::from_ops(&ops)?;
    write_basis(&basis, &path)?;
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        for axis in [Axis::Z, Axis::Y] {
            let b = SpinBasis::build(4).unwrap().rotated(axis);
            let path = cache_path(dir.path(), 4, axis);
            write_basis(&b, &path).unwrap();
            let back = read_basis(&path, 12).unwrap();
            assert!(b == back);
            assert_eq!(back.labels(), b.labels());
            assert_eq!(
                back.real_transform().is_some(),
                b.real_transform().is_some()
            );
        }
    }

    #[test]
    fn load_or_build_populates_cache() {
        let dir = tempfile::tempdir().unwrap();
        let first = load_or_build(4, 12, Some(dir.path())).unwrap();
        assert!(cache_path(dir.path(), 4, Axis::Z).exists());
        let second = load_or_build(4, 12, Some(dir.path())).unwrap();
        assert!(first == second);
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(read_basis(&path, 12), Err(Error::Cache(_))));
        let b = SpinBasis::build(2).unwrap();
        write_basis(&b, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_basis(&path, 12), Err(Error::Cache(_))));
    }
}
