//! CF64 field files and atomic writes.
//!
//! Layout (little-endian): magic `CF64`, version `u32 = 1`, `n: u32`,
//! `A: f64`, `flags: u32` (bit 0 supported in `2D`, bit 1 has mask), then
//! `n*n` samples as `(re, im)` f64 pairs in row-major order, then, if bit 1
//! is set, `n*n` mask bytes (1 = excluded).

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::GridSpec;

pub const MAGIC: &[u8; 4] = b"CF64";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 24;
pub const FLAG_SUPPORTED: u32 = 1;
pub const FLAG_MASK: u32 = 2;
/// Largest accepted `n`; bounds the allocation made from an untrusted header.
pub const MAX_N: u32 = 8192;

pub fn write_cf64<W: Write>(mut w: W, field: &ComplexField) -> Result<()> {
    let g = field.grid();
    let mut flags = 0;
    if field.is_supported_in_2d() {
        flags |= FLAG_SUPPORTED;
    }
    if field.mask().is_some() {
        flags |= FLAG_MASK;
    }
    let mut buf = Vec::with_capacity(HEADER_LEN as usize + 16 * g.len() + g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.n() as u32).to_le_bytes());
    buf.extend_from_slice(&g.half_width().to_le_bytes());
    buf.extend_from_slice(&flags.to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    if let Some(m) = field.mask() {
        buf.extend(m.iter().map(|&e| e as u8));
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reader that remembers how many bytes it has consumed.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let start = self.offset;
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => {
                    return Err(Error::Format {
                        offset: start + got as u64,
                        msg: format!("unexpected end of data while reading {what}"),
                    })
                }
                Ok(k) => got += k,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::Io(e)),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }
}

pub fn read_cf64<R: Read>(r: R) -> Result<ComplexField> {
    let mut c = Cursor { inner: r, offset: 0 };
    let fmt = |offset: u64, msg: String| Error::Format { offset, msg };
    let mut magic = [0u8; 4];
    c.fill(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(fmt(0, format!("bad magic {magic:?}, expected \"CF64\"")));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(fmt(4, format!("unsupported version {version}")));
    }
    let n = c.u32("n")?;
    if n > MAX_N {
        return Err(fmt(8, format!("n = {n} exceeds the limit {MAX_N}")));
    }
    let a = c.f64("A")?;
    let grid = GridSpec::new(a, n as usize).map_err(|e| fmt(8, e.to_string()))?;
    let flags = c.u32("flags")?;
    if flags & !(FLAG_SUPPORTED | FLAG_MASK) != 0 {
        return Err(fmt(20, format!("unknown flag bits {flags:#x}")));
    }
    let len = grid.len();
    let mut raw = vec![0u8; 16 * len];
    c.fill(&mut raw, "samples")?;
    let values: Vec<Complex64> = raw
        .chunks_exact(16)
        .map(|b| {
            Complex64::new(
                f64::from_le_bytes(b[..8].try_into().unwrap()),
                f64::from_le_bytes(b[8..].try_into().unwrap()),
            )
        })
        .collect();
    let mask = if flags & FLAG_MASK != 0 {
        let mut m = vec![0u8; len];
        let start = c.offset;
        c.fill(&mut m, "mask")?;
        if let Some(i) = m.iter().position(|&b| b > 1) {
            return Err(fmt(start + i as u64, format!("mask byte {} is not 0 or 1", m[i])));
        }
        Some(m.into_iter().map(|b| b == 1).collect::<Vec<bool>>())
    } else {
        None
    };
    let mut probe = [0u8; 1];
    loop {
        match c.inner.read(&mut probe) {
            Ok(0) => break,
            Ok(_) => return Err(fmt(c.offset, "trailing bytes after the field".into())),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Io(e)),
        }
    }
    if let Some(i) = values.iter().enumerate().position(|(i, v)| {
        let excluded = mask.as_ref().map_or(false, |m| m[i]);
        !excluded && !(v.re.is_finite() && v.im.is_finite())
    }) {
        return Err(fmt(HEADER_LEN + 16 * i as u64, format!("non-finite unmasked sample {}", values[i])));
    }
    let field = ComplexField::from_parts(grid, values, mask)?;
    if flags & FLAG_SUPPORTED != 0 {
        return field.into_supported().map_err(|e| fmt(20, format!("supported-in-2D flag: {e}")));
    }
    Ok(field)
}

/// Write `bytes` to a temporary file next to `path`, then rename it over
/// `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| -> io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.map_err(Error::Io)
}

pub fn write_cf64_file(path: &Path, field: &ComplexField) -> Result<()> {
    let mut buf = Vec::new();
    write_cf64(&mut buf, field)?;
    atomic_write(path, &buf)
}

pub fn read_cf64_file(path: &Path) -> Result<ComplexField> {
    let f = fs::File::open(path)?;
    read_cf64(io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field;

    fn roundtrip(f: &ComplexField) -> ComplexField {
        let mut buf = Vec::new();
        write_cf64(&mut buf, f).unwrap();
        read_cf64(&buf[..]).unwrap()
    }

    #[test]
    fn header_layout() {
        let g = GridSpec::new(4.0, 16).unwrap();
        let mut buf = Vec::new();
        write_cf64(&mut buf, &ComplexField::zeros(g)).unwrap();
        assert_eq!(&buf[..4], b"CF64");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 4.0);
        assert_eq!(u32::from_le_bytes(buf[20..24].try_into().unwrap()), FLAG_SUPPORTED);
        assert_eq!(buf.len(), 24 + 16 * 256);
    }

    #[test]
    fn roundtrips_bit_exact() {
        let g = GridSpec::new(1.25, 32).unwrap();
        let f = field::sample(g, |z| (z * 3.7).exp() / 7.0, Some(&|z: Complex64| z.re > 0.5)).unwrap();
        let back = roundtrip(&f);
        assert_eq!(back, f);
        let bits = |f: &ComplexField| f.values().iter().map(|v| (v.re.to_bits(), v.im.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&f));
        let z = ComplexField::zeros(GridSpec::new(4.0, 16).unwrap());
        assert!(roundtrip(&z).is_supported_in_2d());
    }

    #[test]
    fn malformed_data_names_offsets() {
        let g = GridSpec::new(4.0, 16).unwrap();
        let mut buf = Vec::new();
        write_cf64(&mut buf, &ComplexField::zeros(g)).unwrap();
        let off = |b: &[u8]| match read_cf64(b) {
            Err(Error::Format { offset, .. }) => offset,
            other => panic!("expected a format error, got {other:?}"),
        };
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert_eq!(off(&bad), 0);
        let mut bad = buf.clone();
        bad[4] = 2;
        assert_eq!(off(&bad), 4);
        let mut bad = buf.clone();
        bad[8] = 8;
        assert_eq!(off(&bad), 8);
        assert_eq!(off(&buf[..100]), 100);
        let mut bad = buf.clone();
        bad.push(0);
        assert_eq!(off(&bad), buf.len() as u64);
        let mut bad = buf.clone();
        bad[24 + 16 * 3..24 + 16 * 3 + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(off(&bad), 24 + 48);
        assert_eq!(off(&buf[..10]), 10);
    }

    #[test]
    fn file_roundtrip_is_atomic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.cf64");
        let g = GridSpec::new(1.25, 16).unwrap();
        let f = field::sample(g, |z| z * z, None).unwrap();
        write_cf64_file(&p, &f).unwrap();
        assert_eq!(read_cf64_file(&p).unwrap(), f);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
