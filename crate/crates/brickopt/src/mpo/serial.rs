//! The `mpo-v1` container: a self-describing little-endian binary layout
//! with site count, per-site shapes and complex data as interleaved
//! (re, im) doubles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::linalg::DenseTensor;
use crate::mpo::{CanonicalForm, Mpo};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"mpo-v1\0\0";

fn form_tag(form: CanonicalForm) -> (u8, u32) {
    match form {
        CanonicalForm::None => (0, 0),
        CanonicalForm::Left => (1, 0),
        CanonicalForm::Right => (2, 0),
        CanonicalForm::Mixed(c) => (3, c as u32),
    }
}

fn tag_form(tag: u8, center: u32) -> Result<CanonicalForm> {
    Ok(match tag {
        0 => CanonicalForm::None,
        1 => CanonicalForm::Left,
        2 => CanonicalForm::Right,
        3 => CanonicalForm::Mixed(center as usize),
        _ => return Err(Error::Format(format!("unknown canonical tag {tag}"))),
    })
}

pub fn write_mpo<P: AsRef<Path>>(mpo: &Mpo, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(mpo.n_sites() as u32).to_le_bytes())?;
    let (tag, center) = form_tag(mpo.canonical_form());
    w.write_all(&[tag])?;
    w.write_all(&center.to_le_bytes())?;
    for t in mpo.tensors() {
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for z in t.data() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_mpo<P: AsRef<Path>>(path: P) -> Result<Mpo> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an mpo-v1 file".into()));
    }
    let n = read_u32(&mut r)? as usize;
    if n < 2 || n > 1 << 16 {
        return Err(Error::Format(format!("implausible site count {n}")));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let center = read_u32(&mut r)?;
    let form = tag_form(tag[0], center)?;
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let mut shape = [0usize; 4];
        for s in &mut shape {
            *s = read_u32(&mut r)? as usize;
        }
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        let mut buf = [0u8; 16];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
            data.push(Complex64::new(re, im));
        }
        tensors.push(DenseTensor::from_data(&shape, data)?);
    }
    Mpo::new(tensors, form)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpo::tests_support::random_mpo;

    #[test]
    fn round_trip_is_bit_identical() {
        let m = random_mpo(5, 3, 100);
        let dir = std::env::temp_dir().join("brickopt-mpo-serial-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.mpo");
        write_mpo(&m, &path).unwrap();
        let back = read_mpo(&path).unwrap();
        assert_eq!(back.n_sites(), m.n_sites());
        assert_eq!(back.canonical_form(), m.canonical_form());
        for (a, b) in m.tensors().iter().zip(back.tensors()) {
            assert_eq!(a.shape(), b.shape());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = std::env::temp_dir().join("brickopt-mpo-serial-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.mpo");
        std::fs::write(&path, b"not-an-mpo-file!").unwrap();
        assert!(matches!(read_mpo(&path), Err(Error::Format(_))));
        std::fs::remove_file(&path).unwrap();
    }
}
