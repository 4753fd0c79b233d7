//! `HHF1` binary factor format.
//!
//! Layout (little endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `"HHF1"` |
//! | 4     | `u32` dimension `n` |
//! | 4     | `u32` reflector count `h` |
//! | 1     | kind: `0` orthonormal, `1` symmetric |
//! | n     | signs, `0x01` for +1 and `0xFF` for -1 |
//! | 8n    | `f64` spectrum (kind 1 only) |
//! | 8hn   | `f64` reflector entries, first-applied vector first |
//!
//! Values are widened to `f64` on write, so `f64` factors round-trip bit-exactly.

use std::io::{self, Read, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::reflector::{FactoredSymmetric, ReflectorProduct};
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"HHF1";
const KIND_ORTHONORMAL: u8 = 0;
const KIND_SYMMETRIC: u8 = 1;
const SIGN_POS: u8 = 0x01;
const SIGN_NEG: u8 = 0xFF;
/// Unit-norm tolerance applied to vectors read from a stream.
const LOAD_UNIT_TOL: f64 = 1e-9;

/// Either kind of stored factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor<T: Real> {
    Orthonormal(ReflectorProduct<T>),
    Symmetric(FactoredSymmetric<T>),
}

impl<T: Real> Factor<T> {
    pub fn n(&self) -> usize {
        match self {
            Factor::Orthonormal(p) => p.n(),
            Factor::Symmetric(f) => f.n(),
        }
    }

    pub fn apply(&self, x: &DVector<T>) -> Result<DVector<T>> {
        match self {
            Factor::Orthonormal(p) => p.apply(x),
            Factor::Symmetric(f) => f.apply(x),
        }
    }
}

impl<T: Real> From<ReflectorProduct<T>> for Factor<T> {
    fn from(p: ReflectorProduct<T>) -> Self {
        Factor::Orthonormal(p)
    }
}

impl<T: Real> From<FactoredSymmetric<T>> for Factor<T> {
    fn from(f: FactoredSymmetric<T>) -> Self {
        Factor::Symmetric(f)
    }
}

fn write_header<T: Real, W: Write>(w: &mut W, p: &ReflectorProduct<T>, kind: u8) -> Result<()> {
    let n = u32::try_from(p.n()).map_err(|_| Error::InvalidArgument("dimension exceeds u32".into()))?;
    let h = u32::try_from(p.h()).map_err(|_| Error::InvalidArgument("reflector count exceeds u32".into()))?;
    w.write_all(&MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&h.to_le_bytes())?;
    w.write_all(&[kind])?;
    let signs: Vec<u8> = p
        .signs()
        .iter()
        .map(|s| if *s > T::zero() { SIGN_POS } else { SIGN_NEG })
        .collect();
    w.write_all(&signs)?;
    Ok(())
}

fn write_values<T: Real, W: Write>(w: &mut W, values: &DVector<T>) -> Result<()> {
    for v in values.iter() {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn write_product<T: Real, W: Write>(p: &ReflectorProduct<T>, w: &mut W) -> Result<()> {
    write_header(w, p, KIND_ORTHONORMAL)?;
    for u in p.vectors() {
        write_values(w, u)?;
    }
    Ok(())
}

pub fn write_symmetric<T: Real, W: Write>(f: &FactoredSymmetric<T>, w: &mut W) -> Result<()> {
    write_header(w, f.basis(), KIND_SYMMETRIC)?;
    write_values(w, f.spectrum())?;
    for u in f.basis().vectors() {
        write_values(w, u)?;
    }
    Ok(())
}

pub fn write_factor<T: Real, W: Write>(factor: &Factor<T>, w: &mut W) -> Result<()> {
    match factor {
        Factor::Orthonormal(p) => write_product(p, w),
        Factor::Symmetric(f) => write_symmetric(f, w),
    }
}

pub fn to_bytes<T: Real>(factor: &Factor<T>) -> Vec<u8> {
    let mut out = Vec::new();
    write_factor(factor, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Truncated,
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_values<T: Real, R: Read>(r: &mut R, n: usize) -> Result<DVector<T>> {
    let mut values = Vec::new();
    let mut b = [0u8; 8];
    for _ in 0..n {
        read_exact(r, &mut b)?;
        values.push(T::lit(f64::from_le_bytes(b)));
    }
    Ok(DVector::from_vec(values))
}

/// Reads one factor and requires the stream to end right after it.
pub fn read_factor<T: Real, R: Read>(r: &mut R) -> Result<Factor<T>> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let n = read_u32(r)? as usize;
    let h = read_u32(r)? as usize;
    let mut kind = [0u8; 1];
    read_exact(r, &mut kind)?;
    let kind = kind[0];
    if kind != KIND_ORTHONORMAL && kind != KIND_SYMMETRIC {
        return Err(Error::UnknownKind(kind));
    }

    let mut signs = Vec::new();
    let mut byte = [0u8; 1];
    for index in 0..n {
        read_exact(r, &mut byte)?;
        signs.push(match byte[0] {
            SIGN_POS => T::one(),
            SIGN_NEG => -T::one(),
            other => return Err(Error::BadSignByte { index, byte: other }),
        });
    }
    let signs = DVector::from_vec(signs);

    let spectrum = if kind == KIND_SYMMETRIC {
        Some(read_values::<T, _>(r, n)?)
    } else {
        None
    };

    let mut vectors = Vec::new();
    for index in 0..h {
        let v = read_values::<T, _>(r, n)?;
        let norm = v.norm().as_f64();
        if (norm - 1.0).abs() > LOAD_UNIT_TOL {
            return Err(Error::NonUnitVector { index, norm });
        }
        vectors.push(v);
    }

    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => return Err(Error::TrailingBytes),
        Err(e) => return Err(Error::Io(e)),
    }

    let basis = ReflectorProduct::from_parts_unchecked(n, vectors, signs);
    Ok(match spectrum {
        Some(s) => Factor::Symmetric(FactoredSymmetric::new(basis, s)?),
        None => Factor::Orthonormal(basis),
    })
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<Factor<T>> {
    let mut cursor = bytes;
    read_factor(&mut cursor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{random_reflector_product, seeded_rng};
    use proptest::prelude::*;

    #[test]
    fn identity_header_size() {
        let p = ReflectorProduct::<f64>::identity(4);
        let bytes = to_bytes(&Factor::from(p.clone()));
        assert_eq!(bytes.len(), 4 + 4 + 4 + 1 + 4);
        assert_eq!(&bytes[..4], b"HHF1");
        assert_eq!(from_bytes::<f64>(&bytes).unwrap(), Factor::Orthonormal(p));
    }

    #[test]
    fn layout_is_little_endian() {
        let u = DVector::from_vec(vec![0.0, 1.0]);
        let p = ReflectorProduct::new(2, vec![u], DVector::from_vec(vec![1.0, -1.0])).unwrap();
        let f = FactoredSymmetric::new(p, DVector::from_vec(vec![2.5, -1.0])).unwrap();
        let bytes = to_bytes(&Factor::from(f));
        assert_eq!(&bytes[4..8], &[2, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(bytes[12], 1);
        assert_eq!(&bytes[13..15], &[0x01, 0xFF]);
        assert_eq!(&bytes[15..23], &2.5f64.to_le_bytes());
        assert_eq!(&bytes[31..39], &0.0f64.to_le_bytes());
        assert_eq!(&bytes[39..47], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 47);
    }

    #[test]
    fn random_product_round_trips_exactly() {
        let p = random_reflector_product::<f64, _>(16, 3, &mut seeded_rng(42));
        let back = from_bytes::<f64>(&to_bytes(&Factor::from(p.clone()))).unwrap();
        assert_eq!(back, Factor::Orthonormal(p));
    }

    #[test]
    fn corrupted_streams_are_rejected() {
        let p = random_reflector_product::<f64, _>(5, 2, &mut seeded_rng(1));
        let good = to_bytes(&Factor::from(p));

        let mut bad = good.clone();
        bad[0] = b'X';
        let err = from_bytes::<f64>(&bad).unwrap_err();
        assert!(matches!(err, Error::BadMagic));
        assert_eq!(err.to_string(), "bad magic");

        assert!(matches!(from_bytes::<f64>(&good[..good.len() - 3]), Err(Error::Truncated)));
        assert!(matches!(from_bytes::<f64>(&good[..2]), Err(Error::Truncated)));

        let mut bad = good.clone();
        bad[13] = 0x02;
        assert!(matches!(from_bytes::<f64>(&bad), Err(Error::BadSignByte { index: 0, byte: 2 })));

        let mut bad = good.clone();
        bad[12] = 7;
        assert!(matches!(from_bytes::<f64>(&bad), Err(Error::UnknownKind(7))));

        let mut bad = good.clone();
        let off = 4 + 4 + 4 + 1 + 5;
        bad[off..off + 8].copy_from_slice(&2.0f64.to_le_bytes());
        assert!(matches!(from_bytes::<f64>(&bad), Err(Error::NonUnitVector { index: 0, .. })));

        let mut bad = good;
        bad.push(0);
        assert!(matches!(from_bytes::<f64>(&bad), Err(Error::TrailingBytes)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn symmetric_factors_round_trip(seed in any::<u64>(), n in 1usize..20, h in 0usize..5) {
            let mut rng = seeded_rng(seed);
            let p = random_reflector_product::<f64, _>(n, h, &mut rng);
            let s = crate::ensemble::gaussian_vector::<f64, _>(n, &mut rng);
            let f = Factor::from(FactoredSymmetric::new(p, s).unwrap());
            let back = from_bytes::<f64>(&to_bytes(&f)).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
