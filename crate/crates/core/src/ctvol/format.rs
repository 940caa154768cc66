//! `CTV1` volume files and 16-bit PGM slice export.
//!
//! `CTV1` layout, little-endian:
//!
//! | bytes      | content                                   |
//! |------------|-------------------------------------------|
//! | 0..4       | magic `"CTV1"`                            |
//! | 4..16      | `nx`, `ny`, `nz` as `u32`                 |
//! | 16..24     | `spacing_mm` as IEEE-754 `f64`            |
//! | 24..       | `nx·ny·nz` HU values as `i16`, x fastest  |

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::volume::{Volume, HU_MIN};

pub const CTV_MAGIC: [u8; 4] = *b"CTV1";
const HEADER_LEN: usize = 24;

pub fn encode_volume(v: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * v.len());
    out.extend_from_slice(&CTV_MAGIC);
    for d in v.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&v.spacing_mm().to_le_bytes());
    for hu in v.data() {
        out.extend_from_slice(&hu.to_le_bytes());
    }
    out
}

/// Parses a `CTV1` buffer; HU values are clamped into range on load.
pub fn decode_volume(buf: &[u8]) -> Result<Volume> {
    if buf.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: buf.len(),
        });
    }
    let magic: [u8; 4] = buf[..4].try_into().unwrap();
    if magic != CTV_MAGIC {
        return Err(Error::BadMagic {
            expected: CTV_MAGIC,
            found: magic,
        });
    }
    if buf.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: buf.len(),
        });
    }
    let dim = |i: usize| u32::from_le_bytes(buf[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let dims = [dim(0), dim(1), dim(2)];
    let spacing = f64::from_le_bytes(buf[16..24].try_into().unwrap());
    let payload = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .and_then(|n| n.checked_mul(2))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::DimensionOverflow(format!("CTV dims {dims:?}")))?;
    if buf.len() < payload {
        return Err(Error::Truncated {
            expected: payload,
            found: buf.len(),
        });
    }
    if buf.len() > payload {
        return Err(Error::Format(format!(
            "{} trailing bytes after CTV payload",
            buf.len() - payload
        )));
    }
    let data = buf[HEADER_LEN..]
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Volume::new(dims, spacing, data)
}

pub fn save_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_volume(v)).map_err(|e| Error::io(path, e))
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_volume(&buf)
}

/// Grey level written for a HU value: `hu + 1024`, on a 0..=4095 scale.
fn grey(hu: i16) -> u16 {
    (hu as i32 - HU_MIN as i32) as u16
}

/// Binary 16-bit PGM (`P5`, maxval 4095, big-endian samples) of axial
/// slices placed side by side.
pub fn encode_pgm_row(slices: &[(&Volume, usize)]) -> Result<Vec<u8>> {
    let first = slices
        .first()
        .ok_or_else(|| Error::Config("no slices to export".into()))?
        .0;
    let [nx, ny, _] = first.dims();
    for (v, z) in slices {
        let [vx, vy, vz] = v.dims();
        if (vx, vy) != (nx, ny) {
            return Err(Error::Geometry("triptych slices must share x/y dims".into()));
        }
        if *z >= vz {
            return Err(Error::Geometry(format!("slice {z} outside depth {vz}")));
        }
    }
    let width = nx * slices.len();
    let mut out = Vec::new();
    write!(out, "P5\n{width} {ny}\n4095\n").unwrap();
    for y in 0..ny {
        for (v, z) in slices {
            for x in 0..nx {
                out.extend_from_slice(&grey(v.get([x, y, *z])).to_be_bytes());
            }
        }
    }
    Ok(out)
}

pub fn save_pgm_slice(v: &Volume, z: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm_row(&[(v, z)])?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_round_trip() {
        let v = Volume::filled([4, 4, 4], 0).unwrap();
        let bytes = encode_volume(&v);
        assert_eq!(bytes.len(), 24 + 2 * 64);
        assert_eq!(decode_volume(&bytes).unwrap(), v);
    }

    #[test]
    fn header_layout_is_bit_exact() {
        let v = Volume::new([2, 1, 1], 0.47, vec![-1, 700]).unwrap();
        let b = encode_volume(&v);
        assert_eq!(&b[0..4], b"CTV1");
        assert_eq!(&b[4..16], &[2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&b[16..24], &0.47f64.to_le_bytes());
        assert_eq!(&b[24..], &[0xff, 0xff, 0xbc, 0x02]);
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let mut b = encode_volume(&Volume::filled([1, 1, 1], 0).unwrap());
        b[0] = b'X';
        assert!(matches!(decode_volume(&b), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload_is_distinct() {
        let b = encode_volume(&Volume::filled([3, 3, 3], 0).unwrap());
        assert!(matches!(
            decode_volume(&b[..b.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(decode_volume(&b[..10]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn huge_dims_overflow() {
        let mut b = Vec::from(CTV_MAGIC);
        for _ in 0..3 {
            b.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        b.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(matches!(
            decode_volume(&b),
            Err(Error::DimensionOverflow(_)) | Err(Error::Truncated { .. })
        ));
        let mut c = Vec::from(CTV_MAGIC);
        for d in [u32::MAX, u32::MAX, 0x8000_0000u32] {
            c.extend_from_slice(&d.to_le_bytes());
        }
        c.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(matches!(decode_volume(&c), Err(Error::DimensionOverflow(_))));
    }

    #[test]
    fn load_clamps_out_of_range_hu() {
        let mut b = encode_volume(&Volume::filled([8, 8, 8], 0).unwrap());
        b[24..26].copy_from_slice(&5000i16.to_le_bytes());
        let v = decode_volume(&b).unwrap();
        assert_eq!(v.data()[0], 3071);
    }

    #[test]
    fn pgm_header_and_samples() {
        let v = Volume::new([2, 1, 1], 1.0, vec![-1024, 3071]).unwrap();
        let b = encode_pgm_row(&[(&v, 0), (&v, 0)]).unwrap();
        let header = b"P5\n4 1\n4095\n";
        assert_eq!(&b[..header.len()], header);
        assert_eq!(&b[header.len()..], &[0, 0, 0x0f, 0xff, 0, 0, 0x0f, 0xff]);
    }
}
