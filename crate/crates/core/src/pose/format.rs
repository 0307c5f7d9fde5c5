//! The SPS1 binary container.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic "SPS1" | version u16 | fps f32 | dims u8 | component_count u8
//! per component: name_len u8 | name utf-8 | point_count u16 | limb_count u16 | (u16 a, u16 b) * limb_count
//! frame_count u32 | coordinates f32 [T][K][D] | confidences f32 [T][K]
//! ```
//!
//! See `FORMAT.md` at the repository root for a byte-level example.

use super::{ComponentSpec, PoseError, PoseHeader, PoseSequence};

pub const MAGIC: &[u8; 4] = b"SPS1";
pub const FORMAT_VERSION: u16 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PoseError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(PoseError::TruncatedFile {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, PoseError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, PoseError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, PoseError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32, PoseError> {
        Ok(f32::from_bits(self.u32()?))
    }

    fn f32_block(&mut self, count: usize) -> Result<Vec<f32>, PoseError> {
        let byte_len = count.checked_mul(4).ok_or(PoseError::TruncatedFile {
            offset: self.pos,
            needed: usize::MAX,
            available: self.bytes.len() - self.pos,
        })?;
        let raw = self.take(byte_len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }
}

/// Parses an SPS1 byte buffer into a validated [`PoseSequence`].
pub fn parse_pose_file(bytes: &[u8]) -> Result<PoseSequence, PoseError> {
    let mut r = Reader { bytes, pos: 0 };
    // A short prefix of the magic is a truncated file; anything else is not SPS1.
    if bytes.len() < MAGIC.len() && !MAGIC.starts_with(bytes) {
        let mut found = [0u8; 4];
        found[..bytes.len()].copy_from_slice(bytes);
        return Err(PoseError::BadMagic(found));
    }
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(PoseError::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(PoseError::UnsupportedVersion(version));
    }
    let fps = r.f32()?;
    let dims = r.u8()?;
    let count = r.u8()?;
    let mut components = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.u8()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| PoseError::InvariantViolation("component name is not UTF-8".into()))?
            .to_string();
        let point_count = r.u16()?;
        let limb_count = r.u16()? as usize;
        let mut limbs = Vec::with_capacity(limb_count);
        for _ in 0..limb_count {
            limbs.push((r.u16()?, r.u16()?));
        }
        components.push(ComponentSpec {
            name,
            point_count,
            limbs,
        });
    }
    let header = PoseHeader::with_version(version, fps, dims, components)?;
    let frames = r.u32()? as usize;
    let k = header.total_points();
    let d = header.dims();
    // Check the declared payload against what is left before allocating.
    let needed = frames
        .checked_mul(k)
        .and_then(|tk| tk.checked_mul(d + 1))
        .and_then(|n| n.checked_mul(4));
    let available = bytes.len() - r.pos;
    match needed {
        Some(n) if n <= available => {}
        _ => {
            return Err(PoseError::TruncatedFile {
                offset: r.pos,
                needed: needed.unwrap_or(usize::MAX),
                available,
            })
        }
    }
    let coordinates = r.f32_block(frames * k * d)?;
    let confidences = r.f32_block(frames * k)?;
    if r.pos != bytes.len() {
        return Err(PoseError::TrailingBytes(bytes.len() - r.pos));
    }
    PoseSequence::from_parts(header, frames, coordinates, confidences)
}

/// Size in bytes of the serialized header, including the frame count.
pub(crate) fn header_len(header: &PoseHeader) -> usize {
    4 + 2
        + 4
        + 1
        + 1
        + header
            .components()
            .iter()
            .map(|c| 1 + c.name.len() + 2 + 2 + 4 * c.limbs.len())
            .sum::<usize>()
        + 4
}

/// Serializes a sequence to SPS1. Deterministic: equal inputs give equal bytes.
pub fn serialize_pose(p: &PoseSequence) -> Vec<u8> {
    let h = p.header();
    let b = p.body();
    let mut out = Vec::with_capacity(header_len(h) + 4 * (b.coordinates().len() + b.confidences().len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&h.format_version().to_le_bytes());
    out.extend_from_slice(&h.fps().to_le_bytes());
    out.push(h.dims() as u8);
    out.push(h.components().len() as u8);
    for c in h.components() {
        out.push(c.name.len() as u8);
        out.extend_from_slice(c.name.as_bytes());
        out.extend_from_slice(&c.point_count.to_le_bytes());
        out.extend_from_slice(&(c.limbs.len() as u16).to_le_bytes());
        for &(a, bb) in &c.limbs {
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&bb.to_le_bytes());
        }
    }
    out.extend_from_slice(&(b.frame_count() as u32).to_le_bytes());
    for v in b.coordinates() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in b.confidences() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::SkeletonLayout;

    fn tiny() -> PoseSequence {
        let h = PoseHeader::new(
            25.0,
            2,
            vec![ComponentSpec::new("HAND", 3, vec![(0, 1), (1, 2)]).unwrap()],
        )
        .unwrap();
        let coords = vec![0.5, -1.25, 0.0, 0.0, 3.0, 4.0, 1.0, 1.0, 2.0, 2.0, -0.0, 7.5];
        let confs = vec![1.0, 0.0, 0.5, 0.25, 1.0, 0.75];
        PoseSequence::from_parts(h, 2, coords, confs).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = tiny();
        let bytes = serialize_pose(&p);
        let q = parse_pose_file(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(serialize_pose(&q), bytes);
        let bits = |s: &PoseSequence| -> Vec<u32> {
            s.body().coordinates().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&p), bits(&q));
    }

    #[test]
    fn serialization_is_deterministic() {
        assert_eq!(serialize_pose(&tiny()), serialize_pose(&tiny()));
    }

    #[test]
    fn documented_example_bytes() {
        let hex = "53505331 0100 0000c841 02 01 04 48414e44 0300 0200 0000 0100 0100 0200 02000000 \
                   0000003f 0000a0bf 00000000 00000000 00004040 00008040 \
                   0000803f 0000803f 00000040 00000040 00000080 0000f040 \
                   0000803f 00000000 0000003f 0000803e 0000803f 0000403f";
        let digits: String = hex.chars().filter(|c| c.is_ascii_hexdigit()).collect();
        let expected: Vec<u8> = (0..digits.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&digits[i..i + 2], 16).unwrap())
            .collect();
        assert_eq!(serialize_pose(&tiny()), expected);
    }

    #[test]
    fn tiny_layout_bytes() {
        let bytes = serialize_pose(&tiny());
        // 12 fixed + (1 + 4 + 2 + 2 + 8) component + 4 frame count
        assert_eq!(header_len(tiny().header()), 33);
        assert_eq!(bytes.len(), 33 + 4 * 2 * 3 * 3);
        assert_eq!(&bytes[0..4], b"SPS1");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &25.0f32.to_le_bytes());
        assert_eq!(bytes[10], 2);
        assert_eq!(bytes[11], 1);
        assert_eq!(bytes[12], 4);
        assert_eq!(&bytes[13..17], b"HAND");
    }

    #[test]
    fn holistic_payload_size() {
        let h = SkeletonLayout::holistic543().header(30.0, 3).unwrap();
        let t = 5;
        let p = PoseSequence::from_parts(h.clone(), t, vec![0.0; t * 543 * 3], vec![0.0; t * 543])
            .unwrap();
        let bytes = serialize_pose(&p);
        assert_eq!(bytes.len() - header_len(&h), 4 * t * 543 * (3 + 1));
        // Hand-computed header: 12 fixed + FACE(1+4+2+2) + BODY(1+4+2+2+4*30)
        // + LEFT_HAND(1+9+2+2+4*21) + RIGHT_HAND(1+10+2+2+4*21) + 4
        assert_eq!(header_len(&h), 12 + 9 + 129 + 98 + 99 + 4);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = serialize_pose(&tiny());
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(parse_pose_file(&bytes), Err(PoseError::BadMagic(m)) if &m == b"XXXX"));
        assert!(matches!(parse_pose_file(b"SP"), Err(PoseError::TruncatedFile { .. })));
        assert!(matches!(parse_pose_file(b"XY"), Err(PoseError::BadMagic(_))));
    }

    #[test]
    fn every_truncation_is_typed() {
        let bytes = serialize_pose(&tiny());
        for n in 0..bytes.len() {
            let r = parse_pose_file(&bytes[..n]);
            assert!(matches!(r, Err(PoseError::TruncatedFile { .. })), "len {n}: {r:?}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(parse_pose_file(&long), Err(PoseError::TrailingBytes(1)));
    }

    #[test]
    fn huge_frame_count_does_not_allocate() {
        let mut bytes = serialize_pose(&tiny());
        let at = header_len(tiny().header()) - 4;
        bytes[at..at + 4].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            parse_pose_file(&bytes),
            Err(PoseError::TruncatedFile { .. })
        ));
    }

    #[test]
    fn out_of_range_confidence_is_an_invariant_violation() {
        let mut bytes = serialize_pose(&tiny());
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&1.5f32.to_le_bytes());
        assert!(matches!(
            parse_pose_file(&bytes),
            Err(PoseError::InvariantViolation(_))
        ));
    }
}
