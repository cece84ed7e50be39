//! Bit-string helpers.
//!
//! An `ell`-bit string is stored as the low `ell` bits of an unsigned integer,
//! most significant bit first: the string `110` is the integer 6 and its
//! leftmost character is bit `ell - 1`.

use crate::error::{Error, Result};

/// Largest supported bit-length for seeds, hash domains and WHT sizes.
pub const MAX_ELL: u32 = 24;

/// GF(2) inner product of two bit strings.
#[inline]
pub fn dot(a: u32, b: u32) -> u8 {
    ((a & b).count_ones() & 1) as u8
}

#[inline]
pub fn mask(ell: u32) -> u64 {
    if ell >= 64 {
        u64::MAX
    } else {
        (1u64 << ell) - 1
    }
}

pub fn check_ell(ell: u32) -> Result<()> {
    if ell == 0 || ell > MAX_ELL {
        return Err(Error::DomainTooLarge { ell, cap: MAX_ELL });
    }
    Ok(())
}

/// Renders `x` as an `ell`-character binary string.
pub fn to_bitstring(x: u64, ell: u32) -> String {
    (0..ell)
        .rev()
        .map(|i| if (x >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parses a binary string such as `"0101"`.
pub fn parse_bitstring(s: &str) -> Result<u64> {
    if s.is_empty() || s.len() > 64 {
        return Err(Error::InvalidParameter(format!("bad bit string {s:?}")));
    }
    s.chars().try_fold(0u64, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::InvalidParameter(format!("bad bit string {s:?}"))),
    })
}

/// Big-endian encoding of the low `bits` bits of `v` in `ceil(bits / 8)` bytes.
pub fn be_bytes(v: u64, bits: u32) -> Vec<u8> {
    let n = bits.div_ceil(8) as usize;
    v.to_be_bytes()[8 - n..].to_vec()
}

pub fn from_be_bytes(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64)
}

/// Serde adapter writing integers as lowercase hex strings.
pub mod hex_u32 {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u32, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
        let s = String::deserialize(d)?;
        u32::from_str_radix(&s, 16).map_err(D::Error::custom)
    }
}

/// Serde adapter for byte strings as hex.
pub mod hex_bytes {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::encode_hex(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        super::decode_hex(&s).map_err(D::Error::custom)
    }
}

pub fn encode_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn decode_hex(s: &str) -> std::result::Result<Vec<u8>, String> {
    if s.len() % 2 != 0 {
        return Err(format!("odd-length hex string {s:?}"));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|e| e.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitstring_convention_is_msb_first() {
        assert_eq!(parse_bitstring("110").unwrap(), 6);
        assert_eq!(to_bitstring(5, 3), "101");
        assert_eq!(to_bitstring(1, 4), "0001");
    }

    #[test]
    fn inner_product() {
        assert_eq!(dot(0b110, 0b011), 1);
        assert_eq!(dot(0b110, 0b110), 0);
        assert_eq!(dot(0, 0xffff), 0);
    }

    #[test]
    fn be_encoding() {
        assert_eq!(be_bytes(0x1234, 12), vec![0x12, 0x34]);
        assert_eq!(be_bytes(0x5, 3), vec![0x05]);
        assert_eq!(from_be_bytes(&[0x12, 0x34]), 0x1234);
    }

    #[test]
    fn hex_roundtrip() {
        let v = vec![0u8, 1, 0xab, 0xff];
        assert_eq!(decode_hex(&encode_hex(&v)).unwrap(), v);
        assert!(decode_hex("abc").is_err());
    }

    #[test]
    fn ell_cap() {
        assert!(check_ell(24).is_ok());
        assert_eq!(check_ell(25), Err(Error::DomainTooLarge { ell: 25, cap: 24 }));
        assert!(check_ell(0).is_err());
    }
}
