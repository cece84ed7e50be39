//! Two-round hash-then-extract commitment.
//!
//! Round 1: the sender sends nothing and the receiver replies with its seed
//! split as `(K, w, s)`. Round 2: the sender sends `F_K(x)` together with the
//! committed bit masked by `e_{w,s}(x) = ⟨w, x⟩ ⊕ s`. `F_K` truncates
//! SHA-256 of `K ‖ x` to `ell - a` bits.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_round, CommitmentScheme, Message, Round};
use crate::bits::{be_bytes, check_ell, dot, from_be_bytes, mask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Hm2Wire")]
pub struct Hm2 {
    ell: u32,
    /// Compression slack: `F_K` outputs `ell - a` bits.
    a: u32,
    key_bits: u32,
}

#[derive(Deserialize)]
struct Hm2Wire {
    ell: u32,
    a: u32,
    key_bits: u32,
}

impl TryFrom<Hm2Wire> for Hm2 {
    type Error = Error;

    fn try_from(w: Hm2Wire) -> Result<Self> {
        Hm2::new(w.ell, w.a, w.key_bits)
    }
}

/// Largest `key_bits + ell` whose `F_K` rows are memoised.
const ROW_CACHE_BITS: u32 = 22;

type RowId = (u32, u32, u32, u64);

static ROWS: OnceLock<Mutex<HashMap<RowId, Arc<[u32]>>>> = OnceLock::new();

thread_local! {
    static LAST_ROW: RefCell<Option<(RowId, Arc<[u32]>)>> = const { RefCell::new(None) };
}

/// The receiver's round-1 keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hm2Keys {
    pub key: u64,
    pub w: u32,
    pub s: u8,
}

impl Hm2 {
    pub const DEFAULT_ELL: u32 = 16;
    pub const DEFAULT_A: u32 = 8;
    pub const DEFAULT_KEY_BITS: u32 = 32;

    pub fn new(ell: u32, a: u32, key_bits: u32) -> Result<Self> {
        check_ell(ell)?;
        if a == 0 || a >= ell {
            return Err(Error::InvalidParameter(format!("hm2 needs 1 <= a < ell, got a={a}, ell={ell}")));
        }
        if key_bits == 0 || key_bits > 32 {
            return Err(Error::InvalidParameter(format!("hm2 key_bits must be in 1..=32, got {key_bits}")));
        }
        Ok(Hm2 { ell, a, key_bits })
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    /// Length of `F_K(x)` in bits.
    pub fn out_bits(&self) -> u32 {
        self.ell - self.a
    }

    /// Splits a receiver seed into `(K, w, s)`.
    pub fn keys_from_seed(&self, r: u64) -> Hm2Keys {
        Hm2Keys {
            key: (r >> (self.ell + 1)) & mask(self.key_bits),
            w: ((r >> 1) & mask(self.ell)) as u32,
            s: (r & 1) as u8,
        }
    }

    fn encode_keys(&self, k: &Hm2Keys) -> Message {
        let mut out = be_bytes(k.key, self.key_bits);
        out.extend(be_bytes(k.w as u64, self.ell));
        out.push(k.s);
        out
    }

    /// Parses `β_1`.
    pub fn decode_keys(&self, beta: &[u8]) -> Result<Hm2Keys> {
        let kb = self.key_bits.div_ceil(8) as usize;
        let wb = self.ell.div_ceil(8) as usize;
        if beta.len() != kb + wb + 1 {
            return Err(Error::MalformedTranscript(format!(
                "hm2 round-1 receiver message has {} bytes, expected {}",
                beta.len(),
                kb + wb + 1
            )));
        }
        let key = from_be_bytes(&beta[..kb]);
        let w = from_be_bytes(&beta[kb..kb + wb]);
        let s = beta[kb + wb];
        if key > mask(self.key_bits) || w > mask(self.ell) || s > 1 {
            return Err(Error::MalformedTranscript("hm2 keys out of range".into()));
        }
        Ok(Hm2Keys { key, w: w as u32, s })
    }

    /// `F_K(x)`.
    pub fn compress(&self, key: u64, x: u32) -> u64 {
        if self.key_bits + self.ell <= ROW_CACHE_BITS {
            return u64::from(self.row(key)[x as usize]);
        }
        self.compress_uncached(key, x)
    }

    fn compress_uncached(&self, key: u64, x: u32) -> u64 {
        let mut h = Sha256::new();
        h.update(be_bytes(key, self.key_bits));
        h.update(be_bytes(x as u64, self.ell));
        let digest = h.finalize();
        let head = u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
        head >> (64 - self.out_bits())
    }

    /// `F_K` on all of `{0,1}^ell`, memoised per process.
    fn row(&self, key: u64) -> Arc<[u32]> {
        let id = (self.ell, self.a, self.key_bits, key);
        LAST_ROW.with(|last| {
            let mut last = last.borrow_mut();
            if let Some((cached, row)) = last.as_ref() {
                if *cached == id {
                    return row.clone();
                }
            }
            let rows = ROWS.get_or_init(Default::default);
            let found = rows.lock().expect("row cache lock").get(&id).cloned();
            let row = found.unwrap_or_else(|| {
                let row: Arc<[u32]> = (0..1u32 << self.ell).map(|x| self.compress_uncached(key, x) as u32).collect();
                rows.lock().expect("row cache lock").insert(id, row.clone());
                row
            });
            *last = Some((id, row.clone()));
            row
        })
    }

    /// `e_{w,s}(x)`.
    pub fn extract(&self, keys: &Hm2Keys, x: u32) -> u8 {
        dot(keys.w, x) ^ keys.s
    }

    fn encode_alpha2(&self, f: u64, masked_bit: u8) -> Message {
        let mut out = be_bytes(f, self.out_bits());
        out.push(masked_bit);
        out
    }

    fn round1_keys(&self, prefix: &[Round]) -> Result<Hm2Keys> {
        self.decode_keys(&prefix[0].beta)
    }
}

impl CommitmentScheme for Hm2 {
    fn name(&self) -> &'static str {
        "hm2"
    }

    fn rounds(&self) -> usize {
        2
    }

    fn ell(&self) -> u32 {
        self.ell
    }

    fn receiver_bits(&self) -> u32 {
        self.key_bits + self.ell + 1
    }

    fn sender_msg(&self, j: usize, b: u8, x: u32, prefix: &[Round]) -> Result<Message> {
        check_round(j, 2, prefix.len())?;
        if j == 1 {
            return Ok(Vec::new());
        }
        let keys = self.round1_keys(prefix)?;
        Ok(self.encode_alpha2(self.compress(keys.key, x), self.extract(&keys, x) ^ b))
    }

    fn receiver_msg(&self, j: usize, r: u64, prefix: &[Round], _alpha: &[u8]) -> Result<Message> {
        check_round(j, 2, prefix.len())?;
        if j == 1 {
            Ok(self.encode_keys(&self.keys_from_seed(r)))
        } else {
            Ok(Vec::new())
        }
    }

    fn sender_msg_matches(&self, j: usize, b: u8, x: u32, prefix: &[Round], alpha: &[u8]) -> Result<bool> {
        check_round(j, 2, prefix.len())?;
        if j == 1 {
            return Ok(alpha.is_empty());
        }
        let keys = self.round1_keys(prefix)?;
        let fb = self.out_bits().div_ceil(8) as usize;
        if alpha.len() != fb + 1 {
            return Ok(false);
        }
        if alpha[fb] != self.extract(&keys, x) ^ b {
            return Ok(false);
        }
        Ok(from_be_bytes(&alpha[..fb]) == self.compress(keys.key, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commitment::{consistent_set, honest_transcript, open_verify, Decommitment};

    // Independent evaluation: build the hash input from bit strings.
    fn oracle_alpha2(ell: u32, a: u32, key_bits: u32, key: u64, w: u32, s: u8, b: u8, x: u32) -> Vec<u8> {
        let bytes_of = |v: u64, bits: u32| -> Vec<u8> {
            let n = bits.div_ceil(8);
            (0..n).rev().map(|i| (v >> (8 * i)) as u8).collect()
        };
        let mut input = bytes_of(key, key_bits);
        input.extend(bytes_of(x as u64, ell));
        let digest = Sha256::digest(&input);
        let bits: String = digest.iter().map(|byte| format!("{byte:08b}")).collect();
        let f = u64::from_str_radix(&bits[..(ell - a) as usize], 2).unwrap();
        let parity = (0..ell).filter(|i| (w >> i) & (x >> i) & 1 == 1).count() as u8 & 1;
        let mut out = bytes_of(f, ell - a);
        out.push(parity ^ s ^ b);
        out
    }

    #[test]
    fn round_two_matches_oracle() {
        let s = Hm2::new(12, 6, 16).unwrap();
        for (r, b, x) in [(0x1234_5678_9u64, 0u8, 0xabc), (0x7777_0001, 1, 0x001), (u64::MAX, 1, 0xfff)] {
            let r = r & mask(s.receiver_bits());
            let t = honest_transcript(&s, b, x, r).unwrap();
            let k = s.keys_from_seed(r);
            assert!(t.rounds[0].alpha.is_empty());
            assert_eq!(t.rounds[0].beta, s.encode_keys(&k));
            assert_eq!(t.rounds[1].alpha, oracle_alpha2(12, 6, 16, k.key, k.w, k.s, b, x));
            assert!(t.rounds[1].beta.is_empty());
        }
    }

    #[test]
    fn round_one_is_a_projection_of_r() {
        let s = Hm2::new(8, 4, 8).unwrap();
        let r = (0xa5u64 << 9) | (0x3c << 1) | 1;
        let beta = s.receiver_msg(1, r, &[], &[]).unwrap();
        assert_eq!(beta, vec![0xa5, 0x3c, 1]);
        assert_eq!(s.decode_keys(&beta).unwrap(), Hm2Keys { key: 0xa5, w: 0x3c, s: 1 });
    }

    #[test]
    fn opening_to_other_bit_fails() {
        let s = Hm2::new(10, 4, 8).unwrap();
        let t = honest_transcript(&s, 0, 0x155, 0x3_1415).unwrap();
        assert!(!open_verify(&s, &t, 1, &Decommitment { b: 1, x: 0x155 }).unwrap());
        assert!(open_verify(&s, &t, 0, &Decommitment { b: 0, x: 0x155 }).unwrap());
    }

    #[test]
    fn consistent_sets_at_ell12_match_streaming_count() {
        let s = Hm2::new(12, 6, 16).unwrap();
        let r = 0x0dea_dbee_f & mask(s.receiver_bits());
        let t = honest_transcript(&s, 1, 0x5a5, r).unwrap();
        let k = s.keys_from_seed(r);
        let alpha = &t.rounds[1].alpha;
        let y0 = from_be_bytes(&alpha[..1]);
        let c = alpha[1];
        for b in 0..2u8 {
            let count = (0..1u32 << 12)
                .rev()
                .filter(|&x| s.compress(k.key, x) == y0 && s.extract(&k, x) == c ^ b)
                .count();
            assert_eq!(consistent_set(&s, &t, b).unwrap().len(), count);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Hm2::new(8, 0, 8).is_err());
        assert!(Hm2::new(8, 8, 8).is_err());
        assert!(Hm2::new(8, 4, 33).is_err());
        assert!(Hm2::new(25, 4, 8).is_err());
    }

    #[test]
    fn malformed_keys() {
        let s = Hm2::new(8, 4, 8).unwrap();
        let prefix = [Round { alpha: vec![], beta: vec![1, 2] }];
        assert!(matches!(s.sender_msg(2, 0, 0, &prefix), Err(Error::MalformedTranscript(_))));
    }

    #[test]
    fn memoised_rows_agree() {
        let s = Hm2::new(10, 4, 6).unwrap();
        for key in [0u64, 17, 63] {
            for x in [0u32, 1, 513, 1023] {
                assert_eq!(s.compress(key, x), s.compress_uncached(key, x));
            }
        }
    }
}
