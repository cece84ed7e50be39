//! Control schemes: one that reveals everything and one that commits to nothing.

use serde::{Deserialize, Serialize};

use super::{check_round, CommitmentScheme, Message, Round};
use crate::bits::{be_bytes, check_ell};
use crate::error::Result;

/// The fixed message `⊥`.
pub const BOTTOM: &[u8] = "⊥".as_bytes();

/// Sends `b ‖ x` in the clear. Perfectly binding, not hiding at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ident {
    ell: u32,
}

impl Ident {
    pub fn new(ell: u32) -> Result<Self> {
        check_ell(ell)?;
        Ok(Ident { ell })
    }
}

impl CommitmentScheme for Ident {
    fn name(&self) -> &'static str {
        "ident"
    }

    fn rounds(&self) -> usize {
        1
    }

    fn ell(&self) -> u32 {
        self.ell
    }

    fn receiver_bits(&self) -> u32 {
        self.ell
    }

    fn sender_msg(&self, j: usize, b: u8, x: u32, prefix: &[Round]) -> Result<Message> {
        check_round(j, 1, prefix.len())?;
        let mut out = vec![b];
        out.extend(be_bytes(x as u64, self.ell));
        Ok(out)
    }

    fn receiver_msg(&self, j: usize, _r: u64, prefix: &[Round], _alpha: &[u8]) -> Result<Message> {
        check_round(j, 1, prefix.len())?;
        Ok(BOTTOM.to_vec())
    }
}

/// Every message is `⊥`. Perfectly hiding, opens to anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Const {
    ell: u32,
}

impl Const {
    pub fn new(ell: u32) -> Result<Self> {
        check_ell(ell)?;
        Ok(Const { ell })
    }
}

impl CommitmentScheme for Const {
    fn name(&self) -> &'static str {
        "const"
    }

    fn rounds(&self) -> usize {
        1
    }

    fn ell(&self) -> u32 {
        self.ell
    }

    fn receiver_bits(&self) -> u32 {
        self.ell
    }

    fn sender_msg(&self, j: usize, _b: u8, _x: u32, prefix: &[Round]) -> Result<Message> {
        check_round(j, 1, prefix.len())?;
        Ok(BOTTOM.to_vec())
    }

    fn receiver_msg(&self, j: usize, _r: u64, prefix: &[Round], _alpha: &[u8]) -> Result<Message> {
        check_round(j, 1, prefix.len())?;
        Ok(BOTTOM.to_vec())
    }

    fn sender_msg_matches(&self, j: usize, _b: u8, _x: u32, prefix: &[Round], alpha: &[u8]) -> Result<bool> {
        check_round(j, 1, prefix.len())?;
        Ok(alpha == BOTTOM)
    }
}
