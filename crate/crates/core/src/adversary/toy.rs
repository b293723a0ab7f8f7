//! 16-bit toy block cipher small enough to brute-force.
//!
//! Four Feistel rounds over two 8-bit halves `(L, R)`:
//!
//! ```text
//! (L, R) -> (R, L ^ F(R, rk_i))        F(x, k) = rotl8(SBOX[x ^ k], 1)
//! ```
//!
//! `SBOX` is the AES S-box. With key bytes `hi = key >> 8`, `lo = key & 0xff`:
//!
//! ```text
//! rk_0 = hi
//! rk_1 = lo
//! rk_2 = SBOX[hi ^ rotl8(lo, 3) ^ 0x01]
//! rk_3 = SBOX[lo ^ rotl8(hi, 5) ^ 0x02]
//! ```

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::cipher::SBOX;
use crate::link::Command;

pub const KEY_SPACE: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyCipher {
    round_keys: [u8; 4],
}

impl ToyCipher {
    pub fn new(key: u16) -> Self {
        let [hi, lo] = key.to_be_bytes();
        Self {
            round_keys: [
                hi,
                lo,
                SBOX[(hi ^ lo.rotate_left(3) ^ 0x01) as usize],
                SBOX[(lo ^ hi.rotate_left(5) ^ 0x02) as usize],
            ],
        }
    }

    pub fn encrypt(&self, block: u16) -> u16 {
        let [mut l, mut r] = block.to_be_bytes();
        for &rk in &self.round_keys {
            (l, r) = (r, l ^ round(r, rk));
        }
        u16::from_be_bytes([l, r])
    }

    pub fn decrypt(&self, block: u16) -> u16 {
        let [mut l, mut r] = block.to_be_bytes();
        for &rk in self.round_keys.iter().rev() {
            (l, r) = (r ^ round(l, rk), l);
        }
        u16::from_be_bytes([l, r])
    }
}

fn round(x: u8, k: u8) -> u8 {
    SBOX[(x ^ k) as usize].rotate_left(1)
}

/// Command code in the high byte, zero low byte.
pub fn toy_command_block(cmd: Command) -> u16 {
    u16::from(cmd.code()) << 8
}

pub fn is_toy_command_block(block: u16) -> bool {
    let [code, pad] = block.to_be_bytes();
    pad == 0 && Command::from_code(code).is_some()
}

/// Every key under which each plaintext encrypts to its paired ciphertext.
/// Returns `None` when `pairs` is empty.
pub fn kpa_key_search(pairs: &[(u16, u16)]) -> Option<BTreeSet<u16>> {
    if pairs.is_empty() {
        return None;
    }
    Some(search_keys(|toy| pairs.iter().all(|&(p, c)| toy.encrypt(p) == c)))
}

/// Every key under which all `ciphertexts` decrypt to blocks accepted by `predicate`.
pub fn coa_candidates<P>(ciphertexts: &[u16], predicate: P) -> BTreeSet<u16>
where
    P: Fn(u16) -> bool + Sync,
{
    search_keys(|toy| ciphertexts.iter().all(|&c| predicate(toy.decrypt(c))))
}

fn search_keys<F>(consistent: F) -> BTreeSet<u16>
where
    F: Fn(&ToyCipher) -> bool + Sync,
{
    (0..KEY_SPACE)
        .into_par_iter()
        .map(|k| k as u16)
        .filter(|&k| consistent(&ToyCipher::new(k)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
