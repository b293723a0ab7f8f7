//! Counter-mode keystream and GHASH, shared by the CTR and GCM modes.

use super::aes::{Aes128, BLOCK_LEN};

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

/// XORs `data` with the keystream starting at counter block `nonce || counter`.
/// The 32-bit counter wraps modulo 2^32.
pub fn ctr_apply(aes: &Aes128, nonce: &[u8; NONCE_LEN], counter: u32, data: &mut [u8]) {
    let mut ctr = counter;
    for chunk in data.chunks_mut(BLOCK_LEN) {
        let mut ks = counter_block(nonce, ctr);
        aes.encrypt_block(&mut ks);
        for (d, k) in chunk.iter_mut().zip(ks.iter()) {
            *d ^= k;
        }
        ctr = ctr.wrapping_add(1);
    }
}

fn counter_block(nonce: &[u8; NONCE_LEN], ctr: u32) -> [u8; BLOCK_LEN] {
    let mut b = [0u8; BLOCK_LEN];
    b[..NONCE_LEN].copy_from_slice(nonce);
    b[NONCE_LEN..].copy_from_slice(&ctr.to_be_bytes());
    b
}

// Multiplication in GF(2^128) with the GCM bit ordering (SP 800-38D, algorithm 1).
fn gf_mul(x: u128, y: u128) -> u128 {
    const R: u128 = 0xe1 << 120;
    let mut z = 0u128;
    let mut v = y;
    for i in 0..128 {
        if (x >> (127 - i)) & 1 == 1 {
            z ^= v;
        }
        v = if v & 1 == 1 { (v >> 1) ^ R } else { v >> 1 };
    }
    z
}

fn ghash(h: u128, aad: &[u8], ct: &[u8]) -> u128 {
    let mut y = 0u128;
    for part in [aad, ct] {
        for chunk in part.chunks(BLOCK_LEN) {
            let mut block = [0u8; BLOCK_LEN];
            block[..chunk.len()].copy_from_slice(chunk);
            y = gf_mul(y ^ u128::from_be_bytes(block), h);
        }
    }
    let lens = ((aad.len() as u128 * 8) << 64) | (ct.len() as u128 * 8);
    gf_mul(y ^ lens, h)
}

fn tag(aes: &Aes128, nonce: &[u8; NONCE_LEN], aad: &[u8], ct: &[u8]) -> [u8; TAG_LEN] {
    let mut h = [0u8; BLOCK_LEN];
    aes.encrypt_block(&mut h);
    let s = ghash(u128::from_be_bytes(h), aad, ct);
    let mut j0 = counter_block(nonce, 1);
    aes.encrypt_block(&mut j0);
    (u128::from_be_bytes(j0) ^ s).to_be_bytes()
}

/// Encrypts in place and returns the authentication tag.
pub fn seal(aes: &Aes128, nonce: &[u8; NONCE_LEN], aad: &[u8], data: &mut [u8]) -> [u8; TAG_LEN] {
    ctr_apply(aes, nonce, 2, data);
    tag(aes, nonce, aad, data)
}

/// Verifies the tag, then decrypts in place. `data` is untouched on failure.
pub fn open(
    aes: &Aes128,
    nonce: &[u8; NONCE_LEN],
    aad: &[u8],
    data: &mut [u8],
    expected: &[u8; TAG_LEN],
) -> bool {
    let computed = tag(aes, nonce, aad, data);
    let diff = computed
        .iter()
        .zip(expected.iter())
        .fold(0u8, |acc, (a, b)| acc | (a ^ b));
    if diff != 0 {
        return false;
    }
    ctr_apply(aes, nonce, 2, data);
    true
}
