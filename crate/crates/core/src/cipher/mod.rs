//! Block cipher, modes of operation and the determinism probe.
//!
//! Every mode runs over the same AES-128 permutation. Randomness comes only
//! from the caller's RNG handle; nothing here touches global state.
//!
//! | mode | IV / nonce                 | padding | tag |
//! |------|----------------------------|---------|-----|
//! | None | -                          | -       | -   |
//! | ECB  | -                          | PKCS#7  | -   |
//! | CBC  | 16-byte IV                 | PKCS#7  | -   |
//! | CTR  | 12-byte nonce, counter = 1 | -       | -   |
//! | GCM  | 12-byte nonce              | -       | 16  |

mod aes;
mod gcm;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use aes::{Aes128, BLOCK_LEN, KEY_LEN};
pub use gcm::{NONCE_LEN, TAG_LEN};

pub(crate) use aes::SBOX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("invalid length: expected {expected}, got {actual}")]
    InvalidLength { expected: usize, actual: usize },
    #[error("authentication tag mismatch")]
    AuthFailure,
    #[error("invalid PKCS#7 padding")]
    PaddingError,
    #[error("ciphertext shape does not match mode {0}")]
    ModeMismatch(CipherMode),
    #[error("plaintext must not be empty")]
    EmptyPlaintext,
    #[error("determinism probe needs at least 2 trials, got {0}")]
    TooFewTrials(usize),
}

pub type Result<T, E = CryptoError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CipherMode {
    None,
    #[serde(rename = "ECB")]
    Ecb,
    #[serde(rename = "CBC")]
    Cbc,
    #[serde(rename = "CTR")]
    Ctr,
    #[serde(rename = "GCM")]
    Gcm,
}

impl CipherMode {
    pub const ALL: [CipherMode; 5] = [Self::None, Self::Ecb, Self::Cbc, Self::Ctr, Self::Gcm];

    /// Whether the mode is on the list of modes that resist ciphertext replay.
    /// CBC is included even though it carries no integrity protection.
    pub fn replay_safe(self) -> bool {
        matches!(self, Self::Cbc | Self::Ctr | Self::Gcm)
    }

    pub fn is_authenticated(self) -> bool {
        self == Self::Gcm
    }

    /// Length of the IV or nonce carried with each ciphertext.
    pub fn nonce_len(self) -> usize {
        match self {
            Self::None | Self::Ecb => 0,
            Self::Cbc => BLOCK_LEN,
            Self::Ctr | Self::Gcm => NONCE_LEN,
        }
    }

    fn padded(self) -> bool {
        matches!(self, Self::Ecb | Self::Cbc)
    }
}

impl fmt::Display for CipherMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Self::None => "None",
            Self::Ecb => "ECB",
            Self::Cbc => "CBC",
            Self::Ctr => "CTR",
            Self::Gcm => "GCM",
        })
    }
}

impl FromStr for CipherMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown cipher mode {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoncePolicy {
    #[default]
    RandomPerMessage,
    CounterPerMessage,
}

/// 128-bit key; serialized as 32 hex digits.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Key128(pub [u8; KEY_LEN]);

impl fmt::Debug for Key128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key128({})", hex::encode(self.0))
    }
}

impl FromStr for Key128 {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bytes = hex::decode(s).map_err(|e| format!("key is not hex: {e}"))?;
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| format!("key must be {KEY_LEN} bytes, got {}", b.len()))?;
        Ok(Self(arr))
    }
}

impl Serialize for Key128 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Key128 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Mode, key and nonce policy of one endpoint's crypto module.
///
/// `kcmvp_certified` is a declared attribute of the module and is never
/// checked cryptographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CipherConfig {
    pub mode: CipherMode,
    #[serde(default)]
    pub key: Key128,
    #[serde(default)]
    pub nonce_policy: NoncePolicy,
    #[serde(default)]
    pub kcmvp_certified: bool,
}

impl CipherConfig {
    pub fn plaintext() -> Self {
        Self::new(CipherMode::None, Key128::default())
    }

    pub fn new(mode: CipherMode, key: Key128) -> Self {
        Self {
            mode,
            key,
            nonce_policy: NoncePolicy::RandomPerMessage,
            kcmvp_certified: false,
        }
    }

    pub fn with_nonce_policy(mut self, policy: NoncePolicy) -> Self {
        self.nonce_policy = policy;
        self
    }

    pub fn certified(mut self, certified: bool) -> Self {
        self.kcmvp_certified = certified;
        self
    }
}

impl Default for CipherConfig {
    fn default() -> Self {
        Self::plaintext()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    pub body: Vec<u8>,
    pub nonce_or_iv: Option<Vec<u8>>,
    pub tag: Option<[u8; TAG_LEN]>,
}

impl Ciphertext {
    /// Concatenation `nonce || body || tag`, absent parts omitted.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        if let Some(n) = &self.nonce_or_iv {
            out.extend_from_slice(n);
        }
        out.extend_from_slice(&self.body);
        if let Some(t) = &self.tag {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn wire_len(&self) -> usize {
        self.nonce_or_iv.as_ref().map_or(0, Vec::len)
            + self.body.len()
            + self.tag.map_or(0, |t| t.len())
    }

    /// Splits a `to_wire` encoding back into its parts for `mode`.
    pub fn from_wire(mode: CipherMode, bytes: &[u8]) -> Result<Self> {
        let nonce_len = mode.nonce_len();
        let tag_len = if mode.is_authenticated() { TAG_LEN } else { 0 };
        if bytes.len() < nonce_len + tag_len {
            return Err(CryptoError::InvalidLength {
                expected: nonce_len + tag_len,
                actual: bytes.len(),
            });
        }
        let (nonce, rest) = bytes.split_at(nonce_len);
        let (body, tag) = rest.split_at(rest.len() - tag_len);
        Ok(Self {
            body: body.to_vec(),
            nonce_or_iv: (nonce_len > 0).then(|| nonce.to_vec()),
            tag: (tag_len > 0).then(|| tag.try_into().expect("tag length checked")),
        })
    }
}

/// Raw AES-128 encryption of one block.
pub fn block_encrypt(key: &[u8], block: &[u8]) -> Result<[u8; BLOCK_LEN]> {
    let (key, mut block) = key_and_block(key, block)?;
    Aes128::new(&key).encrypt_block(&mut block);
    Ok(block)
}

pub fn block_decrypt(key: &[u8], block: &[u8]) -> Result<[u8; BLOCK_LEN]> {
    let (key, mut block) = key_and_block(key, block)?;
    Aes128::new(&key).decrypt_block(&mut block);
    Ok(block)
}

fn key_and_block(key: &[u8], block: &[u8]) -> Result<([u8; KEY_LEN], [u8; BLOCK_LEN])> {
    let key = key.try_into().map_err(|_| CryptoError::InvalidLength {
        expected: KEY_LEN,
        actual: key.len(),
    })?;
    let block = block.try_into().map_err(|_| CryptoError::InvalidLength {
        expected: BLOCK_LEN,
        actual: block.len(),
    })?;
    Ok((key, block))
}

/// Sending half of a cipher configuration.
///
/// Holds the expanded key and, for [`NoncePolicy::CounterPerMessage`], the
/// message counter. The counter starts at 1 and increments per message; the
/// 12-byte nonce is `00000000 || counter (u64 BE)`. A CBC IV under the counter
/// policy is the encryption of `0^8 || counter (u64 BE)`.
#[derive(Debug, Clone)]
pub struct Encryptor {
    cfg: CipherConfig,
    aes: Aes128,
    counter: u64,
}

impl Encryptor {
    pub fn new(cfg: CipherConfig) -> Self {
        Self {
            aes: Aes128::new(&cfg.key.0),
            cfg,
            counter: 0,
        }
    }

    pub fn config(&self) -> &CipherConfig {
        &self.cfg
    }

    pub fn encrypt<R: RngCore + ?Sized>(&mut self, plaintext: &[u8], rng: &mut R) -> Result<Ciphertext> {
        self.seal(plaintext, &[], rng)
    }

    /// Same as [`decrypt_with_aad`] but reuses the expanded key.
    pub fn open(&self, ct: &Ciphertext, aad: &[u8]) -> Result<Vec<u8>> {
        open_with(&self.aes, self.cfg.mode, ct, aad)
    }

    /// Encrypts `plaintext`; `aad` is authenticated under GCM and ignored otherwise.
    pub fn seal<R: RngCore + ?Sized>(
        &mut self,
        plaintext: &[u8],
        aad: &[u8],
        rng: &mut R,
    ) -> Result<Ciphertext> {
        if plaintext.is_empty() {
            return Err(CryptoError::EmptyPlaintext);
        }
        let mode = self.cfg.mode;
        let mut body = if mode.padded() {
            pkcs7_pad(plaintext)
        } else {
            plaintext.to_vec()
        };
        let nonce = self.next_nonce(rng);
        let mut tag = None;
        match mode {
            CipherMode::None => {}
            CipherMode::Ecb => {
                for block in body.chunks_exact_mut(BLOCK_LEN) {
                    self.aes.encrypt_block(block.try_into().expect("exact chunk"));
                }
            }
            CipherMode::Cbc => {
                let mut prev: [u8; BLOCK_LEN] = nonce.as_slice().try_into().expect("iv length");
                for block in body.chunks_exact_mut(BLOCK_LEN) {
                    let block: &mut [u8; BLOCK_LEN] = block.try_into().expect("exact chunk");
                    xor_into(block, &prev);
                    self.aes.encrypt_block(block);
                    prev = *block;
                }
            }
            CipherMode::Ctr => gcm::ctr_apply(&self.aes, &nonce12(&nonce), 1, &mut body),
            CipherMode::Gcm => tag = Some(gcm::seal(&self.aes, &nonce12(&nonce), aad, &mut body)),
        }
        Ok(Ciphertext {
            body,
            nonce_or_iv: (!nonce.is_empty()).then_some(nonce),
            tag,
        })
    }

    fn next_nonce<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Vec<u8> {
        let len = self.cfg.mode.nonce_len();
        if len == 0 {
            return Vec::new();
        }
        match self.cfg.nonce_policy {
            NoncePolicy::RandomPerMessage => {
                let mut n = vec![0u8; len];
                rng.fill_bytes(&mut n);
                n
            }
            NoncePolicy::CounterPerMessage => {
                self.counter += 1;
                let mut n = vec![0u8; len];
                n[len - 8..].copy_from_slice(&self.counter.to_be_bytes());
                if self.cfg.mode == CipherMode::Cbc {
                    let block: &mut [u8; BLOCK_LEN] = n.as_mut_slice().try_into().expect("iv length");
                    self.aes.encrypt_block(block);
                }
                n
            }
        }
    }
}

/// One-shot encryption. A counter nonce policy restarts at 1 on every call,
/// so use an [`Encryptor`] when sending more than one message.
pub fn encrypt<R: RngCore + ?Sized>(cfg: &CipherConfig, plaintext: &[u8], rng: &mut R) -> Result<Ciphertext> {
    Encryptor::new(*cfg).encrypt(plaintext, rng)
}

pub fn decrypt(cfg: &CipherConfig, ct: &Ciphertext) -> Result<Vec<u8>> {
    decrypt_with_aad(cfg, ct, &[])
}

pub fn decrypt_with_aad(cfg: &CipherConfig, ct: &Ciphertext, aad: &[u8]) -> Result<Vec<u8>> {
    open_with(&Aes128::new(&cfg.key.0), cfg.mode, ct, aad)
}

fn open_with(aes: &Aes128, mode: CipherMode, ct: &Ciphertext, aad: &[u8]) -> Result<Vec<u8>> {
    let nonce = check_shape(mode, ct)?;
    if mode == CipherMode::None {
        return Ok(ct.body.clone());
    }
    let mut body = ct.body.clone();
    if mode.padded() && (body.is_empty() || !body.len().is_multiple_of(BLOCK_LEN)) {
        return Err(CryptoError::InvalidLength {
            expected: body.len().div_ceil(BLOCK_LEN).max(1) * BLOCK_LEN,
            actual: body.len(),
        });
    }
    match mode {
        CipherMode::None => unreachable!(),
        CipherMode::Ecb => {
            for block in body.chunks_exact_mut(BLOCK_LEN) {
                aes.decrypt_block(block.try_into().expect("exact chunk"));
            }
        }
        CipherMode::Cbc => {
            let mut prev: [u8; BLOCK_LEN] = nonce.try_into().expect("iv length");
            for block in body.chunks_exact_mut(BLOCK_LEN) {
                let block: &mut [u8; BLOCK_LEN] = block.try_into().expect("exact chunk");
                let saved = *block;
                aes.decrypt_block(block);
                xor_into(block, &prev);
                prev = saved;
            }
        }
        CipherMode::Ctr => gcm::ctr_apply(aes, &nonce12(nonce), 1, &mut body),
        CipherMode::Gcm => {
            let tag = ct.tag.as_ref().expect("shape checked");
            if !gcm::open(aes, &nonce12(nonce), aad, &mut body, tag) {
                return Err(CryptoError::AuthFailure);
            }
        }
    }
    if mode.padded() {
        pkcs7_unpad(&mut body)?;
    }
    Ok(body)
}

fn check_shape(mode: CipherMode, ct: &Ciphertext) -> Result<&[u8]> {
    let nonce = ct.nonce_or_iv.as_deref().unwrap_or(&[]);
    let nonce_ok = nonce.len() == mode.nonce_len() && (ct.nonce_or_iv.is_some() == (mode.nonce_len() > 0));
    let tag_ok = ct.tag.is_some() == mode.is_authenticated();
    if nonce_ok && tag_ok {
        Ok(nonce)
    } else {
        Err(CryptoError::ModeMismatch(mode))
    }
}

fn nonce12(n: &[u8]) -> [u8; NONCE_LEN] {
    n.try_into().expect("nonce length checked")
}

fn xor_into(dst: &mut [u8; BLOCK_LEN], src: &[u8; BLOCK_LEN]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

fn pkcs7_pad(data: &[u8]) -> Vec<u8> {
    let pad = BLOCK_LEN - data.len() % BLOCK_LEN;
    let mut out = Vec::with_capacity(data.len() + pad);
    out.extend_from_slice(data);
    out.resize(data.len() + pad, pad as u8);
    out
}

fn pkcs7_unpad(data: &mut Vec<u8>) -> Result<()> {
    let pad = *data.last().ok_or(CryptoError::PaddingError)? as usize;
    if pad == 0 || pad > BLOCK_LEN || pad > data.len() {
        return Err(CryptoError::PaddingError);
    }
    if !data[data.len() - pad..].iter().all(|&b| b as usize == pad) {
        return Err(CryptoError::PaddingError);
    }
    data.truncate(data.len() - pad);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Determinism {
    Deterministic,
    Randomized,
}

/// Plaintext used by [`probe_determinism`]: a command code padded to one block.
pub const PROBE_PLAINTEXT: [u8; BLOCK_LEN] = [0x01, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];

/// Encrypts [`PROBE_PLAINTEXT`] `trials` times through one [`Encryptor`] and
/// reports `Deterministic` iff every ciphertext is identical.
pub fn probe_determinism<R: RngCore + ?Sized>(
    cfg: &CipherConfig,
    trials: usize,
    rng: &mut R,
) -> Result<Determinism> {
    if trials < 2 {
        return Err(CryptoError::TooFewTrials(trials));
    }
    let mut enc = Encryptor::new(*cfg);
    let first = enc.encrypt(&PROBE_PLAINTEXT, rng)?;
    for _ in 1..trials {
        if enc.encrypt(&PROBE_PLAINTEXT, rng)? != first {
            return Ok(Determinism::Randomized);
        }
    }
    Ok(Determinism::Deterministic)
}
