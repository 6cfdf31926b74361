use aes_gcm::aead::{AeadInPlace, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce, Tag};
use serde::Serialize;
use thiserror::Error;

use super::hash::ClaimKey;

pub const IV_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

pub type Iv = [u8; IV_LEN];

/// AES-256-GCM output with a detached tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AeadBox {
    #[serde(with = "hex::serde")]
    pub iv: Iv,
    #[serde(with = "hex::serde")]
    pub ciphertext: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub tag: [u8; TAG_LEN],
}

impl AeadBox {
    /// `|iv| + |ct| + |tag|`.
    pub fn storage_len(&self) -> usize {
        IV_LEN + self.ciphertext.len() + TAG_LEN
    }
}

/// Every decryption failure looks the same, whatever the cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("authentication failed")]
pub struct AuthFailure;

pub fn aead_seal(key: &ClaimKey, iv: &Iv, plaintext: &[u8], aad: &[u8]) -> AeadBox {
    let cipher = Aes256Gcm::new(key.as_bytes().into());
    let mut ciphertext = plaintext.to_vec();
    let tag = cipher
        .encrypt_in_place_detached(Nonce::from_slice(iv), aad, &mut ciphertext)
        .expect("plaintext within AES-GCM length limit");
    AeadBox {
        iv: *iv,
        ciphertext,
        tag: tag.into(),
    }
}

pub fn aead_open(key: &ClaimKey, sealed: &AeadBox, aad: &[u8]) -> Result<Vec<u8>, AuthFailure> {
    let cipher = Aes256Gcm::new(key.as_bytes().into());
    let mut buf = sealed.ciphertext.clone();
    cipher
        .decrypt_in_place_detached(
            Nonce::from_slice(&sealed.iv),
            aad,
            &mut buf,
            Tag::from_slice(&sealed.tag),
        )
        .map_err(|_| AuthFailure)?;
    Ok(buf)
}
