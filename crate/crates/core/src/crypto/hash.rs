use std::fmt;

use serde::{Serialize, Serializer};
use sha3::{Digest as _, Sha3_512};
use zeroize::{Zeroize, ZeroizeOnDrop};

pub const DIGEST_LEN: usize = 64;
pub const CLAIM_KEY_LEN: usize = 32;

/// Domain-separation tag of the hash-to-group map.
pub const H1_DST: &[u8] = b"CODSSI-H1-v1";
/// Domain-separation tag of the OPRF finalization hash.
pub const H2_DST: &[u8] = b"CODSSI-H2-v1";

/// SHA3-512 output: a claim commitment.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        Some(Self(bytes.try_into().ok()?))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..16])
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

fn put_framed(out: &mut Vec<u8>, part: &[u8]) {
    out.extend_from_slice(&(part.len() as u64).to_be_bytes());
    out.extend_from_slice(part);
}

/// `len(value) ‖ value ‖ len(salt) ‖ salt` with 8-byte big-endian lengths.
///
/// This is both the commitment preimage and the AEAD plaintext of a claim.
pub fn frame_opening(value: &[u8], salt: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + value.len() + salt.len());
    put_framed(&mut out, value);
    put_framed(&mut out, salt);
    out
}

/// Inverse of [`frame_opening`]; `None` unless the input is exactly one
/// framed value followed by one framed salt.
pub fn split_opening(framed: &[u8]) -> Option<(&[u8], &[u8])> {
    fn take(buf: &[u8]) -> Option<(&[u8], &[u8])> {
        let len = u64::from_be_bytes(buf.get(..8)?.try_into().ok()?);
        let len = usize::try_from(len).ok()?;
        let body = buf.get(8..)?;
        (body.len() >= len).then(|| body.split_at(len))
    }
    let (value, rest) = take(framed)?;
    let (salt, rest) = take(rest)?;
    rest.is_empty().then_some((value, salt))
}

/// Hash of an already framed opening.
pub fn commit_framed(framed: &[u8]) -> Digest {
    Digest(Sha3_512::digest(framed).into())
}

pub fn commit(value: &[u8], salt: &[u8]) -> Digest {
    commit_framed(&frame_opening(value, salt))
}

/// 256-bit AEAD key for a single claim.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct ClaimKey(pub(crate) [u8; CLAIM_KEY_LEN]);

impl ClaimKey {
    pub fn from_bytes(bytes: [u8; CLAIM_KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; CLAIM_KEY_LEN] {
        &self.0
    }

    /// `SHA3-512(H2_DST ‖ framed x ‖ framed c)` truncated to 256 bits.
    pub(crate) fn finalize(x: &Digest, unblinded: &[u8]) -> Self {
        let mut h = Sha3_512::new();
        h.update(H2_DST);
        h.update((DIGEST_LEN as u64).to_be_bytes());
        h.update(x.0);
        h.update((unblinded.len() as u64).to_be_bytes());
        h.update(unblinded);
        let full = h.finalize();
        let mut key = [0u8; CLAIM_KEY_LEN];
        key.copy_from_slice(&full[..CLAIM_KEY_LEN]);
        Self(key)
    }
}

impl fmt::Debug for ClaimKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClaimKey(..)")
    }
}
