//! Stateless primitives: commitment hash, prime-order groups, the 2HashDH
//! OPRF and the AEAD wrapper.

mod aead;
mod group;
mod hash;
pub mod oprf;
pub mod toy;

pub use aead::{aead_open, aead_seal, AeadBox, AuthFailure, Iv, IV_LEN, TAG_LEN};
pub use group::{GroupElement, PrimeOrderGroup, Scalar, Secp256k1, ELEMENT_LEN, SCALAR_LEN};
pub use hash::{
    commit, commit_framed, frame_opening, split_opening, ClaimKey, Digest, CLAIM_KEY_LEN,
    DIGEST_LEN, H1_DST, H2_DST,
};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CryptoError {
    /// Identity, off-curve, non-subgroup or badly sized element encoding.
    #[error("invalid group element")]
    InvalidElement,
    #[error("invalid scalar")]
    InvalidScalar,
}
