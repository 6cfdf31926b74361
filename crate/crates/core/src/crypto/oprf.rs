//! 2HashDH: `F(k, x) = H2(x, H1(x)^k)`, evaluated obliviously as
//! blind `a = H1(x)^r`, evaluate `b = a^k`, finalize `H2(x, b^(1/r))`.

use rand::{CryptoRng, RngCore};

use super::group::PrimeOrderGroup;
use super::hash::{ClaimKey, Digest};
use super::CryptoError;

/// Client-side blind: samples `r` and returns `(r, H1(x)^r)`.
pub fn blind<G: PrimeOrderGroup, R: RngCore + CryptoRng + ?Sized>(
    x: &Digest,
    rng: &mut R,
) -> (G::Scalar, G::Element) {
    let r = G::random_scalar(rng);
    let a = blind_with::<G>(x, &r);
    (r, a)
}

/// Blind with a caller-chosen exponent.
pub fn blind_with<G: PrimeOrderGroup>(x: &Digest, r: &G::Scalar) -> G::Element {
    G::exp(&G::hash_to_group(x), r)
}

/// Server-side evaluation `a^msk`.
pub fn evaluate<G: PrimeOrderGroup>(
    msk: &G::Scalar,
    a: &G::Element,
) -> Result<G::Element, CryptoError> {
    G::validate(a)?;
    Ok(G::exp(a, msk))
}

/// Client-side unblind and hash: `H2(x, b^(1/r))`.
pub fn finalize<G: PrimeOrderGroup>(
    x: &Digest,
    b: &G::Element,
    r: &G::Scalar,
) -> Result<ClaimKey, CryptoError> {
    G::validate(b)?;
    let c = G::exp(b, &G::scalar_inverse(r));
    Ok(ClaimKey::finalize(x, &G::encode(&c)))
}

/// The PRF computed directly with knowledge of the key.
pub fn derive_key_direct<G: PrimeOrderGroup>(msk: &G::Scalar, x: &Digest) -> ClaimKey {
    let c = G::exp(&G::hash_to_group(x), msk);
    ClaimKey::finalize(x, &G::encode(&c))
}

/// `H2(x, c)` for an already unblinded element.
pub fn finalize_unblinded<G: PrimeOrderGroup>(x: &Digest, c: &G::Element) -> ClaimKey {
    ClaimKey::finalize(x, &G::encode(c))
}
