use std::fmt;

use k256::elliptic_curve::group::prime::PrimeCurveAffine;
use k256::elliptic_curve::group::GroupEncoding;
use k256::elliptic_curve::hash2curve::{ExpandMsgXmd, GroupDigest};
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::{Field, PrimeField};
use k256::{AffinePoint, NonZeroScalar, ProjectivePoint, U256};
use rand::{CryptoRng, RngCore};
use sha3::Sha3_512;
use zeroize::Zeroize;

use super::hash::{Digest, H1_DST};
use super::CryptoError;

/// Compressed SEC1 point length.
pub const ELEMENT_LEN: usize = 33;
pub const SCALAR_LEN: usize = 32;

/// A prime-order group as seen by the OPRF: hashing into it, exponentiation,
/// scalar sampling and inversion, and a validating codec.
///
/// Implemented by [`Secp256k1`] for deployment and by
/// [`ToyGroup`](super::toy::ToyGroup) for exhaustive checks.
pub trait PrimeOrderGroup {
    type Element: Clone + PartialEq + fmt::Debug + Send + Sync;
    type Scalar: Clone + fmt::Debug + Send + Sync;

    const NAME: &'static str;
    const ELEMENT_LEN: usize;

    fn hash_to_group(x: &Digest) -> Self::Element;
    /// Rejects the identity and anything outside the prime-order subgroup.
    fn validate(element: &Self::Element) -> Result<(), CryptoError>;
    fn exp(element: &Self::Element, scalar: &Self::Scalar) -> Self::Element;
    /// Uniform in `[1, order - 1]`.
    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self::Scalar;
    fn scalar_inverse(scalar: &Self::Scalar) -> Self::Scalar;
    fn encode(element: &Self::Element) -> Vec<u8>;
    fn decode(bytes: &[u8]) -> Result<Self::Element, CryptoError>;
}

/// Point of the secp256k1 group. The identity is representable only through
/// [`GroupElement::identity`], so that validation paths can be exercised.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElement(ProjectivePoint);

impl GroupElement {
    pub fn identity() -> Self {
        Self(ProjectivePoint::IDENTITY)
    }

    pub fn generator() -> Self {
        Self(ProjectivePoint::GENERATOR)
    }

    pub fn is_identity(&self) -> bool {
        self.0 == ProjectivePoint::IDENTITY
    }

    pub fn to_bytes(&self) -> [u8; ELEMENT_LEN] {
        let mut out = [0u8; ELEMENT_LEN];
        if !self.is_identity() {
            out.copy_from_slice(&self.0.to_affine().to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: &[u8; ELEMENT_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidElement)?;
        // Only the two compressed tags are canonical.
        if arr[0] != 0x02 && arr[0] != 0x03 {
            return Err(CryptoError::InvalidElement);
        }
        let affine: Option<AffinePoint> =
            AffinePoint::from_bytes(k256::CompressedPoint::from_slice(arr)).into();
        match affine {
            Some(p) if !bool::from(p.is_identity()) => Ok(Self(p.into())),
            _ => Err(CryptoError::InvalidElement),
        }
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", hex::encode(&self.to_bytes()[..8]))
    }
}

/// Non-zero scalar modulo the secp256k1 group order. Zeroized on drop.
#[derive(Clone)]
pub struct Scalar(NonZeroScalar);

impl Scalar {
    pub fn from_u64(v: u64) -> Option<Self> {
        Option::from(NonZeroScalar::new(k256::Scalar::from(v))).map(Self)
    }

    /// Canonical big-endian encoding; zero and values `>= order` are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SCALAR_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidScalar)?;
        let s: Option<k256::Scalar> = k256::Scalar::from_repr(arr.into()).into();
        let s = s.ok_or(CryptoError::InvalidScalar)?;
        Option::from(NonZeroScalar::new(s))
            .map(Self)
            .ok_or(CryptoError::InvalidScalar)
    }

    /// Reduces 32 bytes modulo the order; `None` on zero.
    pub fn from_bytes_reduced(bytes: &[u8; SCALAR_LEN]) -> Option<Self> {
        let s = <k256::Scalar as Reduce<U256>>::reduce_bytes(bytes.into());
        Option::from(NonZeroScalar::new(s)).map(Self)
    }

    pub fn to_bytes(&self) -> [u8; SCALAR_LEN] {
        self.0.to_repr().into()
    }

    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let s = k256::Scalar::random(&mut *rng);
            if let Some(nz) = Option::from(NonZeroScalar::new(s)) {
                return Self(nz);
            }
        }
    }

    pub fn invert(&self) -> Self {
        let inv: Option<k256::Scalar> = self.0.as_ref().invert().into();
        let inv = inv.expect("non-zero scalar is invertible");
        Self(Option::from(NonZeroScalar::new(inv)).expect("inverse is non-zero"))
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl Eq for Scalar {}

impl Drop for Scalar {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

/// secp256k1 with SHA3-512 `expand_message_xmd` hash-to-curve.
#[derive(Debug, Clone, Copy)]
pub struct Secp256k1;

impl PrimeOrderGroup for Secp256k1 {
    type Element = GroupElement;
    type Scalar = Scalar;

    const NAME: &'static str = "secp256k1";
    const ELEMENT_LEN: usize = ELEMENT_LEN;

    fn hash_to_group(x: &Digest) -> GroupElement {
        // The map hits the identity with negligible probability; a counter
        // suffix keeps the output non-identity unconditionally.
        let mut counter = 0u8;
        loop {
            let suffix = [counter];
            let msg: &[&[u8]] = if counter == 0 {
                &[&x.0]
            } else {
                &[&x.0, &suffix]
            };
            let p = k256::Secp256k1::hash_from_bytes::<ExpandMsgXmd<Sha3_512>>(msg, &[H1_DST])
                .expect("fixed non-empty DST");
            if p != ProjectivePoint::IDENTITY {
                return GroupElement(p);
            }
            counter += 1;
        }
    }

    fn validate(element: &GroupElement) -> Result<(), CryptoError> {
        // Cofactor 1: every non-identity curve point lies in the prime-order group.
        if element.is_identity() {
            Err(CryptoError::InvalidElement)
        } else {
            Ok(())
        }
    }

    fn exp(element: &GroupElement, scalar: &Scalar) -> GroupElement {
        GroupElement(element.0 * *scalar.0)
    }

    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Scalar {
        Scalar::random(rng)
    }

    fn scalar_inverse(scalar: &Scalar) -> Scalar {
        scalar.invert()
    }

    fn encode(element: &GroupElement) -> Vec<u8> {
        element.to_bytes().to_vec()
    }

    fn decode(bytes: &[u8]) -> Result<GroupElement, CryptoError> {
        GroupElement::from_bytes(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn encoding_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let s = Scalar::random(&mut rng);
        let p = Secp256k1::exp(&GroupElement::generator(), &s);
        assert_eq!(GroupElement::from_bytes(&p.to_bytes()).unwrap(), p);
    }

    #[test]
    fn decode_rejects_invalid() {
        assert_eq!(
            GroupElement::from_bytes(&[0u8; 33]),
            Err(CryptoError::InvalidElement)
        );
        assert_eq!(
            GroupElement::from_bytes(&[2u8; 32]),
            Err(CryptoError::InvalidElement)
        );
        let mut off_curve = GroupElement::generator().to_bytes();
        off_curve[0] = 0x05;
        assert_eq!(
            GroupElement::from_bytes(&off_curve),
            Err(CryptoError::InvalidElement)
        );
        // x = 0 has no square root of x^3 + 7 on secp256k1 (7 is a non-residue).
        let mut x_zero = [0u8; 33];
        x_zero[0] = 0x02;
        assert_eq!(
            GroupElement::from_bytes(&x_zero),
            Err(CryptoError::InvalidElement)
        );
        // x = 5: 5^3 + 7 is a non-residue as well.
        x_zero[32] = 5;
        assert_eq!(
            GroupElement::from_bytes(&x_zero),
            Err(CryptoError::InvalidElement)
        );
    }

    #[test]
    fn scalar_codec_rejects_zero_and_overflow() {
        assert!(Scalar::from_bytes(&[0u8; 32]).is_err());
        assert!(Scalar::from_bytes(&[0xff; 32]).is_err());
        let one = Scalar::from_u64(1).unwrap();
        assert_eq!(Scalar::from_bytes(&one.to_bytes()).unwrap(), one);
        assert!(Scalar::from_u64(0).is_none());
    }

    #[test]
    fn inverse_cancels() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let s = Scalar::random(&mut rng);
        let g = GroupElement::generator();
        let back = Secp256k1::exp(&Secp256k1::exp(&g, &s), &s.invert());
        assert_eq!(back, g);
    }
}
