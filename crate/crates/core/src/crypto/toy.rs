//! The order-11 subgroup of the integers mod 23, generated by 2.
//!
//! Small enough to enumerate every element and exponent, which turns the
//! OPRF identities into exhaustive checks.

use rand::{CryptoRng, RngCore};
use sha3::{Digest as _, Sha3_512};

use super::group::PrimeOrderGroup;
use super::hash::{Digest, H1_DST};
use super::CryptoError;

pub const MODULUS: u32 = 23;
pub const ORDER: u32 = 11;
pub const GENERATOR: u32 = 2;

/// Residue mod 23. Not necessarily a subgroup member; see [`ToyGroup::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyElement(pub u32);

/// Exponent in `[1, 10]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ToyScalar(u32);

impl ToyScalar {
    pub fn new(v: u32) -> Option<Self> {
        let v = v % ORDER;
        (v != 0).then_some(Self(v))
    }

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ToyScalar> {
        (1..ORDER).map(ToyScalar)
    }
}

pub fn pow_mod(base: u32, exp: u32) -> u32 {
    let mut acc = 1u64;
    let b = u64::from(base % MODULUS);
    for _ in 0..exp {
        acc = acc * b % u64::from(MODULUS);
    }
    acc as u32
}

#[derive(Debug, Clone, Copy)]
pub struct ToyGroup;

impl ToyGroup {
    /// The ten non-identity subgroup elements.
    pub fn non_identity_elements() -> impl Iterator<Item = ToyElement> {
        (1..ORDER).map(|e| ToyElement(pow_mod(GENERATOR, e)))
    }

    pub fn is_member(v: u32) -> bool {
        v != 0 && v < MODULUS && pow_mod(v, ORDER) == 1
    }
}

impl PrimeOrderGroup for ToyGroup {
    type Element = ToyElement;
    type Scalar = ToyScalar;

    const NAME: &'static str = "toy-z23-order11";
    const ELEMENT_LEN: usize = 1;

    /// `2^(1 + h mod 10)` where `h` is the first byte of a tagged SHA3-512.
    fn hash_to_group(x: &Digest) -> ToyElement {
        let mut h = Sha3_512::new();
        h.update(H1_DST);
        h.update(x.0);
        let exp = 1 + u32::from(h.finalize()[0]) % (ORDER - 1);
        ToyElement(pow_mod(GENERATOR, exp))
    }

    fn validate(element: &ToyElement) -> Result<(), CryptoError> {
        if element.0 != 1 && Self::is_member(element.0) {
            Ok(())
        } else {
            Err(CryptoError::InvalidElement)
        }
    }

    fn exp(element: &ToyElement, scalar: &ToyScalar) -> ToyElement {
        ToyElement(pow_mod(element.0, scalar.0))
    }

    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> ToyScalar {
        ToyScalar(1 + rng.next_u32() % (ORDER - 1))
    }

    fn scalar_inverse(scalar: &ToyScalar) -> ToyScalar {
        // Fermat: s^(q-2) mod q.
        let mut acc = 1u32;
        for _ in 0..ORDER - 2 {
            acc = acc * scalar.0 % ORDER;
        }
        ToyScalar(acc)
    }

    fn encode(element: &ToyElement) -> Vec<u8> {
        vec![element.0 as u8]
    }

    fn decode(bytes: &[u8]) -> Result<ToyElement, CryptoError> {
        match bytes {
            [b] => {
                let e = ToyElement(u32::from(*b));
                Self::validate(&e)?;
                Ok(e)
            }
            _ => Err(CryptoError::InvalidElement),
        }
    }
}
