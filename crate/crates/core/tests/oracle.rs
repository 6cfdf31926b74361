//! Blinded evaluation against independent direct computations.

use k256::elliptic_curve::group::GroupEncoding;
use k256::elliptic_curve::hash2curve::{ExpandMsgXmd, GroupDigest};
use k256::elliptic_curve::PrimeField;
use k256::Secp256k1 as Curve;
use osd_core::crypto::oprf::{blind, blind_with, derive_key_direct, evaluate, finalize};
use osd_core::crypto::toy::{pow_mod, ToyElement, ToyGroup, ToyScalar, MODULUS, ORDER};
use osd_core::crypto::{Digest, PrimeOrderGroup, Scalar, Secp256k1, H1_DST, H2_DST};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha3::{Digest as _, Sha3_512};

fn h2_oracle(x: &[u8; 64], c: &[u8]) -> [u8; 32] {
    let mut h = Sha3_512::new();
    h.update(H2_DST);
    h.update(64u64.to_be_bytes());
    h.update(x);
    h.update((c.len() as u64).to_be_bytes());
    h.update(c);
    h.finalize()[..32].try_into().unwrap()
}

fn direct_oracle(msk: &Scalar, x: &[u8; 64]) -> [u8; 32] {
    let p = Curve::hash_from_bytes::<ExpandMsgXmd<Sha3_512>>(&[x], &[H1_DST]).unwrap();
    let k = k256::Scalar::from_repr(msk.to_bytes().into()).unwrap();
    let c = (p * k).to_bytes();
    h2_oracle(x, c.as_slice())
}

#[test]
fn production_group_blinded_equals_direct() {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let msk = Scalar::random(&mut rng);
        let mut x = [0u8; 64];
        rng.fill_bytes(&mut x);
        let x = Digest(x);
        let (r, a) = blind::<Secp256k1, _>(&x, &mut rng);
        let b = evaluate::<Secp256k1>(&msk, &a).unwrap();
        let key = finalize::<Secp256k1>(&x, &b, &r).unwrap();
        assert_eq!(key.as_bytes(), &direct_oracle(&msk, &x.0));
        assert_eq!(
            key.as_bytes(),
            derive_key_direct::<Secp256k1>(&msk, &x).as_bytes()
        );
    }
}

fn toy_pow(base: u32, e: u32) -> u32 {
    (0..e).fold(1u32, |acc, _| acc * base % MODULUS)
}

fn toy_inverse(r: u32) -> u32 {
    (1..ORDER).find(|s| s * r % ORDER == 1).unwrap()
}

/// A digest whose toy hash is `target`, found by search.
fn digest_for(target: u32) -> Digest {
    (0u64..)
        .map(|i| {
            let mut d = [0u8; 64];
            d[..8].copy_from_slice(&i.to_be_bytes());
            Digest(d)
        })
        .find(|d| ToyGroup::hash_to_group(d).0 == target)
        .unwrap()
}

#[test]
fn toy_group_exhaustive_math() {
    // Every subgroup element, every key and every blind.
    let elements: Vec<u32> = (1..MODULUS).filter(|&v| toy_pow(v, ORDER) == 1).collect();
    assert_eq!(elements.len() as u32, ORDER);
    let mut combos = 0;
    for &h in &elements {
        for k in 1..ORDER {
            let direct = toy_pow(h, k);
            for r in 1..ORDER {
                let a = toy_pow(h, r);
                let b = toy_pow(a, k);
                assert_eq!(toy_pow(b, toy_inverse(r)), direct);
                let ks = ToyScalar::new(k).unwrap();
                let rs = ToyScalar::new(r).unwrap();
                let a2 = ToyGroup::exp(&ToyElement(h), &rs);
                assert_eq!(a2.0, a);
                let c = ToyGroup::exp(&ToyGroup::exp(&a2, &ks), &ToyGroup::scalar_inverse(&rs));
                assert_eq!(c.0, pow_mod(h, k));
            }
            combos += 1;
        }
    }
    assert_eq!(combos, 110);
}

#[test]
fn toy_group_exhaustive_keys() {
    for e in 1..ORDER {
        let target = toy_pow(2, e);
        let x = digest_for(target);
        for k in ToyScalar::all() {
            let direct = derive_key_direct::<ToyGroup>(&k, &x);
            let oracle = h2_oracle(&x.0, &[toy_pow(target, k.value()) as u8]);
            assert_eq!(direct.as_bytes(), &oracle);
            for r in ToyScalar::all() {
                let a = blind_with::<ToyGroup>(&x, &r);
                let b = evaluate::<ToyGroup>(&k, &a).unwrap();
                let key = finalize::<ToyGroup>(&x, &b, &r).unwrap();
                assert_eq!(key.as_bytes(), &oracle);
            }
        }
    }
}
