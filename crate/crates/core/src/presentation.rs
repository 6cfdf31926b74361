//! Holder-side presentation creation and verifier-side structural checks.
//!
//! Every claim of every bundled credential is encrypted under
//! `k = H2(x, H1(x)^msk)` with its commitment `x` as associated data, using
//! a master secret that is fresh per presentation.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::Serialize;
use thiserror::Error;
use zeroize::Zeroize;

use crate::credential::{verify_credential, CredentialData, RejectReason, VerifiableCredential};
use crate::crypto::oprf::derive_key_direct;
use crate::crypto::{
    aead_seal, frame_opening, AeadBox, Digest, Iv, Scalar, Secp256k1, DIGEST_LEN, IV_LEN,
    SCALAR_LEN, TAG_LEN,
};
use crate::encoding::{DecodeError, Reader, Writer};
use crate::keys::{verify_signature, KeyDirectory, PartyKey, SIGNATURE_LEN};
use crate::par::Execution;

pub const NONCE_LEN: usize = 32;

const VP_TAG: &[u8] = b"osd-vp-v1";
const VP_SIG_TAG: &[u8] = b"osd-vp-sig-v1";
const DVP_TAG: &[u8] = b"osd-dvp-v1";
const SECRET_TAG: &[u8] = b"osd-presentation-secret-v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PresentationError {
    #[error("credential data does not open its credential")]
    OpeningMismatch,
    #[error("presentation needs at least one credential")]
    NoCredentials,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("presentation secret is closed")]
pub struct SecretClosed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PresentationMetadata {
    pub holder_id: String,
    pub audience_id: String,
    #[serde(with = "hex::serde")]
    pub nonce: [u8; NONCE_LEN],
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifiablePresentation {
    pub credentials: Vec<VerifiableCredential>,
    pub metadata: PresentationMetadata,
    #[serde(with = "hex::serde")]
    pub proof: [u8; SIGNATURE_LEN],
}

impl VerifiablePresentation {
    fn signed_bytes(
        credentials: &[VerifiableCredential],
        metadata: &PresentationMetadata,
    ) -> Vec<u8> {
        let mut w = Writer::with_tag(VP_SIG_TAG);
        write_body(&mut w, credentials, metadata);
        w.into_bytes()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(VP_TAG);
        write_body(&mut w, &self.credentials, &self.metadata);
        w.put_fixed(&self.proof);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(VP_TAG)?;
        let n = r.get_count(1)?;
        let credentials = (0..n)
            .map(|_| VerifiableCredential::read(&mut r))
            .collect::<Result<Vec<_>, _>>()?;
        let metadata = PresentationMetadata {
            holder_id: r.get_string()?,
            audience_id: r.get_string()?,
            nonce: r.get_array()?,
            created_at: r.get_u64()?,
        };
        let proof = r.get_array()?;
        r.finish()?;
        Ok(Self {
            credentials,
            metadata,
            proof,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn claim_count(&self) -> usize {
        self.credentials.iter().map(|vc| vc.commitments.len()).sum()
    }
}

fn write_body(w: &mut Writer, credentials: &[VerifiableCredential], m: &PresentationMetadata) {
    w.put_u32(credentials.len() as u32);
    for vc in credentials {
        vc.write(w);
    }
    w.put_str(&m.holder_id)
        .put_str(&m.audience_id)
        .put_fixed(&m.nonce)
        .put_u64(m.created_at);
}

/// One encrypted claim: its commitment and the sealed opening.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EncryptedClaim {
    pub digest: Digest,
    pub sealed: AeadBox,
}

/// Encrypted claims of one credential, keyed by claim name.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct EncryptedClaimSet {
    pub entries: BTreeMap<String, EncryptedClaim>,
}

/// Encrypted claim sets, index-aligned with the presentation's credentials.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct PresentationData {
    pub sets: Vec<EncryptedClaimSet>,
}

/// Encoded bytes of one entry that are not `iv ‖ ct ‖ tag`: the name and
/// ciphertext length prefixes, the name itself and the digest.
pub fn entry_index_len(name: &str) -> usize {
    4 + name.len() + DIGEST_LEN + 4
}

/// Constant part of the D_VP encoding for `sets` claim sets.
pub fn presentation_data_framing_len(sets: usize) -> usize {
    4 + DVP_TAG.len() + 4 + 4 * sets
}

impl PresentationData {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(DVP_TAG);
        w.put_u32(self.sets.len() as u32);
        for set in &self.sets {
            w.put_u32(set.entries.len() as u32);
            for (name, entry) in &set.entries {
                w.put_str(name)
                    .put_fixed(entry.digest.as_bytes())
                    .put_fixed(&entry.sealed.iv)
                    .put_fixed(&entry.sealed.tag)
                    .put_bytes(&entry.sealed.ciphertext);
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(DVP_TAG)?;
        let n = r.get_count(4)?;
        let mut sets = Vec::with_capacity(n);
        for _ in 0..n {
            let m = r.get_count(8 + DIGEST_LEN + IV_LEN + TAG_LEN)?;
            let mut entries = BTreeMap::new();
            let mut last: Option<String> = None;
            for _ in 0..m {
                let at = r.position();
                let name = r.get_string()?;
                if last.as_ref().is_some_and(|prev| prev >= &name) {
                    return Err(DecodeError::corrupt(at));
                }
                let digest = Digest(r.get_array()?);
                let iv = r.get_array()?;
                let tag = r.get_array()?;
                let ciphertext = r.get_bytes()?.to_vec();
                last = Some(name.clone());
                entries.insert(
                    name,
                    EncryptedClaim {
                        digest,
                        sealed: AeadBox {
                            iv,
                            ciphertext,
                            tag,
                        },
                    },
                );
            }
            sets.push(EncryptedClaimSet { entries });
        }
        r.finish()?;
        Ok(Self { sets })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// `Σ (|iv| + |ct| + |tag|)` over all claims.
    pub fn payload_len(&self) -> usize {
        self.entries().map(|(_, _, e)| e.sealed.storage_len()).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &str, &EncryptedClaim)> {
        self.sets.iter().enumerate().flat_map(|(i, set)| {
            set.entries
                .iter()
                .map(move |(name, e)| (i, name.as_str(), e))
        })
    }

    pub fn get(&self, credential: usize, claim: &str) -> Option<&EncryptedClaim> {
        self.sets.get(credential)?.entries.get(claim)
    }

    pub fn get_mut(&mut self, credential: usize, claim: &str) -> Option<&mut EncryptedClaim> {
        self.sets.get_mut(credential)?.entries.get_mut(claim)
    }
}

/// The holder's per-presentation OPRF key and the presentation nonce.
///
/// Never part of the VP or D_VP encodings. [`close`](Self::close) drops and
/// zeroizes the key; everything that needs it afterwards fails.
pub struct PresentationSecret {
    msk: Option<Scalar>,
    nonce: [u8; NONCE_LEN],
}

impl std::fmt::Debug for PresentationSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PresentationSecret")
            .field("closed", &self.is_closed())
            .finish()
    }
}

impl PresentationSecret {
    pub fn new(msk: Scalar, nonce: [u8; NONCE_LEN]) -> Self {
        Self {
            msk: Some(msk),
            nonce,
        }
    }

    pub fn msk(&self) -> Result<&Scalar, SecretClosed> {
        self.msk.as_ref().ok_or(SecretClosed)
    }

    pub fn nonce(&self) -> &[u8; NONCE_LEN] {
        &self.nonce
    }

    pub fn is_closed(&self) -> bool {
        self.msk.is_none()
    }

    pub fn close(&mut self) {
        // Scalar zeroizes itself on drop.
        self.msk = None;
    }

    pub(crate) fn take_msk(&mut self) -> Result<Scalar, SecretClosed> {
        self.msk.take().ok_or(SecretClosed)
    }

    /// Holder-private file form. Callers own the lifetime of the returned buffer.
    pub fn to_file_bytes(&self) -> Result<Vec<u8>, SecretClosed> {
        let msk = self.msk()?;
        let mut key = msk.to_bytes();
        let mut w = Writer::with_tag(SECRET_TAG);
        w.put_fixed(&self.nonce).put_fixed(&key);
        key.zeroize();
        Ok(w.into_bytes())
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(SECRET_TAG)?;
        let nonce = r.get_array()?;
        let at = r.position();
        let mut key: [u8; SCALAR_LEN] = r.get_array()?;
        r.finish()?;
        let msk = Scalar::from_bytes(&key).map_err(|_| DecodeError::corrupt(at));
        key.zeroize();
        Ok(Self {
            msk: Some(msk?),
            nonce,
        })
    }
}

/// Seals one framed opening under the key derived from `msk` and `digest`.
pub fn seal_claim(msk: &Scalar, digest: &Digest, framed: &[u8], iv: &Iv) -> AeadBox {
    let key = derive_key_direct::<Secp256k1>(msk, digest);
    aead_seal(&key, iv, framed, digest.as_bytes())
}

pub fn create_presentation<R: RngCore + CryptoRng>(
    holder: &PartyKey,
    inputs: &[(VerifiableCredential, CredentialData)],
    audience_id: &str,
    created_at: u64,
    rng: &mut R,
    exec: Execution,
) -> Result<(VerifiablePresentation, PresentationData, PresentationSecret), PresentationError> {
    if inputs.is_empty() {
        return Err(PresentationError::NoCredentials);
    }
    if !inputs.iter().all(|(vc, data)| data.opens(vc)) {
        return Err(PresentationError::OpeningMismatch);
    }

    let msk = Scalar::random(rng);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);

    // IVs come from the caller's RNG in a fixed order, so output is
    // reproducible under a seeded RNG whatever the execution strategy.
    struct Job<'a> {
        set: usize,
        name: &'a str,
        digest: Digest,
        framed: Vec<u8>,
        iv: Iv,
    }
    let mut jobs = Vec::new();
    for (set, (vc, data)) in inputs.iter().enumerate() {
        for (name, opening) in &data.openings {
            let mut iv = [0u8; IV_LEN];
            rng.fill_bytes(&mut iv);
            jobs.push(Job {
                set,
                name,
                digest: vc.commitments[name],
                framed: frame_opening(&opening.value, &opening.salt),
                iv,
            });
        }
    }
    let sealed = exec.map(&jobs, |job| {
        seal_claim(&msk, &job.digest, &job.framed, &job.iv)
    });

    let mut d_vp = PresentationData {
        sets: vec![EncryptedClaimSet::default(); inputs.len()],
    };
    for (job, sealed) in jobs.iter().zip(sealed) {
        d_vp.sets[job.set].entries.insert(
            job.name.to_owned(),
            EncryptedClaim {
                digest: job.digest,
                sealed,
            },
        );
    }

    let credentials: Vec<_> = inputs.iter().map(|(vc, _)| vc.clone()).collect();
    let metadata = PresentationMetadata {
        holder_id: holder.id().to_owned(),
        audience_id: audience_id.to_owned(),
        nonce,
        created_at,
    };
    let proof = holder.sign(&VerifiablePresentation::signed_bytes(
        &credentials,
        &metadata,
    ));
    let vp = VerifiablePresentation {
        credentials,
        metadata,
        proof,
    };
    Ok((vp, d_vp, PresentationSecret::new(msk, nonce)))
}

/// Verifier-side acceptance window.
#[derive(Debug, Clone)]
pub struct ValidationPolicy {
    pub audience_id: String,
    pub now: u64,
    /// Maximum presentation age in seconds.
    pub max_age: u64,
    /// Tolerated clock skew for presentations dated in the future.
    pub max_skew: u64,
}

impl ValidationPolicy {
    pub fn new(audience_id: &str, now: u64) -> Self {
        Self {
            audience_id: audience_id.to_owned(),
            now,
            max_age: 600,
            max_skew: 60,
        }
    }
}

pub fn validate_presentation(
    vp: &VerifiablePresentation,
    d_vp: &PresentationData,
    directory: &KeyDirectory,
    policy: &ValidationPolicy,
) -> Result<(), RejectReason> {
    let m = &vp.metadata;
    if vp.credentials.is_empty() || m.holder_id.is_empty() {
        return Err(RejectReason::Format);
    }
    let holder_key = directory
        .lookup(&m.holder_id)
        .ok_or(RejectReason::Signature)?;
    let msg = VerifiablePresentation::signed_bytes(&vp.credentials, m);
    if !verify_signature(holder_key, &msg, &vp.proof) {
        return Err(RejectReason::Signature);
    }
    for vc in &vp.credentials {
        verify_credential(vc, directory, policy.now).map_err(|r| match r {
            RejectReason::Signature => RejectReason::CredentialSignature,
            other => other,
        })?;
        if vc.metadata.subject_id != m.holder_id {
            return Err(RejectReason::Format);
        }
    }
    if m.audience_id != policy.audience_id {
        return Err(RejectReason::Audience);
    }
    if m.created_at > policy.now.saturating_add(policy.max_skew)
        || policy.now.saturating_sub(m.created_at) > policy.max_age
    {
        return Err(RejectReason::Stale);
    }
    if d_vp.sets.len() != vp.credentials.len() {
        return Err(RejectReason::Structure);
    }
    for (vc, set) in vp.credentials.iter().zip(&d_vp.sets) {
        if set.entries.len() != vc.commitments.len() {
            return Err(RejectReason::Structure);
        }
        for (name, entry) in &set.entries {
            if vc.commitments.get(name) != Some(&entry.digest) {
                return Err(RejectReason::Structure);
            }
        }
    }
    Ok(())
}
