//! Issuer-side credential creation and universal verification.
//!
//! A credential carries one salted SHA3-512 commitment per claim, metadata
//! and an issuer signature over both. The plaintext openings travel
//! separately as [`CredentialData`] and never enter the signed payload.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::crypto::{commit, Digest, DIGEST_LEN};
use crate::encoding::{DecodeError, Reader, Writer};
use crate::keys::{verify_signature, KeyDirectory, PartyKey, SIGNATURE_LEN};

pub const DEFAULT_SALT_LEN: usize = 16;

const VC_TAG: &[u8] = b"osd-vc-v1";
const VC_SIG_TAG: &[u8] = b"osd-vc-sig-v1";
const VC_DATA_TAG: &[u8] = b"osd-vc-data-v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CredentialError {
    #[error("duplicate claim name {0:?}")]
    DuplicateClaimName(String),
    #[error("credential needs at least one claim")]
    EmptyClaimSet,
    #[error("invalid claim name")]
    InvalidClaimName,
}

/// Coarse rejection classes. Verification never reports finer detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("rejected (signature)")]
    Signature,
    #[error("rejected (credential-signature)")]
    CredentialSignature,
    #[error("rejected (expiry)")]
    Expiry,
    #[error("rejected (format)")]
    Format,
    #[error("rejected (structure)")]
    Structure,
    #[error("rejected (audience)")]
    Audience,
    #[error("rejected (stale)")]
    Stale,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CredentialMetadata {
    pub issuer_id: String,
    pub subject_id: String,
    pub credential_type: String,
    /// Unix seconds.
    pub issued_at: u64,
    pub expires_at: u64,
}

impl CredentialMetadata {
    fn write(&self, w: &mut Writer) {
        w.put_str(&self.issuer_id)
            .put_str(&self.subject_id)
            .put_str(&self.credential_type)
            .put_u64(self.issued_at)
            .put_u64(self.expires_at);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            issuer_id: r.get_string()?,
            subject_id: r.get_string()?,
            credential_type: r.get_string()?,
            issued_at: r.get_u64()?,
            expires_at: r.get_u64()?,
        })
    }

    fn well_formed(&self) -> bool {
        !self.issuer_id.is_empty()
            && !self.subject_id.is_empty()
            && self.issued_at <= self.expires_at
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifiableCredential {
    pub commitments: BTreeMap<String, Digest>,
    pub metadata: CredentialMetadata,
    #[serde(with = "hex::serde")]
    pub proof: [u8; SIGNATURE_LEN],
}

impl VerifiableCredential {
    fn signed_bytes(
        commitments: &BTreeMap<String, Digest>,
        metadata: &CredentialMetadata,
    ) -> Vec<u8> {
        let mut w = Writer::with_tag(VC_SIG_TAG);
        write_commitments(&mut w, commitments);
        metadata.write(&mut w);
        w.into_bytes()
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.put_bytes(VC_TAG);
        write_commitments(w, &self.commitments);
        self.metadata.write(w);
        w.put_fixed(&self.proof);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.expect_tag(VC_TAG)?;
        let commitments = read_commitments(r)?;
        let metadata = CredentialMetadata::read(r)?;
        let proof = r.get_array()?;
        Ok(Self {
            commitments,
            metadata,
            proof,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let vc = Self::read(&mut r)?;
        r.finish()?;
        Ok(vc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn claim_names(&self) -> impl Iterator<Item = &str> {
        self.commitments.keys().map(String::as_str)
    }
}

fn write_commitments(w: &mut Writer, commitments: &BTreeMap<String, Digest>) {
    w.put_u32(commitments.len() as u32);
    for (name, digest) in commitments {
        w.put_str(name).put_fixed(digest.as_bytes());
    }
}

fn read_commitments(r: &mut Reader<'_>) -> Result<BTreeMap<String, Digest>, DecodeError> {
    let n = r.get_count(4 + DIGEST_LEN)?;
    let mut out = BTreeMap::new();
    let mut last: Option<String> = None;
    for _ in 0..n {
        let at = r.position();
        let name = r.get_string()?;
        // Canonical order: strictly increasing names.
        if last.as_ref().is_some_and(|prev| prev >= &name) {
            return Err(DecodeError::corrupt(at));
        }
        let digest = Digest(r.get_array()?);
        last = Some(name.clone());
        out.insert(name, digest);
    }
    Ok(out)
}

#[derive(Clone, PartialEq, Eq, Serialize)]
pub struct Opening {
    #[serde(with = "hex::serde")]
    pub value: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub salt: Vec<u8>,
}

impl std::fmt::Debug for Opening {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Opening")
            .field("value_len", &self.value.len())
            .finish_non_exhaustive()
    }
}

/// A claim as the issuer sees it: name, value and the salt chosen at issuance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimRecord {
    pub name: String,
    pub value: Vec<u8>,
    pub salt: Vec<u8>,
}

/// Plaintext openings of a credential's commitments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CredentialData {
    pub openings: BTreeMap<String, Opening>,
}

impl CredentialData {
    pub fn records(&self) -> impl Iterator<Item = ClaimRecord> + '_ {
        self.openings.iter().map(|(name, o)| ClaimRecord {
            name: name.clone(),
            value: o.value.clone(),
            salt: o.salt.clone(),
        })
    }

    /// True when the key sets match and every opening recommits to its digest.
    pub fn opens(&self, vc: &VerifiableCredential) -> bool {
        self.openings.len() == vc.commitments.len()
            && self.openings.iter().all(|(name, o)| {
                vc.commitments
                    .get(name)
                    .is_some_and(|x| verify_opening(x, &o.value, &o.salt))
            })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(VC_DATA_TAG);
        w.put_u32(self.openings.len() as u32);
        for (name, o) in &self.openings {
            w.put_str(name).put_bytes(&o.value).put_bytes(&o.salt);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(VC_DATA_TAG)?;
        let n = r.get_count(12)?;
        let mut openings = BTreeMap::new();
        for _ in 0..n {
            let at = r.position();
            let name = r.get_string()?;
            let value = r.get_bytes()?.to_vec();
            let salt = r.get_bytes()?.to_vec();
            if openings.insert(name, Opening { value, salt }).is_some() {
                return Err(DecodeError::corrupt(at));
            }
        }
        r.finish()?;
        Ok(Self { openings })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[derive(Debug, Clone)]
pub struct IssueOptions {
    pub credential_type: String,
    pub issued_at: u64,
    pub expires_at: u64,
    pub salt_len: usize,
}

impl Default for IssueOptions {
    fn default() -> Self {
        Self {
            credential_type: "VerifiableCredential".into(),
            issued_at: 0,
            expires_at: u64::MAX,
            salt_len: DEFAULT_SALT_LEN,
        }
    }
}

pub fn issue<R: RngCore + CryptoRng>(
    issuer: &PartyKey,
    subject_id: &str,
    claims: &[(String, Vec<u8>)],
    options: &IssueOptions,
    rng: &mut R,
) -> Result<(VerifiableCredential, CredentialData), CredentialError> {
    if claims.is_empty() {
        return Err(CredentialError::EmptyClaimSet);
    }
    let mut commitments = BTreeMap::new();
    let mut openings = BTreeMap::new();
    for (name, value) in claims {
        if name.is_empty() {
            return Err(CredentialError::InvalidClaimName);
        }
        if openings.contains_key(name) {
            return Err(CredentialError::DuplicateClaimName(name.clone()));
        }
        let mut salt = vec![0u8; options.salt_len];
        rng.fill_bytes(&mut salt);
        commitments.insert(name.clone(), commit(value, &salt));
        openings.insert(
            name.clone(),
            Opening {
                value: value.clone(),
                salt,
            },
        );
    }
    let metadata = CredentialMetadata {
        issuer_id: issuer.id().to_owned(),
        subject_id: subject_id.to_owned(),
        credential_type: options.credential_type.clone(),
        issued_at: options.issued_at,
        expires_at: options.expires_at,
    };
    let proof = issuer.sign(&VerifiableCredential::signed_bytes(&commitments, &metadata));
    Ok((
        VerifiableCredential {
            commitments,
            metadata,
            proof,
        },
        CredentialData { openings },
    ))
}

/// Accepts iff the issuer signature verifies under the directory key, the
/// metadata is well formed and the credential has not expired at `now`.
pub fn verify_credential(
    vc: &VerifiableCredential,
    directory: &KeyDirectory,
    now: u64,
) -> Result<(), RejectReason> {
    if vc.commitments.is_empty() || !vc.metadata.well_formed() {
        return Err(RejectReason::Format);
    }
    let key = directory
        .lookup(&vc.metadata.issuer_id)
        .ok_or(RejectReason::Signature)?;
    let msg = VerifiableCredential::signed_bytes(&vc.commitments, &vc.metadata);
    if !verify_signature(key, &msg, &vc.proof) {
        return Err(RejectReason::Signature);
    }
    if now > vc.metadata.expires_at {
        return Err(RejectReason::Expiry);
    }
    Ok(())
}

pub fn verify_opening(x: &Digest, value: &[u8], salt: &[u8]) -> bool {
    commit(value, salt) == *x
}
