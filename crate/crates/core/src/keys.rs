//! Party signing keys and the self-signed key directory that stands in for
//! identifier resolution.

use std::collections::BTreeMap;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::encoding::Writer;

/// Signature scheme identifier written into directory headers.
pub const SIGNATURE_SCHEME: &str = "ed25519";
pub const SIGNATURE_LEN: usize = 64;
pub const PUBLIC_KEY_LEN: usize = 32;

const DIRECTORY_MAGIC: &str = "osd-directory/v1";
const DIRECTORY_SIG_TAG: &[u8] = b"osd-directory-sig-v1";

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("duplicate party id {0:?}")]
    DuplicatePartyId(String),
    #[error("invalid party id")]
    InvalidPartyId,
    #[error("malformed key material")]
    Malformed,
    #[error("directory signature check failed")]
    BadDirectorySignature,
    #[error("unsupported signature scheme {0:?}")]
    UnsupportedScheme(String),
}

/// A named signing identity (issuer, holder, verifier or directory root).
#[derive(Clone)]
pub struct PartyKey {
    id: String,
    signing: SigningKey,
}

impl std::fmt::Debug for PartyKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PartyKey")
            .field("id", &self.id)
            .finish_non_exhaustive()
    }
}

fn valid_party_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 255 && id.chars().all(|c| c.is_ascii_graphic())
}

impl PartyKey {
    pub fn generate<R: RngCore + CryptoRng>(id: &str, rng: &mut R) -> Result<Self, KeyError> {
        if !valid_party_id(id) {
            return Err(KeyError::InvalidPartyId);
        }
        Ok(Self {
            id: id.to_owned(),
            signing: SigningKey::generate(rng),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.signing.verifying_key()
    }

    pub fn sign(&self, msg: &[u8]) -> [u8; SIGNATURE_LEN] {
        self.signing.sign(msg).to_bytes()
    }

    /// Text form: `<id> <secret-key-hex>`.
    pub fn to_file_string(&self) -> String {
        format!("{} {}\n", self.id, hex::encode(self.signing.to_bytes()))
    }

    pub fn from_file_string(s: &str) -> Result<Self, KeyError> {
        let mut parts = s.split_whitespace();
        let (Some(id), Some(key), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(KeyError::Malformed);
        };
        if !valid_party_id(id) {
            return Err(KeyError::InvalidPartyId);
        }
        let bytes: [u8; 32] = hex::decode(key)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or(KeyError::Malformed)?;
        Ok(Self {
            id: id.to_owned(),
            signing: SigningKey::from_bytes(&bytes),
        })
    }
}

pub fn verify_signature(key: &VerifyingKey, msg: &[u8], sig: &[u8; SIGNATURE_LEN]) -> bool {
    key.verify(msg, &Signature::from_bytes(sig)).is_ok()
}

/// Party id to public key map, self-signed by a root key.
#[derive(Debug, Clone)]
pub struct KeyDirectory {
    root: VerifyingKey,
    entries: BTreeMap<String, VerifyingKey>,
    signature: [u8; SIGNATURE_LEN],
}

impl KeyDirectory {
    pub fn new(root: &PartyKey) -> Self {
        let mut dir = Self {
            root: root.verifying_key(),
            entries: BTreeMap::new(),
            signature: [0; 64],
        };
        dir.signature = root.sign(&dir.signed_bytes());
        dir
    }

    /// Adds an entry and re-signs. `root` must be the directory's root key.
    pub fn register(
        &mut self,
        root: &PartyKey,
        id: &str,
        key: VerifyingKey,
    ) -> Result<(), KeyError> {
        if root.verifying_key() != self.root {
            return Err(KeyError::BadDirectorySignature);
        }
        if !valid_party_id(id) {
            return Err(KeyError::InvalidPartyId);
        }
        if self.entries.contains_key(id) {
            return Err(KeyError::DuplicatePartyId(id.to_owned()));
        }
        self.entries.insert(id.to_owned(), key);
        self.signature = root.sign(&self.signed_bytes());
        Ok(())
    }

    pub fn lookup(&self, id: &str) -> Option<&VerifyingKey> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn root(&self) -> &VerifyingKey {
        &self.root
    }

    fn signed_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(DIRECTORY_SIG_TAG);
        w.put_str(SIGNATURE_SCHEME).put_fixed(self.root.as_bytes());
        w.put_u32(self.entries.len() as u32);
        for (id, key) in &self.entries {
            w.put_str(id).put_fixed(key.as_bytes());
        }
        w.into_bytes()
    }

    /// Header line, one `<id> <pubkey-hex>` line per entry, signature line.
    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "{DIRECTORY_MAGIC} {SIGNATURE_SCHEME} {}\n",
            hex::encode(self.root.as_bytes())
        );
        for (id, key) in &self.entries {
            out.push_str(&format!("{id} {}\n", hex::encode(key.as_bytes())));
        }
        out.push_str(&format!("signature {}\n", hex::encode(self.signature)));
        out
    }

    /// Parses and checks the root self-signature.
    pub fn from_file_string(s: &str) -> Result<Self, KeyError> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or(KeyError::Malformed)?
            .split(' ')
            .collect();
        let [magic, scheme, root] = header[..] else {
            return Err(KeyError::Malformed);
        };
        if magic != DIRECTORY_MAGIC {
            return Err(KeyError::Malformed);
        }
        if scheme != SIGNATURE_SCHEME {
            return Err(KeyError::UnsupportedScheme(scheme.to_owned()));
        }
        let root = parse_public_key(root)?;
        let mut entries = BTreeMap::new();
        let mut signature = None;
        for line in lines {
            if signature.is_some() {
                return Err(KeyError::Malformed);
            }
            let (id, value) = line.split_once(' ').ok_or(KeyError::Malformed)?;
            if id == "signature" {
                let sig: [u8; SIGNATURE_LEN] = hex::decode(value)
                    .ok()
                    .and_then(|b| b.try_into().ok())
                    .ok_or(KeyError::Malformed)?;
                signature = Some(sig);
                continue;
            }
            if !valid_party_id(id) {
                return Err(KeyError::InvalidPartyId);
            }
            if entries
                .insert(id.to_owned(), parse_public_key(value)?)
                .is_some()
            {
                return Err(KeyError::DuplicatePartyId(id.to_owned()));
            }
        }
        let signature = signature.ok_or(KeyError::Malformed)?;
        let dir = Self {
            root,
            entries,
            signature,
        };
        if !verify_signature(&dir.root, &dir.signed_bytes(), &dir.signature) {
            return Err(KeyError::BadDirectorySignature);
        }
        Ok(dir)
    }
}

fn parse_public_key(s: &str) -> Result<VerifyingKey, KeyError> {
    let bytes: [u8; PUBLIC_KEY_LEN] = hex::decode(s)
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or(KeyError::Malformed)?;
    VerifyingKey::from_bytes(&bytes).map_err(|_| KeyError::Malformed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (PartyKey, PartyKey, KeyDirectory) {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let root = PartyKey::generate("root", &mut rng).unwrap();
        let issuer = PartyKey::generate("issuer1", &mut rng).unwrap();
        let mut dir = KeyDirectory::new(&root);
        dir.register(&root, issuer.id(), issuer.verifying_key())
            .unwrap();
        (root, issuer, dir)
    }

    #[test]
    fn file_roundtrip() {
        let (_, issuer, dir) = setup();
        let parsed = KeyDirectory::from_file_string(&dir.to_file_string()).unwrap();
        assert_eq!(parsed.lookup("issuer1"), Some(&issuer.verifying_key()));
        let key = PartyKey::from_file_string(&issuer.to_file_string()).unwrap();
        assert_eq!(key.verifying_key(), issuer.verifying_key());
    }

    #[test]
    fn duplicate_registration_rejected() {
        let (root, issuer, mut dir) = setup();
        assert!(matches!(
            dir.register(&root, "issuer1", issuer.verifying_key()),
            Err(KeyError::DuplicatePartyId(_))
        ));
    }

    #[test]
    fn registration_needs_root() {
        let (_, issuer, mut dir) = setup();
        assert!(dir.register(&issuer, "x", issuer.verifying_key()).is_err());
    }

    #[test]
    fn tampered_file_fails_to_load() {
        let (_, _, dir) = setup();
        let text = dir.to_file_string();
        let entry_line = text.lines().nth(1).unwrap();
        // Change one hex digit of the issuer's public key.
        let pos = text.find(entry_line).unwrap() + entry_line.len() - 1;
        let mut bytes = text.into_bytes();
        bytes[pos] = if bytes[pos] == b'0' { b'1' } else { b'0' };
        let tampered = String::from_utf8(bytes).unwrap();
        assert!(KeyDirectory::from_file_string(&tampered).is_err());
    }

    #[test]
    fn party_ids_must_be_printable() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(PartyKey::generate("", &mut rng).is_err());
        assert!(PartyKey::generate("has space", &mut rng).is_err());
    }
}
