//! Parties, credentials and presentations for experiments.

use osd_core::credential::{issue, CredentialData, IssueOptions, VerifiableCredential};
use osd_core::crypto::Scalar;
use osd_core::keys::{KeyDirectory, PartyKey};
use osd_core::par::Execution;
use osd_core::presentation::{
    create_presentation, PresentationData, PresentationSecret, VerifiablePresentation,
};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;

pub const NOW: u64 = 1_700_000_000;
pub const HOLDER: &str = "holder";
pub const VERIFIER: &str = "verifier";

#[derive(Debug, Clone)]
pub struct Parties {
    pub issuer: PartyKey,
    pub holder: PartyKey,
    pub verifier: PartyKey,
    pub dir: KeyDirectory,
}

impl Parties {
    pub fn new(rng: &mut ChaCha20Rng) -> Self {
        let root = PartyKey::generate("root", rng).expect("valid id");
        let issuer = PartyKey::generate("issuer", rng).expect("valid id");
        let holder = PartyKey::generate(HOLDER, rng).expect("valid id");
        let verifier = PartyKey::generate(VERIFIER, rng).expect("valid id");
        let mut dir = KeyDirectory::new(&root);
        for p in [&issuer, &holder, &verifier] {
            dir.register(&root, p.id(), p.verifying_key())
                .expect("fresh ids");
        }
        Parties {
            issuer,
            holder,
            verifier,
            dir,
        }
    }
}

/// Fixed-width names keep the per-entry index length uniform.
pub fn claim_name(i: usize) -> String {
    format!("claim{i:04}")
}

/// Random lowercase hex of `len` characters.
pub fn hex_value<R: RngCore>(len: usize, rng: &mut R) -> Vec<u8> {
    const HEX: &[u8] = b"0123456789abcdef";
    (0..len).map(|_| HEX[rng.gen_range(0..16)]).collect()
}

pub fn claims<R: RngCore>(n: usize, value_len: usize, rng: &mut R) -> Vec<(String, Vec<u8>)> {
    (0..n)
        .map(|i| (claim_name(i), hex_value(value_len, rng)))
        .collect()
}

pub fn issue_options() -> IssueOptions {
    IssueOptions {
        issued_at: NOW - 60,
        expires_at: NOW + 86_400,
        ..IssueOptions::default()
    }
}

/// One credential of `n` claims and a presentation of it.
pub struct Fixture {
    pub parties: Parties,
    pub claims: Vec<(String, Vec<u8>)>,
    pub inputs: Vec<(VerifiableCredential, CredentialData)>,
    pub vp: VerifiablePresentation,
    pub d_vp: PresentationData,
    pub secret: PresentationSecret,
}

impl Fixture {
    pub fn new(parties: Parties, n: usize, value_len: usize, rng: &mut ChaCha20Rng) -> Self {
        let claims = claims(n, value_len, rng);
        let vc = issue(&parties.issuer, HOLDER, &claims, &issue_options(), rng).expect("issue");
        let inputs = vec![vc];
        let (vp, d_vp, secret) = create_presentation(
            &parties.holder,
            &inputs,
            VERIFIER,
            NOW,
            rng,
            Execution::Sequential,
        )
        .expect("present");
        Fixture {
            parties,
            claims,
            inputs,
            vp,
            d_vp,
            secret,
        }
    }

    pub fn msk(&self) -> Scalar {
        self.secret.msk().expect("open secret").clone()
    }

    pub fn value(&self, claim: &str) -> &[u8] {
        &self
            .claims
            .iter()
            .find(|(n, _)| n == claim)
            .expect("known claim")
            .1
    }
}
