#![allow(dead_code)]

use osd_core::credential::{issue, CredentialData, IssueOptions, VerifiableCredential};
use osd_core::disclosure::HolderSessions;
use osd_core::keys::{KeyDirectory, PartyKey};
use osd_core::par::Execution;
use osd_core::presentation::{create_presentation, PresentationData, VerifiablePresentation};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const NOW: u64 = 1_700_000_000;

pub struct World {
    pub rng: ChaCha20Rng,
    pub issuer: PartyKey,
    pub holder: PartyKey,
    pub verifier: PartyKey,
    pub dir: KeyDirectory,
    pub inputs: Vec<(VerifiableCredential, CredentialData)>,
    pub vp: VerifiablePresentation,
    pub d_vp: PresentationData,
    pub sessions: HolderSessions,
}

pub fn claim_name(i: usize) -> String {
    format!("claim{i:04}")
}

pub fn claim_value(i: usize) -> Vec<u8> {
    format!("{:030x}", i * 7919 + 1).into_bytes()
}

pub fn world(seed: u64, n: usize, quota: u32) -> World {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let root = PartyKey::generate("root", &mut rng).unwrap();
    let issuer = PartyKey::generate("issuer", &mut rng).unwrap();
    let holder = PartyKey::generate("holder", &mut rng).unwrap();
    let verifier = PartyKey::generate("verifier", &mut rng).unwrap();
    let mut dir = KeyDirectory::new(&root);
    for p in [&issuer, &holder, &verifier] {
        dir.register(&root, p.id(), p.verifying_key()).unwrap();
    }
    let claims: Vec<_> = (0..n).map(|i| (claim_name(i), claim_value(i))).collect();
    let opts = IssueOptions {
        issued_at: NOW - 10,
        expires_at: NOW + 3600,
        ..IssueOptions::default()
    };
    let inputs = vec![issue(&issuer, "holder", &claims, &opts, &mut rng).unwrap()];
    let (vp, d_vp, mut secret) = create_presentation(
        &holder,
        &inputs,
        "verifier",
        NOW,
        &mut rng,
        Execution::default(),
    )
    .unwrap();
    let sessions = HolderSessions::new(&mut secret, quota).unwrap();
    World {
        rng,
        issuer,
        holder,
        verifier,
        dir,
        inputs,
        vp,
        d_vp,
        sessions,
    }
}
