use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use osd_core::credential::{issue, CredentialData, IssueOptions, VerifiableCredential};
use osd_core::disclosure::{verifier_disclose_batch, DisclosureSelection, HolderSessions, Pick};
use osd_core::keys::PartyKey;
use osd_core::par::Execution;
use osd_core::presentation::create_presentation;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const STRATEGIES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn credential(n: usize) -> (PartyKey, Vec<(VerifiableCredential, CredentialData)>) {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let issuer = PartyKey::generate("issuer", &mut rng).unwrap();
    let holder = PartyKey::generate("holder", &mut rng).unwrap();
    let claims: Vec<_> = (0..n)
        .map(|i| (format!("c{i:04}"), vec![b'a'; 30]))
        .collect();
    let vc = issue(
        &issuer,
        "holder",
        &claims,
        &IssueOptions::default(),
        &mut rng,
    )
    .unwrap();
    (holder, vec![vc])
}

fn presentation(c: &mut Criterion) {
    let mut group = c.benchmark_group("create_presentation");
    for n in [16, 128] {
        let (holder, inputs) = credential(n);
        for (label, exec) in STRATEGIES {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                let mut rng = ChaCha20Rng::seed_from_u64(2);
                b.iter(|| {
                    black_box(
                        create_presentation(&holder, &inputs, "v", 0, &mut rng, exec).unwrap(),
                    )
                })
            });
        }
    }
    group.finish();
}

fn disclosure(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_disclosure");
    let n = 128;
    let (holder, inputs) = credential(n);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let (vp, d_vp, mut secret) =
        create_presentation(&holder, &inputs, "v", 0, &mut rng, Execution::Sequential).unwrap();
    let picks: Vec<_> = (0..n).map(|i| Pick::new(0, format!("c{i:04}"))).collect();
    let selection = DisclosureSelection::new(picks, &vp).unwrap();
    let pool = HolderSessions::new(&mut secret, u32::MAX).unwrap();
    for (label, exec) in STRATEGIES {
        let pool = pool.clone().with_execution(exec);
        group.bench_function(BenchmarkId::new(label, n), |b| {
            let mut nonce = 0u64;
            b.iter(|| {
                nonce += 1;
                let mut fresh = [0u8; 32];
                fresh[..8].copy_from_slice(&nonce.to_be_bytes());
                let session = pool.open_session("v", &fresh, b"bench").unwrap();
                let out = verifier_disclose_batch(
                    &vp,
                    &d_vp,
                    &selection,
                    u32::MAX,
                    &mut &session,
                    &mut rng,
                    exec,
                )
                .unwrap();
                black_box(out)
            })
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = presentation, disclosure
}
criterion_main!(benches);
