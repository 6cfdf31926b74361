//! Timing and size measurements at claim, credential and presentation level.

use std::hint::black_box;
use std::time::Instant;

use osd_core::credential::{issue, verify_credential, verify_opening};
use osd_core::crypto::oprf::{blind, derive_key_direct, evaluate, finalize};
use osd_core::crypto::{aead_open, aead_seal, commit, frame_opening, ClaimKey, Secp256k1, IV_LEN};
use osd_core::disclosure::{
    complete_round, open_claim, prepare_round, verifier_disclose_batch, DisclosureSelection,
    HolderSessions, Pick,
};
use osd_core::encoding::{Reader, Writer};
use osd_core::par::Execution;
use osd_core::presentation::{
    create_presentation, seal_claim, validate_presentation, PresentationSecret, ValidationPolicy,
};
use osd_core::wire::ElementsBody;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::config::BenchConfig;
use crate::fixture::{
    claim_name, hex_value, issue_options, Fixture, Parties, HOLDER, NOW, VERIFIER,
};
use crate::record::{Metric, StatRecord};
use crate::stats::Summary;

/// Wall-clock samples of `f`, in nanoseconds.
pub fn sample<F: FnMut()>(reps: usize, mut f: F) -> Vec<f64> {
    f();
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_nanos() as f64
        })
        .collect()
}

struct Recorder<'a> {
    config: &'a BenchConfig,
    out: Vec<StatRecord>,
}

impl Recorder<'_> {
    fn time<F: FnMut()>(&mut self, phase: &str, n: usize, f: F) {
        let samples = sample(self.config.repetitions, f);
        let s = Summary::trimmed(&samples, self.config.trim_fraction);
        self.out
            .push(StatRecord::from_summary(phase, n, Metric::Ns, s));
    }

    fn size(&mut self, phase: &str, n: usize, bytes: usize) {
        self.out.push(StatRecord::size(phase, n, bytes));
    }
}

fn all_picks(n: usize) -> Vec<Pick> {
    (0..n).map(|i| Pick::new(0, claim_name(i))).collect()
}

fn fresh_nonce(counter: &mut u64) -> [u8; 32] {
    *counter += 1;
    let mut nonce = [0u8; 32];
    nonce[..8].copy_from_slice(&counter.to_be_bytes());
    nonce
}

/// Plain selective disclosure: a request naming claims and a response
/// carrying their openings.
pub mod baseline {
    use super::*;

    pub fn request(names: &[String]) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u32(names.len() as u32);
        for n in names {
            w.put_u8(n.len() as u8).put_fixed(n.as_bytes());
        }
        w.into_bytes()
    }

    pub fn parse_request(bytes: &[u8]) -> Option<Vec<String>> {
        let mut r = Reader::new(bytes);
        let count = r.get_count(2).ok()?;
        (0..count)
            .map(|_| {
                let len = r.get_u8().ok()? as usize;
                String::from_utf8(r.take(len).ok()?.to_vec()).ok()
            })
            .collect()
    }

    pub fn response(openings: &[(&[u8], &[u8])]) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u32(openings.len() as u32);
        for (value, salt) in openings {
            w.put_bytes(value).put_bytes(salt);
        }
        w.into_bytes()
    }

    pub fn parse_response(bytes: &[u8]) -> Option<Vec<(&[u8], &[u8])>> {
        let mut r = Reader::new(bytes);
        let count = r.get_count(8).ok()?;
        (0..count)
            .map(|_| Some((r.get_bytes().ok()?, r.get_bytes().ok()?)))
            .collect()
    }
}

fn claim_level(rec: &mut Recorder, rng: &mut ChaCha20Rng) {
    let value = hex_value(rec.config.claim_value_bytes, rng);
    let mut salt = [0u8; 16];
    rng.fill_bytes(&mut salt);
    let digest = commit(&value, &salt);
    rec.time("claim_hash", 1, || {
        black_box(commit(black_box(&value), &salt));
    });
    rec.time("claim_verify", 1, || {
        black_box(verify_opening(&digest, black_box(&value), &salt));
    });
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    let key = ClaimKey::from_bytes(key);
    let framed = frame_opening(&value, &salt);
    let iv = [7u8; IV_LEN];
    let sealed = aead_seal(&key, &iv, &framed, digest.as_bytes());
    rec.time("claim_encrypt", 1, || {
        black_box(aead_seal(&key, &iv, black_box(&framed), digest.as_bytes()));
    });
    rec.time("claim_decrypt", 1, || {
        black_box(aead_open(&key, black_box(&sealed), digest.as_bytes()).unwrap());
    });
    let msk = osd_core::crypto::Scalar::random(rng);
    let (r, a) = blind::<Secp256k1, _>(&digest, rng);
    let b = evaluate::<Secp256k1>(&msk, &a).unwrap();
    let mut brng = ChaCha20Rng::seed_from_u64(rec.config.seed);
    rec.time("oprf_request", 1, || {
        black_box(blind::<Secp256k1, _>(black_box(&digest), &mut brng));
    });
    rec.time("oprf_response", 1, || {
        black_box(evaluate::<Secp256k1>(&msk, black_box(&a)).unwrap());
    });
    rec.time("oprf_finalize", 1, || {
        black_box(finalize::<Secp256k1>(&digest, black_box(&b), &r).unwrap());
    });
}

fn credential_level(rec: &mut Recorder, parties: &Parties, n: usize, rng: &mut ChaCha20Rng) {
    let claims = crate::fixture::claims(n, rec.config.claim_value_bytes, rng);
    let opts = issue_options();
    let mut irng = ChaCha20Rng::seed_from_u64(rec.config.seed ^ n as u64);
    rec.time("vc_create", n, || {
        black_box(issue(&parties.issuer, HOLDER, &claims, &opts, &mut irng).unwrap());
    });
    let (vc, data) = issue(&parties.issuer, HOLDER, &claims, &opts, rng).unwrap();
    rec.time("vc_verify", n, || {
        verify_credential(black_box(&vc), &parties.dir, NOW).unwrap();
    });
    rec.size("vc_size", n, vc.to_bytes().len());
    rec.size("dvc_size", n, data.to_bytes().len());
}

fn presentation_level(rec: &mut Recorder, parties: &Parties, n: usize, rng: &mut ChaCha20Rng) {
    let fx = Fixture::new(parties.clone(), n, rec.config.claim_value_bytes, rng);
    let mut prng = ChaCha20Rng::seed_from_u64(rec.config.seed ^ (n as u64) << 8);
    rec.time("vp_create", n, || {
        black_box(
            create_presentation(
                &parties.holder,
                &fx.inputs,
                VERIFIER,
                NOW,
                &mut prng,
                Execution::Sequential,
            )
            .unwrap(),
        );
    });
    let policy = ValidationPolicy::new(VERIFIER, NOW);
    rec.time("vp_verify", n, || {
        validate_presentation(black_box(&fx.vp), &fx.d_vp, &parties.dir, &policy).unwrap();
    });
    rec.size("vp_size", n, fx.vp.to_bytes().len());

    let msk = fx.msk();
    let (vc, data) = &fx.inputs[0];
    let jobs: Vec<_> = data
        .openings
        .iter()
        .map(|(name, o)| (vc.commitments[name], frame_opening(&o.value, &o.salt)))
        .collect();
    let iv = [3u8; IV_LEN];
    rec.time("dvp_encrypt", n, || {
        for (digest, framed) in &jobs {
            black_box(seal_claim(&msk, digest, framed, &iv));
        }
    });
    let keys: Vec<_> = fx
        .d_vp
        .entries()
        .map(|(_, _, e)| (derive_key_direct::<Secp256k1>(&msk, &e.digest), e))
        .collect();
    rec.time("dvp_decrypt", n, || {
        for (key, e) in &keys {
            black_box(aead_open(key, &e.sealed, e.digest.as_bytes()).unwrap());
        }
    });
    rec.size("dvp_size", n, fx.d_vp.to_bytes().len());

    // Full disclosure: every claim requested in one round.
    let picks = all_picks(n);
    let mut secret = PresentationSecret::new(fx.msk(), *fx.secret.nonce());
    let pool = HolderSessions::new(&mut secret, u32::MAX)
        .unwrap()
        .with_execution(Execution::Sequential);
    let mut counter = 0u64;
    let session = pool
        .open_session(VERIFIER, &fresh_nonce(&mut counter), b"bench")
        .unwrap();
    let mut vrng = ChaCha20Rng::seed_from_u64(rec.config.seed ^ 0xab);
    let round = prepare_round(&fx.vp, &picks, &mut vrng, Execution::Sequential).unwrap();
    let request = round.request().to_vec();
    let response = session.evaluate(&request).unwrap();
    rec.size(
        "oprf_query_size",
        n,
        ElementsBody {
            elements: request.clone(),
        }
        .encode()
        .len(),
    );
    rec.size(
        "oprf_response_size",
        n,
        ElementsBody {
            elements: response.clone(),
        }
        .encode()
        .len(),
    );
    rec.time("oprf_query_time", n, || {
        black_box(prepare_round(&fx.vp, &picks, &mut vrng, Execution::Sequential).unwrap());
    });
    rec.time("oprf_holder_compute", n, || {
        black_box(session.evaluate(black_box(&request)).unwrap());
    });
    // Blinding plus unblinding, holder work excluded.
    let mut verifier_samples = Vec::with_capacity(rec.config.repetitions);
    for _ in 0..=rec.config.repetitions {
        let t0 = Instant::now();
        let round = prepare_round(&fx.vp, &picks, &mut vrng, Execution::Sequential).unwrap();
        let blind_ns = t0.elapsed().as_nanos();
        let b = session.evaluate(round.request()).unwrap();
        let t1 = Instant::now();
        let keys = complete_round(round, &b, Execution::Sequential).unwrap();
        black_box(keys);
        verifier_samples.push((blind_ns + t1.elapsed().as_nanos()) as f64);
    }
    verifier_samples.remove(0);
    let s = Summary::trimmed(&verifier_samples, rec.config.trim_fraction);
    rec.out.push(StatRecord::from_summary(
        "oprf_verifier_compute",
        n,
        Metric::Ns,
        s,
    ));

    let round = prepare_round(&fx.vp, &picks, &mut vrng, Execution::Sequential).unwrap();
    let b = session.evaluate(round.request()).unwrap();
    let keys = complete_round(round, &b, Execution::Sequential).unwrap();
    rec.time("oprf_open_claims", n, || {
        for (pick, x, key) in &keys {
            black_box(open_claim(&fx.d_vp, pick, x, key).unwrap());
        }
    });

    baseline_level(rec, &fx, n);
}

fn baseline_level(rec: &mut Recorder, fx: &Fixture, n: usize) {
    let names: Vec<String> = (0..n).map(claim_name).collect();
    let data = &fx.inputs[0].1;
    let vc = &fx.inputs[0].0;
    let req = baseline::request(&names);
    rec.size("sd_request_size", n, req.len());
    rec.time("sd_request_time", n, || {
        let bytes = baseline::request(black_box(&names));
        black_box(baseline::parse_request(&bytes).unwrap());
    });
    let respond = |names: &[String]| {
        let openings: Vec<(&[u8], &[u8])> = names
            .iter()
            .map(|name| {
                let o = &data.openings[name];
                (o.value.as_slice(), o.salt.as_slice())
            })
            .collect();
        baseline::response(&openings)
    };
    rec.size("sd_response_size", n, respond(&names).len());
    rec.time("sd_response_time", n, || {
        let bytes = respond(black_box(&names));
        let openings = baseline::parse_response(&bytes).unwrap();
        for (name, (value, salt)) in names.iter().zip(openings) {
            assert!(verify_opening(&vc.commitments[name], value, salt));
        }
    });
}

/// Every benchmark phase at every configured claim count.
pub fn bench_all(config: &BenchConfig) -> Vec<StatRecord> {
    config.validate().expect("valid bench config");
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let parties = Parties::new(&mut rng);
    let mut rec = Recorder {
        config,
        out: Vec::new(),
    };
    claim_level(&mut rec, &mut rng);
    for &n in &config.claim_counts {
        credential_level(&mut rec, &parties, n, &mut rng);
        presentation_level(&mut rec, &parties, n, &mut rng);
    }
    rec.out
}

/// Only the plain selective-disclosure phases.
pub fn bench_baseline_sd(config: &BenchConfig) -> Vec<StatRecord> {
    config.validate().expect("valid bench config");
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let parties = Parties::new(&mut rng);
    let mut rec = Recorder {
        config,
        out: Vec::new(),
    };
    for &n in &config.claim_counts {
        let fx = Fixture::new(parties.clone(), n, config.claim_value_bytes, &mut rng);
        baseline_level(&mut rec, &fx, n);
    }
    rec.out
}

/// Batch disclosure of `N_o` claims out of `n`, holder included, plus
/// presentation validation, for each `N_o`.
pub fn bench_disclosure_scaling(
    config: &BenchConfig,
    n: usize,
    quotas: &[usize],
) -> Vec<StatRecord> {
    config.validate().expect("valid bench config");
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let parties = Parties::new(&mut rng);
    let fx = Fixture::new(parties, n, config.claim_value_bytes, &mut rng);
    let mut secret = PresentationSecret::new(fx.msk(), *fx.secret.nonce());
    let pool = HolderSessions::new(&mut secret, u32::MAX)
        .unwrap()
        .with_execution(Execution::Sequential);
    let policy = ValidationPolicy::new(VERIFIER, NOW);
    // Round-robin over N_o so slow drift in machine load affects every
    // point alike.
    let selections: Vec<_> = quotas
        .iter()
        .map(|&n_o| DisclosureSelection::new(all_picks(n_o), &fx.vp).unwrap())
        .collect();
    let mut compute = vec![Vec::with_capacity(config.repetitions); quotas.len()];
    let mut validate = vec![Vec::with_capacity(config.repetitions); quotas.len()];
    let mut counter = 0u64;
    for rep in 0..=config.repetitions {
        for (i, (&n_o, selection)) in quotas.iter().zip(&selections).enumerate() {
            let session = pool
                .open_session(VERIFIER, &fresh_nonce(&mut counter), b"bench")
                .unwrap();
            let t = Instant::now();
            black_box(
                verifier_disclose_batch(
                    &fx.vp,
                    &fx.d_vp,
                    selection,
                    n_o as u32,
                    &mut &session,
                    &mut rng,
                    Execution::Sequential,
                )
                .unwrap(),
            );
            let disclose_ns = t.elapsed().as_nanos() as f64;
            let t = Instant::now();
            validate_presentation(&fx.vp, &fx.d_vp, &fx.parties.dir, &policy).unwrap();
            let validate_ns = t.elapsed().as_nanos() as f64;
            // First pass is warm-up.
            if rep > 0 {
                compute[i].push(disclose_ns);
                validate[i].push(validate_ns);
            }
        }
    }
    let mut out = Vec::new();
    for (i, &n_o) in quotas.iter().enumerate() {
        let s = Summary::trimmed(&compute[i], config.trim_fraction);
        out.push(StatRecord::from_summary(
            "disclosure_compute",
            n_o,
            Metric::Ns,
            s,
        ));
        let s = Summary::trimmed(&validate[i], config.trim_fraction);
        out.push(StatRecord::from_summary(
            "disclosure_validate",
            n_o,
            Metric::Ns,
            s,
        ));
    }
    out
}
