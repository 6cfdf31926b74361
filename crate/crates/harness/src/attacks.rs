//! Adversarial scenarios: a deviating holder, tampering and replay on the
//! wire, quota races, and cross-presentation unlinkability.

use std::collections::HashSet;
use std::sync::{Arc, Barrier, Mutex};
use std::thread;
use std::time::Duration;

use osd_core::crypto::oprf::derive_key_direct;
use osd_core::crypto::{
    aead_open, aead_seal, commit, frame_opening, GroupElement, Scalar, Secp256k1, IV_LEN,
};
use osd_core::disclosure::{
    scripted_picker, DisclosedClaim, DisclosureError, HolderSessions, Pick,
};
use osd_core::par::Execution;
use osd_core::presentation::{
    create_presentation, seal_claim, PresentationData, PresentationSecret, ValidationPolicy,
};
use osd_core::wire::{
    loopback_pair, run_verifier, serve_connection, Channel, Direction, DisclosureMode, FrameKind,
    InterceptLink, ProtocolError, ServeReport, WireError, SHORT_TIMEOUT,
};
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::fixture::{claim_name, Fixture, Parties, NOW, VERIFIER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deviation {
    /// The box holds `v' != v` under the correct key.
    ModifiedValue,
    /// The box key comes from a commitment other than the issued one.
    ManipulatedInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Batch,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub n: usize,
    pub target: usize,
    pub selection: Vec<usize>,
    pub deviation: Deviation,
    pub mode: Mode,
    pub seed: u64,
}

impl Scenario {
    pub fn random<R: RngCore>(rng: &mut R) -> Self {
        let n = rng.gen_range(4..=12);
        let size = rng.gen_range(1..=n / 2);
        Scenario {
            n,
            target: rng.gen_range(0..n),
            selection: sample(rng, n, size).into_vec(),
            deviation: if rng.gen() {
                Deviation::ModifiedValue
            } else {
                Deviation::ManipulatedInput
            },
            mode: if rng.gen() {
                Mode::Batch
            } else {
                Mode::Adaptive
            },
            seed: rng.next_u64(),
        }
    }

    pub fn target_selected(&self) -> bool {
        self.selection.contains(&self.target)
    }
}

#[derive(Debug, Clone)]
pub struct SelectiveFailureReport {
    pub scenario: Scenario,
    pub verifier_aborted: bool,
    /// Every claim disclosed on a completed run equals the issued value.
    pub disclosed_correct: bool,
    pub holder_saw_abort: bool,
    /// What the holder concludes about the target from the run's outcome.
    pub holder_infers_selected: bool,
}

impl SelectiveFailureReport {
    /// Abort exactly when the target is selected, and the holder's
    /// inference is right either way.
    pub fn matches_prediction(&self) -> bool {
        let selected = self.scenario.target_selected();
        self.verifier_aborted == selected
            && self.holder_saw_abort == selected
            && self.holder_infers_selected == selected
            && (self.verifier_aborted || self.disclosed_correct)
    }
}

/// Replaces the target's box according to `deviation`.
pub fn deviate(
    fx: &Fixture,
    d_vp: &mut PresentationData,
    target: &str,
    deviation: Deviation,
    rng: &mut ChaCha20Rng,
) {
    let msk = fx.msk();
    let opening = &fx.inputs[0].1.openings[target];
    let digest = fx.inputs[0].0.commitments[target];
    let mut iv = [0u8; IV_LEN];
    rng.fill_bytes(&mut iv);
    let sealed = match deviation {
        Deviation::ModifiedValue => {
            let mut forged = opening.value.clone();
            forged.push(b'!');
            seal_claim(&msk, &digest, &frame_opening(&forged, &opening.salt), &iv)
        }
        Deviation::ManipulatedInput => {
            let other = commit(&opening.value, b"not the issued salt");
            let key = derive_key_direct::<Secp256k1>(&msk, &other);
            aead_seal(
                &key,
                &iv,
                &frame_opening(&opening.value, &opening.salt),
                digest.as_bytes(),
            )
        }
    };
    d_vp.get_mut(0, target).expect("target exists").sealed = sealed;
}

type Hook = Box<dyn FnMut(Direction, Vec<u8>) -> Vec<Vec<u8>> + Send>;
type Slot = Arc<Mutex<Option<Vec<u8>>>>;

type SessionOutcome = (
    Result<Vec<DisclosedClaim>, ProtocolError>,
    Result<ServeReport, WireError>,
);

/// One full protocol run over an in-process link. `hook` sees every
/// message on the verifier's side.
fn run_session<H>(
    fx: &Fixture,
    d_vp: &PresentationData,
    sessions: &HolderSessions,
    mode: DisclosureMode,
    hook: H,
    seed: u64,
) -> SessionOutcome
where
    H: FnMut(Direction, Vec<u8>) -> Vec<Vec<u8>> + Send + 'static,
{
    let (a, b) = loopback_pair();
    let (holder, dir, pool) = (
        fx.parties.holder.clone(),
        fx.parties.dir.clone(),
        sessions.clone(),
    );
    let (vpb, dvpb) = (fx.vp.to_bytes(), d_vp.to_bytes());
    let server = thread::spawn(move || {
        let mut chan = Channel::new(b).with_timeout(Some(Duration::from_secs(2)));
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
        serve_connection(&mut chan, &holder, &dir, &pool, &vpb, &dvpb, &mut rng)
    });
    let chan = Channel::new(InterceptLink::new(a, hook)).with_timeout(Some(SHORT_TIMEOUT));
    let policy = ValidationPolicy::new(VERIFIER, NOW);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let verifier = run_verifier(
        chan,
        &fx.parties.verifier,
        &fx.parties.dir,
        &policy,
        mode,
        &mut rng,
    );
    let holder = server.join().expect("holder thread");
    (verifier, holder)
}

fn passthrough(_: Direction, m: Vec<u8>) -> Vec<Vec<u8>> {
    vec![m]
}

fn pool(fx: &Fixture, quota: u32) -> HolderSessions {
    let mut secret = PresentationSecret::new(fx.msk(), *fx.secret.nonce());
    HolderSessions::new(&mut secret, quota).expect("positive quota")
}

pub fn attack_selective_failure(scenario: &Scenario) -> SelectiveFailureReport {
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
    let parties = Parties::new(&mut rng);
    let fx = Fixture::new(parties, scenario.n, 30, &mut rng);
    let mut d_vp = fx.d_vp.clone();
    deviate(
        &fx,
        &mut d_vp,
        &claim_name(scenario.target),
        scenario.deviation,
        &mut rng,
    );

    let picks: Vec<Pick> = scenario
        .selection
        .iter()
        .map(|&i| Pick::new(0, claim_name(i)))
        .collect();
    let mode = match scenario.mode {
        Mode::Batch => DisclosureMode::Batch(picks.clone()),
        Mode::Adaptive => DisclosureMode::Adaptive(Box::new(scripted_picker(picks.clone()))),
    };
    let sessions = pool(&fx, picks.len() as u32);
    let (verifier, holder) = run_session(&fx, &d_vp, &sessions, mode, passthrough, rng.next_u64());
    let holder = holder.expect("holder completes the session");

    let verifier_aborted = matches!(
        verifier,
        Err(ProtocolError::Disclosure(
            DisclosureError::ClaimVerificationFailure
        ))
    );
    let disclosed_correct = match &verifier {
        Ok(claims) => {
            claims.len() == picks.len() && claims.iter().all(|c| c.value == fx.value(&c.claim))
        }
        Err(_) => false,
    };
    SelectiveFailureReport {
        scenario: scenario.clone(),
        verifier_aborted,
        disclosed_correct,
        holder_saw_abort: holder.aborted_by_peer,
        holder_infers_selected: holder.aborted_by_peer || !holder.closed_by_peer,
    }
}

#[derive(Debug, Clone, Default)]
pub struct TamperReport {
    pub at_rest_trials: usize,
    pub at_rest_detected: usize,
    pub in_flight_trials: usize,
    pub in_flight_detected: usize,
    /// Descriptions of flips that went unnoticed.
    pub undetected: Vec<String>,
    pub response_replays: usize,
    pub response_replays_dropped: usize,
    pub request_replays: usize,
    pub request_replays_dropped: usize,
}

impl TamperReport {
    pub fn all_detected(&self) -> bool {
        self.at_rest_trials > 0
            && self.at_rest_detected == self.at_rest_trials
            && self.in_flight_trials > 0
            && self.in_flight_detected == self.in_flight_trials
            && self.response_replays_dropped == self.response_replays
            && self.request_replays_dropped == self.request_replays
    }
}

const FLIP_MASKS: [u8; 2] = [0x01, 0xff];

/// Every single-byte flip of iv, ciphertext, tag and aad of each stored
/// box, opened with the right key.
fn at_rest_sweep(fx: &Fixture, report: &mut TamperReport) {
    let msk = fx.msk();
    for (_, _, entry) in fx.d_vp.entries() {
        let key = derive_key_direct::<Secp256k1>(&msk, &entry.digest);
        assert!(aead_open(&key, &entry.sealed, entry.digest.as_bytes()).is_ok());
        let parts = [
            entry.sealed.iv.len(),
            entry.sealed.ciphertext.len(),
            entry.sealed.tag.len(),
            entry.digest.0.len(),
        ];
        for (part, &len) in parts.iter().enumerate() {
            for pos in 0..len {
                for mask in FLIP_MASKS {
                    let mut sealed = entry.sealed.clone();
                    let mut aad = entry.digest.0;
                    match part {
                        0 => sealed.iv[pos] ^= mask,
                        1 => sealed.ciphertext[pos] ^= mask,
                        2 => sealed.tag[pos] ^= mask,
                        _ => aad[pos] ^= mask,
                    }
                    report.at_rest_trials += 1;
                    if aead_open(&key, &sealed, &aad).is_err() {
                        report.at_rest_detected += 1;
                    }
                }
            }
        }
    }
}

fn full_batch(n: usize) -> DisclosureMode {
    DisclosureMode::Batch((0..n).map(|i| Pick::new(0, claim_name(i))).collect())
}

fn detected(fx: &Fixture, outcome: &SessionOutcome) -> bool {
    let holder_anomaly = match &outcome.1 {
        Err(_) => true,
        Ok(r) => !r.closed_by_peer || r.aborted_by_peer || r.foreign_frames > 0,
    };
    match &outcome.0 {
        Err(_) => true,
        Ok(claims) => {
            let wrong = claims.iter().any(|c| c.value != fx.value(&c.claim));
            // A wrong value accepted silently is never a detection.
            !wrong && holder_anomaly
        }
    }
}

/// Flips every byte of every message of an honest full-disclosure session,
/// in both directions, one flip per run.
fn in_flight_sweep(fx: &Fixture, sessions: &HolderSessions, seed: u64, report: &mut TamperReport) {
    let n = fx.claims.len();
    let lengths: Arc<Mutex<Vec<(Direction, usize)>>> = Arc::default();
    let log = Arc::clone(&lengths);
    let honest = run_session(
        fx,
        &fx.d_vp,
        sessions,
        full_batch(n),
        move |dir, m| {
            log.lock().unwrap().push((dir, m.len()));
            vec![m]
        },
        seed,
    );
    assert!(!detected(fx, &honest), "honest session must be clean");
    let lengths = lengths.lock().unwrap().clone();

    for (index, &(dir, len)) in lengths.iter().enumerate() {
        for pos in 0..len {
            for mask in FLIP_MASKS {
                let mut seen = 0usize;
                let hook = move |_: Direction, mut m: Vec<u8>| {
                    if seen == index {
                        m[pos] ^= mask;
                    }
                    seen += 1;
                    vec![m]
                };
                let outcome = run_session(fx, &fx.d_vp, sessions, full_batch(n), hook, seed + 1);
                report.in_flight_trials += 1;
                if detected(fx, &outcome) {
                    report.in_flight_detected += 1;
                } else {
                    report.undetected.push(format!(
                        "{dir:?} message {index} byte {pos} mask {mask:#04x}"
                    ));
                }
            }
        }
    }
}

fn is_kind(m: &[u8], kind: FrameKind) -> bool {
    m.len() > 1 && m[1] == kind as u8
}

/// Captures the first message of `kind` seen in `direction`.
fn recorder(direction: Direction, kind: FrameKind) -> (Slot, Hook) {
    let slot: Slot = Arc::default();
    let s = Arc::clone(&slot);
    let hook = move |dir: Direction, m: Vec<u8>| {
        if dir == direction && is_kind(&m, kind) {
            s.lock().unwrap().get_or_insert_with(|| m.clone());
        }
        vec![m]
    };
    (slot, Box::new(hook))
}

/// Injects `old` just ahead of the first `kind` message in `direction`.
fn injector(
    direction: Direction,
    kind: FrameKind,
    old: Vec<u8>,
) -> impl FnMut(Direction, Vec<u8>) -> Vec<Vec<u8>> + Send + 'static {
    let mut pending = Some(old);
    move |dir, m| match pending.take() {
        Some(old) if dir == direction && is_kind(&m, kind) => vec![old, m],
        other => {
            pending = other;
            vec![m]
        }
    }
}

fn replay_sweep(
    fx: &Fixture,
    sessions: &HolderSessions,
    rounds: usize,
    seed: u64,
    report: &mut TamperReport,
) {
    let n = fx.claims.len();
    for round in 0..rounds as u64 {
        // Responses from an earlier session, replayed at the verifier.
        let (slot, hook) = recorder(Direction::Inbound, FrameKind::OprfResponse);
        let first = run_session(
            fx,
            &fx.d_vp,
            sessions,
            full_batch(n),
            hook,
            seed + 2 * round,
        );
        assert!(first.0.is_ok());
        let old = slot.lock().unwrap().take().expect("response recorded");
        let hook = injector(Direction::Inbound, FrameKind::OprfResponse, old);
        let (verifier, holder) = run_session(
            fx,
            &fx.d_vp,
            sessions,
            full_batch(n),
            hook,
            seed + 2 * round + 1,
        );
        report.response_replays += 1;
        let values_ok = verifier
            .as_ref()
            .map(|c| c.iter().all(|c| c.value == fx.value(&c.claim)))
            .unwrap_or(false);
        if values_ok && holder.is_ok() {
            report.response_replays_dropped += 1;
        }

        // Requests from an earlier session, replayed at the holder.
        let (slot, hook) = recorder(Direction::Outbound, FrameKind::OprfRequest);
        run_session(
            fx,
            &fx.d_vp,
            sessions,
            full_batch(n),
            hook,
            seed + 1000 + round,
        )
        .0
        .expect("honest run");
        let old = slot.lock().unwrap().take().expect("request recorded");
        let hook = injector(Direction::Outbound, FrameKind::OprfRequest, old);
        let before = sessions.used();
        let (_, holder) = run_session(
            fx,
            &fx.d_vp,
            sessions,
            full_batch(n),
            hook,
            seed + 2000 + round,
        );
        report.request_replays += 1;
        if let Ok(h) = holder {
            // Only the genuine request may be charged.
            let charged = sessions.used() - before;
            if h.foreign_frames == 1 && charged == h.granted && h.transcript.len() <= 1 {
                report.request_replays_dropped += 1;
            }
        }
    }
}

pub fn attack_tamper_and_replay(seed: u64) -> TamperReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let parties = Parties::new(&mut rng);
    let fx = Fixture::new(parties, 4, 30, &mut rng);
    let sessions = pool(&fx, u32::MAX);
    let mut report = TamperReport::default();
    at_rest_sweep(&fx, &mut report);
    in_flight_sweep(&fx, &sessions, rng.next_u64(), &mut report);
    replay_sweep(&fx, &sessions, 10, rng.next_u64(), &mut report);
    report
}

#[derive(Debug, Clone, Default)]
pub struct QuotaStressReport {
    pub runs: usize,
    /// Runs where exactly `quota` evaluations were granted, the counter
    /// ended at `quota` and every other client got `QuotaExceeded`.
    pub exact_runs: usize,
    pub max_granted: u32,
}

/// `clients` threads each send one unit request against a fresh pool.
pub fn quota_stress(clients: usize, quota: u32, runs: usize, seed: u64) -> QuotaStressReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = QuotaStressReport {
        runs,
        ..Default::default()
    };
    for _ in 0..runs {
        let mut nonce = [0u8; 32];
        rng.fill_bytes(&mut nonce);
        let mut secret = PresentationSecret::new(Scalar::random(&mut rng), nonce);
        let pool = HolderSessions::new(&mut secret, quota).expect("positive quota");
        let barrier = Arc::new(Barrier::new(clients));
        let workers: Vec<_> = (0..clients)
            .map(|i| {
                let session = pool
                    .open_session(VERIFIER, &[i as u8; 32], b"stress")
                    .expect("open pool");
                let barrier = Arc::clone(&barrier);
                let spins = rng.gen_range(0..2000u32);
                thread::spawn(move || {
                    barrier.wait();
                    for _ in 0..spins {
                        std::hint::spin_loop();
                    }
                    session.evaluate(&[GroupElement::generator()]).map(|_| ())
                })
            })
            .collect();
        let results: Vec<_> = workers
            .into_iter()
            .map(|w| w.join().expect("client"))
            .collect();
        let granted = results.iter().filter(|r| r.is_ok()).count() as u32;
        let refused = results
            .iter()
            .filter(|r| **r == Err(DisclosureError::QuotaExceeded))
            .count();
        report.max_granted = report.max_granted.max(granted);
        if granted == quota && pool.used() == quota && refused == clients - quota as usize {
            report.exact_runs += 1;
        }
    }
    report
}

#[derive(Debug, Clone, Default)]
pub struct UnlinkabilityReport {
    pub presentations: usize,
    pub boxes: usize,
    pub repeated_boxes: usize,
    pub repeated_keys: usize,
}

/// Presents one credential `count` times and looks for any repeated
/// `(iv, ciphertext)` pair or per-claim key.
pub fn unlinkability_witness(count: usize, seed: u64) -> UnlinkabilityReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let parties = Parties::new(&mut rng);
    let fx = Fixture::new(parties, 2, 30, &mut rng);
    let workers = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8);
    let per = count.div_ceil(workers);
    type Sighting = (Vec<u8>, (String, [u8; 32]));
    let chunks: Vec<Vec<Sighting>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let fx = &fx;
                let todo = per.min(count.saturating_sub(w * per));
                scope.spawn(move || {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (w as u64 + 1) << 32);
                    let mut out = Vec::new();
                    for _ in 0..todo {
                        let (_, d_vp, secret) = create_presentation(
                            &fx.parties.holder,
                            &fx.inputs,
                            VERIFIER,
                            NOW,
                            &mut rng,
                            Execution::Sequential,
                        )
                        .expect("present");
                        let msk = secret.msk().expect("open");
                        for (_, name, e) in d_vp.entries() {
                            let mut ivct = e.sealed.iv.to_vec();
                            ivct.extend_from_slice(&e.sealed.ciphertext);
                            let key = derive_key_direct::<Secp256k1>(msk, &e.digest);
                            out.push((ivct, (name.to_owned(), *key.as_bytes())));
                        }
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker"))
            .collect()
    });
    let mut boxes = HashSet::new();
    let mut keys = HashSet::new();
    let mut report = UnlinkabilityReport {
        presentations: count,
        ..Default::default()
    };
    for (ivct, key) in chunks.into_iter().flatten() {
        report.boxes += 1;
        if !boxes.insert(ivct) {
            report.repeated_boxes += 1;
        }
        if !keys.insert(key) {
            report.repeated_keys += 1;
        }
    }
    report
}
