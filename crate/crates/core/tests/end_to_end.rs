mod common;

use std::sync::{Arc, Barrier};
use std::thread;
use std::time::Duration;

use common::{claim_name, claim_value, world, World, NOW};
use osd_core::crypto::GroupElement;
use osd_core::disclosure::{DisclosureError, HolderSessions, Pick};
use osd_core::presentation::ValidationPolicy;
use osd_core::wire::{
    connect, run_verifier, serve_connection, DisclosureMode, Endpoint, Listener, ProtocolError,
    ServeReport, WireError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn serve_n(
    w: &World,
    endpoint: &str,
    connections: usize,
) -> (Endpoint, thread::JoinHandle<Vec<ServeReport>>) {
    let listener = Listener::bind(&Endpoint::parse(endpoint).unwrap()).unwrap();
    let ep = listener.local_endpoint();
    let (holder, dir, sessions) = (w.holder.clone(), w.dir.clone(), w.sessions.clone());
    let (vpb, dvpb) = (w.vp.to_bytes(), w.d_vp.to_bytes());
    let h = thread::spawn(move || {
        let workers: Vec<_> = (0..connections)
            .map(|i| {
                let chan = listener.accept().unwrap();
                let (holder, dir, sessions, vpb, dvpb) = (
                    holder.clone(),
                    dir.clone(),
                    sessions.clone(),
                    vpb.clone(),
                    dvpb.clone(),
                );
                thread::spawn(move || {
                    let mut chan = chan.with_timeout(Some(Duration::from_secs(10)));
                    let mut rng = ChaCha20Rng::seed_from_u64(100 + i as u64);
                    serve_connection(&mut chan, &holder, &dir, &sessions, &vpb, &dvpb, &mut rng)
                        .unwrap()
                })
            })
            .collect();
        workers.into_iter().map(|t| t.join().unwrap()).collect()
    });
    (ep, h)
}

fn disclose(
    w: &World,
    ep: &Endpoint,
    mode: DisclosureMode,
    seed: u64,
) -> Result<Vec<osd_core::disclosure::DisclosedClaim>, ProtocolError> {
    let chan = connect(ep).unwrap();
    let policy = ValidationPolicy::new("verifier", NOW);
    run_verifier(
        chan,
        &w.verifier,
        &w.dir,
        &policy,
        mode,
        &mut ChaCha20Rng::seed_from_u64(seed),
    )
}

#[test]
fn batch_over_tcp() {
    let w = world(1, 8, 8);
    let (ep, h) = serve_n(&w, "tcp:127.0.0.1:0", 1);
    let picks = vec![Pick::new(0, claim_name(3)), Pick::new(0, claim_name(6))];
    let out = disclose(&w, &ep, DisclosureMode::Batch(picks), 5).unwrap();
    assert_eq!(out[0].value, claim_value(3));
    assert_eq!(out[1].value, claim_value(6));
    let reports = h.join().unwrap();
    assert_eq!(reports[0].granted, 2);
    assert_eq!(reports[0].transcript.len(), 1);
}

#[test]
fn adaptive_over_loopback() {
    let w = world(2, 8, 3);
    let (ep, h) = serve_n(&w, "loop:e2e-adaptive", 1);
    // Follow-up depends on the first value.
    let picker = move |so_far: &[osd_core::disclosure::DisclosedClaim]| match so_far.len() {
        0 => Some(Pick::new(0, claim_name(0))),
        1 if so_far[0].value.starts_with(b"0") => Some(Pick::new(0, claim_name(5))),
        1 => Some(Pick::new(0, claim_name(6))),
        _ => None,
    };
    let out = disclose(&w, &ep, DisclosureMode::Adaptive(Box::new(picker)), 6).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[1].claim, claim_name(5));
    assert_eq!(out[1].value, claim_value(5));
    let reports = h.join().unwrap();
    assert_eq!(reports[0].transcript.len(), 2);
}

#[test]
fn concurrent_verifiers_share_one_quota() {
    let w = Arc::new(world(3, 8, 3));
    let (ep, h) = serve_n(&w, "tcp:127.0.0.1:0", 4);
    let clients: Vec<_> = (0..4)
        .map(|i| {
            let (w, ep) = (Arc::clone(&w), ep.clone());
            thread::spawn(move || {
                let picks = vec![Pick::new(0, claim_name(i))];
                disclose(&w, &ep, DisclosureMode::Batch(picks), 10 + i as u64)
            })
        })
        .collect();
    let results: Vec<_> = clients.into_iter().map(|c| c.join().unwrap()).collect();
    let ok = results.iter().filter(|r| r.is_ok()).count();
    let refused = results
        .iter()
        .filter(|r| {
            matches!(
                r,
                Err(ProtocolError::Disclosure(DisclosureError::QuotaExceeded))
            )
        })
        .count();
    assert_eq!((ok, refused), (3, 1));
    let granted: u32 = h.join().unwrap().iter().map(|r| r.granted).sum();
    assert_eq!(granted, 3);
    assert_eq!(w.sessions.used(), 3);
}

#[test]
fn closed_secret_refuses_new_sessions() {
    let w = world(4, 2, 2);
    w.sessions.close();
    let (ep, h) = serve_n(&w, "loop:e2e-closed", 1);
    let err = disclose(
        &w,
        &ep,
        DisclosureMode::Batch(vec![Pick::new(0, claim_name(0))]),
        1,
    )
    .unwrap_err();
    assert!(matches!(err, ProtocolError::Wire(WireError::Remote(_))));
    assert!(h.join().is_err());
}

#[test]
fn unit_requests_race_for_quota() {
    for round in 0..20 {
        let w = world(50 + round, 2, 5);
        let sessions: HolderSessions = w.sessions.clone();
        let barrier = Arc::new(Barrier::new(8));
        let workers: Vec<_> = (0..8)
            .map(|i| {
                let session = sessions
                    .open_session("verifier", &[i as u8; 32], b"t")
                    .unwrap();
                let barrier = Arc::clone(&barrier);
                thread::spawn(move || {
                    barrier.wait();
                    (0..2)
                        .map(|_| session.evaluate(&[GroupElement::generator()]))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let outcomes: Vec<_> = workers
            .into_iter()
            .flat_map(|t| t.join().unwrap())
            .collect();
        let granted = outcomes.iter().filter(|r| r.is_ok()).count();
        assert_eq!(granted, 5);
        assert!(outcomes.iter().filter(|r| r.is_err()).all(|r| matches!(
            r,
            Err(DisclosureError::QuotaExceeded) | Err(DisclosureError::SessionClosed)
        )));
        assert_eq!(sessions.used(), 5);
    }
}
