//! Mutual challenge-response authentication against the key directory.
//!
//! ```text
//! I -> R  Hello(id_I, n_I)
//! R -> I  Hello(id_R, n_R)
//! I -> R  Auth(sig_I("initiator" ‖ T))
//! R -> I  Auth(sig_R("responder" ‖ T))
//! ```
//!
//! `T` hashes both hello bodies. It feeds the session id, binding every
//! later OPRF frame to this authenticated exchange.

use rand::{CryptoRng, RngCore};
use sha3::{Digest as _, Sha3_512};

use crate::keys::{verify_signature, KeyDirectory, PartyKey};
use crate::presentation::NONCE_LEN;

use super::frame::{AuthBody, ErrorBody, ErrorCode, Frame, FrameKind, HelloBody};
use super::{Channel, WireError};

const HANDSHAKE_DST: &[u8] = b"CODSSI-HS-v1";
const AUTH_DST: &[u8] = b"CODSSI-HS-AUTH-v1";
pub const TRANSCRIPT_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Authenticated {
    pub peer_id: String,
    pub transcript: [u8; TRANSCRIPT_LEN],
}

fn transcript_hash(initiator_hello: &[u8], responder_hello: &[u8]) -> [u8; TRANSCRIPT_LEN] {
    let mut h = Sha3_512::new();
    h.update(HANDSHAKE_DST);
    for part in [initiator_hello, responder_hello] {
        h.update((part.len() as u64).to_be_bytes());
        h.update(part);
    }
    let mut out = [0u8; TRANSCRIPT_LEN];
    out.copy_from_slice(&h.finalize()[..TRANSCRIPT_LEN]);
    out
}

fn auth_message(role: &[u8], transcript: &[u8; TRANSCRIPT_LEN]) -> Vec<u8> {
    [AUTH_DST, role, transcript].concat()
}

fn expect(chan: &mut Channel, kind: FrameKind) -> Result<Vec<u8>, WireError> {
    let frame = chan.recv_frame().map_err(|e| match e {
        WireError::Decode(_) => WireError::HandshakeFailure,
        other => other,
    })?;
    if frame.kind == kind {
        Ok(frame.body)
    } else {
        Err(WireError::HandshakeFailure)
    }
}

fn fail(chan: &mut Channel) -> WireError {
    let body = ErrorBody {
        code: ErrorCode::Handshake,
    }
    .encode();
    let _ = chan.send_frame(&Frame::new(FrameKind::Error, &[], body));
    WireError::HandshakeFailure
}

fn hello<R: RngCore + CryptoRng>(me: &PartyKey, rng: &mut R) -> Vec<u8> {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    HelloBody {
        party_id: me.id().to_owned(),
        nonce,
    }
    .encode()
}

fn check_auth(
    body: &[u8],
    directory: &KeyDirectory,
    peer_id: &str,
    role: &[u8],
    transcript: &[u8; TRANSCRIPT_LEN],
) -> bool {
    let (Ok(auth), Some(key)) = (AuthBody::decode(body), directory.lookup(peer_id)) else {
        return false;
    };
    verify_signature(key, &auth_message(role, transcript), &auth.signature)
}

pub fn handshake_initiator<R: RngCore + CryptoRng>(
    chan: &mut Channel,
    me: &PartyKey,
    directory: &KeyDirectory,
    rng: &mut R,
) -> Result<Authenticated, WireError> {
    let my_hello = hello(me, rng);
    chan.send_frame(&Frame::new(FrameKind::Hello, &[], my_hello.clone()))?;
    let peer_hello = expect(chan, FrameKind::Hello)?;
    let peer = HelloBody::decode(&peer_hello).map_err(|_| fail(chan))?;
    if !directory.contains(&peer.party_id) {
        return Err(fail(chan));
    }
    let transcript = transcript_hash(&my_hello, &peer_hello);
    let sig = me.sign(&auth_message(b"initiator", &transcript));
    chan.send_frame(&Frame::new(
        FrameKind::Auth,
        &[],
        AuthBody { signature: sig }.encode(),
    ))?;
    let peer_auth = expect(chan, FrameKind::Auth)?;
    if !check_auth(
        &peer_auth,
        directory,
        &peer.party_id,
        b"responder",
        &transcript,
    ) {
        return Err(fail(chan));
    }
    Ok(Authenticated {
        peer_id: peer.party_id,
        transcript,
    })
}

pub fn handshake_responder<R: RngCore + CryptoRng>(
    chan: &mut Channel,
    me: &PartyKey,
    directory: &KeyDirectory,
    rng: &mut R,
) -> Result<Authenticated, WireError> {
    let peer_hello = expect(chan, FrameKind::Hello)?;
    let peer = HelloBody::decode(&peer_hello).map_err(|_| fail(chan))?;
    if !directory.contains(&peer.party_id) {
        return Err(fail(chan));
    }
    let my_hello = hello(me, rng);
    chan.send_frame(&Frame::new(FrameKind::Hello, &[], my_hello.clone()))?;
    let transcript = transcript_hash(&peer_hello, &my_hello);
    let peer_auth = expect(chan, FrameKind::Auth)?;
    if !check_auth(
        &peer_auth,
        directory,
        &peer.party_id,
        b"initiator",
        &transcript,
    ) {
        return Err(fail(chan));
    }
    let sig = me.sign(&auth_message(b"responder", &transcript));
    chan.send_frame(&Frame::new(
        FrameKind::Auth,
        &[],
        AuthBody { signature: sig }.encode(),
    ))?;
    Ok(Authenticated {
        peer_id: peer.party_id,
        transcript,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::loopback_pair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::thread;

    fn parties(register_verifier: bool) -> (PartyKey, PartyKey, KeyDirectory) {
        let mut rng = ChaCha20Rng::seed_from_u64(44);
        let root = PartyKey::generate("root", &mut rng).unwrap();
        let holder = PartyKey::generate("holder", &mut rng).unwrap();
        let verifier = PartyKey::generate("verifier", &mut rng).unwrap();
        let mut dir = KeyDirectory::new(&root);
        dir.register(&root, "holder", holder.verifying_key())
            .unwrap();
        if register_verifier {
            dir.register(&root, "verifier", verifier.verifying_key())
                .unwrap();
        }
        (holder, verifier, dir)
    }

    fn run(
        register_verifier: bool,
    ) -> (
        Result<Authenticated, WireError>,
        Result<Authenticated, WireError>,
    ) {
        let (holder, verifier, dir) = parties(register_verifier);
        let (a, b) = loopback_pair();
        let dir2 = dir.clone();
        let t = thread::spawn(move || {
            let mut chan = Channel::new(b);
            handshake_responder(
                &mut chan,
                &holder,
                &dir2,
                &mut ChaCha20Rng::seed_from_u64(1),
            )
        });
        let mut chan = Channel::new(a);
        let init = handshake_initiator(
            &mut chan,
            &verifier,
            &dir,
            &mut ChaCha20Rng::seed_from_u64(2),
        );
        (init, t.join().unwrap())
    }

    #[test]
    fn both_sides_agree() {
        let (i, r) = run(true);
        let (i, r) = (i.unwrap(), r.unwrap());
        assert_eq!(i.peer_id, "holder");
        assert_eq!(r.peer_id, "verifier");
        assert_eq!(i.transcript, r.transcript);
    }

    #[test]
    fn unknown_peer_fails() {
        let (i, r) = run(false);
        assert_eq!(r.unwrap_err(), WireError::HandshakeFailure);
        assert!(i.is_err());
    }

    #[test]
    fn impersonation_fails() {
        // A key pair claiming the holder's id without the holder's key.
        let (_, verifier, dir) = parties(true);
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let fake_holder = PartyKey::generate("holder", &mut rng).unwrap();
        let (a, b) = loopback_pair();
        let dir2 = dir.clone();
        let t = thread::spawn(move || {
            let mut chan = Channel::new(b);
            handshake_responder(
                &mut chan,
                &fake_holder,
                &dir2,
                &mut ChaCha20Rng::seed_from_u64(1),
            )
        });
        let mut chan = Channel::new(a);
        let init = handshake_initiator(&mut chan, &verifier, &dir, &mut rng);
        assert_eq!(init.unwrap_err(), WireError::HandshakeFailure);
        let _ = t.join();
    }
}
