//! Holder and verifier drivers for one disclosure connection:
//! handshake, offer, OPRF rounds, close.

use std::time::Duration;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::credential::RejectReason;
use crate::crypto::GroupElement;
use crate::disclosure::{
    derive_session_id, verifier_disclose_adaptive, verifier_disclose_batch, DisclosedClaim,
    DisclosureError, DisclosureSelection, HolderSessions, OprfEvaluator, Pick, SessionId,
    TranscriptEntry,
};
use crate::keys::{KeyDirectory, PartyKey};
use crate::par::Execution;
use crate::presentation::{
    validate_presentation, PresentationData, ValidationPolicy, VerifiablePresentation, NONCE_LEN,
};

use super::frame::{ElementsBody, ErrorBody, ErrorCode, Frame, FrameKind, OfferBody};
use super::handshake::{handshake_initiator, handshake_responder};
use super::{Channel, WireError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("presentation {0}")]
    Rejected(RejectReason),
    #[error(transparent)]
    Disclosure(#[from] DisclosureError),
}

/// How one served connection ended.
#[derive(Debug, Clone)]
pub struct ServeReport {
    pub peer_id: String,
    pub session_id: SessionId,
    /// Elements evaluated for this peer.
    pub granted: u32,
    /// Frames dropped for carrying another session's id.
    pub foreign_frames: usize,
    pub closed_by_peer: bool,
    /// The verifier reported a failed claim and abandoned the session.
    pub aborted_by_peer: bool,
    pub transcript: Vec<TranscriptEntry>,
}

fn error_frame(session: &[u8], code: ErrorCode) -> Frame {
    Frame::new(FrameKind::Error, session, ErrorBody { code }.encode())
}

/// Holder side of one connection. `vp_bytes`/`d_vp_bytes` are the
/// canonical encodings offered to the verifier.
pub fn serve_connection<R: RngCore + CryptoRng>(
    chan: &mut Channel,
    holder: &PartyKey,
    directory: &KeyDirectory,
    sessions: &HolderSessions,
    vp_bytes: &[u8],
    d_vp_bytes: &[u8],
    rng: &mut R,
) -> Result<ServeReport, WireError> {
    let auth = handshake_responder(chan, holder, directory, rng)?;
    let mut fresh_nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut fresh_nonce);
    let session = match sessions.open_session(&auth.peer_id, &fresh_nonce, &auth.transcript) {
        Ok(s) => s,
        Err(_) => {
            let _ = chan.send_frame(&error_frame(&[], ErrorCode::SessionClosed));
            return Err(WireError::Remote(ErrorCode::SessionClosed));
        }
    };
    let sid = session.id();
    let offer = OfferBody {
        vp: vp_bytes.to_vec(),
        d_vp: d_vp_bytes.to_vec(),
        quota: sessions.quota(),
        fresh_nonce,
    };
    chan.send_frame(&Frame::new(FrameKind::Offer, &[], offer.encode()))?;

    let mut report = ServeReport {
        peer_id: auth.peer_id,
        session_id: sid,
        granted: 0,
        foreign_frames: 0,
        closed_by_peer: false,
        aborted_by_peer: false,
        transcript: Vec::new(),
    };
    loop {
        let frame = match chan.recv_frame() {
            Ok(f) => f,
            Err(WireError::Closed | WireError::Timeout) => break,
            Err(WireError::Decode(_)) => {
                chan.send_frame(&error_frame(sid.as_bytes(), ErrorCode::Protocol))?;
                continue;
            }
            Err(e) => return Err(e),
        };
        if frame.session_id != sid.as_bytes() {
            // Never reaches the session. The error echoes the foreign id, so
            // only a peer that believes in that session acts on it.
            report.foreign_frames += 1;
            chan.send_frame(&error_frame(&frame.session_id, ErrorCode::Protocol))?;
            continue;
        }
        match frame.kind {
            FrameKind::OprfRequest => {
                let reply = match ElementsBody::decode(&frame.body) {
                    Err(_) => error_frame(sid.as_bytes(), ErrorCode::Protocol),
                    Ok(req) => match session.evaluate(&req.elements) {
                        Ok(elements) => {
                            report.granted += elements.len() as u32;
                            Frame::new(
                                FrameKind::OprfResponse,
                                sid.as_bytes(),
                                ElementsBody { elements }.encode(),
                            )
                        }
                        Err(DisclosureError::QuotaExceeded) => {
                            error_frame(sid.as_bytes(), ErrorCode::QuotaExceeded)
                        }
                        Err(DisclosureError::SessionClosed) => {
                            error_frame(sid.as_bytes(), ErrorCode::SessionClosed)
                        }
                        Err(_) => error_frame(sid.as_bytes(), ErrorCode::Protocol),
                    },
                };
                chan.send_frame(&reply)?;
            }
            FrameKind::Close => {
                report.closed_by_peer = true;
                break;
            }
            FrameKind::Error => {
                report.aborted_by_peer = matches!(
                    ErrorBody::decode(&frame.body),
                    Ok(ErrorBody {
                        code: ErrorCode::Aborted
                    })
                );
                break;
            }
            _ => chan.send_frame(&error_frame(sid.as_bytes(), ErrorCode::Protocol))?,
        }
    }
    session.close();
    report.transcript = session.transcript();
    Ok(report)
}

/// Verifier's OPRF link over an established session.
pub struct WireEvaluator {
    chan: Channel,
    session_id: SessionId,
    foreign_frames: usize,
}

impl std::fmt::Debug for WireEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WireEvaluator")
            .field("session_id", &self.session_id)
            .finish_non_exhaustive()
    }
}

impl WireEvaluator {
    pub fn session_id(&self) -> SessionId {
        self.session_id
    }

    pub fn foreign_frames(&self) -> usize {
        self.foreign_frames
    }

    fn close(&mut self) {
        let _ = self.chan.send_frame(&Frame::new(
            FrameKind::Close,
            self.session_id.as_bytes(),
            vec![],
        ));
    }

    fn abort(&mut self) {
        let _ = self
            .chan
            .send_frame(&error_frame(self.session_id.as_bytes(), ErrorCode::Aborted));
    }
}

fn transport(e: WireError) -> DisclosureError {
    DisclosureError::Transport(e.to_string())
}

impl OprfEvaluator for WireEvaluator {
    fn evaluate(&mut self, request: &[GroupElement]) -> Result<Vec<GroupElement>, DisclosureError> {
        let body = ElementsBody {
            elements: request.to_vec(),
        }
        .encode();
        self.chan
            .send_frame(&Frame::new(
                FrameKind::OprfRequest,
                self.session_id.as_bytes(),
                body,
            ))
            .map_err(transport)?;
        loop {
            let frame = self.chan.recv_frame().map_err(transport)?;
            let unbound_error = frame.kind == FrameKind::Error && frame.session_id.is_empty();
            if frame.session_id != self.session_id.as_bytes() && !unbound_error {
                self.foreign_frames += 1;
                continue;
            }
            return match frame.kind {
                FrameKind::OprfResponse => {
                    let resp = ElementsBody::decode(&frame.body)
                        .map_err(|e| transport(WireError::Decode(e)))?;
                    if resp.elements.len() != request.len() {
                        return Err(DisclosureError::Transport(
                            "response length mismatch".into(),
                        ));
                    }
                    Ok(resp.elements)
                }
                FrameKind::Error => match ErrorBody::decode(&frame.body).map(|b| b.code) {
                    Ok(ErrorCode::QuotaExceeded) => Err(DisclosureError::QuotaExceeded),
                    Ok(ErrorCode::SessionClosed) => Err(DisclosureError::SessionClosed),
                    Ok(code) => Err(transport(WireError::Remote(code))),
                    Err(e) => Err(transport(WireError::Decode(e))),
                },
                _ => Err(transport(WireError::Unexpected)),
            };
        }
    }
}

/// Verifier side after the handshake and offer.
pub struct VerifierConnection {
    pub link: WireEvaluator,
    pub holder_id: String,
    pub vp: VerifiablePresentation,
    pub d_vp: PresentationData,
    pub quota: u32,
}

impl std::fmt::Debug for VerifierConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VerifierConnection")
            .field("holder_id", &self.holder_id)
            .field("quota", &self.quota)
            .finish_non_exhaustive()
    }
}

impl VerifierConnection {
    pub fn connect<R: RngCore + CryptoRng>(
        mut chan: Channel,
        me: &PartyKey,
        directory: &KeyDirectory,
        rng: &mut R,
    ) -> Result<Self, WireError> {
        let auth = handshake_initiator(&mut chan, me, directory, rng)?;
        let frame = chan.recv_frame()?;
        if frame.kind == FrameKind::Error {
            let code = ErrorBody::decode(&frame.body)?.code;
            return Err(WireError::Remote(code));
        }
        if frame.kind != FrameKind::Offer {
            return Err(WireError::Unexpected);
        }
        let offer = OfferBody::decode(&frame.body)?;
        let vp = VerifiablePresentation::from_bytes(&offer.vp)?;
        let d_vp = PresentationData::from_bytes(&offer.d_vp)?;
        if vp.metadata.holder_id != auth.peer_id {
            return Err(WireError::HandshakeFailure);
        }
        let session_id = derive_session_id(
            &vp.metadata.nonce,
            me.id(),
            &offer.fresh_nonce,
            offer.quota,
            &auth.transcript,
        );
        Ok(Self {
            link: WireEvaluator {
                chan,
                session_id,
                foreign_frames: 0,
            },
            holder_id: auth.peer_id,
            vp,
            d_vp,
            quota: offer.quota,
        })
    }

    pub fn validate(
        &self,
        directory: &KeyDirectory,
        policy: &ValidationPolicy,
    ) -> Result<(), RejectReason> {
        validate_presentation(&self.vp, &self.d_vp, directory, policy)
    }

    pub fn close(mut self) {
        self.link.close();
    }

    /// Ends the session visibly after a claim failed.
    pub fn abort(mut self) {
        self.link.abort();
    }

    /// Closes or aborts depending on how disclosure ended.
    pub fn finish<T>(self, result: &Result<T, DisclosureError>) {
        match result {
            Err(DisclosureError::ClaimVerificationFailure) => self.abort(),
            _ => self.close(),
        }
    }
}

pub type Picker = Box<dyn FnMut(&[DisclosedClaim]) -> Option<Pick> + Send>;

pub enum DisclosureMode {
    Batch(Vec<Pick>),
    Adaptive(Picker),
}

impl std::fmt::Debug for DisclosureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DisclosureMode::Batch(p) => f.debug_tuple("Batch").field(p).finish(),
            DisclosureMode::Adaptive(_) => f.write_str("Adaptive(..)"),
        }
    }
}

/// Full verifier run: connect, validate, disclose, close.
pub fn run_verifier<R: RngCore + CryptoRng>(
    chan: Channel,
    me: &PartyKey,
    directory: &KeyDirectory,
    policy: &ValidationPolicy,
    mode: DisclosureMode,
    rng: &mut R,
) -> Result<Vec<DisclosedClaim>, ProtocolError> {
    let mut conn = VerifierConnection::connect(chan, me, directory, rng)?;
    if let Err(reason) = conn.validate(directory, policy) {
        conn.close();
        return Err(ProtocolError::Rejected(reason));
    }
    let result = match mode {
        DisclosureMode::Batch(picks) => DisclosureSelection::new(picks, &conn.vp).and_then(|sel| {
            verifier_disclose_batch(
                &conn.vp,
                &conn.d_vp,
                &sel,
                conn.quota,
                &mut conn.link,
                rng,
                Execution::default(),
            )
        }),
        DisclosureMode::Adaptive(picker) => verifier_disclose_adaptive(
            &conn.vp,
            &conn.d_vp,
            picker,
            conn.quota,
            &mut conn.link,
            rng,
        ),
    };
    conn.finish(&result);
    Ok(result?)
}

/// Receive deadline suitable for adversarial tests where a dropped frame
/// would otherwise stall the verifier.
pub const SHORT_TIMEOUT: Duration = Duration::from_millis(250);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credential::{issue, IssueOptions};
    use crate::presentation::create_presentation;
    use crate::wire::{loopback_pair, ByteLink, Direction, InterceptLink};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::{Arc, Mutex};
    use std::thread;

    struct Setup {
        holder: PartyKey,
        verifier: PartyKey,
        dir: KeyDirectory,
        vp: VerifiablePresentation,
        d_vp: PresentationData,
        sessions: HolderSessions,
        values: Vec<Vec<u8>>,
    }

    fn setup(n: usize, quota: u32) -> Setup {
        let mut rng = ChaCha20Rng::seed_from_u64(55);
        let root = PartyKey::generate("root", &mut rng).unwrap();
        let issuer = PartyKey::generate("issuer", &mut rng).unwrap();
        let holder = PartyKey::generate("holder", &mut rng).unwrap();
        let verifier = PartyKey::generate("verifier", &mut rng).unwrap();
        let mut dir = KeyDirectory::new(&root);
        for p in [&issuer, &holder, &verifier] {
            dir.register(&root, p.id(), p.verifying_key()).unwrap();
        }
        let values: Vec<Vec<u8>> = (0..n).map(|i| format!("value-{i}").into_bytes()).collect();
        let claims: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("c{i}"), v.clone()))
            .collect();
        let inputs = vec![issue(
            &issuer,
            "holder",
            &claims,
            &IssueOptions::default(),
            &mut rng,
        )
        .unwrap()];
        let (vp, d_vp, mut secret) = create_presentation(
            &holder,
            &inputs,
            "verifier",
            1000,
            &mut rng,
            Execution::default(),
        )
        .unwrap();
        let sessions = HolderSessions::new(&mut secret, quota).unwrap();
        Setup {
            holder,
            verifier,
            dir,
            vp,
            d_vp,
            sessions,
            values,
        }
    }

    fn spawn_holder(
        s: &Setup,
        link: impl ByteLink + 'static,
    ) -> thread::JoinHandle<Result<ServeReport, WireError>> {
        let (holder, dir, sessions) = (s.holder.clone(), s.dir.clone(), s.sessions.clone());
        let (vpb, dvpb) = (s.vp.to_bytes(), s.d_vp.to_bytes());
        thread::spawn(move || {
            let mut chan = Channel::new(link).with_timeout(Some(Duration::from_secs(5)));
            serve_connection(
                &mut chan,
                &holder,
                &dir,
                &sessions,
                &vpb,
                &dvpb,
                &mut ChaCha20Rng::seed_from_u64(7),
            )
        })
    }

    #[test]
    fn honest_batch_over_loopback() {
        let s = setup(8, 2);
        let (a, b) = loopback_pair();
        let h = spawn_holder(&s, b);
        let policy = ValidationPolicy::new("verifier", 1000);
        let out = run_verifier(
            Channel::new(a),
            &s.verifier,
            &s.dir,
            &policy,
            DisclosureMode::Batch(vec![Pick::new(0, "c6"), Pick::new(0, "c1")]),
            &mut ChaCha20Rng::seed_from_u64(8),
        )
        .unwrap();
        assert_eq!(out[0].value, s.values[6]);
        assert_eq!(out[1].value, s.values[1]);
        let report = h.join().unwrap().unwrap();
        assert_eq!(report.granted, 2);
        assert!(report.closed_by_peer);
        assert_eq!(report.peer_id, "verifier");
    }

    #[test]
    fn over_quota_batch_refused_locally() {
        let s = setup(4, 1);
        let (a, b) = loopback_pair();
        let h = spawn_holder(&s, b);
        let policy = ValidationPolicy::new("verifier", 1000);
        let r = run_verifier(
            Channel::new(a),
            &s.verifier,
            &s.dir,
            &policy,
            DisclosureMode::Batch(vec![Pick::new(0, "c0"), Pick::new(0, "c1")]),
            &mut ChaCha20Rng::seed_from_u64(8),
        );
        assert_eq!(
            r.unwrap_err(),
            ProtocolError::Disclosure(DisclosureError::QuotaExceeded)
        );
        let report = h.join().unwrap().unwrap();
        assert!(report.transcript.is_empty());
    }

    #[test]
    fn replayed_response_is_dropped() {
        // First session: record the holder's response frame.
        let s = setup(4, 4);
        let recorded: Arc<Mutex<Vec<Vec<u8>>>> = Arc::default();
        let (a, b) = loopback_pair();
        let h = spawn_holder(&s, b);
        let rec = Arc::clone(&recorded);
        let link = InterceptLink::new(a, move |dir, m| {
            if dir == Direction::Inbound && m[1] == FrameKind::OprfResponse as u8 {
                rec.lock().unwrap().push(m.clone());
            }
            vec![m]
        });
        let policy = ValidationPolicy::new("verifier", 1000);
        run_verifier(
            Channel::new(link),
            &s.verifier,
            &s.dir,
            &policy,
            DisclosureMode::Batch(vec![Pick::new(0, "c0")]),
            &mut ChaCha20Rng::seed_from_u64(9),
        )
        .unwrap();
        h.join().unwrap().unwrap();
        let old = recorded.lock().unwrap()[0].clone();

        // Second session: inject the old response ahead of the genuine one.
        let (a, b) = loopback_pair();
        let h = spawn_holder(&s, b);
        let link = InterceptLink::new(a, move |dir, m| {
            if dir == Direction::Inbound && m[1] == FrameKind::OprfResponse as u8 {
                vec![old.clone(), m]
            } else {
                vec![m]
            }
        });
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let mut conn =
            VerifierConnection::connect(Channel::new(link), &s.verifier, &s.dir, &mut rng).unwrap();
        let sel = DisclosureSelection::new(vec![Pick::new(0, "c0")], &conn.vp).unwrap();
        let out = verifier_disclose_batch(
            &conn.vp,
            &conn.d_vp,
            &sel,
            conn.quota,
            &mut conn.link,
            &mut rng,
            Execution::default(),
        )
        .unwrap();
        assert_eq!(out[0].value, s.values[0]);
        assert_eq!(conn.link.foreign_frames(), 1);
        conn.close();
        h.join().unwrap().unwrap();
    }

    #[test]
    fn replayed_request_never_reaches_session() {
        let s = setup(4, 4);
        let (a, b) = loopback_pair();
        let h = spawn_holder(&s, b);
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let mut conn =
            VerifierConnection::connect(Channel::new(a), &s.verifier, &s.dir, &mut rng).unwrap();
        // Forge a request under a different session id.
        let mut forged = conn.link.session_id();
        forged.0[0] ^= 1;
        let body = ElementsBody {
            elements: vec![GroupElement::generator()],
        }
        .encode();
        conn.link
            .chan
            .send_frame(&Frame::new(FrameKind::OprfRequest, forged.as_bytes(), body))
            .unwrap();
        let reply = conn.link.chan.recv_frame().unwrap();
        assert_eq!(reply.kind, FrameKind::Error);
        conn.close();
        let report = h.join().unwrap().unwrap();
        assert_eq!(report.foreign_frames, 1);
        assert!(report.transcript.is_empty());
        assert_eq!(s.sessions.used(), 0);
    }
}
