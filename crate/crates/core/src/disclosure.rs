//! The oblivious disclosure protocol.
//!
//! The holder runs the OPRF server side: [`HolderSessions`] owns the
//! presentation key and a quota pool shared by every [`OprfSession`] opened
//! from it. The verifier blinds the commitments of the claims it wants,
//! has them evaluated, unblinds, and opens the matching encrypted claims,
//! either in one batch round or adaptively one claim per round.

use std::collections::HashSet;
use std::sync::{Arc, Mutex, RwLock};

use rand::{CryptoRng, RngCore};
use sha3::{Digest as _, Sha3_512};
use thiserror::Error;

use crate::credential::verify_opening;
use crate::crypto::oprf::{blind_with, evaluate, finalize};
use crate::crypto::{
    aead_open, split_opening, ClaimKey, CryptoError, Digest, GroupElement, Scalar, Secp256k1,
    ELEMENT_LEN,
};
use crate::par::Execution;
use crate::presentation::{
    PresentationData, PresentationSecret, VerifiablePresentation, NONCE_LEN,
};

pub const SESSION_ID_LEN: usize = 32;
const SESSION_DST: &[u8] = b"CODSSI-SID-v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DisclosureError {
    #[error("presentation secret is closed")]
    SecretClosed,
    #[error("session is closed")]
    SessionClosed,
    #[error("disclosure quota exceeded")]
    QuotaExceeded,
    #[error("invalid group element")]
    InvalidElement,
    #[error("quota must be at least one")]
    InvalidQuota,
    #[error("invalid claim selection")]
    InvalidSelection,
    /// AEAD or commitment check failed. Deliberately uninformative.
    #[error("claim verification failed")]
    ClaimVerificationFailure,
    #[error("transport error: {0}")]
    Transport(String),
}

impl From<CryptoError> for DisclosureError {
    fn from(_: CryptoError) -> Self {
        DisclosureError::InvalidElement
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionId(pub [u8; SESSION_ID_LEN]);

impl SessionId {
    pub fn as_bytes(&self) -> &[u8; SESSION_ID_LEN] {
        &self.0
    }
}

/// Binds a session to the presentation, the verifier, the holder's fresh
/// nonce, the advertised quota and the authenticated handshake.
pub fn derive_session_id(
    vp_nonce: &[u8; NONCE_LEN],
    verifier_id: &str,
    fresh_nonce: &[u8; NONCE_LEN],
    quota: u32,
    binding: &[u8],
) -> SessionId {
    let mut h = Sha3_512::new();
    h.update(SESSION_DST);
    for part in [
        &vp_nonce[..],
        verifier_id.as_bytes(),
        &fresh_nonce[..],
        &quota.to_be_bytes(),
        binding,
    ] {
        h.update((part.len() as u64).to_be_bytes());
        h.update(part);
    }
    let mut id = [0u8; SESSION_ID_LEN];
    id.copy_from_slice(&h.finalize()[..SESSION_ID_LEN]);
    SessionId(id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Open,
    Exhausted,
    Closed,
}

/// What the holder observed in one request. Only element encodings and
/// counts, never anything that names a claim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub request: Vec<[u8; ELEMENT_LEN]>,
    pub outcome: EvaluationOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluationOutcome {
    Granted(Vec<[u8; ELEMENT_LEN]>),
    QuotaExceeded,
    Rejected,
}

struct Shared {
    msk: RwLock<Option<Scalar>>,
    vp_nonce: [u8; NONCE_LEN],
    quota: u32,
    used: Mutex<u32>,
}

/// Holder-side OPRF server state for one presentation.
///
/// Cloning shares the same key and quota pool.
#[derive(Clone)]
pub struct HolderSessions {
    shared: Arc<Shared>,
    exec: Execution,
}

impl std::fmt::Debug for HolderSessions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HolderSessions")
            .field("quota", &self.shared.quota)
            .field("used", &self.used())
            .finish_non_exhaustive()
    }
}

impl HolderSessions {
    /// Takes ownership of the presentation key; `secret` is left closed.
    pub fn new(secret: &mut PresentationSecret, quota: u32) -> Result<Self, DisclosureError> {
        if quota == 0 {
            return Err(DisclosureError::InvalidQuota);
        }
        let vp_nonce = *secret.nonce();
        let msk = secret
            .take_msk()
            .map_err(|_| DisclosureError::SecretClosed)?;
        Ok(Self {
            shared: Arc::new(Shared {
                msk: RwLock::new(Some(msk)),
                vp_nonce,
                quota,
                used: Mutex::new(0),
            }),
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn quota(&self) -> u32 {
        self.shared.quota
    }

    /// Evaluations granted so far across all sessions.
    pub fn used(&self) -> u32 {
        *self.shared.used.lock().expect("quota lock")
    }

    pub fn vp_nonce(&self) -> &[u8; NONCE_LEN] {
        &self.shared.vp_nonce
    }

    pub fn is_closed(&self) -> bool {
        self.shared.msk.read().expect("key lock").is_none()
    }

    /// Drops and zeroizes the key. Open sessions fail from now on.
    pub fn close(&self) {
        self.shared.msk.write().expect("key lock").take();
    }

    pub fn open_session(
        &self,
        verifier_id: &str,
        fresh_nonce: &[u8; NONCE_LEN],
        binding: &[u8],
    ) -> Result<OprfSession, DisclosureError> {
        if self.is_closed() {
            return Err(DisclosureError::SecretClosed);
        }
        let id = derive_session_id(
            &self.shared.vp_nonce,
            verifier_id,
            fresh_nonce,
            self.shared.quota,
            binding,
        );
        Ok(OprfSession {
            id,
            peer: verifier_id.to_owned(),
            shared: Arc::clone(&self.shared),
            exec: self.exec,
            state: Mutex::new(SessionState::Open),
            transcript: Mutex::new(Vec::new()),
        })
    }
}

/// One verifier's session against a [`HolderSessions`] pool. Safe to share
/// between threads; every request is all-or-nothing against the pool.
pub struct OprfSession {
    id: SessionId,
    peer: String,
    shared: Arc<Shared>,
    exec: Execution,
    state: Mutex<SessionState>,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl std::fmt::Debug for OprfSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OprfSession")
            .field("peer", &self.peer)
            .field("state", &self.state())
            .finish_non_exhaustive()
    }
}

impl OprfSession {
    pub fn id(&self) -> SessionId {
        self.id
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    pub fn quota(&self) -> u32 {
        self.shared.quota
    }

    pub fn used(&self) -> u32 {
        *self.shared.used.lock().expect("quota lock")
    }

    pub fn state(&self) -> SessionState {
        *self.state.lock().expect("state lock")
    }

    pub fn close(&self) {
        *self.state.lock().expect("state lock") = SessionState::Closed;
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    fn record(&self, request: &[GroupElement], outcome: EvaluationOutcome) {
        let request = request.iter().map(GroupElement::to_bytes).collect();
        self.transcript
            .lock()
            .expect("transcript lock")
            .push(TranscriptEntry { request, outcome });
    }

    /// Evaluates every element under the presentation key, or none of them.
    pub fn evaluate(&self, request: &[GroupElement]) -> Result<Vec<GroupElement>, DisclosureError> {
        match self.state() {
            SessionState::Open => {}
            SessionState::Exhausted => return Err(DisclosureError::QuotaExceeded),
            SessionState::Closed => return Err(DisclosureError::SessionClosed),
        }
        // Held across the exponentiations so a concurrent close cannot
        // interleave with a granted request.
        let key_guard = self.shared.msk.read().expect("key lock");
        let msk = key_guard.as_ref().ok_or(DisclosureError::SessionClosed)?;
        if request.is_empty() || request.iter().any(GroupElement::is_identity) {
            self.record(request, EvaluationOutcome::Rejected);
            return Err(DisclosureError::InvalidElement);
        }
        {
            let mut used = self.shared.used.lock().expect("quota lock");
            let wanted = u32::try_from(request.len()).unwrap_or(u32::MAX);
            if used.saturating_add(wanted) > self.shared.quota {
                drop(used);
                *self.state.lock().expect("state lock") = SessionState::Exhausted;
                self.record(request, EvaluationOutcome::QuotaExceeded);
                return Err(DisclosureError::QuotaExceeded);
            }
            *used += wanted;
        }
        let response = self
            .exec
            .try_map(request, |a| evaluate::<Secp256k1>(msk, a))?;
        self.record(
            request,
            EvaluationOutcome::Granted(response.iter().map(GroupElement::to_bytes).collect()),
        );
        Ok(response)
    }
}

/// Anything that can answer an OPRF request on the verifier's behalf.
pub trait OprfEvaluator {
    fn evaluate(&mut self, request: &[GroupElement]) -> Result<Vec<GroupElement>, DisclosureError>;
}

impl OprfEvaluator for &OprfSession {
    fn evaluate(&mut self, request: &[GroupElement]) -> Result<Vec<GroupElement>, DisclosureError> {
        OprfSession::evaluate(self, request)
    }
}

impl OprfEvaluator for OprfSession {
    fn evaluate(&mut self, request: &[GroupElement]) -> Result<Vec<GroupElement>, DisclosureError> {
        OprfSession::evaluate(self, request)
    }
}

/// Counts requests and elements forwarded to an inner evaluator.
#[derive(Debug)]
pub struct CountingEvaluator<E> {
    pub inner: E,
    pub rounds: usize,
    pub elements: usize,
}

impl<E> CountingEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            rounds: 0,
            elements: 0,
        }
    }
}

impl<E: OprfEvaluator> OprfEvaluator for CountingEvaluator<E> {
    fn evaluate(&mut self, request: &[GroupElement]) -> Result<Vec<GroupElement>, DisclosureError> {
        self.rounds += 1;
        self.elements += request.len();
        self.inner.evaluate(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pick {
    pub credential: usize,
    pub claim: String,
}

impl Pick {
    pub fn new(credential: usize, claim: impl Into<String>) -> Self {
        Self {
            credential,
            claim: claim.into(),
        }
    }
}

/// Distinct picks that all exist in a given presentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisclosureSelection {
    picks: Vec<Pick>,
}

impl DisclosureSelection {
    pub fn new(picks: Vec<Pick>, vp: &VerifiablePresentation) -> Result<Self, DisclosureError> {
        let mut seen = HashSet::new();
        for p in &picks {
            if lookup_digest(vp, p).is_none() || !seen.insert(p) {
                return Err(DisclosureError::InvalidSelection);
            }
        }
        Ok(Self { picks })
    }

    pub fn picks(&self) -> &[Pick] {
        &self.picks
    }

    pub fn len(&self) -> usize {
        self.picks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.picks.is_empty()
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DisclosedClaim {
    pub credential: usize,
    pub claim: String,
    pub value: Vec<u8>,
    pub salt: Vec<u8>,
    pub digest: Digest,
}

impl std::fmt::Debug for DisclosedClaim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DisclosedClaim")
            .field("credential", &self.credential)
            .field("claim", &self.claim)
            .field("value", &String::from_utf8_lossy(&self.value))
            .finish_non_exhaustive()
    }
}

fn lookup_digest(vp: &VerifiablePresentation, pick: &Pick) -> Option<Digest> {
    vp.credentials
        .get(pick.credential)?
        .commitments
        .get(&pick.claim)
        .copied()
}

/// Blinded request for a set of picks, plus the state needed to unblind.
pub struct PendingRound {
    picks: Vec<(Pick, Digest, Scalar)>,
    request: Vec<GroupElement>,
}

impl PendingRound {
    pub fn request(&self) -> &[GroupElement] {
        &self.request
    }

    pub fn len(&self) -> usize {
        self.request.len()
    }

    pub fn is_empty(&self) -> bool {
        self.request.is_empty()
    }
}

/// Blinds the commitment of every pick: `a = H1(x)^r` with fresh `r`.
pub fn prepare_round<R: RngCore + CryptoRng>(
    vp: &VerifiablePresentation,
    picks: &[Pick],
    rng: &mut R,
    exec: Execution,
) -> Result<PendingRound, DisclosureError> {
    let picks = picks
        .iter()
        .map(|p| {
            let x = lookup_digest(vp, p).ok_or(DisclosureError::InvalidSelection)?;
            Ok((p.clone(), x, Scalar::random(rng)))
        })
        .collect::<Result<Vec<_>, DisclosureError>>()?;
    let request = exec.map(&picks, |(_, x, r)| blind_with::<Secp256k1>(x, r));
    Ok(PendingRound { picks, request })
}

/// Unblinds a response into one claim key per pick, in request order.
pub fn complete_round(
    round: PendingRound,
    response: &[GroupElement],
    exec: Execution,
) -> Result<Vec<(Pick, Digest, ClaimKey)>, DisclosureError> {
    if response.len() != round.picks.len() {
        return Err(DisclosureError::Transport(
            "response length mismatch".into(),
        ));
    }
    let pairs: Vec<_> = round
        .picks
        .into_iter()
        .zip(response.iter().copied())
        .collect();
    exec.try_map(&pairs, |((pick, x, r), b)| {
        // An invalid evaluation can only come from a misbehaving holder and
        // is reported the same way as a failed decryption.
        let key = finalize::<Secp256k1>(x, b, r)
            .map_err(|_| DisclosureError::ClaimVerificationFailure)?;
        Ok((pick.clone(), *x, key))
    })
}

/// Opens one encrypted claim and checks it against its commitment.
pub fn open_claim(
    d_vp: &PresentationData,
    pick: &Pick,
    digest: &Digest,
    key: &ClaimKey,
) -> Result<DisclosedClaim, DisclosureError> {
    let fail = DisclosureError::ClaimVerificationFailure;
    let entry = d_vp.get(pick.credential, &pick.claim).ok_or(fail.clone())?;
    let framed = aead_open(key, &entry.sealed, digest.as_bytes()).map_err(|_| fail.clone())?;
    let (value, salt) = split_opening(&framed).ok_or(fail.clone())?;
    if !verify_opening(digest, value, salt) {
        return Err(fail);
    }
    Ok(DisclosedClaim {
        credential: pick.credential,
        claim: pick.claim.clone(),
        value: value.to_vec(),
        salt: salt.to_vec(),
        digest: *digest,
    })
}

/// One request/response round for the whole selection.
///
/// The presentation must already have passed
/// [`validate_presentation`](crate::presentation::validate_presentation).
pub fn verifier_disclose_batch<E: OprfEvaluator, R: RngCore + CryptoRng>(
    vp: &VerifiablePresentation,
    d_vp: &PresentationData,
    selection: &DisclosureSelection,
    quota: u32,
    evaluator: &mut E,
    rng: &mut R,
    exec: Execution,
) -> Result<Vec<DisclosedClaim>, DisclosureError> {
    if selection.len() > quota as usize {
        return Err(DisclosureError::QuotaExceeded);
    }
    if selection.is_empty() {
        return Ok(Vec::new());
    }
    let round = prepare_round(vp, selection.picks(), rng, exec)?;
    let response = evaluator.evaluate(round.request())?;
    let keys = complete_round(round, &response, exec)?;
    exec.try_map(&keys, |(pick, x, key)| open_claim(d_vp, pick, x, key))
}

/// Up to `quota` rounds of one claim each. `picker` sees every claim
/// disclosed so far and returns the next pick, or `None` to stop.
///
/// The first failed claim aborts the session: no further request is sent.
pub fn verifier_disclose_adaptive<E, R, P>(
    vp: &VerifiablePresentation,
    d_vp: &PresentationData,
    mut picker: P,
    quota: u32,
    evaluator: &mut E,
    rng: &mut R,
) -> Result<Vec<DisclosedClaim>, DisclosureError>
where
    E: OprfEvaluator,
    R: RngCore + CryptoRng,
    P: FnMut(&[DisclosedClaim]) -> Option<Pick>,
{
    let mut disclosed: Vec<DisclosedClaim> = Vec::new();
    let mut seen = HashSet::new();
    while let Some(pick) = picker(&disclosed) {
        if disclosed.len() >= quota as usize {
            return Err(DisclosureError::QuotaExceeded);
        }
        if !seen.insert(pick.clone()) {
            return Err(DisclosureError::InvalidSelection);
        }
        let round = prepare_round(vp, std::slice::from_ref(&pick), rng, Execution::Sequential)?;
        let response = evaluator.evaluate(round.request())?;
        let keys = complete_round(round, &response, Execution::Sequential)?;
        let (pick, x, key) = &keys[0];
        disclosed.push(open_claim(d_vp, pick, x, key)?);
    }
    Ok(disclosed)
}

/// Picker that replays a fixed list.
pub fn scripted_picker(picks: Vec<Pick>) -> impl FnMut(&[DisclosedClaim]) -> Option<Pick> {
    let mut it = picks.into_iter();
    move |_| it.next()
}
