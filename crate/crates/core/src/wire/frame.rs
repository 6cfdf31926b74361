//! Frame layout (all integers big-endian):
//!
//! ```text
//! version:u8 ‖ kind:u8 ‖ sid_len:u16 ‖ session_id ‖ body_len:u32 ‖ body
//! ```
//!
//! `session_id` is empty on `Offer`, `Hello` and `Auth`, 32 bytes on
//! `OprfRequest`, `OprfResponse` and `Close`, and either on `Error`.

use crate::crypto::{GroupElement, ELEMENT_LEN};
use crate::disclosure::SESSION_ID_LEN;
use crate::encoding::{DecodeError, Reader, Writer};
use crate::keys::SIGNATURE_LEN;
use crate::presentation::NONCE_LEN;

use super::WireError;

pub const WIRE_VERSION: u8 = 1;
pub const DEFAULT_MAX_BODY: usize = 16 * 1024 * 1024;
/// Fixed bytes around the session id and body.
pub const FRAME_HEADER_LEN: usize = 1 + 1 + 2 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameKind {
    Offer = 1,
    OprfRequest = 2,
    OprfResponse = 3,
    Error = 4,
    Close = 5,
    Hello = 6,
    Auth = 7,
}

impl FrameKind {
    fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => Self::Offer,
            2 => Self::OprfRequest,
            3 => Self::OprfResponse,
            4 => Self::Error,
            5 => Self::Close,
            6 => Self::Hello,
            7 => Self::Auth,
            _ => return None,
        })
    }

    fn session_id_ok(self, len: usize) -> bool {
        match self {
            Self::Offer | Self::Hello | Self::Auth => len == 0,
            Self::OprfRequest | Self::OprfResponse | Self::Close => len == SESSION_ID_LEN,
            Self::Error => len == 0 || len == SESSION_ID_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub version: u8,
    pub kind: FrameKind,
    pub session_id: Vec<u8>,
    pub body: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameKind, session_id: &[u8], body: Vec<u8>) -> Self {
        Self {
            version: WIRE_VERSION,
            kind,
            session_id: session_id.to_vec(),
            body,
        }
    }
}

pub fn encode_frame(frame: &Frame, max_body: usize) -> Result<Vec<u8>, WireError> {
    if frame.body.len() > max_body || frame.body.len() > u32::MAX as usize {
        return Err(WireError::BodyTooLarge);
    }
    let mut w = Writer::new();
    w.put_u8(frame.version)
        .put_u8(frame.kind as u8)
        .put_u16(frame.session_id.len() as u16)
        .put_fixed(&frame.session_id)
        .put_bytes(&frame.body);
    Ok(w.into_bytes())
}

/// Total: every input yields a frame or an error, never a panic.
pub fn decode_frame(bytes: &[u8], max_body: usize) -> Result<Frame, WireError> {
    let mut r = Reader::new(bytes);
    let version = r.get_u8()?;
    if version != WIRE_VERSION {
        return Err(DecodeError::corrupt(0).into());
    }
    let kind = FrameKind::from_u8(r.get_u8()?).ok_or(DecodeError::corrupt(1))?;
    let sid_len = r.get_u16()? as usize;
    if !kind.session_id_ok(sid_len) {
        return Err(DecodeError::corrupt(2).into());
    }
    let session_id = r.take(sid_len)?.to_vec();
    let at = r.position();
    let body_len = r.get_u32()? as usize;
    if body_len > max_body {
        return Err(WireError::BodyTooLarge);
    }
    if body_len > r.remaining() {
        return Err(DecodeError::truncated(at).into());
    }
    let body = r.take(body_len)?.to_vec();
    r.finish()?;
    Ok(Frame {
        version,
        kind,
        session_id,
        body,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfferBody {
    pub vp: Vec<u8>,
    pub d_vp: Vec<u8>,
    pub quota: u32,
    pub fresh_nonce: [u8; NONCE_LEN],
}

impl OfferBody {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_bytes(&self.vp)
            .put_bytes(&self.d_vp)
            .put_u32(self.quota)
            .put_fixed(&self.fresh_nonce);
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let vp = r.get_bytes()?.to_vec();
        let d_vp = r.get_bytes()?.to_vec();
        let quota = r.get_u32()?;
        let fresh_nonce = r.get_array()?;
        r.finish()?;
        Ok(Self {
            vp,
            d_vp,
            quota,
            fresh_nonce,
        })
    }
}

/// `count:u32 ‖ (len:u8 ‖ element)*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementsBody {
    pub elements: Vec<GroupElement>,
}

impl ElementsBody {
    pub const PER_ELEMENT_LEN: usize = 1 + ELEMENT_LEN;
    pub const FRAMING_LEN: usize = 4;

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u32(self.elements.len() as u32);
        for e in &self.elements {
            w.put_u8(ELEMENT_LEN as u8).put_fixed(&e.to_bytes());
        }
        w.into_bytes()
    }

    /// Rejects empty lists and any element that fails validation.
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let n = r.get_count(Self::PER_ELEMENT_LEN)?;
        if n == 0 {
            return Err(DecodeError::corrupt(0));
        }
        let mut elements = Vec::with_capacity(n);
        for _ in 0..n {
            let at = r.position();
            let len = r.get_u8()? as usize;
            let raw = r.take(len)?;
            elements.push(GroupElement::from_bytes(raw).map_err(|_| DecodeError::corrupt(at))?);
        }
        r.finish()?;
        Ok(Self { elements })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    Protocol = 1,
    QuotaExceeded = 2,
    Handshake = 3,
    SessionClosed = 4,
    /// Verifier gave up after a claim failed to open.
    Aborted = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorBody {
    pub code: ErrorCode,
}

impl ErrorBody {
    pub fn encode(&self) -> Vec<u8> {
        vec![self.code as u8]
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let code = match bytes {
            [1] => ErrorCode::Protocol,
            [2] => ErrorCode::QuotaExceeded,
            [3] => ErrorCode::Handshake,
            [4] => ErrorCode::SessionClosed,
            [5] => ErrorCode::Aborted,
            _ => return Err(DecodeError::corrupt(0)),
        };
        Ok(Self { code })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloBody {
    pub party_id: String,
    pub nonce: [u8; NONCE_LEN],
}

impl HelloBody {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_str(&self.party_id).put_fixed(&self.nonce);
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let party_id = r.get_string()?;
        let nonce = r.get_array()?;
        r.finish()?;
        Ok(Self { party_id, nonce })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthBody {
    pub signature: [u8; SIGNATURE_LEN],
}

impl AuthBody {
    pub fn encode(&self) -> Vec<u8> {
        self.signature.to_vec()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let signature = bytes.try_into().map_err(|_| DecodeError::corrupt(0))?;
        Ok(Self { signature })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{PrimeOrderGroup, Scalar, Secp256k1};
    use proptest::prelude::*;

    fn kind_strategy() -> impl Strategy<Value = FrameKind> {
        prop_oneof![
            Just(FrameKind::Offer),
            Just(FrameKind::OprfRequest),
            Just(FrameKind::OprfResponse),
            Just(FrameKind::Error),
            Just(FrameKind::Close),
            Just(FrameKind::Hello),
            Just(FrameKind::Auth),
        ]
    }

    fn frame_strategy() -> impl Strategy<Value = Frame> {
        (
            kind_strategy(),
            any::<[u8; 32]>(),
            proptest::collection::vec(any::<u8>(), 0..300),
        )
            .prop_map(|(kind, sid, body)| {
                let sid = if kind.session_id_ok(0) {
                    vec![]
                } else {
                    sid.to_vec()
                };
                Frame::new(kind, &sid, body)
            })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(frame in frame_strategy()) {
            let bytes = encode_frame(&frame, DEFAULT_MAX_BODY).unwrap();
            prop_assert_eq!(decode_frame(&bytes, DEFAULT_MAX_BODY).unwrap(), frame);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = decode_frame(&bytes, DEFAULT_MAX_BODY);
        }
    }

    #[test]
    fn unknown_kind_and_version_rejected() {
        let mut bytes = encode_frame(&Frame::new(FrameKind::Hello, &[], vec![1]), 64).unwrap();
        bytes[1] = 99;
        assert!(matches!(
            decode_frame(&bytes, 64),
            Err(WireError::Decode(_))
        ));
        bytes[1] = FrameKind::Hello as u8;
        bytes[0] = 2;
        assert!(matches!(
            decode_frame(&bytes, 64),
            Err(WireError::Decode(_))
        ));
    }

    #[test]
    fn session_id_presence_enforced() {
        let f = Frame::new(FrameKind::OprfRequest, &[], vec![]);
        let bytes = encode_frame(&f, 64).unwrap();
        assert!(decode_frame(&bytes, 64).is_err());
        let f = Frame::new(FrameKind::Offer, &[0; 32], vec![]);
        assert!(decode_frame(&encode_frame(&f, 64).unwrap(), 64).is_err());
    }

    #[test]
    fn body_limit() {
        let f = Frame::new(FrameKind::Hello, &[], vec![0; 65]);
        assert_eq!(encode_frame(&f, 64).unwrap_err(), WireError::BodyTooLarge);
        let bytes = encode_frame(&f, 128).unwrap();
        assert_eq!(
            decode_frame(&bytes, 64).unwrap_err(),
            WireError::BodyTooLarge
        );
    }

    #[test]
    fn every_truncation_is_an_error() {
        let f = Frame::new(FrameKind::OprfResponse, &[7; 32], vec![1, 2, 3, 4, 5]);
        let bytes = encode_frame(&f, 64).unwrap();
        for cut in 0..bytes.len() {
            assert!(decode_frame(&bytes[..cut], 64).is_err(), "cut {cut}");
        }
    }

    #[test]
    fn element_body_size_is_linear() {
        let g = GroupElement::generator();
        for n in [1usize, 5, 64] {
            let body = ElementsBody {
                elements: vec![g; n],
            }
            .encode();
            assert_eq!(body.len(), 4 + 34 * n);
            assert_eq!(ElementsBody::decode(&body).unwrap().elements.len(), n);
        }
    }

    #[test]
    fn element_body_rejects_invalid_points_and_empty() {
        assert!(ElementsBody::decode(&[0, 0, 0, 0]).is_err());
        let s = Scalar::from_u64(5).unwrap();
        let mut body = ElementsBody {
            elements: vec![Secp256k1::exp(&GroupElement::generator(), &s)],
        }
        .encode();
        body[5] = 0x07;
        assert!(ElementsBody::decode(&body).is_err());
    }
}
