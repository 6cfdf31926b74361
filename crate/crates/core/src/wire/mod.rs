//! Canonical frames and the transports that carry them.

mod frame;
mod handshake;
mod protocol;
mod transport;

pub use frame::{
    decode_frame, encode_frame, AuthBody, ElementsBody, ErrorBody, ErrorCode, Frame, FrameKind,
    HelloBody, OfferBody, DEFAULT_MAX_BODY, FRAME_HEADER_LEN, WIRE_VERSION,
};
pub use handshake::{handshake_initiator, handshake_responder, Authenticated};
pub use protocol::{
    run_verifier, serve_connection, DisclosureMode, Picker, ProtocolError, ServeReport,
    VerifierConnection, WireEvaluator, SHORT_TIMEOUT,
};
pub use transport::{
    connect, loopback_pair, ByteLink, Channel, Direction, Endpoint, InterceptLink, Listener,
    LoopLink, TcpLink,
};

use thiserror::Error;

use crate::encoding::DecodeError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    /// Truncated and corrupt input are told apart only inside `DecodeError`.
    #[error("malformed frame")]
    Decode(DecodeError),
    #[error("frame body too large")]
    BodyTooLarge,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("timed out waiting for peer")]
    Timeout,
    #[error("connection closed")]
    Closed,
    #[error("handshake failed")]
    HandshakeFailure,
    #[error("peer reported error ({0:?})")]
    Remote(ErrorCode),
    #[error("unexpected frame")]
    Unexpected,
    #[error("invalid endpoint {0:?}")]
    Endpoint(String),
}

impl From<DecodeError> for WireError {
    fn from(e: DecodeError) -> Self {
        WireError::Decode(e)
    }
}
