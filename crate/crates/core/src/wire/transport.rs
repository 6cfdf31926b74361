//! Byte links (in-process loopback and TCP) and the frame channel on top.
//!
//! Endpoints are `loop:<name>` or `tcp:<host>:<port>`.

use std::collections::{HashMap, VecDeque};
use std::io::{ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use super::frame::{decode_frame, encode_frame, Frame, DEFAULT_MAX_BODY, FRAME_HEADER_LEN};
use super::WireError;

/// Ordered, reliable delivery of whole messages.
pub trait ByteLink: Send {
    fn send(&mut self, msg: Vec<u8>) -> Result<(), WireError>;
    fn recv(&mut self, timeout: Option<Duration>) -> Result<Vec<u8>, WireError>;
}

impl<L: ByteLink + ?Sized> ByteLink for Box<L> {
    fn send(&mut self, msg: Vec<u8>) -> Result<(), WireError> {
        (**self).send(msg)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Vec<u8>, WireError> {
        (**self).recv(timeout)
    }
}

#[derive(Debug)]
pub struct LoopLink {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

pub fn loopback_pair() -> (LoopLink, LoopLink) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    (
        LoopLink { tx: a_tx, rx: a_rx },
        LoopLink { tx: b_tx, rx: b_rx },
    )
}

impl ByteLink for LoopLink {
    fn send(&mut self, msg: Vec<u8>) -> Result<(), WireError> {
        self.tx.send(msg).map_err(|_| WireError::Closed)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Vec<u8>, WireError> {
        match timeout {
            None => self.rx.recv().map_err(|_| WireError::Closed),
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => WireError::Timeout,
                RecvTimeoutError::Disconnected => WireError::Closed,
            }),
        }
    }
}

/// TCP stream carrying `len:u32 ‖ message` records.
#[derive(Debug)]
pub struct TcpLink {
    stream: TcpStream,
    max_record: usize,
}

impl TcpLink {
    pub fn new(stream: TcpStream, max_record: usize) -> Self {
        let _ = stream.set_nodelay(true);
        Self { stream, max_record }
    }
}

fn io_err(e: std::io::Error) -> WireError {
    match e.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => WireError::Timeout,
        ErrorKind::UnexpectedEof | ErrorKind::ConnectionReset | ErrorKind::BrokenPipe => {
            WireError::Closed
        }
        _ => WireError::Transport(e.kind().to_string()),
    }
}

impl ByteLink for TcpLink {
    fn send(&mut self, msg: Vec<u8>) -> Result<(), WireError> {
        let len = u32::try_from(msg.len()).map_err(|_| WireError::BodyTooLarge)?;
        let mut record = Vec::with_capacity(4 + msg.len());
        record.extend_from_slice(&len.to_be_bytes());
        record.extend_from_slice(&msg);
        self.stream.write_all(&record).map_err(io_err)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Vec<u8>, WireError> {
        self.stream.set_read_timeout(timeout).map_err(io_err)?;
        let mut len = [0u8; 4];
        self.stream.read_exact(&mut len).map_err(io_err)?;
        let len = u32::from_be_bytes(len) as usize;
        if len > self.max_record {
            return Err(WireError::BodyTooLarge);
        }
        let mut buf = vec![0u8; len];
        self.stream.read_exact(&mut buf).map_err(io_err)?;
        Ok(buf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Outbound,
    Inbound,
}

type Hook = Box<dyn FnMut(Direction, Vec<u8>) -> Vec<Vec<u8>> + Send>;

/// Man-in-the-middle wrapper: every message in either direction passes
/// through `hook`, which may rewrite, drop, or inject messages.
pub struct InterceptLink<L> {
    inner: L,
    hook: Hook,
    pending: VecDeque<Vec<u8>>,
}

impl<L: ByteLink> InterceptLink<L> {
    pub fn new(
        inner: L,
        hook: impl FnMut(Direction, Vec<u8>) -> Vec<Vec<u8>> + Send + 'static,
    ) -> Self {
        Self {
            inner,
            hook: Box::new(hook),
            pending: VecDeque::new(),
        }
    }
}

impl<L: ByteLink> ByteLink for InterceptLink<L> {
    fn send(&mut self, msg: Vec<u8>) -> Result<(), WireError> {
        for m in (self.hook)(Direction::Outbound, msg) {
            self.inner.send(m)?;
        }
        Ok(())
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Vec<u8>, WireError> {
        loop {
            if let Some(m) = self.pending.pop_front() {
                return Ok(m);
            }
            let msg = self.inner.recv(timeout)?;
            self.pending.extend((self.hook)(Direction::Inbound, msg));
        }
    }
}

/// Frame-level channel with a body limit and a receive deadline.
pub struct Channel {
    link: Box<dyn ByteLink>,
    max_body: usize,
    timeout: Option<Duration>,
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel")
            .field("max_body", &self.max_body)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl Channel {
    pub fn new(link: impl ByteLink + 'static) -> Self {
        Self {
            link: Box::new(link),
            max_body: DEFAULT_MAX_BODY,
            timeout: Some(Duration::from_secs(30)),
        }
    }

    pub fn with_max_body(mut self, max_body: usize) -> Self {
        self.max_body = max_body;
        self
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn max_body(&self) -> usize {
        self.max_body
    }

    pub fn send_frame(&mut self, frame: &Frame) -> Result<(), WireError> {
        let bytes = encode_frame(frame, self.max_body)?;
        self.link.send(bytes)
    }

    pub fn recv_frame(&mut self) -> Result<Frame, WireError> {
        let bytes = self.link.recv(self.timeout)?;
        decode_frame(&bytes, self.max_body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Loop(String),
    Tcp(String),
}

impl Endpoint {
    pub fn parse(s: &str) -> Result<Self, WireError> {
        let bad = || WireError::Endpoint(s.to_owned());
        if let Some(name) = s.strip_prefix("loop:") {
            if name.is_empty() {
                return Err(bad());
            }
            return Ok(Endpoint::Loop(name.to_owned()));
        }
        if let Some(addr) = s.strip_prefix("tcp:") {
            let (host, port) = addr.rsplit_once(':').ok_or_else(bad)?;
            if host.is_empty() || port.parse::<u16>().is_err() {
                return Err(bad());
            }
            return Ok(Endpoint::Tcp(addr.to_owned()));
        }
        Err(bad())
    }
}

fn loop_registry() -> &'static Mutex<HashMap<String, Sender<LoopLink>>> {
    static REGISTRY: OnceLock<Mutex<HashMap<String, Sender<LoopLink>>>> = OnceLock::new();
    REGISTRY.get_or_init(Default::default)
}

fn max_record() -> usize {
    DEFAULT_MAX_BODY + FRAME_HEADER_LEN + u16::MAX as usize
}

/// Server side of an endpoint.
pub enum Listener {
    Loop {
        name: String,
        incoming: Receiver<LoopLink>,
    },
    Tcp(TcpListener),
}

impl std::fmt::Debug for Listener {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Listener::Loop { name, .. } => write!(f, "Listener(loop:{name})"),
            Listener::Tcp(l) => write!(f, "Listener({:?})", l.local_addr().ok()),
        }
    }
}

impl Listener {
    pub fn bind(endpoint: &Endpoint) -> Result<Self, WireError> {
        match endpoint {
            Endpoint::Loop(name) => {
                let (tx, rx) = mpsc::channel();
                let mut reg = loop_registry().lock().expect("registry lock");
                if reg.contains_key(name) {
                    return Err(WireError::Endpoint(format!("loop:{name} already bound")));
                }
                reg.insert(name.clone(), tx);
                Ok(Listener::Loop {
                    name: name.clone(),
                    incoming: rx,
                })
            }
            Endpoint::Tcp(addr) => TcpListener::bind(addr).map(Listener::Tcp).map_err(io_err),
        }
    }

    /// The actual endpoint, with the OS-assigned port for `tcp:host:0`.
    pub fn local_endpoint(&self) -> Endpoint {
        match self {
            Listener::Loop { name, .. } => Endpoint::Loop(name.clone()),
            Listener::Tcp(l) => {
                Endpoint::Tcp(l.local_addr().map(|a| a.to_string()).unwrap_or_default())
            }
        }
    }

    pub fn accept(&self) -> Result<Channel, WireError> {
        match self {
            Listener::Loop { incoming, .. } => incoming
                .recv()
                .map(Channel::new)
                .map_err(|_| WireError::Closed),
            Listener::Tcp(l) => {
                let (stream, _) = l.accept().map_err(io_err)?;
                Ok(Channel::new(TcpLink::new(stream, max_record())))
            }
        }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        if let Listener::Loop { name, .. } = self {
            if let Ok(mut reg) = loop_registry().lock() {
                reg.remove(name);
            }
        }
    }
}

pub fn connect(endpoint: &Endpoint) -> Result<Channel, WireError> {
    match endpoint {
        Endpoint::Loop(name) => {
            let reg = loop_registry().lock().expect("registry lock");
            let listener = reg.get(name).ok_or(WireError::Closed)?;
            let (mine, theirs) = loopback_pair();
            listener.send(theirs).map_err(|_| WireError::Closed)?;
            Ok(Channel::new(mine))
        }
        Endpoint::Tcp(addr) => {
            let stream = TcpStream::connect(addr).map_err(io_err)?;
            Ok(Channel::new(TcpLink::new(stream, max_record())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::FrameKind;

    fn hello(i: u8) -> Frame {
        Frame::new(FrameKind::Hello, &[], vec![i])
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!(
            Endpoint::parse("loop:a").unwrap(),
            Endpoint::Loop("a".into())
        );
        assert_eq!(
            Endpoint::parse("tcp:127.0.0.1:80").unwrap(),
            Endpoint::Tcp("127.0.0.1:80".into())
        );
        for bad in ["loop:", "tcp:host", "tcp::1", "tcp:h:notaport", "udp:x"] {
            assert!(Endpoint::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn loopback_delivers_in_order() {
        let ep = Endpoint::Loop("transport-order".into());
        let listener = Listener::bind(&ep).unwrap();
        let mut client = connect(&ep).unwrap();
        let mut server = listener.accept().unwrap();
        for i in 0..50 {
            client.send_frame(&hello(i)).unwrap();
        }
        for i in 0..50 {
            assert_eq!(server.recv_frame().unwrap(), hello(i));
        }
        server.send_frame(&hello(9)).unwrap();
        assert_eq!(client.recv_frame().unwrap(), hello(9));
    }

    #[test]
    fn loop_name_cannot_be_bound_twice() {
        let ep = Endpoint::Loop("transport-dup".into());
        let _l = Listener::bind(&ep).unwrap();
        assert!(Listener::bind(&ep).is_err());
    }

    #[test]
    fn tcp_delivers_in_order() {
        let listener = Listener::bind(&Endpoint::Tcp("127.0.0.1:0".into())).unwrap();
        let ep = listener.local_endpoint();
        let t = std::thread::spawn(move || {
            let mut server = listener.accept().unwrap();
            (0..20)
                .map(|_| server.recv_frame().unwrap())
                .collect::<Vec<_>>()
        });
        let mut client = connect(&ep).unwrap();
        for i in 0..20 {
            client.send_frame(&hello(i)).unwrap();
        }
        assert_eq!(t.join().unwrap(), (0..20).map(hello).collect::<Vec<_>>());
    }

    #[test]
    fn receive_deadline() {
        let (a, _b) = loopback_pair();
        let mut ch = Channel::new(a).with_timeout(Some(Duration::from_millis(10)));
        assert_eq!(ch.recv_frame().unwrap_err(), WireError::Timeout);
    }

    #[test]
    fn intercept_can_inject_and_rewrite() {
        let (a, b) = loopback_pair();
        let link = InterceptLink::new(a, |dir, mut m| match dir {
            Direction::Outbound => {
                let last = m.len() - 1;
                m[last] ^= 0xff;
                vec![m]
            }
            Direction::Inbound => vec![m.clone(), m],
        });
        let mut ch = Channel::new(link);
        let mut other = Channel::new(b);
        ch.send_frame(&hello(1)).unwrap();
        assert_eq!(other.recv_frame().unwrap(), hello(0xfe));
        other.send_frame(&hello(3)).unwrap();
        assert_eq!(ch.recv_frame().unwrap(), hello(3));
        assert_eq!(ch.recv_frame().unwrap(), hello(3));
    }
}
