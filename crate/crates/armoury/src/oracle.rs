//! The oracle part over real channels: a frame loop generic in the stream,
//! the three transports, and the client side.

use std::ffi::CString;
use std::fs::{File, OpenOptions};
use std::io::{self, ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::os::unix::ffi::OsStrExt;
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread;

use armoury_core::mutation::PoolSet;
use armoury_core::packer::DecodeOracle;
use armoury_core::wire::{OracleState, WireFrame, FRAME_LEN};
use armoury_core::{Chunk, CipherKey, CipherSpec};
use thiserror::Error;

/// Answers frames until the peer closes the stream. A trailing partial
/// frame also ends the session. Returns the number of frames answered.
pub fn serve<S: Read + Write>(stream: &mut S, state: &mut OracleState) -> io::Result<u64> {
    let mut frames = 0;
    let mut buf = [0u8; FRAME_LEN];
    loop {
        match stream.read_exact(&mut buf) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(frames),
            Err(e) => return Err(e),
        }
        let reply = state.respond(WireFrame::decode(&buf));
        stream.write_all(&reply.encode())?;
        stream.flush()?;
        frames += 1;
    }
}

/// Spec and pools shared by every connection of one server.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub spec: CipherSpec,
    pub pools: Arc<PoolSet>,
    pub seed: u64,
}

impl OracleConfig {
    pub fn new(spec: CipherSpec, pools: PoolSet, seed: u64) -> Self {
        OracleConfig { spec, pools: Arc::new(pools), seed }
    }

    /// Fresh state for connection number `n`; each connection draws its
    /// MUTATE answers from its own stream.
    pub fn state(&self, n: u64) -> OracleState {
        let seed = self.seed ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        OracleState::new(self.spec, (*self.pools).clone(), seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Loopback,
    Pipe,
    Socket,
}

impl std::str::FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "loopback" => Ok(Transport::Loopback),
            "pipe" => Ok(Transport::Pipe),
            "socket" => Ok(Transport::Socket),
            _ => Err(format!("unknown transport {s:?} (loopback, pipe, socket)")),
        }
    }
}

/// One end of an in-process duplex channel.
pub struct LoopbackEnd {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
}

pub fn loopback_pair() -> (LoopbackEnd, LoopbackEnd) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    (
        LoopbackEnd { tx: tx_a, rx: rx_a, pending: Vec::new() },
        LoopbackEnd { tx: tx_b, rx: rx_b, pending: Vec::new() },
    )
}

impl Read for LoopbackEnd {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pending.is_empty() {
            match self.rx.recv() {
                Ok(bytes) => self.pending = bytes,
                Err(_) => return Ok(0),
            }
        }
        let n = buf.len().min(self.pending.len());
        buf[..n].copy_from_slice(&self.pending[..n]);
        self.pending.drain(..n);
        Ok(n)
    }
}

impl Write for LoopbackEnd {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx.send(buf.to_vec()).map_err(|_| io::Error::from(ErrorKind::BrokenPipe))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Starts an in-process oracle thread and returns the client end.
pub fn spawn_loopback(config: &OracleConfig) -> LoopbackEnd {
    let (client, mut server) = loopback_pair();
    let mut state = config.state(0);
    thread::spawn(move || serve(&mut server, &mut state));
    client
}

/// Request and response FIFOs for `addr`.
pub fn fifo_paths(addr: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut p = addr.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    (with(".req"), with(".resp"))
}

fn mkfifo(path: &Path) -> io::Result<()> {
    let c = CString::new(path.as_os_str().as_bytes()).map_err(|_| io::Error::from(ErrorKind::InvalidInput))?;
    // SAFETY: `c` is a valid NUL-terminated path for the duration of the call
    if unsafe { libc::mkfifo(c.as_ptr(), 0o600) } == 0 {
        return Ok(());
    }
    let err = io::Error::last_os_error();
    if err.kind() == ErrorKind::AlreadyExists {
        Ok(())
    } else {
        Err(err)
    }
}

/// Creates the FIFO pair for `addr` if missing.
pub fn create_fifos(addr: &Path) -> io::Result<()> {
    let (req, resp) = fifo_paths(addr);
    mkfifo(&req)?;
    mkfifo(&resp)
}

/// A FIFO pair seen from one side.
pub struct FifoDuplex {
    reader: File,
    writer: File,
}

impl FifoDuplex {
    /// Server side; blocks until a client opens both ends.
    pub fn accept(addr: &Path) -> io::Result<Self> {
        let (req, resp) = fifo_paths(addr);
        let reader = File::open(req)?;
        let writer = OpenOptions::new().write(true).open(resp)?;
        Ok(FifoDuplex { reader, writer })
    }

    /// Client side; open order mirrors [`FifoDuplex::accept`].
    pub fn connect(addr: &Path) -> io::Result<Self> {
        let (req, resp) = fifo_paths(addr);
        let writer = OpenOptions::new().write(true).open(req)?;
        let reader = File::open(resp)?;
        Ok(FifoDuplex { reader, writer })
    }
}

impl Read for FifoDuplex {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.reader.read(buf)
    }
}

impl Write for FifoDuplex {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.writer.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

/// Serves FIFO sessions one after another; `sessions` limits how many.
pub fn serve_pipe(addr: &Path, config: &OracleConfig, sessions: Option<u64>) -> io::Result<()> {
    create_fifos(addr)?;
    let mut n = 0;
    while sessions.is_none_or(|max| n < max) {
        let mut duplex = FifoDuplex::accept(addr)?;
        serve(&mut duplex, &mut config.state(n))?;
        n += 1;
    }
    Ok(())
}

/// A bare port number means TCP on 127.0.0.1, anything else a Unix
/// socket path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SocketAddr {
    Tcp(u16),
    Unix(PathBuf),
}

impl SocketAddr {
    pub fn parse(addr: &str) -> Self {
        match addr.parse() {
            Ok(port) => SocketAddr::Tcp(port),
            Err(_) => SocketAddr::Unix(addr.into()),
        }
    }
}

pub enum SocketListener {
    Tcp(TcpListener),
    Unix(UnixListener),
}

impl SocketListener {
    /// Binds `addr`, replacing a stale socket file.
    pub fn bind(addr: &SocketAddr) -> io::Result<Self> {
        match addr {
            SocketAddr::Tcp(port) => Ok(SocketListener::Tcp(TcpListener::bind(("127.0.0.1", *port))?)),
            SocketAddr::Unix(path) => {
                if path.exists() {
                    std::fs::remove_file(path)?;
                }
                Ok(SocketListener::Unix(UnixListener::bind(path)?))
            }
        }
    }

    /// The bound port, for TCP listeners opened on port 0.
    pub fn port(&self) -> Option<u16> {
        match self {
            SocketListener::Tcp(l) => l.local_addr().ok().map(|a| a.port()),
            SocketListener::Unix(_) => None,
        }
    }

    /// Accepts connections, one worker thread each; `connections` limits
    /// how many are accepted. Waits for the workers before returning.
    pub fn serve(&self, config: &OracleConfig, connections: Option<u64>) -> io::Result<()> {
        let mut workers = Vec::new();
        let mut n = 0;
        while connections.is_none_or(|max| n < max) {
            let mut state = config.state(n);
            let worker = match self {
                SocketListener::Tcp(l) => {
                    let (mut s, _) = l.accept()?;
                    s.set_nodelay(true)?;
                    thread::spawn(move || serve(&mut s, &mut state))
                }
                SocketListener::Unix(l) => {
                    let (mut s, _) = l.accept()?;
                    thread::spawn(move || serve(&mut s, &mut state))
                }
            };
            workers.push(worker);
            n += 1;
        }
        for w in workers {
            w.join().map_err(|_| io::Error::other("oracle worker panicked"))??;
        }
        Ok(())
    }
}

/// Client-side byte stream of any transport.
pub trait Channel: Read + Write + Send {}
impl<T: Read + Write + Send> Channel for T {}

pub fn connect_socket(addr: &SocketAddr) -> io::Result<Box<dyn Channel>> {
    Ok(match addr {
        SocketAddr::Tcp(port) => {
            let s = TcpStream::connect(("127.0.0.1", *port))?;
            s.set_nodelay(true)?;
            Box::new(s)
        }
        SocketAddr::Unix(path) => Box::new(UnixStream::connect(path)?),
    })
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("oracle channel closed")]
    ChannelClosed,
    #[error("oracle answered with error reason 0x{0:02X}")]
    Remote(u8),
    #[error("unexpected response {0:?}")]
    Unexpected(WireFrame),
    #[error("oracle channel: {0}")]
    Io(io::Error),
}

impl From<io::Error> for ClientError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            ErrorKind::UnexpectedEof | ErrorKind::BrokenPipe | ErrorKind::ConnectionReset => {
                ClientError::ChannelClosed
            }
            _ => ClientError::Io(e),
        }
    }
}

/// The client part: sends keys, gets chunks back.
pub struct OracleClient<S> {
    stream: S,
}

impl<S: Read + Write> OracleClient<S> {
    pub fn new(stream: S) -> Self {
        OracleClient { stream }
    }

    /// One request, one response.
    pub fn exchange(&mut self, request: WireFrame) -> Result<WireFrame, ClientError> {
        self.stream.write_all(&request.encode())?;
        self.stream.flush()?;
        let mut buf = [0u8; FRAME_LEN];
        self.stream.read_exact(&mut buf)?;
        Ok(WireFrame::decode(&buf))
    }

    pub fn decode(&mut self, key: CipherKey) -> Result<Chunk, ClientError> {
        match self.exchange(WireFrame::Decode(key.0))? {
            WireFrame::DecodeOk(c) => Ok(Chunk(c)),
            WireFrame::Error(reason) => Err(ClientError::Remote(reason)),
            other => Err(ClientError::Unexpected(other)),
        }
    }

    pub fn mutate(&mut self, pool_index: u32) -> Result<CipherKey, ClientError> {
        match self.exchange(WireFrame::Mutate(pool_index))? {
            WireFrame::MutateOk(k) => Ok(CipherKey(k)),
            WireFrame::Error(reason) => Err(ClientError::Remote(reason)),
            other => Err(ClientError::Unexpected(other)),
        }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

impl<S: Read + Write> DecodeOracle for OracleClient<S> {
    type Error = ClientError;

    fn decode(&mut self, key: CipherKey) -> Result<Chunk, ClientError> {
        OracleClient::decode(self, key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use armoury_core::keysearch::KeyPool;
    use armoury_core::sco;

    fn config() -> OracleConfig {
        let spec = CipherSpec::scaled_579();
        let target = sco(CipherKey(0x1_0F0F), &spec);
        let pools = PoolSet::new(vec![
            armoury_core::brute_force_keys(target, &spec).unwrap(),
            KeyPool::new(Chunk(0), spec.id(), vec![CipherKey(1)]),
        ])
        .unwrap();
        OracleConfig::new(spec, pools, 5)
    }

    #[test]
    fn loopback_decode_and_mutate() {
        let cfg = config();
        let mut client = OracleClient::new(spawn_loopback(&cfg));
        for k in [0u64, 1, 0x1_2345, 0x1F_FFFF] {
            assert_eq!(client.decode(CipherKey(k)).unwrap(), sco(CipherKey(k), &cfg.spec));
        }
        assert_eq!(client.mutate(1).unwrap(), CipherKey(1));
        let k = client.mutate(0).unwrap();
        assert_eq!(sco(k, &cfg.spec), cfg.pools.get(0).unwrap().target);
        assert!(matches!(client.mutate(999), Err(ClientError::Remote(0x02))));
    }

    #[test]
    fn closed_channel() {
        let (client_end, server_end) = loopback_pair();
        drop(server_end);
        let mut client = OracleClient::new(client_end);
        assert!(matches!(client.decode(CipherKey(1)), Err(ClientError::ChannelClosed)));
    }

    #[test]
    fn partial_frame_ends_session() {
        let mut state = config().state(0);
        let mut io = Cursor2 { input: io::Cursor::new(vec![0x01; 13]), output: Vec::new() };
        assert_eq!(serve(&mut io, &mut state).unwrap(), 1);
        assert_eq!(io.output.len(), FRAME_LEN);
    }

    struct Cursor2 {
        input: io::Cursor<Vec<u8>>,
        output: Vec<u8>,
    }

    impl Read for Cursor2 {
        fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
            self.input.read(buf)
        }
    }

    impl Write for Cursor2 {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            self.output.write(buf)
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn addresses() {
        assert_eq!(SocketAddr::parse("4000"), SocketAddr::Tcp(4000));
        assert_eq!(SocketAddr::parse("/tmp/x.sock"), SocketAddr::Unix("/tmp/x.sock".into()));
        assert_eq!("pipe".parse::<Transport>(), Ok(Transport::Pipe));
        assert!("shm".parse::<Transport>().is_err());
    }
}
