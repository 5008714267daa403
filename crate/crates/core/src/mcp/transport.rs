//! Newline-delimited line transports.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};

/// A bidirectional channel of text lines. Lines never contain `\n`.
pub trait Transport: Send {
    fn send_line(&mut self, line: &str) -> io::Result<()>;
    /// `Ok(None)` once the peer has closed the connection.
    fn recv_line(&mut self) -> io::Result<Option<String>>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        (**self).send_line(line)
    }

    fn recv_line(&mut self) -> io::Result<Option<String>> {
        (**self).recv_line()
    }
}

/// Any buffered reader plus writer, e.g. stdio or a TCP stream.
pub struct LineTransport<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead + Send, W: Write + Send> LineTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer }
    }
}

impl<R: BufRead + Send, W: Write + Send> Transport for LineTransport<R, W> {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        debug_assert!(!line.contains('\n'));
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }

    fn recv_line(&mut self) -> io::Result<Option<String>> {
        loop {
            let mut buf = String::new();
            if self.reader.read_line(&mut buf)? == 0 {
                return Ok(None);
            }
            let line = buf.trim_end_matches(['\n', '\r']);
            if !line.trim().is_empty() {
                return Ok(Some(line.to_string()));
            }
        }
    }
}

pub type StdioTransport = LineTransport<BufReader<io::Stdin>, io::Stdout>;

pub fn stdio() -> StdioTransport {
    LineTransport::new(BufReader::new(io::stdin()), io::stdout())
}

pub type TcpTransport = LineTransport<BufReader<TcpStream>, TcpStream>;

pub fn tcp(stream: TcpStream) -> io::Result<TcpTransport> {
    let reader = BufReader::new(stream.try_clone()?);
    Ok(LineTransport::new(reader, stream))
}

pub fn tcp_connect(addr: &str) -> io::Result<TcpTransport> {
    tcp(TcpStream::connect(addr)?)
}

/// Talks to a child process over its stdin/stdout. The child is killed when
/// the transport is dropped.
pub struct ChildTransport {
    child: Child,
    inner: LineTransport<BufReader<ChildStdout>, ChildStdin>,
}

impl ChildTransport {
    pub fn spawn(program: &str, args: &[String]) -> io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            child,
            inner: LineTransport::new(BufReader::new(stdout), stdin),
        })
    }
}

impl Transport for ChildTransport {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.inner.send_line(line)
    }

    fn recv_line(&mut self) -> io::Result<Option<String>> {
        self.inner.recv_line()
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One end of an in-process duplex pipe.
pub struct PipeTransport {
    tx: Sender<String>,
    rx: Receiver<String>,
}

/// Two connected in-memory endpoints. Dropping one end closes the other.
pub fn pipe() -> (PipeTransport, PipeTransport) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    (PipeTransport { tx: a_tx, rx: a_rx }, PipeTransport { tx: b_tx, rx: b_rx })
}

impl Transport for PipeTransport {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.tx
            .send(line.to_string())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))
    }

    fn recv_line(&mut self) -> io::Result<Option<String>> {
        Ok(self.rx.recv().ok())
    }
}

/// Direction marker in a recorded transcript.
pub const SENT: &str = ">";
pub const RECEIVED: &str = "<";

/// Wraps a transport and appends every line to a shared transcript as
/// `"> line"` (sent) or `"< line"` (received).
pub struct Recording<T> {
    inner: T,
    log: Arc<Mutex<Vec<String>>>,
}

impl<T: Transport> Recording<T> {
    pub fn new(inner: T) -> (Self, Arc<Mutex<Vec<String>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (
            Self {
                inner,
                log: Arc::clone(&log),
            },
            log,
        )
    }

    pub fn with_log(inner: T, log: Arc<Mutex<Vec<String>>>) -> Self {
        Self { inner, log }
    }
}

impl<T: Transport> Transport for Recording<T> {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.log.lock().unwrap().push(format!("{SENT} {line}"));
        self.inner.send_line(line)
    }

    fn recv_line(&mut self) -> io::Result<Option<String>> {
        let line = self.inner.recv_line()?;
        if let Some(l) = &line {
            self.log.lock().unwrap().push(format!("{RECEIVED} {l}"));
        }
        Ok(line)
    }
}
