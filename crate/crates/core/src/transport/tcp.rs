//! Raw TCP links, one connection per link.

use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use super::{Backend, ByteSink, ByteSource, Fill, Link, LinkError, PortConfig};

struct TcpSource {
    stream: TcpStream,
    timeout: Option<Duration>,
}

impl ByteSource for TcpSource {
    fn fill(&mut self, buf: &mut [u8], timeout: Duration) -> io::Result<Fill> {
        if self.timeout != Some(timeout) {
            self.stream.set_read_timeout(Some(timeout))?;
            self.timeout = Some(timeout);
        }
        match self.stream.read(buf) {
            Ok(0) => Ok(Fill::Eof),
            Ok(n) => Ok(Fill::Data(n)),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                Ok(Fill::TimedOut)
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => Ok(Fill::Data(0)),
            Err(_) => Ok(Fill::Eof),
        }
    }
}

struct TcpSink {
    stream: TcpStream,
}

impl ByteSink for TcpSink {
    fn write_all(&mut self, data: &[u8]) -> Result<(), LinkError> {
        self.stream.write_all(data).map_err(|e| match e.kind() {
            io::ErrorKind::BrokenPipe
            | io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted
            | io::ErrorKind::NotConnected => LinkError::Closed,
            _ => LinkError::Io(e),
        })
    }

    fn close(&mut self) {
        let _ = self.stream.shutdown(Shutdown::Write);
    }
}

fn wrap(config: PortConfig, stream: TcpStream) -> Result<Link, LinkError> {
    stream.set_nodelay(true)?;
    let source = TcpSource {
        stream: stream.try_clone()?,
        timeout: None,
    };
    Ok(Link::from_parts(
        config,
        Backend::Tcp,
        Box::new(source),
        Box::new(TcpSink { stream }),
    ))
}

pub(super) fn connect(config: PortConfig, addr: &str) -> Result<Link, LinkError> {
    let unreachable = |source| LinkError::Unreachable {
        addr: addr.to_string(),
        source,
    };
    let targets: Vec<_> = addr.to_socket_addrs().map_err(unreachable)?.collect();
    let deadline = Instant::now() + config.connect_wait;
    loop {
        let mut last_err = io::Error::new(io::ErrorKind::NotFound, "no address resolved");
        for target in &targets {
            match TcpStream::connect_timeout(target, Duration::from_secs(2)) {
                Ok(stream) => return wrap(config, stream),
                Err(e) => last_err = e,
            }
        }
        if Instant::now() >= deadline {
            return Err(unreachable(last_err));
        }
        thread::sleep(Duration::from_millis(50));
    }
}

/// Bind, accept a single peer, then drop the listener.
pub(super) fn listen_one(config: PortConfig, addr: &str) -> Result<Link, LinkError> {
    let listener = TcpListener::bind(addr).map_err(|source| LinkError::Unreachable {
        addr: addr.to_string(),
        source,
    })?;
    let (stream, _) = listener.accept()?;
    wrap(config, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{open_link, RecvEvent};

    fn free_port() -> u16 {
        TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
    }

    #[test]
    fn connect_and_listen_round_trip() {
        let port = free_port();
        let addr = format!("127.0.0.1:{port}");
        let listen_spec = format!("tcp-listen:{addr}");
        let server = thread::spawn(move || {
            let mut link = open_link(PortConfig::default(), &listen_spec).unwrap();
            assert_eq!(link.recv_byte(), RecvEvent::Byte(0x23));
            assert_eq!(link.recv_byte(), RecvEvent::Byte(0x01));
            link.send_bytes(&[0xAC]).unwrap();
            assert_eq!(link.recv_byte(), RecvEvent::Eof);
        });
        let config = PortConfig {
            baud: 9600,
            connect_wait: Duration::from_secs(5),
            ..PortConfig::default()
        };
        let mut link = open_link(config, &format!("tcp:{addr}")).unwrap();
        assert_eq!(link.backend(), Backend::Tcp);
        assert_eq!(link.send_bytes(&[0x23, 0x01]).unwrap(), 2);
        assert_eq!(link.recv_byte(), RecvEvent::Byte(0xAC));
        link.close();
        server.join().unwrap();
    }

    #[test]
    fn unreachable_address() {
        let port = free_port();
        let err = open_link(PortConfig::default(), &format!("tcp:127.0.0.1:{port}")).unwrap_err();
        assert!(matches!(err, LinkError::Unreachable { .. }), "{err}");
    }

    #[test]
    fn tcp_timeout_then_data() {
        let port = free_port();
        let addr = format!("127.0.0.1:{port}");
        let spec = format!("tcp-listen:{addr}");
        let server = thread::spawn(move || open_link(PortConfig::default(), &spec).unwrap());
        let config = PortConfig {
            intercharacter_timeout: Duration::from_millis(60),
            connect_wait: Duration::from_secs(5),
            ..PortConfig::default()
        };
        let mut client = open_link(config, &format!("tcp:{addr}")).unwrap();
        let mut server = server.join().unwrap();
        assert_eq!(client.recv_byte(), RecvEvent::Timeout);
        server.send_bytes(&[7, 8]).unwrap();
        assert_eq!(client.recv_byte(), RecvEvent::Byte(7));
        assert_eq!(client.recv_byte(), RecvEvent::Byte(8));
    }
}
