//! Serial / pseudo-terminal devices configured through termios.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::os::unix::fs::OpenOptionsExt;
use std::os::unix::io::AsRawFd;
use std::time::Duration;

use super::{Backend, ByteSink, ByteSource, Fill, Link, LinkError, PortConfig};

fn speed_constant(baud: u32) -> Option<libc::speed_t> {
    Some(match baud {
        1200 => libc::B1200,
        2400 => libc::B2400,
        4800 => libc::B4800,
        9600 => libc::B9600,
        19200 => libc::B19200,
        38400 => libc::B38400,
        57600 => libc::B57600,
        115200 => libc::B115200,
        230400 => libc::B230400,
        _ => return None,
    })
}

/// Raw mode, requested speed, VMIN/VTIME from the port config.
fn configure(file: &File, config: &PortConfig) -> io::Result<()> {
    let fd = file.as_raw_fd();
    let speed = speed_constant(config.baud).ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidInput, format!("unsupported baud {}", config.baud))
    })?;
    // SAFETY: termios is plain old data; fd is open for the duration of the calls.
    unsafe {
        let mut tty: libc::termios = std::mem::zeroed();
        if libc::tcgetattr(fd, &mut tty) != 0 {
            return Err(io::Error::last_os_error());
        }
        libc::cfmakeraw(&mut tty);
        libc::cfsetospeed(&mut tty, speed);
        libc::cfsetispeed(&mut tty, speed);
        tty.c_cflag |= libc::CLOCAL | libc::CREAD;
        tty.c_cc[libc::VMIN] = config.min_read_bytes.min(255) as libc::cc_t;
        let deciseconds = (config.intercharacter_timeout.as_millis() / 100).clamp(1, 255);
        tty.c_cc[libc::VTIME] = deciseconds as libc::cc_t;
        if libc::tcsetattr(fd, libc::TCSANOW, &tty) != 0 {
            return Err(io::Error::last_os_error());
        }
    }
    Ok(())
}

struct DeviceSource(File);

impl ByteSource for DeviceSource {
    fn fill(&mut self, buf: &mut [u8], timeout: Duration) -> io::Result<Fill> {
        let mut pfd = libc::pollfd {
            fd: self.0.as_raw_fd(),
            events: libc::POLLIN,
            revents: 0,
        };
        let millis = timeout.as_millis().min(i32::MAX as u128) as i32;
        // SAFETY: one valid pollfd.
        let rc = unsafe { libc::poll(&mut pfd, 1, millis) };
        if rc < 0 {
            let err = io::Error::last_os_error();
            return if err.kind() == io::ErrorKind::Interrupted {
                Ok(Fill::Data(0))
            } else {
                Err(err)
            };
        }
        if rc == 0 {
            return Ok(Fill::TimedOut);
        }
        match self.0.read(buf) {
            Ok(0) => Ok(Fill::Eof),
            Ok(n) => Ok(Fill::Data(n)),
            // EIO: the other side of a pty hung up
            Err(_) => Ok(Fill::Eof),
        }
    }
}

struct DeviceSink(File);

impl ByteSink for DeviceSink {
    fn write_all(&mut self, data: &[u8]) -> Result<(), LinkError> {
        self.0.write_all(data).map_err(|e| match e.raw_os_error() {
            Some(libc::EIO) => LinkError::Closed,
            _ => LinkError::Io(e),
        })
    }

    fn close(&mut self) {}
}

pub(super) fn open(config: PortConfig, path: &str) -> Result<Link, LinkError> {
    let file = OpenOptions::new()
        .read(true)
        .write(true)
        .custom_flags(libc::O_NOCTTY)
        .open(path)
        .map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => LinkError::DeviceNotPresent(path.to_string()),
            _ => LinkError::Io(e),
        })?;
    configure(&file, &config)?;
    let source = DeviceSource(file.try_clone()?);
    Ok(Link::from_parts(
        config,
        Backend::PseudoTerminal,
        Box::new(source),
        Box::new(DeviceSink(file)),
    ))
}
