//! Scripted ground-station session: send uplink frames, wait for matching
//! downlink frames, record a transcript.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::HarnessError;
use crate::framing::{encode_gs_frame, DeframeEvent, DownlinkDeframer, DownlinkFrame, GsFrame, ProtocolKind};
use crate::sim::decode_wde_telemetry;
use crate::transport::{Link, RecvChunk};

pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_millis(2000);
const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expect {
    pub id: u8,
    pub prefix: Option<Vec<u8>>,
    pub exact: Option<Vec<u8>>,
    pub len: Option<usize>,
    pub wde_speed: Option<i16>,
    pub timeout: Duration,
}

impl Expect {
    pub fn id(id: u8) -> Self {
        Expect {
            id,
            timeout: DEFAULT_STEP_TIMEOUT,
            ..Default::default()
        }
    }

    /// Why `payload` fails the matchers, if it does.
    fn check(&self, payload: &[u8]) -> Option<String> {
        if let Some(exact) = &self.exact {
            if payload != exact.as_slice() {
                return Some(format!("expected {}, got {}", hex::encode(exact), hex::encode(payload)));
            }
        }
        if let Some(prefix) = &self.prefix {
            if !payload.starts_with(prefix) {
                return Some(format!("expected prefix {}, got {}", hex::encode(prefix), hex::encode(payload)));
            }
        }
        if let Some(len) = self.len {
            if payload.len() != len {
                return Some(format!("expected {len} bytes, got {}", payload.len()));
            }
        }
        if let Some(speed) = self.wde_speed {
            match decode_wde_telemetry(payload) {
                Some(s) if s == speed => {}
                other => return Some(format!("expected wheel speed {speed}, got {other:?}")),
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    SendUplink { id: u8, payload: Vec<u8> },
    ExpectDownlink(Expect),
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::SendUplink { id, payload } => write!(f, "send-uplink id={id:02x} {}", hex::encode(payload)),
            Step::ExpectDownlink(e) => {
                write!(f, "expect-downlink id={:02x}", e.id)?;
                if let Some(x) = &e.exact {
                    write!(f, " exact={}", hex::encode(x))?;
                }
                if let Some(x) = &e.prefix {
                    write!(f, " prefix={}", hex::encode(x))?;
                }
                if let Some(x) = e.len {
                    write!(f, " len={x}")?;
                }
                if let Some(x) = e.wde_speed {
                    write!(f, " wde_speed={x}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    pub steps: Vec<Step>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    step: Vec<RawStep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    kind: String,
    id: u8,
    payload: Option<String>,
    prefix: Option<String>,
    exact: Option<String>,
    len: Option<usize>,
    wde_speed: Option<i16>,
    timeout_ms: Option<u64>,
}

fn unhex(n: usize, field: &str, text: &Option<String>) -> Result<Option<Vec<u8>>, HarnessError> {
    text.as_deref()
        .map(|t| hex::decode(t).map_err(|e| HarnessError::Config(format!("step {n}: {field}: {e}"))))
        .transpose()
}

impl Script {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let raw: RawScript = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut steps = Vec::new();
        for (n, s) in raw.step.iter().enumerate() {
            let step = match s.kind.as_str() {
                "send-uplink" => Step::SendUplink {
                    id: s.id,
                    payload: unhex(n, "payload", &s.payload)?.unwrap_or_default(),
                },
                "expect-downlink" => Step::ExpectDownlink(Expect {
                    id: s.id,
                    prefix: unhex(n, "prefix", &s.prefix)?,
                    exact: unhex(n, "exact", &s.exact)?,
                    len: s.len,
                    wde_speed: s.wde_speed,
                    timeout: s.timeout_ms.map(Duration::from_millis).unwrap_or(DEFAULT_STEP_TIMEOUT),
                }),
                other => return Err(HarnessError::Config(format!("step {n}: unknown kind `{other}`"))),
            };
            if let Step::SendUplink { id, payload } = &step {
                encode_gs_frame(&GsFrame::new(*id, payload.clone()))
                    .map_err(|e| HarnessError::Config(format!("step {n}: {e}")))?;
            }
            steps.push(step);
        }
        Ok(Script { steps })
    }

    /// Telemetry request, speed command, speed read-back, then a star
    /// sensor request.
    pub fn default_integration() -> Self {
        let send = |id, payload: &[u8]| Step::SendUplink {
            id,
            payload: payload.to_vec(),
        };
        Script {
            steps: vec![
                send(0x01, &[0x01]),
                Step::ExpectDownlink(Expect {
                    len: Some(5),
                    ..Expect::id(0x01)
                }),
                send(0x01, &[0x02, 0x01, 0xF4]),
                Step::ExpectDownlink(Expect {
                    exact: Some(vec![0x02, 0x00, 0xAC]),
                    ..Expect::id(0x01)
                }),
                send(0x01, &[0x01]),
                Step::ExpectDownlink(Expect {
                    wde_speed: Some(500),
                    ..Expect::id(0x01)
                }),
                send(0x04, &[0x01]),
                Step::ExpectDownlink(Expect {
                    len: Some(16),
                    prefix: Some(vec![0x01]),
                    ..Expect::id(0x04)
                }),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub step: Step,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioReport {
    pub steps: Vec<StepResult>,
    pub transcript: Vec<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        !self.steps.is_empty() && self.steps.iter().all(|s| s.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &StepResult> {
        self.steps.iter().filter(|s| !s.passed)
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            let mark = if s.passed { "ok  " } else { "FAIL" };
            write!(f, "{mark} {:>2} {}", i + 1, s.step)?;
            if !s.detail.is_empty() {
                write!(f, "  ({})", s.detail)?;
            }
            writeln!(f)?;
        }
        write!(f, "scenario {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

struct Downlinks {
    link: Link,
    deframer: DownlinkDeframer,
    queue: VecDeque<DownlinkFrame>,
    closed: bool,
}

impl Downlinks {
    /// Next frame with `id`, skipping others. Frames for other ids stay in
    /// the transcript only.
    fn wait(&mut self, id: u8, timeout: Duration, transcript: &mut Vec<String>) -> Option<DownlinkFrame> {
        let deadline = Instant::now() + timeout;
        loop {
            while let Some(frame) = self.queue.pop_front() {
                if frame.subsystem_id == id {
                    return Some(frame);
                }
            }
            if self.closed || Instant::now() >= deadline {
                return None;
            }
            match self.link.recv_chunk() {
                RecvChunk::Data(bytes) => {
                    for b in bytes {
                        if let DeframeEvent::Complete(frame) = self.deframer.push(b) {
                            transcript.push(format!("<- {:02x} {}", frame.subsystem_id, hex::encode(&frame.payload)));
                            self.queue.push_back(frame);
                        }
                    }
                }
                RecvChunk::Timeout => {}
                RecvChunk::Eof => self.closed = true,
            }
        }
    }
}

/// Run `script` over `gs`, the ground-station end of the node's EGSE link.
/// A step that times out fails and the run moves on.
pub fn run_integration_scenario(
    script: &Script,
    gs: Link,
    protocols: HashMap<u8, ProtocolKind>,
) -> ScenarioReport {
    let mut report = ScenarioReport::default();
    let mut gs = gs;
    gs.set_intercharacter_timeout(POLL);
    let mut downlinks = Downlinks {
        link: gs,
        deframer: DownlinkDeframer::new(protocols),
        queue: VecDeque::new(),
        closed: false,
    };

    for step in &script.steps {
        let (passed, detail) = match step {
            Step::SendUplink { id, payload } => {
                match encode_gs_frame(&GsFrame::new(*id, payload.clone())) {
                    Ok(bytes) => {
                        report.transcript.push(format!("-> {id:02x} {}", hex::encode(payload)));
                        match downlinks.link.send_bytes(&bytes) {
                            Ok(_) => (true, String::new()),
                            Err(e) => (false, e.to_string()),
                        }
                    }
                    Err(e) => (false, e.to_string()),
                }
            }
            Step::ExpectDownlink(expect) => {
                match downlinks.wait(expect.id, expect.timeout, &mut report.transcript) {
                    Some(frame) => match expect.check(&frame.payload) {
                        None => (true, String::new()),
                        Some(why) => (false, why),
                    },
                    None if downlinks.closed => (false, "link closed".into()),
                    None => (false, format!("no downlink within {} ms", expect.timeout.as_millis())),
                }
            }
        };
        report.steps.push(StepResult {
            step: step.clone(),
            passed,
            detail,
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_script() {
        let s = Script::from_toml(
            r#"
            [[step]]
            kind = "send-uplink"
            id = 1
            payload = "0201f4"

            [[step]]
            kind = "expect-downlink"
            id = 1
            exact = "0200ac"
            timeout_ms = 500
            "#,
        )
        .unwrap();
        assert_eq!(
            s.steps[0],
            Step::SendUplink {
                id: 1,
                payload: vec![2, 1, 0xF4]
            }
        );
        match &s.steps[1] {
            Step::ExpectDownlink(e) => {
                assert_eq!(e.exact.as_deref(), Some(&[2u8, 0, 0xAC][..]));
                assert_eq!(e.timeout, Duration::from_millis(500));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(Script::from_toml("[[step]]\nkind = \"dance\"\nid = 1\n").is_err());
        assert!(Script::from_toml("[[step]]\nkind = \"send-uplink\"\nid = 1\npayload = \"zz\"\n").is_err());
        assert!(Script::from_toml("[[step]]\nkind = \"send-uplink\"\nid = 1\npayload = \"23\"\n").is_err());
    }

    #[test]
    fn matchers() {
        let e = Expect {
            len: Some(5),
            prefix: Some(vec![0x01]),
            ..Expect::id(1)
        };
        assert!(e.check(&[0x01, 0, 0, 0, 0xAC]).is_none());
        assert!(e.check(&[0x02, 0, 0, 0, 0xAC]).is_some());
        assert!(e.check(&[0x01, 0xAC]).is_some());
        let speed = Expect {
            wde_speed: Some(500),
            ..Expect::id(1)
        };
        assert!(speed.check(&[0x01, 0x03, 0x01, 0xF4, 0xAC]).is_none());
        assert!(speed.check(&[0x01, 0x03, 0x00, 0x00, 0xAC]).is_some());
    }

    #[test]
    fn default_script_shape() {
        let s = Script::default_integration();
        assert_eq!(s.steps.len(), 8);
        assert!(s.steps.iter().step_by(2).all(|s| matches!(s, Step::SendUplink { .. })));
    }
}
