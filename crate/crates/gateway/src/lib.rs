//! EGSE gateway: bridges the ground-segment byte link to WebSocket clients
//! speaking one JSON object per text message.
//!
//! ```text
//! {"dir":"up","id":"01","payload":"0201f4"}                      client → gateway
//! {"dir":"down","id":"01","payload":"1020ac","ts":"2026-…Z"}    gateway → clients
//! {"dir":"status","id":"00","payload":"","ts":"…","msg":"bad payload"}
//! ```
//!
//! `GET /telemetry?limit=N` returns the most recent downlink messages as a
//! JSON array, oldest first.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, SecondsFormat, Utc};
use obdh::framing::{encode_gs_frame, DeframeEvent, DownlinkDeframer, GsFrame, ProtocolKind};
use obdh::transport::{Link, LinkReader, LinkWriter, RecvChunk};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::broadcast;

/// Per-client queue depth; a client further behind loses the oldest messages.
pub const CLIENT_QUEUE: usize = 1024;
/// Downlink messages kept for `/telemetry`.
pub const HISTORY_LEN: usize = 1000;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Serve(std::io::Error),
    #[error("bad payload: {0}")]
    BadPayload(String),
    #[error("bad id `{0}`")]
    BadId(String),
    #[error("bad message: {0}")]
    BadMessage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsoleMessage {
    pub dir: Direction,
    /// Two lowercase hex digits.
    pub id: String,
    /// Even-length lowercase hex.
    pub payload: String,
    #[serde(default)]
    pub ts: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg: Option<String>,
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl ConsoleMessage {
    pub fn new(dir: Direction, id: u8, payload: &[u8], ts: DateTime<Utc>) -> Self {
        ConsoleMessage {
            dir,
            id: format!("{id:02x}"),
            payload: hex::encode(payload),
            ts: timestamp(ts),
            msg: None,
        }
    }

    pub fn status(text: impl Into<String>) -> Self {
        ConsoleMessage {
            msg: Some(text.into()),
            ..ConsoleMessage::new(Direction::Status, 0, &[], Utc::now())
        }
    }

    pub fn subsystem_id(&self) -> Result<u8, GatewayError> {
        let ok = self.id.len() == 2 && self.id.bytes().all(|b| b.is_ascii_hexdigit());
        if !ok {
            return Err(GatewayError::BadId(self.id.clone()));
        }
        u8::from_str_radix(&self.id, 16).map_err(|_| GatewayError::BadId(self.id.clone()))
    }

    pub fn payload_bytes(&self) -> Result<Vec<u8>, GatewayError> {
        hex::decode(&self.payload).map_err(|e| GatewayError::BadPayload(e.to_string()))
    }

    /// The exact bytes this uplink puts on the ground link.
    pub fn uplink_frame(&self) -> Result<Vec<u8>, GatewayError> {
        if self.dir != Direction::Up {
            return Err(GatewayError::BadMessage("only uplink messages are accepted".into()));
        }
        let frame = GsFrame::new(self.subsystem_id()?, self.payload_bytes()?);
        encode_gs_frame(&frame).map_err(|e| GatewayError::BadPayload(e.to_string()))
    }
}

/// Serialize `msg` as one JSON line without the trailing newline.
pub fn encode_console_message(msg: &ConsoleMessage) -> Result<String, GatewayError> {
    msg.subsystem_id()?;
    let valid_hex = msg.payload.len().is_multiple_of(2)
        && msg.payload.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
    if !valid_hex {
        return Err(GatewayError::BadPayload(msg.payload.clone()));
    }
    Ok(serde_json::to_string(msg).expect("console message serializes"))
}

pub fn decode_console_message(text: &str) -> Result<ConsoleMessage, GatewayError> {
    serde_json::from_str(text).map_err(|e| GatewayError::BadMessage(e.to_string()))
}

#[derive(Clone)]
struct Shared {
    writer: Arc<Mutex<LinkWriter>>,
    events: broadcast::Sender<ConsoleMessage>,
    history: Arc<Mutex<VecDeque<ConsoleMessage>>>,
}

impl Shared {
    fn publish(&self, msg: ConsoleMessage) {
        if msg.dir == Direction::Down {
            let mut h = self.history.lock().unwrap();
            if h.len() == HISTORY_LEN {
                h.pop_front();
            }
            h.push_back(msg.clone());
        }
        // no subscribers is fine
        let _ = self.events.send(msg);
    }
}

fn read_ground_link(mut reader: LinkReader, protocols: HashMap<u8, ProtocolKind>, shared: Shared) {
    let mut deframer = DownlinkDeframer::new(protocols);
    loop {
        match reader.recv_chunk() {
            RecvChunk::Data(bytes) => {
                for b in bytes {
                    if let DeframeEvent::Complete(frame) = deframer.push(b) {
                        let msg = ConsoleMessage::new(Direction::Down, frame.subsystem_id, &frame.payload, Utc::now());
                        shared.publish(msg);
                    }
                }
            }
            RecvChunk::Timeout => {}
            RecvChunk::Eof => {
                log::warn!("ground link closed");
                shared.publish(ConsoleMessage::status("ground link closed"));
                return;
            }
        }
    }
}

#[derive(Deserialize)]
struct TelemetryQuery {
    limit: Option<usize>,
}

async fn telemetry(State(shared): State<Shared>, Query(q): Query<TelemetryQuery>) -> Json<Vec<ConsoleMessage>> {
    let h = shared.history.lock().unwrap();
    let n = q.limit.unwrap_or(h.len()).min(h.len());
    Json(h.iter().skip(h.len() - n).cloned().collect())
}

async fn ws_upgrade(State(shared): State<Shared>, ws: WebSocketUpgrade) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn send_json(socket: &mut WebSocket, msg: &ConsoleMessage) -> bool {
    let text = serde_json::to_string(msg).expect("console message serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn uplink(shared: &Shared, text: &str) -> Result<(), GatewayError> {
    let msg = decode_console_message(text)?;
    let bytes = msg.uplink_frame()?;
    let writer = shared.writer.clone();
    let written = tokio::task::spawn_blocking(move || writer.lock().unwrap().send_bytes(&bytes))
        .await
        .expect("writer task");
    written.map_err(|e| GatewayError::BadMessage(format!("ground link: {e}")))?;
    let id = msg.subsystem_id()?;
    shared.publish(ConsoleMessage::new(Direction::Up, id, &msg.payload_bytes()?, Utc::now()));
    Ok(())
}

async fn client(mut socket: WebSocket, shared: Shared) {
    let mut rx = shared.events.subscribe();
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    if let Err(e) = uplink(&shared, text.as_str()).await {
                        let reason = match e {
                            GatewayError::BadPayload(_) | GatewayError::BadId(_) => "bad payload".to_string(),
                            other => other.to_string(),
                        };
                        if !send_json(&mut socket, &ConsoleMessage::status(reason)).await {
                            return;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            event = rx.recv() => match event {
                Ok(msg) => {
                    if !send_json(&mut socket, &msg).await {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let notice = ConsoleMessage::status(format!("dropped {n} oldest messages"));
                    if !send_json(&mut socket, &notice).await {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
        }
    }
}

/// A running gateway bound to a local address.
pub struct Gateway {
    app: Router,
    listener: TcpListener,
}

impl Gateway {
    /// Start the ground-link reader thread and bind the HTTP listener.
    pub async fn bind(
        gs_link: Link,
        protocols: HashMap<u8, ProtocolKind>,
        listen_addr: &str,
    ) -> Result<Gateway, GatewayError> {
        let listener = TcpListener::bind(listen_addr).await.map_err(|source| GatewayError::Bind {
            addr: listen_addr.to_string(),
            source,
        })?;
        let (reader, writer) = gs_link.split();
        let (events, _) = broadcast::channel(CLIENT_QUEUE);
        let shared = Shared {
            writer: Arc::new(Mutex::new(writer)),
            events,
            history: Arc::new(Mutex::new(VecDeque::with_capacity(HISTORY_LEN))),
        };
        let reader_shared = shared.clone();
        thread::Builder::new()
            .name("gs-reader".into())
            .spawn(move || read_ground_link(reader, protocols, reader_shared))
            .map_err(GatewayError::Serve)?;
        let app = Router::new()
            .route("/ws", get(ws_upgrade))
            .route("/telemetry", get(telemetry))
            .with_state(shared);
        Ok(Gateway { app, listener })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serve clients until the process ends.
    pub async fn run(self) -> Result<(), GatewayError> {
        axum::serve(self.listener, self.app).await.map_err(GatewayError::Serve)
    }
}

/// Bind on `listen_addr` and serve forever.
pub async fn serve_gateway(
    gs_link: Link,
    protocols: HashMap<u8, ProtocolKind>,
    listen_addr: &str,
) -> Result<(), GatewayError> {
    Gateway::bind(gs_link, protocols, listen_addr).await?.run().await
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn encodes_downlink_line() {
        let ts = Utc.with_ymd_and_hms(2026, 1, 2, 3, 4, 5).unwrap();
        let msg = ConsoleMessage::new(Direction::Down, 0x01, &[0x10, 0x20, 0xAC], ts);
        assert_eq!(
            encode_console_message(&msg).unwrap(),
            r#"{"dir":"down","id":"01","payload":"1020ac","ts":"2026-01-02T03:04:05.000Z"}"#
        );
    }

    #[test]
    fn rejects_invalid_hex() {
        let mut msg = ConsoleMessage::new(Direction::Down, 1, &[], Utc::now());
        msg.payload = "abc".into();
        assert!(encode_console_message(&msg).is_err());
        msg.payload = "AB".into();
        assert!(encode_console_message(&msg).is_err());
        msg.payload = "ab".into();
        msg.id = "1".into();
        assert!(encode_console_message(&msg).is_err());
    }

    #[test]
    fn uplink_frame_matches_encoder() {
        let msg = decode_console_message(r#"{"dir":"up","id":"01","payload":"1122"}"#).unwrap();
        assert_eq!(msg.uplink_frame().unwrap(), vec![0x23, 0x01, 0x00, 0x11, 0x22, 0x26]);
        let odd = decode_console_message(r#"{"dir":"up","id":"01","payload":"112"}"#).unwrap();
        assert!(matches!(odd.uplink_frame(), Err(GatewayError::BadPayload(_))));
        let delim = decode_console_message(r#"{"dir":"up","id":"01","payload":"26"}"#).unwrap();
        assert!(matches!(delim.uplink_frame(), Err(GatewayError::BadPayload(_))));
    }

    #[test]
    fn status_carries_text() {
        let line = encode_console_message(&ConsoleMessage::status("bad payload")).unwrap();
        assert!(line.contains(r#""dir":"status""#));
        assert!(line.contains(r#""msg":"bad payload""#));
    }
}
