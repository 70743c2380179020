use std::time::{Duration, Instant};

use futures::{SinkExt, StreamExt};
use obdh::node::PortTable;
use obdh::transport::{Link, MemHub, PortConfig, RecvChunk};
use obdh_gateway::{ConsoleMessage, Direction, Gateway};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start() -> (String, Link) {
    let hub = MemHub::new();
    let quick = |n: &str| PortConfig {
        intercharacter_timeout: Duration::from_millis(50),
        ..PortConfig::named(n)
    };
    let (obdh_end, gs_end) = hub.make_loopback_pair_with("gs", quick("obdh"), quick("gateway")).unwrap();
    let gw = Gateway::bind(gs_end, PortTable::default().downlink_protocols(), "127.0.0.1:0")
        .await
        .unwrap();
    let addr = gw.local_addr().to_string();
    tokio::spawn(gw.run());
    (addr, obdh_end)
}

async fn connect(addr: &str) -> Client {
    connect_async(format!("ws://{addr}/ws")).await.unwrap().0
}

async fn next_msg(c: &mut Client) -> ConsoleMessage {
    loop {
        let m = tokio::time::timeout(Duration::from_secs(3), c.next())
            .await
            .expect("message within 3 s")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = m {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn next_of(c: &mut Client, dir: Direction) -> ConsoleMessage {
    loop {
        let m = next_msg(c).await;
        if m.dir == dir {
            return m;
        }
    }
}

fn read_blocking(link: &mut Link, n: usize) -> Vec<u8> {
    let deadline = Instant::now() + Duration::from_secs(3);
    let mut out = Vec::new();
    while out.len() < n && Instant::now() < deadline {
        if let RecvChunk::Data(b) = link.recv_chunk() {
            out.extend(b);
        }
    }
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn uplink_reaches_ground_link() {
    let (addr, mut obdh) = start().await;
    let mut c = connect(&addr).await;
    c.send(Message::text(r#"{"dir":"up","id":"01","payload":"1122"}"#)).await.unwrap();
    let got = tokio::task::spawn_blocking(move || read_blocking(&mut obdh, 6)).await.unwrap();
    assert_eq!(got, vec![0x23, 0x01, 0x00, 0x11, 0x22, 0x26]);
    let echo = next_of(&mut c, Direction::Up).await;
    assert_eq!((echo.id.as_str(), echo.payload.as_str()), ("01", "1122"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn downlink_is_broadcast_to_every_client() {
    let (addr, mut obdh) = start().await;
    let mut a = connect(&addr).await;
    let mut b = connect(&addr).await;
    // let both subscriptions settle
    tokio::time::sleep(Duration::from_millis(100)).await;
    obdh.send_bytes(&[0x23, 0x01, 0x10, 0x20, 0xAC, 0x26]).unwrap();
    for c in [&mut a, &mut b] {
        let m = next_of(c, Direction::Down).await;
        assert_eq!(m.id, "01");
        assert_eq!(m.payload, "1020ac");
        assert!(m.ts.ends_with('Z'));
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_payload_keeps_connection_open() {
    let (addr, mut obdh) = start().await;
    let mut c = connect(&addr).await;
    c.send(Message::text(r#"{"dir":"up","id":"01","payload":"112"}"#)).await.unwrap();
    let status = next_of(&mut c, Direction::Status).await;
    assert_eq!(status.msg.as_deref(), Some("bad payload"));
    c.send(Message::text("not json")).await.unwrap();
    assert_eq!(next_of(&mut c, Direction::Status).await.dir, Direction::Status);
    c.send(Message::text(r#"{"dir":"up","id":"04","payload":"01"}"#)).await.unwrap();
    let got = tokio::task::spawn_blocking(move || read_blocking(&mut obdh, 5)).await.unwrap();
    assert_eq!(got, vec![0x23, 0x04, 0x00, 0x01, 0x26]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn telemetry_endpoint_returns_recent_downlinks() {
    let (addr, mut obdh) = start().await;
    for seq in 0..3u8 {
        obdh.send_bytes(&[0x23, 0x01, 0x01, seq, 0x00, 0x00, 0xAC, 0x26]).unwrap();
    }
    tokio::time::sleep(Duration::from_millis(300)).await;
    let mut s = TcpStream::connect(&addr).await.unwrap();
    s.write_all(b"GET /telemetry?limit=2 HTTP/1.1\r\nHost: gw\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).await.unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    let body = &resp[resp.find("\r\n\r\n").unwrap() + 4..];
    let msgs: Vec<ConsoleMessage> = serde_json::from_str(body).unwrap();
    let payloads: Vec<_> = msgs.iter().map(|m| m.payload.as_str()).collect();
    assert_eq!(payloads, vec!["01010000ac", "01020000ac"]);
}
