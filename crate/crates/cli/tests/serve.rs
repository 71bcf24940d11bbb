use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use stage_core::emotion::EmotionNet;
use stage_core::engine::{replay, EngineConfig, LiveSession, SessionLog};
use stage_core::script::Script;
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn artifacts() -> (Arc<Script>, Arc<EmotionNet>) {
    (
        Arc::new(Script::load(fixtures().join("example_script.json")).unwrap()),
        Arc::new(EmotionNet::load(fixtures().join("demo_model.txt")).unwrap()),
    )
}

async fn start() -> (String, oneshot::Sender<()>, tokio::task::JoinHandle<SessionLog>) {
    let (script, model) = artifacts();
    let config = EngineConfig { tick_rate: 40.0, master_seed: 12, ..Default::default() };
    let session = LiveSession::new(script, model, config).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("ws://{}", listener.local_addr().unwrap());
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let handle = tokio::spawn(async move {
        stage_cli::server::serve(listener, session, None, async {
            let _ = stop_rx.await;
        })
        .await
        .unwrap()
    });
    (url, stop_tx, handle)
}

async fn next_json(c: &mut Client) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), c.next()).await.expect("message in time");
        if let Message::Text(t) = msg.unwrap().unwrap() {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

/// Reads until a message satisfies `pred`, returning everything seen.
async fn until(c: &mut Client, pred: impl Fn(&Value) -> bool) -> Vec<Value> {
    let mut seen = Vec::new();
    loop {
        let v = next_json(c).await;
        let done = pred(&v);
        seen.push(v);
        if done {
            return seen;
        }
    }
}

fn is_tick_stream(v: &Value) -> bool {
    matches!(v["kind"].as_str(), Some("scene" | "moods" | "cue" | "observer"))
}

async fn window(c: &mut Client, from: u64, to: u64) -> Vec<Value> {
    let mut out = Vec::new();
    loop {
        let v = next_json(c).await;
        let Some(t) = v["tick"].as_u64() else { continue };
        if t > to {
            return out;
        }
        if t >= from && is_tick_stream(&v) {
            out.push(v);
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn two_clients_share_one_stream_and_survive_junk() {
    let (url, stop, server) = start().await;
    let (mut a, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let (mut b, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let hello = until(&mut a, |v| v["kind"] == "hello").await;
    assert!(hello.last().unwrap()["payload"]["sequences"].as_array().unwrap().len() == 2);
    until(&mut b, |v| v["kind"] == "hello").await;

    // Junk is answered with an error and the connection stays usable.
    for junk in ["not json", r#"{"kind":"dance"}"#, r#"{"kind":"restore","payload":{"id":7}}"#] {
        b.send(Message::Text(junk.into())).await.unwrap();
        let seen = until(&mut b, |v| v.get("error").is_some()).await;
        assert!(seen.last().unwrap()["tick"].is_u64());
    }
    b.send(Message::Binary(vec![0, 159, 146, 150])).await.unwrap();
    until(&mut b, |v| v.get("error").is_some()).await;

    a.send(Message::Text(json!({"tick": 0, "kind": "cue_advance", "payload": {}}).to_string())).await.unwrap();
    let seen = until(&mut a, |v| v["kind"] == "ack").await;
    let stamped = seen.last().unwrap()["tick"].as_u64().unwrap();
    let seen = until(&mut a, |v| v["kind"] == "cue" && v["tick"].as_u64().unwrap() >= stamped).await;
    let cue = &seen.last().unwrap()["payload"];
    assert_eq!((cue["sequence"].as_u64(), cue["sequence_id"].as_str()), (Some(1), Some("crossing")));

    // Both clients see the same tick stream over a common window.
    let from = stamped + 2;
    let to = from + 8;
    let (wa, wb) = tokio::join!(window(&mut a, from, to), window(&mut b, from, to));
    assert!(!wa.is_empty());
    assert_eq!(wa, wb);

    // A burst of hostile input does not take the server down.
    for i in 0..300u32 {
        let text = match i % 3 {
            0 => format!("{{\"kind\":\"state_override\",\"payload\":{{\"state\":{i}}}}}"),
            1 => "[".repeat(i as usize),
            _ => String::from_utf8_lossy(&i.to_le_bytes().repeat(5)).into_owned(),
        };
        b.send(Message::Text(text)).await.unwrap();
    }
    b.send(Message::Text(json!({"kind": "state_override", "payload": {"state": "fear"}}).to_string())).await.unwrap();
    until(&mut b, |v| v["kind"] == "ack").await;
    drop(b);

    a.send(Message::Text(json!({"kind": "snapshot"}).to_string())).await.unwrap();
    let ack = until(&mut a, |v| v["kind"] == "ack").await.pop().unwrap();
    assert_eq!(ack["payload"]["snapshot"], 0);
    until(&mut a, |v| v["kind"] == "scene").await;
    a.close(None).await.unwrap();

    stop.send(()).unwrap();
    let log = server.await.unwrap();
    assert_eq!(log.events().count(), 3);
    let parsed = SessionLog::parse(&log.to_jsonl()).unwrap();
    let (script, model) = artifacts();
    assert_eq!(replay(&parsed, script, model, None).unwrap().to_string(), "identical");
}
