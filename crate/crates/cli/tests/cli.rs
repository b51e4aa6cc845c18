use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output};
use std::thread;
use std::time::{Duration, Instant};

use neatrace_cli::bridge::Bridge;
use neatrace_cli::protocol::{decode_server, encode_client, ClientMessage, ServerMessage};
use neatrace_cli::server::serve_one;
use neatrace_core::action::ActionLabel;
use neatrace_core::dataset::{EndReason, RecorderConfig, TrainingDataset};
use neatrace_core::engine::{BuiltinGame, Game, InputEvent, Key};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn neatrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neatrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(neatrace(&[]).status.code(), Some(1));
    assert_eq!(neatrace(&["search", "--game", "PaddleBall"]).status.code(), Some(1));
    assert_eq!(neatrace(&["search", "--game", "Pong9", "--out", "/tmp/x"]).status.code(), Some(1));
    assert_eq!(neatrace(&["expert", "--game", "PaddleBall", "--out", "x", "--delta-t", "-3"]).status.code(), Some(1));
    assert_eq!(neatrace(&["--help"]).status.code(), Some(0));
}

#[test]
fn games_lists_builtins() {
    let out = neatrace(&["games"]);
    assert!(out.status.success());
    let s = text(&out);
    for g in BuiltinGame::ALL {
        assert!(s.contains(g.name()), "{s}");
    }
}

#[test]
fn expert_search_replay_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("paddle.jsonl");
    let out = neatrace(&["expert", "--game", "PaddleBall", "--seconds", "20", "--out", p(&data)]);
    assert!(out.status.success(), "{}", text(&out));

    let stats = neatrace(&["stats", p(&data)]);
    assert!(stats.status.success());
    assert!(text(&stats).contains("PaddleBall"));

    let run = dir.path().join("run");
    let out = neatrace(&[
        "search", "--game", "PaddleBall", "--dataset", p(&data), "--p", "1", "--population", "20",
        "--reps", "3", "--generations", "5", "--seed", "4", "--out", p(&run),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(run.join("stats.json").is_file());
    let suite = run.join("suite.json");
    let out = neatrace(&["replay", "--suite", p(&suite)]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).contains("entries pass"));
}

#[test]
fn replay_of_tampered_suite_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = neatrace(&[
        "search", "--game", "FruitCatch", "--population", "20", "--reps", "2", "--generations", "3",
        "--out", p(&run),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let path = run.join("suite.json");
    let mut suite: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let entries = suite["entries"].as_array_mut().unwrap();
    assert!(!entries.is_empty());
    // An unreachable statement id can never be covered.
    entries[0]["target"] = serde_json::json!(100_000);
    std::fs::write(&path, suite.to_string()).unwrap();
    assert_eq!(neatrace(&["replay", "--suite", p(&path)]).status.code(), Some(2));
}

#[test]
fn mismatched_dataset_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fruit.jsonl");
    assert!(neatrace(&["expert", "--game", "FruitCatch", "--seconds", "5", "--out", p(&data)]).status.success());
    let out = neatrace(&[
        "search", "--game", "PaddleBall", "--dataset", p(&data), "--p", "1", "--out", p(&dir.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
}

#[test]
fn port_in_use_fails_at_startup() {
    let busy = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = neatrace(&["record", "--game", "PaddleBall", "--port", &port, "--out", p(&dir.path().join("d.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("cannot listen"));
}

fn read_until(ws: &mut Client, pred: impl Fn(&ServerMessage) -> bool) -> ServerMessage {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        assert!(Instant::now() < deadline, "timed out waiting for message");
        if let Message::Text(t) = ws.read().unwrap() {
            let msg = decode_server(&t).unwrap();
            if pred(&msg) {
                return msg;
            }
        }
    }
}

fn send(ws: &mut Client, msg: &ClientMessage) {
    ws.send(Message::Text(encode_client(msg))).unwrap();
}

#[test]
fn websocket_round_trip_records_a_dataset() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let game = Game::new(BuiltinGame::FruitCatch.spec()).unwrap();
    let bridge = Bridge::new(game, RecorderConfig::with_delta_t(Some(10)), 1, 120).unwrap();
    let server = thread::spawn(move || serve_one(&listener, bridge, 120));

    let (mut ws, _) = tungstenite::connect(format!("ws://{addr}")).unwrap();
    let hello = read_until(&mut ws, |_| true);
    assert!(matches!(&hello, ServerMessage::Hello { game, .. } if game == "FruitCatch"));

    ws.send(Message::Text(r#"{"v":9,"type":"stop"}"#.into())).unwrap();
    let err = read_until(&mut ws, |_| true);
    assert!(matches!(&err, ServerMessage::Error { message } if message.contains("version")));

    send(&mut ws, &ClientMessage::Start { seed: Some(11) });
    read_until(&mut ws, |m| matches!(m, ServerMessage::Frame { .. }));
    send(&mut ws, &ClientMessage::Input { event: InputEvent::KeyDown(Key::Right) });
    read_until(&mut ws, |m| matches!(m, ServerMessage::Frame { tick, .. } if *tick >= 8));
    send(&mut ws, &ClientMessage::Input { event: InputEvent::KeyUp(Key::Right) });
    // An input after an idle gap longer than the threshold yields a no-op.
    read_until(&mut ws, |m| matches!(m, ServerMessage::Frame { tick, .. } if *tick >= 30));
    send(&mut ws, &ClientMessage::Input { event: InputEvent::KeyDown(Key::Left) });
    read_until(&mut ws, |m| matches!(m, ServerMessage::Frame { tick, .. } if *tick >= 34));
    send(&mut ws, &ClientMessage::Input { event: InputEvent::KeyUp(Key::Left) });
    let frame = read_until(&mut ws, |m| matches!(m, ServerMessage::Frame { tick, .. } if *tick >= 40));
    if let ServerMessage::Frame { covered, statements, .. } = frame {
        assert!(covered > 0 && covered <= statements);
    }
    send(&mut ws, &ClientMessage::Stop);
    let end = read_until(&mut ws, |m| matches!(m, ServerMessage::SessionEnd { .. }));
    assert!(matches!(end, ServerMessage::SessionEnd { reason: EndReason::PlayerStop, .. }));
    ws.close(None).unwrap();
    while ws.read().is_ok() {}

    let ds: TrainingDataset = server.join().unwrap().unwrap();
    assert_eq!(ds.game_id, "FruitCatch");
    assert_eq!(ds.sessions.len(), 1);
    assert_eq!(ds.sessions[0].seed, 11);
    let labels: Vec<_> = ds.sessions[0].snapshots.iter().map(|s| s.label).collect();
    assert!(labels.len() >= 3, "{labels:?}");
    assert!(labels.iter().any(|l| matches!(l, ActionLabel::NoOp { .. })), "{labels:?}");
}

#[test]
fn disconnect_mid_session_keeps_the_data() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let game = Game::new(BuiltinGame::PaddleBall.spec()).unwrap();
    let bridge = Bridge::new(game, RecorderConfig::with_delta_t(Some(5)), 1, 120).unwrap();
    let server = thread::spawn(move || serve_one(&listener, bridge, 120));
    let (mut ws, _) = tungstenite::connect(format!("ws://{addr}")).unwrap();
    send(&mut ws, &ClientMessage::Start { seed: None });
    read_until(&mut ws, |m| matches!(m, ServerMessage::Frame { tick, .. } if *tick >= 20));
    drop(ws);
    let ds = server.join().unwrap().unwrap();
    assert_eq!(ds.sessions.len(), 1);
    assert_eq!(ds.sessions[0].end_reason, EndReason::PlayerStop);
}
