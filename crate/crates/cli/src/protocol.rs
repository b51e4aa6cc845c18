//! Messages exchanged with the play UI over a WebSocket. Every message is
//! one JSON text frame carrying a protocol version `v` and a `type`.
//!
//! Client to server:
//!
//! ```text
//! {"v":1,"type":"start","seed":7}            seed is optional
//! {"v":1,"type":"input","event":{"key_down":"left"}}
//! {"v":1,"type":"input","event":{"mouse_move":{"x":10.0,"y":-4.5}}}
//! {"v":1,"type":"stop"}
//! ```
//!
//! Server to client: `hello` once per connection, then `frame` every tick
//! of an active session, `session_end` when a session finishes, and
//! `error` for rejected messages.

use neatrace_core::dataset::EndReason;
use neatrace_core::engine::{GameSpec, GameState, InputEvent, SpriteState, X_MAX, X_MIN, Y_MAX, Y_MIN};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Start {
        #[serde(default)]
        seed: Option<u64>,
    },
    Input {
        event: InputEvent,
    },
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas {
            x_min: X_MIN,
            x_max: X_MAX,
            y_min: Y_MIN,
            y_max: Y_MAX,
        }
    }
}

/// Static description of a sprite, sent once so the UI can draw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpriteInfo {
    pub name: String,
    /// `(width, height)` per costume.
    pub costumes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        game: String,
        fps: u32,
        canvas: Canvas,
        sprites: Vec<SpriteInfo>,
    },
    Frame {
        tick: u64,
        sprites: Vec<SpriteState>,
        globals: Vec<f64>,
        game_over: bool,
        covered: usize,
        statements: usize,
        snapshots: usize,
    },
    SessionEnd {
        reason: EndReason,
        ticks: u64,
        snapshots: usize,
    },
    Error {
        message: String,
    },
}

impl ServerMessage {
    pub fn hello(spec: &GameSpec, fps: u32) -> Self {
        ServerMessage::Hello {
            game: spec.id.clone(),
            fps,
            canvas: Canvas::default(),
            sprites: spec
                .sprites
                .iter()
                .map(|s| SpriteInfo {
                    name: s.name.clone(),
                    costumes: s.costumes.iter().map(|c| (c.width, c.height)).collect(),
                })
                .collect(),
        }
    }

    pub fn frame(state: &GameState, covered: usize, statements: usize, snapshots: usize) -> Self {
        ServerMessage::Frame {
            tick: state.tick,
            sprites: state.sprites.clone(),
            globals: state.globals.clone(),
            game_over: state.game_over,
            covered,
            statements,
            snapshots,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolError {
    Malformed(String),
    Version(Option<u64>),
}

impl std::fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProtocolError::Malformed(m) => write!(f, "malformed message: {m}"),
            ProtocolError::Version(Some(v)) => write!(f, "unsupported protocol version {v}, expected {PROTOCOL_VERSION}"),
            ProtocolError::Version(None) => write!(f, "message has no protocol version"),
        }
    }
}

impl std::error::Error for ProtocolError {}

fn encode_value<T: Serialize>(msg: &T) -> String {
    let mut value = serde_json::to_value(msg).expect("messages serialize");
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("v".into(), PROTOCOL_VERSION.into());
    }
    value.to_string()
}

fn decode_value<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ProtocolError> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let map = value
        .as_object_mut()
        .ok_or_else(|| ProtocolError::Malformed("expected a JSON object".into()))?;
    match map.remove("v").and_then(|v| v.as_u64()) {
        Some(v) if v == PROTOCOL_VERSION as u64 => {}
        other => return Err(ProtocolError::Version(other)),
    }
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

pub fn encode_server(msg: &ServerMessage) -> String {
    encode_value(msg)
}

pub fn decode_server(text: &str) -> Result<ServerMessage, ProtocolError> {
    decode_value(text)
}

pub fn encode_client(msg: &ClientMessage) -> String {
    encode_value(msg)
}

pub fn decode_client(text: &str) -> Result<ClientMessage, ProtocolError> {
    decode_value(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use neatrace_core::engine::{BuiltinGame, Key};

    #[test]
    fn client_messages_round_trip() {
        let msgs = [
            ClientMessage::Start { seed: Some(3) },
            ClientMessage::Start { seed: None },
            ClientMessage::Input {
                event: InputEvent::KeyDown(Key::Left),
            },
            ClientMessage::Input {
                event: InputEvent::MouseMove { x: -240.0, y: 180.0 },
            },
            ClientMessage::Stop,
        ];
        for m in msgs {
            let text = encode_client(&m);
            assert!(text.contains("\"v\":1"));
            assert_eq!(decode_client(&text).unwrap(), m);
        }
    }

    #[test]
    fn documented_examples_parse() {
        assert_eq!(
            decode_client(r#"{"v":1,"type":"input","event":{"key_down":"left"}}"#).unwrap(),
            ClientMessage::Input {
                event: InputEvent::KeyDown(Key::Left)
            }
        );
        assert_eq!(
            decode_client(r#"{"v":1,"type":"start"}"#).unwrap(),
            ClientMessage::Start { seed: None }
        );
    }

    #[test]
    fn version_is_enforced() {
        assert_eq!(decode_client(r#"{"v":2,"type":"stop"}"#), Err(ProtocolError::Version(Some(2))));
        assert_eq!(decode_client(r#"{"type":"stop"}"#), Err(ProtocolError::Version(None)));
        assert!(matches!(decode_client("[1]"), Err(ProtocolError::Malformed(_))));
        assert!(matches!(decode_client(r#"{"v":1,"type":"jump"}"#), Err(ProtocolError::Malformed(_))));
    }

    #[test]
    fn server_messages_round_trip() {
        let spec = BuiltinGame::PaddleBall.spec();
        let hello = ServerMessage::hello(&spec, 30);
        assert_eq!(decode_server(&encode_server(&hello)).unwrap(), hello);
        let end = ServerMessage::SessionEnd {
            reason: EndReason::GameOver,
            ticks: 10,
            snapshots: 2,
        };
        assert_eq!(decode_server(&encode_server(&end)).unwrap(), end);
    }
}
