//! Serves one play UI connection over a WebSocket, ticking the bridge at a
//! fixed frame rate.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use log::{info, warn};
use neatrace_core::dataset::TrainingDataset;
use tungstenite::{Message, WebSocket};

use crate::bridge::Bridge;
use crate::protocol::{decode_client, encode_server, ServerMessage};

#[derive(Debug)]
pub enum ServeError {
    Io(std::io::Error),
    Handshake(String),
    Core(neatrace_core::Error),
}

impl std::fmt::Display for ServeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ServeError::Io(e) => write!(f, "i/o error: {e}"),
            ServeError::Handshake(e) => write!(f, "websocket handshake failed: {e}"),
            ServeError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ServeError {}

impl From<std::io::Error> for ServeError {
    fn from(e: std::io::Error) -> Self {
        ServeError::Io(e)
    }
}

impl From<neatrace_core::Error> for ServeError {
    fn from(e: neatrace_core::Error) -> Self {
        ServeError::Core(e)
    }
}

fn send(ws: &mut WebSocket<TcpStream>, msgs: Vec<ServerMessage>) -> Result<(), tungstenite::Error> {
    for m in msgs {
        ws.send(Message::Text(encode_server(&m)))?;
    }
    Ok(())
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

/// Accepts a single client on `listener` and records until it disconnects.
/// Returns the dataset with any open session closed as a player stop.
pub fn serve_one(listener: &TcpListener, mut bridge: Bridge, fps: u32) -> Result<TrainingDataset, ServeError> {
    let (stream, peer) = listener.accept()?;
    info!("client connected from {peer}");
    let frame = Duration::from_secs_f64(1.0 / fps.max(1) as f64);
    stream.set_read_timeout(Some(Duration::from_millis(2)))?;
    stream.set_nodelay(true)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| ServeError::Handshake(e.to_string()))?;
    let mut next_tick = Instant::now() + frame;
    let outcome = (|| -> Result<(), ServeError> {
        if let Err(e) = send(&mut ws, vec![bridge.hello()]) {
            warn!("send failed: {e}");
            return Ok(());
        }
        loop {
            match ws.read() {
                Ok(Message::Text(text)) => {
                    let replies = match decode_client(&text) {
                        Ok(msg) => bridge.handle(msg)?,
                        Err(e) => vec![ServerMessage::Error { message: e.to_string() }],
                    };
                    if send(&mut ws, replies).is_err() {
                        return Ok(());
                    }
                }
                Ok(Message::Close(_)) => return Ok(()),
                Ok(_) => {}
                Err(e) if is_timeout(&e) => {}
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
                Err(e) => {
                    warn!("connection dropped: {e}");
                    return Ok(());
                }
            }
            let now = Instant::now();
            if now >= next_tick {
                next_tick += frame;
                if next_tick < now {
                    next_tick = now + frame;
                }
                let frames = bridge.tick()?;
                if send(&mut ws, frames).is_err() {
                    return Ok(());
                }
            }
        }
    })();
    outcome?;
    info!("client disconnected");
    Ok(bridge.finish()?)
}
