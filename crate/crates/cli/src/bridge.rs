//! Transport-free session logic for the play UI: turns client messages and
//! clock ticks into recorder calls and server messages.

use std::mem;

use neatrace_core::dataset::{EndReason, RecorderConfig, TrainingDataset};
use neatrace_core::engine::{Game, InputEvent};
use neatrace_core::recorder::Recorder;
use neatrace_core::Result;

use crate::protocol::{ClientMessage, ServerMessage};

pub struct Bridge {
    rec: Recorder,
    pending: Vec<InputEvent>,
    next_seed: u64,
    fps: u32,
}

impl Bridge {
    pub fn new(game: Game, config: RecorderConfig, first_seed: u64, fps: u32) -> Result<Bridge> {
        Ok(Bridge {
            rec: Recorder::new(game, config)?,
            pending: Vec::new(),
            next_seed: first_seed,
            fps,
        })
    }

    pub fn hello(&self) -> ServerMessage {
        ServerMessage::hello(self.rec.game().spec(), self.fps)
    }

    pub fn is_active(&self) -> bool {
        self.rec.is_active()
    }

    pub fn dataset(&self) -> &TrainingDataset {
        self.rec.dataset()
    }

    fn error(message: impl Into<String>) -> Vec<ServerMessage> {
        vec![ServerMessage::Error { message: message.into() }]
    }

    fn frame(&self) -> ServerMessage {
        let inst = self.rec.instance().expect("active session");
        ServerMessage::frame(
            inst.state(),
            inst.covered_count(),
            self.rec.game().statement_count(),
            self.rec.snapshots().len(),
        )
    }

    fn end(&mut self, reason: EndReason) -> Result<ServerMessage> {
        self.pending.clear();
        let session = self.rec.end_session(reason)?;
        Ok(ServerMessage::SessionEnd {
            reason,
            ticks: session.duration_ticks,
            snapshots: session.snapshots.len(),
        })
    }

    /// Applies one client message. Protocol misuse is reported to the
    /// client rather than failing the bridge.
    pub fn handle(&mut self, msg: ClientMessage) -> Result<Vec<ServerMessage>> {
        match msg {
            ClientMessage::Start { seed } => {
                if self.is_active() {
                    return Ok(Self::error("a session is already active"));
                }
                let seed = seed.unwrap_or(self.next_seed);
                self.next_seed = seed.wrapping_add(1);
                self.rec.begin_session(seed)?;
                Ok(vec![self.frame()])
            }
            ClientMessage::Input { event } => {
                if !self.is_active() {
                    Ok(Self::error("no active session"))
                } else if !event.in_bounds() {
                    Ok(Self::error(format!("event out of canvas bounds: {event:?}")))
                } else {
                    self.pending.push(event);
                    Ok(Vec::new())
                }
            }
            ClientMessage::Stop => {
                if !self.is_active() {
                    return Ok(Self::error("no active session"));
                }
                Ok(vec![self.end(EndReason::PlayerStop)?])
            }
        }
    }

    /// Advances the active session by one tick with the inputs received
    /// since the previous tick.
    pub fn tick(&mut self) -> Result<Vec<ServerMessage>> {
        if !self.is_active() {
            return Ok(Vec::new());
        }
        let events = mem::take(&mut self.pending);
        self.rec.tick(&events)?;
        let mut out = vec![self.frame()];
        if self.rec.is_game_over() {
            out.push(self.end(EndReason::GameOver)?);
        }
        Ok(out)
    }

    /// Closes any open session as a player stop and returns the dataset.
    pub fn finish(mut self) -> Result<TrainingDataset> {
        if self.is_active() {
            self.end(EndReason::PlayerStop)?;
        }
        Ok(self.rec.into_dataset())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use neatrace_core::engine::{BuiltinGame, Key};

    fn bridge_for(g: BuiltinGame) -> Bridge {
        let game = Game::new(g.spec()).unwrap();
        Bridge::new(game, RecorderConfig::with_delta_t(Some(10)), 1, 30).unwrap()
    }

    fn bridge() -> Bridge {
        bridge_for(BuiltinGame::PaddleBall)
    }

    #[test]
    fn inputs_before_start_are_rejected() {
        let mut b = bridge();
        let out = b
            .handle(ClientMessage::Input {
                event: InputEvent::KeyDown(Key::Left),
            })
            .unwrap();
        assert!(matches!(out[..], [ServerMessage::Error { .. }]));
        assert!(b.tick().unwrap().is_empty());
    }

    #[test]
    fn session_records_snapshots() {
        let mut b = bridge_for(BuiltinGame::FruitCatch);
        let out = b.handle(ClientMessage::Start { seed: Some(5) }).unwrap();
        assert!(matches!(out[..], [ServerMessage::Frame { tick: 0, .. }]));
        assert!(matches!(
            b.handle(ClientMessage::Start { seed: None }).unwrap()[..],
            [ServerMessage::Error { .. }]
        ));
        b.handle(ClientMessage::Input {
            event: InputEvent::KeyDown(Key::Left),
        })
        .unwrap();
        for _ in 0..5 {
            b.tick().unwrap();
        }
        b.handle(ClientMessage::Input {
            event: InputEvent::KeyUp(Key::Left),
        })
        .unwrap();
        for _ in 0..5 {
            b.tick().unwrap();
        }
        let end = b.handle(ClientMessage::Stop).unwrap();
        assert!(matches!(
            end[..],
            [ServerMessage::SessionEnd {
                reason: EndReason::PlayerStop,
                ticks: 10,
                ..
            }]
        ));
        let ds = b.finish().unwrap();
        assert_eq!(ds.sessions.len(), 1);
        assert_eq!(ds.sessions[0].seed, 5);
        assert!(ds.snapshot_count() >= 1, "the key press is recorded");
    }

    #[test]
    fn out_of_bounds_events_are_dropped() {
        let mut b = bridge();
        b.handle(ClientMessage::Start { seed: None }).unwrap();
        let out = b
            .handle(ClientMessage::Input {
                event: InputEvent::MouseMove { x: 999.0, y: 0.0 },
            })
            .unwrap();
        assert!(matches!(out[..], [ServerMessage::Error { .. }]));
        b.tick().unwrap();
    }

    #[test]
    fn game_over_ends_session() {
        let mut b = bridge();
        b.handle(ClientMessage::Start { seed: Some(1) }).unwrap();
        let mut ended = false;
        for _ in 0..20_000 {
            let out = b.tick().unwrap();
            if out.iter().any(|m| matches!(m, ServerMessage::SessionEnd { reason: EndReason::GameOver, .. })) {
                ended = true;
                break;
            }
        }
        assert!(ended, "an idle player eventually loses");
        assert!(!b.is_active());
        assert_eq!(b.finish().unwrap().sessions[0].end_reason, EndReason::GameOver);
    }
}
