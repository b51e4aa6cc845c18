use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::{Key, X_MAX, X_MIN, Y_MAX, Y_MIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpriteState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub costume: usize,
    pub size: f64,
    pub variables: Vec<f64>,
    pub visible: bool,
}

impl SpriteState {
    pub(crate) fn clamp_position(&mut self) {
        self.x = self.x.clamp(X_MIN, X_MAX);
        self.y = self.y.clamp(Y_MIN, Y_MAX);
    }
}

/// Maps any angle into `[-180, 180)`.
pub fn normalize_heading(h: f64) -> f64 {
    (h + 180.0).rem_euclid(360.0) - 180.0
}

/// Complete dynamic state of a running game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub sprites: Vec<SpriteState>,
    pub globals: Vec<f64>,
    pub mouse: (f64, f64),
    pub keys_down: [bool; 5],
    pub tick: u64,
    pub game_over: bool,
    pub(crate) rng: ChaCha8Rng,
}

impl GameState {
    pub fn key_down(&self, key: Key) -> bool {
        self.keys_down[key.index()]
    }

    /// Canonical byte encoding. Field order: tick (u64 LE), game_over (u8),
    /// mouse x, mouse y (f64 LE bits), key flags (5 × u8 in `Key::ALL`
    /// order), sprite count (u32 LE) and per sprite x, y, heading (f64),
    /// costume (u64), size (f64), visible (u8), variable count (u32) and
    /// values (f64); global count (u32) and values (f64); generator seed
    /// (32 bytes), stream (u64) and word position (u128).
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128 + self.sprites.len() * 64);
        out.extend_from_slice(&self.tick.to_le_bytes());
        out.push(self.game_over as u8);
        out.extend_from_slice(&self.mouse.0.to_le_bytes());
        out.extend_from_slice(&self.mouse.1.to_le_bytes());
        out.extend(self.keys_down.iter().map(|&k| k as u8));
        out.extend_from_slice(&(self.sprites.len() as u32).to_le_bytes());
        for s in &self.sprites {
            out.extend_from_slice(&s.x.to_le_bytes());
            out.extend_from_slice(&s.y.to_le_bytes());
            out.extend_from_slice(&s.heading.to_le_bytes());
            out.extend_from_slice(&(s.costume as u64).to_le_bytes());
            out.extend_from_slice(&s.size.to_le_bytes());
            out.push(s.visible as u8);
            out.extend_from_slice(&(s.variables.len() as u32).to_le_bytes());
            for v in &s.variables {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.globals.len() as u32).to_le_bytes());
        for v in &self.globals {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.rng.get_seed());
        out.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        out
    }

    /// SHA-256 of [`GameState::encode`], hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(&self.encode())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
