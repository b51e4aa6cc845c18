//! Scripted players that stand in for human demonstrations, and a driver
//! that records them into a dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{ActionKind, ActionSchema};
use crate::dataset::{EndReason, RecorderConfig, TrainingDataset};
use crate::engine::{BuiltinGame, Game, GameState, InputEvent, Key, X_MAX, X_MIN, Y_MAX, Y_MIN};
use crate::error::{Error, Result};
use crate::recorder::Recorder;

/// Produces the input events for each tick from the visible game state.
pub trait Policy {
    fn act(&mut self, state: &GameState) -> Vec<InputEvent>;

    /// Called when a new session starts.
    fn reset(&mut self) {}
}

/// Tracks the ball with short mouse glides, then holds still.
#[derive(Debug, Clone, Default)]
pub struct PaddleExpert {
    path: Vec<f64>,
    hold: u32,
}

impl PaddleExpert {
    const PADDLE: usize = 0;
    const BALL: usize = 1;
    const GLIDE: usize = 3;
    const HOLD: u32 = 6;
    const SLACK: f64 = 25.0;
}

impl Policy for PaddleExpert {
    fn act(&mut self, state: &GameState) -> Vec<InputEvent> {
        if let Some(x) = self.path.pop() {
            if self.path.is_empty() {
                self.hold = Self::HOLD;
            }
            return vec![InputEvent::MouseMove { x, y: 0.0 }];
        }
        if self.hold > 0 {
            self.hold -= 1;
            return Vec::new();
        }
        let ball = state.sprites[Self::BALL].x;
        let paddle = state.sprites[Self::PADDLE].x;
        if (ball - paddle).abs() > Self::SLACK {
            let target = ball.clamp(X_MIN, X_MAX);
            let from = state.mouse.0;
            // Stored in reverse so pop() walks the glide forwards.
            self.path = (1..=Self::GLIDE)
                .rev()
                .map(|i| from + (target - from) * i as f64 / Self::GLIDE as f64)
                .collect();
            return self.act(state);
        }
        Vec::new()
    }

    fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Presses towards the fruit long enough to end up underneath it.
#[derive(Debug, Clone, Default)]
pub struct FruitExpert {
    held: Option<(Key, u32)>,
}

impl FruitExpert {
    const BOWL: usize = 0;
    const FRUIT: usize = 1;
    const SPEED: f64 = 8.0;
}

impl Policy for FruitExpert {
    fn act(&mut self, state: &GameState) -> Vec<InputEvent> {
        if let Some((key, left)) = self.held {
            if left <= 1 {
                self.held = None;
                return vec![InputEvent::KeyUp(key)];
            }
            self.held = Some((key, left - 1));
            return Vec::new();
        }
        let dx = state.sprites[Self::FRUIT].x - state.sprites[Self::BOWL].x;
        if dx.abs() < Self::SPEED {
            return Vec::new();
        }
        let key = if dx > 0.0 { Key::Right } else { Key::Left };
        let ticks = ((dx.abs() / Self::SPEED).ceil() as u32).clamp(1, 30);
        self.held = Some((key, ticks));
        vec![InputEvent::KeyDown(key)]
    }

    fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Uniformly random actions from the game's action set.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    actions: ActionSchema,
    rng: ChaCha8Rng,
    release: Option<(Key, u32)>,
    wait: u32,
}

impl RandomPolicy {
    pub fn new(game: &Game, seed: u64) -> Self {
        RandomPolicy {
            actions: ActionSchema::for_game(game),
            rng: ChaCha8Rng::seed_from_u64(seed),
            release: None,
            wait: 0,
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _: &GameState) -> Vec<InputEvent> {
        if let Some((key, left)) = self.release {
            if left <= 1 {
                self.release = None;
                return vec![InputEvent::KeyUp(key)];
            }
            self.release = Some((key, left - 1));
            return Vec::new();
        }
        if self.wait > 0 {
            self.wait -= 1;
            return Vec::new();
        }
        let kind = self.actions.actions[self.rng.gen_range(0..self.actions.len())];
        let x = self.rng.gen_range(X_MIN..=X_MAX);
        let y = self.rng.gen_range(Y_MIN..=Y_MAX);
        match kind {
            ActionKind::KeyPress(k) => {
                self.release = Some((k, self.rng.gen_range(1..=self.actions.d_max)));
                vec![InputEvent::KeyDown(k)]
            }
            ActionKind::MouseMove => vec![InputEvent::MouseMove { x, y }],
            ActionKind::MouseClick => vec![InputEvent::MouseClick { x, y }],
            ActionKind::NoOp => {
                self.wait = self.rng.gen_range(1..=self.actions.w_max) - 1;
                Vec::new()
            }
        }
    }
}

/// The scripted expert for a built-in game, if there is one.
pub fn expert_for(game: BuiltinGame) -> Result<Box<dyn Policy + Send>> {
    match game {
        BuiltinGame::PaddleBall => Ok(Box::new(PaddleExpert::default())),
        BuiltinGame::FruitCatch => Ok(Box::new(FruitExpert::default())),
        other => Err(Error::Config(format!("no scripted expert for {other}"))),
    }
}

/// Plays sessions with seeds `first_seed, first_seed + 1, …` until
/// `total_ticks` have been played. A session ends at game over, or with a
/// player stop when the tick budget runs out.
pub fn record_policy(
    game: &Game,
    policy: &mut dyn Policy,
    config: RecorderConfig,
    total_ticks: u64,
    first_seed: u64,
) -> Result<TrainingDataset> {
    let mut rec = Recorder::new(game.clone(), config)?;
    let mut played = 0;
    let mut seed = first_seed;
    while played < total_ticks {
        policy.reset();
        rec.begin_session(seed)?;
        seed += 1;
        let reason = loop {
            if rec.is_game_over() {
                break EndReason::GameOver;
            }
            if played >= total_ticks {
                break EndReason::PlayerStop;
            }
            let events = policy.act(rec.state().expect("active session"));
            rec.tick(&events)?;
            played += 1;
        };
        rec.end_session(reason)?;
    }
    Ok(rec.into_dataset())
}
