//! Game-specific action sets, action labels and their parameter
//! normalisation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{Game, InputEvent, InputKind, Key, X_MAX, X_MIN, Y_MAX, Y_MIN};
use crate::features::{denormalize, normalize};

pub const DEFAULT_D_MAX: u32 = 30;
pub const DEFAULT_W_MAX: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    KeyPress(Key),
    MouseMove,
    MouseClick,
    NoOp,
}

impl ActionKind {
    /// Number of regression parameters the action carries.
    pub fn param_count(self) -> usize {
        match self {
            ActionKind::KeyPress(_) | ActionKind::NoOp => 1,
            ActionKind::MouseMove | ActionKind::MouseClick => 2,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::KeyPress(k) => write!(f, "key_press({k})"),
            ActionKind::MouseMove => f.write_str("mouse_move"),
            ActionKind::MouseClick => f.write_str("mouse_click"),
            ActionKind::NoOp => f.write_str("no_op"),
        }
    }
}

/// A recorded or decoded player action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum ActionLabel {
    KeyPress { key: Key, duration: u32 },
    MouseMove { x: f64, y: f64 },
    MouseClick { x: f64, y: f64 },
    NoOp { duration: u32 },
}

impl ActionLabel {
    pub fn kind(&self) -> ActionKind {
        match *self {
            ActionLabel::KeyPress { key, .. } => ActionKind::KeyPress(key),
            ActionLabel::MouseMove { .. } => ActionKind::MouseMove,
            ActionLabel::MouseClick { .. } => ActionKind::MouseClick,
            ActionLabel::NoOp { .. } => ActionKind::NoOp,
        }
    }

    pub fn is_noop(&self) -> bool {
        matches!(self, ActionLabel::NoOp { .. })
    }

    /// Ticks the action occupies when executed.
    pub fn duration(&self) -> u32 {
        match *self {
            ActionLabel::KeyPress { duration, .. } | ActionLabel::NoOp { duration } => duration,
            ActionLabel::MouseMove { .. } | ActionLabel::MouseClick { .. } => 1,
        }
    }

    /// The engine event that starts this action.
    pub fn onset_event(&self) -> InputEvent {
        match *self {
            ActionLabel::KeyPress { key, .. } => InputEvent::KeyDown(key),
            ActionLabel::MouseMove { x, y } => InputEvent::MouseMove { x, y },
            ActionLabel::MouseClick { x, y } => InputEvent::MouseClick { x, y },
            ActionLabel::NoOp { duration } => InputEvent::NoOp { duration },
        }
    }
}

/// The actions available in one game, in a fixed order: key presses by key,
/// then mouse move, mouse click, and the no-op.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub actions: Vec<ActionKind>,
    pub d_max: u32,
    pub w_max: u32,
}

impl ActionSchema {
    pub fn new(mut actions: Vec<ActionKind>, d_max: u32, w_max: u32) -> Self {
        actions.sort();
        actions.dedup();
        ActionSchema { actions, d_max, w_max }
    }

    pub fn for_game(game: &Game) -> Self {
        Self::with_limits(game, DEFAULT_D_MAX, DEFAULT_W_MAX)
    }

    pub fn with_limits(game: &Game, d_max: u32, w_max: u32) -> Self {
        let mut actions: Vec<ActionKind> = game
            .spec()
            .input_handlers()
            .into_iter()
            .map(|k| match k {
                InputKind::Key(k) => ActionKind::KeyPress(k),
                InputKind::MouseMove => ActionKind::MouseMove,
                InputKind::MouseClick => ActionKind::MouseClick,
            })
            .collect();
        actions.push(ActionKind::NoOp);
        Self::new(actions, d_max, w_max)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn index_of(&self, kind: ActionKind) -> Option<usize> {
        self.actions.iter().position(|&a| a == kind)
    }

    /// Regression targets for `label` in `[-1, 1]`, in head order.
    pub fn normalize_params(&self, label: &ActionLabel) -> Vec<f64> {
        match *label {
            ActionLabel::KeyPress { duration, .. } => {
                vec![normalize(duration as f64, 1.0, self.d_max as f64)]
            }
            ActionLabel::NoOp { duration } => vec![normalize(duration as f64, 1.0, self.w_max as f64)],
            ActionLabel::MouseMove { x, y } | ActionLabel::MouseClick { x, y } => {
                vec![normalize(x, X_MIN, X_MAX), normalize(y, Y_MIN, Y_MAX)]
            }
        }
    }

    /// Builds the label for `kind` from regression outputs in `[-1, 1]`.
    pub fn denormalize(&self, kind: ActionKind, params: &[f64]) -> ActionLabel {
        let p = |i: usize| params.get(i).copied().unwrap_or(0.0);
        let ticks = |v: f64, max: u32| denormalize(v, 1.0, max.max(1) as f64).round().max(1.0) as u32;
        match kind {
            ActionKind::KeyPress(key) => ActionLabel::KeyPress {
                key,
                duration: ticks(p(0), self.d_max),
            },
            ActionKind::NoOp => ActionLabel::NoOp {
                duration: ticks(p(0), self.w_max),
            },
            ActionKind::MouseMove => ActionLabel::MouseMove {
                x: denormalize(p(0), X_MIN, X_MAX),
                y: denormalize(p(1), Y_MIN, Y_MAX),
            },
            ActionKind::MouseClick => ActionLabel::MouseClick {
                x: denormalize(p(0), X_MIN, X_MAX),
                y: denormalize(p(1), Y_MIN, Y_MAX),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::BuiltinGame;

    fn schema(g: BuiltinGame) -> ActionSchema {
        ActionSchema::for_game(&Game::new(g.spec()).unwrap())
    }

    #[test]
    fn action_sets_follow_input_handlers() {
        assert_eq!(
            schema(BuiltinGame::PaddleBall).actions,
            vec![ActionKind::MouseMove, ActionKind::NoOp]
        );
        assert_eq!(
            schema(BuiltinGame::FruitCatch).actions,
            vec![
                ActionKind::KeyPress(Key::Left),
                ActionKind::KeyPress(Key::Right),
                ActionKind::NoOp
            ]
        );
        let dot = schema(BuiltinGame::DotChase).actions;
        assert_eq!(
            dot,
            vec![ActionKind::KeyPress(Key::Space), ActionKind::MouseClick, ActionKind::NoOp]
        );
    }

    #[test]
    fn key_only_games_have_no_mouse_actions() {
        for g in [BuiltinGame::FlapBird, BuiltinGame::FruitCatch, BuiltinGame::SnakeGrid] {
            assert!(schema(g)
                .actions
                .iter()
                .all(|a| !matches!(a, ActionKind::MouseMove | ActionKind::MouseClick)));
        }
    }

    #[test]
    fn params_round_trip() {
        let s = schema(BuiltinGame::PaddleBall);
        for label in [
            ActionLabel::MouseMove { x: 240.0, y: -180.0 },
            ActionLabel::MouseMove { x: -12.5, y: 30.0 },
            ActionLabel::NoOp { duration: 60 },
            ActionLabel::NoOp { duration: 1 },
            ActionLabel::KeyPress {
                key: Key::Left,
                duration: 17,
            },
        ] {
            let p = s.normalize_params(&label);
            let back = s.denormalize(label.kind(), &p);
            match (label, back) {
                (ActionLabel::MouseMove { x, y }, ActionLabel::MouseMove { x: bx, y: by }) => {
                    assert!((x - bx).abs() < 1e-9 && (y - by).abs() < 1e-9);
                }
                _ => assert_eq!(label, back),
            }
        }
    }

    #[test]
    fn durations_clamp_to_range() {
        let s = schema(BuiltinGame::FruitCatch);
        let k = ActionKind::KeyPress(Key::Left);
        assert_eq!(s.denormalize(k, &[1.0]).duration(), 30);
        assert_eq!(s.denormalize(k, &[-1.0]).duration(), 1);
        assert_eq!(s.denormalize(ActionKind::NoOp, &[5.0]).duration(), 60);
    }
}
