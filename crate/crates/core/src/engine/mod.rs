//! Deterministic, seedable toy games with statement-level instrumentation.
//!
//! A game is a [`GameSpec`]: sprites, variables and block-structured
//! scripts. [`Game`] validates and compiles it; [`GameInstance`] runs one
//! seeded execution, tracking statement coverage and the best branch
//! distance seen for every predicate so the search can compute approach
//! level and branch distance towards any target statement.
//!
//! All randomness in an instance flows through one seeded generator, so
//! equal seeds and equal input sequences give bit-identical executions.

pub mod builder;
mod cdg;
pub mod games;
mod instance;
mod program;
mod spec;
mod state;

pub use cdg::{CdgNode, ControlDependenceGraph, EdgeKind};
pub use games::BuiltinGame;
pub use instance::{
    compare_distance, load_game, normalize_distance, CoverageSet, Game, GameInstance, InputEvent,
    TimedEvent,
};
pub use program::Program;
pub use spec::*;
pub use state::{normalize_heading, GameState, SpriteState};
pub(crate) use state::hex_digest as state_hex_digest;

/// Logical ticks per second at normal speed.
pub const TICKS_PER_SECOND: u32 = 30;
