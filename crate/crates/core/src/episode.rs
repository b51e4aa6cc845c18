//! Executes action labels on a game instance: a network (or any label
//! source) chooses an action, the action plays out over its duration, and
//! the loop repeats until game over or the tick cap.

use crate::action::{ActionLabel, ActionSchema};
use crate::engine::{GameInstance, InputEvent};
use crate::error::Result;
use crate::features::FeatureSchema;
use crate::network::{decode_action, Network};

/// Plays one action. A key press holds the key for its duration; the
/// release is left in `pending` and sent with the next step.
pub fn execute(inst: &mut GameInstance, label: &ActionLabel, pending: &mut Vec<InputEvent>, cap: u64) -> Result<()> {
    let mut first = std::mem::take(pending);
    first.push(label.onset_event());
    let ticks = label.duration().max(1);
    for i in 0..ticks {
        if inst.is_game_over() || inst.tick() >= cap {
            break;
        }
        if i == 0 {
            inst.step(&first)?;
        } else {
            inst.step(&[])?;
        }
    }
    if let ActionLabel::KeyPress { key, .. } = *label {
        pending.push(InputEvent::KeyUp(key));
    }
    Ok(())
}

/// Drives `inst` with labels from `choose` until game over or `cap` ticks.
/// Returns the number of ticks played.
pub fn run_with<F>(inst: &mut GameInstance, cap: u64, mut choose: F) -> Result<u64>
where
    F: FnMut(&GameInstance) -> Result<ActionLabel>,
{
    let start = inst.tick();
    let mut pending = Vec::new();
    while !inst.is_game_over() && inst.tick() < cap {
        let label = choose(inst)?;
        execute(inst, &label, &mut pending, cap)?;
    }
    Ok(inst.tick() - start)
}

/// Runs a network as the input generator.
pub fn run_network(
    inst: &mut GameInstance,
    net: &Network,
    weights: &[f64],
    features: &FeatureSchema,
    actions: &ActionSchema,
    cap: u64,
) -> Result<u64> {
    let mut x = Vec::with_capacity(features.len());
    let mut scratch = Vec::new();
    run_with(inst, cap, |inst| {
        features.extract_into(inst.state(), &mut x);
        let pred = net.predict(weights, &x, &mut scratch)?;
        Ok(decode_action(&pred, actions))
    })
}
