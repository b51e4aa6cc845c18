//! Turns a stream of player inputs into labelled snapshots.
//!
//! Key presses are labelled with their held duration, mouse movements once
//! the pointer has rested for a few ticks, and idle stretches become no-op
//! labels when they exceed the configured threshold.

use serde::{Deserialize, Serialize};

use crate::action::{ActionKind, ActionLabel, ActionSchema};
use crate::dataset::{EndReason, RecorderConfig, RecordingSession, Snapshot, TrainingDataset};
use crate::engine::{Game, GameInstance, GameState, InputEvent, Key, TimedEvent};
use crate::error::{Error, Result};
use crate::features::{feature_schema, FeatureSchema, FeatureVector};

#[derive(Debug, Clone)]
struct PendingMove {
    onset: u64,
    features: FeatureVector,
    last: u64,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone)]
struct Session {
    instance: GameInstance,
    seed: u64,
    /// Tick of the last emission and the features saved then.
    t0: u64,
    saved: FeatureVector,
    keys: [Option<(u64, FeatureVector)>; 5],
    mouse: Option<PendingMove>,
    snapshots: Vec<Snapshot>,
    log: Vec<TimedEvent>,
    queued: Vec<InputEvent>,
}

impl Session {
    fn idle(&self) -> bool {
        self.mouse.is_none() && self.keys.iter().all(Option::is_none)
    }
}

/// Records sessions of one game into a dataset.
#[derive(Debug, Clone)]
pub struct Recorder {
    game: Game,
    features: FeatureSchema,
    actions: ActionSchema,
    config: RecorderConfig,
    session: Option<Session>,
    dataset: TrainingDataset,
}

/// Summary of a recorder's live session, for the UI bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub tick: u64,
    pub snapshots: usize,
    pub game_over: bool,
}

impl Recorder {
    pub fn new(game: Game, config: RecorderConfig) -> Result<Recorder> {
        config.validate()?;
        let features = feature_schema(&game);
        let actions = ActionSchema::with_limits(&game, config.d_max, config.w_max);
        let dataset = TrainingDataset::new(game.id(), config, &features.fingerprint());
        Ok(Recorder {
            game,
            features,
            actions,
            config,
            session: None,
            dataset,
        })
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn config(&self) -> &RecorderConfig {
        &self.config
    }

    pub fn feature_schema(&self) -> &FeatureSchema {
        &self.features
    }

    pub fn action_schema(&self) -> &ActionSchema {
        &self.actions
    }

    pub fn dataset(&self) -> &TrainingDataset {
        &self.dataset
    }

    pub fn into_dataset(self) -> TrainingDataset {
        self.dataset
    }

    pub fn is_active(&self) -> bool {
        self.session.is_some()
    }

    pub fn begin_session(&mut self, seed: u64) -> Result<()> {
        if self.session.is_some() {
            return Err(Error::SessionActive);
        }
        let instance = self.game.instance(seed);
        let saved = self.features.extract(instance.state());
        self.session = Some(Session {
            instance,
            seed,
            t0: 0,
            saved,
            keys: Default::default(),
            mouse: None,
            snapshots: Vec::new(),
            log: Vec::new(),
            queued: Vec::new(),
        });
        Ok(())
    }

    fn active(&mut self) -> Result<&mut Session> {
        self.session.as_mut().ok_or(Error::NoSession)
    }

    pub fn state(&self) -> Option<&GameState> {
        self.session.as_ref().map(|s| s.instance.state())
    }

    pub fn instance(&self) -> Option<&GameInstance> {
        self.session.as_ref().map(|s| &s.instance)
    }

    pub fn tick_count(&self) -> Option<u64> {
        self.state().map(|s| s.tick)
    }

    pub fn is_game_over(&self) -> bool {
        self.session.as_ref().is_some_and(|s| s.instance.is_game_over())
    }

    pub fn status(&self) -> Option<SessionStatus> {
        self.session.as_ref().map(|s| SessionStatus {
            tick: s.instance.tick(),
            snapshots: s.snapshots.len(),
            game_over: s.instance.is_game_over(),
        })
    }

    /// Snapshots recorded so far in the active session.
    pub fn snapshots(&self) -> &[Snapshot] {
        self.session.as_ref().map(|s| s.snapshots.as_slice()).unwrap_or(&[])
    }

    fn emit(&mut self, onset: u64, features: FeatureVector, label: ActionLabel) -> Snapshot {
        let s = self.session.as_mut().expect("active session");
        let tick = s.instance.tick();
        let snap = Snapshot {
            tick: onset,
            emitted: tick,
            features,
            label,
        };
        s.snapshots.push(snap.clone());
        s.t0 = tick;
        s.saved = self.features.extract(s.instance.state());
        snap
    }

    fn now_features(&self) -> FeatureVector {
        let s = self.session.as_ref().expect("active session");
        self.features.extract(s.instance.state())
    }

    fn queue(&mut self, event: InputEvent) -> Result<()> {
        let s = self.active()?;
        if s.instance.is_game_over() {
            return Err(Error::Terminal);
        }
        if !event.in_bounds() {
            let (InputEvent::MouseMove { x, y } | InputEvent::MouseClick { x, y }) = event else {
                unreachable!()
            };
            return Err(Error::OutOfBounds { x, y });
        }
        let tick = s.instance.tick();
        s.log.push(TimedEvent { tick, event });
        s.queued.push(event);
        Ok(())
    }

    /// Emits a no-op for the idle stretch since the last emission if it
    /// exceeds the threshold. Only applies while no action is in progress.
    pub fn maybe_emit_noop(&mut self) -> Result<Option<Snapshot>> {
        let Some(delta) = self.config.delta_t else {
            self.active()?;
            return Ok(None);
        };
        let s = self.active()?;
        if !s.idle() {
            return Ok(None);
        }
        let diff = s.instance.tick() - s.t0;
        if diff > delta as u64 {
            let (onset, features) = (s.t0, s.saved.clone());
            return Ok(Some(self.emit(onset, features, ActionLabel::NoOp { duration: diff as u32 })));
        }
        Ok(None)
    }

    pub fn on_key(&mut self, key: Key, down: bool) -> Result<Vec<Snapshot>> {
        let event = if down { InputEvent::KeyDown(key) } else { InputEvent::KeyUp(key) };
        self.queue(event)?;
        let mut out = Vec::new();
        if self.actions.index_of(ActionKind::KeyPress(key)).is_none() {
            return Ok(out);
        }
        let held = self.active()?.keys[key.index()].clone();
        match (down, held) {
            (true, None) => {
                out.extend(self.maybe_emit_noop()?);
                let f = self.now_features();
                let s = self.active()?;
                let t = s.instance.tick();
                s.keys[key.index()] = Some((t, f));
            }
            (true, Some(_)) => {}
            (false, Some((t, f))) => {
                let s = self.active()?;
                s.keys[key.index()] = None;
                let duration = (s.instance.tick() - t).max(1) as u32;
                out.push(self.emit(t, f, ActionLabel::KeyPress { key, duration }));
            }
            (false, None) => log::warn!("key up for {key} without a matching key down"),
        }
        Ok(out)
    }

    pub fn on_mouse_move(&mut self, x: f64, y: f64) -> Result<Vec<Snapshot>> {
        self.queue(InputEvent::MouseMove { x, y })?;
        let mut out = Vec::new();
        if self.actions.index_of(ActionKind::MouseMove).is_none() {
            return Ok(out);
        }
        if self.active()?.mouse.is_none() {
            out.extend(self.maybe_emit_noop()?);
            let features = self.now_features();
            let s = self.active()?;
            let t = s.instance.tick();
            s.mouse = Some(PendingMove {
                onset: t,
                features,
                last: t,
                x,
                y,
            });
        } else {
            let s = self.active()?;
            let t = s.instance.tick();
            let m = s.mouse.as_mut().expect("pending move");
            m.last = t;
            m.x = x;
            m.y = y;
        }
        Ok(out)
    }

    pub fn on_mouse_click(&mut self, x: f64, y: f64) -> Result<Vec<Snapshot>> {
        self.queue(InputEvent::MouseClick { x, y })?;
        let mut out = Vec::new();
        if self.actions.index_of(ActionKind::MouseClick).is_none() {
            return Ok(out);
        }
        out.extend(self.maybe_emit_noop()?);
        let f = self.now_features();
        let t = self.active()?.instance.tick();
        out.push(self.emit(t, f, ActionLabel::MouseClick { x, y }));
        Ok(out)
    }

    /// Routes one input event to the matching handler.
    pub fn on_event(&mut self, event: InputEvent) -> Result<Vec<Snapshot>> {
        match event {
            InputEvent::KeyDown(k) => self.on_key(k, true),
            InputEvent::KeyUp(k) => self.on_key(k, false),
            InputEvent::MouseMove { x, y } => self.on_mouse_move(x, y),
            InputEvent::MouseClick { x, y } => self.on_mouse_click(x, y),
            InputEvent::NoOp { .. } => Ok(Vec::new()),
        }
    }

    /// Steps the engine with the queued events, then runs the per-tick
    /// checks for the new tick: mouse debounce and the maximum idle wait.
    pub fn advance(&mut self) -> Result<Vec<Snapshot>> {
        let stationary = self.config.mouse_stationary_steps as u64;
        let s = self.active()?;
        let events = std::mem::take(&mut s.queued);
        s.instance.step(&events)?;
        let t = s.instance.tick();

        let mut out = Vec::new();
        if s.mouse.as_ref().is_some_and(|m| t - m.last >= stationary) {
            let m = s.mouse.take().expect("pending move");
            out.push(self.emit(m.onset, m.features, ActionLabel::MouseMove { x: m.x, y: m.y }));
        }
        if self.config.delta_t.is_some() {
            let w_max = self.config.w_max as u64;
            let s = self.active()?;
            if s.idle() && t - s.t0 >= w_max {
                let (onset, features) = (s.t0, s.saved.clone());
                out.push(self.emit(onset, features, ActionLabel::NoOp { duration: w_max as u32 }));
            }
        }
        Ok(out)
    }

    /// Handles all events for the current tick, then advances.
    pub fn tick(&mut self, events: &[InputEvent]) -> Result<Vec<Snapshot>> {
        let mut out = Vec::new();
        for &e in events {
            out.extend(self.on_event(e)?);
        }
        out.extend(self.advance()?);
        Ok(out)
    }

    /// Finalises the session; actions still in progress are dropped.
    pub fn end_session(&mut self, reason: EndReason) -> Result<RecordingSession> {
        let s = self.session.take().ok_or(Error::NoSession)?;
        let session = RecordingSession {
            seed: s.seed,
            end_reason: reason,
            duration_ticks: s.instance.tick(),
            covered: s.instance.covered(),
            snapshots: s.snapshots,
            events: s.log,
        };
        self.dataset.sessions.push(session.clone());
        Ok(session)
    }
}

/// Re-runs a session's raw input log through a fresh recorder.
pub fn replay_session(game: &Game, config: RecorderConfig, session: &RecordingSession) -> Result<RecordingSession> {
    let mut rec = Recorder::new(game.clone(), config)?;
    replay_into(&mut rec, session)
}

fn replay_into(rec: &mut Recorder, session: &RecordingSession) -> Result<RecordingSession> {
    rec.begin_session(session.seed)?;
    let mut events = session.events.iter().peekable();
    let mut batch = Vec::new();
    for t in 0..session.duration_ticks {
        batch.clear();
        while let Some(e) = events.next_if(|e| e.tick == t) {
            batch.push(e.event);
        }
        rec.tick(&batch)?;
    }
    rec.end_session(session.end_reason)
}

/// Rebuilds every session of `dataset` under a different recorder
/// configuration, e.g. another no-op threshold.
pub fn rederive(game: &Game, dataset: &TrainingDataset, config: RecorderConfig) -> Result<TrainingDataset> {
    if dataset.game_id != game.id() {
        return Err(Error::Config(format!(
            "dataset is for {}, not {}",
            dataset.game_id,
            game.id()
        )));
    }
    let mut rec = Recorder::new(game.clone(), config)?;
    for s in &dataset.sessions {
        replay_into(&mut rec, s)?;
    }
    Ok(rec.into_dataset())
}
