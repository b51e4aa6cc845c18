use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cdg::{ControlDependenceGraph, EdgeKind};
use super::program::{CCond, CExpr, COp, CStmt, Program, Rect, Slot};
use super::spec::*;
use super::state::{normalize_heading, GameState, SpriteState};
use crate::error::{Error, Result};

/// A player input applied at the start of a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEvent {
    KeyDown(Key),
    KeyUp(Key),
    MouseMove { x: f64, y: f64 },
    MouseClick { x: f64, y: f64 },
    /// Deliberate waiting; has no effect on the engine.
    NoOp { duration: u32 },
}

impl InputEvent {
    pub fn in_bounds(&self) -> bool {
        match *self {
            InputEvent::MouseMove { x, y } | InputEvent::MouseClick { x, y } => {
                (X_MIN..=X_MAX).contains(&x) && (Y_MIN..=Y_MAX).contains(&y)
            }
            _ => true,
        }
    }
}

/// An input event stamped with the tick it was applied on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub tick: u64,
    pub event: InputEvent,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSet {
    pub covered: BTreeSet<StatementId>,
}

impl CoverageSet {
    pub fn contains(&self, id: StatementId) -> bool {
        self.covered.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.covered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covered.is_empty()
    }

    pub fn insert(&mut self, id: StatementId) -> bool {
        self.covered.insert(id)
    }

    pub fn extend(&mut self, other: &CoverageSet) {
        self.covered.extend(other.covered.iter().copied());
    }

    pub fn iter(&self) -> impl Iterator<Item = StatementId> + '_ {
        self.covered.iter().copied()
    }
}

impl FromIterator<StatementId> for CoverageSet {
    fn from_iter<T: IntoIterator<Item = StatementId>>(iter: T) -> Self {
        CoverageSet {
            covered: iter.into_iter().collect(),
        }
    }
}

/// A loaded game: compiled program plus its control dependence graph.
/// Cheap to clone and share across threads.
#[derive(Debug, Clone)]
pub struct Game {
    program: Arc<Program>,
    cdg: Arc<ControlDependenceGraph>,
}

impl Game {
    pub fn new(spec: GameSpec) -> Result<Game> {
        let cdg = ControlDependenceGraph::build(&spec);
        let program = Program::compile(spec)?;
        Ok(Game {
            program: Arc::new(program),
            cdg: Arc::new(cdg),
        })
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn spec(&self) -> &GameSpec {
        self.program.spec()
    }

    pub fn id(&self) -> &str {
        self.program.id()
    }

    pub fn cdg(&self) -> &ControlDependenceGraph {
        &self.cdg
    }

    pub fn statement_count(&self) -> usize {
        self.program.statement_count()
    }

    pub fn instance(&self, seed: u64) -> GameInstance {
        GameInstance::new(self.clone(), seed)
    }
}

/// Validates `spec` and returns a fresh instance seeded with `seed`.
pub fn load_game(spec: GameSpec, seed: u64) -> Result<GameInstance> {
    Ok(Game::new(spec)?.instance(seed))
}

const NEVER: (f64, f64) = (f64::INFINITY, f64::INFINITY);

/// One seeded execution of a game with statement coverage and per-predicate
/// best-seen branch distances.
#[derive(Debug, Clone)]
pub struct GameInstance {
    game: Game,
    state: GameState,
    covered: Vec<bool>,
    covered_count: usize,
    first_covered: Vec<Option<u64>>,
    /// Best (true, false) raw distances seen per predicate statement.
    best: Vec<(f64, f64)>,
    seed: u64,
}

impl GameInstance {
    pub fn new(game: Game, seed: u64) -> GameInstance {
        let n = game.statement_count();
        let state = initial_state(game.spec(), seed);
        let mut inst = GameInstance {
            game,
            state,
            covered: vec![false; n],
            covered_count: 0,
            first_covered: vec![None; n],
            best: vec![NEVER; n],
            seed,
        };
        inst.start();
        inst
    }

    /// Restores the freshly loaded state for `seed` and clears coverage.
    pub fn reset(&mut self, seed: u64) {
        *self = GameInstance::new(self.game.clone(), seed);
    }

    fn start(&mut self) {
        let program = Arc::clone(&self.game.program);
        for script in &program.scripts {
            if script.trigger.is_entry() {
                self.mark(script.hat);
            }
        }
        for script in program.scripts.iter().filter(|s| s.trigger == Trigger::Start) {
            if self.run_block(&script.body) {
                break;
            }
        }
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn tick(&self) -> u64 {
        self.state.tick
    }

    pub fn is_game_over(&self) -> bool {
        self.state.game_over
    }

    pub fn cdg(&self) -> &ControlDependenceGraph {
        self.game.cdg()
    }

    pub fn covered(&self) -> CoverageSet {
        let program = self.game.program();
        self.covered
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| program.id_at(i))
            .collect()
    }

    pub fn covered_count(&self) -> usize {
        self.covered_count
    }

    pub fn is_covered(&self, id: StatementId) -> bool {
        self.game
            .program()
            .index_of(id)
            .map(|i| self.covered[i])
            .unwrap_or(false)
    }

    /// Tick on which `id` was first covered (0 for statements covered while
    /// loading).
    pub fn first_covered_tick(&self, id: StatementId) -> Option<u64> {
        self.game
            .program()
            .index_of(id)
            .and_then(|i| self.first_covered[i])
    }

    pub fn reached_winning_state(&self) -> bool {
        self.game
            .program()
            .winning_indices()
            .iter()
            .any(|&i| self.covered[i])
    }

    /// Advances one tick: applies `events`, then runs triggered and per-tick
    /// scripts in declaration order.
    pub fn step(&mut self, events: &[InputEvent]) -> Result<&GameState> {
        if self.state.game_over {
            return Err(Error::Terminal);
        }
        if let Some(bad) = events.iter().find(|e| !e.in_bounds()) {
            let (x, y) = match *bad {
                InputEvent::MouseMove { x, y } | InputEvent::MouseClick { x, y } => (x, y),
                _ => unreachable!(),
            };
            return Err(Error::OutOfBounds { x, y });
        }

        let mut pressed = [false; 5];
        let mut clicked = false;
        for e in events {
            match *e {
                InputEvent::KeyDown(k) => {
                    if !self.state.keys_down[k.index()] {
                        pressed[k.index()] = true;
                    }
                    self.state.keys_down[k.index()] = true;
                }
                InputEvent::KeyUp(k) => self.state.keys_down[k.index()] = false,
                InputEvent::MouseMove { x, y } => self.state.mouse = (x, y),
                InputEvent::MouseClick { x, y } => {
                    self.state.mouse = (x, y);
                    clicked = true;
                }
                InputEvent::NoOp { .. } => {}
            }
        }

        let program = Arc::clone(&self.game.program);
        for script in &program.scripts {
            let fire = match script.trigger {
                Trigger::Start => false,
                Trigger::EveryTick => true,
                Trigger::KeyDown(k) => pressed[k.index()],
                Trigger::MouseClick => clicked,
            };
            if fire {
                self.mark(script.hat);
                if self.run_block(&script.body) {
                    break;
                }
            }
        }
        self.state.tick += 1;
        Ok(&self.state)
    }

    /// Number of uncovered control dependencies between the deepest covered
    /// ancestor of `target` and `target` itself (inclusive).
    pub fn approach_level(&self, target: StatementId) -> Result<u32> {
        let path = self.path(target)?;
        Ok(path.iter().take_while(|&&i| !self.covered[i]).count() as u32)
    }

    /// Raw distance of the deepest reached control dependency from taking
    /// the branch towards `target`; `f64::INFINITY` when that predicate has
    /// never been evaluated.
    pub fn raw_branch_distance(&self, target: StatementId) -> Result<f64> {
        let path = self.path(target)?;
        let Some(k) = path.iter().position(|&i| self.covered[i]) else {
            return Ok(f64::INFINITY);
        };
        if k == 0 {
            return Ok(0.0);
        }
        let child = self.game.program().id_at(path[k - 1]);
        let edge = self.cdg().node(child).map(|n| n.edge).unwrap_or(EdgeKind::Entry);
        let (best_true, best_false) = self.best[path[k]];
        Ok(match edge {
            EdgeKind::Then => best_true,
            EdgeKind::Else => best_false,
            EdgeKind::Sequence => 0.0,
            EdgeKind::Event | EdgeKind::Entry => f64::INFINITY,
        })
    }

    /// Branch distance normalised into `[0, 1]` by `d / (d + 1)`.
    pub fn branch_distance(&self, target: StatementId) -> Result<f64> {
        Ok(normalize_distance(self.raw_branch_distance(target)?))
    }

    fn path(&self, target: StatementId) -> Result<Vec<usize>> {
        let program = self.game.program();
        if program.index_of(target).is_none() {
            return Err(Error::UnknownStatement(target));
        }
        Ok(self
            .cdg()
            .ancestry(target)
            .into_iter()
            .filter_map(|id| program.index_of(id))
            .collect())
    }

    fn mark(&mut self, idx: usize) {
        if !self.covered[idx] {
            self.covered[idx] = true;
            self.covered_count += 1;
            self.first_covered[idx] = Some(self.state.tick);
        }
    }

    /// Runs a statement list; returns true if a terminal statement ran.
    fn run_block(&mut self, block: &[CStmt]) -> bool {
        for stmt in block {
            if self.exec(stmt) {
                return true;
            }
        }
        false
    }

    fn exec(&mut self, stmt: &CStmt) -> bool {
        self.mark(stmt.idx);
        match &stmt.op {
            COp::SetVar(slot, e) => {
                let v = self.eval(e);
                *self.slot_mut(*slot) = v;
            }
            COp::ChangeVar(slot, e) => {
                let v = self.eval(e);
                *self.slot_mut(*slot) += v;
            }
            COp::GoTo(s, x, y) => {
                let (x, y) = (self.eval(x), self.eval(y));
                self.set_pos(*s, x, y);
            }
            COp::SetX(s, e) => {
                let x = self.eval(e);
                let y = self.state.sprites[*s].y;
                self.set_pos(*s, x, y);
            }
            COp::SetY(s, e) => {
                let y = self.eval(e);
                let x = self.state.sprites[*s].x;
                self.set_pos(*s, x, y);
            }
            COp::ChangeX(s, e) => {
                let dx = self.eval(e);
                let sp = &self.state.sprites[*s];
                self.set_pos(*s, sp.x + dx, sp.y);
            }
            COp::ChangeY(s, e) => {
                let dy = self.eval(e);
                let sp = &self.state.sprites[*s];
                self.set_pos(*s, sp.x, sp.y + dy);
            }
            COp::Move(s, e) => {
                let steps = self.eval(e);
                let sp = &self.state.sprites[*s];
                let rad = sp.heading.to_radians();
                self.set_pos(*s, sp.x + steps * rad.sin(), sp.y + steps * rad.cos());
            }
            COp::SetHeading(s, e) => {
                let h = self.eval(e);
                self.state.sprites[*s].heading = normalize_heading(h);
            }
            COp::Turn(s, e) => {
                let dh = self.eval(e);
                let sp = &mut self.state.sprites[*s];
                sp.heading = normalize_heading(sp.heading + dh);
            }
            COp::PointTowards(s, t) => {
                let (tx, ty) = (self.state.sprites[*t].x, self.state.sprites[*t].y);
                self.point_towards(*s, tx, ty);
            }
            COp::PointTowardsPoint(s, x, y) => {
                let (tx, ty) = (self.eval(x), self.eval(y));
                self.point_towards(*s, tx, ty);
            }
            COp::SetCostume(s, e) => {
                let v = self.eval(e);
                let n = self.game.spec().sprites[*s].costumes.len() as i64;
                self.state.sprites[*s].costume = (v.round() as i64).rem_euclid(n) as usize;
            }
            COp::NextCostume(s) => {
                let n = self.game.spec().sprites[*s].costumes.len();
                let sp = &mut self.state.sprites[*s];
                sp.costume = (sp.costume + 1) % n;
            }
            COp::SetSize(s, e) => {
                let v = self.eval(e);
                self.state.sprites[*s].size = v.max(1.0);
            }
            COp::Show(s) => self.state.sprites[*s].visible = true,
            COp::Hide(s) => self.state.sprites[*s].visible = false,
            COp::BounceOnEdge(s) => self.bounce(*s),
            COp::If(c, then) => {
                if self.branch(stmt.idx, c) {
                    return self.run_block(then);
                }
            }
            COp::IfElse(c, then, otherwise) => {
                return if self.branch(stmt.idx, c) {
                    self.run_block(then)
                } else {
                    self.run_block(otherwise)
                };
            }
            COp::Stop => {
                self.state.game_over = true;
                return true;
            }
        }
        false
    }

    fn branch(&mut self, idx: usize, c: &CCond) -> bool {
        let (taken, d_true, d_false) = self.cond(c);
        let best = &mut self.best[idx];
        best.0 = best.0.min(d_true);
        best.1 = best.1.min(d_false);
        taken
    }

    fn slot_mut(&mut self, slot: Slot) -> &mut f64 {
        match slot {
            Slot::Global(i) => &mut self.state.globals[i],
            Slot::Sprite(s, i) => &mut self.state.sprites[s].variables[i],
        }
    }

    fn set_pos(&mut self, s: usize, x: f64, y: f64) {
        let sp = &mut self.state.sprites[s];
        sp.x = x;
        sp.y = y;
        sp.clamp_position();
    }

    fn point_towards(&mut self, s: usize, tx: f64, ty: f64) {
        let sp = &mut self.state.sprites[s];
        let (dx, dy) = (tx - sp.x, ty - sp.y);
        if dx != 0.0 || dy != 0.0 {
            sp.heading = normalize_heading(dx.atan2(dy).to_degrees());
        }
    }

    fn half_extents(&self, s: usize) -> (f64, f64) {
        let sp = &self.state.sprites[s];
        let costume = &self.game.spec().sprites[s].costumes[sp.costume];
        let scale = sp.size / 100.0;
        (costume.width * scale / 2.0, costume.height * scale / 2.0)
    }

    fn bounce(&mut self, s: usize) {
        let (hw, hh) = self.half_extents(s);
        let sp = &mut self.state.sprites[s];
        if sp.x - hw < X_MIN {
            sp.x = X_MIN + hw;
            sp.heading = normalize_heading(-sp.heading);
        } else if sp.x + hw > X_MAX {
            sp.x = X_MAX - hw;
            sp.heading = normalize_heading(-sp.heading);
        }
        if sp.y + hh > Y_MAX {
            sp.y = Y_MAX - hh;
            sp.heading = normalize_heading(180.0 - sp.heading);
        } else if sp.y - hh < Y_MIN {
            sp.y = Y_MIN + hh;
            sp.heading = normalize_heading(180.0 - sp.heading);
        }
        sp.clamp_position();
    }

    /// Gap between the bounding boxes of two sprites; 0 when they overlap.
    fn sprite_gap(&self, a: usize, b: usize) -> f64 {
        let (sa, sb) = (&self.state.sprites[a], &self.state.sprites[b]);
        let (ha, hb) = (self.half_extents(a), self.half_extents(b));
        let dx = ((sa.x - sb.x).abs() - (ha.0 + hb.0)).max(0.0);
        let dy = ((sa.y - sb.y).abs() - (ha.1 + hb.1)).max(0.0);
        dx.hypot(dy)
    }

    fn color_gap(&self, s: usize, color: usize) -> f64 {
        let sp = &self.state.sprites[s];
        let (hw, hh) = self.half_extents(s);
        self.game.program().colors[color]
            .1
            .iter()
            .map(|r: &Rect| {
                let dx = (r.x_min - (sp.x + hw)).max((sp.x - hw) - r.x_max).max(0.0);
                let dy = (r.y_min - (sp.y + hh)).max((sp.y - hh) - r.y_max).max(0.0);
                dx.hypot(dy)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Evaluates a condition, returning (value, distance to true, distance
    /// to false).
    fn cond(&mut self, c: &CCond) -> (bool, f64, f64) {
        match c {
            CCond::Compare(op, l, r) => {
                let (a, b) = (self.eval(l), self.eval(r));
                compare_distance(*op, a, b)
            }
            CCond::KeyPressed(k) => {
                if self.state.keys_down[k.index()] {
                    (true, 0.0, 1.0)
                } else {
                    (false, 1.0, 0.0)
                }
            }
            CCond::Touching(a, b) => {
                let visible = self.state.sprites[*a].visible && self.state.sprites[*b].visible;
                let gap = self.sprite_gap(*a, *b);
                let touching = visible && gap == 0.0;
                let d_true = if touching { 0.0 } else if visible { gap } else { gap + 1.0 };
                (touching, d_true, if touching { 1.0 } else { 0.0 })
            }
            CCond::TouchingColor(s, color) => {
                let visible = self.state.sprites[*s].visible;
                let gap = self.color_gap(*s, *color);
                let touching = visible && gap == 0.0;
                let d_true = if touching { 0.0 } else if visible { gap } else { gap + 1.0 };
                (touching, d_true, if touching { 1.0 } else { 0.0 })
            }
            CCond::And(a, b) => {
                let (va, ta, fa) = self.cond(a);
                let (vb, tb, fb) = self.cond(b);
                (va && vb, ta + tb, fa.min(fb))
            }
            CCond::Or(a, b) => {
                let (va, ta, fa) = self.cond(a);
                let (vb, tb, fb) = self.cond(b);
                (va || vb, ta.min(tb), fa + fb)
            }
            CCond::Not(a) => {
                let (v, t, f) = self.cond(a);
                (!v, f, t)
            }
        }
    }

    fn eval(&mut self, e: &CExpr) -> f64 {
        match e {
            CExpr::Num(v) => *v,
            CExpr::Var(Slot::Global(i)) => self.state.globals[*i],
            CExpr::Var(Slot::Sprite(s, i)) => self.state.sprites[*s].variables[*i],
            CExpr::Attr(s, attr) => {
                let sp = &self.state.sprites[*s];
                match attr {
                    Attribute::X => sp.x,
                    Attribute::Y => sp.y,
                    Attribute::Heading => sp.heading,
                    Attribute::Costume => sp.costume as f64,
                    Attribute::Size => sp.size,
                }
            }
            CExpr::MouseX => self.state.mouse.0,
            CExpr::MouseY => self.state.mouse.1,
            CExpr::Random(lo, hi) => {
                let (lo, hi) = if lo <= hi { (*lo, *hi) } else { (*hi, *lo) };
                if lo == hi {
                    lo
                } else {
                    self.state.rng.gen_range(lo..hi)
                }
            }
            CExpr::RandomInt(lo, hi) => {
                let (lo, hi) = if lo <= hi { (*lo, *hi) } else { (*hi, *lo) };
                self.state.rng.gen_range(lo..=hi) as f64
            }
            CExpr::Add(a, b) => self.eval(a) + self.eval(b),
            CExpr::Sub(a, b) => self.eval(a) - self.eval(b),
            CExpr::Mul(a, b) => self.eval(a) * self.eval(b),
            CExpr::Div(a, b) => {
                let (a, b) = (self.eval(a), self.eval(b));
                if b == 0.0 {
                    0.0
                } else {
                    a / b
                }
            }
            CExpr::Abs(a) => self.eval(a).abs(),
            CExpr::Distance(a, b) => {
                let (sa, sb) = (&self.state.sprites[*a], &self.state.sprites[*b]);
                (sa.x - sb.x).hypot(sa.y - sb.y)
            }
            CExpr::DistanceToPoint(s, x, y) => {
                let (x, y) = (self.eval(x), self.eval(y));
                let sp = &self.state.sprites[*s];
                (sp.x - x).hypot(sp.y - y)
            }
        }
    }
}

/// Maps a raw distance into `[0, 1]`; infinity maps to 1.
pub fn normalize_distance(d: f64) -> f64 {
    if d.is_infinite() {
        1.0
    } else {
        d / (d + 1.0)
    }
}

/// Relational predicate value and its distances to true and to false:
/// `|a − b|` for `==`, `<=`, `>=` and `|a − b| + 1` for `<`, `>`, `!=`.
pub fn compare_distance(op: CmpOp, a: f64, b: f64) -> (bool, f64, f64) {
    let d = (a - b).abs();
    match op {
        CmpOp::Eq => {
            let t = a == b;
            (t, d, if t { 1.0 } else { 0.0 })
        }
        CmpOp::Ne => {
            let t = a != b;
            (t, if t { 0.0 } else { 1.0 }, d)
        }
        CmpOp::Lt => {
            let t = a < b;
            (t, if t { 0.0 } else { d + 1.0 }, if t { d } else { 0.0 })
        }
        CmpOp::Le => {
            let t = a <= b;
            (t, if t { 0.0 } else { d }, if t { d + 1.0 } else { 0.0 })
        }
        CmpOp::Gt => {
            let t = a > b;
            (t, if t { 0.0 } else { d + 1.0 }, if t { d } else { 0.0 })
        }
        CmpOp::Ge => {
            let t = a >= b;
            (t, if t { 0.0 } else { d }, if t { d + 1.0 } else { 0.0 })
        }
    }
}

fn initial_state(spec: &GameSpec, seed: u64) -> GameState {
    GameState {
        sprites: spec
            .sprites
            .iter()
            .map(|s| {
                let mut sp = SpriteState {
                    x: s.x,
                    y: s.y,
                    heading: normalize_heading(s.heading),
                    costume: 0,
                    size: s.size,
                    variables: s.variables.iter().map(|v| v.initial).collect(),
                    visible: s.visible,
                };
                sp.clamp_position();
                sp
            })
            .collect(),
        globals: spec.globals.iter().map(|v| v.initial).collect(),
        mouse: (0.0, 0.0),
        keys_down: [false; 5],
        tick: 0,
        game_over: false,
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}
