//! Declarative game description: sprites, variables, colour regions and
//! block-structured scripts. Built-in games are assembled with
//! [`crate::engine::builder`]; user games can be loaded from JSON with the
//! same schema.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CANVAS_WIDTH: f64 = 480.0;
pub const CANVAS_HEIGHT: f64 = 360.0;
pub const X_MIN: f64 = -240.0;
pub const X_MAX: f64 = 240.0;
pub const Y_MIN: f64 = -180.0;
pub const Y_MAX: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(pub u32);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Key {
    Up,
    Down,
    Left,
    Right,
    Space,
}

impl Key {
    pub const ALL: [Key; 5] = [Key::Up, Key::Down, Key::Left, Key::Right, Key::Space];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Key::Up => "up",
            Key::Down => "down",
            Key::Left => "left",
            Key::Right => "right",
            Key::Space => "space",
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationStyle {
    AllAround,
    LeftRight,
    DontRotate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Costume {
    pub name: String,
    pub width: f64,
    pub height: f64,
}

/// A numeric variable with the range used to normalise it into a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub initial: f64,
    pub min: f64,
    pub max: f64,
}

impl VariableSpec {
    pub fn new(name: &str, initial: f64, min: f64, max: f64) -> Self {
        VariableSpec {
            name: name.to_string(),
            initial,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpriteSpec {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub costumes: Vec<Costume>,
    pub size: f64,
    pub rotation: RotationStyle,
    pub visible: bool,
    #[serde(default)]
    pub variables: Vec<VariableSpec>,
}

/// Static rectangle painted in a named colour; sprites can sense it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorRegion {
    pub color: String,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarRef {
    Global(String),
    Sprite { sprite: String, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    X,
    Y,
    Heading,
    Costume,
    Size,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Num(f64),
    Var(VarRef),
    Attr { sprite: String, attr: Attribute },
    MouseX,
    MouseY,
    /// Uniform real in `[lo, hi)`.
    Random(f64, f64),
    /// Uniform integer in `[lo, hi]`.
    RandomInt(i64, i64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    Distance { sprite: String, other: String },
    DistanceToPoint { sprite: String, x: Box<Expr>, y: Box<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cond {
    Compare { op: CmpOp, lhs: Expr, rhs: Expr },
    KeyPressed(Key),
    Touching { sprite: String, other: String },
    TouchingColor { sprite: String, color: String },
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Runs once when the game is loaded.
    Start,
    /// Runs on every tick.
    EveryTick,
    /// Runs on the tick a key goes down.
    KeyDown(Key),
    /// Runs on the tick the stage is clicked.
    MouseClick,
}

impl Trigger {
    /// Start and per-tick scripts run without any player input.
    pub fn is_entry(self) -> bool {
        matches!(self, Trigger::Start | Trigger::EveryTick)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StmtKind {
    SetVar { var: VarRef, value: Expr },
    ChangeVar { var: VarRef, by: Expr },
    GoTo { sprite: String, x: Expr, y: Expr },
    SetX { sprite: String, value: Expr },
    SetY { sprite: String, value: Expr },
    ChangeX { sprite: String, by: Expr },
    ChangeY { sprite: String, by: Expr },
    Move { sprite: String, steps: Expr },
    SetHeading { sprite: String, value: Expr },
    Turn { sprite: String, by: Expr },
    PointTowards { sprite: String, target: String },
    PointTowardsPoint { sprite: String, x: Expr, y: Expr },
    SetCostume { sprite: String, value: Expr },
    NextCostume { sprite: String },
    SetSize { sprite: String, value: Expr },
    Show { sprite: String },
    Hide { sprite: String },
    BounceOnEdge { sprite: String },
    If { cond: Cond, then: Vec<Statement> },
    IfElse { cond: Cond, then: Vec<Statement>, otherwise: Vec<Statement> },
    /// Terminal statement: the game is over once it executes.
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub hat: StatementId,
    pub trigger: Trigger,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub id: String,
    pub sprites: Vec<SpriteSpec>,
    #[serde(default)]
    pub globals: Vec<VariableSpec>,
    #[serde(default)]
    pub regions: Vec<ColorRegion>,
    pub scripts: Vec<Script>,
    #[serde(default)]
    pub winning_statements: BTreeSet<StatementId>,
}

/// Kinds of player input a game reacts to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Key(Key),
    MouseMove,
    MouseClick,
}

impl GameSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game spec serializes")
    }

    /// All statement ids in script order (hat first, then a pre-order walk
    /// of the body).
    pub fn statement_ids(&self) -> Vec<StatementId> {
        fn walk(stmts: &[Statement], out: &mut Vec<StatementId>) {
            for s in stmts {
                out.push(s.id);
                match &s.kind {
                    StmtKind::If { then, .. } => walk(then, out),
                    StmtKind::IfElse { then, otherwise, .. } => {
                        walk(then, out);
                        walk(otherwise, out);
                    }
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        for script in &self.scripts {
            out.push(script.hat);
            walk(&script.body, &mut out);
        }
        out
    }

    /// Input kinds the scripts react to. Mouse moves count when the mouse
    /// position is read outside of click handlers.
    pub fn input_handlers(&self) -> BTreeSet<InputKind> {
        let mut kinds = BTreeSet::new();
        for script in &self.scripts {
            match script.trigger {
                Trigger::KeyDown(k) => {
                    kinds.insert(InputKind::Key(k));
                }
                Trigger::MouseClick => {
                    kinds.insert(InputKind::MouseClick);
                }
                _ => {}
            }
            let mut usage = Usage::default();
            usage.stmts(&script.body);
            for k in usage.keys {
                kinds.insert(InputKind::Key(k));
            }
            if usage.mouse && script.trigger != Trigger::MouseClick {
                kinds.insert(InputKind::MouseMove);
            }
        }
        kinds
    }

    /// True if any code depends on the mouse.
    pub fn uses_mouse(&self) -> bool {
        self.input_handlers()
            .iter()
            .any(|k| matches!(k, InputKind::MouseMove | InputKind::MouseClick))
            || self.scripts.iter().any(|s| {
                let mut usage = Usage::default();
                usage.stmts(&s.body);
                usage.mouse
            })
    }

    /// Sprite pairs `(sprite, other)` appearing in touching checks, and
    /// `(sprite, colour)` pairs for colour checks.
    pub fn touch_listeners(&self) -> (BTreeSet<(String, String)>, BTreeSet<(String, String)>) {
        let mut usage = Usage::default();
        for s in &self.scripts {
            usage.stmts(&s.body);
        }
        (usage.touch_sprites, usage.touch_colors)
    }

    /// Sprites whose costume is changed by some statement.
    pub fn costume_changers(&self) -> BTreeSet<String> {
        let mut usage = Usage::default();
        for s in &self.scripts {
            usage.stmts(&s.body);
        }
        usage.costume
    }
}

#[derive(Default)]
struct Usage {
    keys: BTreeSet<Key>,
    mouse: bool,
    touch_sprites: BTreeSet<(String, String)>,
    touch_colors: BTreeSet<(String, String)>,
    costume: BTreeSet<String>,
}

impl Usage {
    fn stmts(&mut self, stmts: &[Statement]) {
        for s in stmts {
            self.stmt(&s.kind);
        }
    }

    fn stmt(&mut self, kind: &StmtKind) {
        use StmtKind::*;
        match kind {
            SetVar { value, .. } => self.expr(value),
            ChangeVar { by, .. } => self.expr(by),
            GoTo { x, y, .. } | PointTowardsPoint { x, y, .. } => {
                self.expr(x);
                self.expr(y);
            }
            SetX { value, .. } | SetY { value, .. } | SetHeading { value, .. } | SetSize { value, .. } => {
                self.expr(value)
            }
            ChangeX { by, .. } | ChangeY { by, .. } | Turn { by, .. } => self.expr(by),
            Move { steps, .. } => self.expr(steps),
            SetCostume { sprite, value } => {
                self.costume.insert(sprite.clone());
                self.expr(value);
            }
            NextCostume { sprite } => {
                self.costume.insert(sprite.clone());
            }
            If { cond, then } => {
                self.cond(cond);
                self.stmts(then);
            }
            IfElse { cond, then, otherwise } => {
                self.cond(cond);
                self.stmts(then);
                self.stmts(otherwise);
            }
            PointTowards { .. } | Show { .. } | Hide { .. } | BounceOnEdge { .. } | Stop => {}
        }
    }

    fn cond(&mut self, cond: &Cond) {
        match cond {
            Cond::Compare { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            Cond::KeyPressed(k) => {
                self.keys.insert(*k);
            }
            Cond::Touching { sprite, other } => {
                self.touch_sprites.insert((sprite.clone(), other.clone()));
            }
            Cond::TouchingColor { sprite, color } => {
                self.touch_colors.insert((sprite.clone(), color.clone()));
            }
            Cond::And(a, b) | Cond::Or(a, b) => {
                self.cond(a);
                self.cond(b);
            }
            Cond::Not(a) => self.cond(a),
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::MouseX | Expr::MouseY => self.mouse = true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                self.expr(a);
                self.expr(b);
            }
            Expr::Abs(a) => self.expr(a),
            Expr::DistanceToPoint { x, y, .. } => {
                self.expr(x);
                self.expr(y);
            }
            _ => {}
        }
    }
}
