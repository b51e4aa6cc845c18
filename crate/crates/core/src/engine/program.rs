//! Validation and name resolution: turns a [`GameSpec`] into an indexed
//! program the interpreter can run without string lookups.

use std::collections::{BTreeSet, HashMap};

use super::spec::*;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Slot {
    Global(usize),
    Sprite(usize, usize),
}

#[derive(Debug, Clone)]
pub(crate) enum CExpr {
    Num(f64),
    Var(Slot),
    Attr(usize, Attribute),
    MouseX,
    MouseY,
    Random(f64, f64),
    RandomInt(i64, i64),
    Add(Box<CExpr>, Box<CExpr>),
    Sub(Box<CExpr>, Box<CExpr>),
    Mul(Box<CExpr>, Box<CExpr>),
    Div(Box<CExpr>, Box<CExpr>),
    Abs(Box<CExpr>),
    Distance(usize, usize),
    DistanceToPoint(usize, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug, Clone)]
pub(crate) enum CCond {
    Compare(CmpOp, CExpr, CExpr),
    KeyPressed(Key),
    Touching(usize, usize),
    TouchingColor(usize, usize),
    And(Box<CCond>, Box<CCond>),
    Or(Box<CCond>, Box<CCond>),
    Not(Box<CCond>),
}

#[derive(Debug, Clone)]
pub(crate) enum COp {
    SetVar(Slot, CExpr),
    ChangeVar(Slot, CExpr),
    GoTo(usize, CExpr, CExpr),
    SetX(usize, CExpr),
    SetY(usize, CExpr),
    ChangeX(usize, CExpr),
    ChangeY(usize, CExpr),
    Move(usize, CExpr),
    SetHeading(usize, CExpr),
    Turn(usize, CExpr),
    PointTowards(usize, usize),
    PointTowardsPoint(usize, CExpr, CExpr),
    SetCostume(usize, CExpr),
    NextCostume(usize),
    SetSize(usize, CExpr),
    Show(usize),
    Hide(usize),
    BounceOnEdge(usize),
    If(CCond, Vec<CStmt>),
    IfElse(CCond, Vec<CStmt>, Vec<CStmt>),
    Stop,
}

#[derive(Debug, Clone)]
pub(crate) struct CStmt {
    pub idx: usize,
    pub op: COp,
}

#[derive(Debug, Clone)]
pub(crate) struct CScript {
    pub hat: usize,
    pub trigger: Trigger,
    pub body: Vec<CStmt>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// A validated game with all names resolved to indices.
#[derive(Debug, Clone)]
pub struct Program {
    spec: GameSpec,
    ids: Vec<StatementId>,
    index: HashMap<StatementId, usize>,
    pub(crate) scripts: Vec<CScript>,
    sprite_index: HashMap<String, usize>,
    pub(crate) colors: Vec<(String, Vec<Rect>)>,
    winning: Vec<usize>,
}

impl Program {
    pub fn compile(spec: GameSpec) -> Result<Program> {
        validate_static(&spec)?;

        let ids = spec.statement_ids();
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(*id, i).is_some() {
                return Err(Error::validation(
                    "scripts",
                    format!("duplicate statement id {}", id.0),
                ));
            }
        }
        for w in &spec.winning_statements {
            if !index.contains_key(w) {
                return Err(Error::validation(
                    "winning_statements",
                    format!("statement {} does not exist", w.0),
                ));
            }
        }

        let sprite_index: HashMap<String, usize> = spec
            .sprites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i))
            .collect();

        let mut colors: Vec<(String, Vec<Rect>)> = Vec::new();
        for r in &spec.regions {
            let rect = Rect {
                x_min: r.x_min,
                y_min: r.y_min,
                x_max: r.x_max,
                y_max: r.y_max,
            };
            match colors.iter_mut().find(|(c, _)| *c == r.color) {
                Some((_, rects)) => rects.push(rect),
                None => colors.push((r.color.clone(), vec![rect])),
            }
        }

        let resolver = Resolver {
            spec: &spec,
            index: &index,
            sprites: &sprite_index,
            colors: &colors,
        };
        let mut scripts = Vec::with_capacity(spec.scripts.len());
        for (i, script) in spec.scripts.iter().enumerate() {
            let field = format!("scripts[{i}]");
            scripts.push(CScript {
                hat: index[&script.hat],
                trigger: script.trigger,
                body: resolver.stmts(&script.body, &field)?,
            });
        }
        if !scripts.iter().any(|s| s.trigger.is_entry()) {
            return Err(Error::validation(
                "scripts",
                "at least one start or every-tick script is required",
            ));
        }

        let winning = spec.winning_statements.iter().map(|w| index[w]).collect();
        Ok(Program {
            spec,
            ids,
            index,
            scripts,
            sprite_index,
            colors,
            winning,
        })
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn statement_count(&self) -> usize {
        self.ids.len()
    }

    pub fn statement_ids(&self) -> &[StatementId] {
        &self.ids
    }

    pub fn index_of(&self, id: StatementId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn id_at(&self, idx: usize) -> StatementId {
        self.ids[idx]
    }

    pub fn sprite_index(&self, name: &str) -> Option<usize> {
        self.sprite_index.get(name).copied()
    }

    pub fn color_index(&self, name: &str) -> Option<usize> {
        self.colors.iter().position(|(c, _)| c == name)
    }

    pub fn winning_statements(&self) -> &BTreeSet<StatementId> {
        &self.spec.winning_statements
    }

    pub(crate) fn winning_indices(&self) -> &[usize] {
        &self.winning
    }
}

fn validate_static(spec: &GameSpec) -> Result<()> {
    if spec.id.trim().is_empty() {
        return Err(Error::validation("id", "must not be empty"));
    }
    let mut names = BTreeSet::new();
    for (i, s) in spec.sprites.iter().enumerate() {
        let field = format!("sprites[{i}]");
        if !names.insert(&s.name) {
            return Err(Error::validation(field, format!("duplicate sprite name {:?}", s.name)));
        }
        if s.costumes.is_empty() {
            return Err(Error::validation(format!("{field}.costumes"), "needs at least one costume"));
        }
        if s.costumes.iter().any(|c| !(c.width > 0.0 && c.height > 0.0)) {
            return Err(Error::validation(format!("{field}.costumes"), "dimensions must be positive"));
        }
        if !(s.size > 0.0) {
            return Err(Error::validation(format!("{field}.size"), "must be positive"));
        }
        if !(X_MIN..=X_MAX).contains(&s.x) || !(Y_MIN..=Y_MAX).contains(&s.y) {
            return Err(Error::validation(format!("{field}.position"), "outside the canvas"));
        }
        check_vars(&s.variables, &format!("{field}.variables"))?;
    }
    check_vars(&spec.globals, "globals")?;
    for (i, r) in spec.regions.iter().enumerate() {
        if !(r.x_min < r.x_max && r.y_min < r.y_max) {
            return Err(Error::validation(format!("regions[{i}]"), "min must be below max"));
        }
    }
    Ok(())
}

fn check_vars(vars: &[VariableSpec], field: &str) -> Result<()> {
    let mut names = BTreeSet::new();
    for v in vars {
        if !names.insert(&v.name) {
            return Err(Error::validation(field, format!("duplicate variable {:?}", v.name)));
        }
        if !(v.min < v.max) {
            return Err(Error::validation(
                format!("{field}.{}", v.name),
                "range must satisfy min < max",
            ));
        }
    }
    Ok(())
}

struct Resolver<'a> {
    spec: &'a GameSpec,
    index: &'a HashMap<StatementId, usize>,
    sprites: &'a HashMap<String, usize>,
    colors: &'a [(String, Vec<Rect>)],
}

impl Resolver<'_> {
    fn sprite(&self, name: &str, field: &str) -> Result<usize> {
        self.sprites
            .get(name)
            .copied()
            .ok_or_else(|| Error::validation(field, format!("unknown sprite {name:?}")))
    }

    fn slot(&self, var: &VarRef, field: &str) -> Result<Slot> {
        match var {
            VarRef::Global(name) => self
                .spec
                .globals
                .iter()
                .position(|v| &v.name == name)
                .map(Slot::Global)
                .ok_or_else(|| Error::validation(field, format!("unknown global {name:?}"))),
            VarRef::Sprite { sprite, name } => {
                let s = self.sprite(sprite, field)?;
                self.spec.sprites[s]
                    .variables
                    .iter()
                    .position(|v| &v.name == name)
                    .map(|i| Slot::Sprite(s, i))
                    .ok_or_else(|| {
                        Error::validation(field, format!("unknown variable {sprite}.{name}"))
                    })
            }
        }
    }

    fn expr(&self, e: &Expr, field: &str) -> Result<CExpr> {
        let b = |e: &Expr| self.expr(e, field).map(Box::new);
        Ok(match e {
            Expr::Num(v) => CExpr::Num(*v),
            Expr::Var(v) => CExpr::Var(self.slot(v, field)?),
            Expr::Attr { sprite, attr } => CExpr::Attr(self.sprite(sprite, field)?, *attr),
            Expr::MouseX => CExpr::MouseX,
            Expr::MouseY => CExpr::MouseY,
            Expr::Random(lo, hi) => CExpr::Random(*lo, *hi),
            Expr::RandomInt(lo, hi) => CExpr::RandomInt(*lo, *hi),
            Expr::Add(a, c) => CExpr::Add(b(a)?, b(c)?),
            Expr::Sub(a, c) => CExpr::Sub(b(a)?, b(c)?),
            Expr::Mul(a, c) => CExpr::Mul(b(a)?, b(c)?),
            Expr::Div(a, c) => CExpr::Div(b(a)?, b(c)?),
            Expr::Abs(a) => CExpr::Abs(b(a)?),
            Expr::Distance { sprite, other } => {
                CExpr::Distance(self.sprite(sprite, field)?, self.sprite(other, field)?)
            }
            Expr::DistanceToPoint { sprite, x, y } => {
                CExpr::DistanceToPoint(self.sprite(sprite, field)?, b(x)?, b(y)?)
            }
        })
    }

    fn cond(&self, c: &Cond, field: &str) -> Result<CCond> {
        let b = |c: &Cond| self.cond(c, field).map(Box::new);
        Ok(match c {
            Cond::Compare { op, lhs, rhs } => {
                CCond::Compare(*op, self.expr(lhs, field)?, self.expr(rhs, field)?)
            }
            Cond::KeyPressed(k) => CCond::KeyPressed(*k),
            Cond::Touching { sprite, other } => {
                CCond::Touching(self.sprite(sprite, field)?, self.sprite(other, field)?)
            }
            Cond::TouchingColor { sprite, color } => {
                let c = self
                    .colors
                    .iter()
                    .position(|(name, _)| name == color)
                    .ok_or_else(|| Error::validation(field, format!("unknown colour {color:?}")))?;
                CCond::TouchingColor(self.sprite(sprite, field)?, c)
            }
            Cond::And(a, c) => CCond::And(b(a)?, b(c)?),
            Cond::Or(a, c) => CCond::Or(b(a)?, b(c)?),
            Cond::Not(a) => CCond::Not(b(a)?),
        })
    }

    fn stmts(&self, stmts: &[Statement], field: &str) -> Result<Vec<CStmt>> {
        stmts.iter().map(|s| self.stmt(s, field)).collect()
    }

    fn stmt(&self, s: &Statement, field: &str) -> Result<CStmt> {
        use StmtKind::*;
        let field = &format!("{field}.statement {}", s.id.0);
        let sp = |name: &str| self.sprite(name, field);
        let ex = |e: &Expr| self.expr(e, field);
        let op = match &s.kind {
            SetVar { var, value } => COp::SetVar(self.slot(var, field)?, ex(value)?),
            ChangeVar { var, by } => COp::ChangeVar(self.slot(var, field)?, ex(by)?),
            GoTo { sprite, x, y } => COp::GoTo(sp(sprite)?, ex(x)?, ex(y)?),
            SetX { sprite, value } => COp::SetX(sp(sprite)?, ex(value)?),
            SetY { sprite, value } => COp::SetY(sp(sprite)?, ex(value)?),
            ChangeX { sprite, by } => COp::ChangeX(sp(sprite)?, ex(by)?),
            ChangeY { sprite, by } => COp::ChangeY(sp(sprite)?, ex(by)?),
            Move { sprite, steps } => COp::Move(sp(sprite)?, ex(steps)?),
            SetHeading { sprite, value } => COp::SetHeading(sp(sprite)?, ex(value)?),
            Turn { sprite, by } => COp::Turn(sp(sprite)?, ex(by)?),
            PointTowards { sprite, target } => COp::PointTowards(sp(sprite)?, sp(target)?),
            PointTowardsPoint { sprite, x, y } => COp::PointTowardsPoint(sp(sprite)?, ex(x)?, ex(y)?),
            SetCostume { sprite, value } => COp::SetCostume(sp(sprite)?, ex(value)?),
            NextCostume { sprite } => COp::NextCostume(sp(sprite)?),
            SetSize { sprite, value } => COp::SetSize(sp(sprite)?, ex(value)?),
            Show { sprite } => COp::Show(sp(sprite)?),
            Hide { sprite } => COp::Hide(sp(sprite)?),
            BounceOnEdge { sprite } => COp::BounceOnEdge(sp(sprite)?),
            If { cond, then } => COp::If(self.cond(cond, field)?, self.stmts(then, field)?),
            IfElse { cond, then, otherwise } => COp::IfElse(
                self.cond(cond, field)?,
                self.stmts(then, field)?,
                self.stmts(otherwise, field)?,
            ),
            Stop => COp::Stop,
        };
        Ok(CStmt {
            idx: self.index[&s.id],
            op,
        })
    }
}
