//! Small DSL for writing games in Rust. Statement ids are allocated in
//! script order (hat first, then a pre-order walk of the body).

use std::cell::Cell;
use std::collections::BTreeSet;

use super::spec::*;

#[derive(Default)]
struct Ids(Cell<u32>);

impl Ids {
    fn next(&self) -> StatementId {
        let id = self.0.get() + 1;
        self.0.set(id);
        StatementId(id)
    }
}

pub struct GameBuilder {
    id: String,
    sprites: Vec<SpriteSpec>,
    globals: Vec<VariableSpec>,
    regions: Vec<ColorRegion>,
    scripts: Vec<Script>,
    winning: BTreeSet<StatementId>,
    ids: Ids,
}

impl GameBuilder {
    pub fn new(id: &str) -> Self {
        GameBuilder {
            id: id.to_string(),
            sprites: Vec::new(),
            globals: Vec::new(),
            regions: Vec::new(),
            scripts: Vec::new(),
            winning: BTreeSet::new(),
            ids: Ids::default(),
        }
    }

    pub fn sprite(&mut self, sprite: SpriteSpec) -> &mut Self {
        self.sprites.push(sprite);
        self
    }

    pub fn global(&mut self, name: &str, initial: f64, min: f64, max: f64) -> &mut Self {
        self.globals.push(VariableSpec::new(name, initial, min, max));
        self
    }

    pub fn region(&mut self, color: &str, x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> &mut Self {
        self.regions.push(ColorRegion {
            color: color.to_string(),
            x_min,
            y_min,
            x_max,
            y_max,
        });
        self
    }

    pub fn script(&mut self, trigger: Trigger, body: impl FnOnce(&mut Block)) -> StatementId {
        let hat = self.ids.next();
        let mut block = Block::new(&self.ids);
        body(&mut block);
        self.scripts.push(Script {
            hat,
            trigger,
            body: block.stmts,
        });
        hat
    }

    pub fn winning(&mut self, id: StatementId) -> &mut Self {
        self.winning.insert(id);
        self
    }

    pub fn build(self) -> GameSpec {
        GameSpec {
            id: self.id,
            sprites: self.sprites,
            globals: self.globals,
            regions: self.regions,
            scripts: self.scripts,
            winning_statements: self.winning,
        }
    }
}

/// A single-costume sprite.
pub fn sprite(name: &str, x: f64, y: f64, width: f64, height: f64) -> SpriteSpec {
    SpriteSpec {
        name: name.to_string(),
        x,
        y,
        heading: 90.0,
        costumes: vec![Costume {
            name: "default".into(),
            width,
            height,
        }],
        size: 100.0,
        rotation: RotationStyle::DontRotate,
        visible: true,
        variables: Vec::new(),
    }
}

pub struct Block<'a> {
    ids: &'a Ids,
    stmts: Vec<Statement>,
}

impl<'a> Block<'a> {
    fn new(ids: &'a Ids) -> Self {
        Block {
            ids,
            stmts: Vec::new(),
        }
    }

    pub fn push(&mut self, kind: StmtKind) -> StatementId {
        let id = self.ids.next();
        self.stmts.push(Statement { id, kind });
        id
    }

    pub fn set(&mut self, var: VarRef, value: Expr) -> StatementId {
        self.push(StmtKind::SetVar { var, value })
    }

    pub fn change(&mut self, var: VarRef, by: Expr) -> StatementId {
        self.push(StmtKind::ChangeVar { var, by })
    }

    pub fn go_to(&mut self, sprite: &str, x: Expr, y: Expr) -> StatementId {
        self.push(StmtKind::GoTo {
            sprite: sprite.into(),
            x,
            y,
        })
    }

    pub fn set_x(&mut self, sprite: &str, value: Expr) -> StatementId {
        self.push(StmtKind::SetX {
            sprite: sprite.into(),
            value,
        })
    }

    pub fn set_y(&mut self, sprite: &str, value: Expr) -> StatementId {
        self.push(StmtKind::SetY {
            sprite: sprite.into(),
            value,
        })
    }

    pub fn change_x(&mut self, sprite: &str, by: Expr) -> StatementId {
        self.push(StmtKind::ChangeX {
            sprite: sprite.into(),
            by,
        })
    }

    pub fn change_y(&mut self, sprite: &str, by: Expr) -> StatementId {
        self.push(StmtKind::ChangeY {
            sprite: sprite.into(),
            by,
        })
    }

    pub fn move_steps(&mut self, sprite: &str, steps: Expr) -> StatementId {
        self.push(StmtKind::Move {
            sprite: sprite.into(),
            steps,
        })
    }

    pub fn set_heading(&mut self, sprite: &str, value: Expr) -> StatementId {
        self.push(StmtKind::SetHeading {
            sprite: sprite.into(),
            value,
        })
    }

    pub fn point_towards(&mut self, sprite: &str, target: &str) -> StatementId {
        self.push(StmtKind::PointTowards {
            sprite: sprite.into(),
            target: target.into(),
        })
    }

    pub fn point_towards_point(&mut self, sprite: &str, x: Expr, y: Expr) -> StatementId {
        self.push(StmtKind::PointTowardsPoint {
            sprite: sprite.into(),
            x,
            y,
        })
    }

    pub fn next_costume(&mut self, sprite: &str) -> StatementId {
        self.push(StmtKind::NextCostume {
            sprite: sprite.into(),
        })
    }

    pub fn bounce_on_edge(&mut self, sprite: &str) -> StatementId {
        self.push(StmtKind::BounceOnEdge {
            sprite: sprite.into(),
        })
    }

    pub fn stop(&mut self) -> StatementId {
        self.push(StmtKind::Stop)
    }

    pub fn if_(&mut self, cond: Cond, then: impl FnOnce(&mut Block)) -> StatementId {
        let id = self.ids.next();
        let mut inner = Block::new(self.ids);
        then(&mut inner);
        self.stmts.push(Statement {
            id,
            kind: StmtKind::If {
                cond,
                then: inner.stmts,
            },
        });
        id
    }

    pub fn if_else(
        &mut self,
        cond: Cond,
        then: impl FnOnce(&mut Block),
        otherwise: impl FnOnce(&mut Block),
    ) -> StatementId {
        let id = self.ids.next();
        let mut a = Block::new(self.ids);
        then(&mut a);
        let mut b = Block::new(self.ids);
        otherwise(&mut b);
        self.stmts.push(Statement {
            id,
            kind: StmtKind::IfElse {
                cond,
                then: a.stmts,
                otherwise: b.stmts,
            },
        });
        id
    }
}

/// Expression and condition constructors.
pub mod dsl {
    use super::super::spec::*;

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn global(name: &str) -> VarRef {
        VarRef::Global(name.into())
    }

    pub fn local(sprite: &str, name: &str) -> VarRef {
        VarRef::Sprite {
            sprite: sprite.into(),
            name: name.into(),
        }
    }

    pub fn get(var: VarRef) -> Expr {
        Expr::Var(var)
    }

    pub fn attr(sprite: &str, attr: Attribute) -> Expr {
        Expr::Attr {
            sprite: sprite.into(),
            attr,
        }
    }

    pub fn x_of(sprite: &str) -> Expr {
        attr(sprite, Attribute::X)
    }

    pub fn y_of(sprite: &str) -> Expr {
        attr(sprite, Attribute::Y)
    }

    pub fn heading_of(sprite: &str) -> Expr {
        attr(sprite, Attribute::Heading)
    }

    pub fn random(lo: f64, hi: f64) -> Expr {
        Expr::Random(lo, hi)
    }

    pub fn random_int(lo: i64, hi: i64) -> Expr {
        Expr::RandomInt(lo, hi)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn abs(a: Expr) -> Expr {
        Expr::Abs(Box::new(a))
    }

    pub fn distance_to_point(sprite: &str, x: Expr, y: Expr) -> Expr {
        Expr::DistanceToPoint {
            sprite: sprite.into(),
            x: Box::new(x),
            y: Box::new(y),
        }
    }

    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Cond {
        Cond::Compare { op, lhs, rhs }
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Cond {
        cmp(CmpOp::Eq, lhs, rhs)
    }

    pub fn gt(lhs: Expr, rhs: Expr) -> Cond {
        cmp(CmpOp::Gt, lhs, rhs)
    }

    pub fn ge(lhs: Expr, rhs: Expr) -> Cond {
        cmp(CmpOp::Ge, lhs, rhs)
    }

    pub fn lt(lhs: Expr, rhs: Expr) -> Cond {
        cmp(CmpOp::Lt, lhs, rhs)
    }

    pub fn le(lhs: Expr, rhs: Expr) -> Cond {
        cmp(CmpOp::Le, lhs, rhs)
    }

    pub fn key(k: Key) -> Cond {
        Cond::KeyPressed(k)
    }

    pub fn touching(sprite: &str, other: &str) -> Cond {
        Cond::Touching {
            sprite: sprite.into(),
            other: other.into(),
        }
    }

    pub fn touching_color(sprite: &str, color: &str) -> Cond {
        Cond::TouchingColor {
            sprite: sprite.into(),
            color: color.into(),
        }
    }

    pub fn or(a: Cond, b: Cond) -> Cond {
        Cond::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Cond, b: Cond) -> Cond {
        Cond::And(Box::new(a), Box::new(b))
    }

    pub fn not(a: Cond) -> Cond {
        Cond::Not(Box::new(a))
    }
}
