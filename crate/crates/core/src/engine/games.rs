//! Built-in toy games, each modelled on a classic arcade genre.

use std::fmt;
use std::str::FromStr;

use super::builder::dsl::*;
use super::builder::{sprite, Block, GameBuilder};
use super::spec::*;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinGame {
    PaddleBall,
    FlapBird,
    FruitCatch,
    SnakeGrid,
    DotChase,
}

impl BuiltinGame {
    pub const ALL: [BuiltinGame; 5] = [
        BuiltinGame::PaddleBall,
        BuiltinGame::FlapBird,
        BuiltinGame::FruitCatch,
        BuiltinGame::SnakeGrid,
        BuiltinGame::DotChase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinGame::PaddleBall => "PaddleBall",
            BuiltinGame::FlapBird => "FlapBird",
            BuiltinGame::FruitCatch => "FruitCatch",
            BuiltinGame::SnakeGrid => "SnakeGrid",
            BuiltinGame::DotChase => "DotChase",
        }
    }

    pub fn spec(self) -> GameSpec {
        match self {
            BuiltinGame::PaddleBall => paddle_ball(),
            BuiltinGame::FlapBird => flap_bird(),
            BuiltinGame::FruitCatch => fruit_catch(),
            BuiltinGame::SnakeGrid => snake_grid(),
            BuiltinGame::DotChase => dot_chase(),
        }
    }
}

impl fmt::Display for BuiltinGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinGame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinGame::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown game {s:?}")))
    }
}

/// Keep a ball in the air with a mouse-driven paddle; five returns win, the
/// floor loses.
pub fn paddle_ball() -> GameSpec {
    let mut g = GameBuilder::new("PaddleBall");
    g.sprite(sprite("Paddle", 0.0, -140.0, 60.0, 12.0));
    let mut ball = sprite("Ball", 0.0, 100.0, 14.0, 14.0);
    ball.rotation = RotationStyle::AllAround;
    ball.heading = 180.0;
    g.sprite(ball);
    g.global("score", 0.0, 0.0, 10.0);
    g.region("brown", -240.0, -180.0, 240.0, -165.0);

    g.script(Trigger::Start, |b| {
        b.set(global("score"), num(0.0));
        b.go_to("Ball", random(-180.0, 180.0), num(100.0));
        b.set_heading("Ball", random(140.0, 220.0));
    });
    g.script(Trigger::EveryTick, |b| {
        b.set_x("Paddle", Expr::MouseX);
    });
    let mut win = None;
    g.script(Trigger::EveryTick, |b| {
        b.move_steps("Ball", num(8.0));
        b.bounce_on_edge("Ball");
        b.if_(touching("Ball", "Paddle"), |t| {
            t.set_heading("Ball", random(-40.0, 40.0));
            t.set_y("Ball", num(-126.0));
            t.change(global("score"), num(1.0));
            t.if_(ge(get(global("score")), num(7.0)), |w| {
                win = Some(w.stop());
            });
        });
        b.if_(touching_color("Ball", "brown"), |l| {
            l.stop();
        });
    });
    g.winning(win.expect("winning statement"));
    g.build()
}

/// Flap through three gaps with a single key.
pub fn flap_bird() -> GameSpec {
    let mut g = GameBuilder::new("FlapBird");
    let mut bird = sprite("Bird", -120.0, 0.0, 30.0, 24.0);
    bird.costumes.push(Costume {
        name: "flap".into(),
        width: 30.0,
        height: 20.0,
    });
    bird.variables.push(VariableSpec::new("vy", 0.0, -12.0, 12.0));
    g.sprite(bird);
    g.sprite(sprite("PipeTop", 240.0, 150.0, 50.0, 180.0));
    g.sprite(sprite("PipeBottom", 240.0, -150.0, 50.0, 180.0));
    g.global("score", 0.0, 0.0, 10.0);
    g.global("gap", 0.0, -180.0, 180.0);
    g.region("tan", -240.0, -180.0, 240.0, -165.0);

    fn place_pipes(b: &mut Block) {
        b.set(global("gap"), random(-30.0, 30.0));
        b.go_to("PipeTop", num(240.0), add(get(global("gap")), num(150.0)));
        b.go_to("PipeBottom", num(240.0), sub(get(global("gap")), num(150.0)));
    }

    g.script(Trigger::Start, |b| {
        b.set(global("score"), num(0.0));
        b.set(local("Bird", "vy"), num(0.0));
        b.go_to("Bird", num(-120.0), num(0.0));
        place_pipes(b);
    });
    g.script(Trigger::KeyDown(Key::Space), |b| {
        b.set(local("Bird", "vy"), num(8.0));
        b.next_costume("Bird");
    });
    g.script(Trigger::EveryTick, |b| {
        b.change(local("Bird", "vy"), num(-0.5));
        b.change_y("Bird", get(local("Bird", "vy")));
        b.if_(
            or(touching("Bird", "PipeTop"), touching("Bird", "PipeBottom")),
            |t| {
                t.stop();
            },
        );
        b.if_(touching_color("Bird", "tan"), |t| {
            t.stop();
        });
    });
    let mut win = None;
    g.script(Trigger::EveryTick, |b| {
        b.change_x("PipeTop", num(-4.0));
        b.change_x("PipeBottom", num(-4.0));
        b.if_(lt(x_of("PipeTop"), num(-230.0)), |t| {
            place_pipes(t);
            t.change(global("score"), num(1.0));
            t.if_(ge(get(global("score")), num(3.0)), |w| {
                win = Some(w.stop());
            });
        });
    });
    g.winning(win.expect("winning statement"));
    g.build()
}

/// Catch seven falling fruits with a bowl steered by the arrow keys; three
/// misses lose.
pub fn fruit_catch() -> GameSpec {
    let mut g = GameBuilder::new("FruitCatch");
    g.sprite(sprite("Bowl", 0.0, -150.0, 40.0, 20.0));
    g.sprite(sprite("Fruit", 0.0, 170.0, 20.0, 20.0));
    g.global("score", 0.0, 0.0, 10.0);
    g.global("missed", 0.0, 0.0, 5.0);
    g.region("green", -240.0, -180.0, 240.0, -170.0);

    g.script(Trigger::Start, |b| {
        b.set(global("score"), num(0.0));
        b.set(global("missed"), num(0.0));
        b.go_to("Fruit", random(-200.0, 200.0), num(170.0));
    });
    g.script(Trigger::EveryTick, |b| {
        b.if_(key(Key::Left), |t| {
            t.change_x("Bowl", num(-8.0));
        });
        b.if_(key(Key::Right), |t| {
            t.change_x("Bowl", num(8.0));
        });
    });
    let mut win = None;
    g.script(Trigger::EveryTick, |b| {
        b.change_y("Fruit", num(-6.0));
        b.if_(touching("Fruit", "Bowl"), |t| {
            t.change(global("score"), num(1.0));
            t.go_to("Fruit", random(-200.0, 200.0), num(170.0));
            t.if_(ge(get(global("score")), num(7.0)), |w| {
                win = Some(w.stop());
            });
        });
        b.if_(touching_color("Fruit", "green"), |t| {
            t.change(global("missed"), num(1.0));
            t.go_to("Fruit", random(-200.0, 200.0), num(170.0));
            t.if_(ge(get(global("missed")), num(3.0)), |l| {
                l.stop();
            });
        });
    });
    g.winning(win.expect("winning statement"));
    g.build()
}

/// Steer a grid-stepping head onto three food pellets; leaving the board
/// loses.
pub fn snake_grid() -> GameSpec {
    let mut g = GameBuilder::new("SnakeGrid");
    g.sprite(sprite("Head", 0.0, 0.0, 18.0, 18.0));
    g.sprite(sprite("Food", 100.0, 100.0, 18.0, 18.0));
    g.global("score", 0.0, 0.0, 10.0);
    g.global("dir", 1.0, 0.0, 3.0);
    g.global("timer", 0.0, 0.0, 4.0);

    fn place_food(b: &mut Block) {
        b.go_to(
            "Food",
            mul(random_int(-10, 10), num(20.0)),
            mul(random_int(-7, 7), num(20.0)),
        );
    }

    g.script(Trigger::Start, |b| {
        b.set(global("score"), num(0.0));
        b.set(global("dir"), num(1.0));
        b.set(global("timer"), num(0.0));
        b.go_to("Head", num(0.0), num(0.0));
        place_food(b);
    });
    for (k, dir) in [(Key::Up, 0.0), (Key::Right, 1.0), (Key::Down, 2.0), (Key::Left, 3.0)] {
        g.script(Trigger::KeyDown(k), |b| {
            b.set(global("dir"), num(dir));
        });
    }
    let mut win = None;
    g.script(Trigger::EveryTick, |b| {
        b.change(global("timer"), num(1.0));
        b.if_(ge(get(global("timer")), num(4.0)), |t| {
            t.set(global("timer"), num(0.0));
            t.if_else(
                eq(get(global("dir")), num(0.0)),
                |a| {
                    a.change_y("Head", num(20.0));
                },
                |a| {
                    a.if_else(
                        eq(get(global("dir")), num(1.0)),
                        |c| {
                            c.change_x("Head", num(20.0));
                        },
                        |c| {
                            c.if_else(
                                eq(get(global("dir")), num(2.0)),
                                |d| {
                                    d.change_y("Head", num(-20.0));
                                },
                                |d| {
                                    d.change_x("Head", num(-20.0));
                                },
                            );
                        },
                    );
                },
            );
        });
        b.if_(touching("Head", "Food"), |t| {
            t.change(global("score"), num(1.0));
            place_food(t);
            t.if_(ge(get(global("score")), num(3.0)), |w| {
                win = Some(w.stop());
            });
        });
        b.if_(
            or(gt(abs(x_of("Head")), num(220.0)), gt(abs(y_of("Head")), num(160.0))),
            |t| {
                t.stop();
            },
        );
    });
    g.winning(win.expect("winning statement"));
    g.build()
}

/// Click to steer towards dots while a chaser follows; space gives a short
/// speed boost.
pub fn dot_chase() -> GameSpec {
    let mut g = GameBuilder::new("DotChase");
    let mut player = sprite("Player", 0.0, 0.0, 24.0, 24.0);
    player.variables.push(VariableSpec::new("tx", 0.0, -240.0, 240.0));
    player.variables.push(VariableSpec::new("ty", 0.0, -180.0, 180.0));
    g.sprite(player);
    g.sprite(sprite("Dot", 100.0, 100.0, 16.0, 16.0));
    let mut enemy = sprite("Enemy", 200.0, 150.0, 24.0, 24.0);
    enemy.rotation = RotationStyle::AllAround;
    g.sprite(enemy);
    g.global("score", 0.0, 0.0, 10.0);
    g.global("boost", 0.0, 0.0, 20.0);

    g.script(Trigger::Start, |b| {
        b.set(global("score"), num(0.0));
        b.set(global("boost"), num(0.0));
        b.go_to("Player", num(0.0), num(0.0));
        b.set(local("Player", "tx"), num(0.0));
        b.set(local("Player", "ty"), num(0.0));
        b.go_to("Dot", random(-200.0, 200.0), random(-150.0, 150.0));
        b.go_to("Enemy", num(200.0), num(150.0));
    });
    g.script(Trigger::MouseClick, |b| {
        b.set(local("Player", "tx"), Expr::MouseX);
        b.set(local("Player", "ty"), Expr::MouseY);
    });
    g.script(Trigger::KeyDown(Key::Space), |b| {
        b.if_(le(get(global("boost")), num(0.0)), |t| {
            t.set(global("boost"), num(20.0));
        });
    });
    let mut win = None;
    g.script(Trigger::EveryTick, |b| {
        let target = || (get(local("Player", "tx")), get(local("Player", "ty")));
        let (tx, ty) = target();
        b.point_towards_point("Player", tx, ty);
        let (tx, ty) = target();
        b.if_(gt(distance_to_point("Player", tx, ty), num(5.0)), |t| {
            t.if_else(
                gt(get(global("boost")), num(0.0)),
                |f| {
                    f.move_steps("Player", num(7.0));
                    f.change(global("boost"), num(-1.0));
                },
                |s| {
                    s.move_steps("Player", num(4.0));
                },
            );
        });
        b.if_(touching("Player", "Dot"), |t| {
            t.change(global("score"), num(1.0));
            t.go_to("Dot", random(-200.0, 200.0), random(-150.0, 150.0));
            t.if_(ge(get(global("score")), num(7.0)), |w| {
                win = Some(w.stop());
            });
        });
    });
    g.script(Trigger::EveryTick, |b| {
        b.point_towards("Enemy", "Player");
        b.move_steps("Enemy", num(2.0));
        b.if_(touching("Enemy", "Player"), |t| {
            t.stop();
        });
    });
    g.winning(win.expect("winning statement"));
    g.build()
}
