//! Game-state feature extraction: the normalised input vector a network
//! sees. The schema is fixed per game so every snapshot and every network
//! activation uses the same slot order.

use serde::{Deserialize, Serialize};

use crate::engine::{
    Game, GameState, RotationStyle, X_MAX, X_MIN, Y_MAX, Y_MIN,
};
use crate::engine::state_hex_digest;

pub const HEADING_BOUNDS: (f64, f64) = (-180.0, 180.0);
pub const SIZE_BOUNDS: (f64, f64) = (0.0, 200.0);
pub const DISTANCE_BOUNDS: (f64, f64) = (-600.0, 600.0);

/// Colour distance is measured on a coarse occupancy grid.
pub const COLOR_GRID: (usize, usize) = (48, 36);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    Sprite(String),
    Global,
    Mouse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureAttribute {
    PosX,
    PosY,
    Heading,
    Costume,
    Size,
    Variable(String),
    DistanceToSprite(String),
    DistanceToColor(String),
    MouseX,
    MouseY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub source: FeatureSource,
    pub attribute: FeatureAttribute,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Probe {
    PosX(usize),
    PosY(usize),
    Heading(usize),
    Costume(usize),
    Size(usize),
    SpriteVar(usize, usize),
    Global(usize),
    DistanceToSprite(usize, usize),
    DistanceToColor(usize, Vec<(f64, f64)>),
    MouseX,
    MouseY,
}

impl Probe {
    fn sprite(&self) -> Option<usize> {
        match *self {
            Probe::PosX(s)
            | Probe::PosY(s)
            | Probe::Heading(s)
            | Probe::Costume(s)
            | Probe::Size(s)
            | Probe::SpriteVar(s, _)
            | Probe::DistanceToSprite(s, _)
            | Probe::DistanceToColor(s, _) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    game_id: String,
    entries: Vec<FeatureDescriptor>,
    probes: Vec<Probe>,
}

/// Normalised feature values, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Linear map of `v` from `[lo, hi]` onto `[-1, 1]`, clamped.
pub fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
}

/// Inverse of [`normalize`] for values inside `[-1, 1]`.
pub fn denormalize(v: f64, lo: f64, hi: f64) -> f64 {
    lo + (v.clamp(-1.0, 1.0) + 1.0) / 2.0 * (hi - lo)
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn game_id(&self) -> &str {
        &self.game_id
    }

    pub fn entries(&self) -> &[FeatureDescriptor] {
        &self.entries
    }

    /// Short stable digest of the slot layout, stored in dataset headers.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(&(&self.game_id, &self.entries)).expect("serializable");
        state_hex_digest(text.as_bytes())[..16].to_string()
    }

    pub fn extract(&self, state: &GameState) -> FeatureVector {
        let mut out = Vec::with_capacity(self.entries.len());
        self.extract_into(state, &mut out);
        FeatureVector(out)
    }

    pub fn extract_into(&self, state: &GameState, out: &mut Vec<f64>) {
        out.clear();
        for (d, probe) in self.entries.iter().zip(&self.probes) {
            if let Some(s) = probe.sprite() {
                if !state.sprites[s].visible {
                    out.push(0.0);
                    continue;
                }
            }
            let raw = match probe {
                Probe::PosX(s) => state.sprites[*s].x,
                Probe::PosY(s) => state.sprites[*s].y,
                Probe::Heading(s) => state.sprites[*s].heading,
                Probe::Costume(s) => state.sprites[*s].costume as f64,
                Probe::Size(s) => state.sprites[*s].size,
                Probe::SpriteVar(s, i) => state.sprites[*s].variables[*i],
                Probe::Global(i) => state.globals[*i],
                Probe::DistanceToSprite(a, b) => {
                    let (a, b) = (&state.sprites[*a], &state.sprites[*b]);
                    (a.x - b.x).hypot(a.y - b.y)
                }
                Probe::DistanceToColor(s, cells) => {
                    let sp = &state.sprites[*s];
                    cells
                        .iter()
                        .map(|(x, y)| (sp.x - x).hypot(sp.y - y))
                        .fold(DISTANCE_BOUNDS.1, f64::min)
                }
                Probe::MouseX => state.mouse.0,
                Probe::MouseY => state.mouse.1,
            };
            out.push(normalize(raw, d.lo, d.hi));
        }
    }
}

/// Free-function form of [`FeatureSchema::extract`].
pub fn extract(state: &GameState, schema: &FeatureSchema) -> FeatureVector {
    schema.extract(state)
}

/// Derives the schema: per sprite its position and size always, heading for
/// all-around rotation, costume when some script changes it, private
/// variables, and distances for each touching listener; then global
/// variables, then the mouse position if any code uses the mouse.
pub fn feature_schema(game: &Game) -> FeatureSchema {
    let spec = game.spec();
    let program = game.program();
    let (touch_sprites, touch_colors) = spec.touch_listeners();
    let costume_changers = spec.costume_changers();

    let mut entries = Vec::new();
    let mut probes = Vec::new();
    let mut push = |source: FeatureSource, attribute, (lo, hi): (f64, f64), probe| {
        entries.push(FeatureDescriptor {
            source,
            attribute,
            lo,
            hi,
        });
        probes.push(probe);
    };

    for (si, s) in spec.sprites.iter().enumerate() {
        let src = || FeatureSource::Sprite(s.name.clone());
        push(src(), FeatureAttribute::PosX, (X_MIN, X_MAX), Probe::PosX(si));
        push(src(), FeatureAttribute::PosY, (Y_MIN, Y_MAX), Probe::PosY(si));
        if s.rotation == RotationStyle::AllAround {
            push(src(), FeatureAttribute::Heading, HEADING_BOUNDS, Probe::Heading(si));
        }
        if s.costumes.len() > 1 && costume_changers.contains(&s.name) {
            let hi = (s.costumes.len() - 1) as f64;
            push(src(), FeatureAttribute::Costume, (0.0, hi), Probe::Costume(si));
        }
        push(src(), FeatureAttribute::Size, SIZE_BOUNDS, Probe::Size(si));
        for (vi, v) in s.variables.iter().enumerate() {
            push(
                src(),
                FeatureAttribute::Variable(v.name.clone()),
                (v.min, v.max),
                Probe::SpriteVar(si, vi),
            );
        }
        let mut others: Vec<usize> = touch_sprites
            .iter()
            .filter(|(a, _)| *a == s.name)
            .filter_map(|(_, b)| program.sprite_index(b))
            .collect();
        others.sort_unstable();
        others.dedup();
        for o in others {
            push(
                src(),
                FeatureAttribute::DistanceToSprite(spec.sprites[o].name.clone()),
                DISTANCE_BOUNDS,
                Probe::DistanceToSprite(si, o),
            );
        }
        for (_, color) in touch_colors.iter().filter(|(a, _)| *a == s.name) {
            let cells = color_cells(game, color);
            push(
                src(),
                FeatureAttribute::DistanceToColor(color.clone()),
                DISTANCE_BOUNDS,
                Probe::DistanceToColor(si, cells),
            );
        }
    }
    for (gi, v) in spec.globals.iter().enumerate() {
        push(
            FeatureSource::Global,
            FeatureAttribute::Variable(v.name.clone()),
            (v.min, v.max),
            Probe::Global(gi),
        );
    }
    if spec.uses_mouse() {
        push(FeatureSource::Mouse, FeatureAttribute::MouseX, (X_MIN, X_MAX), Probe::MouseX);
        push(FeatureSource::Mouse, FeatureAttribute::MouseY, (Y_MIN, Y_MAX), Probe::MouseY);
    }

    FeatureSchema {
        game_id: spec.id.clone(),
        entries,
        probes,
    }
}

/// Centres of the grid cells painted in `color`.
fn color_cells(game: &Game, color: &str) -> Vec<(f64, f64)> {
    let (cols, rows) = COLOR_GRID;
    let cw = (X_MAX - X_MIN) / cols as f64;
    let ch = (Y_MAX - Y_MIN) / rows as f64;
    let regions: Vec<_> = game.spec().regions.iter().filter(|r| r.color == color).collect();
    let mut cells = Vec::new();
    for j in 0..rows {
        for i in 0..cols {
            let x = X_MIN + cw * (i as f64 + 0.5);
            let y = Y_MIN + ch * (j as f64 + 0.5);
            if regions
                .iter()
                .any(|r| (r.x_min..=r.x_max).contains(&x) && (r.y_min..=r.y_max).contains(&y))
            {
                cells.push((x, y));
            }
        }
    }
    cells
}
