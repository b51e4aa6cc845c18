//! Recorded gameplay: snapshots, sessions, datasets and their line-delimited
//! JSON file format.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::{ActionKind, ActionLabel, DEFAULT_D_MAX, DEFAULT_W_MAX};
use crate::engine::{CoverageSet, StatementId, TimedEvent};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const FORMAT_VERSION: u32 = 1;

/// One training pair: features at the action's onset and its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Onset tick; `features` were extracted from the state at this tick.
    pub tick: u64,
    /// Tick on which the recorder emitted the snapshot.
    pub emitted: u64,
    pub features: FeatureVector,
    pub label: ActionLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    PlayerStop,
    GameOver,
}

impl fmt::Display for EndReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EndReason::PlayerStop => "player_stop",
            EndReason::GameOver => "game_over",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecorderConfig {
    /// No-op threshold in ticks; `None` disables no-op synthesis.
    pub delta_t: Option<u32>,
    pub w_max: u32,
    pub d_max: u32,
    pub mouse_stationary_steps: u32,
}

impl Default for RecorderConfig {
    fn default() -> Self {
        RecorderConfig {
            delta_t: None,
            w_max: DEFAULT_W_MAX,
            d_max: DEFAULT_D_MAX,
            mouse_stationary_steps: 6,
        }
    }
}

impl RecorderConfig {
    pub fn with_delta_t(delta_t: Option<u32>) -> Self {
        RecorderConfig {
            delta_t,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_max < 1 || self.d_max < 1 {
            return Err(Error::Config("w_max and d_max must be at least 1".into()));
        }
        if self.mouse_stationary_steps < 1 {
            return Err(Error::Config("mouse_stationary_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSession {
    pub seed: u64,
    pub end_reason: EndReason,
    pub duration_ticks: u64,
    pub covered: CoverageSet,
    pub snapshots: Vec<Snapshot>,
    /// Raw input log, for replay and re-derivation.
    pub events: Vec<TimedEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDataset {
    pub game_id: String,
    pub recorder_config: RecorderConfig,
    pub feature_fingerprint: String,
    pub sessions: Vec<RecordingSession>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    game_id: String,
    recorder_config: RecorderConfig,
    feature_fingerprint: String,
    session_count: usize,
    snapshot_count: usize,
}

impl TrainingDataset {
    pub fn new(game_id: &str, recorder_config: RecorderConfig, feature_fingerprint: &str) -> Self {
        TrainingDataset {
            game_id: game_id.to_string(),
            recorder_config,
            feature_fingerprint: feature_fingerprint.to_string(),
            sessions: Vec::new(),
        }
    }

    pub fn snapshot_count(&self) -> usize {
        self.sessions.iter().map(|s| s.snapshots.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot_count() == 0
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            version: FORMAT_VERSION,
            game_id: self.game_id.clone(),
            recorder_config: self.recorder_config,
            feature_fingerprint: self.feature_fingerprint.clone(),
            session_count: self.sessions.len(),
            snapshot_count: self.snapshot_count(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for s in &self.sessions {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: BufRead>(r: R, path: &Path) -> Result<TrainingDataset> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (n, first) = lines.next().ok_or_else(|| parse_err(1, "empty dataset file".into()))?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| parse_err(n, e.to_string()))?;
        if header.version != FORMAT_VERSION {
            return Err(parse_err(n, format!("unsupported format version {}", header.version)));
        }
        let mut sessions = Vec::with_capacity(header.session_count);
        let mut last = n;
        for (n, line) in lines {
            let s: RecordingSession = serde_json::from_str(&line?).map_err(|e| parse_err(n, e.to_string()))?;
            sessions.push(s);
            last = n;
        }
        let ds = TrainingDataset {
            game_id: header.game_id,
            recorder_config: header.recorder_config,
            feature_fingerprint: header.feature_fingerprint,
            sessions,
        };
        if ds.sessions.len() != header.session_count || ds.snapshot_count() != header.snapshot_count {
            return Err(parse_err(
                last,
                format!(
                    "header announces {} sessions / {} snapshots, file has {} / {}",
                    header.session_count,
                    header.snapshot_count,
                    ds.sessions.len(),
                    ds.snapshot_count()
                ),
            ));
        }
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<TrainingDataset> {
        let file = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(file), path)
    }

    pub fn stats(&self) -> DatasetStats {
        let mut per_action = BTreeMap::new();
        let mut noops = 0;
        for snap in self.sessions.iter().flat_map(|s| &s.snapshots) {
            *per_action.entry(snap.label.kind()).or_insert(0) += 1;
            noops += snap.label.is_noop() as usize;
        }
        let snapshots = self.snapshot_count();
        DatasetStats {
            game_id: self.game_id.clone(),
            sessions: self.sessions.len(),
            snapshots,
            noops,
            noop_proportion: if snapshots == 0 { 0.0 } else { noops as f64 / snapshots as f64 },
            per_action,
            ticks: self.sessions.iter().map(|s| s.duration_ticks).sum(),
        }
    }

    /// Every statement covered by some session.
    pub fn covered(&self) -> CoverageSet {
        let mut all = CoverageSet::default();
        for s in &self.sessions {
            all.extend(&s.covered);
        }
        all
    }
}

/// Snapshots of every session that covered `target`, concatenated in
/// session order.
pub fn filter_sessions(dataset: &TrainingDataset, target: StatementId) -> Vec<Snapshot> {
    dataset
        .sessions
        .iter()
        .filter(|s| s.covered.contains(target))
        .flat_map(|s| s.snapshots.iter().cloned())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub game_id: String,
    pub sessions: usize,
    pub snapshots: usize,
    pub noops: usize,
    pub noop_proportion: f64,
    pub per_action: BTreeMap<ActionKind, usize>,
    pub ticks: u64,
}

impl DatasetStats {
    /// Snapshot count followed by the no-op proportion in parentheses.
    pub fn count_cell(&self) -> String {
        format!("{} ({:.2})", self.snapshots, self.noop_proportion)
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>9} {:>8} {:>18}", "game", "sessions", "ticks", "snapshots (no-op)")?;
        writeln!(
            f,
            "{:<12} {:>9} {:>8} {:>18}",
            self.game_id,
            self.sessions,
            self.ticks,
            self.count_cell()
        )?;
        for (kind, n) in &self.per_action {
            writeln!(f, "  {kind:<20} {n}")?;
        }
        Ok(())
    }
}
