//! Challenge registry, guess log and statistics, independent of HTTP.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use corrgan_core::rng::{self, stream, CorrRng};
use corrgan_core::CorrelationMatrix;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);
/// Decimals kept in challenge payloads.
pub const PAYLOAD_DECIMALS: i32 = 4;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("no {0} matrices available")]
    EmptyPool(Label),
    #[error("unknown or expired challenge {0}")]
    UnknownChallenge(String),
    #[error("challenge {0} was already answered")]
    AlreadyAnswered(String),
    #[error("guess log {path}: {msg}")]
    Log { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Real => "real",
            Label::Fake => "fake",
        })
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "real" => Ok(Label::Real),
            "fake" => Ok(Label::Fake),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// What the client sees. There is deliberately no label field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChallengePayload {
    pub id: String,
    pub n: usize,
    pub matrix: Vec<Vec<f64>>,
}

fn round(x: f64) -> f64 {
    let scale = 10f64.powi(PAYLOAD_DECIMALS);
    (x * scale).round() / scale
}

impl ChallengePayload {
    fn new(id: String, m: &CorrelationMatrix) -> Self {
        let n = m.n();
        let matrix = (0..n).map(|i| (0..n).map(|j| round(m.get(i, j))).collect()).collect();
        ChallengePayload { id, n, matrix }
    }
}

/// One line of the guess log. Field order is fixed by declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessRecord {
    pub id: String,
    pub guess: Label,
    pub true_label: Label,
    pub correct: bool,
    pub timestamp: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub total: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
}

impl LabelStats {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as u64;
        self.accuracy = Some(self.correct as f64 / self.total as f64);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerLabel {
    pub real: LabelStats,
    pub fake: LabelStats,
}

/// Aggregates over the guess log; `per_label` is keyed by the true label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub total: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
    pub per_label: PerLabel,
}

impl Default for Stats {
    fn default() -> Self {
        Stats {
            total: 0,
            correct: 0,
            accuracy: None,
            per_label: PerLabel { real: LabelStats::default(), fake: LabelStats::default() },
        }
    }
}

impl Stats {
    pub fn add(&mut self, r: &GuessRecord) {
        self.total += 1;
        self.correct += r.correct as u64;
        self.accuracy = Some(self.correct as f64 / self.total as f64);
        match r.true_label {
            Label::Real => self.per_label.real.add(r.correct),
            Label::Fake => self.per_label.fake.add(r.correct),
        }
    }

    pub fn fold<'a>(records: impl IntoIterator<Item = &'a GuessRecord>) -> Self {
        let mut s = Stats::default();
        for r in records {
            s.add(r);
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GuessOutcome {
    pub correct: bool,
    pub true_label: Label,
    pub running_accuracy: f64,
}

#[derive(Debug)]
struct Pending {
    label: Label,
    created: Instant,
}

/// Reads every record of a guess log; a missing file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<GuessRecord>, GameError> {
    let bad = |msg: String| GameError::Log { path: path.to_path_buf(), msg };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(bad(e.to_string())),
    };
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: GuessRecord = serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", k + 1)))?;
        if r.correct != (r.guess == r.true_label) {
            return Err(bad(format!("line {}: inconsistent record", k + 1)));
        }
        out.push(r);
    }
    Ok(out)
}

/// The game state. Callers serialise access (the HTTP layer holds it
/// behind a mutex), so log appends have a single writer.
#[derive(Debug)]
pub struct Game {
    real: Vec<CorrelationMatrix>,
    fake: Vec<CorrelationMatrix>,
    rng: CorrRng,
    ttl: Duration,
    counter: u64,
    pending: HashMap<String, Pending>,
    answered: HashSet<String>,
    stats: Stats,
    log: Option<(PathBuf, File)>,
}

impl Game {
    /// `seed` fixes the label and matrix draws; `None` seeds from the OS.
    /// An existing log is replayed before new records are appended.
    pub fn new(
        real: Vec<CorrelationMatrix>,
        fake: Vec<CorrelationMatrix>,
        seed: Option<u64>,
        ttl: Duration,
        log_file: Option<&Path>,
    ) -> Result<Self, GameError> {
        let rng = match seed {
            Some(s) => rng::seeded(s, stream::SERVICE),
            None => CorrRng::from_os_rng(),
        };
        let mut stats = Stats::default();
        let mut answered = HashSet::new();
        let log = match log_file {
            Some(path) => {
                let records = read_log(path)?;
                for r in &records {
                    stats.add(r);
                    answered.insert(r.id.clone());
                }
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| GameError::Log { path: path.to_path_buf(), msg: e.to_string() })?;
                }
                let f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| GameError::Log { path: path.to_path_buf(), msg: e.to_string() })?;
                Some((path.to_path_buf(), f))
            }
            None => None,
        };
        Ok(Game {
            real,
            fake,
            rng,
            ttl,
            counter: 0,
            pending: HashMap::new(),
            answered,
            stats,
            log,
        })
    }

    pub fn pool_sizes(&self) -> (usize, usize) {
        (self.real.len(), self.fake.len())
    }

    fn expire(&mut self, now: Instant) {
        let ttl = self.ttl;
        self.pending.retain(|_, p| now.duration_since(p.created) < ttl);
    }

    /// Draws the class with probability 1/2, then a matrix uniformly from
    /// that pool.
    pub fn challenge(&mut self) -> Result<ChallengePayload, GameError> {
        let now = Instant::now();
        self.expire(now);
        let label = if self.rng.random::<bool>() { Label::Real } else { Label::Fake };
        let pool = match label {
            Label::Real => &self.real,
            Label::Fake => &self.fake,
        };
        if pool.is_empty() {
            return Err(GameError::EmptyPool(label));
        }
        let m = &pool[self.rng.random_range(0..pool.len())];
        self.counter += 1;
        let id = format!("{:016x}{:08x}", self.rng.random::<u64>(), self.counter);
        let payload = ChallengePayload::new(id.clone(), m);
        self.pending.insert(id, Pending { label, created: now });
        Ok(payload)
    }

    pub fn guess(&mut self, id: &str, guess: Label) -> Result<GuessOutcome, GameError> {
        self.expire(Instant::now());
        if self.answered.contains(id) {
            return Err(GameError::AlreadyAnswered(id.to_string()));
        }
        let pending = self.pending.remove(id).ok_or_else(|| GameError::UnknownChallenge(id.to_string()))?;
        let record = GuessRecord {
            id: id.to_string(),
            guess,
            true_label: pending.label,
            correct: guess == pending.label,
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        if let Some((path, file)) = &mut self.log {
            let line = serde_json::to_string(&record).expect("records serialise");
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|e| GameError::Log { path: path.clone(), msg: e.to_string() })?;
        }
        self.answered.insert(record.id.clone());
        self.stats.add(&record);
        Ok(GuessOutcome {
            correct: record.correct,
            true_label: record.true_label,
            running_accuracy: self.stats.accuracy.unwrap_or(0.0),
        })
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }
}
