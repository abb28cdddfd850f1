//! Programs, transformations and models.
//!
//! A [`ProgramState`] is a base kernel plus the ordered trace of
//! [`Mutator`]s applied to it. The features that the cost model reads are
//! derived from the trace alone, so replaying a trace from the empty state
//! always reproduces the same features.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default trace length cap.
pub const DEFAULT_HORIZON: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TileFactor {
    F4,
    F8,
    F16,
}

impl TileFactor {
    pub const ALL: [TileFactor; 3] = [TileFactor::F4, TileFactor::F8, TileFactor::F16];

    pub fn value(self) -> u32 {
        match self {
            TileFactor::F4 => 4,
            TileFactor::F8 => 8,
            TileFactor::F16 => 16,
        }
    }

    pub fn from_value(v: u32) -> Option<Self> {
        match v {
            4 => Some(TileFactor::F4),
            8 => Some(TileFactor::F8),
            16 => Some(TileFactor::F16),
            _ => None,
        }
    }
}

/// A single schedule transformation.
///
/// The canonical spellings (`Tile(8)`, `Vectorize`, `Parallel`, `Unroll`,
/// `CacheWrite`) are the wire format in prompts, responses and logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutator {
    Tile(TileFactor),
    Vectorize,
    Parallel,
    Unroll,
    CacheWrite,
}

impl Mutator {
    /// Every mutator, in canonical string order.
    pub fn all() -> Vec<Mutator> {
        let mut all = vec![
            Mutator::Tile(TileFactor::F4),
            Mutator::Tile(TileFactor::F8),
            Mutator::Tile(TileFactor::F16),
            Mutator::Vectorize,
            Mutator::Parallel,
            Mutator::Unroll,
            Mutator::CacheWrite,
        ];
        all.sort_by(Mutator::canonical_cmp);
        all
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Orders mutators by their canonical strings.
    pub fn canonical_cmp(a: &Mutator, b: &Mutator) -> Ordering {
        a.canonical().cmp(&b.canonical())
    }
}

/// Lexicographic order of two traces over canonical mutator strings.
pub fn trace_cmp(a: &[Mutator], b: &[Mutator]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match Mutator::canonical_cmp(x, y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

impl fmt::Display for Mutator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutator::Tile(factor) => write!(f, "Tile({})", factor.value()),
            Mutator::Vectorize => f.write_str("Vectorize"),
            Mutator::Parallel => f.write_str("Parallel"),
            Mutator::Unroll => f.write_str("Unroll"),
            Mutator::CacheWrite => f.write_str("CacheWrite"),
        }
    }
}

impl FromStr for Mutator {
    type Err = Error;

    /// Accepts only the exact canonical spellings.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownMutator(s.to_string());
        match s {
            "Vectorize" => Ok(Mutator::Vectorize),
            "Parallel" => Ok(Mutator::Parallel),
            "Unroll" => Ok(Mutator::Unroll),
            "CacheWrite" => Ok(Mutator::CacheWrite),
            _ => {
                let arg = s
                    .strip_prefix("Tile(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .ok_or_else(unknown)?;
                // Reject "+8", "08" and friends: only the canonical digits.
                if arg.is_empty() || arg.starts_with(['0', '+']) {
                    return Err(unknown());
                }
                let value: u32 = arg.parse().map_err(|_| unknown())?;
                TileFactor::from_value(value)
                    .map(Mutator::Tile)
                    .ok_or_else(unknown)
            }
        }
    }
}

impl Serialize for Mutator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mutator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Schedule features derived from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Features {
    pub tile_factor: u32,
    pub vectorized: bool,
    pub parallelized: bool,
    pub unrolled: bool,
    /// Unroll was applied while a tile factor > 1 was in effect.
    pub unroll_after_tile: bool,
    pub cached_write: bool,
    /// CacheWrite was applied after vectorization.
    pub cache_after_vectorize: bool,
}

impl Default for Features {
    fn default() -> Self {
        Features {
            tile_factor: 1,
            vectorized: false,
            parallelized: false,
            unrolled: false,
            unroll_after_tile: false,
            cached_write: false,
            cache_after_vectorize: false,
        }
    }
}

impl Features {
    /// Whether `m` may be applied on top of these features (ignoring the horizon).
    pub fn allows(&self, m: Mutator) -> bool {
        match m {
            Mutator::Tile(_) => true,
            Mutator::Vectorize => !self.vectorized,
            Mutator::Parallel => !self.parallelized,
            Mutator::Unroll => !self.unrolled,
            Mutator::CacheWrite => !self.cached_write,
        }
    }

    /// Features after applying `m`; validity is the caller's concern.
    pub fn after(mut self, m: Mutator) -> Self {
        match m {
            Mutator::Tile(factor) => self.tile_factor = factor.value(),
            Mutator::Vectorize => self.vectorized = true,
            Mutator::Parallel => self.parallelized = true,
            Mutator::Unroll => {
                self.unrolled = true;
                self.unroll_after_tile = self.tile_factor > 1;
            }
            Mutator::CacheWrite => {
                self.cached_write = true;
                self.cache_after_vectorize = self.vectorized;
            }
        }
        self
    }

    /// Recomputes features by replaying `trace` from the empty program.
    pub fn from_trace(trace: &[Mutator]) -> Self {
        trace.iter().fold(Features::default(), |f, &m| f.after(m))
    }
}

/// Base kernel plus an ordered transformation trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ProgramState {
    trace: Vec<Mutator>,
    features: Features,
    horizon: usize,
}

impl ProgramState {
    /// The unoptimized program with an empty trace.
    pub fn initial(horizon: usize) -> Self {
        ProgramState {
            trace: Vec::new(),
            features: Features::default(),
            horizon,
        }
    }

    /// Replays `trace` from the initial program, validating every step.
    pub fn from_trace(trace: &[Mutator], horizon: usize) -> Result<Self> {
        trace
            .iter()
            .try_fold(ProgramState::initial(horizon), |s, &m| s.apply(m))
    }

    pub fn trace(&self) -> &[Mutator] {
        &self.trace
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn depth(&self) -> usize {
        self.trace.len()
    }

    pub fn at_horizon(&self) -> bool {
        self.trace.len() >= self.horizon
    }

    /// All mutators applicable here, in canonical order. Empty at the horizon.
    pub fn valid_mutators(&self) -> Vec<Mutator> {
        if self.at_horizon() {
            return Vec::new();
        }
        Mutator::all()
            .into_iter()
            .filter(|&m| self.features.allows(m))
            .collect()
    }

    /// Returns a new state with `m` appended.
    pub fn apply(&self, m: Mutator) -> Result<ProgramState> {
        if self.at_horizon() {
            return Err(Error::HorizonExceeded {
                horizon: self.horizon,
            });
        }
        if !self.features.allows(m) {
            return Err(Error::InvalidMutator(m));
        }
        let mut trace = self.trace.clone();
        trace.push(m);
        Ok(ProgramState {
            trace,
            features: self.features.after(m),
            horizon: self.horizon,
        })
    }

    pub fn trace_string(&self) -> String {
        render_trace(&self.trace)
    }
}

/// Renders a trace as `[Tile(8), Vectorize]`.
pub fn render_trace(trace: &[Mutator]) -> String {
    let parts: Vec<String> = trace.iter().map(Mutator::canonical).collect();
    format!("[{}]", parts.join(", "))
}

/// A candidate proposer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub id: String,
    pub parameter_count: f64,
}

impl ModelDescriptor {
    pub fn new(id: impl Into<String>, parameter_count: f64) -> Self {
        ModelDescriptor {
            id: id.into(),
            parameter_count,
        }
    }
}

/// Index of a model inside its [`ModelSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModelIdx(pub usize);

/// A nonempty set of models with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    models: Vec<ModelDescriptor>,
}

impl ModelSet {
    pub fn new(models: Vec<ModelDescriptor>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Config("model set is empty".into()));
        }
        for (i, m) in models.iter().enumerate() {
            if !(m.parameter_count > 0.0 && m.parameter_count.is_finite()) {
                return Err(Error::Config(format!(
                    "model {:?} has non-positive parameter count",
                    m.id
                )));
            }
            if models[..i].iter().any(|o| o.id == m.id) {
                return Err(Error::Config(format!("duplicate model id {:?}", m.id)));
            }
        }
        Ok(ModelSet { models })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[ModelDescriptor] {
        &self.models
    }

    pub fn get(&self, idx: ModelIdx) -> &ModelDescriptor {
        &self.models[idx.0]
    }

    pub fn id(&self, idx: ModelIdx) -> &str {
        &self.models[idx.0].id
    }

    pub fn indices(&self) -> impl Iterator<Item = ModelIdx> {
        (0..self.models.len()).map(ModelIdx)
    }

    pub fn lookup(&self, id: &str) -> Result<ModelIdx> {
        self.models
            .iter()
            .position(|m| m.id == id)
            .map(ModelIdx)
            .ok_or_else(|| Error::UnknownModel(id.to_string()))
    }

    pub fn max_params(&self) -> f64 {
        self.models
            .iter()
            .map(|m| m.parameter_count)
            .fold(f64::MIN, f64::max)
    }

    pub fn min_params(&self) -> f64 {
        self.models
            .iter()
            .map(|m| m.parameter_count)
            .fold(f64::MAX, f64::min)
    }

    /// True for every model whose size equals the maximum (ties included).
    pub fn is_largest(&self, idx: ModelIdx) -> bool {
        self.get(idx).parameter_count == self.max_params()
    }

    /// First largest model in set order; the escalation target.
    pub fn largest(&self) -> ModelIdx {
        self.indices()
            .find(|&i| self.is_largest(i))
            .expect("model set is nonempty")
    }

    /// First smallest model in set order.
    pub fn smallest(&self) -> ModelIdx {
        let min = self.min_params();
        self.indices()
            .find(|&i| self.get(i).parameter_count == min)
            .expect("model set is nonempty")
    }
}

/// A transformation sequence paired with the model recommended to act next.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    pub mutators: Vec<Mutator>,
    pub next_model: ModelIdx,
}
