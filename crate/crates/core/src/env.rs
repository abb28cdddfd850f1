//! The compiler environment the search optimizes against.
//!
//! [`Environment`] is the seam a real backend would plug into. [`SynthKernel`]
//! is a deterministic stand-in: an analytic cost model over schedule
//! features with order-dependent gains and reachable regressions, small
//! enough to solve exhaustively with [`SynthKernel::brute_force_optimum`].

use std::collections::HashMap;
use std::fmt::Write;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::program::{Features, Mutator, ProgramState};

pub const SYNTH_KERNEL_VERSION: &str = "SynthKernel-v1";
pub const DEFAULT_BASE_COST: f64 = 1000.0;
/// Largest horizon the exhaustive oracle accepts.
pub const MAX_ORACLE_HORIZON: usize = 8;

pub trait Environment {
    fn version(&self) -> &str;

    fn horizon(&self) -> usize;

    fn base_cost(&self) -> f64;

    /// Predicted cost of a program; strictly positive.
    fn cost(&self, state: &ProgramState) -> f64;

    /// Source-like rendering of a program for prompts.
    fn render(&self, state: &ProgramState) -> String;

    fn initial(&self) -> ProgramState {
        ProgramState::initial(self.horizon())
    }

    fn speedup(&self, state: &ProgramState) -> f64 {
        self.base_cost() / self.cost(state)
    }

    /// Normalized reward: 0 at the baseline, approaching 1 as cost vanishes.
    fn reward(&self, state: &ProgramState) -> f64 {
        (1.0 - self.cost(state) / self.base_cost()).clamp(0.0, 1.0)
    }
}

/// Exact gain product, kept rational so that oracle optima compare exactly.
pub type Gain = Ratio<u64>;

fn r(numer: u64, denom: u64) -> Gain {
    Ratio::new(numer, denom)
}

/// Analytic synthetic kernel with a compiled-in gain table.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthKernel {
    base_cost: f64,
    horizon: usize,
}

impl Default for SynthKernel {
    fn default() -> Self {
        SynthKernel {
            base_cost: DEFAULT_BASE_COST,
            horizon: crate::program::DEFAULT_HORIZON,
        }
    }
}

impl SynthKernel {
    pub fn new(base_cost: f64, horizon: usize) -> Result<Self> {
        if !(base_cost > 0.0 && base_cost.is_finite()) {
            return Err(Error::Config(format!("base_cost must be positive, got {base_cost}")));
        }
        Ok(SynthKernel { base_cost, horizon })
    }

    /// Product of the gains implied by a feature set.
    pub fn gain(features: &Features) -> Gain {
        let tile = match features.tile_factor {
            4 => r(8, 5),
            8 => r(2, 1),
            16 => r(9, 5),
            _ => r(1, 1),
        };
        let vectorize = match (features.vectorized, features.tile_factor >= 8) {
            (false, _) => r(1, 1),
            (true, true) => r(4, 1),
            (true, false) => r(3, 2),
        };
        let parallel = if features.parallelized { r(7, 2) } else { r(1, 1) };
        let unroll = match (features.unrolled, features.unroll_after_tile) {
            (false, _) => r(1, 1),
            (true, true) => r(6, 5),
            (true, false) => r(9, 10),
        };
        let cache = match (features.cached_write, features.cache_after_vectorize) {
            (false, _) => r(1, 1),
            (true, true) => r(13, 10),
            (true, false) => r(19, 20),
        };
        tile * vectorize * parallel * unroll * cache
    }

    /// Exhaustively searches every valid trace of length at most `horizon`.
    ///
    /// Subproblems are memoized on (features, remaining depth). Ties are
    /// broken toward the lexicographically smallest trace over canonical
    /// mutator strings, with a prefix ordering before its extensions.
    pub fn brute_force_optimum(&self, horizon: usize) -> Result<BruteForceResult> {
        if horizon > MAX_ORACLE_HORIZON {
            return Err(Error::OracleBudgetExceeded {
                requested: horizon,
                max: MAX_ORACLE_HORIZON,
            });
        }
        let mut memo = HashMap::new();
        let (best_gain, best_trace) = best_suffix(Features::default(), horizon, &mut memo);
        Ok(BruteForceResult {
            best_speedup: to_f64(best_gain),
            best_gain,
            best_trace,
            states_enumerated: memo.len(),
        })
    }
}

type Memo = HashMap<(Features, usize), (Gain, Vec<Mutator>)>;

fn best_suffix(features: Features, remaining: usize, memo: &mut Memo) -> (Gain, Vec<Mutator>) {
    if let Some(hit) = memo.get(&(features, remaining)) {
        return hit.clone();
    }
    let mut best = (SynthKernel::gain(&features), Vec::new());
    if remaining > 0 {
        for m in Mutator::all() {
            if !features.allows(m) {
                continue;
            }
            let (gain, suffix) = best_suffix(features.after(m), remaining - 1, memo);
            // Canonical iteration order means the first strict improvement
            // is also the lexicographically smallest optimal trace.
            if gain > best.0 {
                let mut trace = Vec::with_capacity(suffix.len() + 1);
                trace.push(m);
                trace.extend(suffix);
                best = (gain, trace);
            }
        }
    }
    memo.insert((features, remaining), best.clone());
    best
}

pub fn to_f64(gain: Gain) -> f64 {
    *gain.numer() as f64 / *gain.denom() as f64
}

impl Environment for SynthKernel {
    fn version(&self) -> &str {
        SYNTH_KERNEL_VERSION
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn base_cost(&self) -> f64 {
        self.base_cost
    }

    fn cost(&self, state: &ProgramState) -> f64 {
        self.base_cost / to_f64(Self::gain(state.features()))
    }

    fn speedup(&self, state: &ProgramState) -> f64 {
        to_f64(Self::gain(state.features()))
    }

    fn render(&self, state: &ProgramState) -> String {
        let f = state.features();
        let mut out = String::new();
        let _ = writeln!(out, "@T.prim_func");
        let _ = writeln!(out, "def main(A, B, C):");
        let buf = if f.cached_write { "C_global" } else { "C" };
        if f.cached_write {
            let _ = writeln!(out, "    C_global = T.alloc_buffer((1024, 1024))");
        }
        let outer = if f.parallelized { "T.parallel" } else { "T.serial" };
        let tile = f.tile_factor;
        let _ = writeln!(out, "    for i_0 in {outer}({}):", 1024 / tile);
        let _ = writeln!(out, "        for i_1, k in T.grid({tile}, 1024):");
        let inner = if f.unrolled { "T.unroll" } else { "T.serial" };
        let _ = writeln!(out, "            for j_0 in {inner}({}):", 1024 / tile.max(1));
        let lanes = if f.vectorized { "T.vectorized" } else { "T.serial" };
        let _ = writeln!(out, "                for j_1 in {lanes}({tile}):");
        let _ = writeln!(out, "                    {buf}[i, j] = {buf}[i, j] + A[i, k] * B[k, j]");
        if f.cached_write {
            let _ = writeln!(out, "    for i, j in T.grid(1024, 1024):");
            let _ = writeln!(out, "        C[i, j] = C_global[i, j]");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult {
    pub best_trace: Vec<Mutator>,
    pub best_speedup: f64,
    #[serde(skip)]
    pub best_gain: Gain,
    pub states_enumerated: usize,
}
