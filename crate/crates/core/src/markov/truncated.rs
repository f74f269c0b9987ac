//! Level-truncated age chains.
//!
//! The (A, C, B) chain tracks the age of actuation with cache and battery
//! occupancy; the (AI, I, B) chain tracks the age of actuated information
//! with the age of information and the battery. Transitions are generated by
//! running [`step`] from each retained state under the four slot outcomes,
//! and transitions to levels above the cap are dropped.
//!
//! State order within a level follows the reference matrices:
//! `(1,0,0), (1,0,1)` then `(A,0,0), (A,0,1), (A,1,0)` for `A >= 2`; and
//! `(AI,1,0), ..., (AI,AI,0), (AI,AI,1)` for every `AI >= 1`.

use std::io::{self, Write};

use serde::Serialize;

use super::stationary::{check_tol, power_iterate, MarkovChain, SolveMethod, StationaryDist, DEFAULT_MAX_ITERATIONS};
use crate::engine::{step, EngineState};
use crate::error::{Error, Result};
use crate::model::{AgeVector, Params, SlotEvents, SystemState};

/// Largest level cap [`choose_cap`] will return.
pub const MAX_CAP: usize = 1_000_000;

/// Tail mass above which [`mean_age`] refuses to report a mean.
pub const MAX_TAIL_MASS: f64 = 1e-6;

const CAP_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Aoa,
    Aoai,
}

/// `(level, second, battery)`: `(A, C, B)` for [`ChainKind::Aoa`] and
/// `(AI, I, B)` for [`ChainKind::Aoai`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ChainState {
    pub level: u64,
    pub second: u64,
    pub battery: bool,
}

impl ChainState {
    pub const fn new(level: u64, second: u64, battery: bool) -> Self {
        Self { level, second, battery }
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedChain {
    kind: ChainKind,
    params: Params,
    level_cap: u64,
    states: Vec<ChainState>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Probability of each row that left the retained levels.
    leak: Vec<f64>,
}

fn level_offset(kind: ChainKind, level: u64) -> usize {
    let l = level as usize;
    match kind {
        ChainKind::Aoa if l == 1 => 0,
        ChainKind::Aoa => 2 + 3 * (l - 2),
        ChainKind::Aoai => (l - 1) * (l + 2) / 2,
    }
}

fn state_count(kind: ChainKind, cap: u64) -> usize {
    level_offset(kind, cap + 1)
}

fn enumerate_states(kind: ChainKind, cap: u64) -> Vec<ChainState> {
    let mut states = Vec::with_capacity(state_count(kind, cap));
    for level in 1..=cap {
        match kind {
            ChainKind::Aoa => {
                states.push(ChainState::new(level, 0, false));
                states.push(ChainState::new(level, 0, true));
                if level >= 2 {
                    states.push(ChainState::new(level, 1, false));
                }
            }
            ChainKind::Aoai => {
                states.extend((1..=level).map(|i| ChainState::new(level, i, false)));
                states.push(ChainState::new(level, level, true));
            }
        }
    }
    states
}

impl TruncatedChain {
    fn build(kind: ChainKind, p: &Params, cap: u64) -> Result<Self> {
        if cap < 2 {
            return Err(Error::domain(
                "cap",
                format!("level cap {cap} is below the minimum of 2"),
            ));
        }
        if cap as usize > MAX_CAP {
            return Err(Error::domain("cap", format!("level cap {cap} exceeds {MAX_CAP}")));
        }
        let states = enumerate_states(kind, cap);
        let outcomes = SlotEvents::outcomes(p);
        let mut row_ptr = Vec::with_capacity(states.len() + 1);
        let mut cols = Vec::with_capacity(states.len() * 4);
        let mut vals = Vec::with_capacity(states.len() * 4);
        let mut leak = Vec::with_capacity(states.len());
        row_ptr.push(0);

        let mut chain = TruncatedChain {
            kind,
            params: *p,
            level_cap: cap,
            states,
            row_ptr: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            leak: Vec::new(),
        };
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
        for &s in &chain.states {
            row.clear();
            let mut dropped = 0.0;
            let engine = chain.to_engine(s);
            for &(ev, prob) in &outcomes {
                if prob == 0.0 {
                    continue;
                }
                let (next, _) = step(&engine, ev);
                let target = chain.from_engine(&next);
                match chain.index_of(target) {
                    Some(j) => match row.iter_mut().find(|(c, _)| *c == j) {
                        Some(entry) => entry.1 += prob,
                        None => row.push((j, prob)),
                    },
                    None => dropped += prob,
                }
            }
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
            leak.push(dropped);
        }
        chain.row_ptr = row_ptr;
        chain.cols = cols;
        chain.vals = vals;
        chain.leak = leak;
        Ok(chain)
    }

    /// A simulator state that sits in chain state `s`. Coordinates the chain
    /// does not track are filled with values consistent with `s`.
    fn to_engine(&self, s: ChainState) -> EngineState {
        let (system, ages) = match self.kind {
            ChainKind::Aoa => (
                SystemState::from_occupancy(s.second == 1, s.battery),
                AgeVector {
                    aoi: 1,
                    aoa: s.level,
                    aoai: s.level,
                },
            ),
            // A packet younger than the last actuated one has not been
            // actuated yet, so it is still in the cache.
            ChainKind::Aoai => (
                SystemState::from_occupancy(s.second < s.level, s.battery),
                AgeVector {
                    aoi: s.second,
                    aoa: 1,
                    aoai: s.level,
                },
            ),
        };
        EngineState {
            system: system.expect("enumerated states are feasible"),
            ages,
            slot: 0,
        }
    }

    fn from_engine(&self, e: &EngineState) -> ChainState {
        match self.kind {
            ChainKind::Aoa => ChainState::new(e.ages.aoa, u64::from(e.system.cache()), e.system.battery()),
            ChainKind::Aoai => ChainState::new(e.ages.aoai, e.ages.aoi, e.system.battery()),
        }
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn level_cap(&self) -> u64 {
        self.level_cap
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Position of `s` in [`Self::states`], if it is a retained state.
    pub fn index_of(&self, s: ChainState) -> Option<usize> {
        if s.level == 0 || s.level > self.level_cap {
            return None;
        }
        let base = level_offset(self.kind, s.level);
        let offset = match self.kind {
            ChainKind::Aoa => match (s.level, s.second, s.battery) {
                (_, 0, false) => 0,
                (_, 0, true) => 1,
                (l, 1, false) if l >= 2 => 2,
                _ => return None,
            },
            ChainKind::Aoai => match (s.second, s.battery) {
                (i, false) if (1..=s.level).contains(&i) => (i - 1) as usize,
                (i, true) if i == s.level => s.level as usize,
                _ => return None,
            },
        };
        Some(base + offset)
    }

    /// Retained transitions out of state `i` as `(target, probability)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// Probability dropped from row `i` by the truncation.
    pub fn leak(&self, i: usize) -> f64 {
        self.leak[i]
    }

    /// Cache and battery occupancy implied by a chain state.
    pub fn occupancy(&self, s: ChainState) -> SystemState {
        self.to_engine(s).system
    }

    fn sweep(&self, src: &[f64], dst: &mut [f64]) {
        dst.iter_mut().for_each(|v| *v = 0.0);
        for (i, &mass) in src.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dst[self.cols[k]] += mass * self.vals[k];
            }
        }
    }

    /// Power iteration with an explicit sweep limit.
    pub fn stationary_with_limit(&self, tol: f64, max_iterations: usize) -> Result<StationaryDist> {
        check_tol(tol)?;
        // start from the simulator's initial state, which sits at index 0
        let mut start = vec![0.0; self.len()];
        start[0] = 1.0;
        let (probs, iterations) = power_iterate(start, tol, max_iterations, |s, d| self.sweep(s, d))?;

        let mut image = vec![0.0; self.len()];
        self.sweep(&probs, &mut image);
        let leaked: f64 = probs.iter().zip(&self.leak).map(|(p, l)| p * l).sum();
        let kept = 1.0 - leaked;
        let residual = image
            .iter()
            .zip(&probs)
            .map(|(a, b)| (a / kept - b).abs())
            .fold(0.0, f64::max);
        // Levels above the cap are entered only from the top retained level,
        // so the leaked flux is the mass of level cap+1; beyond that the mass
        // decays at most geometrically (capped at 1).
        let rate = self.params.decay_rate();
        let tail_mass = (leaked / (1.0 - rate)).min(1.0);
        Ok(StationaryDist {
            probs,
            residual,
            method: SolveMethod::Power,
            iterations,
            tail_mass,
        })
    }

    /// Text dump: `state_index,A_or_AI,I_or_C,B,target:prob,...` per line.
    pub fn dump(&self, w: &mut dyn Write) -> io::Result<()> {
        for (i, s) in self.states.iter().enumerate() {
            write!(w, "{i},{},{},{}", s.level, s.second, u8::from(s.battery))?;
            for (j, v) in self.row(i) {
                write!(w, ",{j}:{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl MarkovChain for TruncatedChain {
    /// Quasi-stationary distribution over the retained states.
    fn stationary(&self, tol: f64) -> Result<StationaryDist> {
        self.stationary_with_limit(tol, DEFAULT_MAX_ITERATIONS)
    }
}

/// The (A, C, B) chain cut at `cap`.
pub fn build_aoa_chain(p: &Params, cap: u64) -> Result<TruncatedChain> {
    TruncatedChain::build(ChainKind::Aoa, p, cap)
}

/// The (AI, I, B) chain cut at `cap`.
pub fn build_aoai_chain(p: &Params, cap: u64) -> Result<TruncatedChain> {
    TruncatedChain::build(ChainKind::Aoai, p, cap)
}

/// Smallest cap whose geometric tail bound is below `tail_eps`, plus a
/// margin of ten levels.
pub fn choose_cap(p: &Params, tail_eps: f64) -> Result<u64> {
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(Error::domain("tail_eps", format!("{tail_eps} is outside (0, 1)")));
    }
    let rate = p.decay_rate();
    let levels = if rate == 0.0 {
        1.0
    } else {
        (tail_eps.ln() / rate.ln()).ceil().max(1.0)
    };
    let cap = levels + CAP_MARGIN;
    if cap > MAX_CAP as f64 {
        return Err(Error::Cap {
            required: cap,
            limit: MAX_CAP,
        });
    }
    Ok((cap as u64).max(2))
}

/// Mean of an age coordinate with a bound on the error caused by the cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanAge {
    pub mean: f64,
    pub truncation_bound: f64,
    pub tail_mass: f64,
}

fn weighted_mean(
    dist: &StationaryDist,
    chain: &TruncatedChain,
    coordinate: impl Fn(&ChainState) -> u64,
) -> Result<MeanAge> {
    if dist.probs.len() != chain.len() {
        return Err(Error::domain(
            "dist",
            format!(
                "{} probabilities for a chain of {} states",
                dist.probs.len(),
                chain.len()
            ),
        ));
    }
    if dist.tail_mass > MAX_TAIL_MASS {
        return Err(Error::Truncation {
            tail_mass: dist.tail_mass,
            limit: MAX_TAIL_MASS,
        });
    }
    let mean = chain
        .states()
        .iter()
        .zip(&dist.probs)
        .map(|(s, p)| coordinate(s) as f64 * p)
        .sum();
    let rate = chain.params().decay_rate();
    let tail_level = chain.level_cap() as f64 + 1.0 / (1.0 - rate);
    Ok(MeanAge {
        mean,
        truncation_bound: dist.tail_mass * tail_level,
        tail_mass: dist.tail_mass,
    })
}

/// Mean of the level coordinate (AoA or AoAI).
pub fn mean_age(dist: &StationaryDist, chain: &TruncatedChain) -> Result<MeanAge> {
    weighted_mean(dist, chain, |s| s.level)
}

/// Mean of the AoI coordinate of the (AI, I, B) chain.
pub fn mean_information_age(dist: &StationaryDist, chain: &TruncatedChain) -> Result<MeanAge> {
    if chain.kind() != ChainKind::Aoai {
        return Err(Error::domain("chain", "the AoI is tracked only by the AoAI chain"));
    }
    weighted_mean(dist, chain, |s| s.second)
}
