//! Slot-by-slot simulator of the caching actuator.
//!
//! Within a slot the actuator looks for data (cached or just received), then
//! for energy (stored or just harvested), and actuates at once when both are
//! present. Stored energy is spent before harvested energy, so a harvest in
//! an actuation slot can still refill the battery.

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AgeVector, Params, SlotEvents, SystemState};

/// Number of batches used for the batch-means standard error.
pub const BATCHES: u64 = 20;

/// Default number of discarded initial slots.
pub const DEFAULT_WARMUP: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EngineState {
    pub system: SystemState,
    pub ages: AgeVector,
    /// Completed slots.
    pub slot: u64,
}

impl EngineState {
    /// Empty cache and battery, all ages one, no slots elapsed.
    pub fn initial() -> Self {
        Self {
            system: SystemState::Empty,
            ages: AgeVector::FRESH,
            slot: 0,
        }
    }
}

impl Default for EngineState {
    fn default() -> Self {
        Self::initial()
    }
}

/// Advances `state` by one slot. Returns the end-of-slot state and whether
/// an actuation happened.
pub fn step(state: &EngineState, events: SlotEvents) -> (EngineState, bool) {
    let cached = state.system.cache();
    let charged = state.system.battery();

    let data_available = cached || events.data_arrived;
    let energy_available = charged || events.energy_arrived;
    let actuated = data_available && energy_available;

    let battery = if actuated {
        // battery first; a same-slot harvest refills it
        charged && events.energy_arrived
    } else {
        charged || events.energy_arrived
    };
    let cache = data_available && !actuated;
    let system = SystemState::from_occupancy(cache, battery).expect("a full cache and a full battery always actuate");

    let aoi = if events.data_arrived { 1 } else { state.ages.aoi + 1 };
    let aoa = if actuated { 1 } else { state.ages.aoa + 1 };
    let aoai = if actuated { aoi } else { state.ages.aoai + 1 };

    (
        EngineState {
            system,
            ages: AgeVector { aoi, aoa, aoai },
            slot: state.slot + 1,
        },
        actuated,
    )
}

/// Deterministic replay of `events` from [`EngineState::initial`].
pub fn run_trace(events: &[SlotEvents]) -> Vec<(EngineState, bool)> {
    let mut state = EngineState::initial();
    events
        .iter()
        .map(|&ev| {
            let (next, actuated) = step(&state, ev);
            state = next;
            (next, actuated)
        })
        .collect()
}

/// Seeded source of slot events. Each slot draws the data event first and
/// the energy event second from a single generator.
#[derive(Debug, Clone)]
pub struct EventSource {
    rng: ChaCha8Rng,
    data: Bernoulli,
    energy: Bernoulli,
}

impl EventSource {
    pub fn new(p: &Params, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            data: Bernoulli::new(p.lambda1()).expect("lambda1 validated by Params"),
            energy: Bernoulli::new(p.lambda2()).expect("lambda2 validated by Params"),
        }
    }

    pub fn draw(&mut self) -> SlotEvents {
        let data_arrived = self.data.sample(&mut self.rng);
        let energy_arrived = self.energy.sample(&mut self.rng);
        SlotEvents {
            data_arrived,
            energy_arrived,
        }
    }
}

/// Unbounded random trajectory; yields `(events, end-of-slot state, actuated)`.
#[derive(Debug, Clone)]
pub struct Simulator {
    source: EventSource,
    state: EngineState,
}

impl Simulator {
    pub fn new(p: &Params, seed: u64) -> Self {
        Self {
            source: EventSource::new(p, seed),
            state: EngineState::initial(),
        }
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }
}

impl Iterator for Simulator {
    type Item = (SlotEvents, EngineState, bool);

    fn next(&mut self) -> Option<Self::Item> {
        let events = self.source.draw();
        let (next, actuated) = step(&self.state, events);
        self.state = next;
        Some((events, next, actuated))
    }
}

/// Time average with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeAverage {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    /// Total simulated slots, warmup included.
    pub slots: u64,
    pub mean_aoi: f64,
    pub mean_aoa: f64,
    pub mean_aoai: f64,
    pub stderr_aoi: f64,
    pub stderr_aoa: f64,
    pub stderr_aoai: f64,
    /// Actuations inside the measured window.
    pub actuation_count: u64,
    pub seed: u64,
    pub warmup: u64,
}

impl RunSummary {
    pub fn measured_slots(&self) -> u64 {
        self.slots - self.warmup
    }

    /// Fraction of measured slots with an actuation.
    pub fn actuation_rate(&self) -> f64 {
        self.actuation_count as f64 / self.measured_slots() as f64
    }

    pub fn aoi(&self) -> TimeAverage {
        TimeAverage {
            mean: self.mean_aoi,
            stderr: self.stderr_aoi,
        }
    }

    pub fn aoa(&self) -> TimeAverage {
        TimeAverage {
            mean: self.mean_aoa,
            stderr: self.stderr_aoa,
        }
    }

    pub fn aoai(&self) -> TimeAverage {
        TimeAverage {
            mean: self.mean_aoai,
            stderr: self.stderr_aoai,
        }
    }
}

/// Simulates `slots` slots and averages the ages over the slots after `warmup`.
pub fn run(p: &Params, slots: u64, seed: u64, warmup: u64) -> Result<RunSummary> {
    if slots <= warmup {
        return Err(Error::domain(
            "slots",
            format!("{slots} slots leave nothing to measure after a warmup of {warmup}"),
        ));
    }
    let measured = slots - warmup;
    let batches = BATCHES.min(measured);

    let mut sim = Simulator::new(p, seed);
    for _ in 0..warmup {
        sim.next();
    }

    // Integer sums keep the averages exact up to the final division.
    let mut totals = [0u64; 3];
    let mut batch_means: [Vec<f64>; 3] = Default::default();
    let mut actuation_count = 0u64;
    let mut start = 0u64;
    for b in 0..batches {
        let end = (b + 1) * measured / batches;
        let mut sums = [0u64; 3];
        for _ in start..end {
            let (_, state, actuated) = sim.next().expect("simulator is unbounded");
            sums[0] += state.ages.aoi;
            sums[1] += state.ages.aoa;
            sums[2] += state.ages.aoai;
            actuation_count += u64::from(actuated);
        }
        let len = (end - start) as f64;
        for k in 0..3 {
            totals[k] += sums[k];
            batch_means[k].push(sums[k] as f64 / len);
        }
        start = end;
    }

    let mean = |k: usize| totals[k] as f64 / measured as f64;
    let se = |k: usize| batch_stderr(&batch_means[k]);
    Ok(RunSummary {
        slots,
        mean_aoi: mean(0),
        mean_aoa: mean(1),
        mean_aoai: mean(2),
        stderr_aoi: se(0),
        stderr_aoa: se(1),
        stderr_aoai: se(2),
        actuation_count,
        seed,
        warmup,
    })
}

/// Standard error of the grand mean from batch means.
fn batch_stderr(means: &[f64]) -> f64 {
    let n = means.len();
    if n < 2 {
        return 0.0;
    }
    let avg = means.iter().sum::<f64>() / n as f64;
    let var = means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Empirical end-of-slot distribution of (C, B) over `slots` slots after
/// `warmup`, indexed like [`SystemState::index`].
pub fn occupancy_histogram(p: &Params, slots: u64, seed: u64, warmup: u64) -> [f64; 3] {
    let mut counts = [0u64; 3];
    for (_, state, _) in Simulator::new(p, seed).skip(warmup as usize).take(slots as usize) {
        counts[state.system.index()] += 1;
    }
    counts.map(|c| c as f64 / slots as f64)
}

/// Reads an event trace: CSV with header `t,data,energy`, one row per slot,
/// `t` counting up from 1 and both events 0 or 1. Errors name the line.
pub fn read_events(input: impl std::io::Read) -> Result<Vec<SlotEvents>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let bad = |line: u64, reason: String| Error::domain("events", format!("line {line}: {reason}"));
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::domain("events", "file is empty"));
    }
    if header.iter().collect::<Vec<_>>() != ["t", "data", "energy"] {
        return Err(bad(
            1,
            format!(
                "expected header `t,data,energy`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let flag = |line: u64, name: &str, v: &str| match v {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(bad(line, format!("{name} must be 0 or 1, found `{other}`"))),
    };
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(bad(line, format!("expected 3 fields, found {}", record.len())));
        }
        let expected = events.len() as u64 + 1;
        match record[0].parse::<u64>() {
            Ok(t) if t == expected => {}
            _ => return Err(bad(line, format!("t must be {expected}, found `{}`", &record[0]))),
        }
        events.push(SlotEvents::new(
            flag(line, "data", &record[1])?,
            flag(line, "energy", &record[2])?,
        ));
    }
    if events.is_empty() {
        return Err(Error::domain("events", "no event rows"));
    }
    Ok(events)
}
