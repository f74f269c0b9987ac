//! Domain types shared by the simulator, the closed forms and the chain solvers.

use serde::Serialize;

use crate::error::{Error, Result};

/// Per-slot arrival probabilities of data packets (`lambda1`) and energy
/// packets (`lambda2`), both in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    lambda1: f64,
    lambda2: f64,
}

impl Params {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        check_probability("lambda1", lambda1)?;
        check_probability("lambda2", lambda2)?;
        Ok(Self { lambda1, lambda2 })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Complement `1 - lambda1`.
    pub fn lambda1_bar(&self) -> f64 {
        1.0 - self.lambda1
    }

    /// Complement `1 - lambda2`.
    pub fn lambda2_bar(&self) -> f64 {
        1.0 - self.lambda2
    }

    pub fn shorthand(&self) -> Shorthand {
        shorthand(self)
    }

    /// The same scenario with the data and energy rates exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
        }
    }

    /// Slowest per-slot survival rate of an age level: the largest of
    /// `1 - lambda1`, `1 - lambda2` and their product.
    pub fn decay_rate(&self) -> f64 {
        let (a, b) = (self.lambda1_bar(), self.lambda2_bar());
        a.max(b).max(a * b)
    }

    pub(crate) fn is_unit(&self) -> bool {
        self.lambda1 == 1.0 && self.lambda2 == 1.0
    }
}

fn check_probability(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::domain(field, format!("{value} is not a finite number")));
    }
    if value <= 0.0 || value > 1.0 {
        return Err(Error::domain(field, format!("{value} is outside (0, 1]")));
    }
    Ok(())
}

/// Validating constructor for [`Params`].
pub fn make_params(lambda1: f64, lambda2: f64) -> Result<Params> {
    Params::new(lambda1, lambda2)
}

/// Probabilities of the four joint slot outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shorthand {
    /// data and energy
    pub w: f64,
    /// data only
    pub x: f64,
    /// energy only
    pub y: f64,
    /// neither
    pub z: f64,
}

pub fn shorthand(p: &Params) -> Shorthand {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    let (n1, n2) = (p.lambda1_bar(), p.lambda2_bar());
    Shorthand {
        w: l1 * l2,
        x: l1 * n2,
        y: n1 * l2,
        z: n1 * n2,
    }
}

/// Realized arrivals in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct SlotEvents {
    pub data_arrived: bool,
    pub energy_arrived: bool,
}

impl SlotEvents {
    pub const fn new(data_arrived: bool, energy_arrived: bool) -> Self {
        Self {
            data_arrived,
            energy_arrived,
        }
    }

    /// All four outcomes with their probabilities under `p`.
    pub fn outcomes(p: &Params) -> [(SlotEvents, f64); 4] {
        let s = p.shorthand();
        [
            (SlotEvents::new(true, true), s.w),
            (SlotEvents::new(true, false), s.x),
            (SlotEvents::new(false, true), s.y),
            (SlotEvents::new(false, false), s.z),
        ]
    }
}

/// Cache and battery occupancy at the end of a slot.
///
/// A full cache together with a full battery would have actuated, so that
/// combination has no variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SystemState {
    /// (C, B) = (0, 0)
    Empty,
    /// (C, B) = (0, 1)
    Charged,
    /// (C, B) = (1, 0)
    Cached,
}

impl SystemState {
    pub const ALL: [SystemState; 3] = [SystemState::Empty, SystemState::Charged, SystemState::Cached];

    /// Returns `None` for the infeasible pair (1, 1).
    pub fn from_occupancy(cache: bool, battery: bool) -> Option<Self> {
        match (cache, battery) {
            (false, false) => Some(SystemState::Empty),
            (false, true) => Some(SystemState::Charged),
            (true, false) => Some(SystemState::Cached),
            (true, true) => None,
        }
    }

    pub fn cache(self) -> bool {
        self == SystemState::Cached
    }

    pub fn battery(self) -> bool {
        self == SystemState::Charged
    }

    /// Row/column index in the system transition matrix.
    pub fn index(self) -> usize {
        match self {
            SystemState::Empty => 0,
            SystemState::Charged => 1,
            SystemState::Cached => 2,
        }
    }
}

/// End-of-slot ages in slots: information (`aoi`), actuation (`aoa`) and
/// actuated information (`aoai`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AgeVector {
    pub aoi: u64,
    pub aoa: u64,
    pub aoai: u64,
}

impl AgeVector {
    pub const FRESH: AgeVector = AgeVector {
        aoi: 1,
        aoa: 1,
        aoai: 1,
    };

    /// All ages at least one and the actuated-information age bounds the other two.
    pub fn is_consistent(&self) -> bool {
        self.aoi >= 1 && self.aoa >= 1 && self.aoai >= self.aoi && self.aoai >= self.aoa
    }
}

/// The three timeliness metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Aoi,
    Aoa,
    Aoai,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Aoi, Metric::Aoa, Metric::Aoai];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Aoi => "aoi",
            Metric::Aoa => "aoa",
            Metric::Aoai => "aoai",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aoi" => Ok(Metric::Aoi),
            "aoa" => Ok(Metric::Aoa),
            "aoai" => Ok(Metric::Aoai),
            other => Err(format!("unknown metric `{other}` (expected aoi, aoa or aoai)")),
        }
    }
}
