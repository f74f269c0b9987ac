use serde::Serialize;

use crate::analytic::aoa_seed_probs;
use crate::error::{Error, Result};
use crate::model::Params;

/// Hard stop on the number of levels summed.
const MAX_LEVELS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesMean {
    /// Partial sum plus the geometric tail estimate.
    pub mean: f64,
    /// Upper bound on the omitted tail `sum_{A > levels} A P(A)`.
    pub tail_bound: f64,
    /// Mass summed over the visited levels.
    pub total_mass: f64,
    /// Last level included in the partial sum.
    pub levels: u64,
}

/// Average AoA from the level recursion of the (A, C, B) chain:
///
/// ```text
/// V(i+1,0,0) = z V(i,0,0)
/// V(i+1,0,1) = y V(i,0,0) + (1 - lambda1) V(i,0,1)
/// V(i+1,1,0) = x V(i,0,0) + (1 - lambda2) V(i,1,0)
/// ```
///
/// seeded with the closed-form V(1,0,0) and V(1,0,1). Levels are summed
/// until a level carries less than `tail_eps` of mass.
pub fn aoa_series(p: &Params, tail_eps: f64) -> Result<SeriesMean> {
    if !(tail_eps.is_finite() && tail_eps > 0.0) {
        return Err(Error::domain("tail_eps", format!("{tail_eps} must be positive")));
    }
    let s = p.shorthand();
    let (n1, n2) = (p.lambda1_bar(), p.lambda2_bar());
    let seeds = aoa_seed_probs(p);

    let (mut v00, mut v01, mut v10) = (seeds.v100, seeds.v101, 0.0);
    let mut level = 1u64;
    let mut previous = f64::NAN;
    let mut sum = 0.0;
    let mut total_mass = 0.0;
    loop {
        let mass = v00 + v01 + v10;
        sum += level as f64 * mass;
        total_mass += mass;
        if mass < tail_eps || level >= MAX_LEVELS {
            // P(A = k+1) / P(A = k) never exceeds the slowest survival rate.
            let bound_rate = p.decay_rate();
            let observed = if previous > 0.0 {
                (mass / previous).min(bound_rate)
            } else {
                bound_rate
            };
            let geometric = |r: f64| {
                if r <= 0.0 {
                    0.0
                } else {
                    let l = level as f64;
                    mass * (r * l / (1.0 - r) + r / (1.0 - r).powi(2))
                }
            };
            return Ok(SeriesMean {
                mean: sum + geometric(observed),
                tail_bound: geometric(bound_rate),
                total_mass,
                levels: level,
            });
        }
        previous = mass;
        (v00, v01, v10) = (s.z * v00, s.y * v00 + n1 * v01, s.x * v00 + n2 * v10);
        level += 1;
    }
}

/// [`aoa_series`] reduced to its mean.
pub fn aoa_series_mean(p: &Params, tail_eps: f64) -> Result<f64> {
    aoa_series(p, tail_eps).map(|s| s.mean)
}
