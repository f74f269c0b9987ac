//! Closed-form averages and steady-state probabilities.
//!
//! The average AoA and AoAI are ratios of bivariate polynomials. Each is
//! evaluated from its factored form; an expanded coefficient table, evaluated
//! by Horner's rule in `lambda1`, serves as an independent second route (see
//! [`self_check`]).
//!
//! Both rational functions share the factor
//! `q = lambda1^2 (1 - lambda2)^2 + lambda1 (lambda2 - 2 lambda2^2) + lambda2^2`
//! in the denominator, which vanishes only at `lambda1 = lambda2 = 1`. There
//! the numerators vanish too and every direction of approach gives 1, so that
//! single point is returned as its limit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricAverages {
    pub aoi_bar: f64,
    pub aoa_bar: f64,
    pub aoai_bar: f64,
}

/// Level-one steady-state probabilities of the (A, C, B) chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AoaSeedProbs {
    /// V(1,0,0)
    pub v100: f64,
    /// V(1,0,1)
    pub v101: f64,
}

impl AoaSeedProbs {
    /// Per-slot actuation probability.
    pub fn actuation_rate(&self) -> f64 {
        self.v100 + self.v101
    }
}

/// Level-one steady-state probabilities of the (AI, I, B) chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AoaiSeedProbs {
    /// V(1,1,0)
    pub v110: f64,
    /// V(1,1,1)
    pub v111: f64,
    lambda1: f64,
    lambda2: f64,
}

impl AoaiSeedProbs {
    /// Probability of a full battery, `B1 = V(1,1,1) / (lambda1 lambda2)`.
    pub fn b1(&self) -> f64 {
        self.v111 / (self.lambda1 * self.lambda2)
    }

    pub fn b0(&self) -> f64 {
        1.0 - self.b1()
    }

    /// Probability that the AoAI equals one.
    pub fn ai1(&self) -> f64 {
        self.v110 + self.v111
    }

    /// Probability that the AoI equals one.
    pub fn i1(&self) -> f64 {
        self.lambda1
    }
}

/// `1 / lambda1`.
pub fn avg_aoi(p: &Params) -> f64 {
    1.0 / p.lambda1()
}

pub fn avg_aoa(p: &Params) -> Result<f64> {
    ratio(p, aoa_factored(p.lambda1(), p.lambda2()), "average AoA")
}

pub fn avg_aoai(p: &Params) -> Result<f64> {
    ratio(p, aoai_factored(p.lambda1(), p.lambda2()), "average AoAI")
}

pub fn averages(p: &Params) -> Result<MetricAverages> {
    Ok(MetricAverages {
        aoi_bar: avg_aoi(p),
        aoa_bar: avg_aoa(p)?,
        aoai_bar: avg_aoai(p)?,
    })
}

fn ratio(p: &Params, (num, den): (f64, f64), what: &str) -> Result<f64> {
    if den == 0.0 {
        if p.is_unit() {
            return Ok(1.0);
        }
        return Err(Error::Numerical(format!(
            "{what}: denominator vanished at lambda1={}, lambda2={}",
            p.lambda1(),
            p.lambda2()
        )));
    }
    let v = num / den;
    if !v.is_finite() {
        return Err(Error::Numerical(format!("{what} evaluated to {v}")));
    }
    Ok(v)
}

/// Shared denominator factor of the closed forms and of both seed pairs.
fn q(l1: f64, l2: f64) -> f64 {
    l1 * l1 * (l2 - 1.0).powi(2) + l1 * (-2.0 * l2 * l2 + l2) + l2 * l2
}

fn aoa_factored(l1: f64, l2: f64) -> (f64, f64) {
    let num = l1.powi(4) * (l2 - 1.0).powi(3)
        - 2.0 * l1.powi(3) * l2 * (l2 - 1.0).powi(2)
        - l1 * l1 * l2 * l2 * (2.0 * l2 * l2 - 3.0 * l2 + 1.0)
        + l1 * l2.powi(3) * (3.0 * l2 - 2.0)
        - l2.powi(4);
    let den = l1 * l2 * (l1 * (l2 - 1.0) - l2) * q(l1, l2);
    (num, den)
}

fn aoai_factored(l1: f64, l2: f64) -> (f64, f64) {
    let num = l1.powi(4) * (l2 - 4.0) * (l2 - 1.0).powi(3) * l2 - 4.0 * l1.powi(3) * (l2 - 1.0).powi(3) * l2 * l2
        + l1 * (3.0 - 4.0 * l2) * l2.powi(4)
        + l2.powi(5)
        + l1.powi(5) * (l2 - 1.0).powi(3) * (2.0 * l2 - 1.0)
        + 2.0 * l1 * l1 * l2.powi(3) * (2.0 - 5.0 * l2 + 3.0 * l2 * l2);
    let den = l1 * l2 * (l1 + l2 - l1 * l2).powi(2) * q(l1, l2);
    (num, den)
}

// Expanded coefficients: row k holds the coefficient of lambda1^k as a
// polynomial in lambda2, lowest power first.
const AOA_NUM: [&[f64]; 5] = [
    &[0.0, 0.0, 0.0, 0.0, -1.0],
    &[0.0, 0.0, 0.0, -2.0, 3.0],
    &[0.0, 0.0, -1.0, 3.0, -2.0],
    &[0.0, -2.0, 4.0, -2.0],
    &[-1.0, 3.0, -3.0, 1.0],
];
const AOA_DEN: [&[f64]; 5] = [
    &[],
    &[0.0, 0.0, 0.0, 0.0, -1.0],
    &[0.0, 0.0, 0.0, -2.0, 3.0],
    &[0.0, 0.0, -2.0, 5.0, -3.0],
    &[0.0, -1.0, 3.0, -3.0, 1.0],
];
const AOAI_NUM: [&[f64]; 6] = [
    &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    &[0.0, 0.0, 0.0, 0.0, 3.0, -4.0],
    &[0.0, 0.0, 0.0, 4.0, -10.0, 6.0],
    &[0.0, 0.0, 4.0, -12.0, 12.0, -4.0],
    &[0.0, 4.0, -13.0, 15.0, -7.0, 1.0],
    &[1.0, -5.0, 9.0, -7.0, 2.0],
];
const AOAI_DEN: [&[f64]; 6] = [
    &[],
    &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    &[0.0, 0.0, 0.0, 0.0, 3.0, -4.0],
    &[0.0, 0.0, 0.0, 4.0, -10.0, 6.0],
    &[0.0, 0.0, 3.0, -10.0, 11.0, -4.0],
    &[0.0, 1.0, -4.0, 6.0, -4.0, 1.0],
];

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn bivariate(table: &[&[f64]], l1: f64, l2: f64) -> f64 {
    table.iter().rev().fold(0.0, |acc, row| acc * l1 + horner(row, l2))
}

/// Average AoA from the expanded coefficient table.
pub fn avg_aoa_expanded(p: &Params) -> Result<f64> {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    ratio(
        p,
        (bivariate(&AOA_NUM, l1, l2), bivariate(&AOA_DEN, l1, l2)),
        "average AoA",
    )
}

/// Average AoAI from the expanded coefficient table.
pub fn avg_aoai_expanded(p: &Params) -> Result<f64> {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    ratio(
        p,
        (bivariate(&AOAI_NUM, l1, l2), bivariate(&AOAI_DEN, l1, l2)),
        "average AoAI",
    )
}

/// Compares the factored and expanded evaluations over a grid with step
/// 0.05 and returns the largest relative difference seen. Fails if any pair
/// differs by more than `1e-9` relative.
pub fn self_check() -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 1..=20 {
        for j in 1..=20 {
            let p = Params::new(i as f64 * 0.05, j as f64 * 0.05)?;
            for (a, b) in [
                (avg_aoa(&p)?, avg_aoa_expanded(&p)?),
                (avg_aoai(&p)?, avg_aoai_expanded(&p)?),
            ] {
                let rel = (a - b).abs() / a.abs();
                worst = worst.max(rel);
                if rel > 1e-9 {
                    return Err(Error::Numerical(format!(
                        "closed-form routes disagree at lambda1={}, lambda2={}: {a} vs {b}",
                        p.lambda1(),
                        p.lambda2()
                    )));
                }
            }
        }
    }
    Ok(worst)
}

/// Level-one probabilities V(1,0,0) and V(1,0,1) of the AoA chain.
///
/// At `lambda1 = lambda2 = 1` both closed forms are 0/0 and the chain has two
/// absorbing states; the values returned there are those reached from an
/// empty cache and battery, `(1, 0)`.
pub fn aoa_seed_probs(p: &Params) -> AoaSeedProbs {
    if p.is_unit() {
        return AoaSeedProbs { v100: 1.0, v101: 0.0 };
    }
    let (l1, l2) = (p.lambda1(), p.lambda2());
    let (n1, n2) = (p.lambda1_bar(), p.lambda2_bar());
    let d = n1 * l2.powi(3) + l1 * l2 * n2 + n1 * n2 * l2 * l2 + l1 * l1 * n2 * n2;
    AoaSeedProbs {
        v100: l1 * (1.0 - n1 * n2) * n2 * l2 / d,
        v101: l1 * n1 * l2.powi(3) / d,
    }
}

/// Level-one probabilities V(1,1,0) and V(1,1,1) of the AoAI chain.
///
/// Same convention as [`aoa_seed_probs`] at the unit corner.
pub fn aoai_seed_probs(p: &Params) -> AoaiSeedProbs {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    if p.is_unit() {
        return AoaiSeedProbs {
            v110: 1.0,
            v111: 0.0,
            lambda1: l1,
            lambda2: l2,
        };
    }
    let (n1, n2) = (p.lambda1_bar(), p.lambda2_bar());
    let d = l1 * l1 * n2 * n2 + l2 * l2 + l1 * l2 * (1.0 - 2.0 * l2);
    AoaiSeedProbs {
        v110: l1 * (l1 * l1 * n2 + l2) * n2 * l2 / d,
        v111: n1 * l1 * l2.powi(3) / d,
        lambda1: l1,
        lambda2: l2,
    }
}

/// Reference values of the three averages when at least one rate is one.
pub fn unit_rate_limits(p: &Params) -> Result<MetricAverages> {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    match (l1 == 1.0, l2 == 1.0) {
        (true, true) => Ok(MetricAverages {
            aoi_bar: 1.0,
            aoa_bar: 1.0,
            aoai_bar: 1.0,
        }),
        (true, false) => Ok(MetricAverages {
            aoi_bar: 1.0,
            aoa_bar: 1.0 / l2,
            aoai_bar: 1.0 / l2,
        }),
        (false, true) => Ok(MetricAverages {
            aoi_bar: 1.0 / l1,
            aoa_bar: 1.0 / l1,
            aoai_bar: 1.0 / l1,
        }),
        (false, false) => Err(Error::domain(
            "lambda1",
            "limit values exist only when lambda1 or lambda2 equals 1",
        )),
    }
}

/// Relative asymmetry `|f(a, b) - f(b, a)| / f(a, b)` of the AoA and AoAI
/// closed forms at `p`.
pub fn symmetry_deviation(p: &Params) -> Result<(f64, f64)> {
    let s = p.swapped();
    let aoa = avg_aoa(p)?;
    let aoai = avg_aoai(p)?;
    Ok(((aoa - avg_aoa(&s)?).abs() / aoa, (aoai - avg_aoai(&s)?).abs() / aoai))
}
