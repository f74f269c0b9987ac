use serde::Serialize;

use super::system::SystemChain;
use crate::error::{Error, Result};

/// Default convergence threshold on the max-norm change between sweeps.
pub const DEFAULT_TOL: f64 = 1e-14;
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Direct,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDist {
    pub probs: Vec<f64>,
    /// `max |(pi P)_j - pi_j|` for the returned vector.
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
    /// Estimated stationary mass above the level cap (zero for untruncated chains).
    pub tail_mass: f64,
}

/// A chain whose stationary distribution can be computed.
pub trait MarkovChain {
    fn stationary(&self, tol: f64) -> Result<StationaryDist>;
}

/// Solves `pi P = pi`, `sum(pi) = 1`.
pub fn stationary<C: MarkovChain + ?Sized>(chain: &C, tol: f64) -> Result<StationaryDist> {
    chain.stationary(tol)
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("tol", format!("{tol} must be a positive finite number")))
    }
}

/// Power iteration with renormalization after every sweep. `sweep(src, dst)`
/// must overwrite `dst` with `src * P`. Returns the converged vector and the
/// number of sweeps.
pub(crate) fn power_iterate(
    mut current: Vec<f64>,
    tol: f64,
    max_iterations: usize,
    mut sweep: impl FnMut(&[f64], &mut [f64]),
) -> Result<(Vec<f64>, usize)> {
    let mut next = vec![0.0; current.len()];
    let mut delta = f64::INFINITY;
    for it in 1..=max_iterations {
        sweep(&current, &mut next);
        let total: f64 = next.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical("power iteration lost all probability mass".into()));
        }
        delta = 0.0;
        for (n, c) in next.iter_mut().zip(&current) {
            *n /= total;
            delta = delta.max((*n - c).abs());
        }
        std::mem::swap(&mut current, &mut next);
        if delta < tol {
            return Ok((current, it));
        }
    }
    Err(Error::Convergence {
        iterations: max_iterations,
        delta,
    })
}

fn vec_mat3(pi: &[f64], m: &[[f64; 3]; 3], out: &mut [f64]) {
    for j in 0..3 {
        out[j] = (0..3).map(|i| pi[i] * m[i][j]).sum();
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

impl MarkovChain for SystemChain {
    /// Direct solve with the last balance equation replaced by normalization.
    /// When the chain has more than one closed class (only at
    /// `lambda1 = lambda2 = 1`) the system is singular and the limit reached
    /// from the empty state (0, 0) is returned instead.
    fn stationary(&self, tol: f64) -> Result<StationaryDist> {
        check_tol(tol)?;
        let m = &self.matrix;
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate().take(2) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        a[2] = [1.0; 3];
        let (probs, method, iterations) = match solve3(a, [0.0, 0.0, 1.0]) {
            Some(x) => (x.to_vec(), SolveMethod::Direct, 0),
            None => {
                let (v, it) = power_iterate(vec![1.0, 0.0, 0.0], tol, DEFAULT_MAX_ITERATIONS, |src, dst| {
                    vec_mat3(src, m, dst)
                })?;
                (v, SolveMethod::Power, it)
            }
        };
        let mut image = [0.0; 3];
        vec_mat3(&probs, m, &mut image);
        let residual = image.iter().zip(&probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok(StationaryDist {
            probs,
            residual,
            method,
            iterations,
            tail_mass: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::build_system_chain;
    use crate::model::Params;

    #[test]
    fn midpoint_distribution() {
        // balance equations at (0.5, 0.5):
        //   pi0 = .5 pi0 + .25 pi1 + .5 pi2,  pi2 = .25 pi0 + .5 pi2
        //   => pi2 = pi0 / 2, pi1 = pi0, and normalization gives [0.4, 0.4, 0.2]
        let d = stationary(&build_system_chain(&Params::new(0.5, 0.5).unwrap()), 1e-14).unwrap();
        assert_eq!(d.method, SolveMethod::Direct);
        for (got, want) in d.probs.iter().zip([0.4, 0.4, 0.2]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(d.residual < 1e-15);
    }

    #[test]
    fn unit_rates_fall_back_to_reachable_limit() {
        let d = stationary(&build_system_chain(&Params::new(1.0, 1.0).unwrap()), 1e-14).unwrap();
        assert_eq!(d.method, SolveMethod::Power);
        assert_eq!(d.probs, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let c = build_system_chain(&Params::new(0.5, 0.5).unwrap());
        assert!(stationary(&c, 0.0).is_err());
        assert!(stationary(&c, f64::NAN).is_err());
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        // period-two chain never settles from a point mass
        let swap = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let err = power_iterate(vec![1.0, 0.0, 0.0], 1e-12, 50, |s, d| vec_mat3(s, &swap, d)).unwrap_err();
        assert!(matches!(err, Error::Convergence { iterations: 50, .. }));
    }

    #[test]
    fn distribution_is_normalized_across_grid() {
        for i in 1..=10 {
            for j in 1..=10 {
                let p = Params::new(i as f64 / 10.0, j as f64 / 10.0).unwrap();
                let d = stationary(&build_system_chain(&p), 1e-14).unwrap();
                assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                assert!(d.probs.iter().all(|&x| x >= -1e-15));
                assert!(d.residual < 1e-12);
            }
        }
    }
}
