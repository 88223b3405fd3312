//! Choice of Alice's measurement instant.
//!
//! Under the discard strategy the average fidelity depends only on Bob's
//! factor `b_τ`, so the objective is a function of τ given Bob's bath and the
//! resource. The search samples a dense grid, brackets every local maximum and
//! refines each bracket by golden-section search.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    average_fts_analytic, average_fts_numeric, fidelity_for_input, BranchSource, NumericMethod,
};
use crate::noise::{bob_factor_with, Backend, DecoherenceFactors, NoiseParams};
use crate::protocol::{Convention, ResourceSpec, Strategy};

/// Largest grid step in units of `1/ω₀`.
pub const MAX_GRID_STEP: f64 = PI / 50.0;
/// Two maxima closer than this in F count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Closed-form Bloch average.
    #[default]
    Analytic,
    /// Quadrature-backed `b_τ` and a Bloch product rule.
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingProblem {
    pub resource: ResourceSpec,
    pub bob_noise: NoiseParams,
    pub window: (f64, f64),
    #[serde(default)]
    pub convention: Convention,
    #[serde(default)]
    pub objective: Objective,
}

impl TimingProblem {
    /// Window `[π, 12π]`; τ = 0 is a trivial maximum.
    pub fn new(resource: ResourceSpec, bob_noise: NoiseParams) -> Self {
        Self {
            resource,
            bob_noise,
            window: (PI, 12.0 * PI),
            convention: Convention::Physical,
            objective: Objective::Analytic,
        }
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.window = (lo, hi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "degenerate timing window [{lo}, {hi}]"
            )));
        }
        self.resource.validate()?;
        self.bob_noise.validate()
    }

    /// Average fidelity if Alice measures at `tau`.
    pub fn objective_at(&self, tau: f64) -> Result<f64> {
        let strategy = Strategy::RetainPsi;
        match self.objective {
            Objective::Analytic => {
                let b = bob_factor_with(&self.bob_noise, tau, Backend::Auto)?;
                let fac = DecoherenceFactors {
                    b,
                    ..DecoherenceFactors::noiseless(tau)
                };
                Ok(average_fts_analytic(
                    self.resource,
                    &fac,
                    strategy,
                    self.convention,
                ))
            }
            Objective::Numeric => {
                let b = bob_factor_with(&self.bob_noise, tau, Backend::Quadrature)?;
                let fac = DecoherenceFactors {
                    b,
                    ..DecoherenceFactors::noiseless(tau)
                };
                let f = |ang| {
                    fidelity_for_input(
                        ang,
                        self.resource,
                        &fac,
                        strategy,
                        self.convention,
                        BranchSource::ClosedForm,
                    )
                };
                Ok(average_fts_numeric(f, NumericMethod::DEFAULT_QUADRATURE)?.value)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingSolution {
    pub tau_star: f64,
    pub f_star: f64,
    /// Refined local maxima in increasing τ.
    pub local_maxima: Vec<(f64, f64)>,
    pub grid: Vec<(f64, f64)>,
}

/// Objective on `n_points` uniformly spaced instants spanning the window.
pub fn sweep(problem: &TimingProblem, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "sweep needs at least 2 points, got {n_points}"
        )));
    }
    problem.validate()?;
    let (lo, hi) = problem.window;
    let step = (hi - lo) / (n_points - 1) as f64;
    (0..n_points)
        .into_par_iter()
        .map(|k| {
            let tau = if k + 1 == n_points {
                hi
            } else {
                lo + step * k as f64
            };
            Ok((tau, problem.objective_at(tau)?))
        })
        .collect()
}

/// Golden-section maximization on `[a, b]`, returning the best point seen.
pub fn golden_section_max(
    f: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

pub fn maximize_timing(problem: &TimingProblem, tol_tau: f64) -> Result<TimingSolution> {
    if tol_tau.is_nan() || tol_tau <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol_tau} must be positive"
        )));
    }
    problem.validate()?;
    let (lo, hi) = problem.window;
    let intervals = ((hi - lo) / MAX_GRID_STEP).ceil().max(1.0) as usize;
    let grid = sweep(problem, intervals + 1)?;
    let n = grid.len();

    let mut maxima = Vec::new();
    if grid[0].1 > grid[1].1 {
        maxima.push(grid[0]);
    }
    for i in 1..n - 1 {
        let (prev, cur, next) = (grid[i - 1].1, grid[i].1, grid[i + 1].1);
        if cur >= prev && cur > next {
            let refined = golden_section_max(
                |t| problem.objective_at(t),
                grid[i - 1].0,
                grid[i + 1].0,
                tol_tau,
            )?;
            maxima.push(if refined.1 >= cur { refined } else { grid[i] });
        }
    }
    if grid[n - 1].1 > grid[n - 2].1 {
        maxima.push(grid[n - 1]);
    }
    if maxima.is_empty() {
        // Flat objective: every instant is optimal, take the earliest.
        maxima.push(grid[0]);
    }

    let mut best = maxima[0];
    for &m in &maxima[1..] {
        if m.1 > best.1 + TIE_TOL {
            best = m;
        }
    }
    Ok(TimingSolution {
        tau_star: best.0,
        f_star: best.1,
        local_maxima: maxima,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    fn pure(conc: f64) -> ResourceSpec {
        ResourceSpec::pure_from_concurrence(conc).unwrap()
    }

    fn ohmic(g: f64, l: f64) -> NoiseParams {
        NoiseParams::ohmic(g, l).unwrap()
    }

    /// Root of `tan τ + 4γΛ²τ/(1+Λ²τ²)` near `2nπ` by bisection.
    fn stationary_oracle(gamma: f64, lam: f64, n: f64) -> f64 {
        let g =
            |t: f64| t.sin() / t.cos() + 4.0 * gamma * lam * lam * t / (1.0 + lam * lam * t * t);
        let (mut a, mut b) = (2.0 * n * PI - 1.0, 2.0 * n * PI);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(a) * g(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn noiseless_maximal_curve_is_shifted_cosine() {
        let p = TimingProblem::new(ResourceSpec::maximal_pure(), NoiseParams::noiseless())
            .with_window(0.0, 4.0 * PI);
        for (tau, f) in sweep(&p, 101).unwrap() {
            assert_abs_diff_eq!(f, 2.0 / 3.0 + tau.cos() / 3.0, epsilon = 1e-14);
        }
        let sol = maximize_timing(&p.with_window(PI, 3.0 * PI), 1e-9).unwrap();
        assert_abs_diff_eq!(sol.tau_star, TAU, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.f_star, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pure_curve_values_at_multiples_of_two_pi() {
        let p = TimingProblem::new(pure(0.8), ohmic(0.1, 0.05)).with_window(TAU, 3.0 * TAU);
        let pts = sweep(&p, 3).unwrap();
        let paper = TimingProblem {
            convention: Convention::Paper,
            ..p
        };
        let pts_paper = sweep(&paper, 3).unwrap();
        assert_abs_diff_eq!(pts_paper[0].1, 0.928, epsilon = 5e-4);
        assert_abs_diff_eq!(pts_paper[2].1, 0.901, epsilon = 5e-4);
        assert!(pts[0].1 <= 1.0);
    }

    #[test]
    fn werner_curve_bounds() {
        let res = ResourceSpec::werner_from_concurrence(0.8).unwrap();
        let p_w = match res {
            ResourceSpec::Werner { p } => p,
            _ => unreachable!(),
        };
        let prob = TimingProblem::new(res, ohmic(0.1, 0.02)).with_window(0.0, 12.0 * PI);
        let envelope = prob.objective_at(0.0).unwrap();
        for (_, f) in sweep(&prob, 600).unwrap() {
            assert!(f <= envelope + 1e-15);
            assert!(f >= p_w / 6.0 + 0.5 - p_w / 3.0 - 1e-15);
        }
    }

    #[test]
    fn optimum_sits_at_the_stationary_point_before_two_pi() {
        let prob = TimingProblem::new(pure(0.8), ohmic(0.1, 0.05)).with_window(PI, 3.0 * PI);
        let sol = maximize_timing(&prob, 1e-10).unwrap();
        assert!((sol.tau_star - TAU).abs() < 0.2);
        assert!(sol.tau_star < TAU);
        assert_abs_diff_eq!(
            sol.tau_star,
            stationary_oracle(0.1, 0.05, 1.0),
            epsilon = 1e-7
        );
        for &(_, f) in &sol.grid {
            assert!(sol.f_star >= f);
        }
    }

    #[test]
    fn werner_optimum_in_first_two_periods() {
        let res = ResourceSpec::werner_from_concurrence(0.8).unwrap();
        let prob = TimingProblem::new(res, ohmic(0.1, 0.02)).with_window(0.0, 4.0 * PI);
        let sol = maximize_timing(&prob, 1e-9).unwrap();
        assert!(sol.f_star >= 0.9);
    }

    #[test]
    fn refinement_is_idempotent() {
        let prob = TimingProblem::new(pure(0.6), ohmic(0.2, 0.1)).with_window(PI, 7.0 * PI);
        let sol = maximize_timing(&prob, 1e-10).unwrap();
        let again = maximize_timing(
            &prob.with_window(sol.tau_star - 0.5, sol.tau_star + 0.5),
            1e-10,
        )
        .unwrap();
        assert_abs_diff_eq!(again.tau_star, sol.tau_star, epsilon = 1e-7);
        assert_abs_diff_eq!(again.f_star, sol.f_star, epsilon = 1e-14);
    }

    #[test]
    fn ties_go_to_the_earlier_instant() {
        let prob = TimingProblem::new(ResourceSpec::maximal_pure(), NoiseParams::noiseless())
            .with_window(PI, 7.0 * PI);
        let sol = maximize_timing(&prob, 1e-10).unwrap();
        assert_eq!(sol.local_maxima.len(), 3);
        assert_abs_diff_eq!(sol.tau_star, TAU, epsilon = 1e-6);
    }

    #[test]
    fn envelope_decreases_with_coupling_and_cutoff() {
        for res in [
            pure(0.8),
            ResourceSpec::werner_from_concurrence(0.8).unwrap(),
        ] {
            for n in 1..=3 {
                let tau = n as f64 * TAU;
                let mut last = f64::INFINITY;
                for g in [0.0, 0.05, 0.1, 0.3] {
                    let f = TimingProblem::new(res, ohmic(g, 0.05))
                        .objective_at(tau)
                        .unwrap();
                    assert!(f < last || g == 0.0);
                    last = f;
                }
                let mut last = f64::INFINITY;
                for l in [0.01, 0.05, 0.5, 5.0] {
                    let f = TimingProblem::new(res, ohmic(0.1, l))
                        .objective_at(tau)
                        .unwrap();
                    assert!(f < last);
                    last = f;
                }
            }
        }
    }

    #[test]
    fn numeric_objective_tracks_analytic() {
        let prob = TimingProblem::new(pure(0.8), ohmic(0.1, 0.05));
        let numeric = TimingProblem {
            objective: Objective::Numeric,
            ..prob
        };
        for tau in [PI, 5.0, TAU, 10.0] {
            assert_abs_diff_eq!(
                numeric.objective_at(tau).unwrap(),
                prob.objective_at(tau).unwrap(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let prob = TimingProblem::new(pure(0.8), ohmic(0.1, 0.05));
        assert!(maximize_timing(&prob.with_window(2.0, 2.0), 1e-6).is_err());
        assert!(maximize_timing(&prob.with_window(-1.0, 2.0), 1e-6).is_err());
        assert!(maximize_timing(&prob, 0.0).is_err());
        assert!(sweep(&prob, 1).is_err());
    }
}
