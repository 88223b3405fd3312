//! Teleportation fidelity (pointwise and Bloch-averaged), Wootters
//! concurrence and the Horodecki CHSH bound.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::DecoherenceFactors;
use crate::protocol::{
    analytic_probabilities, measure_branches, BellOutcome, Convention, ResourceSpec, Strategy,
    DEGENERATE_PROB,
};
use crate::qlinalg::{c, eig_hermitian, mat_sqrt_psd, pauli, BlochAngles, DensityOp, Matrix, C64};
use crate::quadrature::gauss_legendre;

/// `⟨ψ_in|ρ|ψ_in⟩`.
pub fn fidelity_pointwise(input: BlochAngles, output: &DensityOp) -> Result<f64> {
    if output.dim() != 2 {
        return Err(Error::DimensionMismatch {
            left: 2,
            right: output.dim(),
        });
    }
    Ok(input.ket().expectation(output.matrix())?.re)
}

/// `2/3 + (1/3)(μλ*b + μ*λb*)`
pub fn average_fts_pure(mu: f64, lambda: f64, b: C64) -> f64 {
    2.0 / 3.0 + (2.0 / 3.0) * mu * lambda * b.re
}

/// `(p/6)(b + b*) + p/6 + 1/2`
pub fn average_fts_werner(p: f64, b: C64) -> f64 {
    p / 3.0 * b.re + p / 6.0 + 0.5
}

/// Series-safe `∫₀¹ xⁿ/(1 + r x) dx` for n = 0, 1, 2.
fn moments(r: f64) -> [f64; 3] {
    if r.abs() < 0.05 {
        let mut h = [0.0; 3];
        let mut pow = 1.0;
        for k in 0..40 {
            for (n, hn) in h.iter_mut().enumerate() {
                *hn += pow / (k + n + 1) as f64;
            }
            pow *= -r;
            if pow.abs() < 1e-18 {
                break;
            }
        }
        return h;
    }
    let l = r.ln_1p();
    [
        l / r,
        (r - l) / (r * r),
        (l - r + r * r / 2.0) / (r * r * r),
    ]
}

/// Born-weighted ψ-branch fidelity averaged over the Bloch sphere, pure pair.
///
/// With `x = cos²(θ/2)` the per-input fidelity is a quadratic over a linear
/// polynomial in `x`, and `x` is uniform on the sphere.
pub fn average_fts_pure_physical(mu: f64, lambda: f64, b: C64) -> f64 {
    let (mut m, mut l) = (mu * mu, lambda * lambda);
    if m < l {
        std::mem::swap(&mut m, &mut l);
    }
    if l == 0.0 {
        return 0.5;
    }
    let k = mu * lambda * b.re;
    let (qa, qb, qc) = (l + m - 2.0 * k, 2.0 * k - 2.0 * m, m);
    let h = moments((l - m) / m);
    (qa * h[2] + qb * h[1] + qc * h[0]) / m
}

/// Closed-form Bloch average for any strategy and convention.
pub fn average_fts_analytic(
    resource: ResourceSpec,
    factors: &DecoherenceFactors,
    strategy: Strategy,
    convention: Convention,
) -> f64 {
    let (a, b) = (factors.a, factors.b);
    match (resource, strategy) {
        (ResourceSpec::PurePair { mu, lambda }, Strategy::RetainPsi) => match convention {
            Convention::Paper => average_fts_pure(mu, lambda, b),
            Convention::Physical => average_fts_pure_physical(mu, lambda, b),
        },
        (ResourceSpec::Werner { p }, Strategy::RetainPsi) => average_fts_werner(p, b),
        // Keeping all four outcomes weights every branch by its Born
        // probability in both conventions.
        (ResourceSpec::PurePair { mu, lambda }, Strategy::RetainAll) => {
            0.5 * (average_fts_pure(mu, lambda, b) + average_fts_pure(mu, lambda, a * b))
        }
        (ResourceSpec::Werner { p }, Strategy::RetainAll) => {
            0.5 * (average_fts_werner(p, b) + average_fts_werner(p, a * b))
        }
    }
}

/// Corrected paper-scaled overlaps `4 p_k f_k` for the four outcomes.
pub fn branch_overlaps(
    input: BlochAngles,
    resource: ResourceSpec,
    factors: &DecoherenceFactors,
) -> [f64; 4] {
    let (al, _) = input.amplitudes();
    let x = al.norm_sqr();
    let y = 1.0 - x;
    let (re_ab, re_b) = ((factors.a * factors.b).re, factors.b.re);
    match resource {
        ResourceSpec::PurePair { mu, lambda } => {
            let (m, l, ml) = (mu * mu, lambda * lambda, mu * lambda);
            let phi = 2.0 * m * x * x + 2.0 * l * y * y + 4.0 * x * y * ml * re_ab;
            let psi = 2.0 * l * x * x + 2.0 * m * y * y + 4.0 * x * y * ml * re_b;
            [phi, phi, psi, psi]
        }
        ResourceSpec::Werner { p } => {
            let diag = (0.5 + 0.5 * p * (x - y)) * x + (0.5 - 0.5 * p * (x - y)) * y;
            let phi = diag + 2.0 * x * y * p * re_ab;
            let psi = diag + 2.0 * x * y * p * re_b;
            [phi, phi, psi, psi]
        }
    }
}

/// Where the per-input fidelity comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchSource {
    /// Scalar closed forms of the corrected branch states.
    #[default]
    ClosedForm,
    /// The full 8×8 build, evolve, project and correct pipeline.
    Pipeline,
}

/// Fidelity of one input under the given strategy and convention.
pub fn fidelity_for_input(
    input: BlochAngles,
    resource: ResourceSpec,
    factors: &DecoherenceFactors,
    strategy: Strategy,
    convention: Convention,
    source: BranchSource,
) -> Result<f64> {
    match source {
        BranchSource::ClosedForm => {
            let overlaps = branch_overlaps(input, resource, factors);
            let probs = analytic_probabilities(input, resource);
            let kept: Vec<usize> = (0..4)
                .filter(|&k| strategy.keeps(BellOutcome::ALL[k]))
                .collect();
            let sum_overlap: f64 = kept.iter().map(|&k| overlaps[k]).sum();
            Ok(match convention {
                Convention::Paper => sum_overlap / kept.len() as f64,
                Convention::Physical => {
                    let weight: f64 = kept.iter().map(|&k| probs[k]).sum();
                    if weight < DEGENERATE_PROB {
                        return Err(Error::ContractViolation(
                            "all retained branches are degenerate".into(),
                        ));
                    }
                    sum_overlap / 4.0 / weight
                }
            })
        }
        BranchSource::Pipeline => {
            let (_, _, physical, paper) = measure_branches(input, resource, factors, strategy)?;
            Ok(match convention {
                Convention::Physical => physical,
                Convention::Paper => paper,
            })
        }
    }
}

/// Numeric Bloch average with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NumericAverage {
    pub value: f64,
    /// Standard error for Monte Carlo; zero for the product rule.
    pub stderr: f64,
    pub samples: usize,
    /// The error bar was widened because too few samples were drawn.
    pub widened: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum NumericMethod {
    Quadrature { n_theta: usize, n_phi: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl NumericMethod {
    pub const DEFAULT_QUADRATURE: NumericMethod = NumericMethod::Quadrature {
        n_theta: 96,
        n_phi: 64,
    };
}

const MIN_RULE_NODES: usize = 64;
const MC_CHUNK: usize = 4096;
const MC_MIN_SAMPLES: usize = 30;

/// `(1/4π) ∫∫ f(θ, φ) sinθ dθ dφ`.
pub fn average_fts_numeric<F>(f: F, method: NumericMethod) -> Result<NumericAverage>
where
    F: Fn(BlochAngles) -> Result<f64> + Sync,
{
    match method {
        NumericMethod::Quadrature { n_theta, n_phi } => bloch_quadrature(&f, n_theta, n_phi),
        NumericMethod::MonteCarlo { samples, seed } => bloch_monte_carlo(&f, samples, seed),
    }
}

fn bloch_quadrature<F>(f: &F, n_theta: usize, n_phi: usize) -> Result<NumericAverage>
where
    F: Fn(BlochAngles) -> Result<f64> + Sync,
{
    if n_theta < MIN_RULE_NODES || n_phi < MIN_RULE_NODES {
        return Err(Error::InvalidArgument(format!(
            "Bloch quadrature needs at least {MIN_RULE_NODES} nodes per angle, got {n_theta}x{n_phi}"
        )));
    }
    let (nodes, weights) = gauss_legendre(n_theta);
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        let theta = 0.5 * PI * (x + 1.0);
        let mut ring = 0.0;
        for j in 0..n_phi {
            let phi = TAU * j as f64 / n_phi as f64;
            ring += f(BlochAngles::new(theta, phi)?)?;
        }
        total += w * theta.sin() * ring / n_phi as f64;
    }
    // dθ = (π/2) dx, ∫dφ/2π folded into the ring mean, 1/2 from 1/4π.
    Ok(NumericAverage {
        value: total * 0.25 * PI,
        stderr: 0.0,
        samples: n_theta * n_phi,
        widened: false,
    })
}

fn bloch_monte_carlo<F>(f: &F, samples: usize, seed: u64) -> Result<NumericAverage>
where
    F: Fn(BlochAngles) -> Result<f64> + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "Monte Carlo needs at least one sample".into(),
        ));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    // Each chunk owns its own stream so the sum is independent of scheduling.
    let partial: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let n = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
                let phi: f64 = rng.gen_range(0.0..TAU);
                let v = f(BlochAngles::new(cos_theta.acos(), phi)?)?;
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for p in partial {
        let (a, b) = p?;
        s += a;
        s2 += b;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = if samples > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let mut stderr = (var / n).sqrt();
    let widened = samples < MC_MIN_SAMPLES;
    if widened {
        // Values lie in [0, 1], so the variance is at most 1/4.
        stderr = stderr.max(0.5 / n.sqrt());
    }
    Ok(NumericAverage {
        value: mean,
        stderr,
        samples,
        widened,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FidelityReport {
    pub strategy: Strategy,
    pub convention: Convention,
    pub pointwise: f64,
    pub average_analytic: f64,
    pub average_quadrature: f64,
    pub average_montecarlo: f64,
    pub montecarlo_stderr: f64,
}

/// All fidelity views of one configuration.
pub fn fidelity_report(
    input: BlochAngles,
    resource: ResourceSpec,
    factors: &DecoherenceFactors,
    strategy: Strategy,
    convention: Convention,
    mc_samples: usize,
    seed: u64,
) -> Result<FidelityReport> {
    let f = |ang: BlochAngles| {
        fidelity_for_input(
            ang,
            resource,
            factors,
            strategy,
            convention,
            BranchSource::ClosedForm,
        )
    };
    let quad = average_fts_numeric(f, NumericMethod::DEFAULT_QUADRATURE)?;
    let mc = average_fts_numeric(
        f,
        NumericMethod::MonteCarlo {
            samples: mc_samples,
            seed,
        },
    )?;
    Ok(FidelityReport {
        strategy,
        convention,
        pointwise: fidelity_for_input(
            input,
            resource,
            factors,
            strategy,
            convention,
            BranchSource::Pipeline,
        )?,
        average_analytic: average_fts_analytic(resource, factors, strategy, convention),
        average_quadrature: quad.value,
        average_montecarlo: mc.value,
        montecarlo_stderr: mc.stderr,
    })
}

fn check_two_qubit(rho: &DensityOp) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            left: 4,
            right: rho.dim(),
        });
    }
    Ok(())
}

/// Wootters concurrence from the spectrum of `√ρ ρ̃ √ρ`.
pub fn concurrence(rho: &DensityOp) -> Result<f64> {
    check_two_qubit(rho)?;
    let yy = pauli::y().kron(&pauli::y());
    let tilde = rho.matrix().conj().conjugate_by(&yy)?;
    let s = mat_sqrt_psd(rho.matrix())?;
    let r = s.matmul(&tilde)?.matmul(&s)?;
    let herm = Matrix::from_fn(4, |i, j| (r[(i, j)] + r[(j, i)].conj()) * 0.5);
    let (vals, _) = eig_hermitian(&herm)?;
    // Rank-deficient states leave O(ε) noise in the null eigenvalues, which
    // the square root would inflate to O(√ε).
    let floor = 1e-14 * vals[3].abs().max(1e-300);
    let roots: Vec<f64> = vals
        .iter()
        .map(|&v| if v > floor { v.sqrt() } else { 0.0 })
        .collect();
    Ok((roots[3] - roots[2] - roots[1] - roots[0]).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonlocalityReport {
    pub t_matrix: [[f64; 3]; 3],
    pub m_value: f64,
    pub b_max: f64,
    pub violates: bool,
}

/// Horodecki criterion: `M = u₁ + u₂`, the two largest eigenvalues of `TᵀT`.
pub fn chsh(rho: &DensityOp) -> Result<NonlocalityReport> {
    check_two_qubit(rho)?;
    let sig = pauli::all();
    let mut t = [[0.0; 3]; 3];
    for (i, si) in sig.iter().enumerate() {
        for (j, sj) in sig.iter().enumerate() {
            t[i][j] = rho.matrix().matmul(&si.kron(sj))?.trace().re;
        }
    }
    let ttt = Matrix::from_fn(3, |i, j| c((0..3).map(|k| t[k][i] * t[k][j]).sum(), 0.0));
    let (u, _) = eig_hermitian(&ttt)?;
    let m_value = (u[1] + u[2]).max(0.0);
    Ok(NonlocalityReport {
        t_matrix: t,
        m_value,
        b_max: 2.0 * m_value.sqrt(),
        violates: m_value > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{bob_factor, factors_at, NoiseParams};
    use crate::protocol::analytic_outputs;
    use crate::qlinalg::{PureKet, ZERO};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest};
    use rand::Rng;

    fn angles(theta: f64, phi: f64) -> BlochAngles {
        BlochAngles::new(theta, phi).unwrap()
    }

    fn fac_with_b(b: C64) -> DecoherenceFactors {
        DecoherenceFactors {
            b,
            ..DecoherenceFactors::noiseless(0.0)
        }
    }

    fn werner(p: f64) -> DensityOp {
        ResourceSpec::werner(p).unwrap().density().unwrap()
    }

    fn pure_pair(mu: f64, lambda: f64) -> DensityOp {
        ResourceSpec::pure(mu, lambda).unwrap().density().unwrap()
    }

    fn random_unitary2(rng: &mut ChaCha8Rng) -> Matrix {
        let (a, b, cc, d): (f64, f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen(), rng.gen());
        let th = a * PI;
        let ph = C64::from_polar(1.0, b * TAU);
        let ch = C64::from_polar(1.0, cc * TAU);
        let g = C64::from_polar(1.0, d * TAU);
        Matrix::from_rows(&[
            [ph * th.cos() * g, ch * th.sin() * g],
            [-ch.conj() * th.sin() * g, ph.conj() * th.cos() * g],
        ])
    }

    #[test]
    fn pointwise_trivial_cases() {
        let ang = angles(0.7, 2.0);
        assert_abs_diff_eq!(
            fidelity_pointwise(ang, &ang.ket().projector().unwrap()).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            fidelity_pointwise(ang, &DensityOp::maximally_mixed(2).unwrap()).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert!(fidelity_pointwise(ang, &DensityOp::maximally_mixed(4).unwrap()).is_err());
    }

    #[test]
    fn pointwise_formula_matches_matrix_contraction() {
        let (mu, la) = (0.6, 0.8);
        let b = c(0.83, 0.0);
        let resource = ResourceSpec::pure(mu, la).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (th, ph) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU));
            let ang = angles(th, ph);
            let out = analytic_outputs(ang, resource, &fac_with_b(b)).unwrap();
            let contracted = ang.ket().expectation(&out[2]).unwrap().re;
            let (c2, s2) = ((th / 2.0).cos().powi(2), (th / 2.0).sin().powi(2));
            let formula = 2.0 * la * la * c2 * c2
                + 2.0 * mu * mu * s2 * s2
                + 2.0 * s2 * c2 * (2.0 * mu * la * b.re);
            assert_abs_diff_eq!(contracted, formula, epsilon = 1e-13);
            assert_abs_diff_eq!(
                branch_overlaps(ang, resource, &fac_with_b(b))[2],
                formula,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn scalar_overlaps_match_matrix_outputs_for_both_resources() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..200 {
            let ang = angles(rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU));
            let resource = if k % 2 == 0 {
                let t: f64 = rng.gen_range(0.0..1.57);
                ResourceSpec::pure(t.cos(), t.sin()).unwrap()
            } else {
                ResourceSpec::werner(rng.gen()).unwrap()
            };
            let fac = DecoherenceFactors {
                a: C64::from_polar(rng.gen(), rng.gen_range(0.0..TAU)),
                b: C64::from_polar(rng.gen(), rng.gen_range(0.0..TAU)),
                ..DecoherenceFactors::noiseless(0.0)
            };
            let outs = analytic_outputs(ang, resource, &fac).unwrap();
            let scalars = branch_overlaps(ang, resource, &fac);
            for (m, s) in outs.iter().zip(scalars) {
                assert_abs_diff_eq!(ang.ket().expectation(m).unwrap().re, s, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn average_pure_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(average_fts_pure(h, h, c(1.0, 0.0)), 1.0, epsilon = 1e-15);
        for tau in [0.3, 1.0, 4.0] {
            let b = C64::from_polar(1.0, -tau);
            assert_abs_diff_eq!(
                average_fts_pure(h, h, b),
                2.0 / 3.0 + tau.cos() / 3.0,
                epsilon = 1e-15
            );
        }
        let r = ResourceSpec::pure_from_concurrence(0.8).unwrap();
        let b = bob_factor(&NoiseParams::ohmic(0.1, 0.01).unwrap(), TAU).unwrap();
        if let ResourceSpec::PurePair { mu, lambda } = r {
            assert!((average_fts_pure(mu, lambda, b) - 0.93).abs() < 0.005);
        }
    }

    #[test]
    fn average_werner_examples() {
        assert_abs_diff_eq!(average_fts_werner(1.0, c(1.0, 0.0)), 1.0, epsilon = 1e-15);
        let b = bob_factor(&NoiseParams::ohmic(0.1, 0.02).unwrap(), TAU).unwrap();
        assert!((average_fts_werner(0.9, b) - 0.95).abs() < 0.005);
        assert_abs_diff_eq!(average_fts_werner(0.5, b), 0.7495, epsilon = 5e-5);
    }

    /// Gauss–Legendre in x of the per-input Born-weighted fidelity.
    fn physical_oracle(mu: f64, lambda: f64, b: C64) -> f64 {
        let (m, l, k) = (mu * mu, lambda * lambda, mu * lambda * b.re);
        let (x, w) = gauss_legendre(400);
        x.iter()
            .zip(&w)
            .map(|(t, w)| {
                let x = 0.5 * (t + 1.0);
                let num = l * x * x + m * (1.0 - x).powi(2) + 2.0 * k * x * (1.0 - x);
                0.5 * w * num / (l * x + m * (1.0 - x))
            })
            .sum()
    }

    #[test]
    fn physical_closed_form_matches_integration() {
        for t in [0.2, 0.5, 0.7, std::f64::consts::FRAC_PI_4, 0.9, 1.2, 1.4] {
            let (mu, la) = (f64::cos(t), f64::sin(t));
            for b in [c(1.0, 0.0), c(0.3, -0.4), c(-0.7, 0.1), c(0.0, 0.0)] {
                assert_abs_diff_eq!(
                    average_fts_pure_physical(mu, la, b),
                    physical_oracle(mu, la, b),
                    epsilon = 1e-12
                );
            }
        }
        assert_eq!(average_fts_pure_physical(1.0, 0.0, c(1.0, 0.0)), 0.5);
        // Either side of the series switch.
        let b = c(0.6, 0.2);
        for t in [
            std::f64::consts::FRAC_PI_4 - 0.0124,
            std::f64::consts::FRAC_PI_4 - 0.0126,
        ] {
            assert_abs_diff_eq!(
                average_fts_pure_physical(f64::cos(t), f64::sin(t), b),
                physical_oracle(f64::cos(t), f64::sin(t), b),
                epsilon = 1e-13
            );
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(
            average_fts_pure_physical(h, h, b),
            average_fts_pure(h, h, b),
            epsilon = 1e-15
        );
    }

    #[test]
    fn physical_average_never_exceeds_one_but_paper_pointwise_can() {
        let (mu, la) = (0.8f64.sqrt(), 0.2f64.sqrt());
        let resource = ResourceSpec::pure(mu, la).unwrap();
        let fac = DecoherenceFactors::noiseless(0.0);
        let paper = fidelity_for_input(
            angles(PI, 0.0),
            resource,
            &fac,
            Strategy::RetainPsi,
            Convention::Paper,
            BranchSource::Pipeline,
        )
        .unwrap();
        assert_abs_diff_eq!(paper, 1.6, epsilon = 1e-12);
        for t in [0.1, 0.4, 0.8, 1.2] {
            for b in [c(1.0, 0.0), c(0.5, 0.5)] {
                assert!(average_fts_pure_physical(f64::cos(t), f64::sin(t), b) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_of_constant_is_one() {
        let r = average_fts_numeric(
            |_| Ok(1.0),
            NumericMethod::Quadrature {
                n_theta: 64,
                n_phi: 64,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-14);
        assert!(average_fts_numeric(
            |_| Ok(1.0),
            NumericMethod::Quadrature {
                n_theta: 16,
                n_phi: 64
            }
        )
        .is_err());
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let fac = factors_at(
            &NoiseParams::ohmic(0.3, 0.5).unwrap(),
            &NoiseParams::ohmic(0.1, 0.05).unwrap(),
            5.0,
        )
        .unwrap();
        for resource in [
            ResourceSpec::pure(0.6, 0.8).unwrap(),
            ResourceSpec::werner(0.7).unwrap(),
        ] {
            for strategy in [Strategy::RetainPsi, Strategy::RetainAll] {
                for convention in [Convention::Physical, Convention::Paper] {
                    let f = |ang| {
                        fidelity_for_input(
                            ang,
                            resource,
                            &fac,
                            strategy,
                            convention,
                            BranchSource::ClosedForm,
                        )
                    };
                    let q = average_fts_numeric(f, NumericMethod::DEFAULT_QUADRATURE).unwrap();
                    let exact = average_fts_analytic(resource, &fac, strategy, convention);
                    assert_abs_diff_eq!(q.value, exact, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn pipeline_quadrature_agrees_with_closed_form_source() {
        let fac = factors_at(
            &NoiseParams::ohmic(0.2, 1.0).unwrap(),
            &NoiseParams::ohmic(0.1, 0.2).unwrap(),
            2.0,
        )
        .unwrap();
        let resource = ResourceSpec::pure(0.8, 0.6).unwrap();
        let f = |ang| {
            fidelity_for_input(
                ang,
                resource,
                &fac,
                Strategy::RetainPsi,
                Convention::Physical,
                BranchSource::Pipeline,
            )
        };
        let q = average_fts_numeric(
            f,
            NumericMethod::Quadrature {
                n_theta: 64,
                n_phi: 64,
            },
        )
        .unwrap();
        let exact = average_fts_analytic(resource, &fac, Strategy::RetainPsi, Convention::Physical);
        assert_abs_diff_eq!(q.value, exact, epsilon = 1e-9);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_within_error() {
        let fac = fac_with_b(c(0.5, -0.3));
        let resource = ResourceSpec::pure(0.6, 0.8).unwrap();
        let f = |ang| {
            fidelity_for_input(
                ang,
                resource,
                &fac,
                Strategy::RetainPsi,
                Convention::Paper,
                BranchSource::ClosedForm,
            )
        };
        let method = NumericMethod::MonteCarlo {
            samples: 20_000,
            seed: 3,
        };
        let r1 = average_fts_numeric(f, method).unwrap();
        let r2 = average_fts_numeric(f, method).unwrap();
        assert_eq!(r1, r2);
        let exact = average_fts_analytic(resource, &fac, Strategy::RetainPsi, Convention::Paper);
        assert!((r1.value - exact).abs() < 4.0 * r1.stderr);
        assert!(!r1.widened);
    }

    #[test]
    fn few_samples_widen_the_error_bar() {
        let r = average_fts_numeric(
            |_| Ok(0.5),
            NumericMethod::MonteCarlo {
                samples: 4,
                seed: 1,
            },
        )
        .unwrap();
        assert!(r.widened);
        assert_abs_diff_eq!(r.stderr, 0.25, epsilon = 1e-15);
        assert!(average_fts_numeric(
            |_| Ok(0.5),
            NumericMethod::MonteCarlo {
                samples: 0,
                seed: 1
            }
        )
        .is_err());
    }

    #[test]
    fn concurrence_examples() {
        assert_abs_diff_eq!(
            concurrence(&pure_pair(0.6, 0.8)).unwrap(),
            0.96,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(concurrence(&werner(0.6)).unwrap(), 0.4, epsilon = 1e-10);
        assert_abs_diff_eq!(
            concurrence(&DensityOp::maximally_mixed(4).unwrap()).unwrap(),
            0.0,
            epsilon = 1e-10
        );
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            assert_abs_diff_eq!(
                concurrence(&werner(p)).unwrap(),
                ((3.0 * p - 1.0) / 2.0).max(0.0),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn chsh_examples() {
        let r = chsh(&werner(0.75)).unwrap();
        assert_abs_diff_eq!(r.b_max, 2.0 * 2f64.sqrt() * 0.75, epsilon = 1e-10);
        let bell = BellOutcome::PhiPlus.ket().projector().unwrap();
        assert_abs_diff_eq!(
            chsh(&bell).unwrap().b_max,
            2.0 * 2f64.sqrt(),
            epsilon = 1e-10
        );
        let r = chsh(&werner(0.4)).unwrap();
        assert_abs_diff_eq!(r.b_max, 1.13, epsilon = 0.005);
        assert!(!r.violates);
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            assert_abs_diff_eq!(
                chsh(&werner(p)).unwrap().m_value,
                2.0 * p * p,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn pure_pair_m_value_is_one_plus_concurrence_squared() {
        for k in 0..=16 {
            let t = k as f64 * std::f64::consts::FRAC_PI_4 / 16.0;
            let (mu, la) = (t.cos(), t.sin());
            let r = chsh(&pure_pair(mu, la)).unwrap();
            let cp = 2.0 * mu * la;
            assert_abs_diff_eq!(r.m_value, 1.0 + cp * cp, epsilon = 1e-10);
            // The (μ+λ)² expression agrees only at the extremes.
            let printed = (mu + la).powi(2);
            assert!(k == 0 || k == 16 || (printed - r.m_value).abs() > 1e-6);
        }
    }

    #[test]
    fn local_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let states = [pure_pair(0.6, 0.8), werner(0.8), {
            let v = vec![c(0.5, 0.1), c(0.1, -0.3), ZERO, c(0.2, 0.0)];
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            PureKet::new(v.into_iter().map(|z| z / n).collect())
                .unwrap()
                .projector()
                .unwrap()
        }];
        for rho in &states {
            let (c0, m0) = (concurrence(rho).unwrap(), chsh(rho).unwrap().m_value);
            for _ in 0..20 {
                let u = random_unitary2(&mut rng).kron(&random_unitary2(&mut rng));
                let rotated = DensityOp::new(rho.matrix().conjugate_by(&u).unwrap()).unwrap();
                assert_abs_diff_eq!(concurrence(&rotated).unwrap(), c0, epsilon = 1e-10);
                assert_abs_diff_eq!(chsh(&rotated).unwrap().m_value, m0, epsilon = 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn report_invariants(g in 0.0f64..1.0, l in 0.01f64..3.0, tau in 0.0f64..30.0, t in 0.05f64..1.5, p in 0.0f64..1.0) {
            let b = bob_factor(&NoiseParams::ohmic(g, l).unwrap(), tau).unwrap();
            let fp = average_fts_pure_physical(t.cos(), t.sin(), b);
            prop_assert!((0.0..=1.0 + 1e-9).contains(&fp));
            let fw = average_fts_werner(p, b);
            prop_assert!((0.0..=1.0 + 1e-9).contains(&fw));
            let r = chsh(&werner(p)).unwrap();
            prop_assert!((r.b_max - 2.0 * r.m_value.sqrt()).abs() < 1e-15);
            prop_assert!(r.violates == (r.m_value > 1.0));
        }
    }
}
