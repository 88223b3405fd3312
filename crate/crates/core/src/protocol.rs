//! The teleportation run: input ⊗ resource, dephasing up to the measurement
//! instant, Bell measurement on Alice's pair, Bob's corrections and the
//! discard policy.
//!
//! Qubit order is `A₁ A₂ B`; `A₁` carries the unknown input and `A₂B` the
//! shared resource.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::channels::{alice_factor_matrix, bob_factor_matrix, joint_evolve};
use crate::error::{Error, Result};
use crate::noise::{factors_at_with, Backend, DecoherenceFactors, NoiseParams};
use crate::qlinalg::{c, pauli, BlochAngles, DensityOp, Matrix, PureKet, C64, STRUCT_TOL, ZERO};

/// Branches whose probability falls below this are reported as degenerate.
pub const DEGENERATE_PROB: f64 = 1e-14;

/// The entangled pair shared by Alice (`A₂`) and Bob (`B`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResourceSpec {
    /// `μ|↑↑⟩ + λ|↓↓⟩`
    #[serde(rename = "pure")]
    PurePair { mu: f64, lambda: f64 },
    /// `p|φ⁺⟩⟨φ⁺| + (1 − p) I/4`
    Werner { p: f64 },
}

impl ResourceSpec {
    pub fn pure(mu: f64, lambda: f64) -> Result<Self> {
        let r = ResourceSpec::PurePair { mu, lambda };
        r.validate()?;
        Ok(r)
    }

    pub fn werner(p: f64) -> Result<Self> {
        let r = ResourceSpec::Werner { p };
        r.validate()?;
        Ok(r)
    }

    pub fn maximal_pure() -> Self {
        ResourceSpec::PurePair {
            mu: FRAC_1_SQRT_2,
            lambda: FRAC_1_SQRT_2,
        }
    }

    /// Pure pair with concurrence `2μλ = C`, taking `μ ≥ λ`.
    pub fn pure_from_concurrence(conc: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&conc) {
            return Err(Error::InvalidArgument(format!(
                "concurrence {conc} outside [0, 1]"
            )));
        }
        let s = (1.0 - conc * conc).sqrt();
        let mu = ((1.0 + s) / 2.0).sqrt();
        let lambda = ((1.0 - s) / 2.0).sqrt();
        Self::pure(mu, lambda)
    }

    /// Werner state with concurrence `(3p − 1)/2 = C`.
    pub fn werner_from_concurrence(conc: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&conc) {
            return Err(Error::InvalidArgument(format!(
                "concurrence {conc} outside [0, 1]"
            )));
        }
        Self::werner((2.0 * conc + 1.0) / 3.0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ResourceSpec::PurePair { mu, lambda } => {
                if !(mu >= 0.0 && lambda >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "amplitudes must be non-negative, got mu={mu}, lambda={lambda}"
                    )));
                }
                if (mu * mu + lambda * lambda - 1.0).abs() > STRUCT_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "mu^2 + lambda^2 = {} is not 1",
                        mu * mu + lambda * lambda
                    )));
                }
            }
            ResourceSpec::Werner { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "Werner weight {p} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Closed-form concurrence: `2μλ` or `max(0, (3p − 1)/2)`.
    pub fn concurrence(&self) -> f64 {
        match *self {
            ResourceSpec::PurePair { mu, lambda } => 2.0 * mu * lambda,
            ResourceSpec::Werner { p } => ((3.0 * p - 1.0) / 2.0).max(0.0),
        }
    }

    /// Two-qubit density operator on `A₂B`.
    pub fn density(&self) -> Result<DensityOp> {
        self.validate()?;
        Ok(match *self {
            ResourceSpec::PurePair { mu, lambda } => {
                let ket = PureKet::new(vec![c(mu, 0.0), ZERO, ZERO, c(lambda, 0.0)])?;
                DensityOp::from_trusted(ket.projector_matrix(), true)
            }
            ResourceSpec::Werner { p } => {
                let bell = BellOutcome::PhiPlus.ket().projector_matrix();
                let m = &bell.scale_re(p) + &Matrix::identity(4).scale_re((1.0 - p) / 4.0);
                DensityOp::from_trusted(m, true)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the discard strategy keeps this outcome.
    pub fn retained(self) -> bool {
        matches!(self, BellOutcome::PsiPlus | BellOutcome::PsiMinus)
    }

    pub fn ket(self) -> PureKet {
        let h = c(FRAC_1_SQRT_2, 0.0);
        let amps = match self {
            BellOutcome::PhiPlus => vec![h, ZERO, ZERO, h],
            BellOutcome::PhiMinus => vec![h, ZERO, ZERO, -h],
            BellOutcome::PsiPlus => vec![ZERO, h, h, ZERO],
            BellOutcome::PsiMinus => vec![ZERO, h, -h, ZERO],
        };
        PureKet::new(amps).expect("Bell kets are normalized")
    }

    /// Bob's unitary for this outcome.
    pub fn correction(self) -> Matrix {
        match self {
            BellOutcome::PhiPlus => Matrix::identity(2),
            BellOutcome::PhiMinus => pauli::z(),
            BellOutcome::PsiPlus => pauli::x(),
            BellOutcome::PsiMinus => pauli::y().scale(c(0.0, 1.0)),
        }
    }
}

/// Which outcomes Bob keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Keep ψ± and discard φ±.
    #[default]
    #[serde(alias = "retain-psi-only")]
    RetainPsi,
    /// Standard teleportation: keep everything.
    RetainAll,
}

impl Strategy {
    pub fn keeps(self, outcome: BellOutcome) -> bool {
        match self {
            Strategy::RetainPsi => outcome.retained(),
            Strategy::RetainAll => true,
        }
    }
}

/// How fidelities of retained branches are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Born-weighted average over the retained branches.
    #[default]
    Physical,
    /// Unweighted mean of the paper-scaled branch overlaps.
    Paper,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchResult {
    pub outcome: BellOutcome,
    pub retained: bool,
    pub probability: f64,
    pub degenerate: bool,
    /// Bob's normalized state before correction; `None` when degenerate.
    pub conditional: Option<DensityOp>,
    /// `4 × probability × conditional`.
    pub paper_scaled: DensityOp,
    /// Corrected, normalized output; `None` when degenerate.
    pub output: Option<DensityOp>,
    pub fidelity: Option<f64>,
    /// Overlap of the corrected paper-scaled state with the input.
    pub paper_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolRun {
    pub input: BlochAngles,
    pub resource: ResourceSpec,
    pub alice_noise: NoiseParams,
    pub bob_noise: NoiseParams,
    pub tau: f64,
    pub strategy: Strategy,
    pub factors: DecoherenceFactors,
    pub branches: Vec<BranchResult>,
    pub classical_bits: f64,
    /// Born-weighted fidelity over retained branches.
    pub fidelity: f64,
    pub paper_fidelity: f64,
}

impl ProtocolRun {
    pub fn branch(&self, outcome: BellOutcome) -> &BranchResult {
        &self.branches[outcome.index()]
    }

    pub fn fidelity_in(&self, convention: Convention) -> f64 {
        match convention {
            Convention::Physical => self.fidelity,
            Convention::Paper => self.paper_fidelity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunParams {
    pub input: BlochAngles,
    pub resource: ResourceSpec,
    pub alice_noise: NoiseParams,
    pub bob_noise: NoiseParams,
    pub tau: f64,
    pub strategy: Strategy,
    pub backend: Backend,
}

impl RunParams {
    pub fn new(
        input: BlochAngles,
        resource: ResourceSpec,
        alice: NoiseParams,
        bob: NoiseParams,
        tau: f64,
    ) -> Self {
        Self {
            input,
            resource,
            alice_noise: alice,
            bob_noise: bob,
            tau,
            strategy: Strategy::RetainPsi,
            backend: Backend::Auto,
        }
    }
}

/// `ρ_{A₁} ⊗ ρ_{A₂B}`.
pub fn build_joint(input: BlochAngles, resource: ResourceSpec) -> Result<DensityOp> {
    let rho_in = DensityOp::from_trusted(input.ket().projector_matrix(), true);
    rho_in.tensor(&resource.density()?)
}

pub fn run_protocol(params: &RunParams) -> Result<ProtocolRun> {
    if params.tau.is_nan() || params.tau < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tau {} must be >= 0",
            params.tau
        )));
    }
    params.alice_noise.validate()?;
    params.bob_noise.validate()?;
    let factors = factors_at_with(
        &params.alice_noise,
        &params.bob_noise,
        params.tau,
        params.backend,
    )?;
    let (branches, classical_bits, fidelity, paper_fidelity) =
        measure_branches(params.input, params.resource, &factors, params.strategy)?;
    Ok(ProtocolRun {
        input: params.input,
        resource: params.resource,
        alice_noise: params.alice_noise,
        bob_noise: params.bob_noise,
        tau: params.tau,
        strategy: params.strategy,
        factors,
        branches,
        classical_bits,
        fidelity,
        paper_fidelity,
    })
}

type Measured = (Vec<BranchResult>, f64, f64, f64);

/// The brute-force pipeline for given decoherence factors.
pub fn measure_branches(
    input: BlochAngles,
    resource: ResourceSpec,
    factors: &DecoherenceFactors,
    strategy: Strategy,
) -> Result<Measured> {
    let joint = build_joint(input, resource)?;
    let evolved = joint_evolve(
        &joint,
        &alice_factor_matrix(factors)?,
        &bob_factor_matrix(factors)?,
    )?;
    let ket_in = input.ket();

    let mut branches = Vec::with_capacity(4);
    for outcome in BellOutcome::ALL {
        let projector = outcome.ket().projector_matrix().kron(&Matrix::identity(2));
        let projected = evolved.matrix().conjugate_by(&projector)?;
        let probability = projected.trace().re;
        let bob = crate::qlinalg::partial_trace(&projected, &[2])?;
        let paper_scaled = DensityOp::from_trusted(bob.scale_re(4.0), false);
        let u = outcome.correction();
        let paper_fidelity = ket_in
            .expectation(&paper_scaled.matrix().conjugate_by(&u)?)?
            .re;
        let degenerate = probability < DEGENERATE_PROB;
        let (conditional, output, fidelity) = if degenerate {
            (None, None, None)
        } else {
            let cond = bob.scale_re(1.0 / probability);
            let out = cond.conjugate_by(&u)?;
            let f = ket_in.expectation(&out)?.re;
            (
                Some(DensityOp::from_trusted(cond, true)),
                Some(DensityOp::from_trusted(out, true)),
                Some(f),
            )
        };
        branches.push(BranchResult {
            outcome,
            retained: strategy.keeps(outcome),
            probability,
            degenerate,
            conditional,
            paper_scaled,
            output,
            fidelity,
            paper_fidelity,
        });
    }

    let total: f64 = branches.iter().map(|b| b.probability).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::ContractViolation(format!(
            "branch probabilities sum to {total}"
        )));
    }
    let bits = classical_bits(
        &branches.iter().map(|b| b.probability).collect::<Vec<_>>(),
        strategy,
    );
    let (fidelity, paper_fidelity) = combine_fidelities(&branches);
    Ok((branches, bits, fidelity, paper_fidelity))
}

fn combine_fidelities(branches: &[BranchResult]) -> (f64, f64) {
    let kept: Vec<&BranchResult> = branches.iter().filter(|b| b.retained).collect();
    let weight: f64 = kept
        .iter()
        .filter(|b| !b.degenerate)
        .map(|b| b.probability)
        .sum();
    let physical = if weight > 0.0 {
        kept.iter()
            .filter_map(|b| b.fidelity.map(|f| b.probability * f))
            .sum::<f64>()
            / weight
    } else {
        f64::NAN
    };
    let paper = kept.iter().map(|b| b.paper_fidelity).sum::<f64>() / kept.len() as f64;
    (physical, paper)
}

fn entropy_bits(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// Shannon entropy of Alice's message. Under the discard strategy both φ
/// outcomes send the same "discard" message.
pub fn classical_bits(probs: &[f64], strategy: Strategy) -> f64 {
    match strategy {
        Strategy::RetainPsi => entropy_bits(&[probs[0] + probs[1], probs[2], probs[3]]),
        Strategy::RetainAll => entropy_bits(probs),
    }
}

/// Closed-form pre-correction states of Bob's qubit for the four outcomes.
///
/// Pure pairs come out paper-scaled (trace `4p_k`); Werner resources give
/// unit-trace states, which coincide with the paper-scaled ones since every
/// outcome has probability ¼.
pub fn analytic_branch_states(
    input: BlochAngles,
    resource: ResourceSpec,
    factors: &DecoherenceFactors,
) -> Result<[Matrix; 4]> {
    resource.validate()?;
    let (al, be) = input.amplitudes();
    let (a, b) = (factors.a, factors.b);
    let m2 = |d0: f64, off: C64, d1: f64| {
        Matrix::from_rows(&[[c(d0, 0.0), off], [off.conj(), c(d1, 0.0)]])
    };
    Ok(match resource {
        ResourceSpec::PurePair { mu, lambda } => {
            let (mu, la) = (c(mu, 0.0), c(lambda, 0.0));
            let (mm, ll) = (mu.norm_sqr(), la.norm_sqr());
            let (aa, bb) = (al.norm_sqr(), be.norm_sqr());
            let phi_off = mu * la.conj() * al * be.conj() * a * b * 2.0;
            let psi_off = mu * la.conj() * al.conj() * be * b * 2.0;
            [
                m2(2.0 * mm * aa, phi_off, 2.0 * ll * bb),
                m2(2.0 * mm * aa, -phi_off, 2.0 * ll * bb),
                m2(2.0 * mm * bb, psi_off, 2.0 * ll * aa),
                m2(2.0 * mm * bb, -psi_off, 2.0 * ll * aa),
            ]
        }
        ResourceSpec::Werner { p } => {
            let skew = 0.5 * p * (al.norm_sqr() - be.norm_sqr());
            let (p_uu, p_dd) = (0.5 + skew, 0.5 - skew);
            let p_ud = al * be.conj() * a * b * p;
            let (q_uu, q_dd) = (p_dd, p_uu);
            let q_ud = al.conj() * be * b * p;
            [
                m2(p_uu, p_ud, p_dd),
                m2(p_uu, -p_ud, p_dd),
                m2(q_uu, q_ud, q_dd),
                m2(q_uu, -q_ud, q_dd),
            ]
        }
    })
}

/// Corrected outputs of [`analytic_branch_states`], in the same scaling.
pub fn analytic_outputs(
    input: BlochAngles,
    resource: ResourceSpec,
    factors: &DecoherenceFactors,
) -> Result<[Matrix; 4]> {
    let states = analytic_branch_states(input, resource, factors)?;
    let mut out = states.clone();
    for (k, outcome) in BellOutcome::ALL.into_iter().enumerate() {
        out[k] = states[k].conjugate_by(&outcome.correction())?;
    }
    Ok(out)
}

/// Born probabilities of the four outcomes.
pub fn analytic_probabilities(input: BlochAngles, resource: ResourceSpec) -> [f64; 4] {
    match resource {
        ResourceSpec::PurePair { mu, lambda } => {
            let (al, be) = input.amplitudes();
            let phi = 0.5 * ((al * mu).norm_sqr() + (be * lambda).norm_sqr());
            let psi = 0.5 * ((al * lambda).norm_sqr() + (be * mu).norm_sqr());
            [phi, phi, psi, psi]
        }
        ResourceSpec::Werner { .. } => [0.25; 4],
    }
}
