//! Solved dephasing channels as element-wise factor matrices.
//!
//! A dephasing channel leaves populations alone and multiplies each coherence
//! by a fixed complex number, so `ρ ↦ F ⊙ ρ` for a Hermitian factor matrix `F`
//! with unit diagonal. Alice's two qubits share one bath (4×4 factors), Bob's
//! qubit has its own (2×2), and the joint three-qubit map is `F_A ⊗ F_B`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::DecoherenceFactors;
use crate::qlinalg::{DensityOp, Matrix, ONE, STRUCT_TOL};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorMatrix {
    factors: Matrix,
}

impl FactorMatrix {
    /// Checks unit diagonal, Hermitian symmetry and `|F_ij| ≤ 1`.
    pub fn new(factors: Matrix) -> Result<Self> {
        let n = factors.dim();
        for i in 0..n {
            if (factors[(i, i)] - ONE).norm() > STRUCT_TOL {
                return Err(Error::ContractViolation(format!(
                    "factor matrix diagonal entry {i} is {}",
                    factors[(i, i)]
                )));
            }
        }
        if factors.hermiticity_defect() > STRUCT_TOL {
            return Err(Error::ContractViolation(
                "factor matrix is not Hermitian".into(),
            ));
        }
        if factors.max_abs() > 1.0 + STRUCT_TOL {
            return Err(Error::ContractViolation(
                "factor magnitude exceeds 1".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            factors: Matrix::from_fn(dim, |_, _| ONE),
        }
    }

    pub fn dim(&self) -> usize {
        self.factors.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.factors
    }

    pub fn tensor(&self, other: &FactorMatrix) -> FactorMatrix {
        FactorMatrix {
            factors: self.factors.kron(&other.factors),
        }
    }
}

/// Alice's common-bath factors in the `(↑↑, ↑↓, ↓↑, ↓↓)` basis.
///
/// ```text
/// ⎡ 1   f   f   a  ⎤
/// ⎢ f*  1   1   g* ⎥
/// ⎢ f*  1   1   g* ⎥
/// ⎣ a*  g   g   1  ⎦
/// ```
/// The unit `(↑↓, ↓↑)` entry is the decoherence-free coherence.
pub fn alice_factor_matrix(fac: &DecoherenceFactors) -> Result<FactorMatrix> {
    let (f, g, a) = (fac.f, fac.g, fac.a);
    let m = Matrix::from_rows(&[
        [ONE, f, f, a],
        [f.conj(), ONE, ONE, g.conj()],
        [f.conj(), ONE, ONE, g.conj()],
        [a.conj(), g, g, ONE],
    ]);
    FactorMatrix::new(m)
}

/// Bob's local-bath factors: `[[1, b], [b*, 1]]`.
pub fn bob_factor_matrix(fac: &DecoherenceFactors) -> Result<FactorMatrix> {
    let b = fac.b;
    FactorMatrix::new(Matrix::from_rows(&[[ONE, b], [b.conj(), ONE]]))
}

/// `ρ'_ij = F_ij ρ_ij`.
pub fn apply_channel(rho: &DensityOp, fm: &FactorMatrix) -> Result<DensityOp> {
    let out = rho.matrix().hadamard(fm.matrix())?;
    Ok(DensityOp::from_trusted(out, rho.is_normalized()))
}

/// Evolves an `A₁ ⊗ A₂ ⊗ B` state under Alice's common bath and Bob's bath.
pub fn joint_evolve(
    rho: &DensityOp,
    alice: &FactorMatrix,
    bob: &FactorMatrix,
) -> Result<DensityOp> {
    if alice.dim() != 4 {
        return Err(Error::DimensionMismatch {
            left: 4,
            right: alice.dim(),
        });
    }
    if bob.dim() != 2 {
        return Err(Error::DimensionMismatch {
            left: 2,
            right: bob.dim(),
        });
    }
    if rho.dim() != 8 {
        return Err(Error::DimensionMismatch {
            left: 8,
            right: rho.dim(),
        });
    }
    apply_channel(rho, &alice.tensor(bob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{factors_at, NoiseParams};
    use crate::qlinalg::{c, eig_hermitian, BlochAngles, PureKet, ZERO};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, TAU};

    fn bell_phi_plus() -> DensityOp {
        PureKet::new(vec![
            c(FRAC_1_SQRT_2, 0.0),
            ZERO,
            ZERO,
            c(FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap()
        .projector()
        .unwrap()
    }

    #[test]
    fn noiseless_at_time_zero_is_all_ones() {
        let fac = DecoherenceFactors::noiseless(0.0);
        let fm = alice_factor_matrix(&fac).unwrap();
        assert_eq!(fm, FactorMatrix::identity(4));
        assert_eq!(bob_factor_matrix(&fac).unwrap(), FactorMatrix::identity(2));
    }

    #[test]
    fn double_flip_entry_is_fourth_power_of_single_flip() {
        let alice = NoiseParams::ohmic(0.3, 1.0).unwrap();
        let fac = factors_at(&alice, &NoiseParams::noiseless(), 2.0).unwrap();
        let fm = alice_factor_matrix(&fac).unwrap();
        let d = fm.matrix()[(0, 1)].norm();
        assert!((fm.matrix()[(0, 3)].norm() - d.powi(4)).abs() < 1e-14);
        assert_eq!(fm.matrix()[(1, 2)], ONE);
        assert_eq!(fm.matrix()[(2, 1)], ONE);
    }

    #[test]
    fn bob_entry_magnitudes() {
        let alice = NoiseParams::default_alice();
        for (lam, expected) in [
            (0.01, 0.999_212_296_504_960_9),
            (5.0, 0.251_797_891_450_172),
        ] {
            let bob = NoiseParams::ohmic(0.1, lam).unwrap();
            let fac = factors_at(&alice, &bob, TAU).unwrap();
            let fm = bob_factor_matrix(&fac).unwrap();
            assert!((fm.matrix()[(0, 1)].norm() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_and_diagonal_inputs_unchanged() {
        let rho = bell_phi_plus();
        let out = apply_channel(&rho, &FactorMatrix::identity(4)).unwrap();
        assert_eq!(out, rho);

        let diag = DensityOp::new(Matrix::from_real_diag(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let fac = factors_at(
            &NoiseParams::ohmic(0.5, 2.0).unwrap(),
            &NoiseParams::noiseless(),
            3.0,
        )
        .unwrap();
        let out = apply_channel(&diag, &alice_factor_matrix(&fac).unwrap()).unwrap();
        assert_eq!(out.matrix(), diag.matrix());
    }

    #[test]
    fn bell_state_coherence_scaled_by_double_flip_factor() {
        let fac = factors_at(
            &NoiseParams::ohmic(0.2, 0.5).unwrap(),
            &NoiseParams::noiseless(),
            1.5,
        )
        .unwrap();
        let out = apply_channel(&bell_phi_plus(), &alice_factor_matrix(&fac).unwrap()).unwrap();
        let m = out.matrix();
        assert!((m[(0, 3)] - fac.a * 0.5).norm() < 1e-15);
        assert!((m[(3, 0)] - fac.a.conj() * 0.5).norm() < 1e-15);
        assert!((m[(0, 0)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn local_maps_commute() {
        let fac = factors_at(
            &NoiseParams::new(0.3, 0.4, 0.2).unwrap(),
            &NoiseParams::ohmic(0.1, 0.7).unwrap(),
            2.2,
        )
        .unwrap();
        let fa = alice_factor_matrix(&fac).unwrap();
        let fb = bob_factor_matrix(&fac).unwrap();
        let input = BlochAngles::new(1.1, 0.4)
            .unwrap()
            .ket()
            .projector()
            .unwrap();
        let rho = input
            .tensor(&DensityOp::maximally_mixed(4).unwrap())
            .unwrap();
        let joint = joint_evolve(&rho, &fa, &fb).unwrap();
        let a_then_b = apply_channel(
            &apply_channel(&rho, &fa.tensor(&FactorMatrix::identity(2))).unwrap(),
            &FactorMatrix::identity(4).tensor(&fb),
        )
        .unwrap();
        let b_then_a = apply_channel(
            &apply_channel(&rho, &FactorMatrix::identity(4).tensor(&fb)).unwrap(),
            &fa.tensor(&FactorMatrix::identity(2)),
        )
        .unwrap();
        assert!(a_then_b.matrix().max_abs_diff(b_then_a.matrix()) <= 1e-15);
        assert!(joint.matrix().max_abs_diff(a_then_b.matrix()) <= 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let rho = DensityOp::maximally_mixed(4).unwrap();
        assert!(matches!(
            apply_channel(&rho, &FactorMatrix::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(
            joint_evolve(&rho, &FactorMatrix::identity(4), &FactorMatrix::identity(2)).is_err()
        );
    }

    /// A Schur channel is completely positive iff its factor matrix is PSD
    /// (the Choi matrix is the factor matrix embedded on the `|ii⟩` block).
    #[test]
    fn choi_matrices_are_positive() {
        for &(g, l, t) in &[
            (0.1, 0.1, 0.0),
            (0.5, 2.0, 0.0),
            (0.3, 0.5, 1.0),
            (2.0, 1.0, 0.3),
        ] {
            let alice = NoiseParams::new(g, l, t).unwrap();
            for tau in [0.3, 1.0, 5.0, 20.0] {
                let fac = factors_at(&alice, &alice, tau).unwrap();
                let fa = alice_factor_matrix(&fac).unwrap();
                let mut choi = Matrix::zeros(16);
                for i in 0..4 {
                    for j in 0..4 {
                        choi[(i * 4 + i, j * 4 + j)] = fa.matrix()[(i, j)];
                    }
                }
                let (vals, _) = eig_hermitian(&choi).unwrap();
                assert!(
                    vals[0] >= -1e-10,
                    "Choi eigenvalue {} at γ={g} τ={tau}",
                    vals[0]
                );
            }
        }
    }

    proptest! {
        #[test]
        fn channel_preserves_trace_populations_positivity_and_dfs(
            entries in proptest::collection::vec(-1.0f64..1.0, 32),
            gamma in 0.0f64..2.0,
            lambda_c in 0.01f64..5.0,
            temp in 0.0f64..1.0,
            tau in 0.0f64..30.0,
        ) {
            let g = Matrix::from_fn(4, |i, j| c(entries[i * 4 + j], entries[16 + i * 4 + j]));
            let psd = &g * &g.adjoint();
            let rho = DensityOp::new(psd.scale_re(1.0 / psd.trace().re)).unwrap();
            let alice = NoiseParams::new(gamma, lambda_c, temp).unwrap();
            let fac = factors_at(&alice, &NoiseParams::noiseless(), tau).unwrap();
            let out = apply_channel(&rho, &alice_factor_matrix(&fac).unwrap()).unwrap();
            for i in 0..4 {
                prop_assert_eq!(out.matrix()[(i, i)], rho.matrix()[(i, i)]);
            }
            prop_assert_eq!(out.matrix()[(1, 2)], rho.matrix()[(1, 2)]);
            prop_assert_eq!(out.matrix()[(2, 1)], rho.matrix()[(2, 1)]);
            prop_assert!(out.matrix().hermiticity_defect() < 1e-12);
            let (vals, _) = eig_hermitian(out.matrix()).unwrap();
            prop_assert!(vals[0] >= -1e-10);
        }
    }
}
