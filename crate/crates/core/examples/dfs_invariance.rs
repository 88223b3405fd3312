// The kept branches do not see Alice's bath; the discarded ones do.

use dfs_teleport::noise::NoiseParams;
use dfs_teleport::protocol::{run_protocol, BellOutcome, ResourceSpec, RunParams};
use dfs_teleport::qlinalg::BlochAngles;

pub fn run_example() -> dfs_teleport::Result<()> {
    let input = BlochAngles::new(2.0, 1.0)?;
    let bob = NoiseParams::ohmic(0.1, 0.2)?;
    println!("{:>8} {:>12} {:>12}", "gamma_A", "F(psi+)", "F(phi+)");
    for gamma in [0.0, 0.1, 0.5, 2.0] {
        let alice = NoiseParams::new(gamma, 1.0, 0.5)?;
        let run = run_protocol(&RunParams::new(
            input,
            ResourceSpec::werner(0.9)?,
            alice,
            bob,
            5.0,
        ))?;
        let psi = run
            .branch(BellOutcome::PsiPlus)
            .fidelity
            .unwrap_or(f64::NAN);
        let phi = run
            .branch(BellOutcome::PhiPlus)
            .fidelity
            .unwrap_or(f64::NAN);
        println!("{gamma:>8} {psi:>12.9} {phi:>12.9}");
    }
    Ok(())
}

fn main() -> dfs_teleport::Result<()> {
    run_example()
}
