// One teleportation run with a non-maximal pure resource under both baths.

use dfs_teleport::noise::NoiseParams;
use dfs_teleport::protocol::{run_protocol, ResourceSpec, RunParams};
use dfs_teleport::qlinalg::BlochAngles;

pub fn run_example() -> dfs_teleport::Result<()> {
    let params = RunParams::new(
        BlochAngles::new(1.2, 0.4)?,
        ResourceSpec::pure(0.8, 0.6)?,
        NoiseParams::ohmic(0.3, 0.5)?,
        NoiseParams::ohmic(0.1, 0.05)?,
        2.0 * std::f64::consts::PI,
    );
    let run = run_protocol(&params)?;

    println!(
        "|b| = {:.6}, |a| = {:.6}",
        run.factors.b.norm(),
        run.factors.a.norm()
    );
    for br in &run.branches {
        let f = br.fidelity.map_or("-".to_string(), |f| format!("{f:.6}"));
        let kept = if br.retained { "kept" } else { "discarded" };
        println!(
            "{:?}: p = {:.4}, fidelity = {f} ({kept})",
            br.outcome, br.probability
        );
    }
    println!("fidelity (physical) = {:.6}", run.fidelity);
    println!("fidelity (paper-scaled) = {:.6}", run.paper_fidelity);
    println!("classical bits = {}", run.classical_bits);
    Ok(())
}

fn main() -> dfs_teleport::Result<()> {
    run_example()
}
