// Bloch-averaged fidelity three ways, in both conventions.

use dfs_teleport::metrics::fidelity_report;
use dfs_teleport::noise::{factors_at, NoiseParams};
use dfs_teleport::protocol::{Convention, ResourceSpec, Strategy};
use dfs_teleport::qlinalg::BlochAngles;

pub fn run_example() -> dfs_teleport::Result<()> {
    let fac = factors_at(
        &NoiseParams::default_alice(),
        &NoiseParams::ohmic(0.1, 0.05)?,
        6.0,
    )?;
    let input = BlochAngles::new(0.8, 0.0)?;
    for resource in [ResourceSpec::pure(0.8, 0.6)?, ResourceSpec::werner(0.8)?] {
        for strategy in [Strategy::RetainPsi, Strategy::RetainAll] {
            for convention in [Convention::Physical, Convention::Paper] {
                let r = fidelity_report(input, resource, &fac, strategy, convention, 20_000, 1)?;
                println!(
                    "{resource:?} {strategy:?} {convention:?}: analytic {:.9} quadrature {:.9} mc {:.5} +- {:.5}",
                    r.average_analytic, r.average_quadrature, r.average_montecarlo, r.montecarlo_stderr
                );
            }
        }
    }
    Ok(())
}

fn main() -> dfs_teleport::Result<()> {
    run_example()
}
