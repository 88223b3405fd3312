// Concurrence and CHSH bound of both resource families.

use dfs_teleport::metrics::{chsh, concurrence};
use dfs_teleport::protocol::ResourceSpec;

pub fn run_example() -> dfs_teleport::Result<()> {
    println!("{:<24} {:>8} {:>8} {:>8}", "resource", "C", "M", "B_max");
    let mut resources = vec![];
    for c in [0.2, 0.6, 1.0] {
        resources.push(ResourceSpec::pure_from_concurrence(c)?);
    }
    for p in [0.4, 0.7, 0.72, 1.0] {
        resources.push(ResourceSpec::werner(p)?);
    }
    for r in resources {
        let rho = r.density()?;
        let nl = chsh(&rho)?;
        let name = match r {
            ResourceSpec::PurePair { mu, lambda } => format!("pure mu={mu:.3} l={lambda:.3}"),
            ResourceSpec::Werner { p } => format!("werner p={p}"),
        };
        let mark = if nl.violates { " violates" } else { "" };
        println!(
            "{name:<24} {:>8.4} {:>8.4} {:>8.4}{mark}",
            concurrence(&rho)?,
            nl.m_value,
            nl.b_max
        );
    }
    Ok(())
}

fn main() -> dfs_teleport::Result<()> {
    run_example()
}
