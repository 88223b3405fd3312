// Picks Alice's measurement instant for a given bath on Bob's side.

use std::f64::consts::PI;

use dfs_teleport::noise::NoiseParams;
use dfs_teleport::optimizer::{maximize_timing, TimingProblem};
use dfs_teleport::protocol::{Convention, ResourceSpec};

pub fn run_example() -> dfs_teleport::Result<()> {
    let resource = ResourceSpec::pure_from_concurrence(0.8)?;
    let bob = NoiseParams::ohmic(0.1, 0.05)?;
    let mut problem = TimingProblem::new(resource, bob).with_window(PI, 7.0 * PI);
    problem.convention = Convention::Paper;

    let sol = maximize_timing(&problem, 1e-10)?;
    println!(
        "tau* = {:.9} (2pi = {:.9}), F* = {:.9}",
        sol.tau_star,
        2.0 * PI,
        sol.f_star
    );
    for (tau, f) in &sol.local_maxima {
        println!("  local max at {:.6} ({:.4} pi): {f:.6}", tau, tau / PI);
    }
    Ok(())
}

fn main() -> dfs_teleport::Result<()> {
    run_example()
}
