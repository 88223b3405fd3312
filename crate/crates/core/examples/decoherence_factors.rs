// Cumulative decay of an Ohmic bath from the closed form and from
// frequency quadrature, then a finite-temperature bath.

use dfs_teleport::noise::{cumulative_decay_with, factors_at, Backend, NoiseParams};

pub fn run_example() -> dfs_teleport::Result<()> {
    let cold = NoiseParams::ohmic(0.1, 0.5)?;
    println!("{:>8} {:>16} {:>16}", "tau", "closed form", "quadrature");
    for tau in [0.5, 2.0, std::f64::consts::TAU, 20.0] {
        let exact = cumulative_decay_with(&cold, tau, Backend::ClosedForm)?;
        let quad = cumulative_decay_with(&cold, tau, Backend::Quadrature)?;
        println!("{tau:>8.3} {exact:>16.12} {quad:>16.12}");
    }

    // Only quadrature handles T > 0.
    let warm = NoiseParams::new(0.1, 0.5, 0.3)?;
    let fac = factors_at(&warm, &warm, 6.0)?;
    println!(
        "T = 0.3: |f| = {:.6}, |a| = {:.6}, |b| = {:.6}",
        fac.f.norm(),
        fac.a.norm(),
        fac.b.norm()
    );
    Ok(())
}

fn main() -> dfs_teleport::Result<()> {
    run_example()
}
