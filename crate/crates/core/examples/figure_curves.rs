// Fidelity against measurement instant for every figure panel, with the
// successive maxima of each curve.

use std::f64::consts::PI;

use dfs_teleport::experiments::{cmd_figure, curve_maxima};

pub fn run_example() -> dfs_teleport::Result<()> {
    for which in [2u8, 3] {
        for panel in ['a', 'b', 'c', 'd'] {
            let table = cmd_figure(which, panel, 1201)?;
            let curve: Vec<(f64, f64)> = table
                .rows
                .iter()
                .map(|r| (r.values[0], r.values[1]))
                .collect();
            let peaks: Vec<String> = curve_maxima(&curve)
                .iter()
                .map(|(t, f)| format!("{:.2}pi:{f:.4}", t / PI))
                .collect();
            println!("fig {which}({panel}): {}", peaks.join(" "));
        }
    }
    Ok(())
}

fn main() -> dfs_teleport::Result<()> {
    run_example()
}
