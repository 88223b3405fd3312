// Regenerates the two Werner-resource tables as CSV and lists any row that
// misses the printed values.

use dfs_teleport::experiments::cmd_table;

pub fn run_example() -> dfs_teleport::Result<()> {
    for which in [2, 3] {
        let table = cmd_table(which)?;
        print!("{}", table.to_csv());
        let flagged: Vec<_> = table.rows.iter().filter(|r| !r.flags.is_empty()).collect();
        println!("{} of {} rows flagged\n", flagged.len(), table.rows.len());
    }
    Ok(())
}

fn main() -> dfs_teleport::Result<()> {
    run_example()
}
