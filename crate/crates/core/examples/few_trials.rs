//! How far the stabilized spreads are from their large-N constants when only
//! a handful of trials is available.

use erlab::invariance::{few_trials_report, STANDARD_P_GRID};

fn main() -> erlab::Result<()> {
    for n in [5, 10, 20] {
        let report = few_trials_report(&STANDARD_P_GRID, n)?;
        println!("N = {n}");
        for (name, rep) in [("chi", &report.chi), ("psi", &report.psi)] {
            let d: Vec<String> = rep.rows.iter().map(|r| format!("{:+.3}", r.rel_departure)).collect();
            println!("  {name}: {}", d.join(" "));
        }
        for (name, row) in report.flagged_rows() {
            println!("  flagged: {name} at p = {}", row.p);
        }
    }
    Ok(())
}
