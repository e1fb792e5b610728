//! Numerical checks of the sum/product inequality and the window-count bound chain.

use gmil::oracle::{verify_theorem1, BoundChainSuite};

fn main() -> gmil::Result<()> {
    let n: Vec<usize> = (2..=10).collect();
    let t1 = verify_theorem1(20_000, &n, 1)?;
    println!(
        "sum <= product: {} trials ({} near equality), {} violations, worst log slack {:.3e}",
        t1.trials, t1.near_equality_trials, t1.violations, t1.worst_log_slack
    );

    let suite = BoundChainSuite::default();
    for (i, r) in suite.run()?.iter().enumerate().take(5) {
        println!(
            "dataset {i}: {} candidates, {} qualify, {} violations, target qualifies: {}",
            r.candidates,
            r.qualifying,
            r.violations,
            r.target_qualifies.unwrap_or(false)
        );
    }
    Ok(())
}
