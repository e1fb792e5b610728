//! Ten-fold cross-validation on Musk1 and Musk2.
//!
//! ```text
//! cargo run --release --example cross_validate_musk [data-dir]
//! ```

use std::path::PathBuf;

use gmil::evaluation::cross_validate;
use gmil::{load_csv, CsvSchema, TrainParams};

fn main() -> gmil::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));

    for (file, k, p, q) in [("musk1.csv", 10, 2, 0), ("musk2.csv", 22, 2, 2)] {
        let ds = load_csv(dir.join(file), &CsvSchema::default())?;
        let params = TrainParams {
            clusters: k,
            pos_centers: p,
            neg_centers: q,
            ..TrainParams::default()
        };
        let mut accs = Vec::new();
        for seed in 0..5 {
            let r = cross_validate(&ds, &TrainParams { seed, ..params.clone() }, 10, seed)?;
            accs.push(r.mean_accuracy);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!(
            "{file}: {} bags, K={k} p={p} q={q}, mean accuracy over 5 seeds {:.2}%",
            ds.len(),
            100.0 * mean
        );
    }
    Ok(())
}
