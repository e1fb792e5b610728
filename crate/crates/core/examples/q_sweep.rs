//! Accuracy on Musk2 as the number of negative centers grows. Clustering is
//! shared across all (p, q) pairs within a fold.

use gmil::evaluation::cross_validate_grid;
use gmil::{load_csv, CsvSchema, TrainParams};

fn main() -> gmil::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/musk2.csv");
    let ds = load_csv(path, &CsvSchema::default())?;
    let params = TrainParams {
        clusters: 22,
        pos_centers: 2,
        ..TrainParams::default()
    };
    let pairs: Vec<(usize, usize)> = [0, 1, 2, 4, 8, 16].iter().map(|&q| (2, q)).collect();
    for r in cross_validate_grid(&ds, &params, 10, 0, &pairs)? {
        println!("q={:>2}: {:.2}%", r.params.neg_centers, 100.0 * r.mean_accuracy);
    }
    Ok(())
}
