//! Musk1 accuracy with the raw 166 features against a few PCA projections.

use gmil::evaluation::cross_validate;
use gmil::{load_csv, CsvSchema, TrainParams};

fn main() -> gmil::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/musk1.csv");
    let ds = load_csv(path, &CsvSchema::default())?;
    for pca in [None, Some(40), Some(10), Some(3)] {
        let params = TrainParams {
            clusters: 10,
            pos_centers: 2,
            pca,
            ..TrainParams::default()
        };
        let r = cross_validate(&ds, &params, 10, 0)?;
        println!(
            "pca {:>4}: {:.2}%",
            pca.map_or("-".into(), |r| r.to_string()),
            100.0 * r.mean_accuracy
        );
    }
    Ok(())
}
