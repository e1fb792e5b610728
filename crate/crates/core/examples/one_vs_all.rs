//! Multi-class data handled as one binary problem per class.

use gmil::evaluation::one_vs_all;
use gmil::synth::generate_multiclass;
use gmil::{NormalizationMode, TrainParams};

fn main() -> gmil::Result<()> {
    let (ds, _) = generate_multiclass(2, 5, 30, 0.02, 3)?;
    // Each "rest" class has its own concept, so negative centers matter here.
    for q in [0, 4] {
        let params = TrainParams {
            clusters: 32,
            pos_centers: 1,
            neg_centers: q,
            normalization: NormalizationMode::None,
            ..TrainParams::default()
        };
        let r = one_vs_all(&ds, &params, 10, 0)?;
        let per: Vec<String> = r
            .classes
            .iter()
            .map(|c| format!("{}={:.0}%", c.class, 100.0 * c.report.mean_accuracy))
            .collect();
        println!("q={q}: mean {:.1}%  [{}]", 100.0 * r.mean_accuracy, per.join(" "));
    }
    Ok(())
}
