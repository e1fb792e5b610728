//! Train a codebook on a planted dataset, save it, reload it, and classify
//! fresh bags drawn from the same concept.

use gmil::synth::{generate, SynthSpec};
use gmil::{classify_batch, train, Codebook, NormalizationMode, TrainParams};

fn main() -> gmil::Result<()> {
    let spec = SynthSpec::planted(2, 40, 40, 0.02, 1)?;
    let (train_set, truth) = generate(&spec)?;
    let (test_set, _) = generate(&spec.reseeded(2))?;

    let params = TrainParams {
        clusters: 16,
        normalization: NormalizationMode::None,
        ..TrainParams::default()
    };
    let cb = train(&train_set, &params)?;
    println!("target      {:?}", truth.targets[0]);
    println!("pos center  {:?}", cb.positive_centers[0]);
    println!("tau         {:?}", cb.tau);

    let path = std::env::temp_dir().join("gmil-train-predict.json");
    cb.save(&path)?;
    let cb = Codebook::load(&path)?;

    let preds = classify_batch(&test_set.bags, &cb)?;
    let correct = test_set
        .bags
        .iter()
        .zip(&preds)
        .filter(|(b, p)| b.label == p.label)
        .count();
    println!("held-out accuracy {correct}/{}", test_set.len());
    for (bag, p) in test_set.bags.iter().zip(&preds).take(5) {
        println!(
            "{:>8} truth={} pred={} margin={:+.4}",
            bag.id, bag.label, p.label, p.margin
        );
    }
    Ok(())
}
