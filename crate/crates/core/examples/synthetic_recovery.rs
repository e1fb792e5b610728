//! How close the top positive center lands to the planted target as noise grows.

use gmil::synth::{generate, SynthSpec};
use gmil::{train, NormalizationMode, TrainParams};

fn main() -> gmil::Result<()> {
    println!("{:>6} {:>10} {:>8}", "sigma", "error", "error/s");
    for sigma in [0.005, 0.01, 0.02, 0.04] {
        let spec = SynthSpec::planted(3, 50, 50, sigma, 7)?;
        let (ds, truth) = generate(&spec)?;
        let params = TrainParams {
            clusters: 16,
            normalization: NormalizationMode::None,
            ..TrainParams::default()
        };
        let cb = train(&ds, &params)?;
        let err = cb.positive_centers[0]
            .iter()
            .zip(&truth.targets[0])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        println!("{sigma:>6} {err:>10.5} {:>8.2}", err / sigma);
    }
    Ok(())
}
