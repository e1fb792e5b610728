//! Training time against instance count, with and without a clustering sample cap.

use gmil::evaluation::bench_scaling;
use gmil::synth::SynthSpec;
use gmil::{LloydConfig, TrainParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut template = SynthSpec::planted(8, 1, 1, 0.02, 0)?;
    template.instances_per_bag = (10, 10);
    let sizes = [10_000, 20_000, 40_000, 80_000];
    for cap in [None, Some(10_000)] {
        let params = TrainParams {
            clusters: 50,
            sample_cap: cap,
            lloyd: LloydConfig { max_iter: 10, tol: 0.0 },
            ..TrainParams::default()
        };
        let r = bench_scaling(&template, &sizes, &params, 3)?;
        println!("sample cap {cap:?}");
        r.write_csv(std::io::stdout())?;
        println!("log-log slope {:.3}\n", r.slope.unwrap_or(f64::NAN));
    }
    Ok(())
}
