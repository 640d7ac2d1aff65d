//! A reduced size/power grid: rejection rates of the Frobenius test under
//! the null and under a chain network, over T.
//!
//! cargo run --release --example size_power -- [reps] [jobs]

use netident::montecarlo::{run_experiment, summary_csv, ExperimentConfig, ExperimentKind};

fn main() -> netident::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let jobs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    for kind in [ExperimentKind::Size, ExperimentKind::Power] {
        let cfg = ExperimentConfig {
            grid: vec![(15, 50), (15, 100), (15, 200)],
            reps,
            null_reps: 200,
            rho: 0.3,
            ..ExperimentConfig::preset(kind)
        };
        let out = run_experiment(&cfg, jobs)?;
        print!("{}", summary_csv(&out));
    }
    Ok(())
}
