//! Build a chain network, run the dynamics through a tanh link and write the
//! path as CSV.
//!
//! cargo run --example simulate_path -- [T] [out.csv]

use netident::dynamics::{simulate, DynamicsConfig, LinkFunction, LinkKind};
use netident::io::path_to_csv;
use netident::networks::{generate, Family, NetworkSpec};

fn main() -> netident::Result<()> {
    let mut args = std::env::args().skip(1);
    let t: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let out = args.next();

    let spec = NetworkSpec::new(Family::Chain, 8).with_target_radius(0.5);
    let a = generate(&spec)?;
    let cfg = DynamicsConfig::linear(a, 0.6, 1.0, 7)
        .with_link(LinkFunction::with_slope(LinkKind::Tanh, 1.5));
    let path = simulate(&cfg, t)?;

    let mean = path.mean();
    println!(
        "simulated {} periods of {} units (fingerprint {})",
        path.len(),
        path.n(),
        &path.fingerprint[..12]
    );
    println!("sample means: {:.3?}", mean);
    match out {
        Some(file) => std::fs::write(&file, path_to_csv(&path))?,
        None => println!(
            "first rows:\n{}",
            path_to_csv(&path)
                .lines()
                .take(4)
                .collect::<Vec<_>>()
                .join("\n")
        ),
    }
    Ok(())
}
