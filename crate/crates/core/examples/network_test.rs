//! Test for network dependence on a null path and on a path driven by a
//! block network, with both critical-value sources.

use netident::dynamics::{simulate, DynamicsConfig};
use netident::inference::{run_test, StatKind, TestOptions};
use netident::linalg::DenseMatrix;
use netident::networks::{generate, Family, NetworkSpec};

fn main() -> netident::Result<()> {
    let n = 10;
    let t = 300;
    let alt = generate(&NetworkSpec::new(Family::Block, n).with_target_radius(0.3))?;
    let cases = [("null", DenseMatrix::zeros(n, n)), ("block", alt)];
    for (name, a) in cases {
        let path = simulate(&DynamicsConfig::linear(a, 0.6, 1.0, 99), t)?;
        let mc = run_test(&path, 0.6, &TestOptions::monte_carlo(0.05, 5))?;
        let spec = run_test(
            &path,
            0.6,
            &TestOptions {
                stat: StatKind::Spec,
                ..TestOptions::monte_carlo(0.05, 5)
            },
        )?;
        let chi = run_test(&path, 0.6, &TestOptions::chi_square(0.05, n * n))?;
        println!("{name}:");
        println!("  {}", mc.to_jsonl());
        println!("  {}", spec.to_jsonl());
        println!("  {}", chi.to_jsonl());
    }
    Ok(())
}
