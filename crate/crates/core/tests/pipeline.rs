use netident::dynamics::{simulate, DynamicsConfig};
use netident::inference::{run_test, TestOptions};
use netident::linalg::DenseMatrix;

// Under the null the Monte Carlo p-value should be close to uniform.
// Kolmogorov–Smirnov distance over 100 seeds, compared with the 1% critical
// value 1.63/√100.
#[test]
fn null_p_values_are_roughly_uniform() {
    let mut p: Vec<f64> = (0..100)
        .map(|s| {
            let cfg = DynamicsConfig::linear(DenseMatrix::zeros(4, 4), 0.6, 1.0, 7000 + s)
                .with_burn_in(100);
            let path = simulate(&cfg, 400).unwrap();
            let opts = TestOptions {
                source: netident::inference::CriticalSource::MonteCarlo {
                    reps: 199,
                    seed: 90_000 + s,
                },
                ..TestOptions::monte_carlo(0.05, 0)
            };
            run_test(&path, 0.6, &opts).unwrap().p_value
        })
        .collect();
    p.sort_by(f64::total_cmp);
    let k = p.len() as f64;
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            ((i as f64 + 1.0) / k - x)
                .abs()
                .max((x - i as f64 / k).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.63 / k.sqrt(), "KS distance {ks}");
}
