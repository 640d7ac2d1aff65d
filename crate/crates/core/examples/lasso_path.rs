//! Regularization path on a sparse chain: support size and error as λ falls.

use netident::dynamics::{simulate, AggregateShock, DynamicsConfig};
use netident::estimation::{lasso_lambda_max, regularization_path, sample_moments, LassoOptions};
use netident::linalg::DenseMatrix;
use netident::networks::{generate, Family, NetworkSpec};

fn main() -> netident::Result<()> {
    let n = 15;
    let a = generate(&NetworkSpec::new(Family::Chain, n).with_target_radius(0.5))?;
    let path = simulate(&DynamicsConfig::linear(a.clone(), 0.6, 1.0, 21), 1500)?;
    let m = sample_moments(&path, &AggregateShock::None)?;
    let d_f = DenseMatrix::identity(n);

    let lmax = lasso_lambda_max(&m, 0.6, &d_f)?;
    let grid: Vec<f64> = (0..12).map(|k| lmax * 0.5f64.powi(k)).collect();
    let fits = regularization_path(
        &m,
        0.6,
        &d_f,
        &grid,
        LassoOptions {
            accelerate: true,
            ..Default::default()
        },
    )?;

    let true_support = a.count_nonzero(1e-12);
    println!("true support size {true_support}");
    println!(
        "{:>10} {:>8} {:>10} {:>6}",
        "lambda", "nonzero", "fro_err", "iters"
    );
    for (lam, fit) in grid.iter().zip(&fits) {
        println!(
            "{lam:>10.4} {:>8} {:>10.4} {:>6}",
            fit.nonzero_count(),
            (&fit.a_hat - &a).frobenius_norm(),
            fit.iterations
        );
    }
    Ok(())
}
