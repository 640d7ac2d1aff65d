//! Recover a hub network from one simulated path with the closed-form
//! estimator and two-step GMM, and print standard errors for the hub row.

use netident::dynamics::AggregateShock;
use netident::dynamics::{simulate, DynamicsConfig};
use netident::estimation::{estimate_closed_form, estimate_gmm_two_step, sample_moments};
use netident::linalg::DenseMatrix;
use netident::networks::{generate, Family, NetworkSpec};

fn main() -> netident::Result<()> {
    let n = 6;
    let a = generate(&NetworkSpec::new(Family::Star, n).with_target_radius(0.4))?;
    let path = simulate(&DynamicsConfig::linear(a.clone(), 0.6, 1.0, 3), 5000)?;
    let d_f = DenseMatrix::identity(n);

    let m = sample_moments(&path, &AggregateShock::None)?;
    let closed = estimate_closed_form(&m, 0.6, &d_f)?;
    let gmm = estimate_gmm_two_step(&path, &AggregateShock::None, 0.6, &d_f)?;

    println!("true A:\n{:?}", a);
    println!(
        "closed form  ‖Â−A‖_F = {:.4}",
        (&closed.a_hat - &a).frobenius_norm()
    );
    println!(
        "two-step GMM ‖Â−A‖_F = {:.4}",
        (&gmm.a_hat - &a).frobenius_norm()
    );
    if let Some(v) = &gmm.variance {
        // vec is column-major, so entry (0, j) sits at index j·n
        let se: Vec<f64> = (0..n).map(|j| v[(j * n, j * n)].sqrt()).collect();
        let est: Vec<f64> = (0..n).map(|j| gmm.a_hat[(0, j)]).collect();
        println!("hub row estimates {est:.3?}");
        println!("hub row std errs  {se:.3?}");
    }
    Ok(())
}
