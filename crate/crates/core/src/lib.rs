//! Identification, estimation and testing of latent interaction networks
//! from observed multivariate dynamics.
//!
//! The observable process follows
//! `z_{t+1} = (1−δ) z_t + A f(z_t, θ) + s_t + ε_t`, and everything the data
//! can say about `A` flows through the effective operator
//! `B = (1−δ)I + A·D_f` and the stationary moments `Γ₀ = BΓ₀B' + Ω`,
//! `Γ₁ = BΓ₀`.
//!
//! Examples, one per capability (run with `cargo run --example <name>`):
//!
//! | example | shows |
//! |---|---|
//! | `simulate_path` | building a network, simulating, CSV export |
//! | `estimate_interactions` | closed form, GMM, sandwich variance |
//! | `lasso_path` | ℓ₁ path on a sparse chain |
//! | `network_test` | Frobenius and spectral tests, χ² and MC critical values |
//! | `spectral_mechanism` | dispersion, latent covariance heterogeneity |
//! | `identification` | exchangeable non-identification vs spectral recovery |
//! | `size_power` | a small Monte Carlo size/power grid |

pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod montecarlo;
pub mod networks;
pub mod seed;

#[doc(hidden)]
pub mod cli;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
