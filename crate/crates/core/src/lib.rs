//! Lindblad master equations and their Poisson-driven unravellings.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.
//!
//! ```
//! use unravel_core::ensemble::{compare, density_ensemble, SimConfig};
//! use unravel_core::master::integrate_master;
//! use unravel_core::{models, Density, Method, State};
//!
//! let m = models::amplitude_damping::<f64>(1.0);
//! let psi = State::basis(2, 1);
//! let cfg = SimConfig { method: Method::Exact, horizon: 2.0, dt: 1e-2, seed: 1, stop_after_jumps: None };
//! let ens = density_ensemble(&m, &psi, &cfg, 500, 0, &[0.5, 1.0, 2.0])?;
//! let master = integrate_master(&m, &Density::pure(&psi), 2.0, 1e-2)?;
//! assert!(compare(&master, &ens)?.pass);
//! # Ok::<(), unravel_core::Error>(())
//! ```

pub mod eigen;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod master;
pub mod model;
pub mod models;
pub mod scalar;
pub mod state;
pub mod rng;
pub mod poisson;
pub mod pdp;
pub mod stats;
pub mod observables;
pub mod ensemble;
pub mod grw;
pub mod io;

pub use error::{Error, Result};
pub use model::Convention;
pub use pdp::Method;

pub type Complex64 = scalar::C<f64>;
pub type Matrix = linalg::CMatrix<f64>;
pub type Model = model::ModelSpec<f64>;
pub type JumpOperator = model::JumpOperator<f64>;
pub type State = state::StateVector<f64>;
pub type Density = state::DensityMatrix<f64>;
pub type MasterSolution = master::MasterTrajectory<f64>;
pub type Path = poisson::PoissonPath<f64>;
pub type Record = pdp::TrajectoryRecord<f64>;
pub type Jump = pdp::JumpEvent<f64>;
pub type Rates = pdp::GirsanovRates<f64>;
pub type Grw = grw::GrwFamily<f64>;
