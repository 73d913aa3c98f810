//! Porous medium flow `∂ρ/∂t = ∇·(ρ∇p) + ρG` with pressure `p = m/(m-1) ρ^{m-1}`,
//! a signed growth term and Dirichlet injection at an inner boundary, together
//! with its incompressible (Hele-Shaw) limit as `m → ∞`.
//!
//! - [`pme`]: explicit finite-volume scheme at finite `m`.
//! - [`obstacle`]: projected SOR for the pressure obstacle problem.
//! - [`limit`]: time stepping of the limit density/pressure pair.
//! - [`radial`]: reference ODE for radially symmetric fronts.
//! - [`tumor`]: growth coupled to a nutrient.
//! - [`diagnostics`], [`runner`], [`io`]: checks, run directories, the `mesa` binary.
//!
//! Examples (`cargo run --release --example <name>`):
//!
//! | name | shows |
//! |------|-------|
//! | `figure1` | PME run with a three-stage source, gnuplot output |
//! | `obstacle_smooth_fit` | contact point of a stationary obstacle problem |
//! | `radial_front` | limit front against the radial ODE |
//! | `m_sweep` | convergence to the limit as `m` grows |
//! | `tumor_growth` | nutrient-limited growth |
//! | `barriers` | comparison barriers around a radial front |
//! | `initial_data` | well-prepared initial data for finite `m` |

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod initial;
pub mod io;
pub mod limit;
pub mod obstacle;
pub mod pme;
pub mod radial;
pub mod runner;
pub mod scenario;
pub mod source;
pub mod trajectory;
pub mod tumor;

pub use error::{Error, Result};
