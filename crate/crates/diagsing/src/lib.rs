//! Functional states with diagonal singularities for quantum scattering.
//!
//! A rank-one model H = H0 + κ|g⟩⟨g| on an energy segment is solved in
//! closed form. States are functionals over observables whose kernels carry
//! a singular diagonal. On top of that sit time evolution in the interacting
//! basis, the invariant final state, and the real and complex (Gamov)
//! spectral decompositions of the Liouvillian. A brute-force discretised
//! Hamiltonian serves as referee.

pub mod error;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod model;
pub mod oracle;
pub mod profile;
pub mod scattering;
pub mod spectral;
pub mod superoperators;

pub use error::{Error, Result};
pub use functionals::{pair, ObservableKernel, StateFunctional, Term};
pub use grid::{build_grid, EnergyGrid};
pub use model::{ScatteringModel, Side};
pub use profile::{Expr, Profile};
