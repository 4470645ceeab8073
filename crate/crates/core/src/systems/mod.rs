//! Worked systems: Van der Pol in the rotating frame and a spectral
//! truncation of the nonlinear Schrödinger equation on a 1-d torus.

pub mod nls;
pub mod rotating;
pub mod vdp;

pub use nls::{
    nls_hamiltonian, nls_mass, nls_spectral_field, nls_symplectic_matrix, SpectralNlsConfig,
};
pub use rotating::{autonomous_to_periodic, Frame, RotatingFrameSystem};
pub use vdp::{
    vdp_factored, vdp_field, vdp_g1_closed, vdp_g2_closed, vdp_limit_cycle_invariant,
};

/// Systems addressable by name from the command line.
pub const SYSTEM_NAMES: [&str; 2] = ["vdp", "nls1d"];
