//! Finite element core: P1 element matrices, the scalar dof layout over the
//! two-region mesh, and the monolithic assembler for the coupled
//! velocity/pressure/displacement Newton system.

mod assembly;
mod dofmap;
pub mod element;

pub use assembly::{Constraints, StepInputs, SystemPlan};
pub use dofmap::DofMap;

/// Material and stabilization parameters. Units are SI throughout: densities
/// in kg/m^3, kinematic viscosity in m^2/s, elastic moduli in Pa.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalParams {
    pub rho_f: f64,
    pub nu_f: f64,
    pub rho_s: f64,
    pub mu_s: f64,
    pub lambda_s: f64,
    /// Coefficient of the pressure-gradient stabilization that makes the
    /// equal-order velocity/pressure pair stable.
    pub stab_delta: f64,
}

impl PhysicalParams {
    /// Values of the vibrating-flag benchmark: water-like fluid, dense soft
    /// rubber-like solid. The second Lame parameter corresponds to a Poisson
    /// ratio of 0.4.
    pub fn reference() -> PhysicalParams {
        PhysicalParams {
            rho_f: 1.0e3,
            nu_f: 1.0e-3,
            rho_s: 1.0e4,
            mu_s: 0.5e6,
            lambda_s: 2.0e6,
            stab_delta: 0.1,
        }
    }
}
