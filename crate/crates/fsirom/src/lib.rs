//! Monolithic arbitrary-Lagrangian-Eulerian finite-element solver for a 2D
//! channel flow coupled to an elastic beam, paired with a time-segmented
//! proper-orthogonal-decomposition reduced-order model.

pub mod ale;
pub mod fem;
pub mod fom;
pub mod mesh;
pub mod metrics;
pub mod numerics;
pub mod pod;
pub mod rom;
