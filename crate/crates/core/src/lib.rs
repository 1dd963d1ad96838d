//! Nonconforming grad-curl finite elements for the singularly perturbed
//! quad-curl problem
//!
//! ```text
//! -ε² ∇×Δ∇×u + (∇×)²u = f,  ∇·u = 0   in Ω = (0,1)³,
//!  u×n = 0,  ∇×u = 0                   on ∂Ω,
//! ```
//!
//! discretized as a saddle-point system with a continuous quadratic Lagrange
//! multiplier. The second boundary condition is imposed either weakly with
//! Nitsche terms or strongly in the discrete space.

pub mod checks;
pub mod cli;
pub mod element;
pub mod mesh;
pub mod quadrature;
pub mod forms;
pub mod manufactured;
pub mod solver;
pub mod space;
pub mod study;
pub mod tabulation;
