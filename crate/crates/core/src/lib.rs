//! Simulation and verification harness for the parabolic-parabolic
//! Keller–Segel system with a local and nonlocal logistic source,
//!
//! ```text
//! u_t     = Δu − χ ∇·(u ∇v) + u (a0(t,x) − a1(t,x) u − a2(t,x) ∫u)
//! τ v_t   = Δv − λ v + μ u
//! ∂u/∂n   = ∂v/∂n = 0
//! ```
//!
//! on rectangles in one or two dimensions.

pub mod diagnostics;
pub mod experiments;
pub mod hypothesis;
pub mod model;
pub mod oracle;
pub mod solver;
