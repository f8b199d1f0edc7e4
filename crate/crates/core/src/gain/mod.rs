//! The decomposition gain: Galerkin backward recursion for the polynomial
//! part, a closed-form radial solution for the rest, and their assembly into
//! the gain field.

pub mod blocks;
pub mod field;
pub mod recursion;
pub mod scalar;

pub use blocks::{a_block, b_block, d_block, invertibility_probe, BlockSystem, LevelReport};
pub use field::{assemble_gain, radial_term, DecompositionConfig, DecompositionSolver, GainField};
pub use recursion::{backward_recursion, GainCoefficients, RecursionPath};
pub use scalar::{scalar_gain, scalar_recursion};
