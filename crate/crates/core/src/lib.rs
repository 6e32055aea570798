//! Pressure functions of nearest-neighbor subshifts of finite type.
//!
//! The crate computes transfer-matrix spectral radii for lattice coloring
//! models, turns them into converging upper/lower pressure bounds in two
//! dimensions, and specializes the machinery to the monomer-dimer model on
//! `Z^2`. Small instances are always checkable against the brute-force
//! enumerator in [`soft`].

pub mod legendre;
pub mod monomer_dimer;
pub mod pressure1d;
pub mod soft;
pub mod spectral;
pub mod transfer2d;

pub use soft::{BoxShape, ColorCount, Coloring, Digraph, DigraphTuple, WeightVector};
pub use spectral::{DenseMatrix, NonnegOperator, PerronPair, PowerOptions, SpectralResult};
