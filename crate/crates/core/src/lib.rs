pub mod disorder;
pub mod dynamics;
pub mod edgetheory;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod protocols;
pub mod sparse;
pub mod spectra;
