//! Verification toolkit for ground states of flat-band interacting Hamiltonians
//! of chiral twisted bilayer graphene at half filling.

pub mod fock;
pub mod formfactor;
pub mod hamiltonian;
pub mod identities;
pub mod kernelsolve;
pub mod lattice;
pub mod linalg;
pub mod predict;
pub mod reptheory;
pub mod theta;
