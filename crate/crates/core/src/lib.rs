//! Numerical laboratory for p-harmonic capacitary potentials on rotationally
//! symmetric 3-manifolds: potentials, capacities, the monotone quantities
//! along their level sets and the rigidity inequality chain built on them.

pub mod geometry;
pub mod numerics;
pub mod potential;
pub mod functionals;
pub mod variational;
pub mod rigidity;
pub mod cli;
