//! Simulation laboratory for nearest-neighbour random walks in i.i.d. random
//! environments on Z^d: environment laws and their moment functionals, slab
//! Green operators (exact absorbing-chain solves and Monte Carlo), exit
//! statistics, a ballisticity-criterion pipeline, and concentration checks.

pub mod archive;
pub mod concentration;
pub mod config;
pub mod criterion;
pub mod env;
pub mod green;
pub mod lattice;
pub mod rng;
pub mod runner;
pub mod solver;
pub mod walk;

pub use env::{Environment, EnvironmentLaw, LawKind, MomentReport, TransitionVector};
pub use lattice::{Direction, ExitFace, LatticeDomain, Site, SlabSpec, MAX_D};
