//! Simulation of interval-partition evolutions: discrete down-up chains,
//! scaffolding with spindles and the skewer map, the three constructions of
//! type-2 evolutions, de-Poissonization, and a statistical verification
//! battery.

pub mod chains;
pub mod depoisson;
pub mod ip;
pub mod kernels;
pub mod metric;
pub mod rng;
pub mod scaffolding;
pub mod type2;
pub mod verify;
