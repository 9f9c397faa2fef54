//! Simulation and analysis core for the LG-BB84 quantum key distribution
//! protocol: BB84 key generation augmented with a Leggett-Garg test on
//! Bob's side, attacked by a mix of higher-dimensional cheat devices and an
//! entangling channel probe.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature. IO, the command-line tool and file formats live in the
//! companion `lgbb84` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod math;

pub mod analysis;
pub mod attacks;
pub mod basis;
pub mod protocol;
pub mod qmath;
pub mod temporal;
