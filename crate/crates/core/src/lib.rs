//! Correlation decay machinery for proper list colorings and the
//! antiferromagnetic Potts model.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and
//! parallel drivers live in the `spinlab` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod certify;
pub mod coupling;
pub mod decay;
pub mod error;
pub mod glauber;
pub mod graph;
pub mod jacobian;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod transport;
pub mod tree;

mod math;

pub use error::{Error, Result};
pub use graph::{ColoringInstance, Graph, Pinning, PottsInstance, RootedTree, SpinSystem};
