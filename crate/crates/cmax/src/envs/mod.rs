//! Simulated environments whose true and modeled dynamics disagree.
//!
//! Each environment implements [`crate::core::Environment`], is immutable
//! after construction, and serializes to JSON so instances are replayable.
//! Generators are seed-deterministic.

pub mod arm;
pub mod icy;
pub mod pickplace;
pub mod pushing;

pub use arm::{ArmLattice, ArmParams};
pub use icy::{IcyGrid, IcyGridParams};
pub use pickplace::PickPlaceGrid;
pub use pushing::{Box2, PlanarPushWorld, PushParams};
