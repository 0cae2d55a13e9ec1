//! Prior-guided movable-antenna sensing of multi-path angles of arrival.
//!
//! A single antenna moves over a plate whose 3D orientation can be set once.
//! Weak Gaussian priors on each path's elevation/azimuth are used twice:
//!
//! 1. to choose the plate orientation ([`orientation::optimize_orientation`]) so
//!    that the paths' projections on the plate's X and Z axes are well separated
//!    and every path arrives from the front of the plate, and
//! 2. to pair the unordered spatial frequencies that MUSIC extracts from the two
//!    linear scans ([`pairing::map_pair`]).
//!
//! The [`harness`] module wires everything into a seeded Monte Carlo sweep that
//! compares MAP pairing with and without rotation against a SOMP baseline and a
//! single-path reference.
//!
//! Angles are in degrees at every public interface.

pub mod error;
pub mod estimation;
pub mod fisher;
pub mod geometry;
pub mod harness;
pub mod moments;
pub mod orientation;
pub mod pairing;
pub mod seeds;
pub mod signal;

pub use error::{Error, Result};
pub use geometry::{AnglePair, Direction3, Orientation, SfpPair};
pub use moments::PathPrior;
pub use signal::{PathTruth, ScanMeasurement, Scene, SystemConfig};
