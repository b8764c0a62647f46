//! Kinematic synthesis of anthropomorphic robotic hands.
//!
//! The crate builds finger and thumb chains from anthropometric link
//! proportions, checks the thumb against the sixteen Kapandji opposition
//! targets with a two-chain inverse kinematics scheme, measures thumb
//! opposability on a voxel grid, and picks the thumb base that balances
//! both.

// Negated comparisons are how validation rejects NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod error;
pub mod geometry;
pub mod hand;
pub mod ik;
pub mod kapandji;
pub mod opposability;
pub mod selection;

pub use error::{Error, Result};
pub use geometry::{JointSpec, JointVector, LinkSpec, SerialChain, Site, SiteName, Transform};
pub use hand::{
    build_hand, AnthropometricTable, Finger, FingerPlacement, HandModel, HandTemplate, ThumbBase,
    ThumbKinematics,
};
pub use ik::{IkResult, IkSettings, IkStatus};
pub use kapandji::{KapandjiReport, KapandjiTarget};
pub use opposability::{OpposabilityConfig, OpposabilityResult, SpreadMeasure, WorkspaceGrid};
pub use selection::{CandidateRecord, EvaluationSettings, Interval, SearchIntervals};
