//! Kapandji opposition test: the thumb pulp must reach the palmar surface
//! at the MCP, PIP and DIP joints and the fingertip pad of every finger.

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{JointVector, SiteName, Transform};
use crate::hand::{Finger, HandModel};
use crate::ik::{solve_constrained, surface_target, IkResult, IkSettings, IkStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct KapandjiTarget {
    pub finger: Finger,
    pub site: SiteName,
    /// Site on the finger chain carrying the target frame.
    pub surface_site: SiteName,
    /// Target frame with the finger extended, in the hand frame.
    pub frame_at_rest: Transform,
}

/// Sixteen targets in test order: index to little, MCP to TIP.
pub fn generate_targets(hand: &HandModel) -> Result<Vec<KapandjiTarget>> {
    let mut out = Vec::with_capacity(16);
    for finger in Finger::OPPOSED {
        let chain = hand.chain(finger);
        let rest = JointVector::zeros(chain.dof());
        for site in SiteName::KAPANDJI {
            let surface_site = surface_target(site);
            out.push(KapandjiTarget {
                finger,
                site,
                surface_site,
                frame_at_rest: chain.forward_transform(&rest, surface_site)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetOutcome {
    pub finger: Finger,
    pub site: SiteName,
    pub reached: bool,
    pub result: IkResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KapandjiReport {
    pub entries: Vec<TargetOutcome>,
    pub pass: bool,
}

impl KapandjiReport {
    pub fn reached_count(&self) -> usize {
        self.entries.iter().filter(|e| e.reached).count()
    }
}

/// Mid-range start used for every target before the random restarts.
pub fn initial_guess(hand: &HandModel, finger: Finger) -> (JointVector, JointVector) {
    let mid = |chain: &crate::geometry::SerialChain| {
        JointVector(
            chain
                .driver_bounds()
                .into_iter()
                .map(|(lo, hi)| 0.5 * (lo + hi))
                .collect(),
        )
    };
    (mid(hand.thumb()), mid(hand.chain(finger)))
}

pub fn run_kapandji(hand: &HandModel, settings: &IkSettings) -> Result<KapandjiReport> {
    settings.validate()?;
    let targets = generate_targets(hand)?;
    let entries = targets
        .par_iter()
        .map(|t| {
            let (qt, qf) = initial_guess(hand, t.finger);
            let result = solve_constrained(hand, t.finger, t.site, settings, &qt, &qf)?;
            Ok(TargetOutcome {
                finger: t.finger,
                site: t.site,
                reached: result.status == IkStatus::Converged,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = entries.len() == 16 && entries.iter().all(|e| e.reached);
    Ok(KapandjiReport { entries, pass })
}
