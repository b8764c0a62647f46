//! Named hand poses as driver angles (degrees).
//!
//! Thumb drivers are adduction, palmar abduction and flexion; every finger
//! has a single flexion driver.

use std::collections::BTreeMap;

use handforge_core::hand::{Finger, HandModel};
use handforge_core::{Error, JointVector, SiteName};
use serde::{Deserialize, Serialize};

pub const GESTURES: [&str; 10] = [
    "open-hand",
    "pointing",
    "thumb-up",
    "fist",
    "ok",
    "count-1",
    "count-2",
    "count-3",
    "count-4",
    "count-5",
];

const THUMB_OPEN: [f64; 3] = [0.0, 0.0, 0.0];
const THUMB_FOLDED: [f64; 3] = [60.0, 30.0, 90.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GesturePose {
    pub name: String,
    pub joints_deg: BTreeMap<Finger, Vec<f64>>,
}

impl GesturePose {
    fn new(name: &str, thumb: [f64; 3], fingers: [f64; 4]) -> Self {
        let mut joints_deg = BTreeMap::new();
        joints_deg.insert(Finger::Thumb, thumb.to_vec());
        for (f, q) in Finger::OPPOSED.into_iter().zip(fingers) {
            joints_deg.insert(f, vec![q]);
        }
        Self {
            name: name.to_string(),
            joints_deg,
        }
    }

    pub fn configuration(&self, finger: Finger) -> JointVector {
        JointVector::from_degrees(&self.joints_deg[&finger])
    }

    /// Fails if a value lies outside the hand's driver ranges.
    pub fn check(&self, hand: &HandModel) -> Result<(), Error> {
        for (finger, q) in &self.joints_deg {
            let chain = hand.chain(*finger);
            let jv = JointVector::from_degrees(q);
            if jv.len() != chain.dof() || !chain.within_bounds(&jv) {
                return Err(Error::InvalidInput(format!(
                    "gesture {}: {finger} angles {q:?} outside the joint ranges",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Fingertip positions (mm) of every chain in this pose.
    pub fn tip_positions(&self, hand: &HandModel) -> Result<BTreeMap<Finger, [f64; 3]>, Error> {
        self.check(hand)?;
        let mut out = BTreeMap::new();
        for finger in Finger::ALL {
            let p = hand
                .chain(finger)
                .site_position(&self.configuration(finger), SiteName::Tip)?;
            out.insert(finger, [p.x, p.y, p.z]);
        }
        Ok(out)
    }
}

pub fn gesture_pose(name: &str) -> Result<GesturePose, Error> {
    let pose = match name {
        "open-hand" | "count-5" => GesturePose::new(name, THUMB_OPEN, [0.0; 4]),
        "pointing" => GesturePose::new(name, THUMB_FOLDED, [0.0, 90.0, 90.0, 90.0]),
        "thumb-up" | "count-1" => GesturePose::new(name, THUMB_OPEN, [90.0; 4]),
        "fist" => GesturePose::new(name, [30.0, 60.0, 60.0], [90.0; 4]),
        "ok" => GesturePose::new(name, [45.0, 45.0, 45.0], [60.0, 0.0, 0.0, 0.0]),
        "count-2" => GesturePose::new(name, THUMB_OPEN, [0.0, 90.0, 90.0, 90.0]),
        "count-3" => GesturePose::new(name, THUMB_OPEN, [0.0, 0.0, 90.0, 90.0]),
        "count-4" => GesturePose::new(name, THUMB_OPEN, [0.0, 0.0, 0.0, 90.0]),
        _ => {
            return Err(Error::InvalidInput(format!(
                "unknown gesture `{name}` (known: {})",
                GESTURES.join(", ")
            )))
        }
    };
    Ok(pose)
}
