#![allow(dead_code)]

use handforge_core::hand::{Finger, HandModel, HandTemplate, ThumbBase};
use handforge_core::{JointVector, SerialChain, SiteName};
use nalgebra::Vector3;

pub fn reference_base() -> ThumbBase {
    ThumbBase::new(12.0, 2.0, -5.0, 45.0)
}

pub fn reference_hand() -> HandModel {
    HandTemplate::reference().build(reference_base()).unwrap()
}

/// Every grid configuration of the chain's drivers at `step_deg`, ends
/// included.
pub fn grid_configurations(chain: &SerialChain, step_deg: f64) -> Vec<JointVector> {
    let axes: Vec<Vec<f64>> = chain
        .driver_bounds()
        .into_iter()
        .map(|(lo, hi)| {
            let step = step_deg.to_radians();
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            let mut v: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
            if hi - v[n] > 1e-12 {
                v.push(hi);
            }
            v
        })
        .collect();
    let mut out = vec![Vec::new()];
    for values in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                values.iter().map(move |v| {
                    let mut q = prefix.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(JointVector).collect()
}

/// Smallest distance between the thumb pulp and the finger target point
/// over the joint grid of both chains.
pub fn grid_min_distance(hand: &HandModel, finger: Finger, target: SiteName, step_deg: f64) -> f64 {
    let thumb: Vec<Vector3<f64>> = grid_configurations(hand.thumb(), step_deg)
        .iter()
        .map(|q| hand.thumb().site_position(q, SiteName::Pulp).unwrap())
        .collect();
    let chain = hand.chain(finger);
    let finger_points: Vec<Vector3<f64>> = grid_configurations(chain, step_deg)
        .iter()
        .map(|q| chain.site_position(q, target).unwrap())
        .collect();
    let mut best = f64::INFINITY;
    for p in &thumb {
        for f in &finger_points {
            best = best.min((p - f).norm_squared());
        }
    }
    best.sqrt()
}

/// Index MCP target sitting under a thickened proximal link, with a thumb
/// that can only swing straight down onto it from the dorsal side. The
/// pulp reaches the target only with the thumb inside the finger.
pub fn interposed_finger_fixture() -> HandModel {
    let mut template = HandTemplate::reference();
    template.table.links[Finger::Index.index()][0].width = 20.0;

    let probe = template.build(ThumbBase::new(0.0, 0.0, 0.0, 0.0)).unwrap();
    let down = JointVector::from_degrees(&[0.0, 90.0, 0.0]);
    let pulp = probe.thumb().site_position(&down, SiteName::Pulp).unwrap();
    let target = probe
        .chain(Finger::Index)
        .site_position(&JointVector::zeros(1), SiteName::Mcp)
        .unwrap();
    let b = target - pulp;

    let mut hand = template.build(ThumbBase::new(b.x, b.y, b.z, 0.0)).unwrap();
    let thumb = hand.chain_mut(Finger::Thumb);
    for (joint, (lo, hi)) in
        thumb
            .joints
            .iter_mut()
            .zip([(0.0, 0.0), (0.0, 90.0), (0.0, 0.0), (0.0, 0.0)])
    {
        *joint = joint.clone().with_range_deg(lo, hi).unwrap();
    }
    let index = hand.chain_mut(Finger::Index);
    index.joints[0] = index.joints[0].clone().with_range_deg(0.0, 0.0).unwrap();
    hand
}
