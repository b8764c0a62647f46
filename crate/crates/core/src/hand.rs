//! Hand assembly from anthropometric proportions.
//!
//! Hand frame: origin at the wrist, x toward the fingertips, y toward the
//! thumb side, z out of the back of the hand. Fingers flex toward -z.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{capsule_distance, Segment};
use crate::error::{invalid, Error, Result};
use crate::geometry::{JointSpec, JointVector, LinkSpec, SerialChain, Site, SiteName, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl Finger {
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Little,
    ];

    /// The four fingers opposed by the thumb.
    pub const OPPOSED: [Finger; 4] = [Finger::Index, Finger::Middle, Finger::Ring, Finger::Little];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        }
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Finger {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Finger::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown finger `{s}`")))
    }
}

/// Link lengths and widths of a child-sized humanoid hand (mm), thumb first.
pub const REFERENCE_LINKS: [[(f64, f64); 3]; 5] = [
    [(30.8, 25.0), (22.6, 16.0), (20.7, 16.0)],
    [(26.4, 15.0), (17.1, 14.0), (16.8, 13.0)],
    [(29.7, 15.0), (19.1, 14.0), (18.2, 13.0)],
    [(26.9, 15.0), (18.5, 14.0), (18.1, 13.0)],
    [(21.4, 13.0), (13.1, 12.0), (15.7, 11.0)],
];

/// Wrist to extended middle fingertip of the reference hand (mm).
pub const REFERENCE_HAND_LENGTH: f64 = 127.5;

/// Reference finger bases: position (mm) and orientation about z (deg).
pub const REFERENCE_PLACEMENTS: [(Finger, [f64; 3], f64); 4] = [
    (Finger::Index, [59.3, 18.1, -1.8], 7.03),
    (Finger::Middle, [60.5, 0.0, 0.0], 0.0),
    (Finger::Ring, [56.1, -17.2, -2.7], -5.1),
    (Finger::Little, [46.1, -31.1, -6.8], -7.27),
];

/// Per-link lengths and widths for all five chains, in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnthropometricTable {
    pub hand_length: f64,
    /// Indexed by [`Finger::index`]; thumb links are carpometacarpal,
    /// proximal and distal, finger links are the three phalanges.
    pub links: [[LinkSpec; 3]; 5],
}

impl AnthropometricTable {
    pub fn reference() -> Self {
        let links = REFERENCE_LINKS.map(|f| {
            f.map(|(l, w)| LinkSpec {
                length: l,
                width: w,
            })
        });
        Self {
            hand_length: REFERENCE_HAND_LENGTH,
            links,
        }
    }

    pub fn finger(&self, finger: Finger) -> &[LinkSpec; 3] {
        &self.links[finger.index()]
    }

    pub fn finger_length(&self, finger: Finger) -> f64 {
        self.finger(finger).iter().map(|l| l.length).sum()
    }
}

/// Reference link lengths expressed as fractions of the hand length.
pub fn reference_fractions() -> [[f64; 3]; 5] {
    REFERENCE_LINKS.map(|f| f.map(|(l, _)| l / REFERENCE_HAND_LENGTH))
}

pub fn reference_widths() -> [[f64; 3]; 5] {
    REFERENCE_LINKS.map(|f| f.map(|(_, w)| w))
}

/// Link lengths as `fraction * hand_length`; widths are passed through.
pub fn scale_proportions(
    hand_length: f64,
    fractions: &[[f64; 3]; 5],
    widths: &[[f64; 3]; 5],
) -> Result<AnthropometricTable> {
    if !(hand_length > 0.0 && hand_length.is_finite()) {
        return invalid(format!("hand length {hand_length} must be positive"));
    }
    let mut links = [[LinkSpec {
        length: 1.0,
        width: 1.0,
    }; 3]; 5];
    for finger in Finger::ALL {
        for k in 0..3 {
            let frac = fractions[finger.index()][k];
            let width = widths[finger.index()][k];
            if !(frac > 0.0 && frac < 1.0) {
                return invalid(format!(
                    "{finger} link {k}: fraction {frac} must lie in (0, 1)"
                ));
            }
            if !(width > 0.0 && width.is_finite()) {
                return invalid(format!("{finger} link {k}: width {width} must be positive"));
            }
            links[finger.index()][k] = LinkSpec {
                length: frac * hand_length,
                width,
            };
        }
    }
    Ok(AnthropometricTable { hand_length, links })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerPlacement {
    pub finger: Finger,
    /// Base position in the hand frame (mm).
    pub position: [f64; 3],
    /// Base orientation about z (degrees).
    pub orientation_deg: f64,
}

pub fn reference_placements() -> Vec<FingerPlacement> {
    REFERENCE_PLACEMENTS
        .iter()
        .map(|(finger, position, orientation_deg)| FingerPlacement {
            finger: *finger,
            position: *position,
            orientation_deg: *orientation_deg,
        })
        .collect()
}

/// Thumb base pose searched by the selection stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThumbBase {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta_z: f64,
}

impl ThumbBase {
    pub fn new(x: f64, y: f64, z: f64, theta_z: f64) -> Self {
        Self { x, y, z, theta_z }
    }

    pub fn transform(&self) -> Transform {
        Transform::from_translation(Vector3::new(self.x, self.y, self.z))
            * Transform::rot_z_deg(self.theta_z)
    }

    /// Lexicographic (x, y, z, θ_z) comparison.
    pub fn lex_cmp(&self, other: &ThumbBase) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.z.total_cmp(&other.z))
            .then(self.theta_z.total_cmp(&other.theta_z))
    }
}

/// Hinge axes of the thumb, each expressed in its parent link frame
/// (x along the thumb, z as the hand's dorsal direction at θ_z = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThumbKinematics {
    /// First base hinge.
    pub base_first: [f64; 3],
    /// Second base hinge, orthogonal to the first.
    pub base_second: [f64; 3],
    /// Shared axis of the coupled MCP and IP hinges.
    pub flexion: [f64; 3],
}

impl Default for ThumbKinematics {
    fn default() -> Self {
        // Adduction across the palm, then palmar abduction out of the palm
        // plane, then flexion curling the pulp back up toward the fingers.
        Self {
            base_first: [0.0, 0.0, -1.0],
            base_second: [0.0, 1.0, 0.0],
            flexion: [0.0, -1.0, 0.0],
        }
    }
}

/// Four finger chains and the thumb chain in one hand frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    chains: [SerialChain; 5],
}

impl HandModel {
    /// Assembles a hand from explicit chains. All five must be present:
    /// the thumb with 4 joints / 3 DoFs, every finger with 3 joints / 1 DoF.
    pub fn from_chains(chains: Vec<(Finger, SerialChain)>) -> Result<Self> {
        let mut slots: [Option<SerialChain>; 5] = Default::default();
        for (finger, chain) in chains {
            if slots[finger.index()].is_some() {
                return invalid(format!("duplicate {finger} chain"));
            }
            slots[finger.index()] = Some(chain);
        }
        for finger in Finger::ALL {
            let Some(chain) = &slots[finger.index()] else {
                return invalid(format!("hand is missing the {finger} chain"));
            };
            let (joints, dof) = if finger == Finger::Thumb {
                (4, 3)
            } else {
                (3, 1)
            };
            if chain.joints.len() != joints || chain.dof() != dof {
                return invalid(format!(
                    "{finger} chain must have {joints} joints and {dof} DoF, got {} and {}",
                    chain.joints.len(),
                    chain.dof()
                ));
            }
            let required: &[SiteName] = if finger == Finger::Thumb {
                &[SiteName::Tip, SiteName::Pulp]
            } else {
                &SiteName::ALL
            };
            for site in required {
                if !chain.has_site(*site) {
                    return invalid(format!("{finger} chain lacks the {site} site"));
                }
            }
        }
        Ok(Self {
            chains: slots.map(|c| c.expect("checked above")),
        })
    }

    pub fn chain(&self, finger: Finger) -> &SerialChain {
        &self.chains[finger.index()]
    }

    pub fn chain_mut(&mut self, finger: Finger) -> &mut SerialChain {
        &mut self.chains[finger.index()]
    }

    pub fn thumb(&self) -> &SerialChain {
        self.chain(Finger::Thumb)
    }

    /// Thumb length: sum of the thumb link lengths.
    pub fn thumb_length(&self) -> f64 {
        self.thumb().length()
    }

    pub fn total_dof(&self) -> usize {
        self.chains.iter().map(|c| c.dof()).sum()
    }
}

fn palmar_direction(axis: &Vector3<f64>) -> Vector3<f64> {
    axis.cross(&Vector3::x()).normalize()
}

fn surface_site(
    name: SiteName,
    link: usize,
    at: Vector3<f64>,
    axis: &Vector3<f64>,
    radius: f64,
) -> Site {
    Site {
        name,
        link,
        offset: Transform::from_translation(at + palmar_direction(axis) * radius),
        radius,
        axis_point: at,
    }
}

fn axis_site(name: SiteName, link: usize, at: Vector3<f64>, radius: f64) -> Site {
    Site {
        name,
        link,
        offset: Transform::from_translation(at),
        radius,
        axis_point: at,
    }
}

/// Three parallel 1:1-coupled flexion hinges rooted at `base`.
pub fn finger_chain(base: Transform, links: &[LinkSpec; 3]) -> Result<SerialChain> {
    let axis = Vector3::y();
    let joints = (0..3)
        .map(|_| JointSpec::hinge(axis, 0))
        .collect::<Result<Vec<_>>>()?;
    let tip = Vector3::x() * links[2].length;
    let sites = vec![
        surface_site(SiteName::Mcp, 0, Vector3::zeros(), &axis, links[0].radius()),
        surface_site(SiteName::Pip, 1, Vector3::zeros(), &axis, links[1].radius()),
        surface_site(SiteName::Dip, 2, Vector3::zeros(), &axis, links[2].radius()),
        axis_site(SiteName::Tip, 2, tip, links[2].radius()),
        surface_site(SiteName::Pulp, 2, tip, &axis, links[2].radius()),
    ];
    SerialChain::new(base, joints, links.to_vec(), sites)
}

/// Two-hinge base with a zero-length connector, then coupled MCP/IP
/// flexion. Independent variables: base hinge 1, base hinge 2, flexion.
pub fn thumb_chain(
    base: Transform,
    links: &[LinkSpec; 3],
    kin: &ThumbKinematics,
) -> Result<SerialChain> {
    let first = Vector3::from(kin.base_first);
    let second = Vector3::from(kin.base_second);
    let flex = Vector3::from(kin.flexion);
    if first.norm() < 1e-12 || second.norm() < 1e-12 || flex.norm() < 1e-12 {
        return invalid("thumb axes must be non-zero");
    }
    if flex.normalize().cross(&Vector3::x()).norm() < 1e-6 {
        return invalid("thumb flexion axis must not be parallel to the thumb");
    }
    let joints = vec![
        JointSpec::hinge(first, 0)?,
        JointSpec::hinge(second, 1)?,
        JointSpec::hinge(flex, 2)?,
        JointSpec::hinge(flex, 2)?,
    ];
    let chain_links = vec![
        LinkSpec::new(0.0, links[0].width)?,
        links[0],
        links[1],
        links[2],
    ];
    let tip = Vector3::x() * links[2].length;
    let flex = flex.normalize();
    let sites = vec![
        surface_site(SiteName::Mcp, 2, Vector3::zeros(), &flex, links[1].radius()),
        surface_site(SiteName::Dip, 3, Vector3::zeros(), &flex, links[2].radius()),
        axis_site(SiteName::Tip, 3, tip, links[2].radius()),
        surface_site(SiteName::Pulp, 3, tip, &flex, links[2].radius()),
    ];
    SerialChain::new(base, joints, chain_links, sites)
}

fn placement_transform(p: &FingerPlacement) -> Transform {
    Transform::from_translation(Vector3::from(p.position)) * Transform::rot_z_deg(p.orientation_deg)
}

fn check_placements(placements: &[FingerPlacement]) -> Result<[FingerPlacement; 4]> {
    if placements.len() != 4 {
        return invalid(format!(
            "expected 4 finger placements, got {}",
            placements.len()
        ));
    }
    let mut out = [None; 4];
    for p in placements {
        if p.finger == Finger::Thumb {
            return invalid("the thumb is placed by a ThumbBase, not a FingerPlacement");
        }
        if !(-45.0..=45.0).contains(&p.orientation_deg) {
            return invalid(format!(
                "{} orientation {}° outside [-45°, 45°]",
                p.finger, p.orientation_deg
            ));
        }
        let slot = &mut out[p.finger.index() - 1];
        if slot.is_some() {
            return invalid(format!("duplicate placement for {}", p.finger));
        }
        *slot = Some(*p);
    }
    Ok(out.map(|p| p.expect("four distinct fingers")))
}

pub fn build_hand(
    table: &AnthropometricTable,
    placements: &[FingerPlacement],
    thumb: ThumbBase,
) -> Result<HandModel> {
    build_hand_with(table, placements, thumb, &ThumbKinematics::default())
}

pub fn build_hand_with(
    table: &AnthropometricTable,
    placements: &[FingerPlacement],
    thumb: ThumbBase,
    kin: &ThumbKinematics,
) -> Result<HandModel> {
    let placements = check_placements(placements)?;
    let mut chains = Vec::with_capacity(5);
    chains.push((
        Finger::Thumb,
        thumb_chain(thumb.transform(), table.finger(Finger::Thumb), kin)?,
    ));
    for p in placements {
        chains.push((
            p.finger,
            finger_chain(placement_transform(&p), table.finger(p.finger))?,
        ));
    }
    HandModel::from_chains(chains)
}

/// Everything about a hand except the thumb base, which the search varies.
#[derive(Debug, Clone, PartialEq)]
pub struct HandTemplate {
    pub table: AnthropometricTable,
    pub placements: Vec<FingerPlacement>,
    pub thumb_kinematics: ThumbKinematics,
}

impl HandTemplate {
    pub fn reference() -> Self {
        Self {
            table: AnthropometricTable::reference(),
            placements: reference_placements(),
            thumb_kinematics: ThumbKinematics::default(),
        }
    }

    pub fn build(&self, thumb: ThumbBase) -> Result<HandModel> {
        build_hand_with(&self.table, &self.placements, thumb, &self.thumb_kinematics)
    }
}

/// Finger bases from the circle of radius `L_middle` centered at the middle
/// MCP. `angular_offsets` are degrees for index, middle, ring and little;
/// the middle offset must be zero. Bases are then shifted along z so that
/// fully flexed fingertips share the plane of the longest finger.
pub fn place_finger_bases(
    table: &AnthropometricTable,
    angular_offsets: [f64; 4],
) -> Result<Vec<FingerPlacement>> {
    if angular_offsets[1] != 0.0 {
        return invalid("middle finger angular offset must be 0°");
    }
    if let Some(phi) = angular_offsets.iter().find(|phi| !(phi.abs() < 90.0)) {
        return invalid(format!("angular offset {phi}° must satisfy |φ| < 90°"));
    }
    let l_middle = table.finger_length(Finger::Middle);
    let center = Vector3::new(table.hand_length - l_middle, 0.0, 0.0);
    if table.hand_length <= l_middle {
        return invalid("hand length must exceed the middle finger length");
    }

    let flexed = JointVector::from_degrees(&[90.0]);
    let mut placements = Vec::with_capacity(4);
    let mut flexed_tip_z = Vec::with_capacity(4);
    for (finger, phi) in Finger::OPPOSED.into_iter().zip(angular_offsets) {
        let l_f = table.finger_length(finger);
        let dir = Vector3::new(phi.to_radians().cos(), phi.to_radians().sin(), 0.0);
        let base = center + dir * (l_middle - l_f);
        let p = FingerPlacement {
            finger,
            position: [base.x, base.y, 0.0],
            orientation_deg: phi,
        };
        let chain = finger_chain(placement_transform(&p), table.finger(finger))?;
        flexed_tip_z.push(chain.site_position(&flexed, SiteName::Tip)?.z);
        placements.push(p);
    }

    let longest = Finger::OPPOSED
        .iter()
        .enumerate()
        .max_by(|a, b| {
            table
                .finger_length(*a.1)
                .total_cmp(&table.finger_length(*b.1))
        })
        .map(|(i, _)| i)
        .expect("four fingers");
    let plane = flexed_tip_z[longest];
    for (p, z) in placements.iter_mut().zip(flexed_tip_z) {
        p.position[2] = plane - z;
    }
    Ok(placements)
}

/// Resolution of the inclination sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclinationSweep {
    pub inclination_step_deg: f64,
    pub flexion_step_deg: f64,
}

impl Default for InclinationSweep {
    fn default() -> Self {
        Self {
            inclination_step_deg: 0.1,
            flexion_step_deg: 1.0,
        }
    }
}

/// Largest base inclination (degrees, magnitude) of `moving` toward the
/// convergent side such that it never touches `fixed` while both flex
/// together through 0°..90°. The moving finger turns away from `fixed` when
/// extended, which brings its flexed tip toward `fixed`.
pub fn max_inclination(
    hand: &HandModel,
    moving: Finger,
    fixed: Finger,
    cap_deg: f64,
) -> Result<f64> {
    max_inclination_with(hand, moving, fixed, cap_deg, InclinationSweep::default())
}

pub fn max_inclination_with(
    hand: &HandModel,
    moving: Finger,
    fixed: Finger,
    cap_deg: f64,
    sweep: InclinationSweep,
) -> Result<f64> {
    if moving == Finger::Thumb
        || fixed == Finger::Thumb
        || moving.index().abs_diff(fixed.index()) != 1
    {
        return invalid(format!("{moving} and {fixed} are not adjacent fingers"));
    }
    if !(cap_deg > 0.0 && cap_deg <= 45.0) {
        return invalid(format!("inclination cap {cap_deg}° must lie in (0°, 45°]"));
    }
    if !(sweep.inclination_step_deg > 0.0 && sweep.flexion_step_deg > 0.0) {
        return invalid("sweep steps must be positive");
    }

    let fixed_chain = hand.chain(fixed);
    let moving_chain = hand.chain(moving);
    let side = if moving_chain.base.translation.y >= fixed_chain.base.translation.y {
        1.0
    } else {
        -1.0
    };
    let flex_steps = (90.0 / sweep.flexion_step_deg).ceil() as usize;
    let flex_angle = |i: usize| (i as f64 * sweep.flexion_step_deg).min(90.0);

    let fixed_capsules: Vec<Vec<Segment>> = (0..=flex_steps)
        .map(|i| -> Result<Vec<Segment>> {
            let q = JointVector::from_degrees(&[flex_angle(i)]);
            Ok(fixed_chain
                .capsules(&q)?
                .into_iter()
                .map(|c| Segment::new(c.start, c.end))
                .collect())
        })
        .collect::<Result<_>>()?;
    let fixed_radii: Vec<f64> = fixed_chain.links.iter().map(|l| l.radius()).collect();
    let moving_radii: Vec<f64> = moving_chain.links.iter().map(|l| l.radius()).collect();

    let clear_at = |inclination: f64| -> bool {
        let mut chain = moving_chain.clone();
        chain.base = Transform::from_translation(moving_chain.base.translation)
            * Transform::rot_z_deg(side * inclination);
        (0..=flex_steps).into_par_iter().all(|i| {
            let q = JointVector::from_degrees(&[flex_angle(i)]);
            let Ok(caps) = chain.capsules(&q) else {
                return false;
            };
            caps.iter().zip(&moving_radii).all(|(m, rm)| {
                let ms = Segment::new(m.start, m.end);
                fixed_capsules[i]
                    .iter()
                    .zip(&fixed_radii)
                    .all(|(fs, rf)| capsule_distance(&ms, *rm, fs, *rf) > 0.0)
            })
        })
    };

    let steps = (cap_deg / sweep.inclination_step_deg + 1e-9).floor() as usize;
    let mut best = 0.0;
    for k in 0..=steps {
        let inclination = k as f64 * sweep.inclination_step_deg;
        if !clear_at(inclination) {
            return Ok(best);
        }
        best = inclination;
    }
    if best < cap_deg && !clear_at(cap_deg) {
        return Ok(best);
    }
    Ok(cap_deg)
}
