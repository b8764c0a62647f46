//! Rigid transforms, coupled serial chains and their first-order kinematics.
//!
//! A chain is a list of revolute joints, each followed by a straight link
//! along the local x axis. Joint `k` sits at the distal end of link `k - 1`
//! (or at the chain base for `k = 0`) and rotates the frame of link `k`
//! about its axis. Several joints may share one independent variable
//! through a fixed transmission ratio.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use nalgebra::{Matrix3xX, MatrixXx3, Rotation3, Unit, Vector3};

use crate::error::{invalid, Error, Result};

/// Rigid transform: rotation followed by translation, lengths in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), translation)
    }

    pub fn from_rotation(rotation: Rotation3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Pure rotation about the z axis, angle in degrees.
    pub fn rot_z_deg(angle: f64) -> Self {
        Self::from_rotation(Rotation3::from_axis_angle(
            &Vector3::z_axis(),
            angle.to_radians(),
        ))
    }

    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// RᵀR = I and det R = +1, both within `tol`.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let r = self.rotation.matrix();
        let gram = r.transpose() * r;
        (gram - nalgebra::Matrix3::identity()).abs().max() <= tol
            && (r.determinant() - 1.0).abs() <= tol
    }
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl Mul<&Transform> for &Transform {
    type Output = Transform;

    fn mul(self, rhs: &Transform) -> Transform {
        self.compose(rhs)
    }
}

/// Named points of interest on a chain.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum SiteName {
    Mcp,
    Pip,
    Dip,
    Tip,
    Pulp,
}

impl SiteName {
    pub const ALL: [SiteName; 5] = [
        SiteName::Mcp,
        SiteName::Pip,
        SiteName::Dip,
        SiteName::Tip,
        SiteName::Pulp,
    ];

    /// The four sites the opposing thumb has to reach on every finger.
    pub const KAPANDJI: [SiteName; 4] =
        [SiteName::Mcp, SiteName::Pip, SiteName::Dip, SiteName::Tip];

    pub fn as_str(self) -> &'static str {
        match self {
            SiteName::Mcp => "MCP",
            SiteName::Pip => "PIP",
            SiteName::Dip => "DIP",
            SiteName::Tip => "TIP",
            SiteName::Pulp => "PULP",
        }
    }
}

impl fmt::Display for SiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MCP" => Ok(SiteName::Mcp),
            "PIP" => Ok(SiteName::Pip),
            "DIP" => Ok(SiteName::Dip),
            "TIP" => Ok(SiteName::Tip),
            "PULP" => Ok(SiteName::Pulp),
            _ => invalid(format!("unknown site `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    /// Rotation axis, expressed in the parent link frame.
    pub axis: Unit<Vector3<f64>>,
    /// Lower limit in radians.
    pub min: f64,
    /// Upper limit in radians.
    pub max: f64,
    pub coupling_ratio: f64,
    /// Index of the independent variable driving this joint.
    pub driver: usize,
}

impl JointSpec {
    /// Hinge with the default 0°..90° range and 1:1 coupling.
    pub fn hinge(axis: Vector3<f64>, driver: usize) -> Result<Self> {
        Self::new(axis, (0.0, 90.0), 1.0, driver)
    }

    /// `range_deg` is `(min, max)` in degrees.
    pub fn new(
        axis: Vector3<f64>,
        range_deg: (f64, f64),
        coupling_ratio: f64,
        driver: usize,
    ) -> Result<Self> {
        let norm = axis.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return invalid("joint axis must be a non-zero finite vector");
        }
        if !(range_deg.0 <= range_deg.1) {
            return invalid(format!(
                "joint range [{}, {}] has min > max",
                range_deg.0, range_deg.1
            ));
        }
        if !coupling_ratio.is_finite() {
            return invalid("coupling ratio must be finite");
        }
        Ok(Self {
            axis: Unit::new_normalize(axis),
            min: range_deg.0.to_radians(),
            max: range_deg.1.to_radians(),
            coupling_ratio,
            driver,
        })
    }

    pub fn range_deg(&self) -> (f64, f64) {
        (self.min.to_degrees(), self.max.to_degrees())
    }

    pub fn with_range_deg(mut self, min: f64, max: f64) -> Result<Self> {
        if !(min <= max) {
            return invalid(format!("joint range [{min}, {max}] has min > max"));
        }
        self.min = min.to_radians();
        self.max = max.to_radians();
        Ok(self)
    }
}

/// Straight link segment. `length` may be zero for the connector between
/// two hinges sharing a center; `width` is the capsule diameter.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinkSpec {
    pub length: f64,
    pub width: f64,
}

impl LinkSpec {
    pub fn new(length: f64, width: f64) -> Result<Self> {
        if !(length >= 0.0 && length.is_finite()) {
            return invalid(format!(
                "link length {length} must be finite and non-negative"
            ));
        }
        if !(width > 0.0 && width.is_finite()) {
            return invalid(format!("link width {width} must be positive"));
        }
        Ok(Self { length, width })
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.width
    }
}

/// A named point attached to a link frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub name: SiteName,
    /// Index of the link whose frame carries the site.
    pub link: usize,
    pub offset: Transform,
    /// Local half-width of the structure at this site.
    pub radius: f64,
    /// Point on the link axis the site's collision sphere is centered on,
    /// in the same link frame.
    pub axis_point: Vector3<f64>,
}

/// Independent joint variables of one chain, stored in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVector(pub Vec<f64>);

impl JointVector {
    pub fn from_radians(values: Vec<f64>) -> Self {
        JointVector(values)
    }

    pub fn from_degrees(values: &[f64]) -> Self {
        JointVector(values.iter().map(|d| d.to_radians()).collect())
    }

    pub fn zeros(n: usize) -> Self {
        JointVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_degrees(&self) -> Vec<f64> {
        self.0.iter().map(|r| r.to_degrees()).collect()
    }
}

/// World-frame segment and radius of one link, for capsule tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCapsule {
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerialChain {
    pub base: Transform,
    pub joints: Vec<JointSpec>,
    pub links: Vec<LinkSpec>,
    pub sites: Vec<Site>,
    dof: usize,
}

impl SerialChain {
    pub fn new(
        base: Transform,
        joints: Vec<JointSpec>,
        links: Vec<LinkSpec>,
        sites: Vec<Site>,
    ) -> Result<Self> {
        if joints.is_empty() {
            return invalid("a chain needs at least one joint");
        }
        if joints.len() != links.len() {
            return invalid(format!(
                "chain has {} joints but {} links",
                joints.len(),
                links.len()
            ));
        }
        let dof = joints.iter().map(|j| j.driver).max().unwrap_or(0) + 1;
        for v in 0..dof {
            if !joints.iter().any(|j| j.driver == v) {
                return invalid(format!("independent variable {v} drives no joint"));
            }
        }
        for site in &sites {
            if site.link >= links.len() {
                return invalid(format!(
                    "site {} refers to missing link {}",
                    site.name, site.link
                ));
            }
        }
        Ok(Self {
            base,
            joints,
            links,
            sites,
            dof,
        })
    }

    /// Number of independent joint variables.
    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn site(&self, name: SiteName) -> Result<&Site> {
        self.sites
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("chain has no {name} site")))
    }

    pub fn has_site(&self, name: SiteName) -> bool {
        self.sites.iter().any(|s| s.name == name)
    }

    /// Sum of link lengths.
    pub fn length(&self) -> f64 {
        self.links.iter().map(|l| l.length).sum()
    }

    /// Range of each independent variable such that none of the joints it
    /// drives leaves its own range.
    pub fn driver_bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); self.dof];
        for j in &self.joints {
            let r = j.coupling_ratio;
            let (lo, hi) = if r > 0.0 {
                (j.min / r, j.max / r)
            } else if r < 0.0 {
                (j.max / r, j.min / r)
            } else {
                continue;
            };
            let b = &mut bounds[j.driver];
            b.0 = b.0.max(lo);
            b.1 = b.1.min(hi);
        }
        for b in &mut bounds {
            if b.0 > b.1 {
                // Incompatible coupled ranges: collapse onto the lower edge.
                b.1 = b.0;
            }
            if !b.0.is_finite() {
                b.0 = 0.0;
            }
            if !b.1.is_finite() {
                b.1 = b.0;
            }
        }
        bounds
    }

    /// Clamps every independent variable into [`Self::driver_bounds`].
    pub fn clamp(&self, q: &mut JointVector) {
        for (v, (lo, hi)) in q.0.iter_mut().zip(self.driver_bounds()) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn within_bounds(&self, q: &JointVector) -> bool {
        q.len() == self.dof
            && q.0
                .iter()
                .zip(self.driver_bounds())
                .all(|(v, (lo, hi))| *v >= lo && *v <= hi)
    }

    fn check_dim(&self, q: &JointVector) -> Result<()> {
        if q.len() != self.dof {
            return invalid(format!(
                "joint vector has {} values, chain has {} independent variables",
                q.len(),
                self.dof
            ));
        }
        Ok(())
    }

    /// Per-joint angles (radians): `ratio_k * q[driver_k]`, clamped to the
    /// joint's own range.
    pub fn expand_coupling(&self, q: &JointVector) -> Result<Vec<f64>> {
        self.check_dim(q)?;
        Ok(self
            .joints
            .iter()
            .map(|j| (j.coupling_ratio * q.0[j.driver]).clamp(j.min, j.max))
            .collect())
    }

    /// World frame of every link, located at its joint center.
    pub fn link_frames(&self, q: &JointVector) -> Result<Vec<Transform>> {
        let angles = self.expand_coupling(q)?;
        Ok(self.frames_from_angles(&angles))
    }

    fn frames_from_angles(&self, angles: &[f64]) -> Vec<Transform> {
        let mut frames = Vec::with_capacity(self.joints.len());
        let mut parent = self.base;
        for (k, (joint, angle)) in self.joints.iter().zip(angles).enumerate() {
            let origin = if k == 0 {
                parent
            } else {
                parent * Transform::from_translation(Vector3::x() * self.links[k - 1].length)
            };
            let frame =
                origin * Transform::from_rotation(Rotation3::from_axis_angle(&joint.axis, *angle));
            frames.push(frame);
            parent = frame;
        }
        frames
    }

    /// Pose of `site` in the hand frame.
    pub fn forward_transform(&self, q: &JointVector, site: SiteName) -> Result<Transform> {
        let site = self.site(site)?;
        let frames = self.link_frames(q)?;
        Ok(frames[site.link] * site.offset)
    }

    pub fn site_position(&self, q: &JointVector, site: SiteName) -> Result<Vector3<f64>> {
        Ok(self.forward_transform(q, site)?.translation)
    }

    /// World position of the site's collision-sphere center.
    pub fn site_axis_point(&self, q: &JointVector, site: SiteName) -> Result<Vector3<f64>> {
        let site = self.site(site)?;
        let frames = self.link_frames(q)?;
        Ok(frames[site.link].transform_point(&site.axis_point))
    }

    /// Joint centers in the hand frame, one per joint.
    pub fn joint_centers(&self, q: &JointVector) -> Result<Vec<Vector3<f64>>> {
        Ok(self.link_frames(q)?.iter().map(|f| f.translation).collect())
    }

    /// Distal end of the last link.
    pub fn end_point(&self, q: &JointVector) -> Result<Vector3<f64>> {
        let frames = self.link_frames(q)?;
        let last = self.links.len() - 1;
        Ok(frames[last].transform_point(&(Vector3::x() * self.links[last].length)))
    }

    /// One capsule per link of non-zero length.
    pub fn capsules(&self, q: &JointVector) -> Result<Vec<LinkCapsule>> {
        let frames = self.link_frames(q)?;
        Ok(frames
            .iter()
            .zip(&self.links)
            .filter(|(_, l)| l.length > 0.0)
            .map(|(f, l)| LinkCapsule {
                start: f.translation,
                end: f.transform_point(&(Vector3::x() * l.length)),
                radius: l.radius(),
            })
            .collect())
    }

    /// Positional Jacobian (mm/rad) of a world point rigidly attached to
    /// link `link`, one column per independent variable.
    pub fn point_jacobian(
        &self,
        q: &JointVector,
        link: usize,
        point: &Vector3<f64>,
    ) -> Result<Matrix3xX<f64>> {
        let frames = self.link_frames(q)?;
        Ok(self.point_jacobian_with_frames(&frames, link, point))
    }

    pub(crate) fn point_jacobian_with_frames(
        &self,
        frames: &[Transform],
        link: usize,
        point: &Vector3<f64>,
    ) -> Matrix3xX<f64> {
        let mut jac = Matrix3xX::zeros(self.dof);
        for (joint, frame) in self.joints.iter().zip(frames).take(link + 1) {
            let axis = frame.rotation * joint.axis.into_inner();
            let lever = point - frame.translation;
            let col = axis.cross(&lever) * joint.coupling_ratio;
            let mut c = jac.column_mut(joint.driver);
            c += col;
        }
        jac
    }

    /// Linear part of the site Jacobian: `dP = J dq` to first order.
    pub fn linear_jacobian(&self, q: &JointVector, site: SiteName) -> Result<Matrix3xX<f64>> {
        let site = self.site(site)?;
        let frames = self.link_frames(q)?;
        let p = (frames[site.link] * site.offset).translation;
        Ok(self.point_jacobian_with_frames(&frames, site.link, &p))
    }
}

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-8;

/// Moore–Penrose pseudoinverse of a 3×m matrix via SVD.
pub fn pseudoinverse(j: &Matrix3xX<f64>) -> MatrixXx3<f64> {
    let m = j.ncols();
    if m == 0 {
        return MatrixXx3::zeros(0);
    }
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return MatrixXx3::zeros(m);
    }
    let cutoff = PINV_RELATIVE_CUTOFF * smax;
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut out = MatrixXx3::zeros(m);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > cutoff {
            // out += v_i * u_iᵀ / s
            out += (v_t.row(i).transpose() * u.column(i).transpose()) / *s;
        }
    }
    out
}
