//! Two-chain convergence: drive the thumb pulp and a site on an opposed
//! finger to a common point.
//!
//! Each iteration measures `dP = P_thumb - P_finger`, caps its length at
//! `dx`, and moves each chain half way toward the other through the
//! pseudoinverse of its positional Jacobian. Updates are clamped into the
//! joint domain. The constrained variant adds a sphere-pair penalty so the
//! thumb does not reach its target by passing through the finger.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{pseudoinverse, JointVector, SerialChain, SiteName, Transform};
use crate::hand::{Finger, HandModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkSettings {
    /// Largest Cartesian correction per iteration (mm).
    pub dx: f64,
    /// Convergence tolerance on the site distance (mm).
    pub tol: f64,
    pub max_iters: usize,
    /// Allowed sphere interpenetration (mm).
    pub epsilon: f64,
    /// Random starts tried after the supplied initial configuration.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for IkSettings {
    fn default() -> Self {
        Self {
            dx: 1.0,
            tol: 0.5,
            max_iters: 500,
            epsilon: 0.5,
            restarts: 8,
            seed: 0,
        }
    }
}

impl IkSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) {
            return invalid(format!("dx {} must be positive", self.dx));
        }
        if !(self.tol > 0.0) {
            return invalid(format!("tol {} must be positive", self.tol));
        }
        if !(self.epsilon >= 0.0) {
            return invalid(format!("epsilon {} must be non-negative", self.epsilon));
        }
        if self.max_iters < 1 {
            return invalid("max_iters must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IkStatus {
    Converged,
    NotConverged,
    CollisionBlocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub q_thumb: JointVector,
    pub q_finger: JointVector,
    /// Final distance between the two end-effectors (mm).
    pub residual: f64,
    pub iterations: usize,
    pub status: IkStatus,
}

/// Point on the finger the thumb pulp has to meet for a Kapandji site: the
/// palmar surface point at the joint, or the fingertip pad for `Tip`.
pub fn surface_target(site: SiteName) -> SiteName {
    match site {
        SiteName::Tip => SiteName::Pulp,
        other => other,
    }
}

/// Collision sphere centered on a link axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSphere {
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Link the center is attached to.
    pub link: usize,
    /// Site whose surface this sphere carries, if any.
    pub site: Option<SiteName>,
}

/// One sphere per distinct joint center plus one at the distal end, each
/// with the half-width of the link starting there.
pub fn chain_spheres(chain: &SerialChain, frames: &[Transform]) -> Vec<ChainSphere> {
    let mut spheres: Vec<ChainSphere> = Vec::with_capacity(chain.joints.len() + 1);
    for (k, frame) in frames.iter().enumerate() {
        let radius = chain.links[k].radius();
        let site = chain
            .sites
            .iter()
            .find(|s| {
                s.link == k
                    && s.axis_point == Vector3::zeros()
                    && !matches!(s.name, SiteName::Tip | SiteName::Pulp)
            })
            .map(|s| s.name);
        if k > 0 && chain.links[k - 1].length == 0.0 {
            let prev = spheres.last_mut().expect("k > 0");
            prev.radius = prev.radius.max(radius);
            prev.link = k;
            prev.site = prev.site.or(site);
            continue;
        }
        spheres.push(ChainSphere {
            center: frame.translation,
            radius,
            link: k,
            site,
        });
    }
    let last = chain.links.len() - 1;
    spheres.push(ChainSphere {
        center: frames[last].transform_point(&(Vector3::x() * chain.links[last].length)),
        radius: chain.links[last].radius(),
        link: last,
        site: Some(SiteName::Tip),
    });
    spheres
}

/// The sphere-pair inequality `d ≥ r_a + r_b − ε`, inclusive.
pub fn sphere_pair_clear(distance: f64, r_a: f64, r_b: f64, epsilon: f64) -> bool {
    distance >= r_a + r_b - epsilon
}

struct Problem<'a> {
    thumb: &'a SerialChain,
    finger: &'a SerialChain,
    thumb_site: SiteName,
    finger_site: SiteName,
    /// Kapandji site whose sphere pairs with the thumb tip sphere without
    /// constraint, so that contact at the target stays admissible.
    exempt: SiteName,
}

impl<'a> Problem<'a> {
    fn new(hand: &'a HandModel, finger: Finger, site: SiteName) -> Result<Self> {
        if finger == Finger::Thumb {
            return invalid("the opposed chain must be a finger, not the thumb");
        }
        if !SiteName::KAPANDJI.contains(&site) {
            return invalid(format!("site {site} is not one of MCP, PIP, DIP, TIP"));
        }
        Ok(Self {
            thumb: hand.thumb(),
            finger: hand.chain(finger),
            thumb_site: SiteName::Pulp,
            finger_site: surface_target(site),
            exempt: site,
        })
    }

    fn check_start(&self, q_thumb: &JointVector, q_finger: &JointVector) -> Result<()> {
        if q_thumb.len() != self.thumb.dof() || q_finger.len() != self.finger.dof() {
            return invalid(format!(
                "initial joint vectors have {} and {} values, chains need {} and {}",
                q_thumb.len(),
                q_finger.len(),
                self.thumb.dof(),
                self.finger.dof()
            ));
        }
        Ok(())
    }

    fn violations(
        &self,
        frames_t: &[Transform],
        frames_f: &[Transform],
        epsilon: f64,
    ) -> Vec<(ChainSphere, ChainSphere, f64)> {
        if epsilon.is_infinite() {
            return Vec::new();
        }
        let st = chain_spheres(self.thumb, frames_t);
        let sf = chain_spheres(self.finger, frames_f);
        let mut out = Vec::new();
        for a in &st {
            for b in &sf {
                if a.site == Some(SiteName::Tip) && b.site == Some(self.exempt) {
                    continue;
                }
                let d = (a.center - b.center).norm();
                if !sphere_pair_clear(d, a.radius, b.radius, epsilon) {
                    out.push((*a, *b, d));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Run {
    q_thumb: JointVector,
    q_finger: JointVector,
    residual: f64,
    iterations: usize,
    feasible: bool,
    /// The distance dropped below tolerance at an infeasible configuration.
    passed_through: bool,
}

const PENALTY_WEIGHT: f64 = 10.0;
/// Gradient step on `PENALTY_WEIGHT * g²`: each pair separates by `g / 2`.
const PENALTY_RATE: f64 = 0.025;

/// Joint update while some sphere pair is violated: penalty descent on
/// `PENALTY_WEIGHT * g²` is the primary task and the attraction step
/// `(dq_t, dq_f)` is projected onto the null space of the violated
/// constraint rows, so the chains keep closing in without re-entering.
#[allow(clippy::too_many_arguments)]
fn constrained_step(
    problem: &Problem<'_>,
    frames_t: &[Transform],
    frames_f: &[Transform],
    violations: &[(ChainSphere, ChainSphere, f64)],
    epsilon: f64,
    dq_t: &DVector<f64>,
    dq_f: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let (mt, mf) = (dq_t.len(), dq_f.len());
    let m = mt + mf;
    let mut rows = DMatrix::zeros(violations.len(), m);
    let mut push = DVector::zeros(violations.len());
    for (i, (a, b, d)) in violations.iter().enumerate() {
        let g = a.radius + b.radius - epsilon - d;
        let u = if *d > 1e-12 {
            (a.center - b.center) / *d
        } else {
            Vector3::z()
        };
        let ja = problem
            .thumb
            .point_jacobian_with_frames(frames_t, a.link, &a.center);
        let jb = problem
            .finger
            .point_jacobian_with_frames(frames_f, b.link, &b.center);
        rows.view_mut((i, 0), (1, mt))
            .copy_from(&(u.transpose() * ja));
        rows.view_mut((i, mt), (1, mf))
            .copy_from(&(-(u.transpose() * jb)));
        push[i] = 2.0 * PENALTY_WEIGHT * PENALTY_RATE * g;
    }
    let pinv = rows
        .clone()
        .pseudo_inverse(1e-10)
        .unwrap_or_else(|_| DMatrix::zeros(m, violations.len()));
    let null = DMatrix::identity(m, m) - &pinv * &rows;
    let mut attract = DVector::zeros(m);
    attract.rows_mut(0, mt).copy_from(dq_t);
    attract.rows_mut(mt, mf).copy_from(dq_f);
    let dq = &pinv * push + null * attract;
    (dq.rows(0, mt).into_owned(), dq.rows(mt, mf).into_owned())
}

fn site_point(
    chain: &SerialChain,
    frames: &[Transform],
    site: SiteName,
) -> Result<(usize, Vector3<f64>)> {
    let s = chain.site(site)?;
    Ok((s.link, (frames[s.link] * s.offset).translation))
}

fn apply(chain: &SerialChain, q: &mut JointVector, dq: &DVector<f64>) {
    for (v, d) in q.0.iter_mut().zip(dq.iter()) {
        *v += d;
    }
    chain.clamp(q);
}

fn iterate(
    problem: &Problem<'_>,
    mut q_t: JointVector,
    mut q_f: JointVector,
    settings: &IkSettings,
    constrained: bool,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<Run> {
    problem.thumb.clamp(&mut q_t);
    problem.finger.clamp(&mut q_f);
    let mut passed_through = false;
    let mut iterations = 0;
    loop {
        let frames_t = problem.thumb.link_frames(&q_t)?;
        let frames_f = problem.finger.link_frames(&q_f)?;
        let (link_t, p_t) = site_point(problem.thumb, &frames_t, problem.thumb_site)?;
        let (link_f, p_f) = site_point(problem.finger, &frames_f, problem.finger_site)?;
        let mut dp = p_t - p_f;
        let residual = dp.norm();
        if let Some(t) = trace.as_deref_mut() {
            t.push(residual);
        }
        let violations = if constrained {
            problem.violations(&frames_t, &frames_f, settings.epsilon)
        } else {
            Vec::new()
        };
        let feasible = violations.is_empty();
        if residual <= settings.tol {
            if feasible {
                return Ok(Run {
                    q_thumb: q_t,
                    q_finger: q_f,
                    residual,
                    iterations,
                    feasible,
                    passed_through,
                });
            }
            passed_through = true;
        }
        if iterations >= settings.max_iters {
            return Ok(Run {
                q_thumb: q_t,
                q_finger: q_f,
                residual,
                iterations,
                feasible,
                passed_through,
            });
        }

        if residual > settings.dx {
            dp *= settings.dx / residual;
        }
        let j_t = problem
            .thumb
            .point_jacobian_with_frames(&frames_t, link_t, &p_t);
        let j_f = problem
            .finger
            .point_jacobian_with_frames(&frames_f, link_f, &p_f);
        let mut dq_t = pseudoinverse(&j_t) * (-dp / 2.0);
        let mut dq_f = pseudoinverse(&j_f) * (dp / 2.0);

        if !violations.is_empty() {
            (dq_t, dq_f) = constrained_step(
                problem,
                &frames_t,
                &frames_f,
                &violations,
                settings.epsilon,
                &dq_t,
                &dq_f,
            );
        }

        apply(problem.thumb, &mut q_t, &dq_t);
        apply(problem.finger, &mut q_f, &dq_f);
        iterations += 1;
    }
}

fn to_result(run: Run, status: IkStatus) -> IkResult {
    IkResult {
        q_thumb: run.q_thumb,
        q_finger: run.q_finger,
        residual: run.residual,
        iterations: run.iterations,
        status,
    }
}

/// Unconstrained two-chain convergence from `(q0_thumb, q0_finger)`.
pub fn solve_convergence(
    hand: &HandModel,
    finger: Finger,
    site: SiteName,
    settings: &IkSettings,
    q0_thumb: &JointVector,
    q0_finger: &JointVector,
) -> Result<IkResult> {
    solve_convergence_traced(hand, finger, site, settings, q0_thumb, q0_finger).map(|(r, _)| r)
}

/// As [`solve_convergence`], also returning the residual at every iterate.
pub fn solve_convergence_traced(
    hand: &HandModel,
    finger: Finger,
    site: SiteName,
    settings: &IkSettings,
    q0_thumb: &JointVector,
    q0_finger: &JointVector,
) -> Result<(IkResult, Vec<f64>)> {
    settings.validate()?;
    let problem = Problem::new(hand, finger, site)?;
    problem.check_start(q0_thumb, q0_finger)?;
    let mut trace = Vec::new();
    let run = iterate(
        &problem,
        q0_thumb.clone(),
        q0_finger.clone(),
        settings,
        false,
        Some(&mut trace),
    )?;
    let status = if run.residual <= settings.tol {
        IkStatus::Converged
    } else {
        IkStatus::NotConverged
    };
    Ok((to_result(run, status), trace))
}

/// Uniform random joint vector within the chain's driver bounds.
pub fn random_configuration(chain: &SerialChain, rng: &mut ChaCha8Rng) -> JointVector {
    JointVector(
        chain
            .driver_bounds()
            .into_iter()
            .map(|(lo, hi)| {
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            })
            .collect(),
    )
}

/// Collision-constrained convergence with multiple starts: the supplied
/// configuration first, then `settings.restarts` seeded random ones.
///
/// The reported result is the feasible converged run with the smallest
/// residual (lowest start index on ties). Without one, the status is
/// `CollisionBlocked` if the target is reachable when the sphere
/// constraints are ignored (some run got within tolerance at an infeasible
/// configuration, or the unconstrained scheme converges from one of the
/// same starts), and `NotConverged` otherwise.
pub fn solve_constrained(
    hand: &HandModel,
    finger: Finger,
    site: SiteName,
    settings: &IkSettings,
    q0_thumb: &JointVector,
    q0_finger: &JointVector,
) -> Result<IkResult> {
    settings.validate()?;
    let problem = Problem::new(hand, finger, site)?;
    problem.check_start(q0_thumb, q0_finger)?;

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut starts = vec![(q0_thumb.clone(), q0_finger.clone())];
    for _ in 0..settings.restarts {
        let qt = random_configuration(problem.thumb, &mut rng);
        let qf = random_configuration(problem.finger, &mut rng);
        starts.push((qt, qf));
    }

    let starts_unconstrained = starts.clone();
    let runs: Vec<Run> = starts
        .into_par_iter()
        .map(|(qt, qf)| iterate(&problem, qt, qf, settings, true, None))
        .collect::<Result<_>>()?;

    let pick = |filter: &dyn Fn(&Run) -> bool| {
        runs.iter()
            .enumerate()
            .filter(|(_, r)| filter(r))
            .min_by(|(ia, a), (ib, b)| a.residual.total_cmp(&b.residual).then(ia.cmp(ib)))
            .map(|(_, r)| r.clone())
    };

    if let Some(run) = pick(&|r| r.feasible && r.residual <= settings.tol) {
        return Ok(to_result(run, IkStatus::Converged));
    }
    let best = pick(&|_| true).expect("at least one start");
    if let Some(run) = pick(&|r| r.passed_through) {
        return Ok(to_result(run, IkStatus::CollisionBlocked));
    }
    let reachable = starts_unconstrained
        .into_par_iter()
        .map(|(qt, qf)| iterate(&problem, qt, qf, settings, false, None))
        .collect::<Result<Vec<Run>>>()?
        .iter()
        .any(|r| r.residual <= settings.tol);
    let status = if reachable {
        IkStatus::CollisionBlocked
    } else {
        IkStatus::NotConverged
    };
    Ok(to_result(best, status))
}

/// Whether every non-exempt thumb/finger sphere pair satisfies
/// `d ≥ r_t + r_f − ε`. The thumb tip sphere and the sphere at `site` are
/// exempt.
pub fn collision_free(
    hand: &HandModel,
    finger: Finger,
    site: SiteName,
    q_thumb: &JointVector,
    q_finger: &JointVector,
    epsilon: f64,
) -> Result<bool> {
    let problem = Problem::new(hand, finger, site)?;
    let frames_t = problem.thumb.link_frames(q_thumb)?;
    let frames_f = problem.finger.link_frames(q_finger)?;
    Ok(problem.violations(&frames_t, &frames_f, epsilon).is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::{build_hand, reference_placements, AnthropometricTable, ThumbBase};

    fn reference_hand() -> HandModel {
        build_hand(
            &AnthropometricTable::reference(),
            &reference_placements(),
            ThumbBase::new(12.0, 2.0, -5.0, 45.0),
        )
        .unwrap()
    }

    #[test]
    fn sphere_pair_boundary_is_inclusive() {
        assert!(sphere_pair_clear(14.5, 8.0, 7.0, 0.5));
        assert!(!sphere_pair_clear(14.25, 8.0, 7.0, 0.5));
        assert!(sphere_pair_clear(0.0, 8.0, 7.0, f64::INFINITY));
    }

    #[test]
    fn thumb_sphere_layout() {
        let hand = reference_hand();
        let q = JointVector::zeros(3);
        let frames = hand.thumb().link_frames(&q).unwrap();
        let spheres = chain_spheres(hand.thumb(), &frames);
        // base (two coincident hinges), MCP, IP, tip
        assert_eq!(spheres.len(), 4);
        assert_eq!(spheres[0].radius, 12.5);
        assert_eq!(spheres[3].site, Some(SiteName::Tip));

        let frames = hand
            .chain(Finger::Index)
            .link_frames(&JointVector::zeros(1))
            .unwrap();
        let spheres = chain_spheres(hand.chain(Finger::Index), &frames);
        let tags: Vec<_> = spheres.iter().map(|s| s.site).collect();
        assert_eq!(
            tags,
            vec![
                Some(SiteName::Mcp),
                Some(SiteName::Pip),
                Some(SiteName::Dip),
                Some(SiteName::Tip)
            ]
        );
    }

    #[test]
    fn rejects_thumb_and_bad_site() {
        let hand = reference_hand();
        let s = IkSettings::default();
        let qt = JointVector::zeros(3);
        let qf = JointVector::zeros(1);
        assert!(solve_convergence(&hand, Finger::Thumb, SiteName::Tip, &s, &qt, &qf).is_err());
        assert!(solve_convergence(&hand, Finger::Index, SiteName::Pulp, &s, &qt, &qf).is_err());
        assert!(solve_convergence(&hand, Finger::Index, SiteName::Tip, &s, &qf, &qf).is_err());
    }

    #[test]
    fn settings_validation() {
        let bad = IkSettings {
            dx: 0.0,
            ..IkSettings::default()
        };
        assert!(bad.validate().is_err());
        let bad = IkSettings {
            max_iters: 0,
            ..IkSettings::default()
        };
        assert!(bad.validate().is_err());
    }
}
