mod common;

use handforge_core::collision::{capsule_distance, Segment};
use handforge_core::hand::{
    max_inclination, max_inclination_with, Finger, HandTemplate, InclinationSweep, ThumbBase,
};
use handforge_core::{JointVector, SerialChain, SiteName, Transform};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn interior_config(chain: &SerialChain, unit: &[f64]) -> JointVector {
    JointVector(
        chain
            .driver_bounds()
            .into_iter()
            .zip(unit)
            .map(|((lo, hi), u)| lo + 1e-3 + (hi - lo - 2e-3) * u)
            .collect(),
    )
}

fn fd_error(chain: &SerialChain, q: &JointVector, site: SiteName) -> f64 {
    let j = chain.linear_jacobian(q, site).unwrap();
    let h = 1e-6;
    let mut max_err: f64 = 0.0;
    for c in 0..chain.dof() {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus.0[c] += h;
        minus.0[c] -= h;
        let fd = (chain.site_position(&plus, site).unwrap()
            - chain.site_position(&minus, site).unwrap())
            / (2.0 * h);
        max_err = max_err.max((fd - j.column(c)).norm());
    }
    max_err / j.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_matches_central_differences(
        unit in prop::collection::vec(0.0f64..1.0, 3),
        chain_index in 0usize..5,
    ) {
        let hand = common::reference_hand();
        let finger = Finger::ALL[chain_index];
        let chain = hand.chain(finger);
        let q = interior_config(chain, &unit[..chain.dof()]);
        let site = if finger == Finger::Thumb { SiteName::Pulp } else { SiteName::Tip };
        prop_assert!(fd_error(chain, &q, site) < 1e-5);
    }

    #[test]
    fn capsule_distance_matches_dense_sampling(
        pts in prop::collection::vec(-10.0f64..10.0, 12),
        ra in 0.0f64..2.0,
        rb in 0.0f64..2.0,
    ) {
        let v = |i: usize| Vector3::new(pts[i], pts[i + 1], pts[i + 2]);
        let a = Segment::new(v(0), v(3));
        let b = Segment::new(v(6), v(9));
        let exact = capsule_distance(&a, ra, &b, rb);
        let n = 400;
        let mut sampled = f64::INFINITY;
        for i in 0..=n {
            let p = a.at(i as f64 / n as f64);
            for k in 0..=n {
                sampled = sampled.min((p - b.at(k as f64 / n as f64)).norm());
            }
        }
        let sampled = sampled - ra - rb;
        prop_assert!(exact <= sampled + 1e-9);
        let spacing = ((a.b - a.a).norm() + (b.b - b.a).norm()) / n as f64;
        prop_assert!(sampled - exact <= spacing + 1e-9);
    }

    #[test]
    fn symmetric_capsule_distance(pts in prop::collection::vec(-10.0f64..10.0, 12)) {
        let v = |i: usize| Vector3::new(pts[i], pts[i + 1], pts[i + 2]);
        let a = Segment::new(v(0), v(3));
        let b = Segment::new(v(6), v(9));
        prop_assert!((capsule_distance(&a, 0.5, &b, 1.0) - capsule_distance(&b, 1.0, &a, 0.5)).abs() < 1e-9);
    }
}

#[test]
fn thousand_compositions_stay_orthonormal() {
    let step = Transform::new(
        Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(Vector3::new(0.3, -0.5, 0.8)),
            0.731,
        ),
        Vector3::new(1.0, -2.0, 0.5),
    );
    let mut t = Transform::identity();
    for _ in 0..1000 {
        t = t.compose(&step);
    }
    assert!(t.is_orthonormal(1e-9));
}

#[test]
fn all_sites_are_reported_for_every_finger() {
    let hand = common::reference_hand();
    for finger in Finger::OPPOSED {
        let chain = hand.chain(finger);
        for site in SiteName::ALL {
            chain.site_position(&JointVector::zeros(1), site).unwrap();
        }
    }
    for site in [SiteName::Tip, SiteName::Pulp] {
        hand.thumb()
            .site_position(&JointVector::zeros(3), site)
            .unwrap();
    }
}

#[test]
fn inclination_agrees_with_finer_sweep() {
    let hand = HandTemplate::reference()
        .build(ThumbBase::new(12.0, 2.0, -5.0, 45.0))
        .unwrap();
    for (moving, fixed) in [
        (Finger::Index, Finger::Middle),
        (Finger::Little, Finger::Ring),
    ] {
        let coarse = max_inclination(&hand, moving, fixed, 45.0).unwrap();
        let fine = max_inclination_with(
            &hand,
            moving,
            fixed,
            45.0,
            InclinationSweep {
                inclination_step_deg: 0.01,
                flexion_step_deg: 0.1,
            },
        )
        .unwrap();
        assert!((coarse - fine).abs() <= 0.2, "{moving}: {coarse} vs {fine}");
    }
}

#[test]
fn wider_links_never_allow_more_inclination() {
    let mut previous = f64::INFINITY;
    for width in [10.0, 14.0, 18.0, 22.0] {
        let mut template = HandTemplate::reference();
        for link in template.table.links[Finger::Index.index()].iter_mut() {
            link.width = width;
        }
        let hand = template
            .build(ThumbBase::new(12.0, 2.0, -5.0, 45.0))
            .unwrap();
        let incl = max_inclination(&hand, Finger::Index, Finger::Middle, 45.0).unwrap();
        assert!(
            incl <= previous + 1e-12,
            "width {width}: {incl} > {previous}"
        );
        previous = incl;
    }
}
