//! Brute-force search over thumb bases: Kapandji gate, opposability
//! index, balance filter, argmax.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hand::{HandTemplate, ThumbBase};
use crate::ik::IkSettings;
use crate::kapandji::run_kapandji;
use crate::opposability::{evaluate_opposability, OpposabilityConfig};

/// Default balance threshold (percent).
pub const DEFAULT_THRESHOLD: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    pub fn single(value: f64) -> Self {
        Self::new(value, value, 1.0)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return invalid(format!("{name}: bounds must be finite"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return invalid(format!("{name}: step {} must be positive", self.step));
        }
        if self.min > self.max {
            return invalid(format!("{name}: min {} exceeds max {}", self.min, self.max));
        }
        Ok(())
    }

    /// `min, min + step, …` while `≤ max` (with a small tolerance so that
    /// decimal steps land on `max`).
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchIntervals {
    pub x: Interval,
    pub y: Interval,
    pub z: Interval,
    /// Degrees.
    pub theta_z: Interval,
}

impl SearchIntervals {
    /// Bounding box of the four reference candidates, on their own grid.
    pub fn reference_box() -> Self {
        Self {
            x: Interval::new(8.0, 12.0, 4.0),
            y: Interval::new(2.0, 11.0, 9.0),
            z: Interval::new(-9.0, -5.0, 4.0),
            theta_z: Interval::new(40.0, 50.0, 5.0),
        }
    }

    /// Every interval widened by one step on both sides.
    pub fn inflated(&self) -> Self {
        let grow = |i: Interval| Interval::new(i.min - i.step, i.max + i.step, i.step);
        Self {
            x: grow(self.x),
            y: grow(self.y),
            z: grow(self.z),
            theta_z: grow(self.theta_z),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate("x")?;
        self.y.validate("y")?;
        self.z.validate("z")?;
        self.theta_z.validate("theta_z")
    }
}

impl Default for SearchIntervals {
    fn default() -> Self {
        Self::reference_box().inflated()
    }
}

/// Cartesian product of the four sequences in lexicographic order.
pub fn enumerate_candidates(intervals: &SearchIntervals) -> Result<Vec<ThumbBase>> {
    intervals.validate()?;
    let (xs, ys, zs, ts) = (
        intervals.x.values(),
        intervals.y.values(),
        intervals.z.values(),
        intervals.theta_z.values(),
    );
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len() * ts.len());
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                for &t in &ts {
                    out.push(ThumbBase::new(x, y, z, t));
                }
            }
        }
    }
    if out.is_empty() {
        return invalid("search intervals produce no candidates");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub ik: IkSettings,
    pub opposability: OpposabilityConfig,
    /// Balance threshold (percent).
    pub threshold: f64,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            ik: IkSettings::default(),
            opposability: OpposabilityConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub base: ThumbBase,
    pub kapandji_pass: bool,
    /// Opposability index; only computed when the Kapandji gate passes.
    pub index: Option<f64>,
    /// Balance score (percent); `None` when not computed or undefined.
    pub sigma_r: Option<f64>,
    pub stored: bool,
}

impl CandidateRecord {
    /// Record for an already-measured base, e.g. a published table row.
    pub fn measured(base: ThumbBase, index: f64, sigma_r: f64, threshold: f64) -> Self {
        Self {
            base,
            kapandji_pass: true,
            index: Some(index),
            sigma_r: Some(sigma_r),
            stored: sigma_r < threshold,
        }
    }

    fn rejected(base: ThumbBase) -> Self {
        Self {
            base,
            kapandji_pass: false,
            index: None,
            sigma_r: None,
            stored: false,
        }
    }

    pub fn feasible(&self, threshold: f64) -> bool {
        self.kapandji_pass && self.index.is_some() && self.sigma_r.is_some_and(|s| s < threshold)
    }
}

/// Never fails: a base that cannot be built or cannot reach every target
/// is recorded as not passing.
pub fn evaluate_candidate(
    template: &HandTemplate,
    base: ThumbBase,
    settings: &EvaluationSettings,
) -> CandidateRecord {
    let Ok(hand) = template.build(base) else {
        return CandidateRecord::rejected(base);
    };
    match run_kapandji(&hand, &settings.ik) {
        Ok(report) if report.pass => {}
        _ => return CandidateRecord::rejected(base),
    }
    match evaluate_opposability(&hand, &settings.opposability) {
        Ok((result, _)) => {
            let mut record = CandidateRecord {
                base,
                kapandji_pass: true,
                index: Some(result.index),
                sigma_r: result.sigma_r,
                stored: false,
            };
            record.stored = record.feasible(settings.threshold);
            record
        }
        Err(_) => CandidateRecord {
            base,
            kapandji_pass: true,
            index: None,
            sigma_r: None,
            stored: false,
        },
    }
}

/// Evaluates candidates in parallel; the output follows the input order.
pub fn evaluate_candidates(
    template: &HandTemplate,
    bases: &[ThumbBase],
    settings: &EvaluationSettings,
) -> Vec<CandidateRecord> {
    bases
        .par_iter()
        .map(|b| evaluate_candidate(template, *b, settings))
        .collect()
}

/// Feasible base with the largest index; ties go to the lexicographically
/// smallest base.
pub fn select_best(records: &[CandidateRecord], threshold: f64) -> Result<ThumbBase> {
    if records.is_empty() {
        return invalid("no candidate records");
    }
    records
        .iter()
        .filter(|r| r.feasible(threshold))
        .max_by(|a, b| {
            let (ia, ib) = (a.index.unwrap_or(f64::NAN), b.index.unwrap_or(f64::NAN));
            ia.total_cmp(&ib).then(b.base.lex_cmp(&a.base))
        })
        .map(|r| r.base)
        .ok_or(Error::NoFeasibleCandidate { threshold })
}
