//! The JSON hand specification accepted by the command line.

use std::path::Path;

use handforge_core::hand::{
    place_finger_bases, reference_fractions, reference_placements, reference_widths,
    scale_proportions, FingerPlacement, HandTemplate, ThumbKinematics, REFERENCE_HAND_LENGTH,
};
use handforge_core::opposability::{
    OpposabilityConfig, SpreadMeasure, DEFAULT_CELL_SIZE, DEFAULT_JOINT_RESOLUTION,
};
use handforge_core::selection::{EvaluationSettings, SearchIntervals, DEFAULT_THRESHOLD};
use handforge_core::IkSettings;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkProportions {
    /// Link length over hand length, rows thumb … little.
    pub fractions: [[f64; 3]; 5],
    /// Link widths (mm).
    pub widths: [[f64; 3]; 5],
}

impl Default for LinkProportions {
    fn default() -> Self {
        Self {
            fractions: reference_fractions(),
            widths: reference_widths(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Placements {
    /// The measured reference bases.
    Reference,
    /// Bases on the circle around the middle MCP at these angular offsets
    /// (degrees, index … little; the middle entry must be 0).
    Generate {
        angular_offsets: [f64; 4],
    },
    Explicit {
        fingers: Vec<FingerPlacement>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandSpecDocument {
    pub schema_version: u32,
    /// Wrist to middle fingertip (mm).
    pub hand_length: f64,
    pub links: LinkProportions,
    pub placements: Placements,
    pub thumb_kinematics: ThumbKinematics,
    pub search: SearchIntervals,
    pub solver: IkSettings,
    /// Rows index … little, columns MCP, PIP, DIP, TIP.
    pub weights: [[f64; 4]; 4],
    /// Balance threshold (percent).
    pub threshold: f64,
    pub spread: SpreadMeasure,
    /// Grid cell edge (mm).
    pub cell_size: f64,
    pub joint_resolution_deg: f64,
    pub seed: u64,
}

impl Default for HandSpecDocument {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            hand_length: REFERENCE_HAND_LENGTH,
            links: LinkProportions::default(),
            placements: Placements::Reference,
            thumb_kinematics: ThumbKinematics::default(),
            search: SearchIntervals::default(),
            solver: IkSettings::default(),
            weights: [[1.0; 4]; 4],
            threshold: DEFAULT_THRESHOLD,
            spread: SpreadMeasure::default(),
            cell_size: DEFAULT_CELL_SIZE,
            joint_resolution_deg: DEFAULT_JOINT_RESOLUTION,
            seed: 0,
        }
    }
}

/// A document turned into the inputs of the search.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSpec {
    pub template: HandTemplate,
    pub intervals: SearchIntervals,
    pub settings: EvaluationSettings,
}

fn field(name: &str, e: handforge_core::Error) -> CliError {
    CliError::Parse(format!("{name}: {e}"))
}

impl HandSpecDocument {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Parse(inner.to_string())
            } else {
                CliError::Parse(format!("{path}: {inner}"))
            }
        })?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                doc.schema_version
            )));
        }
        doc.resolve()?;
        Ok(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn resolve(&self) -> Result<ResolvedSpec, CliError> {
        let table = scale_proportions(self.hand_length, &self.links.fractions, &self.links.widths)
            .map_err(|e| field("links", e))?;
        let placements = match &self.placements {
            Placements::Reference => reference_placements(),
            Placements::Generate { angular_offsets } => {
                place_finger_bases(&table, *angular_offsets).map_err(|e| field("placements", e))?
            }
            Placements::Explicit { fingers } => fingers.clone(),
        };
        self.search.validate().map_err(|e| field("search", e))?;
        let ik = IkSettings {
            seed: self.seed,
            ..self.solver
        };
        ik.validate().map_err(|e| field("solver", e))?;
        if self
            .weights
            .iter()
            .flatten()
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(CliError::Parse(
                "weights: entries must be finite and non-negative".into(),
            ));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(CliError::Parse(format!(
                "threshold: {} must be positive",
                self.threshold
            )));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(CliError::Parse(format!(
                "cell_size: {} must be positive",
                self.cell_size
            )));
        }
        if !(self.joint_resolution_deg > 0.0 && self.joint_resolution_deg.is_finite()) {
            return Err(CliError::Parse(format!(
                "joint_resolution_deg: {} must be positive",
                self.joint_resolution_deg
            )));
        }
        let template = HandTemplate {
            table,
            placements,
            thumb_kinematics: self.thumb_kinematics,
        };
        // Catches bad placements or thumb axes before any search starts.
        let probe = handforge_core::hand::ThumbBase::new(
            self.search.x.min,
            self.search.y.min,
            self.search.z.min,
            self.search.theta_z.min,
        );
        template.build(probe).map_err(|e| field("placements", e))?;
        Ok(ResolvedSpec {
            template,
            intervals: self.search,
            settings: EvaluationSettings {
                ik,
                opposability: OpposabilityConfig {
                    cell_size: self.cell_size,
                    joint_resolution_deg: self.joint_resolution_deg,
                    weights: self.weights,
                    spread: self.spread,
                },
                threshold: self.threshold,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(
            HandSpecDocument::from_json("{}").unwrap(),
            HandSpecDocument::default()
        );
    }

    #[test]
    fn default_round_trips() {
        let d = HandSpecDocument::default();
        assert_eq!(HandSpecDocument::from_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn errors_name_the_field() {
        let e = HandSpecDocument::from_json(
            r#"{"search": {"x": {"min": 1, "max": 0, "step": 1},
            "y": {"min": 0, "max": 0, "step": 1}, "z": {"min": 0, "max": 0, "step": 1},
            "theta_z": {"min": 0, "max": 0, "step": 1}}}"#,
        )
        .unwrap_err();
        assert!(
            e.to_string()
                .contains("search: invalid input: x: min 1 exceeds max 0"),
            "{e}"
        );

        let e = HandSpecDocument::from_json(r#"{"solver": {"dx": "big"}}"#).unwrap_err();
        assert!(e.to_string().contains("solver.dx"), "{e}");

        let e = HandSpecDocument::from_json(r#"{"bogus": 1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");

        let e = HandSpecDocument::from_json(r#"{"schema_version": 2}"#).unwrap_err();
        assert!(e.to_string().contains("schema_version"), "{e}");
    }

    #[test]
    fn generated_placements_resolve() {
        let d = HandSpecDocument::from_json(
            r#"{"placements": {"mode": "generate", "angular_offsets": [8, 0, -8, -16]}}"#,
        )
        .unwrap();
        let r = d.resolve().unwrap();
        assert_eq!(r.template.placements.len(), 4);
    }

    #[test]
    fn seed_reaches_the_solver() {
        let d = HandSpecDocument {
            seed: 42,
            ..HandSpecDocument::default()
        };
        assert_eq!(d.resolve().unwrap().settings.ik.seed, 42);
    }
}
