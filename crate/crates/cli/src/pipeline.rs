//! Enumerate, evaluate, select, and write the results to an output
//! directory.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::mpsc;

use handforge_core::hand::{Finger, ThumbBase};
use handforge_core::kapandji::run_kapandji;
use handforge_core::opposability::{evaluate_opposability, LayerKey, OpposabilityResult};
use handforge_core::selection::{
    enumerate_candidates, evaluate_candidate, select_best, CandidateRecord,
};
use handforge_core::{IkStatus, SiteName};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::document::HandSpecDocument;
use crate::export::{export_cloud, CloudFormat};
use crate::gestures::gesture_pose;
use crate::CliError;

pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.jsonl";
pub const BEST_FILE: &str = "best.json";

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Export occupancy clouds of the winning hand in this format.
    pub clouds: Option<CloudFormat>,
    pub gestures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub records: Vec<CandidateRecord>,
    pub best: ThumbBase,
    pub summary: BestSummary,
    /// Candidates taken from an existing checkpoint.
    pub resumed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub finger: Finger,
    pub site: SiteName,
    pub status: IkStatus,
    pub residual_mm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSummary {
    pub base: ThumbBase,
    pub record: CandidateRecord,
    pub kapandji_pass: bool,
    pub kapandji: Vec<TargetSummary>,
    pub opposability: OpposabilityResult,
}

#[derive(Serialize)]
struct CsvRow {
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
    theta_z_deg: f64,
    kapandji_pass: bool,
    toi: Option<f64>,
    sigma_r_pct: Option<f64>,
    stored: bool,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: Value,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLine {
    index: usize,
    record: CandidateRecord,
}

pub fn write_candidates<W: Write>(records: &[CandidateRecord], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            x_mm: r.base.x,
            y_mm: r.base.y,
            z_mm: r.base.z,
            theta_z_deg: r.base.theta_z,
            kapandji_pass: r.kapandji_pass,
            toi: r.index,
            sigma_r_pct: r.sigma_r,
            stored: r.stored,
        })?;
    }
    if records.is_empty() {
        w.write_record([
            "x_mm",
            "y_mm",
            "z_mm",
            "theta_z_deg",
            "kapandji_pass",
            "toi",
            "sigma_r_pct",
            "stored",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Records already in a checkpoint written for the same document. A
/// checkpoint for a different document, or a torn last line, is ignored.
fn load_checkpoint(
    path: &Path,
    config: &Value,
    bases: &[ThumbBase],
) -> Result<Vec<Option<CandidateRecord>>, CliError> {
    let mut records = vec![None; bases.len()];
    let Ok(file) = File::open(path) else {
        return Ok(records);
    };
    let mut lines = BufReader::new(file).lines();
    let header: Option<CheckpointHeader> = match lines.next() {
        Some(line) => serde_json::from_str(&line?).ok(),
        None => None,
    };
    match header {
        Some(h) if &h.config == config => {}
        _ => return Ok(records),
    }
    for line in lines {
        let Ok(entry) = serde_json::from_str::<CheckpointLine>(&line?) else {
            continue;
        };
        if entry.index < bases.len() && entry.record.base == bases[entry.index] {
            records[entry.index] = Some(entry.record);
        }
    }
    Ok(records)
}

/// Rewrites the checkpoint with the header and the records kept so far.
fn open_checkpoint(
    path: &Path,
    config: &Value,
    records: &[Option<CandidateRecord>],
) -> Result<BufWriter<File>, CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(
        &mut w,
        &CheckpointHeader {
            config: config.clone(),
        },
    )?;
    w.write_all(b"\n")?;
    for (index, record) in records.iter().enumerate() {
        if let Some(record) = record {
            serde_json::to_writer(
                &mut w,
                &CheckpointLine {
                    index,
                    record: *record,
                },
            )?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(w)
}

fn summarize(
    doc: &HandSpecDocument,
    best: ThumbBase,
    records: &[CandidateRecord],
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<BestSummary, CliError> {
    let spec = doc.resolve()?;
    let hand = spec.template.build(best)?;
    let report = run_kapandji(&hand, &spec.settings.ik)?;
    let (opposability, grid) = evaluate_opposability(&hand, &spec.settings.opposability)?;
    let record = *records
        .iter()
        .find(|r| r.base == best)
        .expect("winner comes from the records");

    if let Some(format) = opts.clouds {
        let dir = out_dir.join("clouds");
        fs::create_dir_all(&dir)?;
        let mut keys = vec![LayerKey::thumb_pulp()];
        for finger in Finger::OPPOSED {
            for site in SiteName::KAPANDJI {
                keys.push(LayerKey::new(finger, site));
            }
        }
        for key in keys {
            let name = format!(
                "{}-{}.{}",
                key.chain,
                key.site.as_str().to_lowercase(),
                format.extension()
            );
            let file = BufWriter::new(File::create(dir.join(name))?);
            export_cloud(&grid, key, format, file)?;
        }
    }

    if !opts.gestures.is_empty() {
        let dir = out_dir.join("gestures");
        fs::create_dir_all(&dir)?;
        for name in &opts.gestures {
            let pose = gesture_pose(name)?;
            let tips = pose.tip_positions(&hand)?;
            let value = serde_json::json!({ "pose": pose, "tip_positions_mm": tips });
            let mut text = serde_json::to_string_pretty(&value)?;
            text.push('\n');
            fs::write(dir.join(format!("{name}.json")), text)?;
        }
    }

    Ok(BestSummary {
        base: best,
        record,
        kapandji_pass: report.pass,
        kapandji: report
            .entries
            .iter()
            .map(|e| TargetSummary {
                finger: e.finger,
                site: e.site,
                status: e.result.status,
                residual_mm: e.result.residual,
                iterations: e.result.iterations,
            })
            .collect(),
        opposability,
    })
}

/// Runs the whole search. The candidate table is written even when no
/// candidate is feasible, in which case `NoFeasibleCandidate` is returned.
pub fn run_pipeline(
    doc: &HandSpecDocument,
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<PipelineOutcome, CliError> {
    let spec = doc.resolve()?;
    for name in &opts.gestures {
        gesture_pose(name)?;
    }
    fs::create_dir_all(out_dir)?;
    let bases = enumerate_candidates(&spec.intervals)?;
    let config = serde_json::to_value(doc)?;
    let checkpoint = out_dir.join(CHECKPOINT_FILE);

    let mut records = load_checkpoint(&checkpoint, &config, &bases)?;
    let resumed = records.iter().filter(|r| r.is_some()).count();
    let mut writer = open_checkpoint(&checkpoint, &config, &records)?;
    let pending: Vec<usize> = (0..bases.len()).filter(|i| records[*i].is_none()).collect();

    let (tx, rx) = mpsc::channel::<(usize, CandidateRecord)>();
    let write_result = std::thread::scope(|s| -> Result<(), CliError> {
        let (template, settings, bases) = (&spec.template, &spec.settings, &bases);
        s.spawn(move || {
            pending.par_iter().for_each_with(tx, |tx, &i| {
                let _ = tx.send((i, evaluate_candidate(template, bases[i], settings)));
            });
        });
        for (index, record) in rx {
            serde_json::to_writer(&mut writer, &CheckpointLine { index, record })?;
            writer.write_all(b"\n")?;
            writer.flush()?;
            records[index] = Some(record);
        }
        Ok(())
    });
    write_result?;

    let records: Vec<CandidateRecord> = records
        .into_iter()
        .map(|r| r.expect("every candidate evaluated"))
        .collect();
    write_candidates(
        &records,
        BufWriter::new(File::create(out_dir.join(CANDIDATES_FILE))?),
    )?;

    let best = select_best(&records, spec.settings.threshold)?;
    let summary = summarize(doc, best, &records, out_dir, opts)?;
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(out_dir.join(BEST_FILE), text)?;

    Ok(PipelineOutcome {
        records,
        best,
        summary,
        resumed,
    })
}
